"""Wire protocol tests against the loopback oracle subprocess."""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bmx.core import IndexSet
from bmx.cross import abcd, MatrixAccessor
from bmx.errors import BadGramFile, OracleError, OutOfBounds, ProtocolError, SpawnFailure
from bmx.oracle import OracleConnection, oracle_handshake

from conftest import random_bmatrix, random_spec

LOOPBACK = Path(__file__).with_name("loopback_oracle.py")


def save_matrix(tmp_path, A, gram=None):
    path = tmp_path / "matrix.npz"
    if gram is None:
        np.savez(path, coeffs=A.data, weights=A.spec.weights)
    else:
        gram_path = tmp_path / "gram.bin"
        gram.astype("<f8").tofile(gram_path)
        np.savez(path, coeffs=A.data, gram_path=str(gram_path))
    return path


def loopback_cmd(path):
    return [sys.executable, str(LOOPBACK), str(path)]


@pytest.fixture
def diag_oracle(tmp_path, rng):
    spec = random_spec(rng, 3)
    A = random_bmatrix(rng, 4, 5, spec)
    acc, hello = oracle_handshake(loopback_cmd(save_matrix(tmp_path, A)))
    yield acc, hello, A
    acc.close()


class TestHandshake:
    def test_hello_fields(self, diag_oracle):
        acc, hello, A = diag_oracle
        assert (hello.m, hello.n, hello.dim) == (4, 5, 3)
        assert acc.shape == (4, 5)
        assert acc.spec.kind == "diagonal"
        assert np.allclose(acc.spec.weights, A.spec.weights)

    def test_second_hello_rejected(self, diag_oracle):
        acc, _, _ = diag_oracle
        with pytest.raises(ProtocolError):
            acc.connection.hello()

    def test_gram_file_round_trip(self, tmp_path, rng):
        spec = random_spec(rng, 4, "gram")
        A = random_bmatrix(rng, 3, 3, spec)
        path = save_matrix(tmp_path, A, gram=spec.gram_matrix)
        acc, hello = oracle_handshake(loopback_cmd(path))
        try:
            assert acc.spec.kind == "gram"
            assert np.allclose(acc.spec.gram_matrix, spec.gram_matrix)
        finally:
            acc.close()

    def test_wrong_size_gram_file(self, tmp_path, rng):
        spec = random_spec(rng, 4, "gram")
        A = random_bmatrix(rng, 3, 3, spec)
        path = save_matrix(tmp_path, A, gram=spec.gram_matrix)
        gram_path = tmp_path / "gram.bin"
        gram_path.write_bytes(gram_path.read_bytes()[:-8])  # truncate
        with pytest.raises(BadGramFile):
            oracle_handshake(loopback_cmd(path))

    def test_spawn_failure(self):
        with pytest.raises(SpawnFailure):
            oracle_handshake(["/nonexistent/solver"])

    def test_malformed_hello_is_protocol_error(self):
        cmd = [sys.executable, "-c",
               "import sys; sys.stdin.readline(); print('not json'); sys.stdout.flush(); sys.stdin.readline()"]
        with pytest.raises(ProtocolError):
            oracle_handshake(cmd)


class TestFetch:
    def test_round_trip_fidelity(self, diag_oracle):
        acc, _, A = diag_oracle
        full = acc.full()
        assert np.max(np.abs(full.data - A.data)) <= 1e-15 * max(1.0, np.abs(A.data).max())

    def test_entry_from_cached_row_costs_no_wire_call(self, diag_oracle):
        acc, _, _ = diag_oracle
        acc.row(2)
        before = acc.connection.request_count
        e = acc.entry(2, 3)
        assert acc.connection.request_count == before
        assert e.coeffs.shape == (3,)

    def test_row_col_overlap_consistent(self, diag_oracle):
        acc, _, _ = diag_oracle
        row = acc.row(1)
        col = acc.col(2)
        assert np.max(np.abs(row.data[0, 1] - col.data[0, 0])) <= 1e-12

    def test_repeated_fetch_cached(self, diag_oracle):
        acc, _, _ = diag_oracle
        acc.col(4)
        before = acc.connection.request_count
        acc.col(4)
        acc.cols(IndexSet((4,)))
        assert acc.connection.request_count == before

    def test_out_of_range_is_local(self, diag_oracle):
        acc, _, _ = diag_oracle
        before = acc.connection.request_count
        with pytest.raises(OutOfBounds):
            acc.col(6)
        with pytest.raises(OutOfBounds):
            acc.entry(5, 1)
        assert acc.connection.request_count == before  # request never sent

    def test_oracle_error_surfaces(self, diag_oracle):
        acc, _, _ = diag_oracle
        with pytest.raises(OracleError):
            acc.connection.request({"op": "bogus"})


class TestLifecycle:
    def test_shutdown_exits_cleanly_within_grace(self, tmp_path, rng):
        A = random_bmatrix(rng, 2, 2, random_spec(rng, 2))
        acc, _ = oracle_handshake(loopback_cmd(save_matrix(tmp_path, A)))
        proc = acc.connection.proc
        acc.close()
        deadline = time.monotonic() + 5.0
        while proc.poll() is None and time.monotonic() < deadline:
            time.sleep(0.01)
        assert proc.returncode == 0

    def test_close_idempotent(self, tmp_path, rng):
        A = random_bmatrix(rng, 2, 2, random_spec(rng, 2))
        acc, _ = oracle_handshake(loopback_cmd(save_matrix(tmp_path, A)))
        acc.close()
        acc.close()


class TestOracleEquivalence:
    def test_abcd_identical_over_dense_and_oracle(self, tmp_path, rng):
        spec = random_spec(rng, 4)
        A = random_bmatrix(rng, 6, 7, spec)
        dense_run = abcd(MatrixAccessor.from_matrix(A), 5, 1, rng_seed=99)
        acc, _ = oracle_handshake(loopback_cmd(save_matrix(tmp_path, A)))
        try:
            oracle_run = abcd(acc, 5, 1, rng_seed=99)
        finally:
            acc.close()
        assert dense_run.pivots == oracle_run.pivots
        assert dense_run.I.indices == oracle_run.I.indices
        assert dense_run.J.indices == oracle_run.J.indices
        for (g1, u1, v1), (g2, u2, v2) in zip(dense_run.dyads.terms, oracle_run.dyads.terms):
            assert np.max(np.abs(g1.coeffs - g2.coeffs)) <= 1e-12
            assert np.max(np.abs(u1 - u2)) <= 1e-12
            assert np.max(np.abs(v1 - v2)) <= 1e-12
