"""Client for entry oracles: external solvers serving matrix slices.

Wire protocol (newline-delimited JSON over the child's standard
input/output, one request then one response, strictly alternating):

    {"op": "hello"}
    {"op": "entry", "i": int, "j": int}      # 0-based on the wire
    {"op": "row", "i": int}
    {"op": "col", "j": int}
    {"op": "shutdown"}

Responses are ``{"ok": true, ...}`` or ``{"ok": false, "error": str}``.
The hello response carries "m", "n", "dim" and "inner", where inner is
either ``{"kind": "diag", "weights": [...]}`` or
``{"kind": "gram_file", "path": ..., "layout":
"float64-little-endian-row-major"}`` pointing at a sidecar binary file
of 8 * dim**2 bytes. Floats travel as JSON numbers. Library indices are
1-based; the conversion to the wire's 0-based convention happens here
and nowhere else.
"""

from __future__ import annotations

import json
import os
import subprocess
from dataclasses import dataclass

import numpy as np

from .cross import MatrixAccessor
from .errors import BadGramFile, LengthMismatch, OracleError, ProtocolError, SpawnFailure
from .hilbert import InnerProductSpec

SHUTDOWN_GRACE_S = 5.0


@dataclass
class OracleHello:
    """Parsed hello response: matrix extents plus the inner-product recipe."""

    m: int
    n: int
    dim: int
    inner: dict


class OracleConnection:
    """One subprocess speaking the line protocol; exclusive to one accessor."""

    def __init__(self, cmdline: list[str]):
        self.cmdline = list(cmdline)
        self.request_count = 0
        self._greeted = False
        self._closed = False
        try:
            self.proc = subprocess.Popen(
                self.cmdline,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot start oracle {self.cmdline!r}: {exc}") from exc

    def request(self, payload: dict) -> dict:
        if self._closed:
            raise ProtocolError("connection already closed")
        line = json.dumps(payload, separators=(",", ":"), allow_nan=False)
        self.request_count += 1
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
            answer = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"oracle pipe broke: {exc}") from exc
        if answer == "":
            raise ProtocolError("oracle closed its output stream")
        try:
            obj = json.loads(answer)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed JSON from oracle: {answer!r}") from exc
        if not isinstance(obj, dict) or "ok" not in obj:
            raise ProtocolError(f"response is not an object with 'ok': {obj!r}")
        if not obj["ok"]:
            raise OracleError(str(obj.get("error", "unspecified oracle error")))
        return obj

    def hello(self) -> OracleHello:
        if self._greeted:
            raise ProtocolError("handshake already performed on this connection")
        obj = self.request({"op": "hello"})
        self._greeted = True
        try:
            m = int(obj["m"])
            n = int(obj["n"])
            dim = int(obj["dim"])
            inner = obj["inner"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"hello response missing fields: {obj!r}") from exc
        if m < 1 or n < 1 or dim < 1 or not isinstance(inner, dict):
            raise ProtocolError(f"hello response has invalid fields: {obj!r}")
        return OracleHello(m=m, n=n, dim=dim, inner=inner)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write('{"op":"shutdown"}\n')
                self.proc.stdin.flush()
                self.proc.stdout.readline()  # the acknowledging response, if any
            except (BrokenPipeError, OSError):
                pass
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=SHUTDOWN_GRACE_S)
        except (subprocess.TimeoutExpired, OSError):
            self.proc.kill()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


class _OracleFetcher:
    """Adapter giving MatrixAccessor 0-based coefficient fetches."""

    def __init__(self, conn: OracleConnection, hello: OracleHello):
        self._conn = conn
        self._hello = hello

    def _coeffs(self, obj: dict, count: int | None) -> np.ndarray:
        coeffs = obj.get("coeffs")
        if coeffs is None:
            raise ProtocolError(f"response lacks 'coeffs': {obj!r}")
        arr = np.asarray(coeffs, dtype=float)
        if count is None:
            if arr.shape != (self._hello.dim,):
                raise LengthMismatch(f"expected {self._hello.dim} coefficients, got {arr.shape}")
        else:
            if arr.shape != (count, self._hello.dim):
                raise LengthMismatch(
                    f"expected {count} vectors of length {self._hello.dim}, got {arr.shape}")
        return arr

    def fetch_entry(self, i0: int, j0: int) -> np.ndarray:
        return self._coeffs(self._conn.request({"op": "entry", "i": i0, "j": j0}), None)

    def fetch_row(self, i0: int) -> np.ndarray:
        return self._coeffs(self._conn.request({"op": "row", "i": i0}), self._hello.n)

    def fetch_col(self, j0: int) -> np.ndarray:
        return self._coeffs(self._conn.request({"op": "col", "j": j0}), self._hello.m)


def spec_from_inner(inner: dict, dim: int) -> InnerProductSpec:
    """Build the inner-product spec a hello response describes."""
    kind = inner.get("kind")
    if kind == "diag":
        weights = inner.get("weights")
        if not isinstance(weights, list) or len(weights) != dim:
            raise ProtocolError(f"diag inner needs {dim} weights, got {inner!r}")
        return InnerProductSpec.diagonal(weights)
    if kind == "gram_file":
        path = inner.get("path")
        if not isinstance(path, str):
            raise ProtocolError(f"gram_file inner needs a path, got {inner!r}")
        expected = 8 * dim * dim
        try:
            size = os.path.getsize(path)
        except OSError as exc:
            raise BadGramFile(f"cannot stat gram file {path!r}: {exc}") from exc
        if size != expected:
            raise BadGramFile(f"gram file {path!r} holds {size} bytes, expected {expected}")
        G = np.fromfile(path, dtype="<f8").reshape(dim, dim)
        try:
            return InnerProductSpec.gram(G)
        except ValueError as exc:
            raise BadGramFile(f"gram file {path!r}: {exc}") from exc
    raise ProtocolError(f"unknown inner kind in hello: {inner!r}")


def oracle_handshake(cmdline: list[str]) -> tuple[MatrixAccessor, OracleHello]:
    """Spawn a solver, perform the hello exchange, and wrap it in an accessor.

    The accessor owns the connection: closing (or dropping) it sends the
    shutdown request and waits for the child to exit.
    """
    conn = OracleConnection(cmdline)
    try:
        hello = conn.hello()
        spec = spec_from_inner(hello.inner, hello.dim)
    except Exception:
        conn.close()
        raise
    fetcher = _OracleFetcher(conn, hello)
    acc = MatrixAccessor(hello.m, hello.n, spec, fetcher=fetcher, connection=conn)
    return acc, hello
