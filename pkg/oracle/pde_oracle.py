#!/usr/bin/env python3
"""Entry oracle for a parametric Poisson problem on the unit square.

Solves -div(kappa grad u) = f with homogeneous Dirichlet boundary for
parameters (alpha, beta) in [0,1]^2, where

    kappa(x, y) = 1 + alpha * (1 + sin(pi x) sin(pi y))
    f(x, y)     = cos(pi beta x) * cos(pi beta y)

on a 5-point finite-volume grid with N interior nodes per axis. The
process speaks a line protocol on stdin/stdout: each request is one JSON
object, each answer one JSON line, strictly alternating:

    {"op": "hello"}                          -> {"ok": true, "m": ..., "n": ...,
                                                 "dim": N*N, "inner": {...}}
    {"op": "entry", "i": int, "j": int}      -> {"ok": true, "coeffs": [...]}
    {"op": "row", "i": int}                  -> {"ok": true, "coeffs": [[...], ...]}
    {"op": "col", "j": int}                  -> {"ok": true, "coeffs": [[...], ...]}
    {"op": "shutdown"}                       -> {"ok": true}, then exit 0

Indices on the wire are 0-based: entry (i, j) is the solution at
(alpha_i, beta_j) on uniform inclusive parameter grids over [0, 1].
Solution vectors are nodal values, row-major over (y, x). The announced
inner product is the stiffness matrix of the plain Laplacian (the
discrete H^1_0 metric), dumped as a dense float64 row-major sidecar file.

Usage: pde_oracle.py --n 31 --grid 100 --gram-out /tmp/gram.bin
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SolveFailure(Exception):
    """The discrete system could not be solved to tolerance."""


def kappa_field(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 1.0 + alpha * (1.0 + np.sin(np.pi * x) * np.sin(np.pi * y))


def rhs_field(beta: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.cos(np.pi * beta * x) * np.cos(np.pi * beta * y)


class PoissonProblem:
    """Finite-volume discretization with N interior nodes per axis.

    Unknowns sit at (x_a, y_b) = (a h, b h), a, b = 1..N, h = 1/(N+1),
    flattened row-major over (y, x). Face conductivities are kappa
    evaluated at face midpoints, which keeps the operator symmetric, and
    kappa >= 1 keeps it positive definite.
    """

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.N = N
        self.h = 1.0 / (N + 1)
        axis = self.h * np.arange(1, N + 1)
        self.x, self.y = np.meshgrid(axis, axis, indexing="xy")  # (y rows, x cols)
        self._lu_cache: dict[float, object] = {}

    @property
    def dim(self) -> int:
        return self.N * self.N

    def operator(self, alpha: float) -> sp.csr_matrix:
        N, h = self.N, self.h
        kE = kappa_field(alpha, self.x + h / 2, self.y)
        kW = kappa_field(alpha, self.x - h / 2, self.y)
        kN = kappa_field(alpha, self.x, self.y + h / 2)
        kS = kappa_field(alpha, self.x, self.y - h / 2)
        diag = (kE + kW + kN + kS).ravel() / h**2
        east = -kE / h**2
        east[:, -1] = 0.0  # no coupling across the right boundary
        north = -kN / h**2
        north[-1, :] = 0.0
        K = sp.diags(
            [diag, east.ravel()[:-1], east.ravel()[:-1], north.ravel()[:-N], north.ravel()[:-N]],
            [0, 1, -1, N, -N],
            format="csr",
        )
        return K

    def laplace_gram(self) -> np.ndarray:
        """Dense stiffness matrix of -Laplace scaled to the H^1_0 metric."""
        return (self.h**2 * self.operator(0.0)).toarray()

    def _lu(self, alpha: float):
        if alpha not in self._lu_cache:
            self._lu_cache[alpha] = splu(sp.csc_matrix(self.operator(alpha)))
        return self._lu_cache[alpha]

    def solve(self, alpha: float, beta: float) -> np.ndarray:
        f = rhs_field(beta, self.x, self.y).ravel()
        u = self._lu(alpha).solve(f)
        residual = self.operator(alpha) @ u - f
        if np.linalg.norm(residual) > 1e-10 * max(np.linalg.norm(f), 1e-300):
            raise SolveFailure(f"residual too large at alpha={alpha}, beta={beta}")
        return u


class OracleServer:
    """Request loop with per-entry memoization of solves."""

    def __init__(self, problem: PoissonProblem, grid: int, gram_path: str):
        self.problem = problem
        self.m = grid
        self.n = grid
        self.alphas = np.linspace(0.0, 1.0, grid)
        self.betas = np.linspace(0.0, 1.0, grid)
        self.gram_path = gram_path
        self._memo: dict[tuple[int, int], np.ndarray] = {}

    def entry(self, i: int, j: int) -> np.ndarray:
        key = (i, j)
        if key not in self._memo:
            self._memo[key] = self.problem.solve(self.alphas[i], self.betas[j])
        return self._memo[key]

    def write_gram(self) -> None:
        self.problem.laplace_gram().astype("<f8").tofile(self.gram_path)

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        if op == "hello":
            return {"ok": True, "m": self.m, "n": self.n, "dim": self.problem.dim,
                    "inner": {"kind": "gram_file", "path": self.gram_path,
                              "layout": "float64-little-endian-row-major"}}
        if op == "entry":
            i, j = int(req["i"]), int(req["j"])
            if not (0 <= i < self.m and 0 <= j < self.n):
                return {"ok": False, "error": "index out of range"}
            return {"ok": True, "coeffs": self.entry(i, j).tolist()}
        if op == "row":
            i = int(req["i"])
            if not 0 <= i < self.m:
                return {"ok": False, "error": "index out of range"}
            return {"ok": True, "coeffs": [self.entry(i, j).tolist() for j in range(self.n)]}
        if op == "col":
            j = int(req["j"])
            if not 0 <= j < self.n:
                return {"ok": False, "error": "index out of range"}
            return {"ok": True, "coeffs": [self.entry(i, j).tolist() for i in range(self.m)]}
        if op == "shutdown":
            return {"ok": True, "_shutdown": True}
        return {"ok": False, "error": f"unknown op {op!r}"}

    def serve(self, stdin=None, stdout=None) -> int:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        self.write_gram()
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            try:
                req = json.loads(line)
                if not isinstance(req, dict):
                    raise ValueError("request is not an object")
            except (json.JSONDecodeError, ValueError) as exc:
                answer = {"ok": False, "error": f"malformed request: {exc}"}
            else:
                try:
                    answer = self.handle(req)
                except (KeyError, TypeError, ValueError, SolveFailure) as exc:
                    answer = {"ok": False, "error": str(exc)}
            shutdown = answer.pop("_shutdown", False)
            stdout.write(json.dumps(answer, allow_nan=False) + "\n")
            stdout.flush()
            if shutdown:
                return 0
        return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="parametric Poisson entry oracle")
    parser.add_argument("--n", type=int, default=31, help="interior grid nodes per axis")
    parser.add_argument("--grid", type=int, default=100, help="parameter grid points per axis")
    parser.add_argument("--gram-out", default=None,
                        help="where to dump the inner-product matrix (default: temp file)")
    args = parser.parse_args(argv)
    if args.n < 1 or args.grid < 1:
        print("pde_oracle: --n and --grid must be >= 1", file=sys.stderr)
        return 2
    gram_path = args.gram_out
    if gram_path is None:
        fd, gram_path = tempfile.mkstemp(prefix="pde_oracle_gram_", suffix=".bin")
        import os

        os.close(fd)
    server = OracleServer(PoissonProblem(args.n), args.grid, gram_path)
    return server.serve()


if __name__ == "__main__":
    sys.exit(main())
