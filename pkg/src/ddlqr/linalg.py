"""Dense matrix kernel: SVD, pseudo-inverse, spectral radius, and the two
structured equation solvers (discrete Lyapunov, discrete Riccati) the rest of
the package builds on.

Matrices are plain 2-D float ndarrays. Every operation rejects non-finite
input; none of them mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NotSchur, NotStabilizable

# Singular value sigma_i counts as nonzero iff sigma_i > RANK_TOL_FACTOR * sigma_max * max(rows, cols)
RANK_TOL_FACTOR = 1e-10

DARE_REL_TOL = 1e-12
DARE_MAX_ITER = 100_000


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return ``M`` as a finite 2-D float array."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInput(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return A


def _require_square(A: np.ndarray, name: str) -> None:
    if A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {A.shape}")


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``M = U @ diag(s) @ V.T`` with ``s`` sorted nonincreasing."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def smax(self) -> float:
        return float(self.s[0]) if self.s.size else 0.0

    @property
    def smin(self) -> float:
        return float(self.s[-1]) if self.s.size else 0.0


def svd(M) -> SvdResult:
    """Full singular value decomposition of a real matrix."""
    A = as_matrix(M, "svd input")
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    return SvdResult(U=U, s=s, V=Vt.T)


def rank_tolerance(sv: SvdResult, shape: tuple[int, int]) -> float:
    """Default threshold below which singular values count as zero."""
    return RANK_TOL_FACTOR * sv.smax * max(shape)


def matrix_rank(M, rank_tol: float | None = None) -> int:
    """Numerical rank via SVD with the package-wide tolerance convention."""
    A = as_matrix(M, "rank input")
    sv = svd(A)
    tol = rank_tolerance(sv, A.shape) if rank_tol is None else float(rank_tol)
    return int(np.sum(sv.s > tol))


def pinv(M, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD with small singular values truncated.

    For a full-row-rank matrix this is the right inverse: ``M @ pinv(M) = I``.
    """
    A = as_matrix(M, "pinv input")
    sv = svd(A)
    tol = rank_tolerance(sv, A.shape) if rank_tol is None else float(rank_tol)
    if rank_tol is not None and tol <= 0:
        raise InvalidInput("rank_tol must be positive")
    r = int(np.sum(sv.s > tol))
    if r == 0:
        return np.zeros((A.shape[1], A.shape[0]))
    return (sv.V[:, :r] / sv.s[:r]) @ sv.U[:, :r].T


def nullspace_basis(M, rank_tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the right nullspace of ``M``."""
    A = as_matrix(M, "nullspace input")
    sv = svd(A)
    tol = rank_tolerance(sv, A.shape) if rank_tol is None else float(rank_tol)
    r = int(np.sum(sv.s > tol))
    return sv.V[:, r:]


def spectral_radius(M) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    A = as_matrix(M, "spectral_radius input")
    _require_square(A, "spectral_radius input")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def is_schur(M, tol: float = 0.0) -> bool:
    """True iff ``spectral_radius(M) < 1 - tol``."""
    return spectral_radius(M) < 1.0 - tol


def sym(M: np.ndarray) -> np.ndarray:
    """Symmetric part ``(M + M.T) / 2``."""
    return 0.5 * (M + M.T)


def dlyap(F, W) -> np.ndarray:
    """Solve the discrete Lyapunov equation ``F P F' - P + W = 0`` for Schur F.

    Solved by Kronecker vectorization, exact at the desk scales used here
    (n <= 20). The solution is the closed-loop Gramian when ``W = I``.
    """
    Fm = as_matrix(F, "F")
    Wm = as_matrix(W, "W")
    _require_square(Fm, "F")
    _require_square(Wm, "W")
    if Fm.shape != Wm.shape:
        raise InvalidInput(f"F and W shapes differ: {Fm.shape} vs {Wm.shape}")
    if not is_schur(Fm):
        raise NotSchur(f"F has spectral radius {spectral_radius(Fm):.6g} >= 1")
    n = Fm.shape[0]
    lhs = np.eye(n * n) - np.kron(Fm, Fm)
    P = np.linalg.solve(lhs, Wm.reshape(-1)).reshape(n, n)
    return sym(P)


def dare_gain(A, B, Q, R) -> tuple[np.ndarray, np.ndarray]:
    """LQR gain and cost matrix from the discrete Riccati equation.

    Runs the fixed-point recursion
    ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` from ``P = Q`` until the
    relative update drops below 1e-12, then returns
    ``K = -(R + B'PB)^-1 B'PA`` and P. The iteration converging and A + BK
    being Schur is taken as the stabilizability verdict; divergence raises
    ``NotStabilizable``.
    """
    Am = as_matrix(A, "A")
    Bm = as_matrix(B, "B")
    Qm = as_matrix(Q, "Q")
    Rm = as_matrix(R, "R")
    _require_square(Am, "A")
    n = Am.shape[0]
    if Bm.shape[0] != n:
        raise InvalidInput(f"B must have {n} rows, got {Bm.shape}")
    m = Bm.shape[1]
    if Qm.shape != (n, n) or Rm.shape != (m, m):
        raise InvalidInput("Q/R dimensions inconsistent with (A, B)")

    P = Qm.copy()
    converged = False
    for _ in range(DARE_MAX_ITER):
        BtP = Bm.T @ P
        try:
            gain_term = np.linalg.solve(Rm + BtP @ Bm, BtP @ Am)
        except np.linalg.LinAlgError as exc:
            raise NotStabilizable("Riccati recursion hit a singular inner solve") from exc
        P_next = Qm + Am.T @ P @ Am - Am.T @ P @ Bm @ gain_term
        if not np.all(np.isfinite(P_next)):
            raise NotStabilizable("Riccati recursion diverged")
        if np.linalg.norm(P_next - P, "fro") <= DARE_REL_TOL * max(1.0, np.linalg.norm(P_next, "fro")):
            P = P_next
            converged = True
            break
        P = P_next
    if not converged:
        raise NotStabilizable(f"Riccati recursion did not converge in {DARE_MAX_ITER} iterations")

    P = sym(P)
    BtP = Bm.T @ P
    K = -np.linalg.solve(Rm + BtP @ Bm, BtP @ Am)
    if not is_schur(Am + Bm @ K):
        raise NotStabilizable("Riccati fixed point does not yield a Schur closed loop")
    return K, P
