"""LQR design paths: model-based synthesis plus the six data-driven
formulations (indirect certainty-equivalence, compact reduction, plain /
orthogonality-constrained / regularized direct programs, and the oracle ideal
program), together with the closed-loop certificates and the noise-bound
stability test.

All direct variants share one convex template in the lifted variable
Y (T x n): minimize trace(Q X0 Y) + trace(X) subject to

    [[X0 Y - I,  X1 Y ],      [[X,        R^1/2 U0 Y],
     [  *,       X0 Y ]] >= 0,  [  *,      X0 Y     ]] >= 0,

with X0 Y constrained symmetric. The variants differ only in the data matrix
entering the top-right block (X1, or X1 - D0 for the oracle program), in
whether the nullspace equality Pi Y = 0 is imposed, and in the penalty terms
lambda * ||Pi Y|| and rho * trace(V) with V >= Y (X0 Y)^-1 Y' added to the
objective. The gain is recovered as K = U0 Y (X0 Y)^-1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg, sdp
from .data import Dataset, DerivedData, derive, least_squares_id
from .errors import (
    DegenerateRecovery,
    Infeasible,
    InvalidInput,
    NotIdentifiable,
    NotStabilizable,
    OracleRequired,
)
from .system import LqrWeights, LtiSystem

VARIANTS = (
    "indirect_ce",
    "compact",
    "direct_plain",
    "direct_orthogonal",
    "direct_regularized",
    "direct_ideal",
)

NORM_KINDS = ("frobenius", "spectral")

# Gain recovery refuses to invert X0 Y beyond this condition number.
RECOVERY_COND_LIMIT = 1e12

# Route agreement required between the two internal compact implementations.
COMPACT_ROUTE_TOL = 1e-5

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-5.0, 0.0, 40))
LAMBDA_MATCH_RTOL = 1e-4

ETA_SCAN = (1.01, 1.1, 1.5, 2.0, 5.0)


@dataclass(frozen=True)
class Method:
    """Synthesis recipe: formulation variant plus regularization knobs."""

    variant: str
    lam: float = 0.0
    rho: float = 0.0
    norm_kind: str = "frobenius"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInput(f"unknown variant {self.variant!r}")
        if self.lam < 0 or self.rho < 0:
            raise InvalidInput("lam and rho must be nonnegative")
        if self.norm_kind not in NORM_KINDS:
            raise InvalidInput(f"norm_kind must be one of {NORM_KINDS}")

    def label(self) -> str:
        return self.variant


@dataclass
class LqrSolution:
    """Synthesis output: gain, Gramian, raw lifted variables, and objective."""

    K: np.ndarray | None
    P: np.ndarray | None
    objective: float
    status: str
    method: Method | None = None
    Y: np.ndarray | None = None
    X: np.ndarray | None = None
    G: np.ndarray | None = None
    trace_cost: float = float("nan")
    penalty_ce: float = 0.0
    penalty_robust: float = 0.0
    failure_reason: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == sdp.STATUS_OPTIMAL


def model_lqr(sys: LtiSystem, w: LqrWeights) -> LqrSolution:
    """Optimal state feedback for a known plant via the Riccati recursion.

    The returned ``P`` is the closed-loop Gramian, so ``objective`` equals
    trace(Q P + K' R K P), the squared H2 norm. Serves the indirect pipeline
    when handed an identified pair.
    """
    K, _ = linalg.dare_gain(sys.A, sys.B, w.Q, w.R)
    P = linalg.dlyap(sys.A + sys.B @ K, np.eye(sys.n))
    cost = float(np.trace(w.Q @ P + K.T @ w.R @ K @ P))
    X = w.R_sqrt @ K @ P @ K.T @ w.R_sqrt
    return LqrSolution(
        K=K,
        P=P,
        objective=cost,
        status=sdp.STATUS_OPTIMAL,
        method=None,
        X=linalg.sym(X),
        trace_cost=cost,
    )


# ---------------------------------------------------------------------------
# Shared SDP template for the direct variants


@dataclass
class _DirectProgram:
    prog: sdp.ConicProgram
    y_vars: range
    x_vars: list[int]
    x_index: dict[tuple[int, int], int]
    s_var: int | None
    v_vars: list[int] | None
    v_index: dict[tuple[int, int], int] | None
    T: int
    n: int
    m: int


def _upper_triangle(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for j in range(dim) for i in range(j + 1)]


def _build_direct_program(
    ds: Dataset,
    w: LqrWeights,
    dd: DerivedData,
    data_block: np.ndarray,
    orthogonal: bool,
    lam: float,
    rho: float,
    norm_kind: str,
    zero_gain: bool = False,
) -> _DirectProgram:
    T, n, m = ds.T, ds.n, ds.m
    U0, X0 = ds.U0, ds.X0
    prog = sdp.ConicProgram()
    y_vars = prog.add_variables(T * n)

    def yv(i: int, j: int) -> int:
        return y_vars[i * n + j]

    x_tri = _upper_triangle(m)
    x_vars = list(prog.add_variables(len(x_tri)))
    x_index = {ij: v for ij, v in zip(x_tri, x_vars)}
    s_var = prog.add_variables(1)[0] if lam > 0 else None
    v_vars = None
    v_index = None
    if rho > 0:
        v_tri = _upper_triangle(T)
        v_vars = list(prog.add_variables(len(v_tri)))
        v_index = {ij: v for ij, v in zip(v_tri, v_vars)}

    def x_var(i: int, j: int) -> int:
        return x_index[(i, j) if i <= j else (j, i)]

    def sym_product_term(block, v: int, left: np.ndarray, col_i: int, row_a: int, col_j: int, offset: int):
        # contribution of Y[col_i, col_j] to sym(left @ Y) at block offset:
        # 0.5 * left[a, i] on each of (a, j) and (j, a); diagonal gets the full value
        coef = left[row_a, col_i]
        if coef == 0.0:
            return
        if row_a == col_j:
            prog.psd_term(block, v, offset + row_a, offset + row_a, coef)
        else:
            lo, hi = min(row_a, col_j), max(row_a, col_j)
            prog.psd_term(block, v, offset + lo, offset + hi, 0.5 * coef)

    # Stability block: [[sym(X0 Y) - I, D Y], [*, sym(X0 Y)]] with D the
    # variant's data matrix. sym() is enforced by the skew equalities below.
    lmi1 = prog.add_psd_block(2 * n)
    for a in range(n):
        prog.psd_const(lmi1, a, a, -1.0)
    for i in range(T):
        for j in range(n):
            v = yv(i, j)
            for a in range(n):
                sym_product_term(lmi1, v, X0, i, a, j, 0)
                sym_product_term(lmi1, v, X0, i, a, j, n)
                if data_block[a, i] != 0.0:
                    prog.psd_term(lmi1, v, a, n + j, data_block[a, i])

    # Performance block: [[X, R^1/2 U0 Y], [*, sym(X0 Y)]]
    lmi2 = prog.add_psd_block(m + n)
    RhU0 = w.R_sqrt @ U0
    for i in range(T):
        for j in range(n):
            v = yv(i, j)
            for a in range(m):
                if RhU0[a, i] != 0.0:
                    prog.psd_term(lmi2, v, a, m + j, RhU0[a, i])
            for a in range(n):
                sym_product_term(lmi2, v, X0, i, a, j, m)
    for (i, j), v in x_index.items():
        prog.psd_term(lmi2, v, i, j, 1.0)

    # X0 Y symmetric (the Gramian lives in this product)
    for a in range(n):
        for b in range(a + 1, n):
            coefs: dict[int, float] = {}
            for i in range(T):
                if X0[a, i] != 0.0:
                    coefs[yv(i, b)] = coefs.get(yv(i, b), 0.0) + X0[a, i]
                if X0[b, i] != 0.0:
                    coefs[yv(i, a)] = coefs.get(yv(i, a), 0.0) - X0[b, i]
            prog.add_equality(0.0, coefs)

    # Pi Y = 0 imposed through an orthonormal nullspace basis (full row rank)
    if orthogonal:
        N = dd.nullspace
        for c in range(N.shape[1]):
            for j in range(n):
                coefs = {yv(i, j): N[i, c] for i in range(T) if N[i, c] != 0.0}
                prog.add_equality(0.0, coefs)

    if zero_gain:
        for a in range(m):
            for j in range(n):
                coefs = {yv(i, j): U0[a, i] for i in range(T) if U0[a, i] != 0.0}
                prog.add_equality(0.0, coefs)

    if lam > 0:
        Pi = dd.Pi
        if norm_kind == "frobenius":
            exprs: list[sdp.Expr] = []
            for a in range(T):
                for j in range(n):
                    coefs = {yv(i, j): Pi[a, i] for i in range(T) if Pi[a, i] != 0.0}
                    if coefs:
                        exprs.append((0.0, coefs))
            prog.add_soc((0.0, {s_var: 1.0}), exprs)
        else:
            # spectral norm epigraph: [[s I, Pi Y], [*, s I]] >= 0
            blk = prog.add_psd_block(T + n)
            for d in range(T + n):
                prog.psd_term(blk, s_var, d, d, 1.0)
            for a in range(T):
                for j in range(n):
                    for i in range(T):
                        if Pi[a, i] != 0.0:
                            prog.psd_term(blk, yv(i, j), a, T + j, Pi[a, i])

    if rho > 0:
        # trace regularizer epigraph: [[V, Y], [*, sym(X0 Y)]] >= 0
        blk = prog.add_psd_block(T + n)
        for (i, j), v in v_index.items():
            prog.psd_term(blk, v, i, j, 1.0)
        for i in range(T):
            for j in range(n):
                v = yv(i, j)
                prog.psd_term(blk, v, i, T + j, 1.0)
                for a in range(n):
                    sym_product_term(blk, v, X0, i, a, j, T)

    # objective: trace(Q X0 Y) + trace(X) + lam * s + rho * trace(V)
    QX0 = w.Q @ X0
    for i in range(T):
        for b in range(n):
            if QX0[b, i] != 0.0:
                prog.add_objective_term(yv(i, b), QX0[b, i])
    for a in range(m):
        prog.add_objective_term(x_var(a, a), 1.0)
    if s_var is not None:
        prog.add_objective_term(s_var, lam)
    if v_vars is not None:
        for a in range(T):
            prog.add_objective_term(v_index[(a, a)], rho)

    return _DirectProgram(
        prog=prog,
        y_vars=y_vars,
        x_vars=x_vars,
        x_index=x_index,
        s_var=s_var,
        v_vars=v_vars,
        v_index=v_index,
        T=T,
        n=n,
        m=m,
    )


def _tri_to_full(values: np.ndarray, index: dict[tuple[int, int], int], dim: int) -> np.ndarray:
    M = np.zeros((dim, dim))
    for (i, j), v in index.items():
        M[i, j] = values[v]
        M[j, i] = values[v]
    return M


def _penalty_values(built: _DirectProgram, sol: sdp.ConicSolution, method: Method) -> tuple[float, float]:
    pen_ce = 0.0
    pen_robust = 0.0
    if built.s_var is not None:
        pen_ce = method.lam * float(sol.values[built.s_var])
    if built.v_index is not None:
        tr = sum(float(sol.values[built.v_index[(a, a)]]) for a in range(built.T))
        pen_robust = method.rho * tr
    return pen_ce, pen_robust


def _solve_direct(
    ds: Dataset,
    w: LqrWeights,
    dd: DerivedData,
    method: Method,
    data_block: np.ndarray,
    orthogonal: bool,
    lam: float,
    rho: float,
    zero_gain: bool = False,
) -> LqrSolution:
    built = _build_direct_program(
        ds, w, dd, data_block, orthogonal=orthogonal, lam=lam, rho=rho,
        norm_kind=method.norm_kind, zero_gain=zero_gain,
    )
    sol = sdp.solve(built.prog)
    if sol.status == sdp.STATUS_INFEASIBLE:
        raise Infeasible(f"{method.variant} program is infeasible")
    if sol.status != sdp.STATUS_OPTIMAL:
        return LqrSolution(
            K=None, P=None, objective=float("nan"), status=sdp.STATUS_NUMERICAL,
            method=method, failure_reason=f"solver: {sol.solver_status}",
        )

    x = sol.values
    Y = x[: built.T * built.n].reshape(built.T, built.n)
    X = _tri_to_full(x, built.x_index, built.m)
    P = linalg.sym(ds.X0 @ Y)
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > RECOVERY_COND_LIMIT:
        raise DegenerateRecovery(f"X0 Y has condition number {cond:.3g}")
    P_inv = np.linalg.inv(P)
    K = ds.U0 @ Y @ P_inv
    G = Y @ P_inv
    pen_ce, pen_robust = _penalty_values(built, sol, method)
    trace_cost = float(np.trace(w.Q @ P) + np.trace(X))

    out = LqrSolution(
        K=K, P=P, objective=sol.objective, status=sdp.STATUS_OPTIMAL, method=method,
        Y=Y, X=X, G=G, trace_cost=trace_cost, penalty_ce=pen_ce, penalty_robust=pen_robust,
    )
    # Never hand back a gain the formulation's own model rejects: solver-level
    # cone slack must not masquerade as a stabilizing solution.
    closed = data_block @ G
    if not linalg.is_schur(closed):
        out.status = sdp.STATUS_NUMERICAL
        out.failure_reason = "formulation closed loop not Schur"
    return out


def _pbh_stabilizable(A: np.ndarray, B: np.ndarray, tol_factor: float = 1e-10) -> bool:
    """Stabilizability margin test: rank [lambda I - A, B] at every unstable
    eigenvalue. Rejects pairs whose input authority is numerical dust, which
    the Riccati recursion would otherwise exploit with an absurd gain."""
    scale = max(1.0, float(np.linalg.norm(np.hstack([B, A]), 2)))
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - 1e-12:
            M = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
            if np.linalg.svd(M, compute_uv=False)[-1] <= tol_factor * scale:
                return False
    return True


def _wrap_riccati_solution(
    identified: LtiSystem, w: LqrWeights, dd: DerivedData, ds: Dataset, method: Method
) -> LqrSolution:
    if not _pbh_stabilizable(identified.A, identified.B):
        raise Infeasible("identified pair not stabilizable (vanishing input authority)")
    try:
        base = model_lqr(identified, w)
    except NotStabilizable as exc:
        raise Infeasible(f"identified pair not stabilizable: {exc}") from exc
    K, P = base.K, base.P
    G = dd.W0_pinv @ np.vstack([K, np.eye(ds.n)])
    Y = G @ P
    return LqrSolution(
        K=K, P=P, objective=base.objective, status=sdp.STATUS_OPTIMAL, method=method,
        Y=Y, X=base.X, G=G, trace_cost=base.objective,
    )


def _solve_compact_sdp(
    ds: Dataset, w: LqrWeights, dd: DerivedData, method: Method
) -> LqrSolution:
    """Compact program in (P, L = K P, X) after eliminating G."""
    n, m = ds.n, ds.m
    H = ds.X1 @ dd.W0_pinv  # [Bhat Ahat]
    prog = sdp.ConicProgram()
    p_tri = _upper_triangle(n)
    p_vars = list(prog.add_variables(len(p_tri)))
    p_index = {ij: v for ij, v in zip(p_tri, p_vars)}
    l_vars = prog.add_variables(m * n)

    def lv(i: int, j: int) -> int:
        return l_vars[i * n + j]

    x_tri = _upper_triangle(m)
    x_vars = list(prog.add_variables(len(x_tri)))
    x_index = {ij: v for ij, v in zip(x_tri, x_vars)}

    # [[P - I, Bhat L + Ahat P], [*, P]] >= 0
    lmi1 = prog.add_psd_block(2 * n)
    for a in range(n):
        prog.psd_const(lmi1, a, a, -1.0)
    for (i, j), v in p_index.items():
        prog.psd_term(lmi1, v, i, j, 1.0)
        prog.psd_term(lmi1, v, n + i, n + j, 1.0)
    Bh, Ah = H[:, :m], H[:, m:]
    for a in range(n):
        for i in range(m):
            for j in range(n):
                if Bh[a, i] != 0.0:
                    prog.psd_term(lmi1, lv(i, j), a, n + j, Bh[a, i])
        for i in range(n):
            for j in range(n):
                if Ah[a, i] != 0.0:
                    # P column j sees Ahat[a, i] * P[i, j]; fold symmetric pair
                    v = p_index[(i, j) if i <= j else (j, i)]
                    prog.psd_term(lmi1, v, a, n + j, Ah[a, i])

    # [[X, R^1/2 L], [*, P]] >= 0
    lmi2 = prog.add_psd_block(m + n)
    Rh = w.R_sqrt
    for (i, j), v in x_index.items():
        prog.psd_term(lmi2, v, i, j, 1.0)
    for a in range(m):
        for i in range(m):
            if Rh[a, i] != 0.0:
                for j in range(n):
                    prog.psd_term(lmi2, lv(i, j), a, m + j, Rh[a, i])
    for (i, j), v in p_index.items():
        prog.psd_term(lmi2, v, m + i, m + j, 1.0)

    for (i, j), v in p_index.items():
        coef = 1.0 if i == j else 2.0
        prog.add_objective_term(v, coef * w.Q[i, j])
    for a in range(m):
        prog.add_objective_term(x_index[(a, a)], 1.0)

    sol = sdp.solve(prog)
    if sol.status == sdp.STATUS_INFEASIBLE:
        raise Infeasible("compact program is infeasible")
    if sol.status != sdp.STATUS_OPTIMAL:
        return LqrSolution(
            K=None, P=None, objective=float("nan"), status=sdp.STATUS_NUMERICAL,
            method=method, failure_reason=f"solver: {sol.solver_status}",
        )
    P = _tri_to_full(sol.values, p_index, n)
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > RECOVERY_COND_LIMIT:
        raise DegenerateRecovery(f"P has condition number {cond:.3g}")
    L = sol.values[list(l_vars)].reshape(m, n)
    K = L @ np.linalg.inv(P)
    X = _tri_to_full(sol.values, x_index, m)
    G = dd.W0_pinv @ np.vstack([K, np.eye(n)])
    Y = G @ P
    out = LqrSolution(
        K=K, P=P, objective=sol.objective, status=sdp.STATUS_OPTIMAL, method=method,
        Y=Y, X=X, G=G, trace_cost=sol.objective,
    )
    if not linalg.is_schur(Ah + Bh @ K):
        out.status = sdp.STATUS_NUMERICAL
        out.failure_reason = "identified closed loop not Schur"
    return out


def synthesize(
    ds: Dataset,
    w: LqrWeights,
    method: Method,
    derived: DerivedData | None = None,
    zero_gain: bool = False,
) -> LqrSolution:
    """Run one data-driven LQR formulation on a dataset.

    Raises ``NotIdentifiable`` when the variant needs rank W0 = n + m,
    ``OracleRequired`` for the ideal variant without D0, ``Infeasible`` when
    the program admits no solution, and ``DegenerateRecovery`` when the gain
    cannot be extracted. Numerical solver trouble is reported through the
    returned status, not raised. ``zero_gain`` adds the constraint K = 0 to
    the convex variants (open-loop stability testing).
    """
    dd = derive(ds) if derived is None else derived
    variant = method.variant

    if zero_gain and variant in ("indirect_ce", "compact"):
        raise InvalidInput("zero_gain applies only to the convex direct variants")

    if variant == "indirect_ce":
        identified = least_squares_id(ds, dd)
        return _wrap_riccati_solution(identified, w, dd, ds, method)

    if variant == "compact":
        identified = least_squares_id(ds, dd)
        sol_sdp = _solve_compact_sdp(ds, w, dd, method)
        sol_ric = _wrap_riccati_solution(identified, w, dd, ds, method)
        if sol_sdp.status != sdp.STATUS_OPTIMAL:
            return sol_sdp
        dev = np.linalg.norm(sol_sdp.K - sol_ric.K, "fro") / max(1.0, np.linalg.norm(sol_ric.K, "fro"))
        if dev > COMPACT_ROUTE_TOL:
            sol_sdp.status = sdp.STATUS_NUMERICAL
            sol_sdp.failure_reason = f"compact routes disagree: {dev:.3g}"
        return sol_sdp

    if variant == "direct_plain":
        return _solve_direct(ds, w, dd, method, ds.X1, orthogonal=False, lam=0.0, rho=0.0, zero_gain=zero_gain)

    if variant == "direct_orthogonal":
        _require_identifiable(dd, ds)
        return _solve_direct(ds, w, dd, method, ds.X1, orthogonal=True, lam=0.0, rho=0.0, zero_gain=zero_gain)

    if variant == "direct_regularized":
        _require_identifiable(dd, ds)
        return _solve_direct(
            ds, w, dd, method, ds.X1, orthogonal=False, lam=method.lam, rho=method.rho, zero_gain=zero_gain
        )

    if variant == "direct_ideal":
        if ds.D0 is None:
            raise OracleRequired("direct_ideal needs the recorded disturbance D0")
        _require_identifiable(dd, ds)
        return _solve_direct(
            ds, w, dd, method, ds.X1 - ds.D0, orthogonal=True, lam=0.0, rho=0.0, zero_gain=zero_gain
        )

    raise InvalidInput(f"unknown variant {variant!r}")


def _require_identifiable(dd: DerivedData, ds: Dataset) -> None:
    if not dd.identifiable:
        raise NotIdentifiable(f"rank W0 < n + m = {ds.n + ds.m}")


def detect_lambda_star(
    ds: Dataset,
    w: LqrWeights,
    grid=None,
    norm_kind: str = "frobenius",
    derived: DerivedData | None = None,
) -> float:
    """Smallest grid coefficient whose regularized gain matches the
    constrained one within 1e-4 relative Frobenius; +inf when none does."""
    grid = list(DEFAULT_LAMBDA_GRID) if grid is None else sorted(float(g) for g in grid)
    if not grid or grid[0] <= 0:
        raise InvalidInput("grid must contain positive coefficients")
    dd = derive(ds) if derived is None else derived
    ref = synthesize(ds, w, Method("direct_orthogonal", norm_kind=norm_kind), derived=dd)
    if not ref.optimal:
        raise Infeasible("constrained reference did not solve")
    denom = max(1.0, np.linalg.norm(ref.K, "fro"))
    for lam in grid:
        sol = synthesize(ds, w, Method("direct_regularized", lam=lam, norm_kind=norm_kind), derived=dd)
        if not sol.optimal:
            continue
        if np.linalg.norm(sol.K - ref.K, "fro") / denom <= LAMBDA_MATCH_RTOL:
            return float(lam)
    return float("inf")


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class Certificates:
    """Noise-oracle certificate data for one synthesized gain.

    ``lemma1_holds(eta1)`` is the sufficient stability condition
    lambda_max(Psi) <= 1 - 1/eta1; ``delta_test`` replaces the oracle with a
    norm bound on the disturbance. When the true plant was supplied, the
    feasibility-side quantities (Psi_star and lemma2) are populated as well.
    """

    M: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray
    eta1_margin: float
    m_norm: float
    x1m_norm: float
    Psi_star: np.ndarray | None = None
    eta2_margin: float | None = None

    def lemma1_holds(self, eta1: float) -> bool:
        if eta1 < 1:
            raise InvalidInput("eta1 must be >= 1")
        return 1.0 - self.eta1_margin <= 1.0 - 1.0 / eta1

    def lemma2_holds(self, eta2: float) -> bool:
        if eta2 < 1:
            raise InvalidInput("eta2 must be >= 1")
        if self.eta2_margin is None:
            raise OracleRequired("true system was not supplied")
        return 1.0 - self.eta2_margin <= 1.0 - 1.0 / eta2

    def delta_test(self, delta: float, eta1: float) -> bool:
        if eta1 < 1:
            raise InvalidInput("eta1 must be >= 1")
        if delta < 0:
            raise InvalidInput("delta must be nonnegative")
        return delta**2 * self.m_norm + 2.0 * delta * self.x1m_norm <= 1.0 - 1.0 / eta1

    def smallest_passing_eta1(self, scan=ETA_SCAN) -> float | None:
        for eta in scan:
            if self.lemma1_holds(eta):
                return float(eta)
        return None


def _spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2))


def certificates(
    sol: LqrSolution,
    ds: Dataset,
    sys: LtiSystem | None = None,
    w: LqrWeights | None = None,
) -> Certificates:
    """Closed-loop certificate quantities for a solution, using the D0 oracle.

    M = G P G', Theta = X1 M X1' - P, Psi = D0 M D0' - X1 M D0' - D0 M X1'.
    With the true plant supplied, also evaluates the feasibility margin at the
    ground-truth gain (Psi_star built from G* = W0^+ [K*; I]).
    """
    if ds.D0 is None:
        raise OracleRequired("certificates need the recorded disturbance D0")
    if sol.G is None or sol.P is None:
        raise InvalidInput("solution carries no (G, P) data")
    M = linalg.sym(sol.G @ sol.P @ sol.G.T)
    Theta = linalg.sym(ds.X1 @ M @ ds.X1.T - sol.P)
    X1MD0 = ds.X1 @ M @ ds.D0.T
    Psi = linalg.sym(ds.D0 @ M @ ds.D0.T - X1MD0 - X1MD0.T)
    eta1_margin = 1.0 - float(np.linalg.eigvalsh(Psi)[-1])

    Psi_star = None
    eta2_margin = None
    if sys is not None and w is not None:
        star = model_lqr(sys, w)
        dd = derive(ds)
        G_star = dd.W0_pinv @ np.vstack([star.K, np.eye(ds.n)])
        M_star = linalg.sym(G_star @ star.P @ G_star.T)
        X1MD0s = ds.X1 @ M_star @ ds.D0.T
        Psi_star = linalg.sym(ds.D0 @ M_star @ ds.D0.T - X1MD0s - X1MD0s.T)
        eta2_margin = 1.0 - float(np.linalg.eigvalsh(-Psi_star)[-1])

    return Certificates(
        M=M,
        Theta=Theta,
        Psi=Psi,
        eta1_margin=eta1_margin,
        m_norm=_spectral_norm(M),
        x1m_norm=_spectral_norm(ds.X1 @ M),
        Psi_star=Psi_star,
        eta2_margin=eta2_margin,
    )


def stability_test(sol: LqrSolution, ds: Dataset, delta: float, eta1: float) -> bool:
    """Certify closed-loop stability from a noise magnitude bound.

    True iff delta^2 ||M|| + 2 delta ||X1 M|| <= 1 - 1/eta1 in induced
    2-norms, which implies the oracle condition and hence a Schur closed
    loop. One-sided: False makes no claim. When D0 is recorded, the bound
    delta >= ||D0||_2 is checked.
    """
    if eta1 < 1:
        raise InvalidInput("eta1 must be >= 1")
    if delta < 0:
        raise InvalidInput("delta must be nonnegative")
    if sol.G is None or sol.P is None:
        raise InvalidInput("solution carries no (G, P) data")
    if ds.D0 is not None and delta < _spectral_norm(ds.D0) - 1e-12:
        raise InvalidInput("delta must upper bound ||D0||_2")
    M = linalg.sym(sol.G @ sol.P @ sol.G.T)
    lhs = delta**2 * _spectral_norm(M) + 2.0 * delta * _spectral_norm(ds.X1 @ M)
    return bool(lhs <= 1.0 - 1.0 / eta1)


# ---------------------------------------------------------------------------
# Export


def solution_to_dict(sol: LqrSolution, certs: Certificates | None = None) -> dict:
    out = {
        "method": sol.method.variant if sol.method else "model",
        "lambda": sol.method.lam if sol.method else 0.0,
        "rho": sol.method.rho if sol.method else 0.0,
        "status": sol.status,
        "objective": sol.objective,
        "trace_cost": sol.trace_cost,
        "penalty_ce": sol.penalty_ce,
        "penalty_robust": sol.penalty_robust,
        "K": sol.K.tolist() if sol.K is not None else None,
        "P": sol.P.tolist() if sol.P is not None else None,
    }
    if sol.failure_reason:
        out["failure_reason"] = sol.failure_reason
    if certs is not None:
        out["certificates"] = {
            "eta1_margin": certs.eta1_margin,
            "smallest_passing_eta1": certs.smallest_passing_eta1(),
            "m_norm": certs.m_norm,
            "x1m_norm": certs.x1m_norm,
        }
    return out


def export_solution(sol: LqrSolution, path, certs: Certificates | None = None) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol, certs), indent=2) + "\n")
