"""Ground-truth LTI plant: closed-loop assembly, H2 cost evaluation, and
seeded trajectory simulation.

The benchmark plant is ``laplacian3()``: a discrete-time marginally unstable
Laplacian with identity input matrix, weighted with Q = I and R = 1e-3 I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InvalidInput, NotSchur

# Fixed tags mixed into a NoiseSpec seed so that the input and disturbance
# streams of one experiment are decorrelated even when built from one master
# seed, and varying the scale never changes the underlying realization.
INPUT_STREAM_TAG = 0x9E3779B97F4A7C15
DISTURBANCE_STREAM_TAG = 0xC2B2AE3D27D4EB4F

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class LtiSystem:
    """State-space pair x(k+1) = A x(k) + B u(k) + d(k)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = linalg.as_matrix(self.A, "A")
        B = linalg.as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise InvalidInput(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise InvalidInput(f"B must have {A.shape[0]} rows, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def _psd_sqrt(M: np.ndarray, name: str) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    if w[0] <= 0:
        raise InvalidInput(f"{name} must be positive definite (min eigenvalue {w[0]:.3g})")
    return (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class LqrWeights:
    """Positive definite cost weights with cached symmetric square roots."""

    Q: np.ndarray
    R: np.ndarray
    Q_sqrt: np.ndarray = field(init=False, repr=False)
    R_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Q = linalg.as_matrix(self.Q, "Q")
        R = linalg.as_matrix(self.R, "R")
        for M, name in ((Q, "Q"), (R, "R")):
            if M.shape[0] != M.shape[1]:
                raise InvalidInput(f"{name} must be square")
            if np.linalg.norm(M - M.T, "fro") > 1e-12 * max(1.0, np.linalg.norm(M, "fro")):
                raise InvalidInput(f"{name} must be symmetric")
        object.__setattr__(self, "Q", linalg.sym(Q))
        object.__setattr__(self, "R", linalg.sym(R))
        object.__setattr__(self, "Q_sqrt", _psd_sqrt(self.Q, "Q"))
        object.__setattr__(self, "R_sqrt", _psd_sqrt(self.R, "R"))


NOISE_KINDS = ("gaussian_iid", "uniform_iid", "zero")


@dataclass(frozen=True)
class NoiseSpec:
    """Seeded i.i.d. source: gaussian (scale = std dev), uniform (scale =
    half-width), or identically zero."""

    kind: str
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInput(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.scale < 0:
            raise InvalidInput("noise scale must be nonnegative")

    def draw(self, rows: int, cols: int, stream_tag: int = 0) -> np.ndarray:
        """Draw a rows-by-cols sample; deterministic in (seed, stream_tag)."""
        if self.kind == "zero":
            return np.zeros((rows, cols))
        rng = np.random.default_rng((int(self.seed) ^ stream_tag) & _SEED_MASK)
        if self.kind == "gaussian_iid":
            unit = rng.standard_normal((rows, cols))
        else:
            unit = rng.uniform(-1.0, 1.0, size=(rows, cols))
        return self.scale * unit


def zero_noise() -> NoiseSpec:
    return NoiseSpec(kind="zero", scale=0.0, seed=0)


def closed_loop(sys: LtiSystem, K) -> np.ndarray:
    """Closed-loop matrix A + B K."""
    Km = linalg.as_matrix(K, "K")
    if Km.shape != (sys.m, sys.n):
        raise InvalidInput(f"K must be {sys.m}x{sys.n}, got {Km.shape}")
    return sys.A + sys.B @ Km


def h2_norm_sq(sys: LtiSystem, w: LqrWeights, K) -> float:
    """Squared H2 norm of the disturbance-to-performance channel under gain K.

    Equals trace(Q P + K' R K P) with P the closed-loop Gramian; raises
    ``NotSchur`` when A + B K is not stable (infinite cost).
    """
    F = closed_loop(sys, K)
    if not linalg.is_schur(F):
        raise NotSchur(f"closed loop has spectral radius {linalg.spectral_radius(F):.6g} >= 1")
    Km = np.asarray(K, dtype=float)
    P = linalg.dlyap(F, np.eye(sys.n))
    return float(np.trace(w.Q @ P + Km.T @ w.R @ Km @ P))


def simulate(sys: LtiSystem, x0, inputs, noise: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Roll the recursion x(k+1) = A x(k) + B u(k) + d(k) for T steps.

    Returns the (T+1)-by-n state trajectory and the realized T-by-n
    disturbance (the experiment oracle).
    """
    x0v = np.asarray(x0, dtype=float).reshape(-1)
    if x0v.shape != (sys.n,):
        raise InvalidInput(f"x0 must have {sys.n} entries")
    U = np.asarray(inputs, dtype=float)
    if U.ndim != 2 or U.shape[1] != sys.m or U.shape[0] < 1:
        raise InvalidInput(f"inputs must be T x {sys.m} with T >= 1, got {U.shape}")
    T = U.shape[0]
    D = noise.draw(T, sys.n, DISTURBANCE_STREAM_TAG)
    X = np.zeros((T + 1, sys.n))
    X[0] = x0v
    for k in range(T):
        X[k + 1] = sys.A @ X[k] + sys.B @ U[k] + D[k]
    return X, D


def laplacian3() -> LtiSystem:
    """Marginally unstable 3-state Laplacian benchmark plant (B = I)."""
    A = np.array([[1.01, 0.01, 0.0], [0.01, 1.01, 0.01], [0.0, 0.01, 1.01]])
    return LtiSystem(A=A, B=np.eye(3))


def laplacian3_weights() -> LqrWeights:
    """Benchmark weights Q = I, R = 1e-3 I."""
    return LqrWeights(Q=np.eye(3), R=1e-3 * np.eye(3))
