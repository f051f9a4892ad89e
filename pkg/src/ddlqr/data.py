"""Experiment-data algebra: dataset generation, W0 assembly, identifiability,
ordinary least-squares identification, nullspace projector, and SNR.

A dataset records one open-loop experiment: inputs U0, states X0, successor
states X1, and (when generated in-process) the realized disturbance D0, which
serves as the oracle for certificate checks. Column k of each block belongs
to time step k, so X1 - D0 = [B A] [U0; X0] holds exactly by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import InvalidInput, NotIdentifiable
from .system import (
    INPUT_STREAM_TAG,
    LtiSystem,
    NoiseSpec,
    simulate,
)

CONSTRUCTION_TOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """One experiment record; D0 is optional (oracle mode only)."""

    U0: np.ndarray
    X0: np.ndarray
    X1: np.ndarray
    D0: np.ndarray | None = None
    meta: dict | None = None

    def __post_init__(self):
        U0 = linalg.as_matrix(self.U0, "U0")
        X0 = linalg.as_matrix(self.X0, "X0")
        X1 = linalg.as_matrix(self.X1, "X1")
        T = U0.shape[1]
        if X0.shape[1] != T or X1.shape[1] != T:
            raise InvalidInput("U0, X0, X1 must have the same number of columns")
        if X1.shape[0] != X0.shape[0]:
            raise InvalidInput("X0 and X1 must have the same number of rows")
        object.__setattr__(self, "U0", U0)
        object.__setattr__(self, "X0", X0)
        object.__setattr__(self, "X1", X1)
        if self.D0 is not None:
            D0 = linalg.as_matrix(self.D0, "D0")
            if D0.shape != X0.shape:
                raise InvalidInput(f"D0 must be {X0.shape}, got {D0.shape}")
            object.__setattr__(self, "D0", D0)

    @property
    def n(self) -> int:
        return self.X0.shape[0]

    @property
    def m(self) -> int:
        return self.U0.shape[0]

    @property
    def T(self) -> int:
        return self.U0.shape[1]

    @property
    def W0(self) -> np.ndarray:
        """Stacked data matrix [U0; X0]."""
        return np.vstack([self.U0, self.X0])


@dataclass(frozen=True)
class DerivedData:
    """Quantities derived from W0: right inverse, nullspace projector,
    identifiability verdict, and signal-to-noise ratio."""

    W0: np.ndarray
    W0_pinv: np.ndarray
    Pi: np.ndarray
    nullspace: np.ndarray
    identifiable: bool
    snr: float | None

    @property
    def snr_db(self) -> float | None:
        """SNR in decibels (10 log10 of the singular value ratio)."""
        if self.snr is None:
            return None
        if self.snr == 0.0:
            return -math.inf
        return 10.0 * math.log10(self.snr)


def derive(ds: Dataset) -> DerivedData:
    """Compute W0 pseudo-inverse, projector Pi = I - W0^+ W0, and SNR.

    SNR is sigma_min(W0) / sigma_max(D0); +inf for exactly zero D0, 0.0 when
    the data is not identifiable, and None when no D0 oracle is recorded.
    """
    W0 = ds.W0
    sv = linalg.svd(W0)
    tol = linalg.rank_tolerance(sv, W0.shape)
    rank = int(np.sum(sv.s > tol))
    identifiable = rank == ds.n + ds.m
    W0_pinv = linalg.pinv(W0)
    Pi = np.eye(ds.T) - W0_pinv @ W0
    nullspace = linalg.nullspace_basis(W0)

    snr: float | None = None
    if ds.D0 is not None:
        if not identifiable:
            snr = 0.0
        else:
            d_max = linalg.svd(ds.D0).smax
            snr = math.inf if d_max == 0.0 else float(sv.smin / d_max)
    return DerivedData(
        W0=W0,
        W0_pinv=W0_pinv,
        Pi=Pi,
        nullspace=nullspace,
        identifiable=identifiable,
        snr=snr,
    )


def least_squares_id(ds: Dataset, derived: DerivedData | None = None) -> LtiSystem:
    """Identify (A, B) as the least-squares fit X1 = [B A] [U0; X0].

    The minimizer is X1 W0^+; with zero disturbance it recovers the true
    pair exactly. Raises ``NotIdentifiable`` when rank W0 < n + m.
    """
    dd = derive(ds) if derived is None else derived
    if not dd.identifiable:
        raise NotIdentifiable(f"rank W0 < n + m = {ds.n + ds.m}")
    BA = ds.X1 @ dd.W0_pinv
    return LtiSystem(A=BA[:, ds.m :], B=BA[:, : ds.m])


def generate_dataset(
    sys: LtiSystem,
    T: int,
    input_spec: NoiseSpec,
    noise_spec: NoiseSpec,
    x0=None,
) -> Dataset:
    """Run one T-step experiment and package the data matrices.

    The input and disturbance streams use independent sub-streams, so the two
    specs may carry the same seed. The subspace identity
    X1 - D0 = [B A] W0 is asserted to construction precision.
    """
    if T < 1:
        raise InvalidInput("T must be >= 1")
    x0v = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    U = input_spec.draw(T, sys.m, INPUT_STREAM_TAG)
    X, D = simulate(sys, x0v, U, noise_spec)
    ds = Dataset(U0=U.T, X0=X[:T].T, X1=X[1:].T, D0=D.T)
    residual = np.linalg.norm(ds.X1 - ds.D0 - np.hstack([sys.B, sys.A]) @ ds.W0, "fro")
    if residual > CONSTRUCTION_TOL * max(1.0, np.linalg.norm(ds.X1, "fro")):
        raise AssertionError(f"subspace identity violated: residual {residual:.3g}")
    return ds


# ---------------------------------------------------------------------------
# Serialization: CSV with one header row per matrix block, JSON sidecar.
# Floats are written with repr() so the round trip is bit exact.

_BLOCKS = ("u0", "x0", "x1", "d0")


def _spec_to_json(spec: NoiseSpec | None) -> dict | None:
    if spec is None:
        return None
    return {"kind": spec.kind, "scale": spec.scale, "seed": int(spec.seed)}


def _spec_from_json(obj: dict | None) -> NoiseSpec | None:
    if obj is None:
        return None
    return NoiseSpec(kind=obj["kind"], scale=float(obj["scale"]), seed=int(obj["seed"]))


def save_dataset(ds: Dataset, csv_path, sidecar_path=None) -> None:
    """Write the dataset CSV and its JSON sidecar (defaults to <csv>.json)."""
    csv_path = Path(csv_path)
    sidecar = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(csv_path.suffix + ".json")
    blocks = {"u0": ds.U0, "x0": ds.X0, "x1": ds.X1}
    if ds.D0 is not None:
        blocks["d0"] = ds.D0
    lines = []
    for name in _BLOCKS:
        if name not in blocks:
            continue
        lines.append(name)
        for row in blocks[name]:
            lines.append(",".join(repr(float(v)) for v in row))
    csv_path.write_text("\n".join(lines) + "\n")

    meta = dict(ds.meta or {})
    sidecar_obj = {
        "n": ds.n,
        "m": ds.m,
        "T": ds.T,
        "seed": meta.get("seed"),
        "input": _spec_to_json(meta.get("input")),
        "noise": _spec_to_json(meta.get("noise")),
    }
    sidecar.write_text(json.dumps(sidecar_obj, indent=2) + "\n")


def load_dataset(csv_path, sidecar_path=None) -> Dataset:
    """Read a dataset written by :func:`save_dataset` (bit-exact)."""
    csv_path = Path(csv_path)
    sidecar = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(csv_path.suffix + ".json")
    blocks: dict[str, list[list[float]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(csv_path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line in _BLOCKS:
            current = line
            blocks[current] = []
            continue
        if current is None:
            raise InvalidInput(f"{csv_path}:{lineno}: data row before any block header")
        try:
            blocks[current].append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise InvalidInput(f"{csv_path}:{lineno}: malformed float") from exc
    for required in ("u0", "x0", "x1"):
        if required not in blocks:
            raise InvalidInput(f"{csv_path}: missing block {required!r}")

    meta = None
    if sidecar.exists():
        obj = json.loads(sidecar.read_text())
        meta = {
            "seed": obj.get("seed"),
            "input": _spec_from_json(obj.get("input")),
            "noise": _spec_from_json(obj.get("noise")),
        }
    return Dataset(
        U0=np.array(blocks["u0"]),
        X0=np.array(blocks["x0"]),
        X1=np.array(blocks["x1"]),
        D0=np.array(blocks["d0"]) if "d0" in blocks else None,
        meta=meta,
    )
