"""Flat key-value run configuration.

Grammar (one entry per line):

    key = value          # trailing comments allowed

Values: integers, decimal floats (1e-3 works), ``true``/``false``, the
identity shorthand ``I``, bracketed row lists for matrices and grids
(``[[1.01, 0.01], [0.01, 1.01]]``, ``[0.01, 0.1, 1]``), comma-separated bare
words for name lists (``ce, robust, mixed``), and bare words for everything
else. Unknown keys are rejected with their line number.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DdlqrError
from .system import LqrWeights, LtiSystem, laplacian3


class ConfigError(DdlqrError):
    """Malformed configuration; carries the offending line number."""

    def __init__(self, lineno: int | None, message: str):
        self.lineno = lineno
        super().__init__(message)

    def render(self, path) -> str:
        loc = f"{path}:{self.lineno}: " if self.lineno else f"{path}: "
        return loc + str(self)


@dataclass
class RunConfig:
    """Everything a subcommand needs; presets expand at resolve time."""

    system: str = "laplacian3"
    A: list | None = None
    B: list | None = None
    Q: object = None  # None -> preset; float -> scale * I; 'I'; row list
    R: object = None
    T: int = 20
    sigma: float = 0.1
    input_scale: float = 1.0
    method: str = "direct_regularized"
    lam: float = 0.01
    rho: float = 0.0
    norm: str = "frobenius"
    trials: int = 100
    seed: int = 1234
    ce_lambda: float = 1.0
    mixed_lambda: float = 0.01
    table_rho: float = 0.1
    lambda_grid: list = field(default_factory=lambda: [float(x) for x in np.logspace(-5, 0, 40)])
    sigma_grid: list = field(default_factory=lambda: [0.01, 0.1, 0.3, 0.7, 1.0])
    methods: list = field(default_factory=lambda: ["ce", "robust", "mixed"])
    delta: float | None = None
    eta1: float = 2.0
    x0: list | None = None
    plot: bool = True
    out: str = "."

    def resolve_system(self) -> LtiSystem:
        if self.A is not None or self.B is not None:
            if self.A is None or self.B is None:
                raise ConfigError(None, "A and B must be given together")
            return LtiSystem(A=np.array(self.A, dtype=float), B=np.array(self.B, dtype=float))
        if self.system == "laplacian3":
            return laplacian3()
        raise ConfigError(None, f"unknown system preset {self.system!r}")

    def resolve_weights(self, sys: LtiSystem) -> LqrWeights:
        def expand(value, dim, preset):
            if value is None:
                return preset
            if isinstance(value, str) and value == "I":
                return np.eye(dim)
            if isinstance(value, (int, float)):
                return float(value) * np.eye(dim)
            return np.array(value, dtype=float)

        q_preset = np.eye(sys.n)
        r_preset = 1e-3 * np.eye(sys.m) if self.system == "laplacian3" and self.A is None else np.eye(sys.m)
        return LqrWeights(Q=expand(self.Q, sys.n, q_preset), R=expand(self.R, sys.m, r_preset))


_KEY_ALIASES = {"lambda": "lam"}
_FIELD_NAMES = None


def _field_names() -> set[str]:
    global _FIELD_NAMES
    if _FIELD_NAMES is None:
        _FIELD_NAMES = {f.name for f in fields(RunConfig)}
    return _FIELD_NAMES


def _parse_value(text: str, lineno: int):
    text = text.strip()
    if not text:
        raise ConfigError(lineno, "empty value")
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if text == "I":
        return "I"
    if text.startswith("["):
        try:
            value = ast.literal_eval(text)
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(lineno, f"malformed list literal: {exc}") from exc
        return value
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if "," in text:
        return [w.strip() for w in text.split(",") if w.strip()]
    return text


def parse_config(path) -> RunConfig:
    """Parse a config file; raises ConfigError with a line number on trouble."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(None, f"cannot read config: {exc}") from exc
    cfg = RunConfig()
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(lineno, f"expected 'key = value', got {stripped!r}")
        key, _, value_text = stripped.partition("=")
        key = key.strip()
        key = _KEY_ALIASES.get(key, key)
        if key not in _field_names():
            raise ConfigError(lineno, f"unknown key {key!r}")
        if key in seen:
            raise ConfigError(lineno, f"duplicate key {key!r}")
        seen.add(key)
        value = _parse_value(value_text, lineno)
        try:
            setattr(cfg, key, _coerce(key, value, lineno))
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(lineno, f"bad value for {key!r}: {exc}") from exc
    return cfg


_INT_KEYS = {"T", "trials", "seed"}
_FLOAT_KEYS = {"sigma", "input_scale", "lam", "rho", "delta", "eta1", "ce_lambda", "mixed_lambda", "table_rho"}
_LIST_KEYS = {"A", "B", "lambda_grid", "sigma_grid", "methods", "x0"}


def _coerce(key: str, value, lineno: int):
    if key in _INT_KEYS:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(lineno, f"{key} must be an integer")
        return value
    if key in _FLOAT_KEYS:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(lineno, f"{key} must be a number")
        return float(value)
    if key == "plot":
        if not isinstance(value, bool):
            raise ConfigError(lineno, f"{key} must be true or false")
        return value
    if key in _LIST_KEYS and not isinstance(value, list):
        if key in ("lambda_grid", "sigma_grid") and isinstance(value, (int, float)):
            return [float(value)]
        if key == "methods" and isinstance(value, str):
            return [value]
        raise ConfigError(lineno, f"{key} must be a list")
    if key in ("lambda_grid", "sigma_grid") and isinstance(value, list):
        return [float(v) for v in value]
    return value
