"""Linear ranker container and its JSON record."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

MODEL_FORMAT = "mbauc.model/1"


@dataclass(frozen=True)
class RegularizationSpec:
    """Elastic-net weights: ``lambda1 * |w|_1 + lambda2 / 2 * |w|_2^2``."""

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be a finite non-negative number, got {v}")

    @property
    def kind(self) -> str:
        if self.lambda1 > 0 and self.lambda2 > 0:
            return "elastic-net"
        if self.lambda1 > 0:
            return "lasso"
        if self.lambda2 > 0:
            return "ridge"
        return "none"


@dataclass
class RankerModel:
    w: np.ndarray
    reg: RegularizationSpec = field(default_factory=RegularizationSpec)
    pairs_seen: int = 0
    seed: int | None = None
    objective_value: float = float("nan")
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).ravel()

    @property
    def d(self) -> int:
        return self.w.size

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "d": self.d,
            "weights": self.w.tolist(),
            "lambda1": self.reg.lambda1,
            "lambda2": self.reg.lambda2,
            "pairs_seen": int(self.pairs_seen),
            "seed": self.seed,
            "objective_value": _json_float(self.objective_value),
            "solver": self.solver,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "RankerModel":
        if rec.get("format", MODEL_FORMAT) != MODEL_FORMAT:
            raise DataError(f"unsupported model format {rec.get('format')!r}")
        try:
            w = np.asarray(rec["weights"], dtype=np.float64)
            if w.size != rec["d"]:
                raise DataError(f"model declares d={rec['d']} but has {w.size} weights")
            obj = rec.get("objective_value")
            return cls(
                w=w,
                reg=RegularizationSpec(rec.get("lambda1", 0.0), rec.get("lambda2", 0.0)),
                pairs_seen=rec.get("pairs_seen", 0),
                seed=rec.get("seed"),
                objective_value=float("nan") if obj is None else float(obj),
                solver=rec.get("solver", {}),
            )
        except KeyError as exc:
            raise DataError(f"model record missing field {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "RankerModel":
        try:
            rec = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc
        return cls.from_dict(rec)


def _json_float(x):
    x = float(x)
    return x if np.isfinite(x) else None
