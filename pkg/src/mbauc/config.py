"""Declarative experiment configs. Unknown keys are rejected everywhere."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .baselines import SgdConfig, train_mb_pairwise, train_olr
from .data import DEFAULT_MAX_D, LabeledDataset
from .mba import MBAConfig, train_mba
from .model import RankerModel

FORMAT_VERSION = 1


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------------------
# methods

class MBAMethod(Strict):
    kind: Literal["mba"] = "mba"
    name: str = "mba_l2"
    B: int = Field(1000, ge=1)
    T: int = Field(100, ge=1)
    lambda1: float = Field(0.0, ge=0)
    lambda2: float = Field(1e-2, ge=0)
    moments: Literal["sample", "exact", "enumerate"] = "sample"
    solver: Literal["cd", "direct"] = "cd"
    allow_singular: bool = False

    def mba_config(self, seed: int) -> MBAConfig:
        return MBAConfig(B=self.B, T=self.T, lambda1=self.lambda1, lambda2=self.lambda2,
                         seed=seed, moments=self.moments, solver=self.solver,
                         allow_singular=self.allow_singular)

    def train(self, dataset: LabeledDataset, seed: int) -> RankerModel:
        return train_mba(dataset, self.mba_config(seed))


class OLRMethod(Strict):
    kind: Literal["olr"] = "olr"
    name: str = "olr"
    step_schedule: Literal["inv_sqrt", "constant"] = "inv_sqrt"
    c: float = Field(1.0, gt=0)
    epochs: int = Field(1, ge=1)
    lambda2: float = Field(0.0, ge=0)

    def train(self, dataset: LabeledDataset, seed: int) -> RankerModel:
        return train_olr(dataset, SgdConfig(step_schedule=self.step_schedule, c=self.c,
                                            epochs=self.epochs, lambda2=self.lambda2, seed=seed))


class PairwiseMethod(Strict):
    kind: Literal["mb_psl", "mb_phl"] = "mb_psl"
    name: str = "mb_psl"
    step_schedule: Literal["inv_sqrt", "constant"] = "inv_sqrt"
    c: float = Field(1.0, gt=0)
    B: int = Field(64, ge=1)
    rounds: Optional[int] = Field(None, ge=1)
    lambda2: float = Field(0.0, ge=0)

    def train(self, dataset: LabeledDataset, seed: int) -> RankerModel:
        cfg = SgdConfig(step_schedule=self.step_schedule, c=self.c, B=self.B, rounds=self.rounds,
                        lambda2=self.lambda2, seed=seed)
        return train_mb_pairwise(dataset, cfg, "psl" if self.kind == "mb_psl" else "phl")


Method = Annotated[Union[MBAMethod, OLRMethod, PairwiseMethod], Field(discriminator="kind")]


def simulation_methods() -> list:
    return [
        MBAMethod(name="mba_l2", lambda2=10.0),
        OLRMethod(name="olr", c=0.01),
        PairwiseMethod(name="mb_psl", kind="mb_psl", c=0.01),
    ]


def bench_methods() -> list:
    return [
        MBAMethod(name="mba_l2", lambda2=1e-2),
        MBAMethod(name="mba_l1", lambda1=1e-4, lambda2=0.0, allow_singular=True),
        OLRMethod(name="olr"),
        PairwiseMethod(name="mb_psl", kind="mb_psl"),
        PairwiseMethod(name="mb_phl", kind="mb_phl"),
    ]


def _unique_names(methods):
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"method names must be unique, got {names}")
    return methods


# ---------------------------------------------------------------------------
# commands

class TrainConfig(Strict):
    format_version: Literal[1] = FORMAT_VERSION
    data: Path
    output: Path
    seed: int
    B: int = Field(1000, ge=1)
    T: int = Field(100, ge=1)
    lambda1: float = Field(0.0, ge=0)
    lambda2: float = Field(1e-2, ge=0)
    exact: bool = False
    solver: Literal["cd", "direct"] = "cd"
    allow_singular: bool = False
    normalize: bool = True
    d: Optional[int] = Field(None, ge=1)
    max_d: int = Field(DEFAULT_MAX_D, ge=1)


class EvalConfig(Strict):
    format_version: Literal[1] = FORMAT_VERSION
    model: Path
    data: Path
    output: Optional[Path] = None
    roc_output: Optional[Path] = None
    normalize: bool = True
    max_d: int = Field(DEFAULT_MAX_D, ge=1)


class SimulateConfig(Strict):
    format_version: Literal[1] = FORMAT_VERSION
    seed: int
    k: list[int] = [1, 2, 3]
    d: int = Field(100, ge=1)
    sr: list[float] = [0.01, 0.1, 1.0]
    trials: int = Field(50, ge=0)
    n_train: int = Field(20_000, ge=2)
    n_test: int = Field(100_000, ge=2)
    imbalance: float = Field(0.9, gt=0, lt=1)
    mixture: Optional[Path] = None
    methods: list[Method] = Field(default_factory=simulation_methods)
    reference: str = "mba_l2"
    output: Optional[Path] = None
    json_output: Optional[Path] = None

    @field_validator("k")
    @classmethod
    def _k(cls, v):
        if not v or any(k not in (1, 2, 3) for k in v):
            raise ValueError("k entries must be in {1, 2, 3}")
        return v

    @field_validator("sr")
    @classmethod
    def _sr(cls, v):
        if not v or any(not 0 < s <= 1 for s in v):
            raise ValueError("sample ratios must be in (0, 1]")
        return v

    @model_validator(mode="after")
    def _methods(self):
        _unique_names(self.methods)
        if self.methods and self.reference not in {m.name for m in self.methods}:
            raise ValueError(f"reference method {self.reference!r} not among methods")
        return self


class BenchDataset(Strict):
    train: Path
    test: Optional[Path] = None
    name: Optional[str] = None
    d: Optional[int] = Field(None, ge=1)


class BenchConfig(Strict):
    format_version: Literal[1] = FORMAT_VERSION
    seed: int
    datasets: list[BenchDataset]
    runs: int = Field(50, ge=2)
    test_fraction: float = Field(0.5, gt=0, lt=1)
    normalize: bool = True
    max_d: int = Field(DEFAULT_MAX_D, ge=1)
    methods: list[Method] = Field(default_factory=bench_methods)
    reference: str = "mba_l2"
    output: Optional[Path] = None
    json_output: Optional[Path] = None

    @model_validator(mode="after")
    def _methods(self):
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        _unique_names(self.methods)
        if self.reference not in {m.name for m in self.methods}:
            raise ValueError(f"reference method {self.reference!r} not among methods")
        return self


class BoundConfig(Strict):
    format_version: Literal[1] = FORMAT_VERSION
    d: int = Field(ge=1)
    R_x: float = Field(1.0, gt=0)
    R_w: Optional[float] = Field(None, gt=0)
    # Alternative to R_w: derive it from |mu|_2 and lambda2.
    mu_norm: Optional[float] = Field(None, gt=0)
    lambda2: Optional[float] = Field(None, gt=0)
    sigma_norm: float = Field(gt=0)
    epsilon: float = Field(gt=0)
    p: float = Field(0.05, gt=0, lt=1)
    gammas: list[float] = []
    S: list[int] = []
    output: Optional[Path] = None

    @model_validator(mode="after")
    def _rw(self):
        if self.R_w is None and (self.mu_norm is None or self.lambda2 is None):
            raise ValueError("give R_w, or both mu_norm and lambda2")
        if any(g <= 0 for g in self.gammas) or any(s < 1 for s in self.S):
            raise ValueError("gammas must be > 0 and S >= 1")
        return self

    @property
    def weight_bound(self) -> float:
        if self.R_w is not None:
            return self.R_w
        return (self.mu_norm / self.lambda2) ** 2


class RocConfig(Strict):
    format_version: Literal[1] = FORMAT_VERSION
    model: Path
    data: Path
    output: Optional[Path] = None
    normalize: bool = True
    max_d: int = Field(DEFAULT_MAX_D, ge=1)
