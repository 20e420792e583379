"""Experiment configuration: the (ns, nd) matrix, variants, and run seeds."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Literal

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mamsim.app import AppConfig
from mamsim.errors import ConfigurationError
from mamsim.redist.types import DataCategory, DataDescriptor, Method, Strategy, is_eligible
from mamsim.sim.cost import CostModel

DEFAULT_RANKS = [2, 4, 8, 16]


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_elements: int = Field(2**20, ge=0)
    element_width: Literal[1, 2, 4, 8] = 8
    category: DataCategory = DataCategory.CONSTANT

    def descriptor(self) -> DataDescriptor:
        return DataDescriptor(n=self.n_elements, category=self.category, element_width=self.element_width)


class RuntimeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    collective_blocks_background: bool = False


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    report: str | None = None  # CSV
    jsonl: str | None = None
    trace_dir: str | None = None
    db: str | None = None


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ranks: list[int] = Field(default_factory=lambda: list(DEFAULT_RANKS))
    pairs: list[tuple[int, int]] | None = None
    allow_identity: bool = False
    methods: list[Method] = Field(default_factory=lambda: list(Method))
    strategies: list[Strategy] = Field(default_factory=lambda: list(Strategy))
    skip_ineligible: bool = True
    repeats: int = Field(1, ge=1)
    seed: int = 0
    workers: int = Field(1, ge=1)
    include_threading_in_min: bool = False
    data: DataConfig = Field(default_factory=DataConfig)
    cost: CostModel = Field(default_factory=CostModel)
    app: AppConfig = Field(default_factory=AppConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def matrix(self) -> list[tuple[int, int]]:
        if self.pairs is not None:
            return [
                (ns, nd) for ns, nd in dict.fromkeys(self.pairs)
                if ns != nd or self.allow_identity
            ]
        return enumerate_pairs(self.ranks, allow_identity=self.allow_identity)

    def variants(self) -> list[tuple[Method, Strategy]]:
        desc = self.data.descriptor()
        return [
            (m, s)
            for m in dict.fromkeys(self.methods)
            for s in dict.fromkeys(self.strategies)
            if is_eligible(m, s) and desc.allows(s)
        ]

    def runs(self) -> list["RunSpec"]:
        specs: list[RunSpec] = []
        for ns, nd in self.matrix():
            for method, strategy in self.variants():
                for repeat in range(self.repeats):
                    index = len(specs)
                    specs.append(RunSpec(index, ns, nd, method, strategy, repeat, run_seed(self.seed, index)))
        return specs


@dataclass(frozen=True)
class RunSpec:
    index: int
    ns: int
    nd: int
    method: Method
    strategy: Strategy
    repeat: int
    seed: int

    @property
    def name(self) -> str:
        return f"{self.ns}-{self.nd}-{self.method.value}-{self.strategy.value}-{self.repeat}"


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self):
        return f"{self.field}: {self.rule}"


def run_seed(seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def enumerate_pairs(ranks, *, allow_identity: bool = False) -> list[tuple[int, int]]:
    values = sorted(set(ranks))
    return [(ns, nd) for ns in values for nd in values if ns != nd or allow_identity]


def _violations_from(err: ValidationError) -> list[Violation]:
    out = []
    for e in err.errors():
        loc = ".".join(str(part) for part in e["loc"]) or "<root>"
        out.append(Violation(loc, e["msg"]))
    return out


def validate_config(raw: dict[str, Any] | ExperimentConfig) -> list[Violation]:
    """Every reason the config cannot run; empty when it can."""
    if isinstance(raw, ExperimentConfig):
        cfg = raw
    else:
        try:
            cfg = ExperimentConfig.model_validate(raw or {})
        except ValidationError as e:
            return _violations_from(e)

    out: list[Violation] = []
    if cfg.pairs is None:
        if not cfg.ranks:
            out.append(Violation("ranks", "rank set must not be empty"))
        out.extend(Violation("ranks", f"rank count must be >= 1 (got {r})") for r in cfg.ranks if r < 1)
    else:
        for ns, nd in cfg.pairs:
            if ns < 1 or nd < 1:
                out.append(Violation("pairs", f"rank counts must be >= 1 (got {ns}->{nd})"))
            elif ns == nd and not cfg.allow_identity:
                out.append(Violation("pairs", f"{ns}->{nd} is an identity reconfiguration; set allow_identity"))
    if not out and not cfg.matrix():
        out.append(Violation("ranks", "no (ns, nd) pairs to run"))

    if not cfg.methods:
        out.append(Violation("methods", "at least one method is required"))
    if not cfg.strategies:
        out.append(Violation("strategies", "at least one strategy is required"))

    desc = cfg.data.descriptor()
    for m in dict.fromkeys(cfg.methods):
        for s in dict.fromkeys(cfg.strategies):
            if cfg.skip_ineligible:
                continue
            if not is_eligible(m, s):
                out.append(Violation("strategies", f"'{s.value}' is not available for method '{m.value}'"))
            elif not desc.allows(s):
                out.append(Violation("data.category", f"variable data cannot use strategy '{s.value}'"))
    if cfg.methods and cfg.strategies and not cfg.variants():
        out.append(Violation("strategies", "no eligible method/strategy combination"))
    return out


def parse_config(raw: dict[str, Any] | None) -> ExperimentConfig:
    """Validated ExperimentConfig, or ConfigurationError listing every violation."""
    violations = validate_config(raw or {})
    if violations:
        msg = "; ".join(str(v) for v in violations)
        logger.error(f"invalid experiment config: {msg}")
        raise ConfigurationError(msg)
    return ExperimentConfig.model_validate(raw or {})
