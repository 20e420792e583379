"""Per-run measurements and the blocking-vs-background comparison report.

omega is the cost of an iteration during a background redistribution relative
to a normal one (>= 1 means slower). The report keeps the median of repeated
runs per (method, strategy, ns, nd) and evaluates

    T_total^Bl = T_redis^Bl + T_it^ND * min(N_it over background variants)
    T_total^Bc = T_redis^Bc
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import pandas as pd

from mamsim.errors import InvalidArgumentError
from mamsim.redist.types import Method, Strategy

COLUMNS = ["method", "strategy", "ns", "nd", "t_redis", "omega", "n_it", "t_total_bl", "t_total_bc"]
GROUP_KEYS = ["method", "strategy", "ns", "nd"]

_METHOD_ORDER = [m.value for m in Method]
_STRATEGY_ORDER = [s.value for s in Strategy]


@dataclass(frozen=True)
class RunRecord:
    method: Method
    strategy: Strategy
    ns: int
    nd: int
    t_redis: float
    t_it_normal: float
    t_it_during: float
    n_it_overlapped: int
    t_it_nd: float
    trace_hash: str = ""
    n_elements: int = 0
    seed: int = 0
    data_ok: bool = True

    def __post_init__(self):
        if self.t_redis < 0:
            raise InvalidArgumentError(f"t_redis must be >= 0 (got {self.t_redis})")
        if self.n_it_overlapped < 0:
            raise InvalidArgumentError(f"n_it_overlapped must be >= 0 (got {self.n_it_overlapped})")
        if self.strategy is Strategy.BLOCKING and self.n_it_overlapped:
            raise InvalidArgumentError("a blocking redistribution cannot overlap iterations")

    @property
    def omega(self) -> float:
        return omega(self.t_it_during, self.t_it_normal)

    def row(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["strategy"] = self.strategy.value
        d["omega"] = self.omega
        return d


def omega(t_it_during: float, t_it_normal: float) -> float:
    if t_it_normal <= 0:
        raise InvalidArgumentError(f"omega needs a positive baseline iteration time (got {t_it_normal})")
    return t_it_during / t_it_normal


def total_time_blocking(t_redis_bl: float, t_it_nd: float, min_n_it: float) -> float:
    for name, v in (("t_redis_bl", t_redis_bl), ("t_it_nd", t_it_nd), ("min_n_it", min_n_it)):
        if v < 0:
            raise InvalidArgumentError(f"total_time_blocking: {name} must be >= 0 (got {v})")
    return t_redis_bl + t_it_nd * min_n_it


def total_time_background(t_redis_bc: float) -> float:
    if t_redis_bc < 0:
        raise InvalidArgumentError(f"total_time_background: t_redis_bc must be >= 0 (got {t_redis_bc})")
    return t_redis_bc


def mean(values: Sequence[float]) -> float:
    """Arithmetic mean that returns identical samples unchanged."""
    if not values:
        raise InvalidArgumentError("mean of no values")
    lo, hi = min(values), max(values)
    if lo == hi:
        return lo
    return math.fsum(values) / len(values)


def excluded_from_min(method: str, strategy: str, include_threading: bool) -> bool:
    return not include_threading and strategy == Strategy.THREADING.value and method != Method.COL.value


@dataclass
class Report:
    table: pd.DataFrame
    include_threading_in_min: bool = False

    def __len__(self):
        return len(self.table)

    def row(self, method: Method | str, strategy: Strategy | str, ns: int, nd: int) -> dict | None:
        m = method.value if isinstance(method, Method) else method
        s = strategy.value if isinstance(strategy, Strategy) else strategy
        t = self.table
        hit = t[(t.method == m) & (t.strategy == s) & (t.ns == ns) & (t.nd == nd)]
        if hit.empty:
            return None
        return hit.iloc[0].to_dict()

    def to_csv(self, path: str | None = None) -> str:
        text = self.table[COLUMNS].to_csv(index=False, lineterminator="\n")
        if path:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_jsonl(self, path: str | None = None) -> str:
        text = self.table[COLUMNS].to_json(orient="records", lines=True)
        if text and not text.endswith("\n"):
            text += "\n"
        if path:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def summarize(records: Iterable[RunRecord], *, include_threading_in_min: bool = False) -> Report:
    rows = [r.row() for r in records]
    if not rows:
        return Report(pd.DataFrame(columns=COLUMNS + ["t_it_nd", "runs"]), include_threading_in_min)

    df = pd.DataFrame(rows)
    grouped = (
        df.groupby(GROUP_KEYS, sort=False)
        .agg(
            t_redis=("t_redis", "median"),
            omega=("omega", "median"),
            n_it=("n_it_overlapped", "median"),
            t_it_nd=("t_it_nd", "median"),
            runs=("t_redis", "size"),
        )
        .reset_index()
    )

    grouped["method"] = pd.Categorical(grouped["method"], categories=_METHOD_ORDER, ordered=True)
    grouped["strategy"] = pd.Categorical(grouped["strategy"], categories=_STRATEGY_ORDER, ordered=True)
    grouped = grouped.sort_values(["ns", "nd", "method", "strategy"]).reset_index(drop=True)
    grouped["method"] = grouped["method"].astype(str)
    grouped["strategy"] = grouped["strategy"].astype(str)

    background = grouped[grouped.strategy != Strategy.BLOCKING.value]
    keep = pd.Series(
        [not excluded_from_min(m, s, include_threading_in_min) for m, s in zip(background.method, background.strategy)],
        index=background.index,
        dtype=bool,
    )
    eligible = background[keep]
    min_n_it = eligible.groupby(["ns", "nd"])["n_it"].min().to_dict()

    t_bl, t_bc = [], []
    for row in grouped.itertuples(index=False):
        if row.strategy == Strategy.BLOCKING.value:
            m = min_n_it.get((row.ns, row.nd))
            t_bl.append(float("nan") if m is None else total_time_blocking(row.t_redis, row.t_it_nd, m))
            t_bc.append(float("nan"))
        else:
            t_bl.append(float("nan"))
            t_bc.append(total_time_background(row.t_redis))
    grouped["t_total_bl"] = t_bl
    grouped["t_total_bc"] = t_bc
    return Report(grouped, include_threading_in_min)
