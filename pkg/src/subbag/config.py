"""Run configuration shared by the CLI commands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .data import CsvSchema
from .errors import ConfigError
from .losses import Family
from .subsample import SubbaggingPlan


@dataclass
class RunConfig:
    family: Family
    response: str
    covariates: list[str] | None = None  # None: all other columns
    categorical: list[str] = field(default_factory=list)
    intercept: bool = False
    delta: float | None = None
    k: int | None = None
    alpha: float | None = None
    m: int | None = None
    gamma: float = 1.0
    n_grid: int = 100
    seed: int = 0
    threads: int = 1
    indexed: bool = False
    on_error: str = "raise"
    summaries_out: str | None = None
    report_out: str | None = None
    data: str | None = None

    def validate(self) -> None:
        if (self.delta is None) == (self.k is None):
            raise ConfigError("give exactly one of --delta and --k")
        if (self.alpha is None) == (self.m is None):
            raise ConfigError("give exactly one of --alpha and --m")
        if self.delta is not None and not 0 < self.delta < 0.5:
            raise ConfigError("--delta must lie in (0, 1/2)")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("--alpha must be positive")
        if self.k is not None and self.k < 1:
            raise ConfigError("--k must be positive")
        if self.m is not None and self.m < 1:
            raise ConfigError("--m must be positive")
        if self.gamma <= 0:
            raise ConfigError("--gamma must be positive")
        if self.n_grid < 2:
            raise ConfigError("--grid must be at least 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("--seed must fit in 64 bits")
        if self.threads < 1:
            raise ConfigError("--threads must be positive")

    def schema(self) -> CsvSchema:
        return CsvSchema(response=self.response, family=self.family, covariates=self.covariates,
                         categorical=list(self.categorical), intercept=self.intercept)

    def plan(self, N: int) -> SubbaggingPlan:
        if self.delta is not None:
            k = SubbaggingPlan.from_rates(N, self.delta, 1.0).k
        else:
            k = self.k
        if k > N:
            raise ConfigError(f"k={k} exceeds the number of rows N={N}")
        m = self.m if self.m is not None else math.floor(self.alpha * N / k)
        if m < 1:
            raise ConfigError(f"alpha={self.alpha} gives no subsamples for N={N}, k={k}")
        return SubbaggingPlan(N=N, k=k, m=m, master_seed=self.seed, delta=self.delta,
                              alpha=self.alpha)
