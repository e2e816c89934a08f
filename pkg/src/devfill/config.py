"""Run configuration shared by the CLI commands."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .ruling import SolverConfig


TOLERANCE_KEYS = ("pinch_h_min", "dedup_tol", "H_min", "trust_radius")


def env_threads(default=1):
    """Thread cap from ``DEVFILL_THREADS``; unset means ``default``, capped at the CPU count."""
    raw = os.environ.get("DEVFILL_THREADS", "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DEVFILL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"DEVFILL_THREADS must be a positive integer, got {n}")
    return min(n, os.cpu_count() or 1)


@dataclass
class RunConfig:
    grid: int = 512
    delta: float = 0.02           # fraction of L
    tol_scale: float = 1.0
    tolerances: dict = field(default_factory=dict)
    budget: int = 100_000
    out: Path = Path("devfill-out")
    seed: int = 0
    force: bool = False
    threads: int = 1

    def __post_init__(self):
        self.out = Path(self.out)
        self.validate()

    def validate(self):
        if isinstance(self.grid, bool) or not isinstance(self.grid, int) or self.grid < 64:
            raise ConfigError(f"grid must be an integer >= 64, got {self.grid!r}")
        if not 0 < self.delta < 0.25:
            raise ConfigError(f"delta must lie in (0, 0.25) as a fraction of L, got {self.delta!r}")
        if not self.tol_scale > 0:
            raise ConfigError(f"tol-scale must be positive, got {self.tol_scale!r}")
        if not isinstance(self.budget, int) or self.budget < 1:
            raise ConfigError(f"budget must be a positive integer, got {self.budget!r}")
        for k, v in self.tolerances.items():
            if k not in TOLERANCE_KEYS:
                raise ConfigError(f"unknown tolerance {k!r}; expected one of {', '.join(TOLERANCE_KEYS)}")
            if not v > 0:
                raise ConfigError(f"tolerance {k} must be positive, got {v!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads!r}")

    @property
    def trust_radius(self):
        return self.tolerances.get("trust_radius", 0.05)

    def solver(self):
        extra = {k: v for k, v in self.tolerances.items() if k != "trust_radius"}
        return SolverConfig(grid=self.grid, delta_frac=self.delta, budget=self.budget,
                            tol_scale=self.tol_scale, threads=self.threads, **extra)

    def to_json(self):
        # output directory and thread count do not affect results and stay out of reports
        return {
            "grid": self.grid,
            "delta": self.delta,
            "tol_scale": self.tol_scale,
            "tolerances": dict(sorted(self.tolerances.items())),
            "budget": self.budget,
            "seed": self.seed,
            "force": self.force,
        }
