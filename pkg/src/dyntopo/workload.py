"""Reproducible synthetic client-demand sequences.

Each client's demand follows a normal distribution whose mean drifts as a
Markov chain: every ``mean_update_period`` steps a fresh uniform target is
folded into the mean by exponential moving average. Occasional bursts add a
uniform impulse on top. Every sample is clamped into the configured range.

Each client draws from its own independent RNG stream (spawned from the
master seed), so columns can be generated in any order, or in parallel, with
bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WorkloadConfig:
    clients: int
    steps: int
    mean_update_period: int = 100
    ema_alpha: float = 0.3
    noise_std: float = 5.0
    burst_prob: float = 0.01
    burst_magnitude_range: tuple[float, float] = (50.0, 100.0)
    clamp: tuple[float, float] = (0.1, 100.0)
    seed: int = 0

    def validate(self) -> None:
        if self.clients < 1 or self.steps < 1:
            raise ValueError("need clients >= 1 and steps >= 1")
        if not 0 < self.ema_alpha <= 1:
            raise ValueError("ema_alpha must be in (0, 1]")
        lo, hi = self.clamp
        if not 0 < lo <= hi:
            raise ValueError("clamp must satisfy 0 < lo <= hi")
        if self.mean_update_period < 1:
            raise ValueError("mean_update_period must be >= 1")
        if not 0 <= self.burst_prob <= 1:
            raise ValueError("burst_prob must be in [0, 1]")
        blo, bhi = self.burst_magnitude_range
        if blo > bhi:
            raise ValueError("burst_magnitude_range must be ordered")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class DemandMatrix:
    """(steps x clients) byte demands; row t is one step's demand vector."""

    values: np.ndarray
    seed: int

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def clients(self) -> int:
        return self.values.shape[1]

    def row(self, t: int) -> np.ndarray:
        return self.values[t]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,client,bytes\n")
            for t in range(self.steps):
                for c in range(self.clients):
                    fh.write(f"{t},{c},{self.values[t, c]!r}\n")

    def save(self, path) -> None:
        np.save(path, self.values)


def ema_update(mu: float, x: float, alpha: float) -> float:
    """One exponential-moving-average step: alpha * x + (1 - alpha) * mu."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    return alpha * x + (1.0 - alpha) * mu


def _client_column(rng: np.random.Generator, cfg: WorkloadConfig) -> np.ndarray:
    """One client's demand series from its own RNG stream.

    Draw order per client: initial mean, one uniform target per later period,
    per-step noise, per-step burst coin, per-step burst magnitude (magnitudes
    are drawn unconditionally to keep the stream shape fixed).
    """
    lo, hi = cfg.clamp
    n_periods = math.ceil(cfg.steps / cfg.mean_update_period)
    mu = rng.uniform(lo, hi)
    mus = np.empty(cfg.steps)
    for k in range(n_periods):
        if k > 0:
            mu = ema_update(mu, rng.uniform(lo, hi), cfg.ema_alpha)
        a = k * cfg.mean_update_period
        mus[a:a + cfg.mean_update_period] = mu
    x = mus + rng.normal(0.0, cfg.noise_std, size=cfg.steps)
    hits = rng.random(cfg.steps) < cfg.burst_prob
    magnitudes = rng.uniform(*cfg.burst_magnitude_range, size=cfg.steps)
    x = x + hits * magnitudes
    return np.clip(x, lo, hi)


def generate(cfg: WorkloadConfig) -> DemandMatrix:
    """Deterministic demand matrix for the configured process."""
    cfg.validate()
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.clients)
    cols = [_client_column(np.random.default_rng(ch), cfg) for ch in children]
    return DemandMatrix(values=np.column_stack(cols), seed=cfg.seed)


def client_column(cfg: WorkloadConfig, client: int) -> np.ndarray:
    """Regenerate a single client's column independently of the others."""
    cfg.validate()
    child = np.random.SeedSequence(cfg.seed).spawn(cfg.clients)[client]
    return _client_column(np.random.default_rng(child), cfg)
