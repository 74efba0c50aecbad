"""Monte Carlo simulation of the underlying jump process.

Each element's stress drifts at the shear rate and jumps to zero at unit rate
while its magnitude exceeds the threshold. Because the hazard is 0 or 1 and
the drift is monotone, the set of times spent above threshold after a jump is
an interval before reaching ``-sigma_c`` from below plus a half-line after
crossing ``+sigma_c``; jump times follow exactly from one exponential draw.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .initial import InitialDensity
from .model import ShearProfile

logger = logging.getLogger(__name__)

CHUNK = 8192


@dataclass(frozen=True)
class PdmpConfig:
    """Ensemble settings.

    Attributes
    ----------
    n_paths : int
        Number of independent paths.
    seed : int
        Master seed; chunk streams are spawned from it.
    profile : ShearProfile
        Drift rate, must be nonnegative.
    sigma_c : float
        Threshold.
    t_end : float
        Horizon.
    initial : InitialDensity
        Law of the initial stress.
    """

    n_paths: int
    seed: int
    profile: ShearProfile
    sigma_c: float
    t_end: float
    initial: InitialDensity

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ConfigurationError("n_paths must be at least 1")
        if not self.sigma_c > 0 or not self.t_end > 0:
            raise ConfigurationError("sigma_c and t_end must be positive")


@dataclass(frozen=True)
class EnsembleEstimate:
    """Monte Carlo fluidity and mean stress with standard errors."""

    t: float
    f_hat: float
    f_se: float
    tau_hat: float
    tau_se: float
    n_paths: int


@dataclass(frozen=True)
class PathResult:
    """Terminal state of one path."""

    sigma: float
    n_jumps: int


def positive_exponential(rng: np.random.Generator, size) -> np.ndarray:
    """Unit exponentials, redrawn on the (measure-zero) event of an exact zero."""
    e = rng.standard_exponential(size)
    bad = e <= 0.0
    while np.any(bad):
        e[bad] = rng.standard_exponential(int(bad.sum()))
        bad = e <= 0.0
    return e


def threshold_times(profile: ShearProfile, t, sigma, sigma_c: float):
    """Times at which a drifting path started at ``(t, sigma)`` reaches ``-sigma_c`` and ``+sigma_c``.

    Each time is clamped below at ``t``: a path already past a level
    reaches it immediately.
    """
    t = np.asarray(t, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    g = np.asarray(profile.accum(t), dtype=float)
    t_low = np.where(sigma < -sigma_c, profile.inverse(g + (-sigma_c - sigma)), t)
    t_high = np.where(sigma < sigma_c, profile.inverse(g + np.maximum(sigma_c - sigma, 0.0)), t)
    return np.maximum(t_low, t), np.maximum(t_high, t)


def next_jump_time(profile: ShearProfile, t, sigma, sigma_c: float, clock):
    """Jump time after ``t`` given the exponential clock value ``clock``.

    The clock runs only while ``|stress| > sigma_c``: first on ``[t, t_low)``
    while below ``-sigma_c``, then from ``t_high`` on.
    """
    t_low, t_high = threshold_times(profile, t, sigma, sigma_c)
    first = t_low - np.asarray(t, dtype=float)
    return np.where(clock <= first, t + clock, t_high + (clock - first))


def _simulate_chunk(
    rng: np.random.Generator,
    n: int,
    profile: ShearProfile,
    initial: InitialDensity,
    sigma_c: float,
    sample_times: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """States at ``sample_times`` (shape ``(len(times), n)``) and jump counts."""
    sigma0 = initial.sample(rng, n)
    t_last = np.zeros(n)
    s_last = sigma0
    jumps = np.zeros(n, dtype=np.int64)
    out = np.empty((sample_times.size, n))
    t_end = float(sample_times[-1])
    active = np.arange(n)
    while active.size:
        tc, sc_ = t_last[active], s_last[active]
        clock = positive_exponential(rng, active.size)
        tj = next_jump_time(profile, tc, sc_, sigma_c, clock)
        gc = np.asarray(profile.accum(tc))
        for k, ts in enumerate(sample_times):
            hit = (tc <= ts) & (ts < tj)
            if np.any(hit):
                out[k, active[hit]] = sc_[hit] + np.asarray(profile.accum(ts)) - gc[hit]
        alive = tj <= t_end
        idx = active[alive]
        t_last[idx] = tj[alive]
        s_last[idx] = 0.0
        jumps[idx] += 1
        active = idx
    return out, jumps


def simulate_path(
    seed: int | np.random.SeedSequence,
    profile: ShearProfile,
    sigma0: float,
    sigma_c: float,
    t_end: float,
) -> PathResult:
    """Simulate a single path from a fixed initial stress."""
    rng = np.random.default_rng(seed)
    t, s, jumps = 0.0, float(sigma0), 0
    while True:
        clock = positive_exponential(rng, 1)[0]
        tj = float(next_jump_time(profile, t, s, sigma_c, clock))
        if tj > t_end:
            return PathResult(s + float(profile.accum(t_end)) - float(profile.accum(t)), jumps)
        t, s, jumps = tj, 0.0, jumps + 1


def simulate_ensemble(
    config: PdmpConfig,
    sample_times,
    *,
    jobs: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """States of all paths at the sample times, plus jump counts up to the last one.

    Paths are processed in fixed chunks, each with its own stream spawned from
    the master seed, so the result does not depend on ``jobs``.
    """
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ConfigurationError("sample times must be nonnegative and strictly increasing")
    if times[-1] > config.t_end * (1 + 1e-12):
        raise ConfigurationError("sample times exceed t_end")
    sizes = [min(CHUNK, config.n_paths - i) for i in range(0, config.n_paths, CHUNK)]
    streams = np.random.SeedSequence(config.seed).spawn(len(sizes))

    def work(i: int):
        return _simulate_chunk(
            np.random.default_rng(streams[i]), sizes[i], config.profile,
            config.initial, config.sigma_c, times,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    states = np.concatenate([p[0] for p in parts], axis=1)
    jumps = np.concatenate([p[1] for p in parts])
    return states, jumps


def estimate(config: PdmpConfig, sample_times, *, jobs: int = 1) -> list[EnsembleEstimate]:
    """Ensemble fluidity and mean stress with standard errors at each sample time."""
    times = np.asarray(sample_times, dtype=float)
    states, _ = simulate_ensemble(config, times, jobs=jobs)
    n = states.shape[1]
    result = []
    for k, ts in enumerate(times):
        above = (np.abs(states[k]) > config.sigma_c).astype(float)
        f_hat = float(above.mean())
        tau_hat = float(states[k].mean())
        denom = np.sqrt(n - 1) if n > 1 else np.inf
        result.append(
            EnsembleEstimate(
                t=float(ts),
                f_hat=f_hat,
                f_se=float(above.std() / denom),
                tau_hat=tau_hat,
                tau_se=float(states[k].std() / denom),
                n_paths=n,
            )
        )
    return result
