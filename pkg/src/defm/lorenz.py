"""Synthetic benchmark: a ring of diffusively coupled Lorenz oscillators.

Oscillator j (cyclic) evolves as

    dx_j/dt = sigma * (y_j - x_j) + c * x_{j-1}
    dy_j/dt = x_j * (rho - z_j) - y_j
    dz_j/dt = x_j * y_j - beta * z_j

integrated with classical fixed-step RK4 and downsampled after a
transient. A schedule can redraw rho at fixed intervals to make the
dynamics non-stationary. Variables are ordered x_0..x_{N-1},
y_0..y_{N-1}, z_0..z_{N-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import SeriesMatrix


class BlowUpError(RuntimeError):
    """Integration left the guard ball; carries the failure time."""

    def __init__(self, t: float, bound: float):
        self.t = t
        super().__init__(f"trajectory exceeded |state| = {bound:g} at t = {t:.6g}")


@dataclass
class LorenzConfig:
    oscillators: int = 30
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    coupling: float = 0.1
    dt_integrate: float = 0.002
    dt_sample: float = 0.02
    transient: float = 100.0
    seed: int = 0
    guard: float = 1e4

    def __post_init__(self):
        if self.oscillators < 1:
            raise ValueError("need at least one oscillator")
        if self.dt_integrate <= 0 or self.dt_sample <= 0:
            raise ValueError("step sizes must be positive")
        ratio = self.dt_sample / self.dt_integrate
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("dt_sample must be a positive integer multiple of dt_integrate")
        if self.transient < 0:
            raise ValueError("transient must be >= 0")

    @property
    def n_vars(self) -> int:
        return 3 * self.oscillators

    @property
    def sample_stride(self) -> int:
        return int(round(self.dt_sample / self.dt_integrate))


@dataclass
class SwitchSchedule:
    """Piecewise-constant rho, redrawn uniformly once per period."""

    period: float = 100.0
    rho_low: float = 28.0
    rho_high: float = 42.0
    seed: int = 0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.rho_high < self.rho_low:
            raise ValueError("rho_high must be >= rho_low")

    def rho_for_segment(self, index: int) -> float:
        rng = np.random.default_rng([self.seed, index])
        return float(rng.uniform(self.rho_low, self.rho_high))

    def rho_at(self, t: float) -> float:
        return self.rho_for_segment(int(np.floor(t / self.period + 1e-12)))

    def boundaries(self, duration: float) -> np.ndarray:
        """Switch times in (0, duration)."""
        count = int(np.ceil(duration / self.period - 1e-12)) - 1
        return self.period * np.arange(1, max(count, 0) + 1)


def _derivative(state: np.ndarray, n: int, sigma: float, rho: float, beta: float,
                coupling: float) -> np.ndarray:
    x, y, z = state[:n], state[n:2 * n], state[2 * n:]
    out = np.empty_like(state)
    out[:n] = sigma * (y - x) + coupling * np.roll(x, 1)
    out[n:2 * n] = x * (rho - z) - y
    out[2 * n:] = x * y - beta * z
    return out


def rk4_step(state: np.ndarray, h: float, n: int, sigma: float, rho: float,
             beta: float, coupling: float) -> np.ndarray:
    k1 = _derivative(state, n, sigma, rho, beta, coupling)
    k2 = _derivative(state + 0.5 * h * k1, n, sigma, rho, beta, coupling)
    k3 = _derivative(state + 0.5 * h * k2, n, sigma, rho, beta, coupling)
    k4 = _derivative(state + h * k3, n, sigma, rho, beta, coupling)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def initial_state(config: LorenzConfig) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    return rng.uniform(-10.0, 10.0, size=config.n_vars)


def integrate_lorenz(config: LorenzConfig, duration: float,
                     schedule: SwitchSchedule | None = None,
                     state: np.ndarray | None = None) -> SeriesMatrix:
    """Integrate past the transient and sample every dt_sample.

    Returns floor(duration / dt_sample) + 1 samples starting at the end
    of the transient. With a schedule, rho is held constant within each
    integration step, so switches land on step boundaries. Time for the
    schedule is measured from the start of the transient.
    """
    if duration < config.dt_sample:
        raise ValueError("duration must cover at least one sampling interval")
    n = config.oscillators
    if state is None:
        state = initial_state(config)
    else:
        state = np.asarray(state, dtype=np.float64).copy()
        if state.shape != (config.n_vars,):
            raise ValueError(f"state must have shape ({config.n_vars},), got {state.shape}")

    h = config.dt_integrate
    stride = config.sample_stride
    transient_steps = int(round(config.transient / h))
    n_samples = int(np.floor(duration / config.dt_sample + 1e-9)) + 1
    total_steps = transient_steps + (n_samples - 1) * stride

    samples = np.empty((config.n_vars, n_samples))
    sample_idx = 0
    for step in range(total_steps + 1):
        if step >= transient_steps and (step - transient_steps) % stride == 0:
            samples[:, sample_idx] = state
            sample_idx += 1
        if step == total_steps:
            break
        t = step * h
        rho = schedule.rho_at(t) if schedule is not None else config.rho
        state = rk4_step(state, h, n, config.sigma, rho, config.beta, config.coupling)
        if np.max(np.abs(state)) > config.guard or not np.all(np.isfinite(state)):
            raise BlowUpError((step + 1) * h, config.guard)

    names = ([f"x{j}" for j in range(n)] + [f"y{j}" for j in range(n)]
             + [f"z{j}" for j in range(n)])
    return SeriesMatrix(samples, dt=config.dt_sample, var_names=names)


def add_noise(series: SeriesMatrix, variance: float, seed: int = 0) -> SeriesMatrix:
    """Additive white Gaussian noise with the given variance."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    data = series.data.copy()
    if variance > 0:
        rng = np.random.default_rng(seed)
        data = data + rng.normal(0.0, np.sqrt(variance), size=data.shape)
    return SeriesMatrix(data, dt=series.dt, target_index=series.target_index,
                        var_names=series.var_names)


@dataclass
class Case:
    """One benchmark instance: a known window and its held-out future."""

    start: int
    target: int
    window: SeriesMatrix
    future: np.ndarray


def sample_cases(series: SeriesMatrix, count: int, m: int, s_dim: int,
                 seed: int = 0, targets: list[int] | None = None) -> list[Case]:
    """Draw (start, target) pairs uniformly and cut out their windows.

    Each case needs m + s_dim - 1 consecutive columns: the window plus
    the held-out future of length s_dim - 1.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 2 <= s_dim <= m:
        raise ValueError(f"s_dim must be in [2, {m}], got {s_dim}")
    span = s_dim - 1
    max_start = series.m - (m + span)
    if max_start < 0:
        raise ValueError(f"series has {series.m} points; need at least {m + span}")
    pool = list(range(series.n)) if targets is None else list(targets)
    for k in pool:
        if not 0 <= k < series.n:
            raise ValueError(f"target index {k} out of range for {series.n} variables")
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        start = int(rng.integers(0, max_start + 1))
        target = int(pool[rng.integers(0, len(pool))])
        window = series.window(start, m)
        window.target_index = target
        future = series.data[target, start + m:start + m + span].copy()
        cases.append(Case(start=start, target=target, window=window, future=future))
    return cases
