"""Population-transfer experiments: single transfers, epsilon sweeps and cyclic loops."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ancillary_frame import PathSchedule, cyclic_schedule, transfer_schedule
from .errors import QctlError
from .field_synthesis import ErrorModel, hamiltonian
from .quantum_core import TimeGrid, propagate

MIN_STEPS = 1000
LEVELS = ("0", "1", "e")
_LEVEL_INDEX = {"0": 0, "1": 1, "e": 2}
GROUND = np.array([1.0, 0.0, 0.0], dtype=complex)


def default_steps(lam: float) -> int:
    """Steps per period: 4000, raised for fast global phases (8000 at lambda = 10)."""
    n = int(max(4000, np.ceil(800 * abs(lam))))
    return n + (n % 2)


def _check_steps(n: int, what: str):
    if n < MIN_STEPS:
        raise ValueError(f"{what} must be >= {MIN_STEPS}, got {n}")
    if n % 2:
        raise ValueError(f"{what} must be even so that half-period checkpoints fall on samples")


@dataclass(frozen=True)
class TransferSpec:
    lam: float
    model: ErrorModel = field(default_factory=ErrorModel)
    n_steps: int = 4000
    duration: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        _check_steps(self.n_steps, "n_steps")

    def schedule(self) -> PathSchedule:
        return transfer_schedule(self.lam, self.duration)


@dataclass(frozen=True)
class CyclicSpec:
    lam: float
    model: ErrorModel = field(default_factory=ErrorModel)
    n_steps_per_T: int = 4800
    loops: int = 2
    return_sweep: str = "reverse"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.loops < 1:
            raise ValueError("loops must be >= 1")
        _check_steps(self.n_steps_per_T, "n_steps_per_T")

    def schedule(self) -> PathSchedule:
        return cyclic_schedule(self.lam, self.loops, sweep=self.return_sweep)


@dataclass(frozen=True)
class Checkpoint:
    time: float
    level: str
    value: float


@dataclass(frozen=True)
class Peak:
    level: str
    time: float
    value: float


@dataclass
class SimulationResult:
    times: np.ndarray
    states: np.ndarray
    populations: np.ndarray
    checkpoints: list
    peaks: list = field(default_factory=list)

    @property
    def fidelity_at(self) -> dict:
        return {c.time: c.value for c in self.checkpoints}

    def population(self, level: str) -> np.ndarray:
        return self.populations[:, _LEVEL_INDEX[level]]

    def value_at(self, t: float, level: str) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        return float(self.populations[i, _LEVEL_INDEX[level]])


def populations_of(states: np.ndarray) -> np.ndarray:
    """|<n|psi>|^2 for n in (0, 1, e); accepts one state or a trajectory."""
    return np.abs(np.asarray(states)) ** 2


def populations(result: SimulationResult) -> np.ndarray:
    return populations_of(result.states)


def _run(schedule: PathSchedule, model: ErrorModel, n_steps: int):
    grid = TimeGrid(schedule.t_start, schedule.t_end, n_steps)
    states = propagate(hamiltonian(schedule, model), GROUND, grid, vectorized=True)
    return grid.samples, states, populations_of(states)


def single_transfer(spec: TransferSpec) -> SimulationResult:
    """|0> -> |e> -> |1> over one period; checkpoints P_e(T/2) and P_1(T)."""
    times, states, pops = _run(spec.schedule(), spec.model, spec.n_steps)
    half = spec.n_steps // 2
    cps = [
        Checkpoint(float(times[half]), "e", float(pops[half, 2])),
        Checkpoint(float(times[-1]), "1", float(pops[-1, 1])),
    ]
    return SimulationResult(times, states, pops, cps)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    epsilon: float
    fidelity: float | None
    reason: str = ""


def epsilon_grid(lo: float = -0.2, hi: float = 0.2, step: float = 0.01) -> np.ndarray:
    if step <= 0 or hi < lo:
        raise ValueError("epsilon grid needs step > 0 and max >= min")
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 12)


def sweep_workers() -> int:
    env = os.environ.get("QCTL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def epsilon_sweep(lambdas, epsilons, kind: str, n_steps: int | None = None,
                  detuning_sign: float = -1.0, workers: int | None = None) -> list:
    """F(T) = P_1(T) for each (lambda, epsilon); rows sorted by (lambda, epsilon).

    A failing point yields a row with ``fidelity=None`` and the failure reason.
    """
    lambdas = [float(x) for x in lambdas]
    epsilons = [float(x) for x in epsilons]
    if not lambdas or not epsilons:
        raise ValueError("sweep grids must be nonempty")

    def point(key):
        lam, eps = key
        try:
            spec = TransferSpec(lam, ErrorModel(kind, eps, detuning_sign), n_steps or default_steps(lam))
            return SweepRow(lam, eps, single_transfer(spec).checkpoints[-1].value)
        except (QctlError, ValueError, ArithmeticError) as exc:
            return SweepRow(lam, eps, None, f"{type(exc).__name__}: {exc}")

    keys = sorted({(lam, eps) for lam in lambdas for eps in epsilons})
    workers = workers or sweep_workers()
    if workers <= 1:
        rows = [point(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, keys))
    return sorted(rows, key=lambda r: (r.lam, r.epsilon))


def cyclic_checkpoint_plan(loops: int, period: float = 1.0) -> list:
    """(time, level) after each half-period milestone of every loop."""
    plan = []
    for k in range(loops):
        t0 = 1.5 * period * k
        plan += [(t0 + 0.5 * period, "e"), (t0 + period, "1"), (t0 + 1.5 * period, "0")]
    return plan


def find_peak(times: np.ndarray, values: np.ndarray, window: tuple) -> tuple:
    """Largest sample in ``window`` refined by a parabola through its neighbours."""
    lo, hi = window
    inside = np.nonzero((times >= lo) & (times <= hi))[0]
    if inside.size == 0:
        raise ValueError("peak window contains no samples")
    i = int(inside[np.argmax(values[inside])])
    if i == 0 or i == len(times) - 1:
        return float(times[i]), float(values[i])
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    h = times[i + 1] - times[i]
    den = y0 - 2 * y1 + y2
    if den >= 0:
        return float(times[i]), float(y1)
    shift = 0.5 * (y0 - y2) / den
    return float(times[i] + shift * h), float(y1 - 0.25 * (y0 - y2) * shift)


PEAK_WINDOWS = {"e": (0.5, 0.8), "0": (1.5, 1.9)}


def cyclic_transfer(spec: CyclicSpec) -> SimulationResult:
    """Repeated |0> -> |1> -> |0> loops; populations read at every half-period milestone."""
    schedule = spec.schedule()
    n = int(round(spec.n_steps_per_T * schedule.t_end))
    times, states, pops = _run(schedule, spec.model, n)
    cps = []
    for t, level in cyclic_checkpoint_plan(spec.loops):
        i = int(round(t * spec.n_steps_per_T))
        cps.append(Checkpoint(float(times[i]), level, float(pops[i, _LEVEL_INDEX[level]])))
    peaks = []
    for level, window in PEAK_WINDOWS.items():
        if window[1] <= schedule.t_end:
            pt, pv = find_peak(times, pops[:, _LEVEL_INDEX[level]], window)
            peaks.append(Peak(level, pt, pv))
    return SimulationResult(times, states, pops, cps, peaks)
