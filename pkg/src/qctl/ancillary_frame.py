"""Ancillary basis, phase functions and the exact propagator of the three-level system.

Basis order is (|0>, |1>, |e>) everywhere. A :class:`PathSchedule` is a list of
stages; inside a stage the mixing angles theta(t), phi(t) are analytic ramps and
the global phase of the bright paths is f(t) = lambda * phi(t), while the phase
of path 1 is held constant (f1_dot = 0).

Functions accept a scalar time or an array of times. Times on a stage boundary
belong to the later stage, except the final endpoint of the schedule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ScheduleDomainError, SingularScheduleError

ALPHA0 = np.pi / 2


@dataclass(frozen=True)
class Ramp:
    """Linear angle ramp ``start + rate * (t - t_begin)``."""

    start: float
    rate: float

    def value(self, tau):
        return self.start + self.rate * tau

    def derivative(self, tau):
        return np.full_like(np.asarray(tau, dtype=float), self.rate)

    def second_derivative(self, tau):
        return np.zeros_like(np.asarray(tau, dtype=float))


@dataclass(frozen=True)
class Stage:
    t_begin: float
    t_end: float
    theta: Ramp
    phi: Ramp
    lam: float = 0.0
    f1_const: float = np.pi / 2
    transfer_path: int = 2

    def __post_init__(self):
        if not self.t_end > self.t_begin:
            raise ValueError("stage must have positive duration")
        if self.transfer_path not in (1, 2, 3):
            raise ValueError("transfer_path must be 1, 2 or 3")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_begin

    def phi_span(self) -> float:
        return float(self.phi.value(self.duration) - self.phi.value(0.0))


@dataclass(frozen=True)
class PathSchedule:
    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("schedule needs at least one stage")
        for a, b in zip(stages, stages[1:]):
            if abs(a.t_end - b.t_begin) > 1e-12:
                raise ValueError("stages must tile the run interval without gaps or overlaps")
        object.__setattr__(self, "stages", stages)

    @property
    def t_start(self) -> float:
        return self.stages[0].t_begin

    @property
    def t_end(self) -> float:
        return self.stages[-1].t_end

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([s.t_begin for s in self.stages] + [self.t_end])

    @property
    def max_lambda(self) -> float:
        return max(abs(s.lam) for s in self.stages)

    def stage_index(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tol = 1e-12
        if np.any(t < self.t_start - tol) or np.any(t > self.t_end + tol):
            raise ScheduleDomainError(f"time outside schedule [{self.t_start}, {self.t_end}]")
        starts = np.array([s.t_begin for s in self.stages])
        idx = np.searchsorted(starts, t + tol, side="right") - 1
        return np.clip(idx, 0, len(self.stages) - 1)

    def stage_at(self, t: float) -> Stage:
        return self.stages[int(self.stage_index(t))]


@dataclass
class PathParameters:
    """Schedule quantities evaluated at one or more times (arrays broadcast with t)."""

    t: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    ddtheta: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    lam: np.ndarray
    f1_const: np.ndarray
    f_offset: np.ndarray = field(repr=False)

    @property
    def df(self):
        return self.lam * self.dphi

    @property
    def ddf(self):
        return self.lam * self.ddphi

    @property
    def f(self):
        return self.f_offset + self.lam * self.phi


def _stage_offsets(schedule: PathSchedule) -> list:
    """Accumulated f at the start of each stage, minus lambda*phi(t_begin) of that stage."""
    offsets = []
    acc = 0.0
    for s in schedule.stages:
        offsets.append(acc - s.lam * s.phi.value(0.0))
        acc += s.lam * s.phi_span()
    return offsets


def _evaluate_stage(stage: Stage, t, f_offset: float = 0.0) -> PathParameters:
    t = np.asarray(t, dtype=float)
    tau = t - stage.t_begin
    return PathParameters(
        t=t,
        theta=np.asarray(stage.theta.value(tau), dtype=float),
        dtheta=np.asarray(stage.theta.derivative(tau), dtype=float),
        ddtheta=np.asarray(stage.theta.second_derivative(tau), dtype=float),
        phi=np.asarray(stage.phi.value(tau), dtype=float),
        dphi=np.asarray(stage.phi.derivative(tau), dtype=float),
        ddphi=np.asarray(stage.phi.second_derivative(tau), dtype=float),
        lam=np.full_like(t, stage.lam),
        f1_const=np.full_like(t, stage.f1_const),
        f_offset=np.full_like(t, f_offset),
    )


def path_parameters(schedule: PathSchedule, t, stage: int | None = None) -> PathParameters:
    """Evaluate theta, phi, their derivatives, lambda and f at ``t``.

    ``stage`` forces evaluation with one stage's ramps (used at stage endpoints).
    """
    t = np.asarray(t, dtype=float)
    offsets = _stage_offsets(schedule)
    if stage is not None:
        return _evaluate_stage(schedule.stages[stage], t, offsets[stage])
    idx = schedule.stage_index(t)
    if np.ndim(t) == 0:
        i = int(idx)
        return _evaluate_stage(schedule.stages[i], t, offsets[i])
    out = {name: np.empty_like(t) for name in (
        "theta", "dtheta", "ddtheta", "phi", "dphi", "ddphi", "lam", "f1_const", "f_offset")}
    for i, s in enumerate(schedule.stages):
        mask = idx == i
        if not np.any(mask):
            continue
        p = _evaluate_stage(s, t[mask], offsets[i])
        for name in out:
            out[name][mask] = getattr(p, name)
    return PathParameters(t=t, **out)


# -- phase functions ---------------------------------------------------------

def _alpha_from(p: PathParameters):
    s2 = np.sin(2 * p.phi)
    alpha = np.arctan2(1.0, -p.lam * s2)
    # keep sin(alpha) aligned with phi_dot so Omega = -|phi_dot| sqrt(1 + lam^2 sin^2 2phi)
    return np.where(p.dphi < 0, alpha + np.pi, alpha)


def _dalpha_quotient(p: PathParameters):
    s2 = np.sin(2 * p.phi)
    c2 = np.cos(2 * p.phi)
    den = p.df**2 * s2**2 + p.dphi**2
    if np.any(den == 0):
        raise SingularScheduleError("phi_dot and f_dot*sin(2phi) vanish together")
    num = p.ddphi * p.df * s2 - p.ddf * p.dphi * s2 - 2 * p.df * p.dphi**2 * c2
    return -num / den


def dalpha_closed_form(schedule: PathSchedule, t):
    """Time derivative of arccot(-lambda sin 2phi), differentiated analytically."""
    p = path_parameters(schedule, t)
    s2 = np.sin(2 * p.phi)
    return 2 * p.lam * p.dphi * np.cos(2 * p.phi) / (1 + p.lam**2 * s2**2)


def phase_functions(schedule: PathSchedule, t):
    """Return ``(alpha0, alpha, dalpha0, dalpha)`` at ``t``.

    alpha0 is pi/2 (the value forced by f1_dot = 0); alpha solves
    cot(alpha) = -lambda sin(2 phi) on the branch where sin(alpha) has the sign of
    phi_dot. dalpha is the quotient formula in terms of phi and f derivatives.
    """
    p = path_parameters(schedule, t)
    return _phase_functions(p)


def _phase_functions(p: PathParameters):
    alpha = _alpha_from(p)
    dalpha = _dalpha_quotient(p)
    alpha0 = np.full_like(alpha, ALPHA0)
    return alpha0, alpha, np.zeros_like(alpha), dalpha


# -- basis states ------------------------------------------------------------

@dataclass(frozen=True)
class AncillaryBasis:
    mu1: np.ndarray
    mu2: np.ndarray
    mu3: np.ndarray
    alpha0: float
    alpha: float
    at_time: float

    @property
    def matrix(self) -> np.ndarray:
        """Columns are mu1, mu2, mu3."""
        return np.stack([self.mu1, self.mu2, self.mu3], axis=-1)


def _basis_from(p: PathParameters, alpha0, alpha) -> np.ndarray:
    th, ph = p.theta, p.phi
    e0p = np.exp(0.5j * alpha0)
    e0m = np.exp(-0.5j * alpha0)
    eap = np.exp(0.5j * alpha)
    eam = np.exp(-0.5j * alpha)
    zero = np.zeros_like(th)
    mu1 = np.stack([np.cos(th) * e0p, -np.sin(th) * e0m, zero], axis=-1)
    b = np.stack([np.sin(th) * e0p, np.cos(th) * e0m, zero], axis=-1)
    e = np.stack([zero, zero, np.ones_like(th)], axis=-1).astype(complex)
    cp = np.cos(ph)[..., None]
    sp = np.sin(ph)[..., None]
    mu2 = cp * eap[..., None] * b - sp * eam[..., None] * e
    mu3 = sp * eap[..., None] * b + cp * eam[..., None] * e
    return np.stack([mu1, mu2, mu3], axis=-1)


def basis_matrix(schedule: PathSchedule, t, stage: int | None = None) -> np.ndarray:
    """Ancillary states as matrix columns, shape ``(..., 3, 3)``."""
    p = path_parameters(schedule, t, stage)
    alpha0, alpha, _, _ = _phase_functions(p)
    return _basis_from(p, alpha0, alpha)


def ancillary_states(schedule: PathSchedule, t: float) -> AncillaryBasis:
    p = path_parameters(schedule, t)
    alpha0, alpha, _, _ = _phase_functions(p)
    m = _basis_from(p, alpha0, alpha)
    return AncillaryBasis(m[:, 0], m[:, 1], m[:, 2], float(alpha0), float(alpha), float(t))


# -- global phases -----------------------------------------------------------

@dataclass(frozen=True)
class GlobalPhases:
    f1: float
    f2: float
    f3: float


def phase_vector(schedule: PathSchedule, t, stage: int | None = None) -> np.ndarray:
    """(f1, f2, f3) at ``t``, shape ``(..., 3)``; f1 is the constant f1_const."""
    p = path_parameters(schedule, t, stage)
    f = p.f
    return np.stack([p.f1_const, f, -f], axis=-1)


def phase_rates(schedule: PathSchedule, t) -> np.ndarray:
    p = path_parameters(schedule, t)
    df = p.df
    return np.stack([np.zeros_like(df), df, -df], axis=-1)


def global_phases(schedule: PathSchedule, t: float) -> GlobalPhases:
    f1, f2, f3 = phase_vector(schedule, t)
    return GlobalPhases(float(f1), float(f2), float(f3))


# -- propagators and checks --------------------------------------------------

def exact_propagator(schedule: PathSchedule, t: float) -> np.ndarray:
    """Error-free propagator U(t, t_start) = prod over stages of sum_k e^{i df_k}|mu_k(t)><mu_k(t_b)|.

    Phases are counted from the start of each stage, so U(t_start) = I.
    """
    t = float(t)
    last = int(schedule.stage_index(t))
    u = np.eye(3, dtype=complex)
    for i in range(last + 1):
        s = schedule.stages[i]
        t_stop = t if i == last else s.t_end
        b0 = basis_matrix(schedule, s.t_begin, stage=i)
        b1 = basis_matrix(schedule, t_stop, stage=i)
        df = phase_vector(schedule, t_stop, stage=i) - phase_vector(schedule, s.t_begin, stage=i)
        u = (b1 * np.exp(1j * df)) @ b0.conj().T @ u
    return u


def projectors(schedule: PathSchedule, t, stage: int | None = None) -> np.ndarray:
    """Projectors |mu_k><mu_k|, shape ``(..., 3, 3, 3)`` with k on the leading extra axis."""
    m = basis_matrix(schedule, t, stage)
    cols = np.moveaxis(m, -1, -2)  # (..., k, component)
    return cols[..., :, :, None] * cols[..., :, None, :].conj()


def _interior_stage(schedule: PathSchedule, t: float, h: float) -> int:
    i = int(schedule.stage_index(t))
    s = schedule.stages[i]
    if t - h <= s.t_begin or t + h >= s.t_end:
        raise ScheduleDomainError(f"t={t} is within {h} of a stage boundary")
    return i


def von_neumann_residual(schedule: PathSchedule, hamiltonian, t: float, h: float = 1e-6) -> float:
    """max_k max|dPi_k/dt + i[H, Pi_k]| with a central difference of step ``h``."""
    i = _interior_stage(schedule, t, h)
    dpi = (projectors(schedule, t + h, i) - projectors(schedule, t - h, i)) / (2 * h)
    pi = projectors(schedule, t, i)
    H = np.asarray(hamiltonian(t))
    comm = H @ pi - pi @ H
    return float(np.max(np.abs(dpi + 1j * comm)))


def geometric_matrix(schedule: PathSchedule, t: float, h: float = 1e-6) -> np.ndarray:
    """G_kn = i <mu_k | d mu_n/dt> by central differences."""
    i = _interior_stage(schedule, t, h)
    m = basis_matrix(schedule, t, i)
    dm = (basis_matrix(schedule, t + h, i) - basis_matrix(schedule, t - h, i)) / (2 * h)
    return 1j * m.conj().T @ dm


# -- schedule constructors ---------------------------------------------------

def transfer_stage(t_begin: float, lam: float, period: float = 1.0, f1_const: float = np.pi / 2) -> Stage:
    """|0> -> |e> -> |1> along mu2: phi = pi tau/T, theta = pi/2 + phi/2."""
    return Stage(
        t_begin=t_begin,
        t_end=t_begin + period,
        theta=Ramp(np.pi / 2, np.pi / (2 * period)),
        phi=Ramp(0.0, np.pi / period),
        lam=lam,
        f1_const=f1_const,
        transfer_path=2,
    )


def return_stage(t_begin: float, lam: float, period: float = 1.0, f1_const: float = np.pi / 2,
                 sweep: str = "reverse") -> Stage:
    """|1> -> |0> along mu1 over period/2 with theta = phi - pi/2.

    ``sweep="reverse"`` runs phi from pi down to pi/2 (theta: pi/2 -> 0);
    ``sweep="forward"`` runs phi from pi up to 3pi/2 (theta: pi/2 -> pi).
    Both end on |0>; they differ in how errors act.
    """
    if sweep == "reverse":
        rate = -np.pi / period
    elif sweep == "forward":
        rate = np.pi / period
    else:
        raise ValueError("sweep must be 'reverse' or 'forward'")
    return Stage(
        t_begin=t_begin,
        t_end=t_begin + period / 2,
        theta=Ramp(np.pi / 2, rate),
        phi=Ramp(np.pi, rate),
        lam=lam,
        f1_const=f1_const,
        transfer_path=1,
    )


def transfer_schedule(lam: float, period: float = 1.0, f1_const: float = np.pi / 2) -> PathSchedule:
    return PathSchedule((transfer_stage(0.0, lam, period, f1_const),))


def cyclic_schedule(lam: float, loops: int, period: float = 1.0, f1_const: float = np.pi / 2,
                    sweep: str = "reverse") -> PathSchedule:
    """``loops`` repetitions of (transfer stage, return stage), each loop lasting 3T/2."""
    if loops < 1:
        raise ValueError("loops must be >= 1")
    stages: list = []
    for k in range(loops):
        t0 = 1.5 * period * k
        stages.append(transfer_stage(t0, lam, period, f1_const))
        stages.append(return_stage(t0 + period, lam, period, f1_const, sweep))
    return PathSchedule(tuple(stages))


def stages_of(schedule: PathSchedule) -> Sequence[Stage]:
    return schedule.stages
