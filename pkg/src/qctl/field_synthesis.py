"""Lab-frame control fields that realise a path schedule, and the Hamiltonians they build.

Two routes produce the same :class:`FieldSet`: a compact form specialised to
f = lambda*phi with a frozen path-1 phase, and the general inversion in terms of
(theta, phi, f1, f) and their derivatives. The tests hold them against each other.
"""
from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .ancillary_frame import PathSchedule, _phase_functions, path_parameters
from .errors import ContractViolation, NumericalDomainError, SingularScheduleError

CSV_COLUMNS = (
    "time", "delta_e", "delta_1", "delta_0",
    "omega_0", "omega_1", "omega_2",
    "varphi_0", "varphi_1", "varphi_2",
)

_AMPLITUDE_FLOOR = 1e-12


@dataclass(frozen=True)
class FieldSet:
    """Detunings, nonnegative Rabi amplitudes and phases in (-pi, pi].

    Every attribute is either a float or an array sharing the shape of ``at_time``.
    """

    delta_e: np.ndarray
    delta_1: np.ndarray
    delta_0: np.ndarray
    omega_0: np.ndarray
    omega_1: np.ndarray
    omega_2: np.ndarray
    varphi_0: np.ndarray
    varphi_1: np.ndarray
    varphi_2: np.ndarray
    at_time: np.ndarray

    @classmethod
    def from_complex(cls, t, delta_e, delta_1, delta_0, w0, w1, w2) -> "FieldSet":
        amps, phases = [], []
        for w in (w0, w1, w2):
            a, p = _normal_form(w)
            amps.append(a)
            phases.append(p)
        return cls(delta_e, delta_1, delta_0, *amps, *phases, at_time=t)

    def drives(self):
        """Complex drive terms Omega_n e^{i varphi_n}."""
        return (
            self.omega_0 * np.exp(1j * self.varphi_0),
            self.omega_1 * np.exp(1j * self.varphi_1),
            self.omega_2 * np.exp(1j * self.varphi_2),
        )

    def with_scaled_drives(self, factor: float) -> "FieldSet":
        return FieldSet(
            self.delta_e, self.delta_1, self.delta_0,
            self.omega_0 * factor, self.omega_1 * factor, self.omega_2 * factor,
            self.varphi_0, self.varphi_1, self.varphi_2, self.at_time,
        )

    def without_detunings(self) -> "FieldSet":
        z = np.zeros_like(np.asarray(self.delta_e, dtype=float))
        return FieldSet(z, z, z, self.omega_0, self.omega_1, self.omega_2,
                        self.varphi_0, self.varphi_1, self.varphi_2, self.at_time)

    def rows(self) -> np.ndarray:
        """Array of shape (N, 10) in :data:`CSV_COLUMNS` order."""
        cols = [np.atleast_1d(np.asarray(getattr(self, "at_time" if c == "time" else c), dtype=float))
                for c in CSV_COLUMNS]
        return np.stack(np.broadcast_arrays(*cols), axis=-1)

    def __getitem__(self, idx) -> "FieldSet":
        vals = {f.name: np.asarray(getattr(self, f.name))[idx] for f in dc_fields(self)}
        return FieldSet(**vals)


def _normal_form(w):
    w = np.asarray(w, dtype=complex)
    amp = np.abs(w)
    phase = np.angle(w)
    phase = np.where(phase <= -np.pi, phase + 2 * np.pi, phase)
    phase = np.where(amp < _AMPLITUDE_FLOOR, 0.0, phase)
    return amp, phase


@dataclass(frozen=True)
class ErrorModel:
    """Systematic error ``epsilon * H1``.

    ``detuning_sign`` multiplies the (Delta_1/2)|1><1| term of the noncommutative
    model; -1 is the default (see README, "Conventions").
    """

    kind: str = "none"
    epsilon: float = 0.0
    detuning_sign: float = -1.0

    def __post_init__(self):
        if self.kind not in ("none", "commutative", "noncommutative"):
            raise ValueError(f"unknown error model kind {self.kind!r}")
        if not np.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        if self.detuning_sign not in (-1.0, 1.0):
            raise ValueError("detuning_sign must be +1 or -1")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.epsilon != 0.0


# -- synthesis ---------------------------------------------------------------

def synthesize_fields_lambda(schedule: PathSchedule, t, stage: int | None = None) -> FieldSet:
    """Fields for f = lambda*phi and a constant path-1 phase.

    ``stage`` pins evaluation to one stage, which matters exactly on a boundary.
    """
    p = path_parameters(schedule, t, stage)
    alpha0, _, _, dalpha = _phase_functions(p)
    th, ph, lam = p.theta, p.phi, p.lam
    s2p = np.sin(2 * ph)
    big_d = dalpha + 2 * lam * p.dphi * np.cos(2 * ph)
    root = np.abs(p.dphi) * np.sqrt(1 + lam**2 * s2p**2)
    w0 = -root * np.sin(th) * np.exp(-0.5j * alpha0)
    w1 = -root * np.cos(th) * np.exp(0.5j * alpha0)
    w2 = -p.dtheta / np.sin(alpha0) - 0.25 * big_d * np.sin(2 * th) * np.exp(-1j * alpha0)
    return FieldSet.from_complex(
        p.t, big_d, -big_d * np.cos(th) ** 2, -big_d * np.sin(th) ** 2, w0, w1, w2)


def _arccot_branch(rate, f_rate, s2):
    """alpha with cot(alpha) = -f_rate*sin2x/rate and sign(sin alpha) = sign(rate)."""
    if np.any(rate == 0):
        raise SingularScheduleError("angle rate vanishes; mixing phase undefined")
    base = np.arctan2(1.0, -f_rate * s2 / rate)
    return np.where(rate < 0, base + np.pi, base)


def _alpha_rate(x_dot, x_ddot, g_dot, g_ddot, s2, c2):
    den = g_dot**2 * s2**2 + x_dot**2
    if np.any(den == 0):
        raise SingularScheduleError("denominator of the mixing-phase rate vanishes")
    num = x_ddot * g_dot * s2 - g_ddot * x_dot * s2 - 2 * g_dot * x_dot**2 * c2
    return -num / den


def synthesize_fields_general(schedule: PathSchedule, t, stage: int | None = None) -> FieldSet:
    """Fields from the general inversion with independent (theta, phi, f1, f)."""
    p = path_parameters(schedule, t, stage)
    th, ph = p.theta, p.phi
    df1 = np.zeros_like(th)
    ddf1 = np.zeros_like(th)
    df, ddf = p.df, p.ddf
    s2t, c2t = np.sin(2 * th), np.cos(2 * th)
    s2p, c2p = np.sin(2 * ph), np.cos(2 * ph)

    # path 1: alpha0 stays in (0, pi); the sign of Omega_a follows -theta_dot/sin(alpha0)
    theta_rate = np.where(p.dtheta == 0, 1.0, p.dtheta)
    alpha0 = np.where(df1 == 0, np.pi / 2, np.arctan2(1.0, -df1 * s2t / theta_rate))
    dalpha0 = _safe_rate(p.dtheta, p.ddtheta, df1, ddf1, s2t, c2t)
    omega_a_mag = np.sqrt(p.dtheta**2 + df1**2 * s2t**2)
    omega_a = -omega_a_mag * np.sign(p.dtheta * np.sin(alpha0))
    delta_a = dalpha0 + 2 * df1 * c2t

    # paths 2/3
    alpha = _arccot_branch(p.dphi, df, s2p)
    dalpha = _alpha_rate(p.dphi, p.ddphi, df, ddf, s2p, c2p)
    omega_mag = np.sqrt(p.dphi**2 + df**2 * s2p**2)
    omega = -omega_mag * np.sign(p.dphi * np.sin(alpha))
    big_d = dalpha + 2 * df * c2p + df1

    w0 = omega * np.sin(th) * np.exp(-0.5j * alpha0)
    w1 = omega * np.cos(th) * np.exp(0.5j * alpha0)
    w2 = omega_a - 0.5 * big_d * np.sin(th) * np.cos(th) * np.exp(-1j * alpha0)
    return FieldSet.from_complex(
        p.t, big_d,
        -big_d * np.cos(th) ** 2 + delta_a,
        -big_d * np.sin(th) ** 2 - delta_a,
        w0, w1, w2)


def _safe_rate(x_dot, x_ddot, g_dot, g_ddot, s2, c2):
    den = g_dot**2 * s2**2 + x_dot**2
    with np.errstate(divide="ignore", invalid="ignore"):
        num = x_ddot * g_dot * s2 - g_ddot * x_dot * s2 - 2 * g_dot * x_dot**2 * c2
        return np.where(den == 0, 0.0, -num / np.where(den == 0, 1, den))


# -- Hamiltonians ------------------------------------------------------------

def _check_finite(fs: FieldSet):
    for f in dc_fields(fs):
        if f.name == "at_time":
            continue
        if not np.all(np.isfinite(getattr(fs, f.name))):
            raise NumericalDomainError(f"non-finite field {f.name}")


def _drive_matrix(w0, w1, w2, shape) -> np.ndarray:
    h = np.zeros(shape + (3, 3), dtype=complex)
    h[..., 2, 0] = w0
    h[..., 0, 2] = np.conj(w0)
    h[..., 2, 1] = w1
    h[..., 1, 2] = np.conj(w1)
    h[..., 1, 0] = w2
    h[..., 0, 1] = np.conj(w2)
    return h


def assemble_h0(fields: FieldSet) -> np.ndarray:
    """H0 in the (|0>, |1>, |e>) basis; shape ``(..., 3, 3)`` following the field shape."""
    _check_finite(fields)
    w0, w1, w2 = fields.drives()
    shape = np.broadcast(w0, w1, w2, fields.delta_e).shape
    h = _drive_matrix(w0, w1, w2, shape)
    h[..., 0, 0] = 0.5 * fields.delta_0
    h[..., 1, 1] = 0.5 * fields.delta_1
    h[..., 2, 2] = 0.5 * fields.delta_e
    return h


def error_hamiltonian(fields: FieldSet, model: ErrorModel) -> np.ndarray:
    """H1 for ``model`` (not yet multiplied by epsilon)."""
    if model.kind == "none":
        raise ContractViolation("error_hamiltonian needs an error model other than 'none'")
    _check_finite(fields)
    w0, w1, w2 = fields.drives()
    shape = np.broadcast(w0, w1, w2, fields.delta_e).shape
    if model.kind == "commutative":
        return _drive_matrix(w0, w1, w2, shape)
    h = _drive_matrix(w0, np.zeros_like(w1), np.zeros_like(w2), shape)
    h[..., 1, 1] = model.detuning_sign * 0.5 * fields.delta_1
    return h


def hamiltonian(schedule: PathSchedule, model: ErrorModel | None = None):
    """Vectorised callable ``t -> H0(t) + epsilon*H1(t)``."""
    model = model or ErrorModel()

    def h(t):
        fs = synthesize_fields_lambda(schedule, t)
        out = assemble_h0(fs)
        if model.active:
            out = out + model.epsilon * error_hamiltonian(fs, model)
        return out

    return h


def error_operator(schedule: PathSchedule, model: ErrorModel):
    """Vectorised callable ``(t, stage=None) -> H1(t)``."""

    def h1(t, stage=None):
        return error_hamiltonian(synthesize_fields_lambda(schedule, t, stage), model)

    return h1
