"""Error diagnostics in the doubly rotated picture.

D~(t) carries the error Hamiltonian into the ancillary frame and strips the global
phases; its running integral M(t) decides the leading infidelity. Integration is
piecewise over schedule stages so that no quadrature node straddles a kink.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .ancillary_frame import (
    PathSchedule,
    _phase_functions,
    basis_matrix,
    path_parameters,
    phase_rates,
    phase_vector,
)
from .errors import ContractViolation, NumericalDomainError, ScheduleDomainError
from .field_synthesis import ErrorModel, error_hamiltonian, hamiltonian, synthesize_fields_lambda
from .quantum_core import TimeGrid, propagate

MAGNUS_EPS_LIMIT = 0.5


@dataclass(frozen=True)
class ErrorRotation:
    m: np.ndarray
    at_time: float
    model: ErrorModel

    def magnitude(self, k: int, n: int) -> float:
        """|M_kn| with 1-based path labels."""
        return float(abs(self.m[k - 1, n - 1]))


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    order: int
    path_index: int


def _require_model(model: ErrorModel):
    if model.kind == "none":
        raise ContractViolation("error diagnostics need an error model other than 'none'")


def _projected_error(schedule: PathSchedule, model: ErrorModel, t, stage=None) -> np.ndarray:
    """<mu_k|H1|mu_n> without phase factors, shape (..., 3, 3)."""
    b = basis_matrix(schedule, t, stage)
    h1 = error_hamiltonian(synthesize_fields_lambda(schedule, t, stage), model)
    return np.swapaxes(b.conj(), -1, -2) @ h1 @ b


def dtilde_err(schedule: PathSchedule, model: ErrorModel, t, stage: int | None = None) -> np.ndarray:
    """D~_kn(t) = <mu_k|H1|mu_n> e^{-i(f_k - f_n)}; vectorised over ``t``."""
    _require_model(model)
    x = _projected_error(schedule, model, t, stage)
    f = phase_vector(schedule, t, stage)
    return x * np.exp(-1j * (f[..., :, None] - f[..., None, :]))


def panels_per_period(lam: float) -> int:
    return int(max(400, np.ceil(200 * abs(lam))))


def _segments(schedule: PathSchedule, t: float):
    """(stage index, a, b, panels) covering [t_start, t]."""
    if t < schedule.t_start - 1e-12 or t > schedule.t_end + 1e-12:
        raise ScheduleDomainError(f"time {t} outside the schedule")
    segs = []
    for i, s in enumerate(schedule.stages):
        if s.t_begin >= t:
            break
        b = min(t, s.t_end)
        n = max(2, int(np.ceil(panels_per_period(s.lam) * (b - s.t_begin))))
        segs.append((i, s.t_begin, b, n))
    return segs


def _segment_nodes(schedule, model, seg):
    i, a, b, n = seg
    ts = np.linspace(a, b, 2 * n + 1)
    d = dtilde_err(schedule, model, ts, stage=i)
    if not np.all(np.isfinite(d)):
        raise NumericalDomainError("D~ is not finite on the integration interval")
    return ts, d


def error_rotation(schedule: PathSchedule, model: ErrorModel, t: float) -> ErrorRotation:
    """M(t) = integral of D~ from the schedule start to ``t`` (composite Simpson)."""
    _require_model(model)
    m = np.zeros((3, 3), dtype=complex)
    for seg in _segments(schedule, t):
        ts, d = _segment_nodes(schedule, model, seg)
        m = m + scipy.integrate.simpson(d, x=ts, axis=0)
    return ErrorRotation(m, float(t), model)


def magnus_propagator(schedule: PathSchedule, model: ErrorModel, t: float) -> np.ndarray:
    """U_I(t) to second order: I - i eps M - eps^2/2 (M^2 + C), C = int [D~(s), M(s)] ds."""
    _require_model(model)
    _check_eps(model)
    eps = model.epsilon
    m = np.zeros((3, 3), dtype=complex)
    c = np.zeros((3, 3), dtype=complex)
    for seg in _segments(schedule, t):
        ts, d = _segment_nodes(schedule, model, seg)
        m_run = m + _cumulative(d, ts)
        comm = d @ m_run - m_run @ d
        c = c + scipy.integrate.simpson(comm, x=ts, axis=0)
        m = m_run[-1]
    return np.eye(3) - 1j * eps * m - 0.5 * eps**2 * (m @ m + c)


def _cumulative(y, ts):
    # cumulative_simpson casts complex input to real
    run = lambda part: scipy.integrate.cumulative_simpson(part, x=ts, axis=0, initial=0)
    return run(y.real) + 1j * run(y.imag)


def _check_eps(model: ErrorModel):
    if abs(model.epsilon) > MAGNUS_EPS_LIMIT:
        raise ContractViolation(f"|epsilon| must be <= {MAGNUS_EPS_LIMIT} for the expansion")


def magnus_fidelity(schedule: PathSchedule, model: ErrorModel, k: int, t: float) -> FidelityEstimate:
    """F = 1 - eps^2 sum_{n != k} |M_kn(t)|^2 for path ``k`` (1-based)."""
    _check_eps(model)
    if k not in (1, 2, 3):
        raise ValueError("path index must be 1, 2 or 3")
    if model.kind == "none" or model.epsilon == 0.0:
        return FidelityEstimate(1.0, 2, k)
    m = error_rotation(schedule, model, t).m
    leak = sum(abs(m[k - 1, n]) ** 2 for n in range(3) if n != k - 1)
    return FidelityEstimate(float(1.0 - model.epsilon**2 * leak), 2, k)


def numerical_path_fidelity(schedule: PathSchedule, model: ErrorModel, k: int, t: float,
                            n_steps_per_period: int = 4000) -> float:
    """|<mu_k(t)|psi(t)>|^2 with psi(t_start) = mu_k(t_start), by direct propagation."""
    n = max(1, int(round(n_steps_per_period * (t - schedule.t_start))))
    grid = TimeGrid(schedule.t_start, t, n)
    psi0 = basis_matrix(schedule, schedule.t_start, stage=0)[:, k - 1]
    traj = propagate(hamiltonian(schedule, model), psi0, grid, vectorized=True)
    target = basis_matrix(schedule, t)[:, k - 1]
    return float(abs(np.vdot(target, traj[-1])) ** 2)


# -- closed-form kernels (commutative model) ----------------------------------

def _kernel_inputs(schedule, t):
    p = path_parameters(schedule, t)
    _, alpha, _, dalpha = _phase_functions(p)
    return p, alpha, dalpha


def m_kernels_commutative(schedule: PathSchedule, t):
    """Kernels of |M_12|, |M_13|, |M_23| in compact form.

    These omit the geometric i*theta_dot piece and differ in prefactors from the
    integrand of M itself; see :func:`m_kernels_commutative_exact`.
    """
    p, alpha, dalpha = _kernel_inputs(schedule, t)
    df, f = p.df, p.f
    a = 0.25 * (dalpha + 2 * df * np.cos(2 * p.phi)) * np.sin(4 * p.theta)
    k12 = a * np.cos(p.phi) * np.exp(1j * (alpha / 2 + f))
    k13 = a * np.sin(p.phi) * np.exp(1j * (alpha / 2 + f))
    k23 = ((df + 0.25 * (dalpha - 2 * df * np.cos(2 * p.phi)) * np.sin(2 * p.theta) ** 2 + 1j * p.dphi)
           * np.sin(2 * p.phi) * np.exp(-2j * f))
    return k12, k13, k23


def m_kernels_commutative_exact(schedule: PathSchedule, t):
    """D~_12, D~_13, D~_23 of the commutative model written in closed form."""
    p, alpha, dalpha = _kernel_inputs(schedule, t)
    df, f, f1 = p.df, p.f, p.f1_const
    big_d = dalpha + 2 * df * np.cos(2 * p.phi)
    common = 1j * p.dtheta - big_d / 8 * np.sin(4 * p.theta)
    k12 = np.cos(p.phi) * np.exp(1j * (alpha / 2 + f - f1)) * common
    k13 = np.sin(p.phi) * np.exp(1j * (alpha / 2 - f - f1)) * common
    k23 = (np.sin(2 * p.phi) * (df * np.cos(2 * p.phi) - big_d / 8 * np.sin(2 * p.theta) ** 2)
           + 1j * p.dphi) * np.exp(-2j * f)
    return k12, k13, k23


def integrate_kernels(kernel_fn, schedule: PathSchedule, t: float, panels: int | None = None):
    """Simpson integral of each kernel over [t_start, t] within the first stage."""
    if len(_segments(schedule, t)) != 1:
        raise ScheduleDomainError("kernel integrals are defined within a single stage")
    n = panels or max(2, int(np.ceil(panels_per_period(schedule.stages[0].lam) * (t - schedule.t_start))))
    ts = np.linspace(schedule.t_start, t, 2 * n + 1)
    return tuple(complex(scipy.integrate.simpson(k, x=ts)) for k in kernel_fn(schedule, ts))


# -- correction margin and bound series -------------------------------------

def correction_margin(schedule: PathSchedule, model: ErrorModel, k: int, n: int, grid,
                      h: float = 1e-6) -> float:
    """min over ``grid`` of |f_k' - f_n'| / max(|d/dt <mu_k|H1|mu_n>|, 1e-12)."""
    _require_model(model)
    if k == n:
        raise ValueError("correction margin needs k != n")
    ts = np.asarray(grid.samples if isinstance(grid, TimeGrid) else grid, dtype=float)
    idx = schedule.stage_index(ts)
    rate = np.empty_like(ts)
    for i, s in enumerate(schedule.stages):
        mask = idx == i
        if not np.any(mask):
            continue
        lo = np.maximum(ts[mask] - h, s.t_begin)
        hi = np.minimum(ts[mask] + h, s.t_end)
        x_lo = _projected_error(schedule, model, lo, i)[..., k - 1, n - 1]
        x_hi = _projected_error(schedule, model, hi, i)[..., k - 1, n - 1]
        rate[mask] = np.abs(x_hi - x_lo) / (hi - lo)
    fr = phase_rates(schedule, ts)
    gap = np.abs(fr[..., k - 1] - fr[..., n - 1])
    return float(np.min(gap / np.maximum(rate, 1e-12)))


def m12_bound_series(schedule: PathSchedule, kmax: int = 3, n_nodes: int = 20001) -> dict:
    """Integration-by-parts bound on |M_12(T)| for a single-stage schedule, truncated at ``kmax``.

    Terms are |int e^{if} d[(alpha'/2f')^k F/f']| for k = 0..kmax, evaluated by parts to
    avoid numerical differentiation, plus the remainder |int e^{if} (alpha'/2f')^(kmax+1) F1 dt|.
    """
    if len(schedule.stages) != 1:
        raise ScheduleDomainError("bound series is defined for a single transfer stage")
    ts = np.linspace(schedule.t_start, schedule.t_end, n_nodes)
    p, alpha, dalpha = _kernel_inputs(schedule, ts)
    df = p.df
    if np.any(df == 0):
        raise ContractViolation("bound series needs a nonzero global-phase rate")
    th, ph = p.theta, p.phi
    ea = np.exp(0.5j * alpha)
    f1 = np.sin(4 * th) * np.cos(2 * ph) * np.cos(ph) * ea
    ftp = (4 * p.dtheta * np.cos(4 * th) * np.cos(2 * ph) * np.cos(ph)
           - p.dphi * np.sin(4 * th) * np.cos(2 * ph) * np.sin(ph)
           - 2 * p.dphi * np.sin(4 * th) * np.sin(2 * ph) * np.cos(ph)) * ea
    ratio = dalpha / (2 * df)
    phase = np.exp(1j * p.f)
    terms = []
    for k in range(kmax + 1):
        g = ratio**k * ftp / df
        by_parts = (phase[-1] * g[-1] - phase[0] * g[0]
                    - 1j * scipy.integrate.simpson(g * df * phase, x=ts))
        terms.append(float(abs(by_parts)))
    tail = float(abs(scipy.integrate.simpson(phase * ratio ** (kmax + 1) * f1, x=ts)))
    return {
        "terms": terms,
        "tail": tail,
        "total": float(sum(terms) + tail),
        "max_ratio": float(np.max(np.abs(ratio))),
    }


def dalpha_bound_holds(schedule: PathSchedule, t, slack: float = 1e-12) -> bool:
    """|alpha'/2| <= |f'| at every time in ``t``."""
    p, _, dalpha = _kernel_inputs(schedule, t)
    return bool(np.all(np.abs(dalpha / 2) <= np.abs(p.df) + slack))


def diagnostics(schedule: PathSchedule, model: ErrorModel, k: int = 2,
                n_steps_per_period: int = 4000, margin_points: int = 401) -> dict:
    """JSON-ready report: |M_kn(T)|, correction margins, Magnus vs numerical fidelity."""
    t_end = schedule.t_end
    rot = error_rotation(schedule, model, t_end)
    grid = np.linspace(schedule.t_start, t_end, margin_points)
    margins = {f"{a}{b}": correction_margin(schedule, model, a, b, grid)
               for a, b in ((1, 2), (1, 3), (2, 3))}
    report = {
        "lambda": float(schedule.stages[0].lam),
        "epsilon": float(model.epsilon),
        "model": model.kind,
        "path": k,
        "t_end": float(t_end),
        "m12": rot.magnitude(1, 2),
        "m13": rot.magnitude(1, 3),
        "m23": rot.magnitude(2, 3),
        "margins": margins,
        "fidelity_magnus": magnus_fidelity(schedule, model, k, t_end).value,
        "fidelity_numerical": numerical_path_fidelity(schedule, model, k, t_end, n_steps_per_period),
    }
    if len(schedule.stages) == 1 and schedule.stages[0].lam != 0:
        report["m12_bound"] = m12_bound_series(schedule)
    return report


def error_rotation_series(schedule: PathSchedule, model: ErrorModel, t: float | None = None):
    """(times, M(times)) on the quadrature nodes, concatenated over stages."""
    _require_model(model)
    t = schedule.t_end if t is None else t
    m = np.zeros((3, 3), dtype=complex)
    all_t, all_m = [], []
    for j, seg in enumerate(_segments(schedule, t)):
        ts, d = _segment_nodes(schedule, model, seg)
        run = m + _cumulative(d, ts)
        start = 0 if j == 0 else 1
        all_t.append(ts[start:])
        all_m.append(run[start:])
        m = run[-1]
    return np.concatenate(all_t), np.concatenate(all_m)
