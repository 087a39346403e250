"""Dense linear algebra, unitary time stepping and quadrature for small systems.

States are 1-D complex numpy arrays, operators are 2-D complex arrays. Time is
measured in units of the characteristic period T, so T = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import ContractViolation, DimensionError, NumericalDomainError

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_start + i*dt`` for ``i = 0..n_steps`` (endpoint included)."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def samples(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t_start + self.dt * (np.arange(self.n_steps) + 0.5)

    def index_of(self, t: float) -> int:
        """Index of the sample nearest to ``t``."""
        i = int(round((t - self.t_start) / self.dt))
        return min(max(i, 0), self.n_steps)


def _square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrix, got shape {a.shape}")
    return a


def hermiticity_defect(a: np.ndarray) -> float:
    a = _square(a)
    return float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))), initial=0.0))


def unitarity_defect(u: np.ndarray) -> float:
    u = _square(u)
    eye = np.eye(u.shape[-1])
    return float(np.max(np.abs(np.conj(np.swapaxes(u, -1, -2)) @ u - eye), initial=0.0))


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    d = hermiticity_defect(h)
    if not d < tol:
        raise ContractViolation(f"operator is not hermitian (defect {d:.3e})")
    return h


def max_abs_diff(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def align_global_phase(u: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Multiply ``u`` by the phase that makes its largest entry agree with ``reference``."""
    idx = np.unravel_index(np.argmax(np.abs(reference)), reference.shape)
    z = u[idx] * np.conj(reference[idx])
    if abs(z) == 0:
        return u
    return u * np.conj(z) / abs(z)


def _expm_hermitian_batch(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for a stack of hermitian matrices via eigh."""
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * w * dt)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def matrix_exponential(a: np.ndarray) -> np.ndarray:
    """Exponential of an anti-hermitian matrix.

    The generator ``h = i a`` is diagonalized with ``eigh``. If the eigenvector
    matrix is not unitary to working precision the result falls back to
    scaling-and-squaring (``scipy.linalg.expm``).
    """
    a = _square(np.asarray(a, dtype=complex))
    if a.ndim != 2:
        raise DimensionError("matrix_exponential expects a single matrix")
    anti = np.max(np.abs(a + a.conj().T), initial=0.0)
    if not anti < HERMITIAN_TOL:
        raise ContractViolation(f"generator is not anti-hermitian (defect {anti:.3e})")
    h = 1j * a
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    if unitarity_defect(v) > 1e-12:
        return scipy.linalg.expm(a)
    return (v * np.exp(-1j * w)) @ v.conj().T


def _sample(hamiltonian: Callable, times: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        hs = np.asarray(hamiltonian(times), dtype=complex)
    else:
        hs = np.stack([np.asarray(hamiltonian(t), dtype=complex) for t in times])
    _square(hs)
    if hs.shape[0] != len(times):
        raise DimensionError("hamiltonian returned the wrong number of samples")
    if not np.all(np.isfinite(hs)):
        raise NumericalDomainError("hamiltonian produced non-finite entries")
    d = hermiticity_defect(hs)
    if not d < HERMITIAN_TOL:
        raise ContractViolation(f"hamiltonian is not hermitian at a sampled time (defect {d:.3e})")
    return hs


def step_unitaries(hamiltonian: Callable, grid: TimeGrid, vectorized: bool = False) -> np.ndarray:
    """Midpoint exponentials exp(-i H(t_mid) dt), one per grid step."""
    hs = _sample(hamiltonian, grid.midpoints, vectorized)
    hs = 0.5 * (hs + np.conj(np.swapaxes(hs, -1, -2)))
    return _expm_hermitian_batch(hs, grid.dt)


def propagate(hamiltonian: Callable, psi0, grid: TimeGrid, vectorized: bool = False) -> np.ndarray:
    """Integrate i dpsi/dt = H(t) psi with the exponential midpoint rule.

    Returns an array of shape ``(n_steps + 1, K)``; row ``i`` is the state at
    ``grid.samples[i]``. If ``vectorized`` is true, ``hamiltonian`` is called
    once with the array of midpoints and must return a ``(n, K, K)`` stack.
    """
    psi = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise ContractViolation(f"initial state is not normalized (norm {norm:.12f})")
    steps = step_unitaries(hamiltonian, grid, vectorized)
    if steps.shape[-1] != psi.shape[0]:
        raise DimensionError("state and hamiltonian dimensions differ")
    traj = np.empty((grid.n_steps + 1, psi.shape[0]), dtype=complex)
    traj[0] = psi
    for i, u in enumerate(steps):
        psi = u @ psi
        traj[i + 1] = psi
    return traj


def propagator_accumulate(hamiltonian: Callable, grid: TimeGrid, vectorized: bool = False) -> np.ndarray:
    """Time-ordered product of the midpoint step unitaries over the whole grid."""
    steps = step_unitaries(hamiltonian, grid, vectorized)
    u = np.eye(steps.shape[-1], dtype=complex)
    for s in steps:
        u = s @ u
    return u


def quadrature(f: Callable, t0: float, t1: float, n: int, vectorized: bool = False):
    """Composite Simpson rule with ``n`` panels (``2n`` subintervals) on [t0, t1].

    ``f`` may return scalars or arrays; the integral has the shape of one sample.
    """
    if n < 2:
        raise ValueError("quadrature needs at least 2 panels")
    ts = np.linspace(t0, t1, 2 * n + 1)
    if vectorized:
        ys = np.asarray(f(ts), dtype=complex)
    else:
        ys = np.asarray([f(t) for t in ts], dtype=complex)
    if not np.all(np.isfinite(ys)):
        raise NumericalDomainError("integrand is not finite on the interval")
    return scipy.integrate.simpson(ys, x=ts, axis=0)
