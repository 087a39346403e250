import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import richardson_trapezoid, taylor_expm
from qctl.ancillary_frame import exact_propagator, transfer_schedule
from qctl.error_analysis import m_kernels_commutative_exact
from qctl.errors import ContractViolation, DimensionError, NumericalDomainError
from qctl.field_synthesis import hamiltonian
from qctl.quantum_core import (
    TimeGrid,
    align_global_phase,
    matrix_exponential,
    max_abs_diff,
    propagate,
    propagator_accumulate,
    quadrature,
    unitarity_defect,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def random_hermitian(rng, k=3, scale=1.0):
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return scale * (a + a.conj().T) / 2


@st.composite
def hermitian_matrices(draw, k=3):
    re = draw(arrays(np.float64, (k, k), elements=finite))
    im = draw(arrays(np.float64, (k, k), elements=finite))
    a = re + 1j * im
    return (a + a.conj().T) / 2


# -- time grid -----------------------------------------------------------------

def test_grid_uniform_and_inclusive():
    g = TimeGrid(0.0, 1.5, 12)
    assert len(g.samples) == 13
    assert np.allclose(np.diff(g.samples), g.dt)
    assert g.samples[-1] == pytest.approx(1.5)
    assert g.index_of(0.75) == 6


@pytest.mark.parametrize("args", [(0.0, 1.0, 0), (1.0, 1.0, 10), (2.0, 1.0, 10)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        TimeGrid(*args)


# -- matrix exponential ------------------------------------------------------

def test_expm_zero_is_identity():
    assert max_abs_diff(matrix_exponential(np.zeros((3, 3))), np.eye(3)) == 0.0


def test_expm_diagonal():
    a, b, c, dt = 0.3, -1.7, 2.2, 0.05
    u = matrix_exponential(-1j * np.diag([a, b, c]) * dt)
    assert max_abs_diff(u, np.diag(np.exp(-1j * np.array([a, b, c]) * dt))) < 1e-15


def test_expm_sigma_x_block():
    a = np.zeros((3, 3), dtype=complex)
    a[0, 2] = a[2, 0] = -1j * np.pi / 2
    u = matrix_exponential(a)
    assert max_abs_diff(u[np.ix_([0, 2], [0, 2])], [[0, -1j], [-1j, 0]]) < 1e-14
    assert max_abs_diff(u, taylor_expm(a)) < 1e-13


@settings(max_examples=60, deadline=None)
@given(hermitian_matrices())
def test_expm_matches_taylor_oracle(h):
    a = -1j * h
    u = matrix_exponential(a)
    assert max_abs_diff(u, taylor_expm(a)) < 1e-11
    assert unitarity_defect(u) < 1e-10


def test_expm_degenerate_spectrum():
    a = -1j * np.diag([1.0, 1.0, 1.0])
    assert max_abs_diff(matrix_exponential(a), np.exp(-1j) * np.eye(3)) < 1e-15


def test_expm_rejects_non_square():
    with pytest.raises(DimensionError):
        matrix_exponential(np.zeros((2, 3)))


def test_expm_rejects_non_antihermitian():
    with pytest.raises(ContractViolation):
        matrix_exponential(np.eye(3))


# -- propagation -------------------------------------------------------------

def test_zero_hamiltonian_keeps_state():
    g = TimeGrid(0, 1, 50)
    traj = propagate(lambda t: np.zeros((3, 3)), [1, 0, 0], g)
    assert max_abs_diff(traj, np.tile([1, 0, 0], (51, 1))) == 0.0
    assert max_abs_diff(propagator_accumulate(lambda t: np.zeros((3, 3)), g), np.eye(3)) == 0.0


def test_constant_hamiltonian_matches_exponential(rng):
    h = random_hermitian(rng)
    g = TimeGrid(0.0, 1.3, 97)
    psi0 = np.array([1, 1j, 0]) / np.sqrt(2)
    traj = propagate(lambda t: h, psi0, g)
    assert max_abs_diff(traj[-1], taylor_expm(-1j * h * 1.3) @ psi0) < 1e-8


def test_rejects_unnormalized_state():
    with pytest.raises(ContractViolation):
        propagate(lambda t: np.zeros((3, 3)), [1, 1, 0], TimeGrid(0, 1, 4))


def test_rejects_nonhermitian_hamiltonian():
    bad = np.zeros((3, 3), dtype=complex)
    bad[0, 1] = 1.0
    with pytest.raises(ContractViolation):
        propagate(lambda t: bad, [1, 0, 0], TimeGrid(0, 1, 4))


def test_rejects_nonfinite_hamiltonian():
    with pytest.raises(NumericalDomainError):
        propagate(lambda t: np.full((3, 3), np.nan), [1, 0, 0], TimeGrid(0, 1, 4))


def _driven(t, w=(1.3, -0.4, 2.1)):
    t = np.asarray(t, dtype=float)
    h = np.zeros(t.shape + (3, 3), dtype=complex)
    h[..., 0, 0], h[..., 1, 1], h[..., 2, 2] = w[0] * np.cos(t), w[1], w[2] * t
    c = 2.0 * np.exp(1j * 3 * t)
    h[..., 2, 0], h[..., 0, 2] = c, np.conj(c)
    h[..., 1, 0] = h[..., 0, 1] = 0.7 * np.sin(2 * t)
    return h


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=400))
def test_norm_preserved_every_step(n):
    traj = propagate(_driven, [0, 1, 0], TimeGrid(0, 2, n), vectorized=True)
    assert np.max(np.abs(np.linalg.norm(traj, axis=1) - 1)) < 1e-10


def test_second_order_convergence():
    psi0 = np.array([1, 0, 0], dtype=complex)
    ref = propagate(_driven, psi0, TimeGrid(0, 1, 1600), vectorized=True)[-1]
    e1 = np.linalg.norm(propagate(_driven, psi0, TimeGrid(0, 1, 100), vectorized=True)[-1] - ref)
    e2 = np.linalg.norm(propagate(_driven, psi0, TimeGrid(0, 1, 200), vectorized=True)[-1] - ref)
    assert e1 / e2 >= 3.5


def test_vectorized_matches_pointwise():
    g = TimeGrid(0, 1, 64)
    a = propagate(_driven, [1, 0, 0], g, vectorized=True)
    b = propagate(_driven, [1, 0, 0], g)
    assert max_abs_diff(a, b) < 1e-13


def test_accumulated_propagator_matches_trajectories():
    g = TimeGrid(0, 1, 300)
    u = propagator_accumulate(_driven, g, vectorized=True)
    for k in range(3):
        e = np.eye(3)[k]
        assert max_abs_diff(u @ e, propagate(_driven, e, g, vectorized=True)[-1]) < 1e-10
    assert unitarity_defect(u) < 1e-10


def test_error_free_transfer_is_complete():
    s = transfer_schedule(5.0)
    traj = propagate(hamiltonian(s), [1, 0, 0], TimeGrid(0, 1, 4000), vectorized=True)
    assert abs(traj[-1][1]) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_accumulated_matches_analytic_propagator():
    s = transfer_schedule(5.0)
    # second-order error on the fast path-3 phase is ~1.8e-6 at 4000 steps, ~4.6e-7 at 8000
    u_num = propagator_accumulate(hamiltonian(s), TimeGrid(0, 1, 8000), vectorized=True)
    u_ex = exact_propagator(s, 1.0)
    assert max_abs_diff(align_global_phase(u_num, u_ex), u_ex) < 1e-6


def test_align_global_phase_removes_phase(rng):
    u = taylor_expm(-1j * random_hermitian(rng))
    assert max_abs_diff(align_global_phase(np.exp(0.7j) * u, u), u) < 1e-14


# -- quadrature --------------------------------------------------------------

def test_quadrature_constant():
    assert quadrature(lambda t: np.ones_like(t), 0, 1, 2, vectorized=True) == pytest.approx(1.0)


def test_quadrature_full_periods_cancel():
    val = quadrature(lambda t: np.exp(1j * 40 * np.pi * t), 0, 1, 400, vectorized=True)
    assert abs(val) < 1e-8


def test_quadrature_kernel_matches_richardson_oracle():
    s = transfer_schedule(5.0)
    f = lambda t: m_kernels_commutative_exact(s, t)[0]
    val = quadrature(f, 0, 1, 1000, vectorized=True)
    assert abs(val - richardson_trapezoid(f, 0, 1)) < 1e-8
    # refinement stability
    assert abs(val - quadrature(f, 0, 1, 2000, vectorized=True)) < 1e-8


def test_quadrature_array_valued():
    val = quadrature(lambda t: np.stack([t, t**2], axis=-1), 0, 1, 4, vectorized=True)
    assert np.allclose(val, [0.5, 1 / 3])


def test_quadrature_rejects_nonfinite_and_few_panels():
    with pytest.raises(NumericalDomainError), np.errstate(divide="ignore"):
        quadrature(lambda t: 1 / t, 0, 1, 4, vectorized=True)
    with pytest.raises(ValueError):
        quadrature(lambda t: t, 0, 1, 1, vectorized=True)
