import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiquantal.dynamics import integrate
from semiquantal.model import MeanPoint, complete_on_section, make_params
from semiquantal.quantum import (
    SpectralDecomp,
    build_hamiltonian,
    diagonalize,
    evolve_exact,
    jacobi_eigh,
    spin_coherent,
    spin_operators,
)

from oracles import binomial_jz

RT2 = math.sqrt(2.0)


def jz_expect(psi, j):
    m = -j + np.arange(psi.size)
    return float(np.sum(np.abs(psi) ** 2 * m) / j)


# -- Hamiltonian --------------------------------------------------------------

def test_spin_half_is_diagonal():
    h = build_hamiltonian(make_params(1.0, -6.0, 0.5))
    assert np.array_equal(h, np.diag([-0.5, 0.5]))


def test_spin_one_closed_form():
    p = make_params(1.0, -6.0, 1)
    assert p.v == -3.0
    h = build_hamiltonian(p)
    assert h[2, 0] == pytest.approx(-3.0, abs=1e-15) and h[0, 2] == h[2, 0]
    w = diagonalize(h).eigenvalues
    assert w == pytest.approx([-math.sqrt(10), 0.0, math.sqrt(10)], abs=1e-12)


@pytest.mark.parametrize("j", [1.5, 2, 7.5, 12])
def test_ladder_structure(j):
    h = build_hamiltonian(make_params(1.3, -2.0, j))
    dm = np.abs(np.subtract.outer(np.arange(h.shape[0]), np.arange(h.shape[0])))
    assert np.all(h[(dm != 0) & (dm != 2)] == 0)
    assert np.max(np.abs(h - h.T)) <= 1e-14


@pytest.mark.parametrize("j", [2, 5.5, 9])
def test_hamiltonian_from_ladder_operators(j):
    p = make_params(0.7, -4.0, j)
    jz, jp = spin_operators(j)
    ref = p.epsilon * jz + 0.5 * p.v * (jp @ jp + jp.T @ jp.T)
    assert np.allclose(build_hamiltonian(p), ref, atol=1e-13)
    # commutator [J_+, J_-] = 2 J_z
    assert np.allclose(jp @ jp.T - jp.T @ jp, 2 * jz, atol=1e-12)


# -- eigensolver --------------------------------------------------------------

def test_identity_and_swap():
    assert jacobi_eigh(np.eye(4))[0] == pytest.approx(np.ones(4))
    w, v = jacobi_eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert w == pytest.approx([-1.0, 1.0], abs=1e-15)


def test_rejects_non_symmetric():
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[0.0, 1.0], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))


@pytest.mark.parametrize("j", [1, 4, 16, 50])
def test_spectral_decomposition_against_lapack(j):
    h = build_hamiltonian(make_params(1.0, -6.0, j))
    d = diagonalize(h)
    assert isinstance(d, SpectralDecomp)
    ref = np.linalg.eigvalsh(h)
    scale = np.max(np.abs(h))
    assert np.max(np.abs(d.eigenvalues - ref)) < 1e-12 * max(scale, 1)
    assert np.max(np.abs(d.reconstruct() - h)) < 1e-10 * scale
    v = d.eigenvectors
    assert np.max(np.abs(v.T @ v - np.eye(d.dim))) < 1e-12
    assert np.all(np.diff(d.eigenvalues) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2 ** 31 - 1))
def test_jacobi_random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    a = a + a.T
    w, v = jacobi_eigh(a)
    assert w == pytest.approx(np.linalg.eigvalsh(a), abs=1e-11)
    assert np.allclose(a @ v, v * w, atol=1e-10)


def test_deterministic_sign_convention():
    h = build_hamiltonian(make_params(1.0, -6.0, 6))
    v1 = diagonalize(h).eigenvectors
    v2 = diagonalize(h.copy()).eigenvectors
    assert np.array_equal(v1, v2)
    pivot = np.argmax(np.abs(v1), axis=0)
    assert np.all(v1[pivot, np.arange(v1.shape[1])] > 0)


@pytest.mark.parametrize("j", [3, 8.5, 20])
def test_spectrum_symmetric_under_coupling_flip(j):
    # epsilon must be positive, so the J_z part is removed by hand
    jz, _ = spin_operators(j)
    spectra = []
    for chi in (-3.0, 3.0):
        h = build_hamiltonian(make_params(1.0, chi, j)) - jz
        spectra.append(diagonalize(h).eigenvalues)
    assert spectra[0] == pytest.approx(spectra[1], abs=1e-10)


# -- coherent states ----------------------------------------------------------

def test_coherent_poles():
    psi = spin_coherent(MeanPoint(RT2, 0, 0, 0), 5)
    assert abs(psi[0]) == pytest.approx(1.0) and np.all(psi[1:] == 0)
    assert jz_expect(psi, 5) == pytest.approx(-1.0)
    psi = spin_coherent(MeanPoint(0, 0, 0, RT2), 5)
    assert abs(psi[-1]) == pytest.approx(1.0)
    assert jz_expect(spin_coherent(MeanPoint(1, 0, 1, 0), 4), 4) == pytest.approx(0, abs=1e-15)


def test_coherent_rejects_zero():
    with pytest.raises(ValueError):
        spin_coherent(MeanPoint(0, 0, 0, 0), 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.sampled_from([0.5, 1, 2.5, 4, 16, 40]))
def test_coherent_matches_binomial_oracle(qa, pa, qb, pb, j):
    if math.hypot(qa, pa) < 1e-3:
        return
    psi = spin_coherent(MeanPoint(qa, pa, qb, pb), j)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
    z = complex(qb, pb) / complex(qa, pa)
    assert jz_expect(psi, j) == pytest.approx(binomial_jz(z, j), abs=1e-12)
    assert jz_expect(psi, j) == pytest.approx((abs(z) ** 2 - 1) / (1 + abs(z) ** 2), abs=1e-12)


def test_coherent_scale_invariant():
    a = spin_coherent(MeanPoint(0.3, -0.2, 0.9, 0.4), 6)
    b = spin_coherent(MeanPoint(3.0, -2.0, 9.0, 4.0), 6)
    assert np.allclose(a, b, atol=1e-14)


# -- evolution ----------------------------------------------------------------

def test_free_evolution_keeps_jz():
    p = make_params(1.0, 0.0, 6)
    psi = spin_coherent(MeanPoint(0.5, -0.3, 1.1, 0.2), 6)
    s = evolve_exact(psi, diagonalize(build_hamiltonian(p)), np.linspace(0, 30, 301), 6)
    assert np.ptp(s.jz_over_j) < 1e-12


def test_initial_values_match_mean_field():
    p = make_params(1.0, -6.0, 7)
    st_ = complete_on_section(0.5, -0.3, p)
    psi = spin_coherent(st_.mean, 7)
    s = evolve_exact(psi, diagonalize(build_hamiltonian(p)), [0.0, 0.1], 7)
    m = st_.mean
    assert s.jz_over_j[0] == pytest.approx(m.n_b - m.n_a, abs=1e-12)
    assert s.jx_over_j[0] == pytest.approx(m.q_a * m.q_b + m.p_a * m.p_b, abs=1e-12)
    assert s.jy_over_j[0] == pytest.approx(m.q_b * m.p_a - m.q_a * m.p_b, abs=1e-12)


def test_parity_sector_and_norm():
    j = 9
    p = make_params(1.0, -6.0, j)
    d = diagonalize(build_hamiltonian(p))
    psi0 = np.zeros(2 * j + 1, dtype=complex)
    psi0[0] = 1.0
    times = np.linspace(0, 50, 101)
    coef = d.eigenvectors.T @ psi0
    psi = (np.exp(-1j * np.outer(times, d.eigenvalues)) * coef) @ d.eigenvectors.T
    assert np.max(np.sum(np.abs(psi[:, 1::2]) ** 2, axis=1)) < 1e-20
    s = evolve_exact(psi0, d, times, j)
    assert np.max(np.abs(s.norm - 1)) < 1e-10
    assert np.all(np.abs(s.jz_over_j) <= 1 + 1e-12) and np.all(np.abs(s.jx_over_j) <= 1 + 1e-12)


def test_evolve_validates_input():
    d = diagonalize(build_hamiltonian(make_params(1.0, -6.0, 2)))
    with pytest.raises(ValueError):
        evolve_exact(np.ones(3), d, [0.0], 2)
    with pytest.raises(ValueError):
        evolve_exact(np.eye(5)[0], d, [0.0, 1.0, 0.5], 2)


def test_chunked_evolution_is_consistent():
    j = 6
    d = diagonalize(build_hamiltonian(make_params(1.0, -6.0, j)))
    psi = spin_coherent(MeanPoint(0.5, -0.3, 0.0, 1.3), j)
    t = np.linspace(0, 10, 257)
    a = evolve_exact(psi, d, t, j)
    b = evolve_exact(psi, d, t, j, chunk=10)
    assert np.allclose(a.jz_over_j, b.jz_over_j, atol=1e-14)


def test_correspondence_improves_with_j():
    errs = []
    for j in (4, 8, 16, 32):
        p = make_params(1.0, -0.5, j)
        s = complete_on_section(0.8, 0.0, p)
        cl = integrate(s, p, "classical", 5.0)
        ex = evolve_exact(spin_coherent(s.mean, j), diagonalize(build_hamiltonian(p)), cl.times, j)
        errs.append(np.max(np.abs(ex.jz_over_j - cl.jz_over_j)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
