import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiquantal.dynamics import (
    IntegrationError,
    IntegratorConfig,
    conservation_report,
    hamiltonian_value,
    integrate,
    section_crossings,
    vector_field,
)
from semiquantal.model import (
    MeanPoint,
    SemiState,
    WidthPoint,
    complete_on_section,
    fixed_points,
    h_classical,
    h_correction1,
    h_correction2,
    h_semiclassical,
    make_params,
    uncertainty_product,
)

from oracles import fd_gradient, printed_eom, rotation_solution, symplectic_flow

RT2 = math.sqrt(2.0)


def random_state(rng, semi=True):
    m = rng.uniform(-1.2, 1.2, 4)
    if not semi:
        return np.concatenate([m, [math.sqrt(0.5), 0, math.sqrt(0.5), 0]])
    w = [rng.uniform(0.3, 1.5), rng.uniform(-1, 1), rng.uniform(0.3, 1.5), rng.uniform(-1, 1)]
    return np.concatenate([m, w])


# -- vector field -------------------------------------------------------------

def test_free_classical_field():
    p = make_params(1.0, 0.0, 3)
    y = np.array([0.3, -0.7, 1.1, 0.2, math.sqrt(0.5), 0, math.sqrt(0.5), 0])
    f = vector_field(y, p, "classical")
    assert f[:4] == pytest.approx([0.7 / 2, 0.3 / 2, 0.2 / 2, -1.1 / 2], abs=1e-15)
    assert np.all(f[4:] == 0)


def test_mean_block_matches_classical_at_minimal_widths():
    rng = np.random.default_rng(11)
    p = make_params(1.0, -6.0, 4)
    for _ in range(20):
        y = random_state(rng, semi=False)
        fc = vector_field(y, p, "classical")
        fs = vector_field(y, p, "semiclassical")
        # the width factors multiplying the mean coordinates in H1 vanish here
        assert fs[:4] == pytest.approx(fc[:4], abs=1e-12)


@pytest.mark.parametrize("level", ["classical", "semiclassical"])
@pytest.mark.parametrize("source", ["printed", "derived"])
def test_field_is_symplectic_gradient(level, source):
    rng = np.random.default_rng(5)
    for chi, j in [(-0.5, 2), (-6.0, 9), (2.0, 1.5)]:
        p = make_params(1.0, chi, j)
        for _ in range(30):
            y = random_state(rng, semi=(level == "semiclassical"))
            if level == "classical":
                ham = lambda z: h_classical(MeanPoint(*z[:4]), p)
            else:
                ham = lambda z: h_semiclassical(SemiState.from_array(z), p, source)
            ref = symplectic_flow(fd_gradient(ham, y))
            if level == "classical":
                ref[4:] = 0.0
            got = vector_field(y, p, level, source)
            assert np.allclose(got, ref, rtol=1e-6, atol=1e-8)


def test_printed_source_matches_reference_equations():
    rng = np.random.default_rng(21)
    for chi, j, nu_a, nu_b in [(-6.0, 9, 0, 0), (-0.5, 4, 0.3, 0.0), (3.0, 2.5, 0.0, 1.2)]:
        p = make_params(1.0, chi, j, nu_a, nu_b)
        for _ in range(20):
            y = random_state(rng)
            ref = printed_eom(y, 1.0, chi, j, nu_a, nu_b)
            assert np.allclose(vector_field(y, p, source="printed"), ref, rtol=1e-13, atol=1e-13)
            # the derived energy reproduces the same equations at 2J
            ref2 = printed_eom(y, 1.0, chi, 2 * j, nu_a, nu_b)
            assert np.allclose(vector_field(y, p, source="derived"), ref2, rtol=1e-13, atol=1e-13)


def test_literal_correction_sign_disagrees_with_reference_equations():
    # gradient of H1 with the opposite q p Q P sign differs from the printed
    # equations in exactly the four mean-width coupling terms
    p = make_params(1.0, -6.0, 4)
    y = np.array([0.4, -0.3, 0.2, 1.1, 0.9, 0.4, 0.6, -0.2])

    def ham(z):
        s = SemiState.from_array(z)
        return (h_classical(s.mean, p) + h_correction1(s, p, coupling_sign=-1.0) / p.j
                + h_correction2(s, p) / p.j ** 2)

    diff = symplectic_flow(fd_gradient(ham, y)) - printed_eom(y, 1.0, -6.0, 4)
    qa, pa, qb, pb, Qa, Pa, Qb, Pb = y
    expected = -2 * p.chi / p.j * np.array([qa * Qb * Pb, -pa * Qb * Pb, qb * Qa * Pa,
                                            -pb * Qa * Pa, Qa * qb * pb, -Pa * qb * pb,
                                            Qb * qa * pa, -Pb * qa * pa])
    assert diff == pytest.approx(expected, abs=1e-7)


def test_field_rejects_barrier_violation():
    p = make_params(1.0, -6.0, 4)
    y = np.array([0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.7, 0.0])
    with pytest.raises(ValueError):
        vector_field(y, p)
    with pytest.raises(ValueError):
        vector_field(np.zeros(5), p)


def test_unknown_level_rejected():
    with pytest.raises(ValueError):
        vector_field(complete_on_section(0.1, 0.1, make_params(1, 0, 1)), make_params(1, 0, 1),
                     "quantum")


def test_hamiltonian_kernel_matches_python_energy():
    rng = np.random.default_rng(2)
    p = make_params(1.3, -2.5, 3.5, 0.2, 0.6)
    for _ in range(50):
        y = random_state(rng)
        s = SemiState.from_array(y)
        for source in ("printed", "derived"):
            assert hamiltonian_value(y, p, "semiclassical", source) == pytest.approx(
                h_semiclassical(s, p, source), rel=1e-13, abs=1e-14)
        assert hamiltonian_value(y, p, "classical") == pytest.approx(h_classical(s.mean, p),
                                                                     rel=1e-13, abs=1e-14)


# -- integration --------------------------------------------------------------

def test_free_rotation_one_period():
    p = make_params(1.0, 0.0, 2)
    y0 = np.array([RT2, 0.0, 0.0, 0.0, math.sqrt(0.5), 0, math.sqrt(0.5), 0])
    period = 4 * math.pi
    cfg = IntegratorConfig(sample_dt=period / 200)
    traj = integrate(y0, p, "classical", period, cfg)
    for t, y in zip(traj.times[::10], traj.states[::10]):
        assert np.max(np.abs(y[:4] - rotation_solution(y0[:4], 1.0, t))) < 1e-9
    assert traj.times[-1] == pytest.approx(period)
    assert np.max(np.abs(traj.states[-1, :4] - y0[:4])) < 1e-9


def test_trajectory_layout():
    p = make_params(1.0, -6.0, 4)
    traj = integrate(complete_on_section(0.3, -0.4, p), p, "classical", 5.0)
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(traj.states[:, 4:] == traj.states[0, 4:])
    assert len(traj.observables()) == len(traj)
    assert set(traj.columns) == {"e_fig", "n_scaled", "jz_over_j", "jx_over_j", "jy_over_j"}


def test_semiclassical_energy_drift():
    p = make_params(1.0, -6.0, 4)
    traj = integrate(complete_on_section(0.5, -0.3, p), p, "semiclassical", 100.0)
    rep = conservation_report(traj)
    assert rep.rel_energy_drift < 1e-8


def test_classical_number_conserved():
    p = make_params(1.0, -6.0, 4)
    traj = integrate(complete_on_section(0.5, -0.3, p), p, "classical", 100.0)
    assert conservation_report(traj).max_number_drift < 1e-8


def test_semiclassical_number_not_conserved():
    p = make_params(1.0, -6.0, 2)
    traj = integrate(complete_on_section(0.5, -0.3, p), p, "semiclassical", 100.0)
    assert conservation_report(traj).max_number_drift > 1e-4


def test_determinism():
    p = make_params(1.0, -6.0, 3)
    s = complete_on_section(0.2, 0.7, p)
    a = integrate(s, p, "semiclassical", 20.0)
    b = integrate(s, p, "semiclassical", 20.0)
    assert np.array_equal(a.states, b.states)


@pytest.mark.parametrize("level", ["classical", "semiclassical"])
def test_time_reversal(level):
    p = make_params(1.0, -6.0, 4)
    s = complete_on_section(0.5, -0.3, p)
    fwd = integrate(s, p, level, 10.0, IntegratorConfig(1e-10, 1e-12))
    back = integrate(fwd.states[-1], p, level, 10.0, IntegratorConfig(1e-10, 1e-12), backward=True)
    assert back.times[-1] == pytest.approx(-10.0)
    assert np.max(np.abs(back.states[-1] - s.as_array())) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), st.sampled_from([2, 4, 9]),
       st.sampled_from([-6.0, -0.5]))
def test_barrier_and_uncertainty_along_trajectories(qa, pa, j, chi):
    if 0.5 * (qa * qa + pa * pa) > 1:
        return
    p = make_params(1.0, chi, j)
    traj = integrate(complete_on_section(qa, pa, p), p, "semiclassical", 30.0)
    Q = traj.states[:, [4, 6]]
    P = traj.states[:, [5, 7]]
    assert np.all(Q > 0)
    for k in range(len(traj)):
        for i in range(2):
            assert uncertainty_product(Q[k, i], P[k, i]) >= 0.5 - 1e-15


def test_integrate_rejects_bad_input():
    p = make_params(1.0, -6.0, 4)
    with pytest.raises(ValueError):
        integrate(complete_on_section(0, 0, p), p, "classical", 0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)


def test_step_underflow_reports_last_state():
    p = make_params(1.0, -6.0, 4)
    y = np.array([0.5, -0.3, 0.0, 1.3, 0.7, 0.0, 0.7, 0.0])
    with pytest.raises(IntegrationError) as info:
        integrate(y, p, "semiclassical", 1.0, IntegratorConfig(min_step=1.0, max_step=2.0))
    assert isinstance(info.value.last_state, SemiState)


# -- sections -----------------------------------------------------------------

def test_free_section_spacing():
    p = make_params(1.0, 0.0, 2)
    run = section_crossings(SemiState(MeanPoint(0, 0, 1, 0)), p, "classical", 6)
    assert run.complete
    gaps = np.diff(run.times)
    assert gaps == pytest.approx(np.full(5, 4 * math.pi), abs=1e-8)


def test_crossings_are_refined():
    p = make_params(1.0, -6.0, 4)
    run = section_crossings(complete_on_section(0.5, -0.3, p), p, "semiclassical", 200)
    assert run.complete
    assert np.all(np.abs(run.states[:, 2]) < 1e-10)
    assert np.all(run.states[:, 3] > 0)
    assert [pt.index for pt in run.points] == list(range(200))


def test_classical_deformed_orbit_keeps_momentum_sign():
    from semiquantal.analysis import energy_section_state

    p = make_params(1.0, -6.0, 9)
    run = section_crossings(energy_section_state(p, -1.1), p, "classical", 2000)
    assert run.complete
    assert np.all(run.p_a < 0)


def test_fixed_point_returns_to_itself():
    p = make_params(1.0, -6.0, 4)
    for m in fixed_points(p)["min"] + fixed_points(p)["max"]:
        run = section_crossings(SemiState(m), p, "classical", 1)
        assert run.complete
        assert abs(run.q_a[0] - m.q_a) < 1e-6 and abs(run.p_a[0] - m.p_a) < 1e-6


def test_missing_crossings_flagged():
    p = make_params(1.0, 0.0, 2)
    # mode b empty: q_b stays 0 and never changes sign
    run = section_crossings(SemiState(MeanPoint(RT2, 0, 0, 0)), p, "classical", 3, t_budget=20.0)
    assert not run.complete
    assert run.status == "time budget exhausted"
    with pytest.raises(ValueError):
        section_crossings(SemiState(MeanPoint(RT2, 0, 0, 0)), p, "classical", 0)


def test_conservation_report_requires_samples():
    p = make_params(1.0, -6.0, 4)
    traj = integrate(complete_on_section(0.5, -0.3, p), p, "classical", 1.0)
    traj.times = traj.times[:0]
    traj.states = traj.states[:0]
    with pytest.raises(ValueError):
        conservation_report(traj)


def test_width_block_of_classical_run_is_reset():
    p = make_params(1.0, -6.0, 4)
    s = complete_on_section(0.5, -0.3, p, WidthPoint(1.3, 0.2, 0.9, -0.1))
    traj = integrate(s, p, "classical", 2.0)
    assert traj.states[0, 4:] == pytest.approx([math.sqrt(0.5), 0, math.sqrt(0.5), 0])
