import numpy
import pytest
from scipy import linalg

from VibForge.beam.model import Beam, BeamParams, mechanical_energy, static_deflection
from VibForge.beam.model import StateSpace
from VibForge.simulation.integrator import (
    PeriodPropagator,
    disturbance,
    integrate_control_period,
    rk4_spectral_radius,
    rk4_substep,
    stable_substep,
    substeps_per_period,
)


def scalar_system(a, n=1):
    return StateSpace(A=numpy.atleast_2d(a), B_u=numpy.zeros(n), B_d=numpy.zeros(n), i_u=1, i_d=1)


def test_disturbance_values():
    assert disturbance(0.0, 20.0) == 0.0
    assert disturbance(0.0125, 20.0) == pytest.approx(1.0)
    assert abs(disturbance(1 / 160, 80.0)) < 1e-12


def test_zero_dynamics_leave_state_unchanged():
    ss = StateSpace(A=numpy.zeros((2, 2)), B_u=numpy.zeros(2), B_d=numpy.zeros(2), i_u=1, i_d=1)
    x = numpy.array([0.3, -1.2])
    numpy.testing.assert_array_equal(rk4_substep(ss, x, 1.0, 0.0, 1e-4, 20.0), x)


def test_exponential_decay():
    h = 1e-4
    x = rk4_substep(scalar_system(-1.0), numpy.array([1.0]), 0.0, 0.0, h, 20.0)
    assert x[0] == pytest.approx(numpy.exp(-h), abs=1e-15)


def test_undamped_oscillator_returns_after_one_period():
    omega = 2 * numpy.pi
    ss = StateSpace(A=numpy.array([[0.0, 1.0], [-(omega**2), 0.0]]), B_u=numpy.zeros(2), B_d=numpy.zeros(2), i_u=1, i_d=1)
    x0 = numpy.array([1.0, 0.0])
    x = integrate_control_period(ss, x0, 0.0, 0.0, 20.0, 10000, 1e-4)
    assert numpy.linalg.norm(x - x0) <= 1e-8 * numpy.linalg.norm(x0)


def test_rest_stays_at_rest():
    ss = Beam().state_space
    h, n_sub = stable_substep(ss.A, 1e-4, 2.5e-3)
    x = integrate_control_period(ss, numpy.zeros(ss.n_states), 0.0, 0.0, 0.0, n_sub, h)
    assert not numpy.any(x)


def test_substeps_per_period():
    assert substeps_per_period(1e-4, 2.5e-3) == 25
    with pytest.raises(ValueError):
        substeps_per_period(3e-4, 2.5e-3)


def test_substep_refined_on_stiff_beam():
    ss = Beam().state_space
    assert rk4_spectral_radius(ss.A, 1e-4) > 1
    h, n_sub = stable_substep(ss.A, 1e-4, 2.5e-3)
    assert h < 1e-4
    assert n_sub * h == pytest.approx(2.5e-3, rel=1e-12)
    assert n_sub % 25 == 0
    assert rk4_spectral_radius(ss.A, h) <= 1


def test_substep_kept_when_already_stable():
    assert stable_substep(numpy.array([[-1.0]]), 1e-4, 2.5e-3) == (pytest.approx(1e-4), 25)


def test_refinement_can_be_disabled():
    ss = Beam().state_space
    assert stable_substep(ss.A, 1e-4, 2.5e-3, refine=False) == (pytest.approx(1e-4), 25)


def test_step_halving_changes_end_state_little():
    beam = Beam()
    ss = beam.state_space
    h, n_sub = stable_substep(ss.A, 1e-4, 2.5e-3)
    coarse = PeriodPropagator(ss, 2.5e-3, n_sub, 0.0)
    fine = PeriodPropagator(ss, 2.5e-3, 2 * n_sub, 0.0)
    x_coarse = x_fine = numpy.concatenate([static_deflection(beam.model, 20, 0.01), numpy.zeros(20)])
    for k in range(400):
        x_coarse = coarse.advance(x_coarse, 0.0, k * 2.5e-3)
        x_fine = fine.advance(x_fine, 0.0, k * 2.5e-3)
    assert numpy.linalg.norm(x_coarse - x_fine) <= 1e-9 * numpy.linalg.norm(x_fine)


def test_energy_conserved_on_undamped_beam():
    beam = Beam(BeamParams(alpha=0.0, beta=0.0))
    ss, model = beam.state_space, beam.model
    x = numpy.concatenate([static_deflection(model, 20, 0.01), numpy.zeros(20)])
    energy_0 = mechanical_energy(model, x)
    for period in range(400):
        x = integrate_control_period(ss, x, 0.0, period * 2.5e-3, 0.0, 25, 1e-4)
    assert abs(mechanical_energy(model, x) - energy_0) < 1e-3 * energy_0


def test_fourth_order_convergence():
    beam = Beam(BeamParams(n_b=5), i_u=3, i_d=2, i_y=5)
    ss = beam.state_space
    x0 = numpy.random.default_rng(1).standard_normal(ss.n_states)
    T = 0.02
    reference = linalg.expm(ss.A * T) @ x0
    errors = []
    for h in (2e-4, 1e-4, 5e-5):
        n = int(round(T / h))
        errors.append(numpy.linalg.norm(integrate_control_period(ss, x0, 0.0, 0.0, 0.0, n, h) - reference))
    slope = numpy.log(errors[0] / errors[2]) / numpy.log(4)
    assert 3.5 <= slope <= 4.5


def test_propagator_matches_chained_substeps():
    beam = Beam()
    ss = beam.state_space
    h, n_sub = stable_substep(ss.A, 1e-4, 2.5e-3)
    propagator = PeriodPropagator(ss, 2.5e-3, n_sub, 40.0)
    x = numpy.concatenate([static_deflection(beam.model, 20, 0.01), numpy.zeros(20)])
    for k in (0, 7, 133):
        t0 = k * 2.5e-3
        expected = integrate_control_period(ss, x, 0.8, t0, 40.0, n_sub, h)
        numpy.testing.assert_allclose(propagator.advance(x, 0.8, t0), expected, rtol=1e-8, atol=1e-9 * numpy.abs(expected).max())
    assert propagator.spectral_radius < 1
