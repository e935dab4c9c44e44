import math

import numpy as np
import pytest

from flywheel_soc import (
    OracleConfig,
    PowerProfile,
    filtered_mech_power,
    integrate_ode,
    integrate_physical,
    quadrature_slot_energy,
    simulate_baseline,
    simulate_exact,
    slot_energy_exact,
)
from flywheel_soc.oracle import OracleError, _rk4_slot, filter_states, ode_intraslot

from helpers import base_params, case_sweep, random_profile_powers

SWITCH_50KW_SLOT = 26967.063751447985391867515   # mpmath, see test_exact


def loop_rk4(E, y0, P_in, params, breakpoints, n):
    """Textbook RK4 loop, used to check the vectorised implementation."""
    def rhs(t, E):
        return filtered_mech_power(t, P_in, y0, params.T_cont, params.e_c, params.e_d) \
            - E / params.T_loss
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        h = (b - a) / n
        for i in range(n):
            t = a + i * h
            k1 = rhs(t, E)
            k2 = rhs(t + h / 2, E + h / 2 * k1)
            k3 = rhs(t + h / 2, E + h / 2 * k2)
            k4 = rhs(t + h, E + h * k3)
            E = E + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return E


class TestQuadrature:
    def test_zero(self):
        assert quadrature_slot_energy(0.0, 0.0, base_params()) == 0.0
        assert quadrature_slot_energy(0.0, 0.0, base_params(), weighted=False) == 0.0

    def test_constant_power_weighted(self):
        p = base_params()
        want = p.e_c * 1000 * p.T_loss * -math.expm1(-p.delta / p.T_loss)
        assert quadrature_slot_energy(1000.0, 1000.0, p) == pytest.approx(want, rel=1e-10)

    def test_switching_reference(self):
        got = quadrature_slot_energy(5e4, -5e4, base_params(delta=1.0))
        assert got == pytest.approx(SWITCH_50KW_SLOT, rel=1e-10)

    def test_tolerance_self_consistency(self):
        for _, P_in, P_prev, params in case_sweep(31, 100):
            a = quadrature_slot_energy(P_in, P_prev, params, config=OracleConfig(quad_tol=1e-10))
            b = quadrature_slot_energy(P_in, P_prev, params, config=OracleConfig(quad_tol=5e-11))
            assert abs(a - b) <= 1e-10 * abs(b) + 1e-6

    def test_unsplit_kink_is_less_accurate_but_close(self):
        p = base_params(delta=1.0)
        cfg = OracleConfig(split_at_t_change=False, quad_tol=1e-8)
        assert quadrature_slot_energy(5e4, -5e4, p, config=cfg) == pytest.approx(
            SWITCH_50KW_SLOT, rel=1e-6)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            OracleConfig(quad_tol=0)
        with pytest.raises(ValueError):
            OracleConfig(substeps_per_slot=0)

    def test_non_convergence_raises(self):
        # a 1-interval limit cannot reach 1e-14 on a sharp transient
        import flywheel_soc.oracle as oracle
        p = base_params(delta=900.0, T_cont=0.05, T_loss=1e3)
        original = oracle.integrate.quad

        def starved(*args, **kwargs):
            kwargs["limit"] = 1
            return original(*args, **kwargs)

        oracle.integrate.quad = starved
        try:
            with pytest.raises(OracleError):
                quadrature_slot_energy(1e5, -1e5, p, config=OracleConfig(quad_tol=1e-14),
                                       weighted=True)
        finally:
            oracle.integrate.quad = original


class TestIntegrateODE:
    def test_vectorised_step_equals_loop(self):
        p = base_params(delta=2.0)
        cfg = OracleConfig(substeps_per_slot=200)
        for P_in, y0 in [(5e4, -5e4), (1e3, 1e3), (-2e4, 0.0), (0.0, 7e3)]:
            pts = [0.0, 2.0]
            if P_in * y0 < 0:
                pts.insert(1, -p.T_cont * math.log(P_in / (P_in - y0)))
            want = loop_rk4(1e6, y0, P_in, p, pts, 200)
            assert _rk4_slot(1e6, y0, P_in, p, cfg) == pytest.approx(want, rel=1e-13)

    def test_zero_profile_pure_decay(self):
        p = base_params()
        tr = integrate_ode(PowerProfile(p.delta, [0.0] * 20), p)
        want = p.E_init * np.exp(-tr.time / p.T_loss)
        np.testing.assert_allclose(tr.energy, want, rtol=1e-10)

    def test_constant_power_steady_state(self):
        p = base_params(delta=900.0, T_loss=2000.0, E_init=0.0, P_prev_init=1e4)
        tr = integrate_ode(PowerProfile(p.delta, [1e4] * 60), p, OracleConfig(substeps_per_slot=200))
        assert tr.final == pytest.approx(p.e_c * 1e4 * p.T_loss, rel=1e-9)

    def test_matches_exact_recursion(self):
        rng = np.random.default_rng(2)
        p = base_params(delta=5.0, E_init=5e7)
        prof = PowerProfile(p.delta, random_profile_powers(rng, 200))
        ode = integrate_ode(prof, p)
        exact = simulate_exact(prof, p)
        np.testing.assert_allclose(exact.energy, ode.energy, rtol=1e-6)
        assert np.max(np.abs(exact.energy - ode.energy) / ode.energy) < 1e-9

    def test_substep_convergence(self):
        rng = np.random.default_rng(3)
        p = base_params(delta=30.0, E_init=5e7)
        prof = PowerProfile(p.delta, random_profile_powers(rng, 50))
        a = integrate_ode(prof, p, OracleConfig(substeps_per_slot=1000)).energy
        b = integrate_ode(prof, p, OracleConfig(substeps_per_slot=2000)).energy
        assert np.max(np.abs(a - b) / np.abs(b)) < 1e-9

    def test_intraslot_samples(self):
        p = base_params(delta=10.0)
        prof = PowerProfile(p.delta, [1e4, -1e4, 0.0])
        cfg = OracleConfig(substeps_per_slot=100)
        t, e = ode_intraslot(prof, p, cfg)
        assert t[0] == 0.0 and np.all(np.diff(t) > 0)
        assert t[-1] == pytest.approx(30.0)
        tr = integrate_ode(prof, p, cfg)
        for k in range(1, 4):
            i = np.argmin(np.abs(t - k * p.delta))
            assert e[i] == pytest.approx(tr.energy[k], rel=1e-12)


class TestPhysical:
    def test_zero_profile(self):
        p = base_params()
        prof = PowerProfile(p.delta, [0.0] * 10)
        np.testing.assert_allclose(integrate_physical(prof, p).energy,
                                   integrate_ode(prof, p).energy, rtol=1e-15)

    def test_filter_state(self):
        p = base_params(delta=0.2, T_cont=0.2)
        ys = filter_states(PowerProfile(p.delta, [100.0, 0.0]), p)
        assert ys[0] == 0.0
        assert ys[1] == pytest.approx(100.0 * (1 - math.exp(-1)))

    def test_long_slots_match_reset_model(self):
        rng = np.random.default_rng(4)
        p = base_params(delta=4.0, T_cont=0.2, E_init=0.0)      # delta = 20 T_cont
        powers = random_profile_powers(rng, 40)
        prof = PowerProfile(p.delta, powers)
        cfg = OracleConfig(substeps_per_slot=400)
        phys = integrate_physical(prof, p, cfg).energy
        ode = integrate_ode(prof, p, cfg).energy
        jumps = np.abs(np.diff(np.concatenate([[p.P_prev_init], powers])))
        limit = (max(p.e_c, p.e_d) * jumps.max() * p.T_cont * math.exp(-p.delta / p.T_cont)
                 * len(powers))
        assert np.all(np.abs(phys - ode) <= limit)

    def test_short_slots_diverge(self):
        p = base_params(delta=0.2, T_cont=0.2, E_init=0.0)
        prof = PowerProfile(p.delta, [1e4, -1e4] * 10)
        cfg = OracleConfig(substeps_per_slot=200)
        diff = np.abs(integrate_physical(prof, p, cfg).energy - integrate_ode(prof, p, cfg).energy)
        assert diff.max() > 10.0

    def test_fast_controller_limit(self):
        rng = np.random.default_rng(6)
        p = base_params(delta=10.0, T_cont=1e-5, E_init=5e7)    # T_cont = 1e-6 delta
        prof = PowerProfile(p.delta, random_profile_powers(rng, 30))
        phys = integrate_physical(prof, p).energy
        ode = integrate_ode(prof, p).energy
        np.testing.assert_allclose(phys, ode, rtol=1e-6)


class TestBaseline:
    def test_discharge(self):
        p = base_params(delta=300.0)
        assert simulate_baseline(PowerProfile(300.0, [-1000.0]), p).final == pytest.approx(715000.0)

    def test_no_decay(self):
        p = base_params()
        tr = simulate_baseline(PowerProfile(p.delta, [0.0] * 5), p)
        assert np.all(tr.energy == p.E_init)

    def test_constant_charge(self):
        p = base_params()
        tr = simulate_baseline(PowerProfile(p.delta, [1000.0] * 10), p)
        assert tr.final == pytest.approx(p.E_init + 2.7e6, rel=1e-14)

    def test_differs_from_exact(self):
        rng = np.random.default_rng(9)
        p = base_params()
        prof = PowerProfile(p.delta, random_profile_powers(rng, 20))
        assert np.all(simulate_baseline(prof, p).energy[1:] != simulate_exact(prof, p).energy[1:])


def test_slot_energy_from_ode_single_slot():
    # one slot from E = 0 isolates the slot energy
    for _, P_in, P_prev, params in case_sweep(41, 25):
        p = params.replace(E_init=0.0)
        got = _rk4_slot(0.0, P_prev, P_in, p, OracleConfig())
        want = slot_energy_exact(P_in, P_prev, p).value
        assert abs(got - want) <= 1e-8 * abs(want) + 1e-6
