import math

import numpy as np
import pytest

from colourdiv.cavity import ratio_z, symmetric_table, update_message_finite_T
from colourdiv.model import ModelParams, ensemble_from_mean
from colourdiv.paramagnet import (ParamagneticState, find_zero_entropy_temperature,
                                  fixed_point_z, paramagnetic_entropy,
                                  paramagnetic_entropy_zero_T,
                                  paramagnetic_entropy_zero_T_direct,
                                  paramagnetic_reduction_generic, paramagnetic_thermodynamics,
                                  z_population, z_population_zero_T, z_update)

ZERO = ModelParams(4, 0.0)
S4 = math.log((15 + 12 * math.sqrt(2)) / 28)


def full_update_ratio(zs, c, params):
    """z read off the full table update fed with symmetric tables."""
    T = params.temperature
    tables = [symmetric_table(-T * math.log(z), 0.0, params.Q) for z in zs]
    return ratio_z(update_message_finite_T(tables, c, params), 1 / T)


def test_zero_T_fixed_point():
    assert fixed_point_z(4, ZERO) == pytest.approx(math.sqrt(2) - 1, abs=1e-10)


def test_zero_T_map_values():
    assert z_update([0, 0, 0], 4, ZERO) == 0.5
    # inputs all Q1/6 give 3 / (6 + 1.5)
    assert z_update([0.5] * 3, 4, ZERO) == pytest.approx(0.4)
    assert z_update([0.7, 0.2], 3, ZERO) == 0.0


def test_zero_T_range_invariant():
    rng = np.random.default_rng(0)
    for _ in range(200):
        zs = np.where(rng.random(3) < 0.3, 0.0, rng.uniform(0.4, 0.5, 3))
        assert 0.4 <= z_update(zs, 4, ZERO) <= 0.5


def test_z_update_errors():
    with pytest.raises(ValueError):
        z_update([0.1, -0.2], 3, ModelParams(4, 1.0))
    with pytest.raises(ValueError):
        z_update([0.1], 3, ModelParams(4, 1.0))


def test_scalar_recursion_matches_full_update():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        c = int(rng.integers(3, 5))
        p = ModelParams(4, float(rng.uniform(0.3, 1.0)))
        zs = rng.uniform(0.0, 1.0, c - 1)
        a, b = z_update(zs, c, p), full_update_ratio(zs, c, p)
        worst = max(worst, abs(a - b) / abs(b))
    assert worst < 1e-12


@pytest.mark.parametrize("Q", [5, 6])
def test_scalar_recursion_other_Q(Q):
    rng = np.random.default_rng(Q)
    for c in (3, 4):
        p = ModelParams(Q, 0.8)
        zs = rng.uniform(0.0, 1.0, c - 1)
        assert z_update(zs, c, p) == pytest.approx(full_update_ratio(zs, c, p), rel=1e-12)


def test_zero_T_populations():
    st4 = z_population_zero_T(ensemble_from_mean(4.0), M=2000, seed=1)
    assert np.all(np.abs(st4.z - (math.sqrt(2) - 1)) < 1e-8)
    st3 = z_population_zero_T(ensemble_from_mean(3.0), M=2000, seed=1)
    assert np.all(st3.z == 0.0)
    st = z_population_zero_T(ensemble_from_mean(3.5), M=5000, seed=1)
    nz = st.z[st.z > 0]
    assert nz.size and nz.min() >= 0.4 - 1e-12 and nz.max() <= 0.5 + 1e-12
    assert np.all(st.z_of_degree(3) == 0.0)
    with pytest.raises(ValueError):
        z_population_zero_T(ensemble_from_mean(4.0, 5), Q=5)


@pytest.mark.parametrize("mc", [3.0, 3.25, 3.5, 3.75, 4.0])
def test_zero_T_free_energy(mc):
    ens = ensemble_from_mean(mc)
    th = paramagnetic_thermodynamics(z_population_zero_T(ens, M=2000, seed=0))
    assert th.f_av == pytest.approx(3 * mc - 5, abs=1e-9)


def test_zero_T_entropies():
    assert paramagnetic_entropy_zero_T(ensemble_from_mean(3.0)) == pytest.approx(
        -math.log(3) / 2, abs=1e-9)
    assert paramagnetic_entropy_zero_T(ensemble_from_mean(4.0)) == pytest.approx(S4, abs=1e-9)
    s5 = paramagnetic_entropy_zero_T(ensemble_from_mean(3.0, 5), Q=5)
    assert s5 == pytest.approx(math.log(6 / math.sqrt(20)), abs=1e-12)
    assert s5 > 0


def test_zero_T_entropy_direct_trace():
    ens = ensemble_from_mean(3.7)
    st = z_population_zero_T(ens, M=20_000, seed=4)
    a = paramagnetic_entropy_zero_T(ens, state=st)
    b = paramagnetic_entropy_zero_T_direct(st)
    assert a == pytest.approx(b, abs=2e-3)
    for mc in (3.0, 4.0):
        e = ensemble_from_mean(mc)
        assert paramagnetic_entropy_zero_T_direct(z_population_zero_T(e, M=500)) == \
            pytest.approx(paramagnetic_entropy_zero_T(e), abs=1e-9)


def test_regular_limit_values():
    for c, f in ((3, 4.0), (4, 7.0)):
        ens = ensemble_from_mean(float(c))
        th = paramagnetic_thermodynamics(z_population_zero_T(ens, M=200))
        assert th.f_av == f and th.e_av == f


def test_finite_T_identity_and_low_T_limit():
    ens = ensemble_from_mean(4.0)
    for T in (1.0, 0.3, 0.05):
        p = ModelParams(4, T)
        st = ParamagneticState(np.array([fixed_point_z(4, p)]), np.array([4]), p, ens)
        th = paramagnetic_thermodynamics(st)
        assert th.f_av == pytest.approx(th.e_av - T * th.s_av, abs=1e-12)
    assert th.e_av == pytest.approx(7.0, abs=1e-3)
    assert th.s_av == pytest.approx(S4, abs=1e-2)


def test_generic_reduction_matches_closed_forms():
    for c in (3, 4):
        p = ModelParams(4, 1.0)
        ens = ensemble_from_mean(float(c))
        st = ParamagneticState(np.array([fixed_point_z(c, p)]), np.array([c]), p, ens)
        ref = paramagnetic_thermodynamics(st)
        gst, th = paramagnetic_reduction_generic(p, ens)
        assert gst.z[0] == pytest.approx(st.z[0], abs=1e-9)
        assert th.f_av == pytest.approx(ref.f_av, abs=1e-9)
        assert th.e_av == pytest.approx(ref.e_av, abs=1e-9)
        assert th.s_av == pytest.approx(ref.s_av, abs=1e-9)


def test_generic_reduction_refuses_zero_T():
    with pytest.raises(ValueError):
        paramagnetic_reduction_generic(ZERO, ensemble_from_mean(3.0))


def test_zero_entropy_temperature():
    Ts = find_zero_entropy_temperature(3.0)
    assert Ts == pytest.approx(0.65, abs=0.02)
    with pytest.raises(ValueError):
        find_zero_entropy_temperature(3.0, bracket=(0.8, 1.0))


def test_free_energy_peaks_at_zero_entropy():
    ens = ensemble_from_mean(3.0)

    def f(T):
        p = ModelParams(4, T)
        st = ParamagneticState(np.array([fixed_point_z(3, p)]), np.array([3]), p, ens)
        return paramagnetic_thermodynamics(st).f_av

    assert f(0.65) > f(0.6) and f(0.65) > f(0.7)


@pytest.mark.parametrize("lam", [1.0, 0.5, 0.0])
def test_entropy_increases_with_temperature(lam):
    Ts = np.linspace(0.3, 1.0, 8)
    s = [paramagnetic_entropy(3.0, T, lam=lam) for T in Ts]
    assert np.all(np.diff(s) > 0)


def test_finite_T_population_stationary():
    st = z_population(ensemble_from_mean(3.5), ModelParams(4, 0.8), M=3000, seed=2)
    assert st.stationary
    th = paramagnetic_thermodynamics(st)
    assert th.warning is None
    assert th.f_av == pytest.approx(th.e_av - 0.8 * th.s_av, abs=1e-12)
