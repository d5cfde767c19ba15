import math

import numpy as np
import pytest

import dvocsim


def fig2_params():
    return dvocsim.DvocParams(eta=43.43, alpha=0.9722, kappa=math.pi / 2, p_star=0.5, q_star=0.0,
                              v_star=1.0, omega0=2 * math.pi * 60)


def test_rhs_at_consistent_point_is_pure_rotation():
    prm = fig2_params()
    dv = dvocsim.dvoc_rhs((1.0, 0.0), (0.5, 0.0), prm)
    assert dv[0] == pytest.approx(0.0, abs=1e-12)
    assert dv[1] == pytest.approx(prm.omega0)


def test_invalid_params_raise_value_error():
    with pytest.raises(ValueError):
        dvocsim.DvocParams(eta=-1.0, alpha=1.0, kappa=0.0, p_star=0.0, q_star=0.0, v_star=1.0, omega0=1.0)


def test_measure_power_sign():
    assert dvocsim.measure_power((1.0, 0.0), (0.0, 1.0)) == (0.0, -1.0)


def test_blackstart_curve_starts_at_v0_and_saturates():
    prm = fig2_params()
    mag = dvocsim.blackstart_analytic(1e-3, prm, [0.0, 10.0])
    assert mag[0] == pytest.approx(1e-3, rel=1e-12)
    assert mag[1] == pytest.approx(1.0, rel=1e-12)


def test_builtin_scenarios_round_trip():
    names = dvocsim.builtin_scenarios()
    assert "paper-fig7" in names
    sc = dvocsim.load_scenario("paper-fig7")
    assert dvocsim.parse_scenario(sc.to_json()) == sc


def test_short_run_returns_arrays():
    sc = dvocsim.load_scenario("paper-fig4")
    sc.t_end = 0.01
    trace = dvocsim.run(sc)
    vmag = trace["inverters"]["inv1"]["vmag"]
    assert isinstance(vmag, np.ndarray)
    assert len(vmag) == len(trace["time"])
    assert np.all(np.isfinite(vmag))


def test_unknown_key_is_rejected():
    with pytest.raises(dvocsim.ValidationError) as err:
        dvocsim.parse_scenario('{"inverters": [], "bogus": 1}')
    assert "bogus" in str(err.value)


def test_surplus_scenario_is_inconsistent():
    report = dvocsim.check_consistency(dvocsim.load_scenario("paper-fig4"))
    assert report["status"] == "inconsistent"
