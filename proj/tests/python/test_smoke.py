import math

import numpy as np
import pytest

import tocflow


def test_closed_forms_unit_schedule():
    assert tocflow.gamma_lambda() == pytest.approx(math.pi / 2, abs=1e-8)
    r7 = math.sqrt(7.0)
    eta = 2 / r7 * (math.atan(1 / r7) + math.atan(3 / r7))
    assert tocflow.eta_lambda() == pytest.approx(eta, abs=1e-6)
    mean, std = tocflow.terminal_moments("exact")
    assert mean == pytest.approx(2 / (1 + math.pi / 2), abs=1e-6)
    assert std == pytest.approx(1 / (1 + math.pi / 2), abs=1e-6)
    assert tocflow.terminal_moments("gd")[1] == pytest.approx(math.exp(-math.pi / 2), abs=1e-6)
    assert tocflow.terminal_moments("tocflow")[1] == pytest.approx(math.exp(-eta), abs=1e-5)


def test_unknown_scheme_raises():
    with pytest.raises(ValueError):
        tocflow.terminal_moments("nope")


def test_fig1_ordering():
    lambdas = list(np.logspace(-2, 2, 9))
    rows = tocflow.fig1_curve(1.0, 2.0, lambdas)
    assert len(rows) == 9
    for lam, exact, gd, toc in rows:
        assert gd <= exact
        if lam <= 1:
            assert exact < toc


def test_spectrum_of_zero_field():
    n = 32
    e = tocflow.energy_spectrum(np.zeros(n * n), n)
    assert e.shape == (n // 2,)
    assert np.all(e == 0)


def test_default_config_round_trip():
    cfg = tocflow.default_config("fig1")
    assert isinstance(cfg, dict)
    summary, checks = tocflow.run("fig1", cfg)
    assert len(summary["rows"]) > 0
    assert checks and all(c.passed for c in checks)


def test_bad_config_key():
    with pytest.raises(ValueError):
        tocflow.run("fig1", {"not_a_key": 1})
