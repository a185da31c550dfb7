"""Error laws, event sampling, and the non-Gaussian output mixtures."""

import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from cvqec.code import CodeConfig, closed_form_output, run_rounds
from cvqec.errors import (ErrorConfig, ErrorEvent, ErrorLaw, MixtureState,
                          merge_components, mixture_moments, mixture_output,
                          sample_error, series_for_event)
from cvqec.gaussian import db_to_r

R35 = db_to_r(3.5)


def test_law_validation():
    with pytest.raises(ValueError):
        ErrorLaw("radial", 1.0)
    with pytest.raises(ValueError):
        ErrorLaw("general", 1.0, "gaussian")
    with pytest.raises(ValueError):
        ErrorLaw("x", -1.0)
    with pytest.raises(ValueError):
        ErrorConfig(gamma=1.5)
    with pytest.raises(ValueError):
        ErrorConfig(channel=6)


def test_sample_error_gamma_zero_is_null():
    rng = np.random.default_rng(0)
    cfg = ErrorConfig(0.0, 3, ErrorLaw("general", 5.0))
    assert all(not sample_error(cfg, rng).occurred for _ in range(200))


def test_sample_error_general_magnitude_exact():
    rng = np.random.default_rng(1)
    cfg = ErrorConfig(1.0, 2, ErrorLaw("general", 5.0))
    for _ in range(100):
        ev = sample_error(cfg, rng)
        assert ev.occurred and ev.channel == 2
        assert ev.dx ** 2 + ev.dp ** 2 == pytest.approx(25.0, rel=1e-12)


def test_sample_error_phase_is_uniform():
    rng = np.random.default_rng(2)
    cfg = ErrorConfig(1.0, 1, ErrorLaw("general", 5.0))
    phases = []
    for _ in range(10_000):
        ev = sample_error(cfg, rng)
        phases.append(math.atan2(ev.dp, ev.dx) % (2 * math.pi))
    result = scipy_stats.kstest(np.array(phases) / (2 * math.pi), "uniform")
    assert result.pvalue > 0.01


def test_sample_error_occurrence_fraction():
    rng = np.random.default_rng(3)
    cfg = ErrorConfig(0.3, "uniform", ErrorLaw("x", 1.0))
    hits = sum(sample_error(cfg, rng).occurred for _ in range(10_000))
    ci = 2.576 * math.sqrt(0.3 * 0.7 / 10_000)
    assert abs(hits / 10_000 - 0.3) <= ci


def test_sample_error_uniform_channel_policy():
    rng = np.random.default_rng(4)
    cfg = ErrorConfig(1.0, "uniform", ErrorLaw("p", 1.0))
    seen = {sample_error(cfg, rng).channel for _ in range(300)}
    assert seen == {1, 2, 3, 4, 5}


def test_series_for_event():
    rng = np.random.default_rng(5)
    assert np.all(series_for_event(ErrorEvent(False), 40, rng) == 0.0)
    const = series_for_event(ErrorEvent(True, 1, 2.0, -1.0), 40, rng)
    assert np.allclose(const, np.tile([2.0, -1.0], (40, 1)))
    law = ErrorLaw("x", 3.0)
    drawn = series_for_event(ErrorEvent(True, 1, 3.0, 0.0, law), 5000, rng)
    assert np.all(np.abs(drawn[:, 0]) == 3.0)
    assert np.all(drawn[:, 1] == 0.0)


@pytest.mark.parametrize("law,vx,vp", [
    (ErrorLaw("general", 4.0), 8.0, 8.0),
    (ErrorLaw("x", 4.0), 16.0, 0.0),
    (ErrorLaw("p", 4.0, "gaussian"), 0.0, 16.0),
])
def test_law_quadrature_variances(law, vx, vp):
    assert law.quadrature_variances() == (vx, vp)
    rng = np.random.default_rng(6)
    draws = law.draw(rng, 40_000)
    assert draws[:, 0].var() == pytest.approx(vx, abs=4 * max(vx, 1.0) * 0.02)
    assert draws[:, 1].var() == pytest.approx(vp, abs=4 * max(vp, 1.0) * 0.02)


def test_branch_components_normalized():
    for law in (ErrorLaw("general", 2.0), ErrorLaw("x", 2.0),
                ErrorLaw("p", 2.0, "gaussian")):
        comps = law.branch_components()
        assert sum(w for w, *_ in comps) == pytest.approx(1.0, rel=1e-12)


def test_mixture_state_validation():
    with pytest.raises(ValueError):
        MixtureState((0.6, 0.6), ((0, 0), (1, 1)),
                     (((0.25, 0), (0, 0.25)),) * 2)


def test_mixture_gamma_zero_single_component():
    m = mixture_output(ErrorConfig(0.0, 3, ErrorLaw("x", 2.0)),
                       CodeConfig(r=R35), 3)
    assert len(m) == 1
    assert np.allclose(m.means[0], 0.0)
    inp = CodeConfig(r=R35).input_state()
    assert np.allclose(np.asarray(m.covs[0]), inp.cov)


def test_mixture_immunity_collapses_channel1():
    """gamma=1 on a protected channel: both sign branches equal the input."""
    m = mixture_output(ErrorConfig(1.0, 1, ErrorLaw("x", 3.0)),
                       CodeConfig(r=R35), 1)
    assert len(m) == 1
    assert np.allclose(np.asarray(m.covs[0]), 0.25 * np.eye(2))


def test_mixture_corrected_branch_collapses():
    """Exact cancellation makes every error-branch component identical."""
    cfg = CodeConfig(r=R35)
    m = mixture_output(ErrorConfig(0.5, 3, ErrorLaw("x", 3.0)), cfg, 3)
    assert len(m) == 2
    th = closed_form_output(cfg, 3)
    assert np.allclose(np.asarray(m.covs[1]), th.cov, atol=1e-12)
    mg = mixture_output(ErrorConfig(1.0, 4, ErrorLaw("general", 2.0)), cfg, 4,
                        phase_bins=36)
    assert len(mg) == 1


def test_mixture_moments_single_component():
    m = MixtureState((1.0,), ((0.5, -0.5),), (((0.3, 0.0), (0.0, 0.4)),))
    mean, cov = mixture_moments(m)
    assert np.allclose(mean, [0.5, -0.5])
    assert np.allclose(cov, [[0.3, 0], [0, 0.4]])


def test_mixture_moments_total_variance():
    """Equal mix of +-A means with shared cov V: mean 0, variance V + A^2."""
    v, a = 0.3, 2.0
    m = MixtureState((0.5, 0.5), ((a, 0.0), (-a, 0.0)),
                     (((v, 0.0), (0.0, v)),) * 2)
    mean, cov = mixture_moments(m)
    assert np.allclose(mean, 0.0)
    assert cov[0, 0] == pytest.approx(v + a ** 2, rel=1e-12)
    assert cov[1, 1] == pytest.approx(v, rel=1e-12)


def test_uncorrected_branch_mean_shift():
    """An uncorrected channel-3 x displacement lands on the output as A/sqrt3."""
    a = 3.0
    m = mixture_output(ErrorConfig(1.0, 3, ErrorLaw("x", a)),
                       CodeConfig(r=R35), 3, corrected=False)
    shifts = sorted(mu[0] for mu in m.means)
    assert shifts == pytest.approx([-a / math.sqrt(3), a / math.sqrt(3)], rel=1e-12)


def test_kurtosis_flags_distinct_branches():
    cfg = CodeConfig(r=R35)
    uncorrected = mixture_output(ErrorConfig(0.5, 3, ErrorLaw("x", 3.0)), cfg, 3,
                                 corrected=False)
    assert abs(uncorrected.quadrature_kurtosis_excess("x")) > 1.0
    collapsed = mixture_output(ErrorConfig(1.0, 3, ErrorLaw("x", 3.0)), cfg, 3)
    assert collapsed.quadrature_kurtosis_excess("x") == pytest.approx(0.0, abs=1e-12)


def test_merge_components_weights():
    m = merge_components([0.25, 0.25, 0.5],
                         [(0, 0), (0, 0), (1, 0)],
                         [np.eye(2) * 0.25] * 3)
    assert len(m) == 2
    assert m.weights[0] == pytest.approx(0.5)


def test_monte_carlo_matches_mixture_moments():
    """Pooled round outputs converge to the corrected-mixture moments."""
    cfg = CodeConfig(r=R35)
    amp = 10 * math.sqrt(0.25 * math.exp(-2 * R35))
    ec = ErrorConfig(0.5, 3, ErrorLaw("x", amp))
    rounds, window = 100, 1000
    outcome = run_rounds(cfg, ec, np.random.default_rng(55), rounds, window)
    assert outcome.summary.accuracy == 1.0
    n = rounds * window
    s1 = np.zeros(2)
    s2 = np.zeros(2)
    for rep in outcome.reports:
        mean = np.asarray(rep.corrected_mean)
        var = np.asarray(rep.corrected_var)
        s1 += window * mean
        s2 += (window - 1) * var + window * mean ** 2
    emp_mean = s1 / n
    emp_var = (s2 - n * emp_mean ** 2) / (n - 1)
    mean, cov = mixture_output(ec, cfg, 3).moments()
    for k in (0, 1):
        se_mean = math.sqrt(cov[k, k] / n)
        se_var = cov[k, k] * math.sqrt(2.0 / (n - 1))
        assert abs(emp_mean[k] - mean[k]) < 5 * se_mean
        assert abs(emp_var[k] - cov[k, k]) < 5 * se_var
