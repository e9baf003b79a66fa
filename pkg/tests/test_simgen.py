import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from pppca.errors import InfeasibleScenario, ParseError
from pppca.simgen import (FIG1_A, FIG1_B, FIG2_A, FIG2_B, NAMED_SCENARIOS, REPLICATE_COLUMNS, Scenario, decay_d2,
                          load_scenario, make_population_spectrum, parse_scenario_text, population_d2,
                          random_orthogonal, replicate_rng, run_replicates, sample_data, sample_spectrum_only,
                          scenario_text, summarize, write_replicates_csv)
from pppca.spectrum import sample_spectrum

SMALL = Scenario(20, 400, 3, 0.5, d2_min=1.0, name="small")


# -- population spectra ---------------------------------------------------------------

def test_explicit_population_spectrum():
    lam = make_population_spectrum(NAMED_SCENARIOS["fig1a"]).eigenvalues
    np.testing.assert_allclose(lam[:10], [20.3, 15.3, 9.3, 7.3, 6.3, 5.3, 4.3, 2.8, 1.3, 0.8], rtol=1e-15)
    assert np.all(lam[10:] == 0.3)
    assert lam.sum() == pytest.approx(100, rel=1e-14)


def test_decay_spectrum_against_closed_form_ratio():
    s = Scenario(100, 5000, 10, 0.5, d2_min=0.5)
    d2 = population_d2(s)
    assert d2.sum() == pytest.approx(50.0, abs=1e-9)
    assert np.all(np.diff(d2) <= 0) and d2[-1] == pytest.approx(0.5, rel=1e-15)
    # oracle: root of (rho^k - 1)/(rho - 1) = total / d2_min, found independently
    rho = brentq(lambda r: (r ** 10 - 1) / (r - 1) - 100.0, 1.0001, 10, xtol=1e-15)
    np.testing.assert_allclose(d2, 0.5 * rho ** np.arange(9, -1, -1), rtol=1e-10)


def test_decay_single_component():
    s = Scenario(100, 500, 1, 0.4, d2_min=0.01)
    assert population_d2(s).tolist() == [pytest.approx(60.0)]


def test_decay_flat_when_budget_is_tight():
    np.testing.assert_array_equal(decay_d2(4, 2.0, 0.5), [0.5] * 4)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 200), st.data())
def test_population_spectrum_properties(n, data):
    k = data.draw(st.integers(1, n - 1))
    sigma2 = data.draw(st.floats(0.05, 0.95))
    d2_min = data.draw(st.floats(0.01, 1.0)) * n * (1 - sigma2) / k
    lam = make_population_spectrum(Scenario(n, 10 * n, k, sigma2, d2_min=d2_min)).eigenvalues
    assert abs(lam.sum() - n) <= 1e-9 * n
    assert np.all(np.diff(lam) <= 1e-12)
    assert lam[k - 1] > lam[k]


@pytest.mark.parametrize("kwargs", [
    dict(n=100, m=500, k_star=10, sigma2=0.9, d2_min=2.0),
    dict(n=100, m=500, k_star=10, sigma2=1.5, d2_min=0.1),
    dict(n=100, m=500, k_star=100, sigma2=0.5, d2_min=0.1),
    dict(n=100, m=500, k_star=3, sigma2=0.5),
    dict(n=100, m=500, k_star=2, sigma2=0.5, explicit_d2=(30.0, 10.0)),
    dict(n=100, m=500, k_star=2, sigma2=0.5, explicit_d2=(20.0, 30.0)),
    dict(n=2, m=500, k_star=1, sigma2=0.5, d2_min=0.1),
])
def test_infeasible_scenarios(kwargs):
    with pytest.raises(InfeasibleScenario):
        Scenario(**kwargs)


@pytest.mark.parametrize("d2", [FIG2_A, FIG2_B])
def test_low_signal_scenarios_fill_the_trace(d2):
    assert math.fsum(d2) == 30.0
    assert math.fsum(d2) == pytest.approx(100 * (1 - 0.7), abs=1e-12)


@pytest.mark.parametrize("d2", [FIG1_A, FIG1_B])
def test_high_signal_scenarios_fill_the_trace(d2):
    assert math.fsum(d2) == pytest.approx(100 * (1 - 0.3), abs=1e-12)


# -- random draws ----------------------------------------------------------------------

def test_random_orthogonal_one_by_one():
    q = random_orthogonal(1, np.random.default_rng(0))
    assert q.shape == (1, 1) and abs(q[0, 0]) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_random_orthogonal_is_orthogonal(n, seed):
    q = random_orthogonal(n, np.random.default_rng(seed))
    assert np.abs(q.T @ q - np.eye(n)).max() <= 1e-10


def test_random_orthogonal_golden():
    q = random_orthogonal(5, np.random.default_rng(42))
    np.testing.assert_allclose(q[0], [0.16687316018548493, -0.6859550652307468, -0.26599126539906476,
                                      0.5897198395256363, -0.2882675050977014], rtol=0, atol=1e-14)
    np.testing.assert_allclose(np.diag(q), [0.16687316018548493, 0.0867284213755591, 0.4022996125707293,
                                            0.5462705361405954, 0.46981233482206236], rtol=0, atol=1e-14)


def test_sample_data_deterministic():
    a = sample_data(SMALL, replicate_rng(9, 3)).values
    b = sample_data(SMALL, replicate_rng(9, 3)).values
    assert a.tobytes() == b.tobytes()
    assert sample_data(SMALL, replicate_rng(9, 4)).values.tobytes() != a.tobytes()
    assert a.shape == (20, 400)


def test_sample_spectrum_only_is_the_composition():
    x = sample_spectrum(sample_data(SMALL, replicate_rng(1, 0)), standardize=False).eigenvalues
    y = sample_spectrum_only(SMALL, replicate_rng(1, 0)).eigenvalues
    assert x.tobytes() == y.tobytes()
    assert abs(y.sum() - 20) <= 1e-8 * 20


def test_noise_only_spectrum_within_edge_bounds():
    s = Scenario(100, 5000, 0, 1.0, explicit_d2=())
    half_width = 3 * math.sqrt(100 / 5000)
    for seed in range(3):
        lam = sample_spectrum_only(s, replicate_rng(seed, 0)).eigenvalues
        assert lam.max() < 1 + half_width and lam.min() > 1 - half_width


def test_fig1_sample_top_eigenvalues_near_population():
    s = NAMED_SCENARIOS["fig1a"]
    target = make_population_spectrum(s).eigenvalues[:10]
    for seed in range(10):
        top = sample_spectrum_only(s, replicate_rng(seed, 0)).eigenvalues[:10]
        assert np.all(np.abs(top / target - 1) <= 0.15), seed


# -- replicates --------------------------------------------------------------------------

def test_single_replicate_pipeline():
    from pppca.methods import run_method
    from pppca.ppca import SigmaProfile
    (r,) = run_replicates(SMALL, "pppca,bic", 1, base_seed=5)
    sp = SigmaProfile.from_spectrum(sample_spectrum_only(SMALL, replicate_rng(5, 0)))
    assert r.k_hat == {"pppca": run_method("pppca", sp, 400).k_hat, "bic": run_method("bic", sp, 400).k_hat}
    assert r.replicate == 0 and r.seed == 5 and r.scenario_id == "small"


def test_replicates_independent_of_worker_count():
    serial = run_replicates(SMALL, "all", 6, base_seed=123, workers=1)
    parallel = run_replicates(SMALL, "all", 6, base_seed=123, workers=3)
    assert serial == parallel
    assert [r.replicate for r in parallel] == list(range(6))


def test_failed_method_is_missing_not_fatal():
    # Lawley's alpha outside (0, 1) fails every replicate; pppca still runs
    results = run_replicates(SMALL, "pppca,lawley", 2, base_seed=0, alpha=2.0)
    assert all(r.k_hat["lawley"] is None and r.k_hat["pppca"] is not None for r in results)
    summary = summarize(results, 3)
    assert summary["lawley"]["missing"] == 2 and summary["lawley"]["mean_k"] is None


def test_summarize():
    from pppca.simgen import ReplicateResult
    rs = [ReplicateResult("x", i, 0, {"pppca": k}) for i, k in enumerate([3, 3, 2, 5])]
    assert summarize(rs, 3)["pppca"] == {"mean_k": 3.25, "median_k": 3.0, "prop_correct": 0.5, "missing": 0}


def test_replicate_csv(tmp_path):
    results = run_replicates(SMALL, "pppca,vard", 2, base_seed=1)
    path = tmp_path / "r.csv"
    write_replicates_csv(results, 3, path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == REPLICATE_COLUMNS
    assert [r[3] for r in rows[1:]] == ["pppca", "vard", "pppca", "vard"]
    write_replicates_csv(results, 3, path, timings=True)
    assert open(path).readline().strip().endswith("wall_time")


# -- scenario files ------------------------------------------------------------------------

def test_scenario_file_round_trip(tmp_path):
    for s in list(NAMED_SCENARIOS.values()) + [SMALL]:
        path = tmp_path / "s.cfg"
        path.write_text(scenario_text(s))
        assert load_scenario(path) == s


def test_scenario_text_parsing():
    s = parse_scenario_text("# decay model\nn = 50\nm=200\nk_star = 4  # true\nsigma2 = 0.6\nd2_min = 0.5\n")
    assert (s.n, s.m, s.k_star, s.sigma2, s.d2_min) == (50, 200, 4, 0.6, 0.5)
    s = parse_scenario_text("n = 10\nm = 50\nsigma2 = 0.5\nexplicit_d2 = 3, 2\n")
    assert s.k_star == 2
    for bad in ("n = 10\nm = 50\n", "n = 10\nm = 50\nsigma2 = 0.5\nk_star = 1\nd2_min = 1\nfoo = 1\n",
                "n = ten\nm = 50\nsigma2 = 0.5\nk_star = 1\nd2_min = 1\n", "just text\n"):
        with pytest.raises(ParseError):
            parse_scenario_text(bad)
    with pytest.raises(ParseError):
        load_scenario("/nonexistent/scenario.cfg")
