import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahm import bounds as bnd
from kahm.errors import DomainError
from kahm.federation import LabeledDataset, build_global_model
from kahm.synthetic import make_blobs

E2 = math.exp(-2.0)


def risk_oracle(N, delta, digits=50):
    with mpmath.workdps(digits):
        N, delta = mpmath.mpf(N), mpmath.mpf(delta)
        return 4 / mpmath.sqrt(N) + mpmath.sqrt(mpmath.log(1 / delta) / (2 * N))


def complexity_oracle(eps, delta, digits=50):
    with mpmath.workdps(digits):
        eps, delta = mpmath.mpf(eps), mpmath.mpf(delta)
        return int(mpmath.ceil((4 + mpmath.sqrt(mpmath.log(1 / delta) / 2)) ** 2 / eps**2))


@pytest.mark.parametrize("N, value", [(1, 1.0), (4, 0.5), (10000, 0.01)])
def test_rademacher_bound(N, value):
    assert bnd.rademacher_bound(N) == value


@pytest.mark.parametrize("N, value", [(1, 2.0), (4, 1.0), (400, 0.1)])
def test_loss_rademacher_bound(N, value):
    assert bnd.loss_rademacher_bound(N) == value


def test_generalization_arithmetic():
    assert bnd.generalization_bound(16, E2) == pytest.approx(1.25, abs=1e-15)
    assert bnd.generalization_bound(6400, E2) == pytest.approx(0.0625, abs=1e-15)
    base = bnd.generalization_bound(100, 0.1)
    assert bnd.generalization_bound(100, 0.1, 0.3) == pytest.approx(base + 0.3, abs=1e-15)


def test_predictor_risk():
    assert bnd.predictor_risk_bound(16, E2) == pytest.approx(1.25, abs=1e-15)
    value = bnd.predictor_risk_bound(10**6, 0.05)
    assert float(mpmath.nstr(risk_oracle(10**6, 0.05), 6)) == pytest.approx(0.005224, abs=5e-7)
    assert value == pytest.approx(float(risk_oracle(10**6, 0.05)), rel=1e-12)
    assert f"{value:.4g}" == "0.005224"


def test_rate_halves_when_n_quadruples():
    # delta-free component 4/sqrt(N)
    for N in (1, 7, 100, 12345):
        assert (4 / math.sqrt(4 * N)) / (4 / math.sqrt(N)) == pytest.approx(0.5, abs=1e-12)
    # with delta the whole bound scales as 1/sqrt(N), so the ratio is 1/2 as well
    assert bnd.predictor_risk_bound(400, 0.3) / bnd.predictor_risk_bound(100, 0.3) == pytest.approx(0.5, abs=1e-12)


def test_sample_complexity_values():
    assert bnd.sample_complexity(1.0, E2) == 25
    assert bnd.sample_complexity(0.5, E2) == 100
    assert bnd.sample_complexity(0.1, 0.05) == 2729
    assert complexity_oracle(0.1, 0.05) == 2729
    # six-digit e^-2 as typed on a command line
    assert bnd.sample_complexity(1.0, 0.135335) == 25


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_delta_domain(bad):
    with pytest.raises(DomainError):
        bnd.generalization_bound(10, bad)
    with pytest.raises(DomainError):
        bnd.sample_complexity(0.1, bad)


def test_other_domain_errors():
    with pytest.raises(DomainError):
        bnd.rademacher_bound(0)
    with pytest.raises(DomainError):
        bnd.sample_complexity(0.0, 0.1)
    with pytest.raises(DomainError):
        bnd.generalization_bound(5, 0.1, -0.01)
    with pytest.raises(DomainError):
        bnd.negative_log_link(0.0, 3)
    assert isinstance(DomainError("x"), ValueError)


def test_negative_log_link():
    assert bnd.negative_log_link(1.0, 5) == 0.0
    assert bnd.negative_log_link(math.exp(-1), 10) == pytest.approx(10.0, rel=1e-15)


@settings(max_examples=200)
@given(st.floats(min_value=1e-300, max_value=1.0), st.integers(1, 4096))
def test_link_round_trip(score, p):
    back = math.exp(-bnd.negative_log_link(score, p) / p)
    assert back == pytest.approx(score, rel=1e-12)


def test_monotonicity_sweeps():
    Ns = [1, 2, 5, 10, 100, 1000, 10**5]
    deltas = [0.9, 0.5, 0.1, 0.01, 1e-6]
    for d in deltas:
        vals = [bnd.predictor_risk_bound(N, d) for N in Ns]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert all(a >= b for a, b in zip(map(bnd.rademacher_bound, Ns), map(bnd.rademacher_bound, Ns[1:])))
    for N in Ns:
        vals = [bnd.generalization_bound(N, d) for d in deltas]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
    eps = [1.0, 0.5, 0.2, 0.1, 0.01]
    for d in deltas:
        vals = [bnd.sample_complexity(e, d) for e in eps]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
    for e in eps:
        vals = [bnd.sample_complexity(e, d) for d in deltas]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


@settings(max_examples=100)
@given(st.integers(1, 10**7), st.floats(min_value=1e-9, max_value=0.999))
def test_cross_consistency(N, delta):
    assert bnd.generalization_bound(N, delta, 0.0) == bnd.predictor_risk_bound(N, delta)


def invert_risk(eps, delta):
    """Smallest M with predictor_risk_bound(M, delta) <= eps, by bisection."""
    lo, hi = 1, 1
    while bnd.predictor_risk_bound(hi, delta) > eps:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if bnd.predictor_risk_bound(mid, delta) <= eps:
            hi = mid
        else:
            lo = mid + 1
    return lo


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.01, max_value=2.0), st.floats(min_value=1e-6, max_value=0.99))
def test_sample_complexity_inverts_risk_bound(eps, delta):
    assert abs(bnd.sample_complexity(eps, delta) - invert_risk(eps, delta)) <= 1


def test_bound_report_lines():
    rep = bnd.bound_report(16, E2, epsilon=1.0)
    lines = dict(line.split("=", 1) for line in rep.lines())
    assert float(lines["predictor_risk_bound"]) == pytest.approx(1.25)
    assert lines["sample_complexity"] == "25"
    assert "sample_complexity" not in dict(l.split("=", 1) for l in bnd.bound_report(4, 0.1).lines())


def test_hull_supremum_matches_vertex_search(rng):
    v = rng.uniform(0, 1, size=12)
    signs = rng.choice([-1.0, 1.0], size=(200, 12))
    K = np.outer(v, v)
    brute = (signs @ K).max(axis=1) / 12  # max over vertices j of sum_i sigma_i K_ij
    np.testing.assert_allclose(bnd.hull_supremum(signs, v), brute, rtol=1e-12, atol=1e-15)
    probe = bnd.supremum_probe(signs[0], v)
    assert (signs[0] @ K)[probe.vertex_index] / 12 == pytest.approx(brute[0])


def test_draw_signs():
    a = bnd.draw_signs(7, 3000, seed=5)
    assert a.shape == (3000, 7)
    assert set(np.unique(a).tolist()) == {-1, 1}
    np.testing.assert_array_equal(a, bnd.draw_signs(7, 3000, seed=5))
    # prefix-stable: more trials extend rather than reshuffle
    np.testing.assert_array_equal(a[:1024], bnd.draw_signs(7, 1024, seed=5))


def test_rademacher_single_sample():
    data = LabeledDataset(np.array([[0.2, 0.4]]), [1])
    gm = build_global_model(data)
    est, se = bnd.empirical_rademacher(gm, 1, data, trials=10_000, seed=0)
    assert est <= 1.0 + 3 * se
    # exact value is E[sigma] * K_11 = 0
    assert abs(est) <= 4 * se


def test_rademacher_per_draw_at_most_one(blobs, blob_model):
    rows = blobs.labels == 1
    sub = LabeledDataset(blobs.samples[rows], blobs.labels[rows], class_count=3)
    from kahm.federation import global_distance, score_from_distance

    v = score_from_distance(global_distance(blob_model, 1, sub.samples), 2)
    values = bnd.hull_supremum(bnd.draw_signs(sub.n_samples, 500, 0).astype(float), v)
    assert np.all(values <= 1.0)


def test_rademacher_fifty_blob_samples():
    data = make_blobs(50, centers=[[0.0, 0.0]], seed=8)
    gm = build_global_model(data)
    est, se = bnd.empirical_rademacher(gm, 1, data, trials=10_000, seed=1)
    assert est <= 1 / math.sqrt(50) + 3 * se
    again = bnd.empirical_rademacher(gm, 1, data, trials=10_000, seed=1)
    assert again == (est, se)
