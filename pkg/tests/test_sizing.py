import math
import random
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from retainer.erlang import DomainError, RetainerParams, erlang_loss, total_cost
from retainer.sizing import (
    buffer_scaling_report,
    min_pool_for_miss_prob,
    min_pool_for_wait,
    optimize_total_cost,
    precruit_rate,
    shared_pool_size,
)

from oracles import erlang_factorial, linear_min_pool


def test_min_pool_examples():
    assert min_pool_for_miss_prob(0.5, 0.05).c_star == 3
    assert min_pool_for_miss_prob(0, 0.5).c_star == 1
    assert min_pool_for_miss_prob(1, 0.0625).c_star == 3
    assert min_pool_for_miss_prob(3, 1.0).c_star == 0
    with pytest.raises(DomainError):
        min_pool_for_miss_prob(1, 0)
    with pytest.raises(DomainError):
        min_pool_for_miss_prob(1, 1.5)


def test_min_pool_reports_wait_when_mu_given():
    r = min_pool_for_miss_prob(2, 0.1, mu=0.5)
    assert r.achieved_wait == pytest.approx(r.achieved_loss / 0.5)


def test_binary_search_matches_linear_scan():
    rng = random.Random(7)
    for _ in range(200):
        rho = rng.uniform(1e-3, 20)
        p = rng.uniform(1e-6, 0.5)
        assert min_pool_for_miss_prob(rho, p).c_star == linear_min_pool(rho, p)


@given(st.floats(0.0, 300), st.floats(1e-12, 1.0))
def test_minimality_witness(rho, p):
    r = min_pool_for_miss_prob(rho, p)
    assert r.achieved_loss == erlang_loss(rho, r.c_star)
    assert r.achieved_loss <= p
    if r.c_star >= 1:
        assert erlang_loss(rho, r.c_star - 1) > p


def test_min_pool_for_wait_examples():
    assert min_pool_for_wait(1, 1, 0.5).c_star == 1
    assert min_pool_for_wait(0, 1, 0.01).c_star == 0
    assert min_pool_for_wait(1, 1 / 6, 0.3).c_star == min_pool_for_miss_prob(6, 0.05).c_star
    assert min_pool_for_wait(1, 1, 2.0).c_star == 0
    with pytest.raises(DomainError):
        min_pool_for_wait(1, 1, 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.05, 5), st.floats(0.01, 3))
def test_wait_sizing_against_direct_scan(lam, mu, w):
    r = min_pool_for_wait(lam, mu, w)
    c = 0
    while float(erlang_factorial(lam / mu, c)) / mu > w:
        c += 1
    # boundary cases may differ by float rounding of mu*w; allow exact ties only
    assert r.c_star == c or math.isclose(erlang_loss(lam / mu, c) / mu, w, rel_tol=1e-12)
    assert r.achieved_wait <= w * (1 + 1e-12)


def _scan(params, per_time=False):
    bound = math.ceil(params.rho + max(params.c_task * (params.lam if per_time else 1), 0) / params.s) + 1
    vals = [(total_cost(params, c, per_time=per_time), c) for c in range(bound + 1)]
    best = min(v for v, _ in vals)
    return min(c for v, c in vals if v == best), best


def test_optimize_total_cost_examples():
    assert optimize_total_cost(RetainerParams(lam=1, mu=1, s=0.3, c_task=0)).c_star == 0
    p = RetainerParams(lam=1, mu=1, s=1, c_task=10)
    r = optimize_total_cost(p)
    scan = min(range(51), key=lambda c: (total_cost(p, c), c))
    assert r.c_star == scan == 3
    assert r.objective == pytest.approx(2.6875, rel=1e-12)
    stars = [optimize_total_cost(RetainerParams(lam=1, mu=1, s=1, c_task=ct)).c_star for ct in (1, 5, 10, 20)]
    assert stars == sorted(stars)
    assert stars[-1] > stars[0]


@pytest.mark.parametrize("per_time", [False, True])
def test_optimize_matches_exhaustive(per_time):
    rng = random.Random(11)
    for _ in range(100):
        p = RetainerParams(lam=rng.uniform(0.01, 10), mu=1.0, s=rng.uniform(0.05, 3), c_task=rng.uniform(0, 100))
        r = optimize_total_cost(p, per_time=per_time)
        c, best = _scan(p, per_time)
        assert r.c_star == c
        assert r.objective == best


def test_zero_wage_warns():
    p = RetainerParams(lam=2, mu=1, s=0, c_task=5)
    with pytest.warns(RuntimeWarning):
        r = optimize_total_cost(p)
    assert r.achieved_loss <= 2.3e-16
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert optimize_total_cost(RetainerParams(lam=2, mu=1)).c_star == 0


def test_shared_pool_examples():
    assert shared_pool_size(1, 1, 0.0625).c_star == 3
    assert shared_pool_size(10, 4, 1e-3).c_star < 4 * min_pool_for_miss_prob(10, 1e-3).c_star
    assert shared_pool_size(0, 5, 0.5).c_star == 1
    with pytest.raises(DomainError):
        shared_pool_size(1, 0, 0.1)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 30), st.integers(1, 10), st.floats(1e-6, 0.5))
def test_pooling_never_hurts(rho, k, p):
    assert shared_pool_size(rho, k, p).c_star <= k * min_pool_for_miss_prob(rho, p).c_star


def test_buffer_scaling():
    rep = buffer_scaling_report(10, 1e-3, [1, 4, 16, 64])
    eps = [r.epsilon for r in rep.rows]
    assert all(b < a for a, b in zip(eps, eps[1:]))
    assert -0.5 - 0.15 <= rep.slope <= -0.5 + 0.15
    first = rep.rows[0]
    assert first.pool == min_pool_for_miss_prob(10, 1e-3).c_star
    assert first.epsilon == pytest.approx(first.pool / 10 - 1)
    # k=1 needs more than 100% buffer at this target and is flagged
    assert first.flagged and not any(r.flagged for r in rep.rows[1:])
    for r in rep.rows:
        assert erlang_loss(r.k * 10, math.ceil((1 + r.epsilon) * r.k * 10 - 1e-9)) <= 1e-3
        assert erlang_loss(r.k * 10, r.pool - 1) > 1e-3


def test_precruit_rate():
    assert precruit_rate(4, 2) == 8
    assert precruit_rate(0, 5) == 0
    assert precruit_rate(9, 0) == 9
    with pytest.raises(DomainError):
        precruit_rate(-1, 1)
