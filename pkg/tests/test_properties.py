"""Invariants on random convex bodies, on coarse grids."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from eigloc.bounds import levelset_hull
from eigloc.geometry import contains_many
from eigloc.grid import discretize, ground_state, log_concavity_audit
from eigloc.sections import mu_star
from eigloc.zoo import random_polytope

SETTINGS = settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 10**6)


def coarse(body, fraction=1 / 8):
    return ground_state(discretize(body, fraction * body.chebyshev[1]))


def small_body(seed):
    body = random_polytope(2, 10, seed)
    lo, hi = body.bbox()
    assume(np.prod(hi - lo) / body.chebyshev[1] ** 2 < 60)
    return body


@SETTINGS
@given(seeds)
def test_positive_and_normalized(seed):
    pair = coarse(small_body(seed))
    u = pair.field.values[pair.field.inside]
    assert u.min() > 0 and u.max() == pytest.approx(1.0)


@SETTINGS
@given(seeds)
def test_log_concave(seed):
    bad, _ = log_concavity_audit(coarse(small_body(seed)).field, samples=2000)
    assert bad == 0


@SETTINGS
@given(seeds, st.floats(0.55, 0.9))
def test_level_sets_nest(seed, c):
    pair = coarse(small_body(seed))
    inner, outer = levelset_hull(pair, c), levelset_hull(pair, c - 0.3)
    assert contains_many(outer, inner.V, tol=1e-9).all()


@SETTINGS
@given(seeds, st.floats(0.25, 4.0))
def test_scaling(seed, t):
    body = small_body(seed)
    lam = coarse(body).eigenvalue
    big = body.transformed(t * np.eye(2), np.zeros(2))
    assert coarse(big).eigenvalue * t**2 == pytest.approx(lam, rel=1e-6)


@SETTINGS
@given(seeds)
def test_domain_monotone(seed):
    body = small_body(seed)
    c, r = body.chebyshev
    bigger = body.transformed(1.2 * np.eye(2), -0.2 * c)
    h = r / 8
    assert ground_state(discretize(bigger, h)).eigenvalue < ground_state(discretize(body, h)).eigenvalue


@SETTINGS
@given(seeds)
def test_eigenvalue_exceeds_section_minimum(seed):
    body = small_body(seed)
    pair = ground_state(discretize(body, body.chebyshev[1] / 16))
    spec = mu_star(body, 1)
    assert pair.eigenvalue > spec.mu_star
    assert math.isfinite(spec.mu_star)
