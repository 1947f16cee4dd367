import math

import pytest

from eigloc.bounds import (BoundReport, check_chiti, check_gradient, check_levelset_volume,
                           check_main, check_slice_bound, chiti_constant, john_lengths,
                           levelset_audit, levelset_ellipsoid, levelset_hull, rayleigh_test_function,
                           best_rayleigh, slice_max_norm)
from eigloc.geometry import contains_many, john_ellipsoid
from eigloc.sections import mu_star

from oracles import chiti_2d, disk_half_level_radius


def test_chiti_constants_against_series():
    assert chiti_constant(2) == pytest.approx(chiti_2d(), rel=1e-12)
    assert chiti_constant(2) == pytest.approx(0.920164980758676, rel=1e-12)
    assert chiti_constant(3) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        chiti_constant(4)


def test_chiti_disk_is_nearly_sharp(disk):
    body, _, pair = disk
    rep = check_chiti(body, pair)
    assert rep.passed and rep.ratio == pytest.approx(1.0, abs=5e-3)


def test_box_main_and_gradient(box41):
    body, _, pair = box41
    ell, N = john_lengths(body)
    assert N == pytest.approx([2, 0.5], rel=1e-7)
    rep = check_main(body, pair, N)
    assert rep.rhs == pytest.approx(0.5 * 4 ** (1 / 6), rel=1e-9)
    assert rep.ratio == pytest.approx(1 / (0.5 * 4 ** (1 / 6)), rel=1e-4)
    g1, g2 = check_gradient(body, pair, ell)
    assert g1.meta["grad_over_l2"] == pytest.approx(math.pi / 4, rel=1e-3)
    assert g2.meta["grad_over_l2"] == pytest.approx(math.pi, rel=1e-3)


def test_report_row():
    rep = BoundReport("x", "b", 1.0, 2.0, passed=True)
    assert rep.row()["pass"] == "true" and rep.ratio == 0.5
    assert BoundReport("x", "b", 1.0, 0.0).row()["pass"] == ""


def test_disk_level_set(disk):
    _, _, pair = disk
    ell, M = levelset_ellipsoid(pair, 0.5)
    assert M == pytest.approx([disk_half_level_radius()] * 2, rel=1e-2)
    assert levelset_audit(pair, 0.5) == 0


def test_box_level_set_volume(box41):
    body, _, pair = box41
    ell, M = levelset_ellipsoid(pair, 0.5)
    rep = check_levelset_volume(body, pair, M)
    # ||u||_2^2 = 1 against the product of the half-level semi-axes
    assert rep.lhs == pytest.approx(1.0, rel=1e-5)
    assert rep.ratio == pytest.approx(2.25, rel=2e-2)
    assert ell.center == pytest.approx([2, 0.5], abs=1e-3)


def test_level_sets_nest(box41):
    _, _, pair = box41
    inner = levelset_hull(pair, 0.8)
    outer = levelset_hull(pair, 0.4)
    assert contains_many(outer, inner.V, tol=1e-9).all()
    with pytest.raises(ValueError):
        levelset_hull(pair, 1.5)


def test_box_slice_norms(box41):
    _, _, pair = box41
    # int sin^2(pi y) dy = 1/2 and int sin^2(pi x/4) dx = 2
    _, b1 = slice_max_norm(pair, [1.0, 0.0])
    _, b2 = slice_max_norm(pair, [0.0, 1.0])
    assert b1 == pytest.approx(0.5, rel=2e-3)
    assert b2 == pytest.approx(2.0, rel=2e-3)


def test_slice_bound_reports(box41):
    body, _, pair = box41
    john = john_ellipsoid(body)
    level, _ = levelset_ellipsoid(pair, 0.5)
    main, lvl = check_slice_bound(body, pair, 1, john, level)
    assert main.lhs == pytest.approx(1.0, rel=1e-6)
    assert main.meta["t_star"] == pytest.approx(2.0, abs=1e-2)


def test_rayleigh_dominates_eigenvalue(sector16):
    body, disc, pair = sector16
    spec = mu_star(body, 1)
    ell = john_ellipsoid(body)
    rq, tf = best_rayleigh(body, disc, spec, ell)
    assert rq >= pair.eigenvalue * (1 - 1e-9)
    assert rq - spec.mu_star > 0
    single, _ = rayleigh_test_function(body, disc, spec, ell)
    assert single >= rq * (1 - 1e-12)
