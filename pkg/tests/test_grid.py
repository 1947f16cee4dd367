import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigloc.grid import (DirichletGroundState, GridTooCoarseError, directional_grad_sq,
                         discretize, dump_field, field_to_csv, ground_state, load_field,
                         log_concavity_audit, norms, rayleigh_quotient, richardson,
                         schrodinger_ground)
from eigloc.zoo import build, make_box

from conftest import rotation2
from oracles import j01


def test_unit_square_matches_discrete_formula():
    h = 1 / 16
    pair = ground_state(discretize(make_box([1, 1]), h))
    exact = 8 / h**2 * math.sin(math.pi * h / 2) ** 2
    assert pair.eigenvalue == pytest.approx(exact, rel=1e-9)


def test_box_4x1_discrete_formula(box41):
    _, disc, pair = box41
    h = disc.spacing
    exact = 4 / h**2 * (math.sin(math.pi * h / 8) ** 2 + math.sin(math.pi * h / 2) ** 2)
    assert pair.eigenvalue == pytest.approx(exact, rel=1e-9)
    assert pair.field.values.max() == pytest.approx(1.0)
    assert pair.field.values[pair.field.inside].min() > 0


def test_disk_extrapolates_to_bessel_zero():
    body = build("disk R=1")
    inr = body.chebyshev[1]
    hs = [inr / 16, inr / 32, inr / 64]
    lam, err, _ = richardson(hs, [ground_state(discretize(body, h)).eigenvalue for h in hs])
    # the 256-gon has slightly less area than the disk, so its eigenvalue is a bit larger
    assert lam == pytest.approx(j01() ** 2, rel=5e-3)


def test_rotated_box_converges():
    body = make_box([2, 1]).transformed(rotation2(0.4), np.zeros(2))
    hs = [1 / 16, 1 / 32, 1 / 64]
    lam, _, _ = richardson(hs, [ground_state(discretize(body, h)).eigenvalue for h in hs])
    assert lam == pytest.approx(math.pi**2 * 1.25, rel=2e-3)


def test_green_identity_exact(disk):
    _, disc, pair = disk
    l2, _ = norms(pair.field)
    grad = sum(directional_grad_sq(pair.field, j) for j in range(2))
    assert grad == pytest.approx(pair.eigenvalue * l2**2, rel=1e-9)
    assert rayleigh_quotient(disc, pair.field.values) == pytest.approx(pair.eigenvalue, rel=1e-9)


def test_box_norms(box41):
    _, _, pair = box41
    l2, sup = norms(pair.field)
    # sin(pi x / 4) sin(pi y) on [0,4]x[0,1]: ||u||_2 = 1
    assert l2 == pytest.approx(1.0, rel=1e-6)
    assert sup == pytest.approx(1.0)


def test_too_coarse():
    with pytest.raises(GridTooCoarseError):
        discretize(make_box([1, 1]), 0.6)


def test_richardson_exact_on_power_law():
    hs = [0.4, 0.2, 0.1]
    v, err, p = richardson(hs, [3 + 5 * h**2 for h in hs])
    assert v == pytest.approx(3, abs=1e-12) and p == pytest.approx(2)
    v, _, p = richardson(hs, [3 + 5 * h**1.5 for h in hs])
    assert v == pytest.approx(3, abs=1e-12) and p == pytest.approx(1.5)
    _, _, p = richardson(hs, [3 + 5 * h**3 for h in hs])
    assert p == 2.0
    with pytest.raises(ValueError):
        richardson([0.1, 0.2, 0.4], [1, 2, 3])
    with pytest.raises(ValueError):
        richardson(hs, [1, 2, 1])


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10), st.floats(0.1, 10), st.floats(1, 2), st.floats(1.5, 3))
def test_richardson_recovers_limit(v, c, p, ratio):
    hs = [0.5, 0.5 / ratio, 0.5 / ratio**2]
    est, _, p_est = richardson(hs, [v + c * h**p for h in hs])
    assert est == pytest.approx(v, abs=1e-9 * (1 + abs(v) + c))
    assert p_est == pytest.approx(p, abs=1e-6)


def test_dump_roundtrip(disk):
    f = disk[2].field
    g = load_field(dump_field(f))
    assert np.array_equal(g.values, f.values) and np.array_equal(g.inside, f.inside)
    assert np.array_equal(g.frac, f.frac) and g.spacing == f.spacing
    with pytest.raises(ValueError):
        load_field(b"nope")
    text = field_to_csv(f)
    assert text.startswith("# dim 2\n")
    assert len(text.splitlines()) == 5 + f.values.size


def test_schrodinger_1d_matches_dense():
    x = np.linspace(0.05, 2.95, 59)
    widths = 1.0 + 0.3 * np.sin(x)
    step = x[1] - x[0]
    pot = math.pi**2 / widths**2
    dense = (np.diag(2 / step**2 + pot) - np.diag(np.ones(58), 1) / step**2
             - np.diag(np.ones(58), -1) / step**2)
    ref = np.linalg.eigvalsh(dense)[0]
    pair = schrodinger_ground(widths, step, x[0])
    assert pair.eigenvalue == pytest.approx(ref, rel=1e-10)
    assert pair.field.coords(0) == pytest.approx(x)


def test_schrodinger_2d_matches_dense():
    w = np.full((6, 5), 2.0)
    h = 0.25
    pair = schrodinger_ground(w, h)
    exact = (4 / h**2) * (math.sin(math.pi / 14) ** 2 + math.sin(math.pi / 12) ** 2) + math.pi**2 / 4
    assert pair.eigenvalue == pytest.approx(exact, rel=1e-10)
    with pytest.raises(ValueError):
        schrodinger_ground([1.0, 0.0], 0.1)


def test_log_concavity_box(box41):
    bad, worst = log_concavity_audit(box41[2].field)
    assert bad == 0 and worst >= 1 - 1e-9


def test_estimator(box41):
    est = DirichletGroundState(fractions=(1 / 8, 1 / 16, 1 / 32)).fit(make_box([2, 1]))
    assert est.eigenvalue_ == pytest.approx(math.pi**2 * 1.25, rel=1e-3)
    assert est.predict([[1.0, 0.5]])[0] == pytest.approx(1.0, abs=1e-9)
    assert est.predict([[5.0, 0.5]])[0] == 0.0
    with pytest.raises(TypeError):
        DirichletGroundState().fit(np.zeros((3, 2)))
