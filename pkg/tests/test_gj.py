import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigloc.gj import (WidthProfile, half_max_length, length_scale_L, superlevel_length,
                       surrogate_ground, upper_hull, width_profile)
from eigloc.zoo import build

from oracles import cubic_L


def profile(xs, hs):
    return WidthProfile(np.asarray(xs, float), np.asarray(hs, float))


def test_plateau_and_ramp_closed_forms():
    assert length_scale_L(profile([0, 7], [1, 1])) == 7
    # h = x / 1000: superlevel length 1000 L^-2 = L at L = 10
    assert length_scale_L(profile([0, 1000], [0, 1])) == pytest.approx(10, rel=1e-10)


def test_trapezoid_matches_cubic():
    # plateau R then ramp T: L^3 - R L^2 - T = 0
    for R, T in [(10, 1000), (0, 64), (32, 32)]:
        prof = profile([0, R, R + T], [1, 1, 0]) if R else profile([0, T], [1, 0])
        assert length_scale_L(prof) == pytest.approx(cubic_L(R, T), rel=1e-10)
    assert cubic_L(10, 1000) == pytest.approx(14.65571231876768, rel=1e-12)


def test_box_profile():
    prof = width_profile(build("box 4x1"))
    assert prof.scale == pytest.approx(1.0)
    assert (prof.a, prof.b) == pytest.approx((0.0, 4.0))
    assert length_scale_L(prof) == pytest.approx(4.0)


def test_trapezoid_body_profile():
    prof = width_profile(build("trapezoid R=10 T=1000"))
    assert prof.b - prof.a == pytest.approx(1010, rel=1e-6)
    assert length_scale_L(prof) == pytest.approx(cubic_L(10, 1000), rel=1e-4)


def test_superlevel_and_hull():
    prof = profile([0, 2, 4], [0, 1, 0])
    assert superlevel_length(prof, 0.5) == pytest.approx(2.0)
    assert superlevel_length(prof, 2.0) == 0.0
    cx, ch = upper_hull([0, 1, 2, 3], [0, 0.2, 1, 0])
    assert list(cx) == [0, 2, 3]


def test_csv_roundtrip():
    prof = profile([0, 0.3, 5], [0.2, 1, 0.1])
    again = WidthProfile.from_csv(prof.to_csv())
    assert np.array_equal(again.xs, prof.xs) and np.array_equal(again.hs, prof.hs)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 50), st.floats(1, 500), st.floats(0.01, 0.9))
def test_L_monotone_in_height(R, T, lift):
    low = profile([0, R, R + T], [1, 1, 0])
    high = profile([0, R, R + T], [1, 1, lift])
    assert length_scale_L(high) >= length_scale_L(low) * (1 - 1e-9)


def test_surrogate_box():
    # constant width 1 on [0, 4]: pi^2 (1 + 1/16)
    lam, err, pair = surrogate_ground(profile([0, 4], [1, 1]))
    assert lam == pytest.approx(math.pi**2 * (1 + 1 / 16), rel=1e-6)
    # sin(pi x / 4) is at half max on [2/3, 10/3]
    assert half_max_length(pair) == pytest.approx(8 / 3, rel=1e-3)
