"""Named domain families and random convex test bodies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (ConvexBody, DegenerateBodyError, body_from_vertices,
                       convex_hull)

KINDS = ("box", "sector2d", "cone_sector", "trapezoid", "slab3d", "random_polytope", "disk")
DEFAULT_CHORDS = 256


def make_box(lengths) -> ConvexBody:
    ell = np.asarray(lengths, dtype=float).ravel()
    if np.any(ell <= 0):
        raise ValueError("box lengths must be positive")
    n = len(ell)
    corners = np.array(np.meshgrid(*[[0.0, x] for x in ell], indexing="ij")).reshape(n, -1).T
    normals = np.vstack([-np.eye(n), np.eye(n)])
    offsets = np.concatenate([np.zeros(n), ell])
    return ConvexBody(n, corners, normals, offsets,
                      label="box " + "x".join(_num(x) for x in ell))


def make_disk(radius: float = 1.0, chords: int = DEFAULT_CHORDS) -> ConvexBody:
    """Regular ``chords``-gon inscribed in the circle of the given radius."""
    if radius <= 0 or chords < 3:
        raise ValueError("need radius > 0 and at least 3 chords")
    th = 2 * np.pi * np.arange(chords) / chords
    return body_from_vertices(radius * np.c_[np.cos(th), np.sin(th)],
                              label=f"disk R={_num(radius)}")


def make_sector2d(radius: float, half_angle: float, chords: int = DEFAULT_CHORDS) -> ConvexBody:
    """Circular sector ``0 < r < R, |theta| <= eps`` about the positive x1-axis;
    the arc is replaced by ``chords`` chords with endpoints on the circle."""
    if radius <= 0 or not 0 < half_angle < math.pi / 2:
        raise ValueError("need R > 0 and 0 < eps < pi/2")
    th = np.linspace(-half_angle, half_angle, chords + 1)
    pts = np.vstack([[0.0, 0.0], radius * np.c_[np.cos(th), np.sin(th)]])
    return body_from_vertices(pts, label=f"sector2d R={_num(radius)} eps={_num(half_angle)}")


def sector_half_angle_for_inradius(radius: float, inradius: float = 1.0) -> float:
    """Half-angle of the smooth sector of radius R whose incircle has the given radius,
    from ``r = R sin(eps) / (1 + sin(eps))``."""
    if not 0 < 2 * inradius < radius:
        raise ValueError("need 0 < 2 r < R")
    return math.asin(inradius / (radius - inradius))


def sector_chord_sagitta(radius: float, half_angle: float, chords: int = DEFAULT_CHORDS) -> float:
    return radius * (1 - math.cos(half_angle / chords))


def make_cone_sector(n: int, radius: float, half_angle: float = 0.5,
                     ring: int = 16) -> ConvexBody:
    """Cone of half-opening ``half_angle`` about e1, apex at 0, truncated at ``radius``.
    For n = 3 the spherical cap is approximated by two staggered ``ring``-gons and
    the cap center."""
    if n not in (2, 3):
        raise ValueError("cone sectors are supported for n in {2, 3}")
    if radius <= 2:
        raise ValueError("need N1 > 2")
    if n == 2:
        body = make_sector2d(radius, half_angle)
    else:
        pts = [[0.0, 0.0, 0.0], [radius, 0.0, 0.0]]
        for polar, phase in ((half_angle, 0.0), (half_angle / 2, math.pi / ring)):
            phi = 2 * np.pi * np.arange(ring) / ring + phase
            pts += list(radius * np.c_[np.full(ring, math.cos(polar)),
                                       math.sin(polar) * np.cos(phi),
                                       math.sin(polar) * np.sin(phi)])
        body = body_from_vertices(np.array(pts))
    object.__setattr__(body, "label", f"cone_sector n={n} N1={_num(radius)}")
    return body


def trapezoid_height(x, plateau: float, ramp: float):
    x = np.asarray(x, dtype=float)
    return np.where(x <= plateau, 1.0, 1.0 - (x - plateau) / ramp)


def make_trapezoid(plateau: float, ramp: float) -> ConvexBody:
    """``{0 <= x1 <= R+T, 0 <= x2 <= h(x1)}``: a unit-height plateau of length R
    followed by a linear ramp of length T down to zero."""
    if plateau < 0 or ramp < 0:
        raise ValueError("R and T must be nonnegative")
    if ramp == 0:
        raise ValueError("T must be positive (use make_box for rectangles)")
    pts = [[0.0, 0.0], [plateau + ramp, 0.0], [0.0, 1.0]]
    if plateau > 0:
        pts.append([plateau, 1.0])
    body = body_from_vertices(np.array(pts))
    object.__setattr__(body, "label", f"trapezoid R={_num(plateau)} T={_num(ramp)}")
    return body


def make_slab3d(base: ConvexBody, heights) -> ConvexBody:
    """``{(x, y, z): (x, y) in base, 0 <= z <= h(x, y)}`` for h concave and
    piecewise affine, given by its values at the base vertices (array or callable).
    """
    if base.dim != 2:
        raise ValueError("slab base must be two-dimensional")
    verts = base.V
    h = np.asarray(heights(verts) if callable(heights) else heights, dtype=float).ravel()
    if h.shape != (len(verts),):
        raise ValueError("one height per base vertex required")
    if np.any(h < 0) or not np.any(h > 0):
        raise ValueError("heights must be nonnegative and not all zero")
    top = np.c_[verts, h]
    bottom = np.c_[verts, np.zeros(len(verts))]
    body = convex_hull(np.vstack([bottom, top[h > 0]]))
    # the upper envelope must pass through every prescribed height
    a, b = body.H
    upper = a[:, 2] > 1e-12
    for (x, y), hv in zip(verts, h):
        zmax = np.min((b[upper] - a[upper, 0] * x - a[upper, 1] * y) / a[upper, 2])
        if zmax > hv + 1e-9 * max(1.0, hv):
            raise ValueError("height not concave")
    object.__setattr__(body, "label", "slab3d")
    return body


def random_polytope(n: int, m: int, seed: int, max_retries: int = 16) -> ConvexBody:
    """Hull of m uniform points in an anisotropic box with seed-derived aspect in [1, 32]."""
    if m < n + 1:
        raise ValueError("need m >= n + 1 points")
    rng = np.random.default_rng(seed)
    aspect = math.exp(rng.uniform(0.0, math.log(32.0)))
    mids = np.sort(np.exp(rng.uniform(0.0, math.log(aspect), size=max(n - 2, 0))))[::-1]
    lengths = np.concatenate([[aspect], mids, [1.0]]) if n > 1 else np.array([aspect])
    for _ in range(max_retries):
        pts = rng.random((m, n)) * lengths
        try:
            body = convex_hull(pts)
        except DegenerateBodyError:
            continue
        object.__setattr__(body, "label", f"random n={n} m={m} seed={seed}")
        return body
    raise DegenerateBodyError("degenerate body: random hull retries exhausted")


# -- one-line spec form --------------------------------------------------------

def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


_KIND_ALIASES = {"random": "random_polytope", "cone": "cone_sector"}
_CANONICAL_WORD = {"random_polytope": "random", "cone_sector": "cone_sector"}


@dataclass(frozen=True)
class DomainSpec:
    """Parsed one-line domain description, e.g. ``"trapezoid R=10 T=1000"``.

    ``box`` takes positional lengths (``"box 4x1"``); other kinds take
    ``key=value`` pairs. ``sector2d`` accepts ``eps=`` or ``r=`` (inradius).
    """

    kind: str
    params: tuple = field(default_factory=tuple)

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    @classmethod
    def parse(cls, text: str) -> "DomainSpec":
        words = text.split()
        if not words:
            raise ValueError("empty domain spec")
        kind = _KIND_ALIASES.get(words[0], words[0])
        if kind not in KINDS:
            raise ValueError(f"unknown domain kind {words[0]!r}")
        params = []
        if kind == "box":
            if len(words) != 2:
                raise ValueError("box spec is 'box L1xL2[x...]'")
            params.append(("lengths", tuple(float(t) for t in words[1].split("x"))))
        else:
            for w in words[1:]:
                key, _, val = w.partition("=")
                if not val:
                    raise ValueError(f"bad parameter {w!r}")
                params.append((key, float(val)))
        spec = cls(kind, tuple(params))
        spec._validate()
        return spec

    def _validate(self):
        for key, val in self.params:
            vals = val if isinstance(val, tuple) else (val,)
            if key not in ("seed",) and any(v <= 0 for v in vals):
                if not (self.kind == "trapezoid" and key == "R" and vals[0] == 0):
                    raise ValueError(f"parameter {key} must be positive")

    def format(self) -> str:
        word = _CANONICAL_WORD.get(self.kind, self.kind)
        if self.kind == "box":
            return "box " + "x".join(_num(x) for x in self.param("lengths"))
        return " ".join([word] + [f"{k}={_num(v)}" for k, v in self.params])

    __str__ = format

    def build(self) -> ConvexBody:
        p = dict(self.params)
        k = self.kind
        if k == "box":
            body = make_box(p["lengths"])
        elif k == "disk":
            body = make_disk(p.get("R", 1.0), int(p.get("chords", DEFAULT_CHORDS)))
        elif k == "sector2d":
            eps = p["eps"] if "eps" in p else sector_half_angle_for_inradius(p["R"], p["r"])
            body = make_sector2d(p["R"], eps, int(p.get("chords", DEFAULT_CHORDS)))
        elif k == "cone_sector":
            body = make_cone_sector(int(p["n"]), p["N1"])
        elif k == "trapezoid":
            body = make_trapezoid(p["R"], p["T"])
        elif k == "slab3d":
            base = make_box([p["L1"], p["L2"]])
            slope = p["T"]
            body = make_slab3d(base, lambda v: 1.0 - v[:, 0] / slope)
        elif k == "random_polytope":
            body = random_polytope(int(p["n"]), int(p["m"]), int(p["seed"]))
        else:  # pragma: no cover - guarded by parse
            raise ValueError(k)
        object.__setattr__(body, "label", self.format())
        return body


def build(text: str) -> ConvexBody:
    return DomainSpec.parse(text).build()
