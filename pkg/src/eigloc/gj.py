"""Planar width profile, the length scale L and the 1D surrogate operator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport
from .geometry import ConvexBody, DegenerateBodyError, cross_section, support_width
from .grid import EigenPair, norms, richardson, schrodinger_ground


@dataclass(frozen=True)
class WidthProfile:
    """Concave piecewise-linear height h on [a, b] with max h = 1.

    ``scale`` maps body lengths to profile lengths, ``rotation`` maps body
    coordinates into the frame where the minimal-width direction is vertical,
    ``shift`` is subtracted from the rotated x1 afterwards.
    """

    xs: np.ndarray
    hs: np.ndarray
    scale: float = 1.0
    rotation: np.ndarray = None
    shift: float = 0.0
    concavify_delta: float = 0.0

    @property
    def a(self) -> float:
        return float(self.xs[0])

    @property
    def b(self) -> float:
        return float(self.xs[-1])

    def __call__(self, x):
        return np.interp(x, self.xs, self.hs, left=0.0, right=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "h"])
        for x, h in zip(self.xs, self.hs):
            w.writerow([f"{x:.17g}", f"{h:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "WidthProfile":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        arr = np.array([[float(x), float(h)] for x, h in rows])
        return cls(arr[:, 0], arr[:, 1])


def upper_hull(xs, hs):
    """Least concave majorant through a subset of the breakpoints."""
    keep = []
    for i in range(len(xs)):
        while len(keep) >= 2:
            i0, i1 = keep[-2], keep[-1]
            cross = (xs[i1] - xs[i0]) * (hs[i] - hs[i0]) - (hs[i1] - hs[i0]) * (xs[i] - xs[i0])
            if cross >= 0:
                keep.pop()
            else:
                break
        keep.append(i)
    return np.asarray(xs)[keep], np.asarray(hs)[keep]


def min_width_direction(body: ConvexBody, scan: int = 512) -> np.ndarray:
    th = np.pi * np.arange(scan) / scan
    cands = [np.c_[np.cos(th), np.sin(th)], body.H[0]]
    dirs = np.vstack(cands)
    widths = np.array([support_width(body, d) for d in dirs])
    d = dirs[int(np.argmin(widths))]
    if d[1] < 0 or (d[1] == 0 and d[0] < 0):
        d = -d
    return d


def width_profile(body: ConvexBody, scan: int = 512) -> WidthProfile:
    """Rotate the minimal-width direction onto x2, then rescale so max h = 1."""
    if body.dim != 2:
        raise ValueError("width profile needs a planar body")
    d = min_width_direction(body, scan)
    rot = np.array([[d[1], -d[0]], [d[0], d[1]]])
    verts = body.V @ rot.T
    turned = body.transformed(rot, np.zeros(2))
    xs = np.unique(np.round(verts[:, 0], 12))
    hs = []
    for x in xs:
        sec = cross_section(turned, [0], [x])
        hs.append(0.0 if sec is None else float(sec.V[-1, 0] - sec.V[0, 0]))
    hs = np.array(hs)
    if hs.max() <= 0:
        raise DegenerateBodyError("degenerate body: zero width profile")
    cx, ch = upper_hull(xs, hs)
    delta = float(np.max(np.interp(xs, cx, ch) - hs))
    s = 1.0 / ch.max()
    shift = float(cx[0])
    return WidthProfile((cx - shift) * s, ch * s, s, rot, shift * s, delta * s)


def superlevel_length(profile: WidthProfile, c: float) -> float:
    """Length of {h >= c} (a single interval by concavity)."""
    xs, hs = profile.xs, profile.hs
    above = np.flatnonzero(hs >= c)
    if len(above) == 0:
        return 0.0
    i, j = above[0], above[-1]
    left = xs[i]
    if i > 0:
        left = xs[i - 1] + (c - hs[i - 1]) / (hs[i] - hs[i - 1]) * (xs[i] - xs[i - 1])
    right = xs[j]
    if j < len(xs) - 1:
        right = xs[j] + (hs[j] - c) / (hs[j] - hs[j + 1]) * (xs[j + 1] - xs[j])
    return float(right - left)


def length_scale_L(profile: WidthProfile, rtol: float = 1e-12) -> float:
    """Largest L with h >= 1 - L^-2 on an interval of length L."""
    span = profile.b - profile.a

    def ok(L):
        return superlevel_length(profile, 1.0 - L**-2) >= L * (1 - 1e-14)

    if ok(span):
        return span
    grid = np.geomspace(min(1e-3, span), span, 4000)
    good = [L for L in grid if ok(L)]
    if not good:
        return 0.0
    lo = good[-1]
    hi = grid[np.searchsorted(grid, lo) + 1]
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _diameter(points: np.ndarray) -> float:
    from scipy.spatial.distance import pdist
    return float(pdist(points).max()) if len(points) > 1 else 0.0


def check_gj(body: ConvexBody, pair: EigenPair, profile: WidthProfile = None,
             level_hull: ConvexBody = None):
    """diam(Omega_{1/2}) / L and ||u||_2 / (L^{1/2} ||u||_inf), in normalized units."""
    from .bounds import levelset_hull
    profile = profile or width_profile(body)
    L = length_scale_L(profile)
    hull = level_hull or levelset_hull(pair, 0.5)
    s = profile.scale
    l2, sup = norms(pair.field)
    diam = _diameter(hull.V) * s
    meta = {"L": L, "scale": s}
    return [BoundReport("gj_diameter", body.label, diam, L, meta=meta),
            BoundReport("gj_l2", body.label, l2 * s, math.sqrt(L) * sup, meta=meta)]


def surrogate_ground(profile: WidthProfile, spacings=(1 / 16, 1 / 32, 1 / 64)):
    """Extrapolated ground eigenvalue of -d^2/dx^2 + pi^2/h^2 and the finest eigenpair."""
    vals, pair = [], None
    for dx in spacings:
        count = int(math.ceil((profile.b - profile.a) / dx))
        x = profile.a + (profile.b - profile.a) * np.arange(1, count) / count
        step = (profile.b - profile.a) / count
        pair = schrodinger_ground(profile(x), step, profile.a + step)
        vals.append(pair.eigenvalue)
    lam, err, _ = richardson(spacings, vals)
    return lam, err, pair


def half_max_length(pair: EigenPair) -> float:
    f = pair.field
    u = np.where(f.inside, f.values, 0.0) / f.values[f.inside].max()
    x = f.coords(0)
    above = np.flatnonzero(u >= 0.5)
    i, j = above[0], above[-1]
    left = x[i] - (u[i] - 0.5) / (u[i] - u[i - 1]) * (x[i] - x[i - 1]) if i > 0 else x[i]
    right = x[j] + (u[j] - 0.5) / (u[j] - u[j + 1]) * (x[j + 1] - x[j]) if j + 1 < len(x) else x[j]
    return float(right - left)


def surrogate_compare(body: ConvexBody, lam: float, M1: float = None,
                      profile: WidthProfile = None, spacings=(1 / 16, 1 / 32, 1 / 64)):
    """Relative eigenvalue gap |lam_L - lam|/lam and, if ``M1`` is given, the 1D
    half-max length against the level-set diameter 2 M1 (both in body units)."""
    profile = profile or width_profile(body)
    s = profile.scale
    lam_l, err, pair = surrogate_ground(profile, spacings)
    lam_norm = lam / s**2
    out = [BoundReport("surrogate_eigenvalue", body.label, abs(lam_l - lam_norm), lam_norm,
                       err / lam_norm, meta={"lambda_L": lam_l * s**2})]
    if M1 is not None:
        out.append(BoundReport("surrogate_halfmax", body.label, half_max_length(pair) / s,
                               2 * M1))
    return out
