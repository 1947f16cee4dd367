"""Numerical checks of the L2, gradient, eigenvalue and level-set bounds.

Checks whose constants are unknown report ``ratio = lhs / rhs`` with
``passed=None``; only constant-free inequalities produce a pass flag. All
length factors are written in scale-invariant form (powers of the smallest
John semi-axis N_n), so reports coincide with the John-frame values.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special
from scipy.spatial import ConvexHull, QhullError

from .config import TOL
from .geometry import ConvexBody, Ellipsoid, contains_many, convex_hull, john_ellipsoid, radii
from .grid import (Discretization, EigenPair, GridField, directional_grad_sq, norms,
                   rayleigh_quotient)
from .sections import SectionSpectrum


class GeometryFailure(RuntimeError):
    """The test-function window or cone does not fit inside the body."""


@dataclass
class BoundReport:
    check_id: str
    body: str
    lhs: float
    rhs: float
    err: float = 0.0
    passed: Optional[bool] = None
    meta: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs != 0 else math.inf

    def row(self) -> dict:
        return {"check_id": self.check_id, "body": self.body, "lhs": self.lhs, "rhs": self.rhs,
                "ratio": self.ratio, "err": self.err,
                "pass": "" if self.passed is None else str(bool(self.passed)).lower()}


# -- Chiti ---------------------------------------------------------------------------

def chiti_constant(n: int) -> float:
    """||u||_2 / ||u||_inf for the ground state of the unit ball."""
    if n == 2:
        j = special.jn_zeros(0, 1)[0]
        val, _ = integrate.quad(lambda r: special.j0(j * r) ** 2 * r, 0.0, 1.0,
                                epsabs=1e-13, epsrel=1e-13)
        return math.sqrt(2 * math.pi * val)
    if n == 3:
        val, _ = integrate.quad(lambda r: np.sinc(r) ** 2 * r * r, 0.0, 1.0,
                                epsabs=1e-13, epsrel=1e-13)
        return math.sqrt(4 * math.pi * val)
    raise ValueError("chiti_constant supports n in {2, 3}")


def check_chiti(body: ConvexBody, pair: EigenPair, err: float = 0.005) -> BoundReport:
    l2, sup = norms(pair.field)
    inr, _ = radii(body)
    rhs = chiti_constant(body.dim) * inr ** (body.dim / 2) * sup
    return BoundReport("chiti", body.label, l2, rhs, err, l2 >= rhs * (1 - err))


# -- L2 norm and gradients ---------------------------------------------------------------

def john_lengths(body: ConvexBody) -> tuple[Ellipsoid, np.ndarray]:
    ell = john_ellipsoid(body)
    return ell, ell.semi_axes


def check_main(body: ConvexBody, pair: EigenPair, lengths=None) -> BoundReport:
    if lengths is None:
        lengths = john_lengths(body)[1]
    N = np.asarray(lengths, dtype=float)
    n = len(N)
    l2, sup = norms(pair.field)
    rhs = N[-1] ** (n / 2) * float(np.prod((N[:-1] / N[-1]) ** (1 / 6))) * sup
    return BoundReport("main", body.label, l2, rhs, meta={"N": N.tolist()})


def gradient_gram(field: GridField) -> np.ndarray:
    """Matrix G with v^T G v ~ ||d_v u||^2. Diagonal entries are the exact
    staggered norms; off-diagonals use centered differences."""
    n = field.dim
    G = np.zeros((n, n))
    for j in range(n):
        G[j, j] = directional_grad_sq(field, j)
    if n > 1:
        u = np.where(field.inside, field.values, 0.0)
        grads = np.gradient(u, field.spacing)
        w = field.weights * field.spacing**n
        for i, j in itertools.combinations(range(n), 2):
            G[i, j] = G[j, i] = float((w * grads[i] * grads[j]).sum())
    return G


def check_gradient(body: ConvexBody, pair: EigenPair, ellipsoid: Optional[Ellipsoid] = None):
    """Per John axis j: r_j = ||d_j u|| / ||u|| * N_n^{2/3} N_j^{1/3}."""
    ell = ellipsoid or john_ellipsoid(body)
    N = ell.semi_axes
    l2, _ = norms(pair.field)
    G = gradient_gram(pair.field)
    reports = []
    for j, v in enumerate(ell.directions):
        aligned = np.flatnonzero(np.abs(np.abs(v) - 1) < 1e-9)
        if len(aligned):
            gsq = G[aligned[0], aligned[0]]
        else:
            gsq = float(v @ G @ v)
        ratio_plain = math.sqrt(max(gsq, 0.0)) / l2
        reports.append(BoundReport(f"gradient_{j + 1}", body.label,
                                   ratio_plain * N[-1] ** (2 / 3) * N[j] ** (1 / 3), 1.0,
                                   meta={"grad_over_l2": ratio_plain, "N": N.tolist()}))
    return reports


def check_sandwich(body: ConvexBody, gaps, lengths, tol: float = 1e-6):
    """Lower half: delta_j >= -tol (pass/fail). Upper half: delta_j N_j^{2/3} N_n^{4/3}."""
    N = np.asarray(lengths, dtype=float)
    reports = []
    for j, (d, e) in enumerate(zip(gaps.deltas, gaps.errors)):
        scale = N[j] ** (2 / 3) * N[-1] ** (4 / 3)
        reports.append(BoundReport(f"sandwich_{j + 1}", body.label, d * scale, 1.0, e * scale,
                                   d >= -(tol + e), meta={"delta": d, "delta_err": e}))
    return reports


# -- test-function construction --------------------------------------------------------

def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t * t)


@dataclass
class TestFunctionSpec:
    k: int
    psi: object
    R1: float
    cone_direction: np.ndarray
    cone_half_angle: float
    window_center: np.ndarray
    window_size: float
    origin: np.ndarray
    plane_offset: np.ndarray
    max_cutoff_gradient: float
    params: tuple = ()

    __test__ = False


def _ray_length(body: ConvexBody, start: np.ndarray, direction: np.ndarray) -> float:
    a, b = body.H
    rate = a @ direction
    slack = b - a @ start
    pos = rate > 1e-14
    if not np.any(pos):
        return math.inf
    return float(np.min(slack[pos] / rate[pos]))


def _sphere_directions(k: int, count: int) -> np.ndarray:
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        th = 2 * np.pi * np.arange(count) / count
        return np.c_[np.cos(th), np.sin(th)]
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    th = np.pi * (1 + 5**0.5) * i
    return np.c_[np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)]


def _cutoff_1d(r, d):
    """1 on [d/2, d], 0 outside [d/4, 2d], quintic ramps in between."""
    r = np.asarray(r, dtype=float)
    up = _smoothstep((r - d / 4) / (d / 4))
    down = _smoothstep((2 * d - r) / d)
    return np.where(r <= d, up, down)


def _psi_evaluator(spectrum: SectionSpectrum):
    sec = spectrum.section
    if sec.dim == 1:
        lo, hi = float(sec.V[0, 0]), float(sec.V[1, 0])

        def psi(xp):
            t = xp[:, 0]
            return np.where((t > lo) & (t < hi), np.sin(np.pi * (t - lo) / (hi - lo)), 0.0)
        return psi
    interp = spectrum.psi.field.interpolator()

    def psi(xp):
        vals = interp(xp)
        return np.where(contains_many(sec, xp, 0.0), vals, 0.0)
    return psi


def rayleigh_test_function(body: ConvexBody, disc: Discretization, spectrum: SectionSpectrum,
                           ellipsoid: Optional[Ellipsoid] = None, r1_factor: float = 0.9,
                           theta_factor: float = 0.5, distance_factor: float = 1.0,
                           side_factor: float = 0.5):
    """Rayleigh quotient of ``w = chi(X_k) psi(X' R1 / (R1 - r_k))`` on the grid.

    ``body`` must have its first k John axes along x_1..x_k. The cross-section
    minimizer sits at ``X_k = 0`` and psi is dilated about the X'-coordinates
    of the John center.
    """
    k = spectrum.i
    n = body.dim
    ell = ellipsoid or john_ellipsoid(body)
    N = ell.semi_axes
    unit = N[-1]
    y0 = np.asarray(spectrum.argmin, dtype=float)
    psi = _psi_evaluator(spectrum)
    plane = ell.center[k:].copy()
    origin = np.concatenate([y0, plane])
    dirs = _sphere_directions(k, 720 if k == 2 else 2000)
    full = np.hstack([dirs, np.zeros((len(dirs), n - k))])
    reach = np.array([_ray_length(body, origin, d) for d in full])
    theta = theta_factor * N[k - 1] / N[0] if k > 1 else 0.0
    if k == 1:
        best = int(np.argmax(reach))
        cap_reach = reach[best]
    else:
        cosang = dirs @ dirs.T
        caps = np.where(cosang >= math.cos(theta), reach[None, :], np.inf).min(axis=1)
        best = int(np.argmax(caps))
        cap_reach = caps[best]
    e = dirs[best]
    R1 = r1_factor * cap_reach
    if k == 1:
        d = distance_factor * unit * (N[0] / unit) ** (1 / 3)
        size = d
        far = 2 * d
        grad_bound = (15 / 8) / (d / 4)
    else:
        d = distance_factor * unit * (N[0] / unit) * (N[k - 1] / unit) ** (-2 / 3)
        size = side_factor * unit * (N[k - 1] / unit) ** (1 / 3)
        far = d + size * math.sqrt(k) / 2
        grad_bound = (15 / 8) / (size / 4) * math.sqrt(k)
        half_diag = size * math.sqrt(k) / 2
        if half_diag > d * math.sin(theta):
            raise GeometryFailure("cut-off cube does not fit in the cone")
    if far >= R1:
        raise GeometryFailure(f"cut-off window reaches r={far:.3g} beyond R1={R1:.3g}")
    basis = np.linalg.qr(np.column_stack([e, np.eye(k)]))[0][:, :k]
    if basis[:, 0] @ e < 0:
        basis[:, 0] *= -1

    def evaluate(points):
        xk = points[:, :k] - y0
        xp = points[:, k:]
        r = np.linalg.norm(xk, axis=1)
        if k == 1:
            along = xk[:, 0] * e[0]
            chi = np.where(along > 0, _cutoff_1d(along, d), 0.0)
        else:
            local = (xk - d * e) @ basis / (size / 2)
            chi = np.prod(_smoothstep((1 - np.abs(local)) / 0.5), axis=1)
        out = np.zeros(len(points))
        live = chi > 0
        if np.any(live):
            scale = R1 / (R1 - r[live])
            out[live] = chi[live] * psi(plane + (xp[live] - plane) * scale[:, None])
        return out

    tmpl = disc.template()
    all_idx = np.argwhere(np.ones(tmpl.dims, dtype=bool))
    pts = tmpl.origin + tmpl.spacing * all_idx
    w = evaluate(pts).reshape(tmpl.dims)
    outside = ~tmpl.inside & (w > 1e-12 * max(w.max(), 1e-300))
    if np.any(outside):
        raise GeometryFailure(f"test function nonzero at {int(outside.sum())} nodes outside the body")
    if not np.any(w > 0):
        raise GeometryFailure("test function vanishes identically on the grid")
    rq = rayleigh_quotient(disc, w)
    spec = TestFunctionSpec(k, spectrum.psi, R1, e, theta, d * e, size, origin, plane,
                            grad_bound, (r1_factor, theta_factor, distance_factor))
    return rq, spec


def best_rayleigh(body, disc, spectrum, ellipsoid=None,
                  distance_factors=(0.5, 0.75, 1.0, 1.5, 2.0, 3.0), r1_factor=0.9,
                  theta_factor=0.5):
    """Smallest Rayleigh quotient over a small family of admissible windows."""
    best = None
    for f in distance_factors:
        try:
            rq, spec = rayleigh_test_function(body, disc, spectrum, ellipsoid, r1_factor,
                                              theta_factor, f)
        except GeometryFailure:
            continue
        if best is None or rq < best[0]:
            best = (rq, spec)
    if best is None:
        raise GeometryFailure("no admissible cut-off window")
    return best


# -- level sets ----------------------------------------------------------------------

def levelset_points(field: GridField, c: float) -> np.ndarray:
    """Nodes with u >= c plus linear crossings of level c on grid edges (and on cut
    arms, where u vanishes at the boundary point)."""
    u = np.where(field.inside, field.values, 0.0)
    n = field.dim
    h = field.spacing
    pts = [field.node_points(field.inside & (u >= c))]
    for j in range(n):
        sl_a = [slice(None)] * n
        sl_b = [slice(None)] * n
        sl_a[j] = slice(0, -1)
        sl_b[j] = slice(1, None)
        ua, ub = u[tuple(sl_a)], u[tuple(sl_b)]
        ia, ib = field.inside[tuple(sl_a)], field.inside[tuple(sl_b)]
        for lo_v, hi_v, sgn in ((ua, ub, 1), (ub, ua, -1)):
            # high node at 'hi', low node at 'lo'
            both = ia & ib & (hi_v >= c) & (lo_v < c)
            idx = np.argwhere(both)
            if len(idx):
                vh = hi_v[both]
                vl = lo_v[both]
                t = (vh - c) / (vh - vl)
                base = field.origin + h * idx.astype(float)
                if sgn == 1:
                    base[:, j] += h          # high node is the +1 neighbour
                    base[:, j] -= t * h
                else:
                    base[:, j] += t * h
                pts.append(base)
        for side, step in ((0, -1), (1, 1)):
            nb = np.zeros_like(field.inside)
            if step == 1:
                nb[tuple(sl_a)] = field.inside[tuple(sl_b)]
            else:
                nb[tuple(sl_b)] = field.inside[tuple(sl_a)]
            arm = field.inside & ~nb & (u >= c)
            idx = np.argwhere(arm)
            if len(idx):
                theta = field.frac[j, side][arm]
                t = (u[arm] - c) / u[arm] * theta
                base = field.origin + h * idx.astype(float)
                base[:, j] += step * t * h
                pts.append(base)
    return np.vstack(pts)


def levelset_hull(pair: EigenPair, c: float = 0.5) -> ConvexBody:
    pts = levelset_points(pair.field, c)
    if len(pts) < pair.field.dim + 1:
        raise ValueError("level too high")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise ValueError("level too high") from exc
    return convex_hull(pts[hull.vertices])


def levelset_ellipsoid(pair: EigenPair, c: float = 0.5) -> tuple[Ellipsoid, np.ndarray]:
    """John ellipsoid of the superlevel set {u >= c max u} and its semi-axes M_j."""
    ell = john_ellipsoid(levelset_hull(pair, c))
    return ell, ell.semi_axes


def levelset_audit(pair: EigenPair, c: float = 0.5, hull: Optional[ConvexBody] = None) -> int:
    """Number of nodes strictly inside the level-set hull whose value falls below
    ``c - 10 h |grad u|_inf``."""
    f = pair.field
    hull = hull or levelset_hull(pair, c)
    gmax = max(float(np.abs(np.diff(np.where(f.inside, f.values, 0.0), axis=j)).max())
               for j in range(f.dim)) / f.spacing
    pts = f.node_points()
    vals = f.values[f.inside]
    lo, hi = hull.bbox()
    cand = (vals < c - 10 * f.spacing * gmax) & np.all((pts > lo) & (pts < hi), axis=1)
    pts = pts[cand]
    a, b = hull.H
    bad = 0
    for start in range(0, len(pts), 4096):
        block = pts[start:start + 4096]
        bad += int(np.all(block @ a.T < b - TOL.membership, axis=1).sum())
    return bad


def check_levelset_volume(body: ConvexBody, pair: EigenPair, lengths_M) -> BoundReport:
    l2, _ = norms(pair.field)
    M = np.asarray(lengths_M, dtype=float)
    return BoundReport("levelset_volume", body.label, l2**2, float(np.prod(M)),
                       meta={"M": M.tolist()})


# -- slices --------------------------------------------------------------------------

def _orth_complement(w: np.ndarray) -> np.ndarray:
    q = np.linalg.qr(np.column_stack([w, np.eye(len(w))]))[0]
    return q[:, 1:len(w)]


def slice_profile(pair: EigenPair, w, step: Optional[float] = None):
    """Offsets t and slice integrals of u^2 over {x . w = t}."""
    f = pair.field
    w = np.asarray(w, dtype=float)
    w = w / np.linalg.norm(w)
    h = f.spacing
    step = step or h / 2
    pts = f.node_points(f.inside & (f.values > 0))
    interp = f.interpolator()
    tvals = pts @ w
    t = np.arange(tvals.min() - h, tvals.max() + h + step / 2, step)
    if f.dim == 1:
        return t, interp(t[:, None]) ** 2
    perp = _orth_complement(w)
    proj = pts @ perp
    lo, hi = proj.min(axis=0) - h, proj.max(axis=0) + h
    axes = [np.arange(lo[l], hi[l] + step / 2, step) for l in range(f.dim - 1)]
    lattice = np.array(np.meshgrid(*axes, indexing="ij")).reshape(f.dim - 1, -1).T
    plane = lattice @ perp.T
    cell = step ** (f.dim - 1)
    out = np.empty(len(t))
    for i, tv in enumerate(t):
        vals = interp(plane + tv * w)
        out[i] = cell * float((vals**2).sum())
    return t, out


def slice_max_norm(pair: EigenPair, w) -> tuple[float, float]:
    """(t*, B*): maximizing offset and maximal slice integral of u^2."""
    t, vals = slice_profile(pair, w)
    i = int(np.argmax(vals))
    if 0 < i < len(t) - 1:
        y0, y1, y2 = vals[i - 1], vals[i], vals[i + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            off = 0.5 * (y0 - y2) / den
            return float(t[i] + off * (t[1] - t[0])), float(y1 - 0.25 * (y0 - y2) * off)
    return float(t[i]), float(vals[i])


def slice_direction(k: int, john: Ellipsoid, level: Ellipsoid) -> np.ndarray:
    """Unit vector in span(first k John axes) and span(level-set axes k..n),
    bisecting the closest pair of principal vectors."""
    if k == 1:
        return john.directions[0].copy()
    P = john.directions[:k].T
    Q = level.directions[k - 1:].T
    U, s, Vt = np.linalg.svd(P.T @ Q)
    if s[0] < 1 - 1e-6:
        raise ValueError("span intersection empty at tolerance (frame bug)")
    p = P @ U[:, 0]
    q = Q @ Vt[0]
    if p @ q < 0:
        q = -q
    w = p + q
    w /= np.linalg.norm(w)
    big = np.flatnonzero(np.abs(w) >= np.abs(w).max() - 1e-9)[0]
    return w if w[big] > 0 else -w


def check_slice_bound(body: ConvexBody, pair: EigenPair, k: int, john: Ellipsoid,
                      level: Ellipsoid):
    w = slice_direction(k, john, level)
    t_star, b_star = slice_max_norm(pair, w)
    l2, _ = norms(pair.field)
    N = john.semi_axes
    M = level.semi_axes
    n = body.dim
    rhs1 = b_star * N[-1] ** (2 / 3) * N[k - 1] ** (1 / 3)
    rhs2 = float(np.prod([M[j] for j in range(n) if j != k - 1]))
    meta = {"t_star": t_star, "B_star": b_star, "w": w.tolist()}
    return [BoundReport(f"slice_{k}", body.label, l2**2, rhs1, meta=meta),
            BoundReport(f"slice_level_{k}", body.label, b_star, rhs2, meta=meta)]
