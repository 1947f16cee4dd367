"""Convex polytopes, inscribed balls and maximal-volume inscribed ellipsoids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .config import TOL


class DegenerateBodyError(ValueError):
    """Raised for unbounded, flat or otherwise empty-interior bodies."""


class FlatHullError(DegenerateBodyError):
    pass


def _dedupe_rows(arr: np.ndarray, decimals: int = 12) -> np.ndarray:
    _, idx = np.unique(np.round(arr, decimals), axis=0, return_index=True)
    return arr[np.sort(idx)]


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A bounded convex polytope in V-form, H-form or both.

    Half-spaces are stored as ``normals @ x <= offsets`` with unit normals.
    Whichever form is missing is derived on first use.
    """

    dim: int
    vertices: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.vertices is None and self.normals is None:
            raise DegenerateBodyError("degenerate body: no vertices or half-spaces")
        if self.vertices is not None:
            v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
            if v.shape[1] != self.dim:
                raise ValueError("vertex dimension mismatch")
            object.__setattr__(self, "vertices", v)
        if self.normals is not None:
            a = np.atleast_2d(np.asarray(self.normals, dtype=float))
            b = np.asarray(self.offsets, dtype=float).ravel()
            norm = np.linalg.norm(a, axis=1)
            if np.any(norm == 0):
                raise DegenerateBodyError("degenerate body: zero normal")
            # leave already-unit rows untouched so text round-trips are exact
            norm = np.where(np.abs(norm - 1.0) < 1e-14, 1.0, norm)
            object.__setattr__(self, "normals", a / norm[:, None])
            object.__setattr__(self, "offsets", b / norm)

    # -- derived representations ------------------------------------------
    @cached_property
    def V(self) -> np.ndarray:
        if self.vertices is not None:
            return _hull_vertices(self.vertices)
        return _vertices_from_halfspaces(self.normals, self.offsets, self.dim)

    @cached_property
    def H(self) -> tuple[np.ndarray, np.ndarray]:
        if self.normals is not None:
            return self.normals, self.offsets
        return _halfspaces_from_vertices(self.vertices, self.dim)

    @cached_property
    def chebyshev(self) -> tuple[np.ndarray, float]:
        return chebyshev_ball(*self.H)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.V.min(axis=0), self.V.max(axis=0)

    def transformed(self, matrix: np.ndarray, shift: np.ndarray, label: str = "") -> "ConvexBody":
        """Image under ``x -> matrix @ x + shift`` (matrix invertible)."""
        matrix = np.asarray(matrix, dtype=float)
        verts = self.V @ matrix.T + shift
        a, b = self.H
        inv = np.linalg.inv(matrix)
        a2 = a @ inv
        b2 = b + a2 @ shift
        return ConvexBody(self.dim, verts, a2, b2, label=label or self.label)

    def __repr__(self):
        return f"ConvexBody(dim={self.dim}, nverts={len(self.V)}, label={self.label!r})"


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    n = points.shape[1]
    if n == 1:
        lo, hi = points.min(), points.max()
        if hi - lo <= TOL.membership:
            raise DegenerateBodyError("degenerate body")
        return np.array([[lo], [hi]])
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise FlatHullError("flat hull") from exc
    return points[hull.vertices]


def _halfspaces_from_vertices(points: np.ndarray, n: int):
    if n == 1:
        lo, hi = points.min(), points.max()
        if hi - lo <= TOL.membership:
            raise DegenerateBodyError("degenerate body")
        return np.array([[-1.0], [1.0]]), np.array([-lo, hi])
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise FlatHullError("flat hull") from exc
    eq = _dedupe_rows(hull.equations, 10)
    return eq[:, :n], -eq[:, n]


def chebyshev_ball(normals: np.ndarray, offsets: np.ndarray) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball inside ``normals @ x <= offsets``."""
    m, n = normals.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([normals, np.linalg.norm(normals, axis=1)[:, None]])
    res = linprog(c, A_ub=a_ub, b_ub=offsets, bounds=[(None, None)] * n + [(0, None)],
                  method="highs")
    if res.status == 3:
        raise DegenerateBodyError("degenerate body: unbounded")
    if res.status != 0:
        raise DegenerateBodyError(f"degenerate body: {res.message}")
    return res.x[:n], float(res.x[-1])


def _vertices_from_halfspaces(normals: np.ndarray, offsets: np.ndarray, n: int) -> np.ndarray:
    center, radius = chebyshev_ball(normals, offsets)
    if radius <= TOL.membership:
        raise DegenerateBodyError("degenerate body")
    if n == 1:
        a = normals[:, 0]
        lo = max(offsets[i] / a[i] for i in range(len(a)) if a[i] < 0)
        hi = min(offsets[i] / a[i] for i in range(len(a)) if a[i] > 0)
        return np.array([[lo], [hi]])
    hs = np.hstack([normals, -offsets[:, None]])
    try:
        inter = HalfspaceIntersection(hs, center)
    except QhullError as exc:
        raise DegenerateBodyError("degenerate body") from exc
    pts = _dedupe_rows(inter.intersections, 9)
    return _hull_vertices(pts)


def body_from_vertices(points, label: str = "") -> ConvexBody:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    verts = _hull_vertices(pts)
    a, b = _halfspaces_from_vertices(verts, pts.shape[1])
    return ConvexBody(pts.shape[1], verts, a, b, label=label)


def body_from_halfspaces(normals, offsets, label: str = "") -> ConvexBody:
    a = np.atleast_2d(np.asarray(normals, dtype=float))
    body = ConvexBody(a.shape[1], None, a, np.asarray(offsets, dtype=float), label=label)
    return ConvexBody(body.dim, body.V, body.normals, body.offsets, label=label)


def convex_hull(points) -> ConvexBody:
    """V-form hull of at least n+1 affinely independent points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    if len(pts) < n + 1 or np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-12) < n:
        raise FlatHullError("flat hull")
    return body_from_vertices(pts)


# -- basic queries -------------------------------------------------------------

def contains(body: ConvexBody, point, tol: float = TOL.membership) -> bool:
    a, b = body.H
    p = np.asarray(point, dtype=float).ravel()
    return bool(np.all(a @ p <= b + tol))


def contains_many(body: ConvexBody, points, tol: float = TOL.membership) -> np.ndarray:
    a, b = body.H
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.all(pts @ a.T <= b + tol, axis=1)


def support_width(body: ConvexBody, direction) -> float:
    d = np.asarray(direction, dtype=float).ravel()
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("zero direction")
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    proj = body.V @ d
    return float(proj.max() - proj.min())


def radii(body: ConvexBody) -> tuple[float, float]:
    """(inradius, diameter)."""
    _, r = body.chebyshev
    if r <= TOL.membership:
        raise DegenerateBodyError("degenerate body")
    return r, float(pdist(body.V).max())


def cross_section(body: ConvexBody, frozen_axes: Sequence[int], values) -> Optional[ConvexBody]:
    """Slice obtained by fixing the coordinates ``frozen_axes`` to ``values``.

    Returns a body in the remaining coordinates (original order), or ``None``
    when the slice is empty or has no relative interior.
    """
    frozen = list(frozen_axes)
    vals = np.atleast_1d(np.asarray(values, dtype=float))
    n = body.dim
    if not 1 <= len(frozen) <= n - 1 or len(vals) != len(frozen):
        raise ValueError("need 1 <= i <= n-1 frozen axes with matching values")
    free = [k for k in range(n) if k not in frozen]
    a, b = body.H
    b2 = b - a[:, frozen] @ vals
    a2 = a[:, free]
    norm = np.linalg.norm(a2, axis=1)
    flat = norm < 1e-14
    if np.any(b2[flat] < -TOL.membership):
        return None
    a2, b2, norm = a2[~flat], b2[~flat], norm[~flat]
    if len(free) == 1:
        col = a2[:, 0]
        lo = np.max(b2[col < 0] / col[col < 0]) if np.any(col < 0) else -np.inf
        hi = np.min(b2[col > 0] / col[col > 0]) if np.any(col > 0) else np.inf
        if not np.isfinite(lo) or not np.isfinite(hi):
            raise DegenerateBodyError("degenerate body: unbounded section")
        if hi - lo <= TOL.membership:
            return None
        return ConvexBody(1, np.array([[lo], [hi]]), np.array([[-1.0], [1.0]]),
                          np.array([-lo, hi]))
    try:
        _, r = chebyshev_ball(a2, b2)
    except DegenerateBodyError:
        return None
    if r <= TOL.membership:
        return None
    return body_from_halfspaces(a2, b2)


# -- ellipsoids and frames -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``{center + sum_j t_j semi_axes[j] directions[j] : |t| <= 1}``."""

    center: np.ndarray
    directions: np.ndarray
    semi_axes: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def shape_matrix(self) -> np.ndarray:
        """Symmetric B with E = center + B (unit ball)."""
        return (self.directions.T * self.semi_axes) @ self.directions

    def gauge(self, points) -> np.ndarray:
        """Ellipsoidal norm of ``points - center`` (<= 1 means inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        coords = pts @ self.directions.T / self.semi_axes
        return np.linalg.norm(coords, axis=1)

    def sample(self, count: int, rng=None, boundary: bool = False) -> np.ndarray:
        rng = np.random.default_rng(rng)
        g = rng.standard_normal((count, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        if not boundary:
            g *= rng.random(count)[:, None] ** (1.0 / self.dim)
        return self.center + (g * self.semi_axes) @ self.directions

    def volume(self) -> float:
        n = self.dim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * float(np.prod(self.semi_axes))


@dataclass(frozen=True, eq=False)
class Frame:
    """Similarity ``x -> scale * rotation @ (x - translation)``."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def forward(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.scale * (pts - self.translation) @ self.rotation.T

    def inverse(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.rotation / self.scale + self.translation


def _canonical_axes(directions: np.ndarray, lengths: np.ndarray):
    """Sort nonincreasing and fix signs. Axes whose lengths agree to
    ``TOL.axis_tie`` (relative) span a degenerate eigenspace; that space gets
    the Gram-Schmidt basis of the projected coordinate axes so the frame is
    deterministic.
    """
    order = np.argsort(-lengths, kind="stable")
    dirs = np.array(directions, dtype=float)[order]
    lengths = np.array(lengths, dtype=float)[order]
    n = len(lengths)
    tie = TOL.axis_tie * max(lengths.max(), 1e-300)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and lengths[start] - lengths[stop] <= tie:
            stop += 1
        if stop - start > 1:
            block = dirs[start:stop]
            proj = block.T @ block
            basis: list[np.ndarray] = []
            for e in np.eye(n):
                v = proj @ e
                for w in basis:
                    v = v - (w @ v) * w
                if np.linalg.norm(v) > 1e-6:
                    basis.append(v / np.linalg.norm(v))
                if len(basis) == stop - start:
                    break
            dirs[start:stop] = basis
            lengths[start:stop] = lengths[start:stop].mean()
        start = stop
    for row in dirs:
        big = np.flatnonzero(np.abs(row) >= np.abs(row).max() - 1e-9)[0]
        if row[big] < 0:
            row *= -1
    return dirs, lengths


def _sym_basis(n: int) -> list[np.ndarray]:
    basis = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
    return basis


def _mvie_barrier(a: np.ndarray, b: np.ndarray, center0: np.ndarray, r0: float,
                  gap: float = TOL.john_gap) -> tuple[np.ndarray, np.ndarray]:
    """Maximal-volume inscribed ellipsoid of ``a x <= b`` by a log-barrier
    path-following Newton method. Returns (B, d) with E = d + B(unit ball).
    """
    m, n = a.shape
    basis = _sym_basis(n)
    q = len(basis)
    # mats[i] maps the packed B entries to B a_i
    mats = np.stack([np.stack([e @ a[i] for e in basis], axis=1) for i in range(m)])

    def unpack(xb):
        return sum(x * e for x, e in zip(xb, basis))

    def pack(bm):
        return np.array([bm[i, j] for i in range(n) for j in range(i, n)])

    x = np.concatenate([pack(0.5 * r0 * np.eye(n)), center0])

    def feasible(xv):
        bm = unpack(xv[:q])
        try:
            np.linalg.cholesky(bm)
        except np.linalg.LinAlgError:
            return None
        y = a @ bm
        s = b - a @ xv[q:] - np.linalg.norm(y, axis=1)
        if np.any(s <= 0):
            return None
        return bm, y, s

    def value(xv, t):
        st = feasible(xv)
        if st is None:
            return np.inf
        bm, _, s = st
        return -t * np.linalg.slogdet(bm)[1] - np.log(s).sum()

    t = 1.0
    while True:
        for _ in range(100):
            bm, y, s = feasible(x)
            binv = np.linalg.inv(bm)
            ynorm = np.linalg.norm(y, axis=1)
            yhat = y / ynorm[:, None]
            grad_g = np.hstack([np.einsum("inq,in->iq", mats, yhat), a])
            g_ld = np.array([np.trace(binv @ e) for e in basis])
            h_ld = np.array([[np.trace(binv @ ei @ binv @ ej) for ej in basis] for ei in basis])
            grad = (grad_g / s[:, None]).sum(axis=0)
            grad[:q] -= t * g_ld
            hess = np.einsum("ip,iq,i->pq", grad_g, grad_g, 1.0 / s**2)
            proj = np.eye(n)[None] - yhat[:, :, None] * yhat[:, None, :]
            curv = np.einsum("inp,inm,imq,i->pq", mats, proj, mats, 1.0 / (ynorm * s))
            hess[:q, :q] += curv + t * h_ld
            step = -np.linalg.solve(hess, grad)
            dec = float(-grad @ step)
            if dec / 2 <= 1e-11:
                break
            f0 = value(x, t)
            alpha = 1.0
            while alpha > 1e-10:
                f1 = value(x + alpha * step, t)
                if f1 <= f0 - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            else:
                break  # roundoff floor: no further decrease available
            x = x + alpha * step
        if m / t < gap:
            break
        t *= 8.0
    return unpack(x[:q]), x[q:]


def john_ellipsoid(body: ConvexBody) -> Ellipsoid:
    """Maximal-volume ellipsoid contained in ``body``.

    Its n-fold dilation about the center contains the body (John).
    """
    a, b = body.H
    n = body.dim
    if n == 1:
        lo, hi = body.V.min(), body.V.max()
        return Ellipsoid(np.array([(lo + hi) / 2]), np.eye(1), np.array([(hi - lo) / 2]))
    center0, r0 = body.chebyshev
    if r0 <= TOL.membership:
        raise DegenerateBodyError("degenerate body")
    # work in coordinates where the inscribed ball is the unit ball
    a_s = a
    b_s = (b - a @ center0) / r0
    bm, d = _mvie_barrier(a_s, b_s, np.zeros(n), 1.0)
    bm = (bm + bm.T) / 2
    # enforce containment exactly (barrier iterates are strictly feasible)
    excess = np.max(np.linalg.norm(a_s @ bm, axis=1) / (b_s - a_s @ d))
    if excess > 1:
        bm = bm / excess
    lengths, vecs = np.linalg.eigh(bm)
    dirs, lengths = _canonical_axes(vecs.T, lengths * r0)
    center = center0 + r0 * d
    return Ellipsoid(center, _orient_axes(dirs, lengths, body.V - center), lengths)


def _orient_axes(dirs: np.ndarray, lengths: np.ndarray, rel: np.ndarray) -> np.ndarray:
    """Intrinsic sign choice: the farther extreme vertex along each axis lies on
    the negative side. Symmetric extents keep the component-based sign."""
    dirs = dirs.copy()
    tied = np.zeros(len(lengths), dtype=bool)
    tied[:-1] |= np.abs(np.diff(lengths)) <= TOL.axis_tie * lengths[0]
    tied[1:] |= tied[:-1] & (np.abs(np.diff(lengths)) <= TOL.axis_tie * lengths[0])
    for j, v in enumerate(dirs):
        if tied[j]:
            continue
        p = rel @ v
        if p.max() + p.min() > 1e-9 * (p.max() - p.min()):
            dirs[j] = -v
    return dirs


def to_john_frame(body: ConvexBody, scale: bool = True):
    """Rotate/translate (and optionally dilate) so the John ellipsoid is
    centered at the origin with axes along coordinates, N_1 >= ... >= N_n = 1.

    Returns ``(body_in_frame, frame, lengths)``.
    """
    ell = john_ellipsoid(body)
    s = 1.0 / ell.semi_axes[-1] if scale else 1.0
    frame = Frame(ell.directions.copy(), ell.center.copy(), s)
    new = body.transformed(s * ell.directions, -s * ell.directions @ ell.center,
                           label=body.label)
    return new, frame, s * ell.semi_axes


class JohnEllipsoid(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` on a point cloud or a :class:`ConvexBody`,
    ``transform`` maps points into the canonical John frame."""

    def __init__(self, normalize: bool = True):
        self.normalize = normalize

    def fit(self, X, y=None):
        body = X if isinstance(X, ConvexBody) else body_from_vertices(
            check_array(X, ensure_min_samples=2))
        self.ellipsoid_ = john_ellipsoid(body)
        self.n_features_in_ = body.dim
        s = 1.0 / self.ellipsoid_.semi_axes[-1] if self.normalize else 1.0
        self.frame_ = Frame(self.ellipsoid_.directions, self.ellipsoid_.center, s)
        self.lengths_ = s * self.ellipsoid_.semi_axes
        return self

    def transform(self, X):
        check_is_fitted(self, "frame_")
        X = check_array(X)
        return self.frame_.forward(X)

    def inverse_transform(self, X):
        check_is_fitted(self, "frame_")
        return self.frame_.inverse(check_array(X))


# -- text interchange ------------------------------------------------------------

def format_body(body: ConvexBody) -> str:
    lines = [f"dim {body.dim}", "vertices"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in body.V]
    a, b = body.H
    lines.append("halfspaces")
    lines += [" ".join(f"{x:.17g}" for x in (*row, off)) for row, off in zip(a, b)]
    return "\n".join(lines) + "\n"


def parse_body(text: str) -> ConvexBody:
    dim = None
    section = None
    verts, hs = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("dim"):
            dim = int(line.split()[1])
        elif line in ("vertices", "halfspaces"):
            section = line
        elif section == "vertices":
            verts.append([float(t) for t in line.split()])
        elif section == "halfspaces":
            hs.append([float(t) for t in line.split()])
        else:
            raise ValueError(f"unexpected line {raw!r}")
    if dim is None:
        raise ValueError("missing dim")
    v = np.array(verts) if verts else None
    if hs:
        arr = np.array(hs)
        return ConvexBody(dim, v, arr[:, :dim], arr[:, dim])
    return ConvexBody(dim, v)
