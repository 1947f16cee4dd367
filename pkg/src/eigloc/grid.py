"""Dirichlet Laplacian on a uniform grid masked to a convex polytope.

Boundary treatment follows Shortley-Weller: where the boundary cuts a grid
edge at fraction ``theta`` of the spacing, the arm to the boundary has length
``theta * h``. The stiffness matrix is assembled in the symmetric form

    (u_p - u_q)^2 / h^2  per interior edge,   u_p^2 / (theta h^2)  per cut arm,

and the node weights are the per-axis products ``(theta_- + theta_+) / 2``.
The eigenproblem ``A u = lambda M u`` is solved through the diagonal
similarity ``M^{-1/2} A M^{-1/2}``. With the staggered gradient that matches
the stiffness sums, ``sum_j ||d_j u||^2 = lambda ||u||^2`` holds to roundoff.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg, splu
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .config import TOL
from .geometry import ConvexBody


class GridTooCoarseError(ValueError):
    pass


class NoConvergenceError(RuntimeError):
    pass


@dataclass(eq=False)
class GridField:
    """Scalar samples on ``origin + h * index``; zero off the mask.

    ``frac[j, 0]`` / ``frac[j, 1]`` hold the arm fractions toward -e_j / +e_j
    (1 where the neighbour is an interior node).
    """

    origin: np.ndarray
    spacing: float
    values: np.ndarray
    inside: np.ndarray
    frac: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def dims(self) -> tuple:
        return self.values.shape

    @property
    def weights(self) -> np.ndarray:
        w = np.where(self.inside, 1.0, 0.0)
        for j in range(self.dim):
            w = w * (self.frac[j, 0] + self.frac[j, 1]) / 2
        return w

    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing * np.arange(self.dims[axis])

    def node_points(self, mask: Optional[np.ndarray] = None) -> np.ndarray:
        idx = np.argwhere(self.inside if mask is None else mask)
        return self.origin + self.spacing * idx

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.origin, self.spacing, np.where(self.inside, values, 0.0),
                         self.inside, self.frac)

    def interpolator(self):
        return RegularGridInterpolator([self.coords(j) for j in range(self.dim)], self.values,
                                       bounds_error=False, fill_value=0.0)


@dataclass(eq=False)
class EigenPair:
    eigenvalue: float
    field: GridField
    residual: float = 0.0


@dataclass(eq=False)
class Discretization:
    body: ConvexBody
    spacing: float
    origin: np.ndarray
    inside: np.ndarray
    frac: np.ndarray
    index: np.ndarray
    stiffness: list
    mass: np.ndarray

    @property
    def operator(self) -> sp.csr_matrix:
        return sum(self.stiffness[1:], self.stiffness[0]).tocsr()

    @property
    def size(self) -> int:
        return len(self.mass)

    def template(self) -> GridField:
        return GridField(self.origin, self.spacing, np.zeros(self.inside.shape),
                         self.inside, self.frac)

    def to_field(self, vec: np.ndarray) -> GridField:
        values = np.zeros(self.inside.shape)
        values[self.inside] = vec
        return GridField(self.origin, self.spacing, values, self.inside, self.frac)

    def to_vector(self, field_or_values) -> np.ndarray:
        values = getattr(field_or_values, "values", field_or_values)
        return np.asarray(values)[self.inside]


def _slack(body: ConvexBody, origin: np.ndarray, h: float, shape: tuple) -> np.ndarray:
    a, b = body.H
    axes = [origin[j] + h * np.arange(shape[j]) for j in range(len(shape))]
    slack = np.full(shape, np.inf)
    for row, off in zip(a, b):
        val = np.full(shape, off)
        for j, ax in enumerate(axes):
            if row[j] != 0:
                sh = [1] * len(shape)
                sh[j] = -1
                val = val - row[j] * ax.reshape(sh)
        np.minimum(slack, val, out=slack)
    return slack


def discretize(body: ConvexBody, h: float, theta_min: float = TOL.theta_min) -> Discretization:
    """Masked grid operator for the Dirichlet Laplacian on ``body``."""
    n = body.dim
    inr = body.chebyshev[1]
    if h > inr / 8 * (1 + 1e-12):
        raise GridTooCoarseError(f"grid too coarse: h={h:g} > inradius/8={inr / 8:g}")
    lo, hi = body.bbox()
    origin = lo - h
    shape = tuple(int(math.ceil((hi[j] - lo[j]) / h - 1e-9)) + 3 for j in range(n))
    slack = _slack(body, origin, h, shape)
    inside = slack > theta_min * h
    if inside.sum() < 50:
        raise GridTooCoarseError("grid too coarse: fewer than 50 interior nodes")
    a, b = body.H
    frac = np.ones((n, 2) + shape)
    idx_inside = np.argwhere(inside)
    for j in range(n):
        for side, step in ((0, -1), (1, 1)):
            nb = idx_inside.copy()
            nb[:, j] += step
            cut = ~inside[tuple(nb.T)]
            nodes = idx_inside[cut]
            pts = origin + h * nodes
            sgn = step * a[:, j]
            theta = np.full(len(nodes), np.inf)
            for row, off, s in zip(a, b, sgn):
                if s > 1e-14:
                    theta = np.minimum(theta, (off - pts @ row) / (s * h))
            frac[(j, side) + tuple(nodes.T)] = np.clip(theta, theta_min, 1.0)
    index = -np.ones(shape, dtype=np.int64)
    index[inside] = np.arange(inside.sum())
    count = int(inside.sum())
    stiffness = []
    for j in range(n):
        diag = np.zeros(count)
        rows, cols = [], []
        for side, step in ((0, -1), (1, 1)):
            f = frac[j, side][inside]
            diag += 1.0 / f
        # interior edges along +e_j
        sl_a = [slice(None)] * n
        sl_b = [slice(None)] * n
        sl_a[j] = slice(0, -1)
        sl_b[j] = slice(1, None)
        pair = inside[tuple(sl_a)] & inside[tuple(sl_b)]
        p = index[tuple(sl_a)][pair]
        q = index[tuple(sl_b)][pair]
        rows = np.concatenate([p, q, np.arange(count)])
        cols = np.concatenate([q, p, np.arange(count)])
        vals = np.concatenate([-np.ones(2 * len(p)), diag]) / h**2
        stiffness.append(sp.csr_matrix((vals, (rows, cols)), shape=(count, count)))
    mass = np.ones(count)
    for j in range(n):
        mass *= (frac[j, 0][inside] + frac[j, 1][inside]) / 2
    return Discretization(body, h, origin, inside, frac, index, stiffness, mass)


DIRECT_LIMIT = 120_000


def _resid(sym, vec):
    vec = vec / np.linalg.norm(vec)
    lam = float(vec @ (sym @ vec))
    return lam, float(np.linalg.norm(sym @ vec - lam * vec)) / lam, vec


def _ground_direct(sym, tol, max_steps):
    lu = splu(sym)
    op = LinearOperator(sym.shape, matvec=lu.solve, dtype=float)
    v0 = np.ones(sym.shape[0])
    vals, vecs = eigsh(sym, k=1, sigma=0.0, which="LM", OPinv=op, v0=v0, tol=1e-13)
    lam, res, v = _resid(sym, vecs[:, 0])
    steps = 0
    if res > tol:
        shifted = splu((sym - 0.999 * lam * sp.identity(sym.shape[0])).tocsc())
        while res > tol and steps < max_steps:
            lam, res, v = _resid(sym, shifted.solve(v))
            steps += 1
    return v, res, steps


def _ground_amg(sym, tol, max_steps):
    """LOBPCG with a smoothed-aggregation preconditioner; direct factorization
    of large 3D grids does not fit in memory."""
    import pyamg
    ml = pyamg.smoothed_aggregation_solver(sym.tocsr(), symmetry="symmetric")
    prec = ml.aspreconditioner()
    x = np.ones((sym.shape[0], 1))
    steps = 0
    res = math.inf
    v = x[:, 0]
    while res > tol and steps < max_steps:
        with warnings.catch_warnings():
            # the residual is checked below; lobpcg's own tolerance report is redundant
            warnings.simplefilter("ignore", UserWarning)
            _, vecs = lobpcg(sym, x, M=prec, largest=False, tol=tol * 1e-2, maxiter=100)
        lam, res, v = _resid(sym, vecs[:, 0])
        x = v[:, None]
        steps += 1
    return v, res, steps


def ground_state(disc: Discretization, tol: float = TOL.solver,
                 max_steps: int = TOL.max_outer_steps) -> EigenPair:
    """Smallest eigenpair: shift-invert Lanczos on a sparse LU for moderate grids,
    AMG-preconditioned LOBPCG above ``DIRECT_LIMIT`` unknowns. Either way the
    vector is refined until the relative residual is below ``tol``."""
    a = disc.operator
    dm = 1.0 / np.sqrt(disc.mass)
    sym = sp.diags(dm) @ a @ sp.diags(dm)
    sym = ((sym + sym.T) / 2).tocsc()
    solver = _ground_direct if sym.shape[0] <= DIRECT_LIMIT else _ground_amg
    v, res, steps = solver(sym, tol, max_steps)
    if res > tol:
        raise NoConvergenceError(f"no convergence: residual {res:.3e} after {steps} steps")
    u = dm * v
    if u.sum() < 0:
        u = -u
    u /= u.max()
    # Rayleigh quotient of the returned vector (exact Green identity)
    lam = float(u @ (a @ u)) / float(u @ (disc.mass * u))
    return EigenPair(lam, disc.to_field(u), res)


def rayleigh_quotient(disc: Discretization, values) -> float:
    w = disc.to_vector(values)
    den = float(w @ (disc.mass * w))
    if den == 0:
        raise ValueError("zero test function")
    return float(w @ (disc.operator @ w)) / den


def norms(field: GridField) -> tuple[float, float]:
    """(L2, sup) with cut-cell weighted trapezoid quadrature."""
    vals = np.where(field.inside, field.values, 0.0)
    sup = float(np.abs(vals).max()) if vals.size else 0.0
    l2sq = field.spacing ** field.dim * float((field.weights * vals**2).sum())
    return math.sqrt(l2sq), sup


def directional_grad_sq(field: GridField, axis: int) -> float:
    """Squared L2 norm of the staggered axis difference quotient (zero extension)."""
    if not 0 <= axis < field.dim:
        raise ValueError(f"invalid axis {axis}")
    u = np.where(field.inside, field.values, 0.0)
    ins = field.inside
    n = field.dim
    sl_a = [slice(None)] * n
    sl_b = [slice(None)] * n
    sl_a[axis] = slice(0, -1)
    sl_b[axis] = slice(1, None)
    pair = ins[tuple(sl_a)] & ins[tuple(sl_b)]
    diff = (u[tuple(sl_b)] - u[tuple(sl_a)])[pair]
    total = float((diff**2).sum())
    for side, step in ((0, -1), (1, 1)):
        nb_inside = np.zeros_like(ins)
        if step == 1:
            nb_inside[tuple(sl_a)] = ins[tuple(sl_b)]
        else:
            nb_inside[tuple(sl_b)] = ins[tuple(sl_a)]
        arm = ins & ~nb_inside
        total += float((u[arm] ** 2 / field.frac[axis, side][arm]).sum())
    return field.spacing ** (n - 2) * total


def directional_grad_norm(field: GridField, axis: int) -> float:
    return math.sqrt(directional_grad_sq(field, axis))


def solve(body: ConvexBody, h: float, tol: float = TOL.solver) -> EigenPair:
    return ground_state(discretize(body, h), tol)


def richardson(spacings: Sequence[float], values: Sequence[float]) -> tuple[float, float, float]:
    """Extrapolate ``value(h) = v + c h^p`` from the last three samples.

    Returns ``(v, error_bar, p)`` with ``p`` clamped to [1, 2].
    """
    hs = np.asarray(spacings, dtype=float)
    vs = np.asarray(values, dtype=float)
    if len(hs) < 3:
        raise ValueError("need at least three spacings")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("spacings must decrease")
    d = np.diff(vs)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("no convergence order")
    h1, h2, h3 = hs[-3:]
    v1, v2, v3 = vs[-3:]
    r = h2 / h3
    p = math.log(abs(v2 - v1) / abs(v3 - v2)) / math.log(h1 / h2)
    p = min(max(p, 1.0), 2.0)
    corr = (v3 - v2) / (r**p - 1.0)
    return v3 + corr, abs(corr), p


def extrapolate(body: ConvexBody, h_list: Sequence[float], tol: float = TOL.solver,
                return_pairs: bool = False):
    """Richardson-extrapolated ground eigenvalue over a decreasing ladder."""
    pairs = [solve(body, h, tol) for h in h_list]
    lam, err, _ = richardson(h_list, [p.eigenvalue for p in pairs])
    if return_pairs:
        return lam, err, pairs
    return lam, err


def ladder(body: ConvexBody, fractions=(1 / 16, 1 / 32, 1 / 64)) -> list[float]:
    """Spacings as fractions of the inradius."""
    inr = body.chebyshev[1]
    return [f * inr for f in fractions]


# -- 1D / 2D Schrodinger surrogates --------------------------------------------------

def schrodinger_ground(widths, spacing: float, origin=0.0) -> EigenPair:
    """Ground pair of ``-Laplace + pi^2 / w^2`` with Dirichlet data one spacing
    outside the sampled nodes. ``widths`` is 1D or 2D (node samples)."""
    w = np.asarray(widths, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("width samples must be positive")
    pot = math.pi**2 / w**2
    n = w.ndim
    inside = np.ones(w.shape, dtype=bool)
    frac = np.ones((n, 2) + w.shape)
    org = np.atleast_1d(np.asarray(origin, dtype=float))
    if org.size == 1 and n > 1:
        org = np.full(n, org[0])
    if n == 1:
        d = 2.0 / spacing**2 + pot
        e = -np.ones(len(w) - 1) / spacing**2
        vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        u = vecs[:, 0]
        lam = float(vals[0])
    elif n == 2:
        shape = w.shape
        lap = [sp.diags([-np.ones(k - 1), 2 * np.ones(k), -np.ones(k - 1)], [-1, 0, 1]) / spacing**2
               for k in shape]
        a = (sp.kron(lap[0], sp.identity(shape[1])) + sp.kron(sp.identity(shape[0]), lap[1])
             + sp.diags(pot.ravel())).tocsc()
        vals, vecs = eigsh(a, k=1, sigma=0.0, which="LM")
        u = vecs[:, 0].reshape(shape)
        lam = float(vals[0])
    else:
        raise ValueError("widths must be 1D or 2D")
    if u.sum() < 0:
        u = -u
    u = u / u.max()
    field = GridField(org, spacing, u.reshape(w.shape), inside, frac)
    return EigenPair(lam, field, 0.0)


# -- property audits ---------------------------------------------------------------

def log_concavity_audit(field: GridField, samples: int = 10_000, seed: int = 0,
                        slack_factor: float = 10.0, floor: float = 1e-6) -> tuple[int, float]:
    """Count violations of ``u(mid)^2 >= u(a) u(b) (1 - 10 h)`` over random
    node pairs with an exact grid midpoint. Returns (violations, worst ratio).

    Endpoints below ``floor * max u`` are skipped: there the eigenvector error
    exceeds the value itself."""
    rng = np.random.default_rng(seed)
    nodes = np.argwhere(field.inside & (field.values >= floor * field.values.max()))
    a = nodes[rng.integers(len(nodes), size=4 * samples)]
    b = nodes[rng.integers(len(nodes), size=4 * samples)]
    same = np.all((a - b) % 2 == 0, axis=1) & np.any(a != b, axis=1)
    a, b = a[same][:samples], b[same][:samples]
    mid = (a + b) // 2
    ua = field.values[tuple(a.T)]
    ub = field.values[tuple(b.T)]
    um = field.values[tuple(mid.T)]
    rhs = ua * ub * (1 - slack_factor * field.spacing)
    bad = um**2 < rhs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, um**2 / np.maximum(ua * ub, 1e-300), np.inf)
    return int(bad.sum()), float(ratio.min()) if len(ratio) else math.inf


# -- field dump -----------------------------------------------------------------------

_MAGIC = b"EGF1"


def dump_field(field: GridField) -> bytes:
    """Little-endian layout: magic 'EGF1', uint32 dim, dim x uint32 dims,
    dim x float64 origin, float64 spacing, prod(dims) float64 values (C order),
    prod(dims) uint8 inside flags, 2*dim*prod(dims) float64 arm fractions."""
    n = field.dim
    out = [_MAGIC, struct.pack("<I", n), struct.pack(f"<{n}I", *field.dims),
           struct.pack(f"<{n}d", *field.origin), struct.pack("<d", field.spacing),
           np.ascontiguousarray(field.values, dtype="<f8").tobytes(),
           np.ascontiguousarray(field.inside, dtype=np.uint8).tobytes(),
           np.ascontiguousarray(field.frac, dtype="<f8").tobytes()]
    return b"".join(out)


def load_field(blob: bytes) -> GridField:
    if blob[:4] != _MAGIC:
        raise ValueError("not a field dump")
    pos = 4
    (n,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    dims = struct.unpack_from(f"<{n}I", blob, pos)
    pos += 4 * n
    origin = np.array(struct.unpack_from(f"<{n}d", blob, pos))
    pos += 8 * n
    (h,) = struct.unpack_from("<d", blob, pos)
    pos += 8
    size = int(np.prod(dims))
    values = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(dims).copy()
    pos += 8 * size
    inside = np.frombuffer(blob, dtype=np.uint8, count=size, offset=pos).reshape(dims).astype(bool)
    pos += size
    frac = np.frombuffer(blob, dtype="<f8", count=2 * n * size, offset=pos)
    frac = frac.reshape((n, 2) + tuple(dims)).copy()
    return GridField(origin, h, values, inside, frac)


def field_to_csv(field: GridField) -> str:
    """Header lines ``# dim``, ``# dims``, ``# origin``, ``# spacing`` then one
    row per node: index tuple, inside flag, value."""
    n = field.dim
    lines = [f"# dim {n}", "# dims " + " ".join(map(str, field.dims)),
             "# origin " + " ".join(f"{x:.17g}" for x in field.origin),
             f"# spacing {field.spacing:.17g}",
             ",".join([f"i{j}" for j in range(n)] + ["inside", "value"])]
    for idx in np.ndindex(*field.dims):
        lines.append(",".join([*map(str, idx), str(int(field.inside[idx])),
                               f"{field.values[idx]:.17g}"]))
    return "\n".join(lines) + "\n"


class DirichletGroundState(BaseEstimator):
    """``fit(body)`` solves the ground state over a spacing ladder.

    Parameters
    ----------
    fractions : spacings as fractions of the inradius (decreasing, >= 3 for
        extrapolation; a single value skips extrapolation).
    tol : relative residual target of the eigensolver.
    """

    def __init__(self, fractions=(1 / 16, 1 / 32, 1 / 64), tol: float = TOL.solver):
        self.fractions = fractions
        self.tol = tol

    def fit(self, X: ConvexBody, y=None):
        if not isinstance(X, ConvexBody):
            raise TypeError("fit expects a ConvexBody")
        hs = ladder(X, self.fractions)
        self.pairs_ = [solve(X, h, self.tol) for h in hs]
        self.pair_ = self.pairs_[-1]
        self.eigenvalue_h_ = self.pair_.eigenvalue
        if len(hs) >= 3:
            self.eigenvalue_, self.eigenvalue_err_, self.order_ = richardson(
                hs, [p.eigenvalue for p in self.pairs_])
        else:
            self.eigenvalue_, self.eigenvalue_err_, self.order_ = self.eigenvalue_h_, math.nan, math.nan
        self.field_ = self.pair_.field
        self.n_features_in_ = X.dim
        return self

    def predict(self, X):
        """Interpolated (sup-normalized) eigenfunction at points ``X``."""
        check_is_fitted(self, "field_")
        X = check_array(X)
        return self.field_.interpolator()(X)
