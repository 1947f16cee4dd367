"""Cross-section eigenvalues mu(Y_i), their minima mu_i^* and the gaps delta_i."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import ConvexBody, cross_section
from .grid import (EigenPair, GridTooCoarseError, directional_grad_sq, discretize,
                   ground_state, norms)


class SectionInfeasible(Exception):
    """The section is empty or thinner than the feasibility threshold."""


@dataclass(frozen=True)
class SectionValue:
    value: float
    error: float
    pair: Optional[EigenPair] = None
    section: Optional[ConvexBody] = None


def section_eigen(section: ConvexBody, h: float, min_spacings: float = 4.0) -> SectionValue:
    """Ground eigenvalue of an (n-i)-dimensional section body.

    1D sections are exact (pi^2 / length^2). Higher-dimensional ones are solved
    at spacings ``hc`` and ``hc/2`` and Richardson-extrapolated with order 2.
    """
    if section.dim == 1:
        length = float(section.V[1, 0] - section.V[0, 0])
        return SectionValue(math.pi**2 / length**2, 0.0, None, section)
    inr = section.chebyshev[1]
    if inr < min_spacings * h:
        raise SectionInfeasible(f"section inradius {inr:.3g} below {min_spacings} spacings")
    hc = min(h, inr / 8)
    try:
        coarse = ground_state(discretize(section, hc))
        fine = ground_state(discretize(section, hc / 2))
    except GridTooCoarseError as exc:
        raise SectionInfeasible(str(exc)) from exc
    corr = (fine.eigenvalue - coarse.eigenvalue) / 3.0
    return SectionValue(fine.eigenvalue + corr, abs(corr), fine, section)


def mu(body: ConvexBody, i: int, y, h: float = 0.05) -> SectionValue:
    """First Dirichlet eigenvalue of the slice with x_1..x_i frozen at ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    sec = cross_section(body, list(range(i)), y)
    if sec is None:
        raise SectionInfeasible("empty cross-section")
    return section_eigen(sec, h)


@dataclass
class SectionSpectrum:
    i: int
    samples: list = field(default_factory=list)   # (Y tuple, mu) over the coarse scan
    mu_star: float = math.inf
    argmin: tuple = ()
    error: float = 0.0
    delta: Optional[float] = None
    delta_err: Optional[float] = None
    psi: Optional[EigenPair] = None
    section: Optional[ConvexBody] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i"] + [f"y{k + 1}" for k in range(self.i)] + ["mu", "flags"])
        for y, val in self.samples:
            flag = "infeasible" if not math.isfinite(val) else ""
            w.writerow([self.i, *(f"{c:.17g}" for c in y),
                        f"{val:.17g}" if math.isfinite(val) else "", flag])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"i": self.i, "mu_star": self.mu_star, "argmin": list(self.argmin),
                "delta": self.delta, "error_bar": (self.delta_err if self.delta_err is not None
                                                   else self.error)}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _projection_box(body: ConvexBody, i: int):
    lo, hi = body.bbox()
    return lo[:i], hi[:i]


def mu_star(body: ConvexBody, i: int, h: float = 0.05, scan: int = 9,
            y_tol: Optional[float] = None) -> SectionSpectrum:
    """Minimize mu(Y_i) by a coarse scan over the projection onto the frozen
    coordinates followed by pattern-search refinement from the best sample."""
    n = body.dim
    if not 1 <= i <= n - 1:
        raise ValueError("need 1 <= i <= n-1")
    lo, hi = _projection_box(body, i)
    grids = [lo[k] + (hi[k] - lo[k]) * (np.arange(scan) + 0.5) / scan for k in range(i)]
    spec = SectionSpectrum(i)
    cache: dict = {}

    def evaluate(y):
        key = tuple(np.round(y, 12))
        if key not in cache:
            try:
                cache[key] = mu(body, i, y, h)
            except SectionInfeasible:
                cache[key] = None
        res = cache[key]
        return math.inf if res is None else res.value

    best_y, best_v = None, math.inf
    for y in np.array(np.meshgrid(*grids, indexing="ij")).reshape(i, -1).T:
        v = evaluate(y)
        spec.samples.append((tuple(float(c) for c in y), v))
        if v < best_v:
            best_y, best_v = y.copy(), v
    if best_y is None:
        raise SectionInfeasible("all sections infeasible")
    step = np.array([(hi[k] - lo[k]) / scan for k in range(i)])
    one_d = body.dim - i == 1
    if y_tol is None:
        y_tol = 1e-9 * float(np.max(hi - lo)) if one_d else h / 4
    while step.max() > y_tol:
        moved = False
        for k in range(i):
            for sgn in (1.0, -1.0):
                trial = best_y.copy()
                trial[k] += sgn * step[k]
                v = evaluate(trial)
                if v < best_v:
                    best_y, best_v, moved = trial, v, True
                    break
        if not moved:
            step = step / 2
    res = cache[tuple(np.round(best_y, 12))]
    spec.mu_star = best_v
    spec.argmin = tuple(float(c) for c in best_y)
    spec.error = res.error
    spec.psi = res.pair
    spec.section = res.section
    return spec


@dataclass
class Gaps:
    lam: float
    lam_err: float
    spectra: list          # SectionSpectrum for i = 1..n-1
    deltas: list           # delta_1..delta_n
    errors: list


def deltas(body: ConvexBody, lam: float, lam_err: float = 0.0, h: float = 0.05,
           scan: int = 9) -> Gaps:
    """delta_i = lambda - mu_i^* for i < n and delta_n = lambda."""
    spectra, ds, errs = [], [], []
    for i in range(1, body.dim):
        spec = mu_star(body, i, h, scan)
        spec.delta = lam - spec.mu_star
        spec.delta_err = lam_err + spec.error
        spectra.append(spec)
        ds.append(spec.delta)
        errs.append(spec.delta_err)
    ds.append(lam)
    errs.append(lam_err)
    return Gaps(lam, lam_err, spectra, ds, errs)


def gradient_sum_bound(pair: EigenPair, gaps: Gaps) -> list[tuple[float, float]]:
    """For each i < n: (sum_{l<=i} ||d_l u||^2 / ||u||^2, delta_i + err_i)."""
    l2, _ = norms(pair.field)
    out = []
    running = 0.0
    for i in range(1, pair.field.dim):
        running += directional_grad_sq(pair.field, i - 1)
        out.append((running / l2**2, gaps.deltas[i - 1] + gaps.errors[i - 1]))
    return out
