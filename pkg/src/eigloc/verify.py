"""Acceptance suite: one function per numbered criterion over a pinned corpus."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import bounds, gj
from .campaign import CampaignConfig, Bundle, fit_exponent, run
from .geometry import contains_many, john_ellipsoid, to_john_frame
from .grid import extrapolate, log_concavity_audit, solve
from .zoo import build, make_box, random_polytope

# group -> config text (without output key)
STANDARD_CORPUS = {
    "boxes": "domain = box 1x1\ndomain = box 4x1,8x1,16x1,32x1\n",
    "disk": "domain = disk R=1\n",
    "sectors": "domain = sector2d R=8,16,32,64 r=1\n",
    "trapezoids": "".join(f"domain = trapezoid R={r} T={64 - r}\n" for r in (0, 16, 32, 48, 63))
                  + "checks = green, chiti, main, gradient, sandwich, levelset_volume, "
                    "levelset_audit, slice, logconcavity, gj\n",
    "random": "domain = random n=2 m=10 seed=0,1,2,3,4,5\n",
    "box3d": "domain = box 2x1x1\nladder_rel = 1/8, 1/12, 1/16\n",
}
MINI_CORPUS = {"boxes": "domain = box 1x1\ndomain = box 4x1\n", "disk": "domain = disk R=1\n"}
SLAB_CONFIG = ("domain = slab3d L1=8 L2=8 T=16\nladder = 1/17, 1/20, 1/24\n"
               "checks = green, chiti, main, sandwich, logconcavity\n")
CORPORA = {"standard": STANDARD_CORPUS, "mini": MINI_CORPUS}
J01 = 2.404825557695773


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: Optional[bool]          # None: skipped (group missing from corpus)
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]
        return f"[{tag}] {self.cid:>2} {self.name}: {self.detail} ({self.seconds:.1f}s)"


@dataclass
class Corpus:
    groups: dict
    fault: bool = False
    bundles: dict = field(default_factory=dict)

    def bundle(self, name: str) -> Optional[Bundle]:
        if name not in self.groups:
            return None
        if name not in self.bundles:
            cfg = CampaignConfig.parse(self.groups[name] + f"output = verify/{name}\n")
            self.bundles[name] = run(cfg, perturb_lambda=0.5 if self.fault else 0.0)
        return self.bundles[name]

    def all_bundles(self):
        return [self.bundle(g) for g in self.groups]


def _rows(bundles, prefix):
    return [r for b in bundles if b is not None for r in b.rows
            if r["check_id"].startswith(prefix)]


def _measures(bundle: Bundle):
    return [(b["sweep"], b["measures"]) for b in bundle.bodies]


def _within(x, target, tol):
    return abs(x - target) <= tol


class _Skip(Exception):
    pass


def _need(b):
    if b is None:
        raise _Skip()
    return b


# -- criteria ------------------------------------------------------------------------

def c1_eigensolver(c: Corpus):
    boxes, disk = _need(c.bundle("boxes")), _need(c.bundle("disk"))
    lam = {b["spec"]: b["measures"]["lambda"] for b in boxes.bodies + disk.bodies}
    checks = [("box 1x1", 2 * math.pi**2, 1e-3), ("disk R=1", J01**2, 5e-3),
              ("box 4x1", 17 * math.pi**2 / 16, 2e-3)]
    parts, ok = [], True
    for spec, ref, tol in checks:
        if spec not in lam:
            continue
        rel = abs(lam[spec] - ref) / ref
        ok &= rel <= tol
        parts.append(f"{spec} rel {rel:.2e}")
    return ok, "; ".join(parts)


def c2_green(c: Corpus):
    rows = _rows(c.all_bundles(), "green")
    worst = max(float(r["err"]) for r in rows)
    return all(r["pass"] == "true" for r in rows), f"{len(rows)} bodies, worst rel {worst:.1e}"


def c3_chiti(c: Corpus):
    c2, c3 = bounds.chiti_constant(2), bounds.chiti_constant(3)
    ok = _within(c2, 0.9202, 1e-4) and _within(c3, 0.7979, 1e-4)
    rows = _rows(c.all_bundles(), "chiti")
    ok &= len(rows) >= (20 if c.groups is STANDARD_CORPUS else 1)
    ok &= all(r["pass"] == "true" for r in rows)
    disk = [float(r["ratio"]) for r in rows if r["body"].startswith("disk")]
    ok &= all(abs(x - 1) <= 0.02 for x in disk)
    return ok, (f"c2*={c2:.6f} c3*={c3:.6f}; {len(rows)} bodies pass; "
                f"disk ratio {disk[0] if disk else float('nan'):.4f}")


def c4_sandwich(c: Corpus):
    rows = _rows(c.all_bundles(), "sandwich")
    lower = all(r["pass"] == "true" for r in rows) and len(rows) > 0
    sec = c.bundle("sectors")
    if sec is None:
        return lower, f"lower bound on {len(rows)} rows"
    fit = fit_exponent([(x, m["deltas"][0]) for x, m in _measures(sec)])
    ok = lower and _within(fit.slope, -2 / 3, 0.10)
    return ok, f"delta_1 slope {fit.slope:.4f}; lower bound {'ok' if lower else 'VIOLATED'}"


def c5_rayleigh(c: Corpus):
    sec = _need(c.bundle("sectors"))
    rows = [r for r in sec.rows if r["check_id"] == "rayleigh"]
    ok = len(rows) == len(sec.bodies) and all(r["pass"] == "true" for r in rows)
    scaled = []
    for x, m in _measures(sec):
        if "rayleigh" not in m:
            ok = False
            continue
        scaled.append((m["rayleigh"] - m["mu_star"][0]) * x ** (2 / 3))
    ok &= bool(scaled) and max(scaled) <= 50
    return ok, "(R(w)-mu1*) N1^(2/3) = " + ", ".join(f"{v:.2f}" for v in scaled)


def c6_l2_ratio(c: Corpus):
    sec, boxes = _need(c.bundle("sectors")), _need(c.bundle("boxes"))
    fs = fit_exponent([(x, m["l2"] / m["sup"]) for x, m in _measures(sec)])
    fb = fit_exponent([(x, m["l2"] / m["sup"]) for x, m in _measures(boxes) if x is not None])
    mains = [float(r["ratio"]) for r in _rows(c.all_bundles(), "main")]
    ok = _within(fs.slope, 1 / 6, 0.05) and _within(fb.slope, 0.5, 0.05) and min(mains) >= 0.2
    return ok, f"sector slope {fs.slope:.4f}; box slope {fb.slope:.4f}; min main ratio {min(mains):.3f}"


def c7_gradient(c: Corpus):
    sec, boxes = _need(c.bundle("sectors")), _need(c.bundle("boxes"))
    box_err = max(abs(m["grad_over_l2"][0] * x / math.pi - 1) for x, m in _measures(boxes)
                  if x is not None)
    r1 = [(x, m["grad_over_l2"][0] * x ** (1 / 3)) for x, m in _measures(sec)]
    fit = fit_exponent(r1)
    ok = box_err <= 0.01 and max(v for _, v in r1) <= 10 and _within(fit.slope, 0, 0.10)
    return ok, f"box rel err {box_err:.2e}; sector r1 max {max(v for _, v in r1):.3f}, slope {fit.slope:.4f}"


def c8_levelset_axis(c: Corpus):
    sec = _need(c.bundle("sectors"))
    pts = [(x, m["M"][0]) for x, m in _measures(sec)]
    fit = fit_exponent(pts)
    floor = min(m / x ** (1 / 3) for x, m in pts)
    ok = _within(fit.slope, 1 / 3, 0.07) and floor >= 0.2
    return ok, f"M1 slope {fit.slope:.4f}; min M1/N1^(1/3) {floor:.3f}"


def c9_slices(c: Corpus):
    vols = [float(r["ratio"]) for r in _rows(c.all_bundles(), "levelset_volume")]
    ok = all(1 / 16 <= v <= 16 for v in vols)
    sec = c.bundle("sectors")
    detail = f"volume ratios in [{min(vols):.3f}, {max(vols):.3f}]"
    if sec is not None:
        pts = [(x, m["l2"] ** 2 / (m["B_star"] * x ** (1 / 3))) for x, m in _measures(sec)]
        fit = fit_exponent(pts)
        low = min(v for _, v in pts)
        ok &= low >= 0.05 and _within(fit.slope, 0, 0.10)
        detail += f"; slice ratio min {low:.3f}, slope {fit.slope:.4f}"
    return ok, detail


def cubic_root_bisect(R: float, T: float) -> float:
    """Root of L^3 - R L^2 - T = 0 on [0, R + T^(1/3) + 1] by bisection."""
    lo, hi = 0.0, R + T ** (1 / 3) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid**3 - R * mid**2 - T > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def c10_length_scale(c: Corpus):
    plateau = gj.WidthProfile(np.array([0.0, 7.0]), np.array([1.0, 1.0]))
    ramp = gj.WidthProfile(np.array([0.0, 1000.0]), np.array([1.0, 0.0]))
    e1 = abs(gj.length_scale_L(plateau) - 7.0) / 7.0
    e2 = abs(gj.length_scale_L(ramp) - 10.0) / 10.0
    L = gj.length_scale_L(gj.width_profile(build("trapezoid R=10 T=1000")))
    e3 = abs(L - cubic_root_bisect(10, 1000)) / L
    ok = max(e1, e2, e3) <= 1e-6
    detail = f"plateau {e1:.1e}, ramp {e2:.1e}, trapezoid L={L:.6f} ({e3:.1e})"
    trap = c.bundle("trapezoids")
    if trap is not None:
        ratios = [float(r["ratio"]) for r in trap.rows if r["check_id"].startswith("gj_")]
        Ls = [m["L"] for _, m in _measures(trap)]
        ok &= len(ratios) == 2 * len(trap.bodies) and all(1 / 8 <= v <= 8 for v in ratios)
        detail += (f"; family L in [{min(Ls):.2f}, {max(Ls):.2f}], "
                   f"ratios in [{min(ratios):.3f}, {max(ratios):.3f}]")
    return ok, detail


def c11_geometry(c: Corpus, count: int = 100):
    worst_in, worst_out, slowest = -math.inf, 0.0, 0.0
    for seed in range(count):
        n = 2 + seed % 2
        body = random_polytope(n, 8 + (seed * 7) % 57, seed)
        t = time.perf_counter()
        ell = john_ellipsoid(body)
        slowest = max(slowest, time.perf_counter() - t)
        a, b = body.H
        bm = ell.directions.T @ np.diag(ell.semi_axes) @ ell.directions
        # sup of a.x over E minus b, relative
        worst_in = max(worst_in, float(np.max((a @ ell.center + np.linalg.norm(a @ bm, axis=1) - b)
                                              / np.maximum(np.abs(b), 1.0))))
        worst_out = max(worst_out, float(ell.gauge(body.V).max()) / n - 1)
    rng = np.random.default_rng(11)
    from scipy.spatial.distance import cdist
    from scipy.stats import special_ortho_group
    worst_rot = 0.0
    for seed in range(10):
        body = random_polytope(2 + seed % 2, 12, 1000 + seed)
        ref, _, _ = to_john_frame(body)
        q = special_ortho_group.rvs(body.dim, random_state=rng)
        moved, _, _ = to_john_frame(body.transformed(q, rng.normal(size=body.dim)))
        d = cdist(ref.V, moved.V)
        worst_rot = max(worst_rot, d.min(0).max(), d.min(1).max())
    ok = worst_in <= 1e-6 and worst_out <= 1e-6 and slowest < 1.0 and worst_rot <= 1e-6
    return ok, (f"E in body {worst_in:.1e}, body in nE {worst_out:.1e}, slowest {slowest:.2f}s, "
                f"frame drift {worst_rot:.1e}")


def c12_slab(c: Corpus):
    cfg = CampaignConfig.parse(SLAB_CONFIG + "output = verify/slab\n")
    b = run(cfg, perturb_lambda=0.5 if c.fault else 0.0)
    need = {"chiti", "sandwich", "logconcavity"}
    flags = [r for r in b.rows if r["check_id"].split("_")[0] in need]
    mains = [float(r["ratio"]) for r in b.rows if r["check_id"] == "main"]
    ok = bool(flags) and all(r["pass"] == "true" for r in flags) and bool(mains) and mains[0] >= 0.2
    m = b.bodies[0]["measures"] if b.bodies else {}
    return ok, (f"lambda {m.get('lambda', float('nan')):.5f}, nodes {m.get('nodes')}, "
                f"main ratio {mains[0] if mains else float('nan'):.3f}, "
                + ", ".join(f"{r['check_id']}={r['pass']}" for r in flags))


# property suites ----------------------------------------------------------------------

def _corpus_bodies(c: Corpus):
    out = []
    for name in c.groups:
        cfg = CampaignConfig.parse(c.groups[name] + "output = x\n")
        out += [build(t) for _, t, _ in cfg.domains]
    return out


def _coarse_pair(body):
    return solve(body, body.chebyshev[1] / 24)


def prop_positivity(bodies):
    return all(float(_coarse_pair(b).field.values.min()) >= -1e-10 for b in bodies)


def prop_log_concavity(bodies):
    return all(log_concavity_audit(_coarse_pair(b).field)[0] == 0 for b in bodies)


def prop_levelset_nesting(bodies, samples: int = 2000, seed: int = 0):
    rng = np.random.default_rng(seed)
    for b in bodies:
        pair = _coarse_pair(b)
        hulls = [bounds.levelset_hull(pair, c) for c in (0.75, 0.5, 0.25)]
        for inner, outer in zip(hulls, hulls[1:]):
            w = rng.dirichlet(np.ones(len(inner.V)), size=samples)
            pts = np.vstack([w @ inner.V, inner.V])
            if not np.all(contains_many(outer, pts, 1e-9)):
                return False
    return True


def prop_domain_monotonicity():
    pairs = [(make_box([4, 1]), make_box([4, 1.25])), (build("sector2d R=16 r=1"),
                                                      build("sector2d R=20 r=1"))]
    for small, big in pairs:
        ls = extrapolate(small, [small.chebyshev[1] * f for f in (1 / 8, 1 / 16, 1 / 32)])[0]
        lb = extrapolate(big, [big.chebyshev[1] * f for f in (1 / 8, 1 / 16, 1 / 32)])[0]
        if ls < lb * (1 - 5e-3):
            return False
    return True


def prop_scaling(bodies):
    for b in bodies[:6]:
        h = [b.chebyshev[1] * f for f in (1 / 8, 1 / 16, 1 / 32)]
        lam = extrapolate(b, h)[0]
        for t in (2.0, 4.0):
            big = b.transformed(t * np.eye(b.dim), np.zeros(b.dim))
            lt = extrapolate(big, [t * x for x in h])[0]
            if abs(lt * t**2 - lam) > 5e-3 * lam:
                return False
    return True


def prop_mu_chain(c: Corpus, tol: float = 1e-6):
    for bundle in c.all_bundles():
        for body in bundle.bodies:
            m = body["measures"]
            chain = [m["lambda"] + m["lambda_err"]] + list(m.get("mu_star", []))
            errs = [0.0] + [e for e in m.get("delta_errors", [])[:-1]]
            for a, b, e in zip(chain, chain[1:], errs[1:]):
                if b > a + tol + e:
                    return False
    return True


def c13_properties(c: Corpus):
    bodies = _corpus_bodies(c)
    results = {
        "positivity": prop_positivity(bodies),
        "log-concavity": prop_log_concavity(bodies),
        "level-set nesting": prop_levelset_nesting(bodies),
        "domain monotonicity": prop_domain_monotonicity(),
        "scaling law": prop_scaling(bodies),
        "mu chain": prop_mu_chain(c),
    }
    return all(results.values()), ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in results.items())


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("eigensolver accuracy", c1_eigensolver),
    2: ("discrete Green identity", c2_green),
    3: ("Chiti inequality", c3_chiti),
    4: ("eigenvalue sandwich rate", c4_sandwich),
    5: ("test-function mechanism", c5_rayleigh),
    6: ("L2/Linf rate", c6_l2_ratio),
    7: ("gradient rate", c7_gradient),
    8: ("level-set axis rate", c8_levelset_axis),
    9: ("level-set volume and slices", c9_slices),
    10: ("length scale L", c10_length_scale),
    11: ("John ellipsoid", c11_geometry),
    12: ("3D slab smoke test", c12_slab),
    13: ("property suites", c13_properties),
}


def run_criterion(cid: int, corpus: Corpus) -> CriterionResult:
    name, fn = CRITERIA[cid]
    t = time.perf_counter()
    try:
        ok, detail = fn(corpus)
    except _Skip:
        ok, detail = None, "corpus lacks the required family"
    except Exception as exc:
        ok, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CriterionResult(cid, name, bool(ok) if ok is not None else None, detail,
                           time.perf_counter() - t)


def verify_suite(corpus="standard", fault: bool = False, criteria=None, echo=print):
    """Run acceptance criteria; returns (all_passed, results)."""
    groups = CORPORA[corpus] if isinstance(corpus, str) else corpus
    if not groups:
        raise ValueError("empty corpus")
    c = Corpus(groups, fault)
    results = []
    for cid in criteria or CRITERIA:
        res = run_criterion(cid, c)
        if echo:
            echo(res.line())
        results.append(res)
    return all(r.passed is not False for r in results), results
