"""Config-driven sweeps: per-body pipeline, resumable result store, reports and fits.

Config files are ``key = value`` lines; ``#`` starts a comment. Keys:

    domain = <domain spec>      repeatable; comma lists in a value sweep it
    ladder = 0.05, 0.025, ...   absolute spacings
    ladder_rel = 1/16, 1/32     spacings as fractions of the inradius (default)
    section_h = 0.05            spacing for cross-section solves (default: middle rung)
    checks = chiti, main, ...   check ids (default: all)
    output = <dir>              relative to $EIGLOC_OUTPUT (or cwd)
    seed = 0
    workers = 1
    tol.<field> = value         tolerance overrides
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, bounds, gj
from .config import with_overrides
from .geometry import john_ellipsoid, radii
from .grid import (directional_grad_sq, discretize, ground_state, log_concavity_audit,
                   norms, richardson)
from .sections import SectionInfeasible, deltas
from .zoo import DomainSpec

CSV_HEADER = ["check_id", "body", "lhs", "rhs", "ratio", "err", "pass"]
CHECKS = ("green", "chiti", "main", "gradient", "sandwich", "rayleigh", "levelset_volume",
          "levelset_audit", "slice", "logconcavity", "gj", "surrogate")
OUTPUT_ENV = "EIGLOC_OUTPUT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    n: int


def fit_exponent(points) -> ExponentFit:
    """Least squares line through (log x, log y)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least three (x, y) points")
    if np.any(pts <= 0):
        raise ValueError("nonpositive input")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    a = np.c_[lx, np.ones_like(lx)]
    (slope, icpt), *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss == 0 else max(0.0, min(1.0, 1.0 - float((resid**2).sum()) / ss))
    return ExponentFit(float(slope), float(icpt), r2, len(pts))


# -- config ----------------------------------------------------------------------------

def _number(text: str) -> float:
    return float(Fraction(text.strip())) if "/" in text else float(text)


def expand_domain(line: str) -> list[tuple[str, Optional[float]]]:
    """Expand comma sweeps. Returns (spec text, swept value) pairs."""
    words = re.sub(r"\s*,\s*", ",", line).split()
    options = []
    swept = None
    for i, w in enumerate(words):
        if "," in w:
            if swept is not None:
                raise ConfigError("only one swept parameter per domain line")
            swept = i
            key, sep, vals = w.rpartition("=")
            options.append([(f"{key}{sep}{v}", v) for v in vals.split(",") if v])
        else:
            options.append([(w, None)])
    out = []
    for combo in itertools.product(*options):
        text = " ".join(c[0] for c in combo)
        val = next((c[1] for c in combo if c[1] is not None), None)
        if val is not None and "x" in val:
            val = val.split("x")[0]
        out.append((text, None if val is None else float(val)))
    return out


@dataclass
class CampaignConfig:
    domains: list = field(default_factory=list)       # (group index, spec text, sweep value)
    groups: list = field(default_factory=list)        # raw domain lines
    ladder: tuple = ()
    ladder_rel: tuple = (1 / 16, 1 / 32, 1 / 64)
    section_h: Optional[float] = None
    checks: tuple = CHECKS
    output: str = "campaign"
    seed: int = 0
    workers: int = 1
    tol: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "CampaignConfig":
        cfg = cls()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if key.strip() != "domain" and not sep:
                raise ConfigError(f"expected key = value: {raw!r}")
            key, val = key.strip(), val.strip()
            if key == "domain":
                cfg.groups.append(val)
            elif key == "ladder":
                cfg.ladder = tuple(_number(v) for v in val.split(","))
            elif key == "ladder_rel":
                cfg.ladder_rel = tuple(_number(v) for v in val.split(","))
            elif key == "section_h":
                cfg.section_h = _number(val)
            elif key == "checks":
                cfg.checks = tuple(v.strip() for v in val.split(",") if v.strip())
            elif key == "output":
                cfg.output = val
            elif key == "seed":
                cfg.seed = int(val)
            elif key == "workers":
                cfg.workers = int(val)
            elif key.startswith("tol."):
                cfg.tol[key[4:]] = _number(val)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        cfg.validate()
        return cfg

    def validate(self):
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown check id(s): {', '.join(unknown)}")
        if not self.groups:
            raise ConfigError("empty corpus")
        ladder = self.ladder or self.ladder_rel
        if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("ladder needs at least three decreasing spacings")
        try:
            with_overrides(**self.tol)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad tolerance override: {exc}") from exc
        self.domains = []
        for g, line in enumerate(self.groups):
            for text, val in expand_domain(line):
                try:
                    DomainSpec.parse(text)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
                self.domains.append((g, text, val))

    def body_job(self, text: str) -> dict:
        return {"spec": DomainSpec.parse(text).format(), "ladder": list(self.ladder),
                "ladder_rel": list(self.ladder_rel), "section_h": self.section_h,
                "checks": list(self.checks), "tol": dict(sorted(self.tol.items())),
                "seed": self.seed, "version": __version__}


def job_key(job: dict) -> str:
    blob = json.dumps(job, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


# -- per-body pipeline -----------------------------------------------------------------

def _report_rows(reports):
    return [r.row() | {"meta": _plain(r.meta)} for r in reports]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _error_row(check_id, label, exc):
    return {"check_id": check_id, "body": label, "lhs": math.nan, "rhs": math.nan,
            "ratio": math.nan, "err": math.nan, "pass": "error",
            "meta": {"error": f"{type(exc).__name__}: {exc}"}}


def evaluate_body(job: dict, perturb_lambda: float = 0.0) -> dict:
    """solve -> sections -> checks for one body. Returns rows and raw measures."""
    tol = with_overrides(**job.get("tol", {}))
    raw = DomainSpec.parse(job["spec"]).build()
    ell0 = john_ellipsoid(raw)
    # rotate only, so coordinate-aligned bodies keep their grids
    body = raw if np.allclose(ell0.directions, np.eye(raw.dim), atol=1e-12) else \
        raw.transformed(ell0.directions, np.zeros(raw.dim), label=raw.label)
    ell = john_ellipsoid(body)
    inr, diam = radii(body)
    ladder = job["ladder"] or [f * inr for f in job["ladder_rel"]]
    discs = [discretize(body, h, tol.theta_min) for h in ladder]
    pairs = [ground_state(d, tol.solver) for d in discs]
    lam, lam_err, order = richardson(ladder, [p.eigenvalue for p in pairs])
    lam = lam * (1 - perturb_lambda)
    pair, disc = pairs[-1], discs[-1]
    l2, sup = norms(pair.field)
    ratios = [norms(p.field)[0] / norms(p.field)[1] for p in pairs]
    ratio_err = abs(ratios[-1] - ratios[-2]) / ratios[-1]
    measures = {"lambda": lam, "lambda_err": lam_err, "lambda_h": pair.eigenvalue,
                "order": order, "l2": l2, "sup": sup, "inradius": inr, "diameter": diam,
                "N": ell.semi_axes.tolist(), "ladder": list(ladder), "nodes": disc.size}
    checks = job["checks"]
    rows = []
    label = raw.label

    def run(check_id, fn):
        try:
            out = fn()
            out = out if isinstance(out, list) else [out]
            rows.extend(r if isinstance(r, dict) else _report_rows([r])[0] for r in out)
        except Exception as exc:  # recorded per row, campaign continues
            rows.append(_error_row(check_id, label, exc))

    if "green" in checks:
        def green():
            gsum = sum(directional_grad_sq(pair.field, j) for j in range(body.dim))
            rel = abs(gsum - pair.eigenvalue * l2**2) / (pair.eigenvalue * l2**2)
            measures["green_rel"] = rel
            return bounds.BoundReport("green", label, gsum, pair.eigenvalue * l2**2, rel,
                                      rel <= 1e-10)
        run("green", green)
    if "chiti" in checks:
        run("chiti", lambda: bounds.check_chiti(body, pair, ratio_err + 2e-3))
    if "main" in checks:
        run("main", lambda: bounds.check_main(body, pair, ell.semi_axes))
    if "gradient" in checks:
        def grad():
            reps = bounds.check_gradient(body, pair, ell)
            measures["grad_over_l2"] = [r.meta["grad_over_l2"] for r in reps]
            return reps
        run("gradient", grad)

    gaps = None
    if {"sandwich", "rayleigh"} & set(checks) and body.dim > 1:
        try:
            sh = job["section_h"] or ladder[len(ladder) // 2]
            gaps = deltas(body, lam, lam_err, sh)
            measures["mu_star"] = [s.mu_star for s in gaps.spectra]
            measures["deltas"] = list(gaps.deltas)
            measures["delta_errors"] = list(gaps.errors)
        except (SectionInfeasible, ValueError) as exc:
            rows.append(_error_row("sections", label, exc))
    if "sandwich" in checks and gaps is not None:
        run("sandwich", lambda: bounds.check_sandwich(body, gaps, ell.semi_axes, 1e-6))
    if "rayleigh" in checks and gaps is not None:
        def rayleigh():
            try:
                rq, spec = bounds.best_rayleigh(body, disc, gaps.spectra[0], ell)
            except bounds.GeometryFailure as exc:
                # no elongated cone inside the body: construction not applicable
                return [_skip_row("rayleigh", label, exc)]
            measures["rayleigh"] = rq
            return [bounds.BoundReport("rayleigh", label, rq, pair.eigenvalue,
                                      passed=rq >= pair.eigenvalue * (1 - 1e-10),
                                      meta={"mu_star": gaps.spectra[0].mu_star,
                                            "R1": spec.R1, "params": list(spec.params)})]
        run("rayleigh", rayleigh)

    level = None
    if {"levelset_volume", "levelset_audit", "slice", "gj", "surrogate"} & set(checks):
        try:
            hull = bounds.levelset_hull(pair, 0.5)
            level = bounds.john_ellipsoid(hull)
            measures["M"] = level.semi_axes.tolist()
        except Exception as exc:
            rows.append(_error_row("levelset", label, exc))
    if "levelset_volume" in checks and level is not None:
        run("levelset_volume", lambda: bounds.check_levelset_volume(body, pair, level.semi_axes))
    if "levelset_audit" in checks and level is not None:
        def audit():
            bad = bounds.levelset_audit(pair, 0.5, hull)
            return bounds.BoundReport("levelset_audit", label, float(bad), 1.0, passed=bad == 0)
        run("levelset_audit", audit)
    if "slice" in checks and level is not None:
        def slc():
            reps = bounds.check_slice_bound(body, pair, 1, ell, level)
            measures["B_star"] = reps[0].meta["B_star"]
            return reps
        run("slice", slc)
    if "logconcavity" in checks:
        def logc():
            bad, worst = log_concavity_audit(pair.field, seed=job.get("seed", 0))
            return bounds.BoundReport("logconcavity", label, float(bad), 1.0, passed=bad == 0,
                                      meta={"worst": worst})
        run("logconcavity", logc)
    if body.dim == 2 and "gj" in checks and level is not None:
        def gjc():
            reps = gj.check_gj(body, pair, level_hull=hull)
            measures["L"] = reps[0].meta["L"]
            return reps
        run("gj", gjc)
    if body.dim == 2 and "surrogate" in checks and level is not None:
        run("surrogate", lambda: gj.surrogate_compare(body, lam, level.semi_axes[0]))
    return {"rows": rows, "measures": _plain(measures)}


def _skip_row(check_id, label, exc):
    return {"check_id": check_id, "body": label, "lhs": math.nan, "rhs": math.nan,
            "ratio": math.nan, "err": math.nan, "pass": "skip", "meta": {"skipped": str(exc)}}


# -- campaign --------------------------------------------------------------------------

def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.12g}"


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in CSV_HEADER])
    return buf.getvalue()


def csv_to_rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


@dataclass
class Bundle:
    rows: list
    bodies: list        # per body: {"spec", "group", "sweep", "measures"}
    fits: dict
    failed: bool
    directory: Optional[Path] = None

    def summary(self) -> dict:
        return {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "version": __version__, "rows": self.rows, "bodies": self.bodies,
                "fits": self.fits, "failed": self.failed}


def _group_fits(bodies) -> dict:
    fits = {}
    groups = {}
    for b in bodies:
        if b["sweep"] is not None:
            groups.setdefault(b["group"], []).append(b)
    for g, members in groups.items():
        if len(members) < 3:
            continue
        out = {}
        series = {
            "l2_over_sup": lambda m: m["l2"] / m["sup"],
            "lambda": lambda m: m["lambda"],
            "delta_1": lambda m: m["deltas"][0],
            "M_1": lambda m: m["M"][0],
            "grad_1": lambda m: m["grad_over_l2"][0],
        }
        for name, get in series.items():
            try:
                pts = [(b["sweep"], get(b["measures"])) for b in members]
                out[name] = dataclasses.asdict(fit_exponent(pts))
            except (KeyError, ValueError, TypeError, IndexError):
                continue
        fits[members[0]["group_line"]] = out
    return fits


def run(config: CampaignConfig, write: bool = True, perturb_lambda: float = 0.0,
        stop_after: Optional[int] = None) -> Bundle:
    """Execute all bodies (resuming from stored results) and assemble the bundle."""
    outdir = output_root() / config.output
    store = outdir / "store"
    if write:
        try:
            store.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"output directory not writable: {outdir}") from exc
    jobs = [config.body_job(text) for _, text, _ in config.domains]
    keys = [job_key(j) + (f"-p{perturb_lambda:g}" if perturb_lambda else "") for j in jobs]
    results: dict = {}
    todo = []
    for job, key in zip(jobs, keys):
        path = store / f"{key}.json"
        if write and path.exists():
            results[key] = json.loads(path.read_text())
        elif key not in results and key not in [k for _, k in todo]:
            todo.append((job, key))
    if stop_after is not None:
        todo = todo[:stop_after]

    def store_result(key, res):
        results[key] = res
        if write:
            (store / f"{key}.json").write_text(json.dumps(res, sort_keys=True))

    if config.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futs = [(key, pool.submit(evaluate_body, job, perturb_lambda)) for job, key in todo]
            for key, fut in futs:
                store_result(key, _safe_result(fut.result))
    else:
        for job, key in todo:
            store_result(key, _safe_result(lambda: evaluate_body(job, perturb_lambda)))
    rows, bodies = [], []
    for (g, text, val), job, key in zip(config.domains, jobs, keys):
        if key not in results:
            continue
        res = results[key]
        rows.extend(res["rows"])
        bodies.append({"spec": job["spec"], "group": g, "group_line": config.groups[g],
                       "sweep": val, "measures": res["measures"]})
    failed = any(r["pass"] in ("false", "error") for r in rows)
    bundle = Bundle(rows, bodies, _group_fits(bodies), failed, outdir if write else None)
    if write:
        emit(bundle, outdir, "csv")
        emit(bundle, outdir, "json")
    return bundle


def _safe_result(call):
    try:
        return call()
    except Exception as exc:
        return {"rows": [_error_row("solve", "", exc)], "measures": {}}


def emit(bundle: Bundle, outdir, fmt: str = "csv") -> Path:
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"output directory not writable: {outdir}") from exc
    if fmt == "csv":
        path = outdir / "report.csv"
        path.write_text(rows_to_csv(bundle.rows))
    elif fmt == "json":
        path = outdir / "summary.json"
        path.write_text(json.dumps(_plain(bundle.summary()), sort_keys=True, indent=1))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def load_bundle(path) -> Bundle:
    """Read a bundle directory (or its summary.json)."""
    path = Path(path)
    if path.is_dir():
        path = path / "summary.json"
    data = json.loads(path.read_text())
    return Bundle(data["rows"], data["bodies"], data["fits"], data["failed"], path.parent)
