"""Command line entry point: ``eigloc <subcommand>``.

Exit codes: 0 success, 1 a pass/fail check failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import campaign
from .campaign import CHECKS, ConfigError, CampaignConfig, _number


def _floats(text: str):
    return [_number(t) for t in text.split(",") if t.strip()]


def cmd_solve(args):
    from .grid import dump_field, field_to_csv, ground_state, discretize, richardson
    from .zoo import build
    body = build(args.spec)
    inr = body.chebyshev[1]
    ladder = _floats(args.h) if args.h else [f * inr for f in _floats(args.ladder_rel)]
    vals, pair = [], None
    for h in ladder:
        pair = ground_state(discretize(body, h))
        vals.append(pair.eigenvalue)
        print(f"h={h:.6g} lambda_h={pair.eigenvalue:.12g} residual={pair.residual:.2e}")
    if len(ladder) >= 3:
        lam, err, p = richardson(ladder, vals)
        print(f"lambda={lam:.12g} err={err:.2e} order={p:.3f}")
    if args.out:
        out = Path(args.out)
        if out.suffix == ".csv":
            out.write_text(field_to_csv(pair.field))
        else:
            out.write_bytes(dump_field(pair.field))
    return 0


def cmd_sections(args):
    from .sections import mu_star
    from .zoo import build
    spec = mu_star(build(args.spec), args.i, args.h, args.scan)
    sys.stdout.write(spec.to_csv())
    print(spec.to_json(), file=sys.stderr)
    return 0


def cmd_check(args):
    checks = [c.strip() for c in args.checks.split(",")] if args.checks else list(CHECKS)
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check id(s): {', '.join(unknown)}")
    text = f"domain = {args.spec}\nchecks = {', '.join(checks)}\n"
    if args.h:
        text += f"ladder = {args.h}\n"
    cfg = CampaignConfig.parse(text)
    res = campaign.evaluate_body(cfg.body_job(cfg.domains[0][1]))
    sys.stdout.write(campaign.rows_to_csv(res["rows"]))
    return 1 if any(r["pass"] in ("false", "error") for r in res["rows"]) else 0


def cmd_sweep(args):
    cfg = CampaignConfig.parse(Path(args.config).read_text())
    if args.workers:
        cfg.workers = args.workers
    bundle = campaign.run(cfg)
    print(f"wrote {bundle.directory / 'report.csv'} and {bundle.directory / 'summary.json'}")
    for group, fits in bundle.fits.items():
        for name, f in fits.items():
            print(f"{group} | {name}: slope {f['slope']:.4f} (r2 {f['r_squared']:.4f}, n={f['n']})")
    return 1 if bundle.failed else 0


def cmd_verify(args):
    from .verify import verify_suite
    criteria = [int(c) for c in args.criteria.split(",")] if args.criteria else None
    ok, _ = verify_suite(args.corpus, fault=args.inject_fault, criteria=criteria)
    print("OVERALL", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_report(args):
    bundle = campaign.load_bundle(args.bundle)
    if args.format == "csv":
        sys.stdout.write(campaign.rows_to_csv(bundle.rows))
    else:
        sys.stdout.write(json.dumps(campaign._plain(bundle.summary()), sort_keys=True, indent=1))
        sys.stdout.write("\n")
    return 1 if bundle.failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eigloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="ground state on a spacing ladder")
    s.add_argument("spec")
    s.add_argument("--h", help="comma-separated spacings")
    s.add_argument("--ladder-rel", default="1/16,1/32,1/64",
                   help="spacings as fractions of the inradius (used without --h)")
    s.add_argument("--out", help="write the finest field (.csv or binary dump)")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("sections", help="cross-section eigenvalues and their minimum")
    s.add_argument("spec")
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--h", type=float, default=0.05)
    s.add_argument("--scan", type=int, default=9)
    s.set_defaults(fn=cmd_sections)

    s = sub.add_parser("check", help="run bound checks on one body")
    s.add_argument("spec")
    s.add_argument("--checks", help=f"comma-separated ids from: {', '.join(CHECKS)}")
    s.add_argument("--h", help="absolute spacing ladder")
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("sweep", help="run a campaign config file")
    s.add_argument("config")
    s.add_argument("--workers", type=int)
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("verify", help="acceptance suite")
    s.add_argument("--corpus", default="standard", choices=["standard", "mini"])
    s.add_argument("--criteria", help="comma-separated criterion numbers")
    s.add_argument("--inject-fault", action="store_true",
                   help="perturb every eigenvalue downward (the sandwich check must fail)")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("report", help="re-emit a bundle")
    s.add_argument("bundle")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
