"""Command-line front end.

Exit codes: 0 success, 2 when a time budget cut a sweep short, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import experiments as ex
from .channels import ReliabilityCache
from .distill import llr_figure_point
from .triortho import build_css, smallest_triply_even_code

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1 so that 2 keeps meaning "partial output"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _p_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _common(sp):
    sp.add_argument("--config", help="TOML file, or a CSV written by a previous run")
    sp.add_argument("--channel", choices=["bec", "bsc", "erasure", "binary_symmetric"])
    sp.add_argument("--p", type=_p_list, help="noise rate(s), comma separated")
    sp.add_argument("--n-min", type=int)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--n", type=int, help="shorthand for --n-min N --n-max N")
    sp.add_argument("--samples", type=int, help="Monte Carlo trials per BSC table")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--k-rule", help="auto, fixed:K or frac:F")
    sp.add_argument("--trials", type=int, help="simulation trials per point")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--budget", type=float, dest="budget_seconds",
                    help="wall-clock budget in seconds; exceeded sweeps exit with 2")
    sp.add_argument("--extended", action="store_true", default=None,
                    help="lift the default n limits")
    sp.add_argument("--out", help="output directory (or file for single results)")
    sp.add_argument("--cache", help="table cache directory (default $POLAR_CACHE_DIR)")


def build_parser():
    ap = _Parser(prog="tripolar", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("reliability", help="build or load a reliability table")
    _common(sp)
    sp.add_argument("--format", choices=["prt1", "csv"], default=None)

    sp = sub.add_parser("search", help="smallest polar code with triply-even dual")
    _common(sp)

    sp = sub.add_parser("build-css", help="puncture the smallest code into a tri-orthogonal code")
    _common(sp)
    sp.add_argument("--k", type=int, help="number of punctures (overrides --k-rule)")
    sp.add_argument("--puncture-rule", choices=["seeded_random", "first_k", "explicit"])
    sp.add_argument("--punctures", type=lambda s: [int(v) for v in s.split(",")])

    for name, helptext in (("simulate", "decoder error rates of built codes"),
                           ("sweep-dim", "dual dimension against block size"),
                           ("sweep-err", "code threshold against block size")):
        sp = sub.add_parser(name, help=helptext)
        _common(sp)

    sp = sub.add_parser("fit", help="log-log least-squares fit of two CSV columns")
    sp.add_argument("csv")
    sp.add_argument("--x", default="N")
    sp.add_argument("--y", default="dual_rate")
    sp.add_argument("--group", default="p", help="fit each value of this column separately")
    return ap


def _config(args):
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    over = {k: getattr(args, k, None) for k in
            ("channel", "p", "n_min", "n_max", "samples", "seed", "k_rule", "trials",
             "workers", "budget_seconds", "extended", "out", "cache")}
    if getattr(args, "n", None) is not None:
        over["n_min"] = over["n_max"] = args.n
    if getattr(args, "puncture_rule", None):
        over["puncture_rule"] = args.puncture_rule
    if over.get("channel"):
        over["channel"] = {"erasure": "bec", "binary_symmetric": "bsc"}.get(over["channel"],
                                                                           over["channel"])
    base = asdict(cfg)
    base.update({k: v for k, v in over.items() if v is not None})
    return ex.ExperimentConfig(**base)


def _single(cfg):
    if len(cfg.p) != 1 or cfg.n_min != cfg.n_max:
        raise ValueError("this command takes a single --p and a single --n")
    return cfg.p[0], cfg.n_min


def _table(cfg, p, n):
    return ReliabilityCache(cfg.cache or None).get(cfg.spec(p).kind, p, n, cfg.samples,
                                                  cfg.seed, workers=cfg.workers)


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def cmd_reliability(args):
    cfg = _config(args)
    p, n = _single(cfg)
    t = _table(cfg, p, n)
    if args.out:
        fmt = args.format or ("csv" if args.out.endswith(".csv") else "prt1")
        if fmt == "csv":
            Path(args.out).write_text(t.to_csv())
        else:
            t.save(args.out)
    summary = {"n": t.n, "method": t.method, "p": t.p, "samples": t.samples, "seed": t.seed,
               "min_log2_z": float(t.log2_z.min()), "max_log2_z": float(t.log2_z.max())}
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_search(args):
    cfg = _config(args)
    p, n = _single(cfg)
    code, rep = smallest_triply_even_code(_table(cfg, p, n), channel=cfg.spec(p))
    out = rep.as_dict()
    out["llr"] = llr_figure_point(code) if code.threshold_log2_eps < 0 else 0.0
    out["code"] = code.descriptor()
    _emit(out, args.out)
    return EXIT_OK


def cmd_build_css(args):
    cfg = _config(args)
    p, n = _single(cfg)
    code, rep = smallest_triply_even_code(_table(cfg, p, n), channel=cfg.spec(p))
    k = args.k if args.k is not None else (
        len(args.punctures) if args.punctures else ex.resolve_k(cfg.k_rule, rep.dual_dim))
    rule = "explicit" if args.punctures else cfg.puncture_rule
    css = build_css(code, k=k, rule=rule, seed=cfg.seed, punctures=args.punctures)
    head = css.header()
    head["verification"] = css.verification.mode
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        css.save(args.out)
    head.pop("source", None)
    sys.stdout.write(json.dumps(head, sort_keys=True) + "\n")
    return EXIT_OK


def _sweep(runner):
    def run(args):
        cfg = _config(args)
        res = runner(cfg)
        for key, path in sorted(res.paths.items()):
            sys.stdout.write(f"{key}: {path}\n")
        for p, fit in sorted(res.fits.items()):
            sys.stdout.write(f"fit p={p!r}: slope={fit.slope:.4f} r2={fit.r_squared:.4f}\n")
        if res.partial:
            sys.stderr.write("time budget exhausted; output is partial\n")
            return EXIT_PARTIAL
        return EXIT_OK
    return run


def cmd_fit(args):
    rows = ex.read_csv(args.csv)
    groups = {}
    for r in rows:
        groups.setdefault(r.get(args.group), []).append(r)
    out = {}
    for g, pts in sorted(groups.items(), key=lambda kv: str(kv[0])):
        fit = ex.fit_loglog([r[args.x] for r in pts], [r[args.y] for r in pts])
        out[repr(g)] = asdict(fit)
    _emit(out, None)
    return EXIT_OK


COMMANDS = {
    "reliability": cmd_reliability,
    "search": cmd_search,
    "build-css": cmd_build_css,
    "simulate": _sweep(ex.run_simulation),
    "sweep-dim": _sweep(ex.run_dimension_sweep),
    "sweep-err": _sweep(ex.run_error_sweep),
    "fit": cmd_fit,
}


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
