"""Sweeps over noise rates and block sizes, CSV emission and log-log fits.

Every CSV starts with ``#``-prefixed lines holding the TOML configuration that
produced it, including digests of the reliability tables used.  Feeding that
file back as a configuration reproduces it byte for byte.
"""

from __future__ import annotations

import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.stats import linregress

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import kernels
from .channels import ChannelSpec, ReliabilityCache
from .distill import NoiseRun, llr_figure_point, simulate, union_bound_log2
from .triortho import build_css, default_k, smallest_triply_even_code

log = logging.getLogger(__name__)

N_LIMITS = {"bec": 20, "bsc": 16}


@dataclass
class ExperimentConfig:
    """Settings for sweeps and single runs.

    ``out`` and ``cache`` only say where files go, so they are left out of the
    header written into result files.
    """

    channel: str = "bec"
    p: list = field(default_factory=lambda: [0.01])
    n_min: int = 10
    n_max: int = 12
    samples: int = 100_000
    seed: int = 1
    k_rule: str = "auto"
    puncture_rule: str = "seeded_random"
    trials: int = 10_000
    stop_failures: int = 100
    rare_event_factor: float = 0.01
    budget_seconds: float = 0.0
    workers: int = 1
    extended: bool = False
    out: str = "results"
    cache: str = ""

    RESULT_KEYS = ("channel", "p", "n_min", "n_max", "samples", "seed", "k_rule",
                   "puncture_rule", "trials", "stop_failures", "rare_event_factor")

    def __post_init__(self):
        self.channel = ChannelSpec(self.channel, 0.0).short
        if isinstance(self.p, (int, float)):
            self.p = [self.p]
        self.p = [float(v) for v in self.p]
        for v in self.p:
            ChannelSpec(self.channel, v)
        self.n_min, self.n_max = int(self.n_min), int(self.n_max)
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError(f"bad n range [{self.n_min}, {self.n_max}]")
        limit = 24 if self.extended else N_LIMITS[self.channel]
        if self.n_max > limit:
            raise ValueError(f"n_max={self.n_max} above the {self.channel} limit {limit}; "
                             "set extended = true to lift it")
        if self.samples < 1 or self.trials < 1:
            raise ValueError("samples and trials must be >= 1")
        parse_k_rule(self.k_rule)

    @property
    def ns(self):
        return list(range(self.n_min, self.n_max + 1))

    def spec(self, p):
        return ChannelSpec(self.channel, p)

    @classmethod
    def from_mapping(cls, data):
        names = {f.name for f in fields(cls)}
        flat = {}
        for key, val in data.items():
            if isinstance(val, dict):
                if key in ("config",):
                    flat.update(val)
                continue
            flat[key] = val
        unknown = set(flat) - names - {"command"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        flat.pop("command", None)
        return cls(**flat)

    @classmethod
    def load(cls, path):
        """Read a TOML file, or the header of a CSV written by this module."""
        text = Path(path).read_text()
        if not text.lstrip().startswith("#") and not path_is_toml(path):
            raise ValueError(f"{path} holds no configuration")
        return cls.from_mapping(parse_header(text) if text.startswith("#") else
                                tomllib.loads(text))

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def result_dict(self):
        d = asdict(self)
        return {k: d[k] for k in self.RESULT_KEYS}

    def cache_obj(self):
        return ReliabilityCache(self.cache or None)


def path_is_toml(path):
    return str(path).endswith(".toml")


def parse_k_rule(rule):
    """``auto`` (1% of the dual dimension, at least 1), ``fixed:K`` or ``frac:F``."""
    if rule == "auto":
        return ("auto", None)
    kind, _, val = rule.partition(":")
    if kind == "fixed" and val.isdigit() and int(val) >= 1:
        return ("fixed", int(val))
    if kind == "frac":
        f = float(val)
        if 0.0 < f <= 1.0:
            return ("frac", f)
    raise ValueError(f"bad k rule {rule!r}; use auto, fixed:K or frac:F")


def resolve_k(rule, dual_dim):
    kind, val = parse_k_rule(rule)
    if kind == "auto":
        return default_k(dual_dim)
    if kind == "fixed":
        return min(val, dual_dim)
    return max(1, int(math.floor(val * dual_dim)))


# TOML header -----------------------------------------------------------------

def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        r = repr(v)
        return r if ("." in r or "e" in r) else r + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot encode {type(v)} in TOML")


def render_header(command, cfg, tables=None):
    lines = [f"command = {_toml_value(command)}", "[config]"]
    for k, v in cfg.result_dict().items():
        lines.append(f"{k} = {_toml_value(v)}")
    if tables:
        lines.append("[tables]")
        for k in sorted(tables):
            lines.append(f"{json.dumps(k)} = {json.dumps(tables[k])}")
    return "".join(f"# {ln}\n" for ln in lines)


def parse_header(text):
    body = []
    for ln in text.splitlines():
        if not ln.startswith("#"):
            break
        body.append(ln[2:] if ln.startswith("# ") else ln[1:])
    return tomllib.loads("\n".join(body))


def header_command(path):
    return parse_header(Path(path).read_text()).get("command")


def _csv_value(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(command, cfg, columns, rows, tables=None):
    buf = io.StringIO()
    buf.write(render_header(command, cfg, tables))
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_csv_value(r[c]) for c in columns) + "\n")
    return buf.getvalue()


def read_csv(path_or_text):
    text = path_or_text
    if not ("\n" in str(path_or_text)):
        text = Path(path_or_text).read_text()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = {}
        for c, v in zip(cols, vals):
            try:
                row[c] = int(v)
            except ValueError:
                try:
                    row[c] = float(v)
                except ValueError:
                    row[c] = v
        out.append(row)
    return out


# fitting -----------------------------------------------------------------------

@dataclass
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    points: int


def fit_loglog(x, y):
    """Least-squares line through ``(log2 x, log2 y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two points")
    if (x <= 0).any() or (y <= 0).any():
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log2(x), np.log2(y)
    if np.unique(lx).size < 2:
        raise ValueError("abscissae are degenerate")
    if np.ptp(ly) == 0.0:
        return FitResult(0.0, float(ly[0]), 1.0, int(x.size))
    res = linregress(lx, ly)
    return FitResult(float(res.slope), float(res.intercept),
                     float(min(1.0, max(0.0, res.rvalue ** 2))), int(x.size))


# sweeps ------------------------------------------------------------------------

def _table_key(cfg, p, n):
    ch = cfg.spec(p)
    s = cfg.samples if ch.short == "bsc" else 0
    sd = cfg.seed if ch.short == "bsc" else 0
    return f"{ch.short}_p{p!r}_n{n}_s{s}_seed{sd}"


def _get_table(cfg, p, n):
    ch = cfg.spec(p)
    return cfg.cache_obj().get(ch.kind, p, n, cfg.samples, cfg.seed, workers=cfg.workers)


def _table_digest(table):
    data = np.frombuffer(table.to_bytes(), dtype=np.uint8)
    return f"{int(kernels.fnv1a64(np.ascontiguousarray(data))):016x}"


def _search_point(args):
    cfg, p, n = args
    table = _get_table(cfg, p, n)
    code, rep = smallest_triply_even_code(table, channel=cfg.spec(p))
    return {
        "p": p, "n": n, "N": 1 << n, "I_size": rep.I_size, "dual_dim": rep.dual_dim,
        "dual_rate": rep.dual_dim / (1 << n), "log2_eps": rep.threshold_log2_eps,
        "llr": llr_figure_point(rep.threshold_log2_eps) if rep.threshold_log2_eps < 0 else 0.0,
        "neg_log2_eps": -rep.threshold_log2_eps,
        "capacity_ok": rep.capacity_ok, "_digest": _table_digest(table),
        "_key": _table_key(cfg, p, n),
    }


@dataclass
class SweepResult:
    command: str
    csv: str
    rows: list
    fits: dict
    partial: bool
    paths: dict = field(default_factory=dict)


def _run_points(cfg, points, func):
    """Evaluate points in order; stops early when the time budget runs out."""
    t0 = time.perf_counter()
    results = []
    partial = False
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            futs = [ex.submit(func, (cfg,) + pt) for pt in points]
            for f in futs:
                results.append(f.result())
                if cfg.budget_seconds and time.perf_counter() - t0 > cfg.budget_seconds:
                    partial = len(results) < len(points)
                    for g in futs:
                        g.cancel()
                    break
        return results, partial
    for pt in points:
        if cfg.budget_seconds and time.perf_counter() - t0 > cfg.budget_seconds:
            partial = True
            break
        results.append(func((cfg,) + pt))
    return results, partial


DIM_COLUMNS = ["channel", "p", "n", "N", "I_size", "dual_dim", "dual_rate", "log2_eps",
               "capacity_ok"]
ERR_COLUMNS = ["channel", "p", "n", "N", "I_size", "log2_eps", "llr", "neg_log2_eps"]
SIM_COLUMNS = ["N", "k", "p", "q", "trials", "bit_error", "ci_lo", "ci_hi", "word_error",
               "union_bound_log2", "seed", "status"]


def _finish(command, cfg, columns, rows, partial, fits=None, write=True, stem=None):
    tables = {r["_key"]: r["_digest"] for r in rows if "_key" in r}
    for r in rows:
        r["channel"] = cfg.channel
    text = render_csv(command, cfg, columns, rows, tables)
    if partial:
        text += "# partial: time budget exhausted before all points ran\n"
    res = SweepResult(command, text, rows, fits or {}, partial)
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or command.replace("-", "_")
        p_csv = out / f"{stem}.csv"
        p_csv.write_text(text)
        res.paths["csv"] = p_csv
        if fits:
            p_fit = out / f"{stem}_fit.json"
            p_fit.write_text(json.dumps({repr(k): asdict(v) for k, v in fits.items()},
                                        indent=2, sort_keys=True) + "\n")
            res.paths["fit"] = p_fit
        p_gp = out / f"{stem}.gp"
        p_gp.write_text(gnuplot_script(command, p_csv.name, cfg))
        res.paths["gnuplot"] = p_gp
    return res


def _fits(rows, cfg, ycol, transform=None):
    fits = {}
    for p in cfg.p:
        pts = [r for r in rows if r["p"] == p]
        if len(pts) >= 2:
            y = [r[ycol] for r in pts]
            if transform is not None:
                y = [transform(v) for v in y]
            try:
                fits[p] = fit_loglog([r["N"] for r in pts], y)
            except ValueError as exc:
                log.warning("no fit for p=%r: %s", p, exc)
    return fits


def run_dimension_sweep(cfg, write=True):
    """Smallest triply-even-dual code per (p, n); fits log2(dual_dim/N) against log2 N."""
    points = [(p, n) for p in cfg.p for n in cfg.ns]
    rows, partial = _run_points(cfg, points, _search_point)
    return _finish("sweep-dim", cfg, DIM_COLUMNS, rows, partial,
                   _fits(rows, cfg, "dual_rate"), write)


def run_error_sweep(cfg, write=True):
    """Threshold of the smallest qualifying code per (p, n): LLR and -log2 eps."""
    points = [(p, n) for p in cfg.p for n in cfg.ns]
    rows, partial = _run_points(cfg, points, _search_point)
    return _finish("sweep-err", cfg, ERR_COLUMNS, rows, partial, None, write)


def _sim_point(args):
    cfg, p, n = args
    table = _get_table(cfg, p, n)
    ch = cfg.spec(p)
    code, rep = smallest_triply_even_code(table, channel=ch)
    k = resolve_k(cfg.k_rule, rep.dual_dim)
    css = build_css(code, k=k, rule=cfg.puncture_rule, seed=cfg.seed)
    ub = union_bound_log2(table, code)
    row = {"N": 1 << n, "k": css.k, "p": p, "q": css.k / (1 << n), "seed": cfg.seed,
           "union_bound_log2": ub, "_digest": _table_digest(table),
           "_key": _table_key(cfg, p, n)}
    rare = math.isfinite(ub) and (2.0 ** ub) * cfg.trials < cfg.rare_event_factor
    if rare:
        row.update(trials=0, bit_error=math.nan, ci_lo=math.nan, ci_hi=math.nan,
                   word_error=math.nan, status="not_simulated")
        return row
    est = simulate(NoiseRun(css, ch, cfg.trials, cfg.seed, cfg.stop_failures), table=table)
    r = est.row()
    r.pop("union_bound_log2")
    row.update(r)
    row["status"] = "simulated"
    return row


def run_simulation(cfg, write=True):
    """Error-rate estimates of the tri-orthogonal code built at each (p, n).

    Points whose design union bound predicts fewer than ``rare_event_factor``
    failures over ``trials`` are reported with the bound only.
    """
    points = [(p, n) for p in cfg.p for n in cfg.ns]
    rows, partial = _run_points(cfg, points, _sim_point)
    return _finish("simulate", cfg, SIM_COLUMNS, rows, partial, None, write)


def regenerate(path):
    """Re-run the command recorded in a CSV header; returns the new CSV text."""
    head = parse_header(Path(path).read_text())
    cfg = ExperimentConfig.from_mapping(head)
    runner = RUNNERS[head["command"]]
    return runner(cfg, write=False).csv


RUNNERS = {
    "sweep-dim": run_dimension_sweep,
    "sweep-err": run_error_sweep,
    "simulate": run_simulation,
}


def gnuplot_script(command, csv_name, cfg):
    """Plot script for a result CSV (one series per noise rate)."""
    if command == "sweep-dim":
        pcol, x, y, ylabel = 2, "(log($4)/log(2))", "(log($7)/log(2))", "log2(dim C^perp / N)"
    elif command == "sweep-err":
        pcol, x = 2, "(log($4)/log(2))"
        y, ylabel = ("7", "log2((1-eps)/eps)") if cfg.channel == "bec" else ("8", "-log2(eps)")
        y = f"${y}"
    else:
        pcol, x, y, ylabel = 3, "(log($1)/log(2))", "6", "bit error rate"
        y = f"${y}"
    series = [f"'{csv_name}' every ::1 using {x}:(${pcol}=={p!r} ? {y} : 1/0) "
              f"with linespoints title 'p={p!r}'" for p in cfg.p]
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set xlabel 'log2 N'",
        f"set ylabel '{ylabel}'",
        "set grid",
        "set terminal pngcairo size 800,600",
        f"set output '{Path(csv_name).stem}.png'",
        "plot " + ", \\\n     ".join(series),
    ]
    return "\n".join(lines) + "\n"
