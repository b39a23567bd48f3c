"""Command-line front end.

Subcommands: bound, best, project, portfolio, table1, frontier.

Exit codes: 0 ok, 1 numeric failure, 2 infeasible set, 64 usage error.
Diagnostics go to stderr. Data goes to --out/--json files and, with
--stdout (or when no file is given), to stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .distortion import make_distortion, parse_metric, weight_of
from .envelope import RegimeError
from .portfolio import EllipticalReference, PortfolioProblem, SampleReference, optimize
from .reference import NormalQuantile, ParameterError, PiecewiseAffine, parse_reference
from .unimodal import (DegenerateProjection, project, worst_case_interval_inflection,
                       worst_case_unimodal, worst_case_unimodal_wasserstein)
from .worstcase import InfeasibleError, MomentWassersteinSet, NumericError, best_case, worst_case

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("robustrisk")

EXIT_OK, EXIT_NUMERIC, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2, 64
COMMANDS = ("bound", "best", "project", "portfolio", "table1", "frontier")

# Table 1 setup: two assets, normal reference.
TABLE1_MU = (-2.0, -1.0)
TABLE1_COV = {1: ((4.0, 0.5), (0.5, 1.0)), 2: ((4.0, -0.5), (-0.5, 1.0))}
TABLE1_EPS = (1.0, 0.01, 1e-10)
TABLE1_METRICS = ("gd", "mmd", "iqd(0.05)", "var(0.975)", "es(0.95)",
                  "gluevar(0.975,0.95,1/3,2/3)")
TABLE1_LABELS = dict(zip(TABLE1_METRICS, ("GD", "MMD", "IQD", "VaR", "ES", "GlueVaR")))
# published w1 per (metric, covariance), in TABLE1_EPS order
TABLE1_PUBLISHED = {
    ("gd", 1): (0.125, 0.127662, 0.125012),
    ("mmd", 1): (0.125, 0.138291, 0.125016),
    ("iqd(0.05)", 1): (0.125, 0.131529, 0.125),
    ("var(0.975)", 1): (0.303327, 0.328864, 0.247684),
    ("es(0.95)", 1): (0.269148, 0.274060, 0.246388),
    ("gluevar(0.975,0.95,1/3,2/3)", 1): (0.270353, 0.232010, 0.217790),
    ("gd", 2): (0.25, 0.251006, 0.25),
    ("mmd", 2): (0.25, 0.255338, 0.249999),
    ("iqd(0.05)", 2): (0.25, 0.267094, 0.25),
    ("var(0.975)", 2): (0.297553, 0.335085, 0.316077),
    ("es(0.95)", 2): (0.290089, 0.326609, 0.315379),
    ("gluevar(0.975,0.95,1/3,2/3)", 2): (0.289914, 0.307378, 0.300194),
}
FRONTIER_GRID = (-10.0, 1.0, 40)  # log10 lo, log10 hi, points


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config


def _num(x):
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if "/" in s:
            a, b = s.split("/", 1)
            return float(a) / float(b)
        return float(s)
    return float(x)


def _vec(x):
    if x is None:
        return None
    if isinstance(x, str):
        x = [t for t in x.replace(";", ",").split(",") if t.strip()]
    return tuple(_num(t) for t in x)


@dataclass(frozen=True)
class RunConfig:
    command: str
    metric: str | None = None
    mu: float = 0.0
    sigma: float = 1.0
    epsilon: float = math.inf
    reference: str = "normal(0,1)"
    xi: float | None = None
    xi_interval: tuple | None = None
    step: str | None = None
    n_pieces: int = 256
    mu_vec: tuple | None = None
    cov: tuple | None = None
    generator: str = "normal"
    df: float | None = None
    sample: str | None = None
    bound: float | None = None
    starts: int = 8
    metrics: tuple | None = None
    covariance: int = 1
    eps_grid: tuple | None = None
    out: str | None = None
    json: str | None = None
    quantile_csv: str | None = None
    seed: int = 0
    precision: int = 6
    stdout: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for name in ("mu", "sigma", "epsilon"):
            object.__setattr__(self, name, _num(getattr(self, name)))
        for name in ("xi", "bound", "df"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _num(v))
        for name in ("xi_interval", "mu_vec", "cov", "eps_grid"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        if isinstance(self.metrics, str):
            object.__setattr__(self, "metrics", tuple(_split_metrics(self.metrics)))
        elif self.metrics is not None:
            object.__setattr__(self, "metrics", tuple(self.metrics))
        for name in ("n_pieces", "starts", "covariance", "seed", "precision"):
            object.__setattr__(self, name, int(getattr(self, name)))
        self.validate()

    def validate(self):
        c = self.command
        if c in ("bound", "best") and not self.metric:
            raise UsageError(f"{c} needs --metric")
        if c == "project" and not (self.metric or self.step):
            raise UsageError("project needs --metric or --step")
        if c in ("bound", "best"):
            if not self.sigma > 0:
                raise UsageError("sigma must be positive")
            if not self.epsilon > 0:
                raise UsageError("epsilon must be positive (inf drops the ball)")
        if self.xi is not None and not 0 <= self.xi <= 1:
            raise UsageError("xi must lie in [0, 1]")
        if self.xi_interval is not None:
            if len(self.xi_interval) != 2 or not 0 <= self.xi_interval[0] < self.xi_interval[1] <= 1:
                raise UsageError("xi interval must be a,b with 0 <= a < b <= 1")
        if c == "project" and self.xi is None:
            raise UsageError("project needs --xi")
        if c == "portfolio":
            if not self.metric or self.mu_vec is None or self.cov is None:
                raise UsageError("portfolio needs --metric, --mu-vec and --cov")
            if len(self.cov) != len(self.mu_vec) ** 2:
                raise UsageError("cov must hold n*n entries (row-major)")
        if self.covariance not in TABLE1_COV:
            raise UsageError("covariance must be 1 or 2")
        if self.eps_grid is not None and len(self.eps_grid) == 0:
            raise UsageError("empty eps grid")
        if self.n_pieces < 2 or self.starts < 1 or self.precision < 0:
            raise UsageError("n-pieces >= 2, starts >= 1 and precision >= 0 are required")
        if self.metric:
            try:
                parse_metric(self.metric)
            except ParameterError as exc:
                raise UsageError(str(exc)) from None
        for m in self.metrics or ():
            try:
                parse_metric(m)
            except ParameterError as exc:
                raise UsageError(str(exc)) from None

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and math.isinf(v):
                d[k] = "inf" if v > 0 else "-inf"
            elif isinstance(v, tuple):
                d[k] = list(v)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_mapping(cls, data):
        names = {f.name for f in fields(cls)}
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config: {exc}") from None


def _split_metrics(text):
    # commas separate metrics except inside parentheses
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def load_config_file(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    try:
        if str(path).lower().endswith(".toml"):
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None


# ------------------------------------------------------------------ argparse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON or TOML file; flags override its values")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("--json", help="JSON output path")
    common.add_argument("--seed", type=int)
    common.add_argument("--precision", type=int, help="CSV decimals (default 6)")
    common.add_argument("--stdout", action="store_true", default=None,
                        help="write data to stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    one = _Parser(add_help=False)
    one.add_argument("--metric")
    one.add_argument("--mu")
    one.add_argument("--sigma")
    one.add_argument("--eps", dest="epsilon")
    one.add_argument("--ref", dest="reference", help="normal(m,s), t(df), uniform(a,b), sample:PATH")
    one.add_argument("--xi")
    one.add_argument("--xi-interval", dest="xi_interval", help="a,b")
    one.add_argument("--n-pieces", dest="n_pieces", type=int)
    one.add_argument("--quantile-csv", dest="quantile_csv", help="extremal quantile CSV path")

    p = _Parser(prog="robustrisk", description="Worst-case distortion risk bounds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("bound", parents=[common, one], help="worst-case value")
    sub.add_parser("best", parents=[common, one], help="best-case value")
    pr = sub.add_parser("project", parents=[common], help="project a weight onto the unimodal cone")
    pr.add_argument("--metric")
    pr.add_argument("--step", help="breaks;levels, e.g. '0,0.5,1;-1,1'")
    pr.add_argument("--xi")
    pr.add_argument("--n-pieces", dest="n_pieces", type=int)
    po = sub.add_parser("portfolio", parents=[common], help="robust portfolio weights")
    po.add_argument("--metric")
    po.add_argument("--mu-vec", dest="mu_vec")
    po.add_argument("--cov", help="row-major covariance entries")
    po.add_argument("--eps", dest="epsilon")
    po.add_argument("--generator", choices=("normal", "t"))
    po.add_argument("--df")
    po.add_argument("--sample", help="CSV of joint sample rows (one column per asset)")
    po.add_argument("--bound", help="admissible weights satisfy w'mu <= bound")
    po.add_argument("--xi")
    po.add_argument("--starts", type=int)
    sub.add_parser("table1", parents=[common], help="Table 1 grid of optimal w1")
    fr = sub.add_parser("frontier", parents=[common], help="optimal w1 across radii")
    fr.add_argument("--metrics", help="comma-separated metric list")
    fr.add_argument("--covariance", type=int, choices=(1, 2))
    fr.add_argument("--eps-grid", dest="eps_grid", help="explicit comma-separated radii")
    return p


def config_from_args(argv):
    args = build_parser().parse_args(argv)
    data = {}
    if args.config:
        data.update(load_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "verbose")}
    if data.get("command") not in (None, flags["command"]):
        raise UsageError(f"config is for {data['command']!r}, not {flags['command']!r}")
    data.update(flags)
    return RunConfig.from_mapping(data), args.verbose


# ------------------------------------------------------------------ commands


def _set(cfg):
    ref = parse_reference(cfg.reference)
    return MomentWassersteinSet(cfg.mu, cfg.sigma, cfg.epsilon, ref)


def _bound_result(cfg):
    g = make_distortion(parse_metric(cfg.metric))
    if cfg.xi_interval is not None:
        S = None if math.isinf(cfg.epsilon) else _set(cfg)
        return worst_case_interval_inflection(g, cfg.mu, cfg.sigma, *cfg.xi_interval, S=S)
    if cfg.xi is not None:
        if math.isinf(cfg.epsilon):
            return worst_case_unimodal(g, cfg.mu, cfg.sigma, cfg.xi)
        return worst_case_unimodal_wasserstein(g, _set(cfg), cfg.xi, n=cfg.n_pieces)
    return worst_case(g, _set(cfg))


def cmd_bound(cfg):
    r = _bound_result(cfg)
    return _emit_bound(cfg, r)


def cmd_best(cfg):
    if cfg.xi is not None or cfg.xi_interval is not None:
        raise UsageError("best-case bounds under unimodality are not provided")
    r = best_case(make_distortion(parse_metric(cfg.metric)), _set(cfg))
    return _emit_bound(cfg, r)


def _emit_bound(cfg, r):
    qpath = cfg.quantile_csv
    if qpath and r.extremal_quantile is not None:
        r.write_quantile(qpath)
    else:
        qpath = None
    d = r.to_dict(qpath)
    d.update(command=cfg.command, metric=cfg.metric, epsilon=_jsonable(cfg.epsilon))
    d["diagnostics"] = {k: _jsonable(v) for k, v in r.diagnostics.items()
                        if isinstance(v, (int, float, str, bool))}
    row = {"metric": cfg.metric, "mu": cfg.mu, "sigma": cfg.sigma, "epsilon": cfg.epsilon,
           "value": r.value, "lambda": r.lam, "regime": r.regime, "attained": r.attained}
    _write(cfg, d, [row])
    log.info("%s %s: value=%.10g regime=%s", cfg.command, cfg.metric, r.value, r.regime)
    return EXIT_OK


def _parse_step(text):
    try:
        b, l = text.split(";")
        br, lv = np.array(_vec(b)), np.array(_vec(l))
    except ValueError:
        raise UsageError("--step must look like 'b0,...,bn;l1,...,ln'") from None
    if br.size != lv.size + 1:
        raise UsageError("--step needs one more break than levels")
    z = np.zeros_like(lv)
    return PiecewiseAffine(br, lv, z, z)


def cmd_project(cfg):
    if cfg.step:
        gam = _parse_step(cfg.step)
    else:
        gam = weight_of(make_distortion(parse_metric(cfg.metric)))
    pr = project(gam, cfg.xi, n=cfg.n_pieces)
    d = dict(pr.to_dict(), command="project", parameters=_jsonable(pr.parameters))
    if cfg.out:
        pr.to_csv(cfg.out)
    u = np.linspace(0.0, 1.0, 401)
    u[0], u[-1] = 1e-9, 1 - 1e-9
    rows = [{"u": a, "gamma": b, "projected": c} for a, b, c in zip(u, gam(u), pr.projected(u))]
    _write(cfg, d, rows, csv_written=bool(cfg.out))
    return EXIT_OK


def _portfolio_problem(cfg, metric=None, eps=None, cov=None, mu_vec=None):
    mu_vec = mu_vec if mu_vec is not None else cfg.mu_vec
    n = len(mu_vec)
    cov = np.asarray(cov if cov is not None else cfg.cov, dtype=float).reshape(n, n)
    if cfg.sample:
        rows = np.loadtxt(cfg.sample, delimiter=",", ndmin=2)
        ref = SampleReference(rows)
    else:
        ref = EllipticalReference(cfg.generator, cfg.df)
    return PortfolioProblem(mu_vec, cov, cfg.epsilon if eps is None else eps,
                            metric or cfg.metric, ref, cfg.bound, cfg.xi)


def cmd_portfolio(cfg):
    res = optimize(_portfolio_problem(cfg), seed=cfg.seed, n_starts=cfg.starts)
    d = dict(res.to_dict(), command="portfolio", metric=cfg.metric,
             epsilon=_jsonable(cfg.epsilon))
    row = {"metric": cfg.metric, "epsilon": cfg.epsilon}
    row.update({f"w{i + 1}": x for i, x in enumerate(res.weights)})
    row.update(objective=res.objective, lambda_w=res.lambda_w)
    _write(cfg, d, [row])
    return EXIT_OK


def _cell(args):
    metric, k, eps, seed, starts = args
    p = PortfolioProblem(TABLE1_MU, TABLE1_COV[k], eps, metric)
    try:
        r = optimize(p, seed=seed, n_starts=starts)
    except (InfeasibleError, NumericError, RegimeError, ArithmeticError) as exc:
        return {"w1": math.nan, "objective": math.nan, "error": str(exc)}
    return {"w1": float(r.weights[0]), "objective": float(r.objective), "error": ""}


def workers():
    n = os.cpu_count() or 1
    cap = os.environ.get("ROBUSTRISK_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError("ROBUSTRISK_THREADS must be an integer") from None
    return n


def run_cells(cells):
    """Evaluate cells over a process pool; results keep the input order."""
    n = min(workers(), len(cells))
    if n <= 1:
        return [_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_cell, cells))


def table1_rows(seed=0, starts=8, metrics=TABLE1_METRICS):
    cells = [(m, k, e, seed, starts) for k in (1, 2) for m in metrics for e in TABLE1_EPS]
    rows = []
    for (m, k, e, *_), r in zip(cells, run_cells(cells)):
        pub = TABLE1_PUBLISHED[(m, k)][TABLE1_EPS.index(e)]
        rows.append({"metric": TABLE1_LABELS.get(m, m), "spec": m, "covariance": k,
                     "epsilon": e, "w1": r["w1"], "published_w1": pub,
                     "abs_deviation": abs(r["w1"] - pub), "objective": r["objective"],
                     "error": r["error"]})
    return rows


def cmd_table1(cfg):
    rows = table1_rows(cfg.seed, cfg.starts)
    _write(cfg, {"command": "table1", "rows": rows}, rows)
    return EXIT_NUMERIC if any(r["error"] for r in rows) else EXIT_OK


def frontier_grid(cfg):
    if cfg.eps_grid:
        return tuple(cfg.eps_grid)
    lo, hi, n = FRONTIER_GRID
    return tuple(float(x) for x in np.logspace(lo, hi, n))


def frontier_rows(cfg):
    metrics = cfg.metrics or TABLE1_METRICS
    grid = frontier_grid(cfg)
    cells = [(m, cfg.covariance, e, cfg.seed, cfg.starts) for m in metrics for e in grid]
    rows = []
    for (m, k, e, *_), r in zip(cells, run_cells(cells)):
        rows.append({"metric": TABLE1_LABELS.get(m, m), "spec": m, "covariance": k,
                     "epsilon": e, "w1": r["w1"], "objective": r["objective"],
                     "error": r["error"]})
    return rows


def cmd_frontier(cfg):
    rows = frontier_rows(cfg)
    _write(cfg, {"command": "frontier", "rows": rows}, rows)
    return EXIT_NUMERIC if any(r["error"] for r in rows) else EXIT_OK


DISPATCH = {"bound": cmd_bound, "best": cmd_best, "project": cmd_project,
            "portfolio": cmd_portfolio, "table1": cmd_table1, "frontier": cmd_frontier}


# ------------------------------------------------------------------ output


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def format_csv(rows, precision=6):
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v, precision) for k, v in r.items()})
    return buf.getvalue()


def _fmt(v, precision):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        if v != 0 and abs(v) < 10 ** -precision:
            return f"{v:.{precision}e}"
        return f"{v:.{precision}f}"
    return str(v)


def _write(cfg, payload, rows, csv_written=False):
    text = format_csv(rows, cfg.precision)
    if cfg.out and not csv_written:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    js = json.dumps(_jsonable(payload), indent=2)
    if cfg.json:
        with open(cfg.json, "w") as fh:
            fh.write(js + "\n")
    if cfg.stdout or not (cfg.out or cfg.json):
        # tabular commands print CSV, single results print JSON
        sys.stdout.write(text if cfg.command in ("table1", "frontier") else js + "\n")


# ------------------------------------------------------------------ main


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s: %(message)s")
    try:
        cfg, verbose = config_from_args(sys.argv[1:] if argv is None else argv)
        if verbose:
            log.setLevel(logging.INFO)
        return DISPATCH[cfg.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        print(json.dumps({"infeasible": True, "threshold": _jsonable(exc.threshold),
                          "message": str(exc)}), file=sys.stderr)
        return EXIT_INFEASIBLE
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, RegimeError, DegenerateProjection, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
