"""Command-line front end.

    arbgeom boyling                      decay slopes, loop gains, leaf curve
    arbgeom expfam --model bernoulli --theta 0
    arbgeom sufficiency --family mixture --n-max 6
    arbgeom arb rates.csv                exit 2 when arbitrage is found
    arbgeom flow --model bernoulli --eta0 0.9 --theta-star 0
    arbgeom onsager --matrix "0,1;-1,0"

stdout carries data only; diagnostics go to stderr.  Numbers are printed
with 9 significant digits so output is byte-stable across runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics, expfam, forms, market_graph, sufficiency
from .errors import ArbGeomError, DuplicateEdgeError, ParseError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ARBITRAGE = 2

SUBCOMMANDS = ("boyling", "expfam", "sufficiency", "arb", "flow", "onsager")
FORMATS = ("json", "csv", "table")

# tolerance names each subcommand accepts via --tolerance KEY=VALUE
TOLERANCE_KEYS = {
    "boyling": {"leaf_drift"},
    "expfam": {"newton"},
    "sufficiency": {"ratio"},
    "arb": {"cycle", "potential"},
    "flow": set(),
    "onsager": {"symmetry"},
}


@dataclass
class RunConfig:
    subcommand: str
    input_path: Optional[str] = None
    output_format: str = "table"
    tolerances: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.output_format not in FORMATS:
            raise ValueError(f"unknown format {self.output_format!r}")
        allowed = TOLERANCE_KEYS[self.subcommand] | {"tol"}
        for key, value in self.tolerances.items():
            if key not in allowed:
                raise ValueError(f"unknown tolerance key {key!r} for {self.subcommand}")
            if not value > 0:
                raise ValueError(f"tolerance {key!r} must be positive")

    def tol(self, key: str, default: float) -> float:
        return self.tolerances.get(key, self.tolerances.get("tol", default))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- formatting --------------------------------------------------------------


def fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = format(v, ".9g")
    return "0" if s == "-0" else s


def _jsonable(v):
    if isinstance(v, (np.ndarray, list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_)) or v is None or isinstance(v, str):
        return bool(v) if isinstance(v, np.bool_) else v
    if isinstance(v, (int, np.integer)):
        return int(v)
    f = float(v)
    return float(fmt(f)) if math.isfinite(f) else None


def _table_value(v) -> str:
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        if v and isinstance(v[0], (list, tuple)):
            return "; ".join(" ".join(_table_value(x) for x in row) for row in v)
        return " ".join(_table_value(x) for x in v)
    if isinstance(v, dict):
        return " ".join(f"{k}={_table_value(x)}" for k, x in v.items())
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return str(v).lower() if isinstance(v, bool) else str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def render_record(record: dict, output_format: str) -> str:
    """Render a flat name -> value mapping."""
    if output_format == "json":
        return json.dumps(_jsonable(record)) + "\n"
    if output_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in record.items():
            w.writerow([k, _table_value(v)])
        return buf.getvalue()
    width = max(len(k) for k in record)
    return "".join(f"{k.ljust(width)}  {_table_value(v)}\n" for k, v in record.items())


def render_rows(header: list, rows: list, output_format: str) -> str:
    """Render a table of numeric rows."""
    if output_format == "json":
        return json.dumps([_jsonable(dict(zip(header, r))) for r in rows]) + "\n"
    cells = [[_table_value(x) for x in r] for r in rows]
    if output_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(cells)
        return buf.getvalue()
    widths = [max([len(h)] + [len(c[i]) for c in cells]) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(wd) for h, wd in zip(header, widths))]
    lines += ["  ".join(c.rjust(wd) for c, wd in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


# -- input parsing -----------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _matrix(text: str) -> np.ndarray:
    rows = [_floats(r) for r in text.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise UsageError("matrix rows must have equal length")
    return np.array(rows)


def parse_rates(path) -> market_graph.MarketGraph:
    """Load a rate graph from CSV (``from,to,rate``) or JSON (``{"edges": [...]}``)."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if str(path).lower().endswith(".json") or text.lstrip().startswith("{"):
        return _parse_rates_json(text)
    return _parse_rates_csv(text)


def _check_edge(a, b, rate_text, seen, line, unit="line"):
    """Validate one edge; ``line`` is a CSV line number or a JSON edge index."""
    col = (lambda c: c) if unit == "line" else (lambda c: None)
    if not a:
        raise ParseError("empty 'from' identifier", line, col(1), unit)
    if not b:
        raise ParseError("empty 'to' identifier", line, col(2), unit)
    try:
        rate = float(rate_text)
    except (TypeError, ValueError):
        raise ParseError(f"rate {rate_text!r} is not a number", line, col(3), unit) from None
    if not (rate > 0 and math.isfinite(rate)):
        raise ParseError(f"rate must be positive and finite, got {rate_text}", line, col(3), unit)
    if a == b:
        raise ParseError(f"self-loop at {a!r}", line, col(1), unit)
    if (a, b) in seen:
        raise DuplicateEdgeError(f"duplicate edge {a}->{b} (first at {unit} {seen[(a, b)]})", line, None, unit)
    seen[(a, b)] = line
    return a, b, rate


def _parse_rates_csv(text: str) -> market_graph.MarketGraph:
    reader = csv.reader(io.StringIO(text))
    edges, seen = [], {}
    header_seen = False
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if not header_seen:
            if [c.lower() for c in cells] != ["from", "to", "rate"]:
                raise ParseError("header must be 'from,to,rate'", line, 1)
            header_seen = True
            continue
        if len(cells) != 3:
            # column of the first missing or first surplus field
            raise ParseError(f"expected 3 fields, found {len(cells)}", line, min(len(cells) + 1, 4))
        edges.append(_check_edge(cells[0], cells[1], cells[2], seen, line))
    if not header_seen:
        raise ParseError("empty rates file", 1, 1)
    return market_graph.MarketGraph.from_edges(edges)


def _parse_rates_json(text: str) -> market_graph.MarketGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("edges"), list):
        raise ParseError("JSON rates must be an object with an 'edges' list")
    edges, seen = [], {}
    for k, e in enumerate(doc["edges"], start=1):
        if not isinstance(e, dict) or not {"from", "to", "rate"} <= e.keys():
            raise ParseError("needs 'from', 'to' and 'rate'", k, None, "edge")
        edges.append(_check_edge(str(e["from"]), str(e["to"]), e["rate"], seen, k, "edge"))
    return market_graph.MarketGraph.from_edges(edges)


def _model_from_args(args) -> expfam.ExponentialFamilyModel:
    if args.model_file:
        return expfam.load_model(args.model_file)
    name = args.model
    if name == "bernoulli":
        return expfam.bernoulli()
    if name in ("poisson", "poisson_truncated"):
        return expfam.poisson_truncated(args.max_count)
    if name in ("gaussian", "gaussian_unit_variance"):
        return expfam.gaussian_unit_variance()
    if name == "categorical":
        return expfam.categorical(args.k)
    raise UsageError(f"unknown model {name!r}")


def _vector(text: Optional[str], dim: int, default: float) -> np.ndarray:
    if text is None:
        return np.full(dim, default)
    v = np.array(_floats(text))
    if v.shape != (dim,):
        raise UsageError(f"expected {dim} value(s), got {text!r}")
    return v


# -- subcommands -------------------------------------------------------------


def cmd_boyling(args, cfg: RunConfig):
    form = forms.boyling_form()
    x0, x1, y0, y1 = _floats(args.rect)
    rect = forms.ParametricPath.rectangle(x0, x1, y0, y1)
    gain = forms.loop_gain(form, rect, refine=args.refine)
    oracle = forms.green_oracle(form, x0, x1, y0, y1)
    exact = forms.exact_form(lambda p: p[..., ::-1], 2, vectorized=True)
    exact_gain = forms.loop_gain(exact, rect, refine=args.refine)
    lower = forms.decay_exponent_probe("lower", args.x0, args.gap, args.samples)
    upper = forms.decay_exponent_probe("upper", args.x0, args.gap, args.samples)
    start = _floats(args.start)
    curve = forms.characteristic_curve(form, start, args.arclength, args.step)
    t_start = forms.leaf_invariant(start).value
    drift = max(abs(forms.leaf_invariant(p).value - t_start) for p in curve.samples)

    if args.curve_out:
        _write(args.curve_out, forms.curve_to_csv(curve))
    if args.probe_out:
        text = lower.to_csv() + upper.to_csv().split("\n", 1)[1]
        _write(args.probe_out, text)

    if cfg.output_format == "csv":
        return forms.curve_to_csv(curve), EXIT_OK
    record = {
        "loop_gain": gain,
        "green_oracle": oracle,
        "exact_loop_gain": exact_gain,
        "slope_lower": lower.fitted_slope,
        "slope_upper": upper.fitted_slope,
        "residual_lower": lower.residual,
        "residual_upper": upper.residual,
        "leaf_t": t_start,
        "leaf_drift": drift,
        "leaf_drift_ok": drift <= cfg.tol("leaf_drift", 1e-5),
        "curve_samples": len(curve.samples),
    }
    return render_record(record, cfg.output_format), EXIT_OK


def cmd_expfam(args, cfg: RunConfig):
    model = _model_from_args(args)
    theta = _vector(args.theta, model.param_dim, 0.0)
    theta_p = _vector(args.theta_prime, model.param_dim, 0.0)
    eta = expfam.mean_params(model, theta)
    eta_p = expfam.mean_params(model, theta_p)
    tol = cfg.tol("newton", 1e-12)
    theta_back = expfam.natural_from_mean(model, eta, tol)
    record = {
        "model": model.kind,
        "theta": theta,
        "psi": expfam.log_partition(model, theta),
        "eta": eta,
        "g": expfam.fisher_metric(model, theta).g,
        "phi": expfam.dual_potential(model, eta, theta_back),
        "theta_prime": theta_p,
        "eta_prime": eta_p,
        "bregman": expfam.bregman_divergence(model, eta, eta_p),
        "bregman_reverse": expfam.bregman_divergence(model, eta_p, eta),
    }
    return render_record(record, cfg.output_format), EXIT_OK


def _builtin_family(name: str) -> sufficiency.DiscreteFamily:
    if name == "exp3":
        model = expfam.custom_finite([0, 1, 2], [[0.0], [1.0], [2.0]])
        return sufficiency.DiscreteFamily.from_expfam(model, [[t] for t in np.linspace(-1.0, 1.0, 5)])
    if name == "mixture":
        return sufficiency.DiscreteFamily.mixture([0.7, 0.2, 0.1], [0.1, 0.3, 0.6], np.round(np.linspace(0.1, 0.9, 9), 12))
    if name == "bernoulli":
        return sufficiency.DiscreteFamily.bernoulli()
    raise UsageError(f"unknown family {name!r}")


def cmd_sufficiency(args, cfg: RunConfig):
    fam = sufficiency.load_family(args.family_file) if args.family_file else _builtin_family(args.family)
    rows = sufficiency.pkd_growth_probe(fam, args.n_max, cfg.tol("ratio", 1e-9))
    return render_rows(["n", "class_count"], rows, cfg.output_format), EXIT_OK


def cmd_arb(args, cfg: RunConfig):
    graph = parse_rates(args.rates)
    tol = cfg.tol("cycle", market_graph.DEFAULT_TOL)
    if args.scan == "triangles":
        reports = market_graph.triangular_scan(graph, tol)
    else:
        found = market_graph.find_arbitrage(graph, tol)
        reports = [] if found is None else [found]

    if reports:
        if cfg.output_format == "json":
            docs = [_jsonable(r.to_dict()) for r in reports]
            out = "\n".join(json.dumps(d) for d in docs) + "\n"
        else:
            rows = [(" ".join(r.cycle), r.log_gain) for r in reports]
            out = render_rows(["cycle", "log_gain"], rows, cfg.output_format)
        return out, EXIT_ARBITRAGE

    pots = market_graph.node_potentials(graph, cfg.tol("potential", 1e-9))
    if cfg.output_format == "json":
        doc = {"consistent": pots is not None, "potentials": None if pots is None else pots.potentials}
        return json.dumps(_jsonable(doc)) + "\n", EXIT_OK
    if pots is None:
        return render_record({"consistent": False}, cfg.output_format), EXIT_OK
    rows = [(node, pi) for node, pi in pots.potentials.items()]
    if cfg.output_format == "csv":
        return render_rows(["node", "potential"], rows, "csv"), EXIT_OK
    return "consistent\n" + render_rows(["node", "potential"], rows, "table"), EXIT_OK


def cmd_flow(args, cfg: RunConfig):
    model = _model_from_args(args)
    eta0 = _vector(args.eta0, model.param_dim, 0.0) if args.eta0 else None
    if eta0 is None:
        raise UsageError("--eta0 is required")
    theta_star = _vector(args.theta_star, model.param_dim, 0.0)
    L = dynamics.load_transport(args.L) if args.L else None
    states = dynamics.gradient_flow(model, eta0, theta_star, L, args.dt, args.steps)
    if cfg.output_format == "csv":
        return dynamics.trajectory_to_csv(states), EXIT_OK
    d = model.param_dim
    header = ["t"] + [f"eta_{i + 1}" for i in range(d)] + ["divergence"]
    rows = [[s.t, *s.eta.tolist(), s.divergence] for s in states]
    return render_rows(header, rows, cfg.output_format), EXIT_OK


def _random_loop(rng: np.random.Generator, n: int) -> forms.ParametricPath:
    """Smooth closed curve: unit circle perturbed by a few random Fourier modes."""
    amps = rng.normal(scale=0.15, size=(3, 4))

    def point(s):
        a = 2 * math.pi * s
        r = 1.0 + sum(amps[k, 0] * math.cos((k + 2) * a) + amps[k, 1] * math.sin((k + 2) * a) for k in range(3))
        return (r * math.cos(a) + amps[0, 2], r * math.sin(a) + amps[0, 3])

    return forms.ParametricPath.from_function(point, n)


def cmd_onsager(args, cfg: RunConfig):
    if args.L:
        L = dynamics.load_transport(args.L).L
    elif args.matrix:
        L = _matrix(args.matrix)
    else:
        raise UsageError("supply --L FILE or --matrix 'a,b;c,d'")
    tm = dynamics.TransportMatrix(L)
    S, A = dynamics.decompose(tm)
    record = {
        "symmetry_defect": dynamics.symmetry_defect(tm),
        "symmetric": dynamics.symmetry_defect(tm) <= cfg.tol("symmetry", 1e-12),
        "S": S.L,
        "A": A.L,
    }
    if tm.d == 2:
        if args.loop == "random":
            loop = _random_loop(np.random.default_rng(cfg.seed if cfg.seed is not None else 0), args.samples)
        else:
            loop = forms.ParametricPath.circle(args.samples, args.radius)
        area = loop.signed_area()
        record["round_trip_work"] = dynamics.round_trip_work(tm, loop)
        record["signed_area"] = area
        record["predicted_work"] = -2.0 * A.L[0, 1] * area
    try:
        record["price_impact"] = dynamics.price_impact(tm).L
    except ArbGeomError:
        record["price_impact"] = None
    return render_record(record, cfg.output_format), EXIT_OK


COMMANDS = {
    "boyling": cmd_boyling,
    "expfam": cmd_expfam,
    "sufficiency": cmd_sufficiency,
    "arb": cmd_arb,
    "flow": cmd_flow,
    "onsager": cmd_onsager,
}


# -- wiring ------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS, help="output format (default table)")
    p.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="override the default tolerance")
    p.add_argument("--tolerance", action="append", metavar="KEY=VALUE", default=argparse.SUPPRESS,
                   help="named tolerance override, repeatable")
    p.add_argument("--out", default=argparse.SUPPRESS, help="write output here instead of stdout")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for randomized inputs")
    return p


def _model_flags(p):
    p.add_argument("--model", default="bernoulli",
                   help="bernoulli | poisson | gaussian | categorical (default bernoulli)")
    p.add_argument("--model-file", help='JSON model {"kind": ..., "params": {...}}')
    p.add_argument("--max-count", type=int, default=60, help="poisson truncation point")
    p.add_argument("--k", type=int, default=3, help="number of categories")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="arbgeom", description=__doc__.split("\n\n")[0], parents=[common])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)

    p = sub.add_parser("boyling", parents=[common], help="Boyling form: loop gains, decay slopes, leaf curve")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--gap", type=float, default=1e-3, help="closest approach to y=0 / y=1")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--rect", default="0,1,0.25,0.75", help="x0,x1,y0,y1 of the test loop")
    p.add_argument("--refine", type=int, default=8)
    p.add_argument("--start", default="0,0.5", help="start of the characteristic curve")
    p.add_argument("--arclength", type=float, default=1.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--curve-out", help="write the curve CSV (s,x,y,t) here")
    p.add_argument("--probe-out", help="write the probe CSV (log_t,log_w) here")

    p = sub.add_parser("expfam", parents=[common], help="log-partition, mean, Fisher metric, dual, Bregman")
    _model_flags(p)
    p.add_argument("--theta", help="natural parameters, comma separated (default 0)")
    p.add_argument("--theta-prime", help="second point for the Bregman divergence (default 0)")

    p = sub.add_parser("sufficiency", parents=[common], help="minimal sufficient partition growth")
    p.add_argument("--family", default="exp3", help="exp3 | mixture | bernoulli (default exp3)")
    p.add_argument("--family-file", help="JSON family with theta_grid")
    p.add_argument("--n-max", type=int, default=6)

    p = sub.add_parser("arb", parents=[common], help="cycle arbitrage on a rates file")
    p.add_argument("rates", help="CSV (from,to,rate) or JSON rates file")
    p.add_argument("--scan", choices=("bellman-ford", "triangles"), default="bellman-ford")

    p = sub.add_parser("flow", parents=[common], help="gradient flow trajectory")
    _model_flags(p)
    p.add_argument("--eta0", help="initial mean parameters")
    p.add_argument("--theta-star", help="equilibrium natural parameters (default 0)")
    p.add_argument("--L", help='JSON transport matrix {"L": [[...]]}; default Fisher metric')
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=1000)

    p = sub.add_parser("onsager", parents=[common], help="transport symmetry and round-trip work")
    p.add_argument("--L", help='JSON transport matrix {"L": [[...]]}')
    p.add_argument("--matrix", help="inline matrix, rows separated by ';'")
    p.add_argument("--loop", choices=("circle", "random"), default="circle")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--radius", type=float, default=1.0)
    return parser


def _tolerances(args) -> dict:
    out = {}
    if getattr(args, "tol", None) is not None:
        out["tol"] = args.tol
    for item in getattr(args, "tolerance", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tolerance expects KEY=VALUE, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"tolerance {key!r} is not a number") from None
    return out


def _write(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run(config: RunConfig, args: argparse.Namespace) -> tuple[str, int]:
    return COMMANDS[config.subcommand](args, config)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.subcommand:
            raise UsageError("a subcommand is required (" + ", ".join(SUBCOMMANDS) + ")")
        config = RunConfig(
            subcommand=args.subcommand,
            input_path=getattr(args, "rates", None),
            output_format=getattr(args, "format", "table"),
            tolerances=_tolerances(args),
            seed=getattr(args, "seed", None),
        )
        text, code = run(config, args)
    except (UsageError, ArbGeomError, ValueError, OSError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        if isinstance(exc, KeyError):
            msg = f"missing key {msg}"
        stderr.write(f"arbgeom: error: {msg}\n")
        return EXIT_ERROR
    out_path = getattr(args, "out", None)
    if out_path:
        try:
            _write(out_path, text)
        except OSError as exc:
            stderr.write(f"arbgeom: error: {exc}\n")
            return EXIT_ERROR
    else:
        stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
