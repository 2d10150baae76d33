"""Command-line front end.

Every report starts with the full run configuration, so feeding that
configuration back to ``execute`` reproduces the report byte for byte.

Exit codes: 0 success, 1 engine error, 2 usage error, 3 I/O error.
JSON reports carry ``schema_version``; CSV reports start with ``#`` lines
holding the same header, then a fixed column row.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds, cr_engine, experiments, upper_lab
from .model import ModelError, ProblemInstance

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240601
OUTPUT_DIR_ENV = "SAMPLEALLOC_OUTPUT_DIR"
COMMANDS = ("cr-exact", "bounds", "sweep", "upper-lab", "case-study", "robustness",
            "ktype", "realized-cr")

EXIT_OK, EXIT_ENGINE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    seed: int = DEFAULT_SEED
    fmt: str = "json"
    out: str | None = None

    def header(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "command": self.command,
                "seed": self.seed, "config": self.params}

    @classmethod
    def from_header(cls, header: dict, fmt: str = "json", out: str | None = None) -> "RunConfig":
        return cls(header["command"], dict(header["config"]), int(header["seed"]), fmt, out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _prob(name):
    def conv(text):
        v = float(text)
        if not 0 < v < 1:
            raise argparse.ArgumentTypeError(f"{name} must lie in (0,1), got {text}")
        return v
    return conv


def _capacity(text):
    v = float(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"m must be at least 2, got {text}")
    return v


def _count(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _rewards(p):
    p.add_argument("--r1", type=_prob("r1"), default=0.9)
    p.add_argument("--r2", type=_prob("r2"), default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="samplealloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
        p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help=f"output file (default: ${OUTPUT_DIR_ENV}/<command>.<format> or stdout)")
        return p

    p = add("cr-exact", "exact competitive ratio of Algorithm 1 over a market grid")
    p.add_argument("--m", type=_capacity, required=True)
    p.add_argument("--p", type=_prob("p"), required=True)
    _rewards(p)
    p.add_argument("--h-max", type=_count, default=None)
    p.add_argument("--ell-max", type=_count, default=None)
    p.add_argument("--p-hat", type=_prob("p-hat"), default=None)
    p.add_argument("--full-grid", action="store_true")

    p = add("bounds", "all closed-form guarantees and constants")
    p.add_argument("--m", type=_capacity, required=True)
    p.add_argument("--p", type=_prob("p"), required=True)
    _rewards(p)

    p = add("sweep", "exact ratio vs lower bound vs benchmark over (m, p)")
    p.add_argument("--m", type=_capacity, nargs="+", required=True)
    p.add_argument("--p", type=_prob("p"), nargs="+", required=True)
    p.add_argument("--r1", type=_prob("r1"), default=0.9)
    p.add_argument("--r2-low", type=_prob("r2-low"), default=0.5)
    p.add_argument("--r2-high", type=_prob("r2-high"), default=0.9)
    p.add_argument("--r2", type=_prob("r2"), default=None, help="fix r2 instead of drawing it")
    p.add_argument("--instances", type=_positive, default=5)
    p.add_argument("--grid-bound", type=_count, default=None)

    p = add("upper-lab", "unlimited-supply family: loss of z = (1-p)/p * s1")
    p.add_argument("--m", type=_capacity, required=True)
    p.add_argument("--p", type=_prob("p"), required=True)
    _rewards(p)
    p.add_argument("--h-lo", type=float, default=0.0)
    p.add_argument("--h-hi", type=float, default=None)
    p.add_argument("--search-resolution", type=_count, default=0,
                   help="grid levels for the tabulated-mapping search (0 disables it)")

    p = add("case-study", "hospital-admission protocol on a demand CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--fixture", choices=experiments.FIXTURES)
    p.add_argument("--p", type=_prob("p"), required=True)
    p.add_argument("--gamma", type=_prob("gamma"), required=True)
    p.add_argument("--trials", type=_positive, default=200)
    p.add_argument("--r1", type=_prob("r1"), default=0.6)
    p.add_argument("--r2", type=_prob("r2"), default=0.2)
    p.add_argument("--noise", type=float, default=0.3)

    p = add("robustness", "ratio loss when levels use a misestimated p")
    p.add_argument("--m", type=_capacity, required=True)
    p.add_argument("--p", type=_prob("p"), required=True)
    p.add_argument("--delta", type=float, required=True)
    _rewards(p)
    p.add_argument("--grid", type=_positive, default=21)
    p.add_argument("--grid-bound", type=_count, default=None)

    p = add("ktype", "Monte Carlo ratio of the k-type algorithm")
    p.add_argument("--m", type=_capacity, nargs="+", required=True)
    p.add_argument("--p", type=_prob("p"), required=True)
    p.add_argument("--rewards", type=_prob("reward"), nargs="+", default=[0.9, 0.7, 0.3])
    p.add_argument("--trials", type=_positive, default=50)
    p.add_argument("--multipliers", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.0])

    p = add("realized-cr", "ratio against the best hindsight set of reward-one agents")
    p.add_argument("--m", type=_capacity, required=True)
    p.add_argument("--p", type=_prob("p"), required=True)
    _rewards(p)
    p.add_argument("--h", type=_count, required=True)
    p.add_argument("--ell", type=_count, required=True)
    p.add_argument("--trials", type=_positive, default=10000)
    return parser


def parse_and_validate(argv: list[str]) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError(parser.format_usage().strip() + "\nsamplealloc: a command is required")
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "seed", "fmt", "out")}
    if "r1" in params and "r2" in params and params["r2"] is not None and params["r1"] <= params["r2"]:
        raise UsageError("--r1 must exceed --r2")
    if ns.command == "robustness" and not 0 <= params["delta"] < 1:
        raise UsageError("--delta must lie in [0,1)")
    if ns.command == "ktype" and any(b >= a for a, b in zip(params["rewards"], params["rewards"][1:])):
        raise UsageError("--rewards must be strictly decreasing")
    if ns.command == "sweep" and params["r2"] is None and params["r2_low"] > params["r2_high"]:
        raise UsageError("--r2-low must not exceed --r2-high")
    return RunConfig(ns.command, params, ns.seed, ns.fmt, ns.out)


# ------------------------------------------------------------- commands

def _run_cr_exact(c: dict, seed: int):
    inst = ProblemInstance.two_type(c["m"], c["p"], c["r1"], c["r2"])
    rep = cr_engine.exact_cr(inst, c["h_max"], c["ell_max"], p_hat=c["p_hat"])
    summary = {"infimum": rep.infimum, "argmin": list(rep.argmin),
               "grid_bounds": list(rep.grid_bounds)}
    if c["full_grid"]:
        summary["ratios"] = rep.ratios.tolist()
    rows = [(h, ell, r) for h, ell, r in rep.grid]
    return summary, ("h", "ell", "ratio"), rows


BOUNDS_COLUMNS = ("beta", "h0", "h1", "ell0", "ell1", "m1", "V", "W", "alpha",
                  "cr1", "cr2", "cr3_over", "cr3_under", "overall", "regime",
                  "benchmark", "smallp_literal", "smallp_theta")


def _run_bounds(c: dict, seed: int):
    m, p, r1, r2 = c["m"], c["p"], c["r1"], c["r2"]
    const = bounds.constants(m, p, r1, r2)
    thm = bounds.theorem2_bound(m, p, r1, r2)
    asym = bounds.asymptotic_forms(m, p, (r1, r2))
    summary = {
        "constants": const.as_dict(),
        "alg1_lower_bound": thm.as_dict(),
        "benchmark": bounds.benchmark_bound((r1, r2)),
        "smallp_upper": {"literal": bounds.smallp_upper_bound(m, p, r2 / r1, "literal"),
                         "theta": bounds.smallp_upper_bound(m, p, r2 / r1, "theta")},
        "asymptotic": vars(asym),
    }
    flat = {**const.as_dict(), **thm.as_dict(), "benchmark": summary["benchmark"],
            "smallp_literal": summary["smallp_upper"]["literal"],
            "smallp_theta": summary["smallp_upper"]["theta"]}
    return summary, BOUNDS_COLUMNS, [tuple(flat[k] for k in BOUNDS_COLUMNS)]


def _run_sweep(c: dict, seed: int):
    cfg = experiments.SweepConfig(tuple(c["m"]), tuple(c["p"]), c["r1"],
                                  (c["r2_low"], c["r2_high"]), c["instances"],
                                  c["grid_bound"], seed, c["r2"])
    rows = experiments.sweep_example1(cfg)
    recs = experiments.as_records(rows)
    return {"rows": recs}, experiments.SWEEP_COLUMNS, [tuple(r[k] for k in experiments.SWEEP_COLUMNS) for r in recs]


def _run_upper_lab(c: dict, seed: int):
    m, p, r1, r2 = c["m"], c["p"], c["r1"], c["r2"]
    fam = upper_lab.FamilyF(m, p, c["h_lo"], c["h_hi"])
    zmap = upper_lab.zstar_policy(m, p, int(fam.h_values().max()))
    cr, worst_h = upper_lab.family_f_cr(zmap, m, p, r1, r2, fam)
    lower, upper = upper_lab.specific_z_bounds(m, p, r1, r2)
    lower_bin, _ = upper_lab.specific_z_bounds(m, p, r1, r2, deviation_scale="binomial")
    s_lower, s_upper = upper_lab.surrogate_losses(m, p, r1, r2, fam)
    summary = {"family_cr": cr, "worst_h": worst_h, "bound_lower": lower,
               "bound_lower_binomial": lower_bin, "bound_upper": upper,
               "surrogate_lower": s_lower, "surrogate_upper": s_upper}
    if c["search_resolution"]:
        _, best = upper_lab.best_tabulated_mapping(m, p, r1, r2, fam,
                                                   resolution=c["search_resolution"])
        summary["search_cr"] = best
    cols = tuple(summary)
    return summary, cols, [tuple(summary[k] for k in cols)]


def _run_case_study(c: dict, seed: int):
    if c["fixture"]:
        records = experiments.load_fixture(c["fixture"])
    else:
        records = experiments.load_periods(c["input"])
    cfg = experiments.CaseStudyConfig(c["p"], c["gamma"], c["trials"], (c["r1"], c["r2"]),
                                      c["noise"], seed)
    rep = experiments.case_study_run(records, cfg)
    summary = {"periods": list(rep.periods), "capacities": list(rep.capacities),
               "algorithms": {s.name: {"avg_cr": s.avg_cr, "worst_cr": s.worst_cr,
                                       "period_cr": list(s.period_cr)} for s in rep.summaries}}
    rows = [(s.name, s.avg_cr, s.worst_cr) for s in rep.summaries]
    return summary, ("algorithm", "avg_cr", "worst_cr"), rows


def _run_robustness(c: dict, seed: int):
    rep = experiments.robustness_ratio(c["p"], c["delta"], c["m"], c["r1"], c["r2"],
                                       c["grid"], c["grid_bound"])
    summary = {"truthful_cr": rep.truthful_cr, "sup_ratio": rep.sup,
               "p_hat": list(rep.p_hats), "cr": list(rep.crs), "ratio": list(rep.ratios)}
    rows = list(zip(rep.p_hats, rep.crs, rep.ratios))
    return summary, ("p_hat", "cr", "ratio"), rows


def _run_ktype(c: dict, seed: int):
    rows = experiments.example3_ktype(c["m"], c["p"], c["rewards"], c["trials"], seed,
                                      c["multipliers"])
    recs = experiments.as_records(rows)
    for r in recs:
        r["worst_market"] = list(r["worst_market"])
    csv_rows = [tuple(" ".join(map(str, r[k])) if k == "worst_market" else r[k]
                      for k in experiments.KTYPE_COLUMNS) for r in recs]
    return {"rows": recs}, experiments.KTYPE_COLUMNS, csv_rows


def _run_realized(c: dict, seed: int):
    inst = ProblemInstance.two_type(c["m"], c["p"], c["r1"], c["r2"])
    est = cr_engine.realized_cr_estimate(inst, c["h"], c["ell"], c["trials"],
                                         np.random.default_rng(seed))
    summary = {"mean": est.mean, "stderr": est.stderr, "trials": est.trials}
    return summary, ("mean", "stderr", "trials"), [(est.mean, est.stderr, est.trials)]


RUNNERS = {
    "cr-exact": _run_cr_exact, "bounds": _run_bounds, "sweep": _run_sweep,
    "upper-lab": _run_upper_lab, "case-study": _run_case_study,
    "robustness": _run_robustness, "ktype": _run_ktype, "realized-cr": _run_realized,
}


def render(cfg: RunConfig, summary: dict, columns, rows) -> str:
    if cfg.fmt == "json":
        return json.dumps({**cfg.header(), "result": summary}, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    buf.write("# header=" + json.dumps(cfg.header(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def read_header(text: str) -> dict:
    """Recover the run header from a JSON or CSV report."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return {k: doc[k] for k in ("schema_version", "command", "seed", "config")}
    for line in text.splitlines():
        if line.startswith("# header="):
            return json.loads(line[len("# header="):])
    raise ValueError("no header found")


def output_path(cfg: RunConfig) -> Path | None:
    if cfg.out:
        return Path(cfg.out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base:
        return Path(base) / f"{cfg.command}.{cfg.fmt}"
    return None


def execute(cfg: RunConfig) -> tuple[int, str]:
    """Run the command; returns (exit status, report text or error message)."""
    try:
        summary, columns, rows = RUNNERS[cfg.command](cfg.params, cfg.seed)
    except OSError as exc:
        return EXIT_IO, f"error: {exc}"
    except (ModelError, ValueError) as exc:
        return EXIT_ENGINE, f"error: {exc}"
    text = render(cfg, summary, columns, rows)
    path = output_path(cfg)
    if path is not None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            return EXIT_IO, f"error: cannot write {path}: {exc}"
    return EXIT_OK, text


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_and_validate(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    status, text = execute(cfg)
    if status != EXIT_OK:
        print(text, file=sys.stderr)
    elif output_path(cfg) is None:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
