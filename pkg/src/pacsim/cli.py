"""Command-line interface: ``pacsim infer | sweep | faults | cost | run-netlist | lower``.

Settings resolve as flags, then a JSON file given with ``--config``, then
the ``PACSIM_SEED`` environment variable (seed only), then defaults. Data
goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bayes.network import fork_polytree, load_bn
from .bayes.pearl import bp_infer, linf_gap
from .circuits.sweep import KINDS, SweepSettings, fmt12, sweep_header, sweep_rows
from .cost import CostParams, PowerRatioWarning, compare, estimate, format_report, report_csv
from .encoding import parse_vector
from .errors import PacsimError
from .faults import format_fault_report, run_campaign
from .framework import CircuitConfig
from .lowering import (count_resources, format_netlist, likelihood_module, load_netlist, lower_bn,
                       simulate_netlist)

SEED_ENV = "PACSIM_SEED"
SWEEP_TOLERANCE = 1e-9


@dataclass
class RunConfig:
    """Resolved settings for one invocation."""

    n: int = 10
    k: int = 2
    backend: str = "exact"
    seed: int = 0
    trials: int = 20
    faults: int = 1
    workers: int = 1
    baseline: str = "all"
    first_stage: str = "current"
    ladder: str = "minimax"
    no_correction: bool = False
    gain: float = 1.0

    def circuit(self) -> CircuitConfig:
        return CircuitConfig(n=self.n, k=self.k, first_stage=self.first_stage, ladder=self.ladder,
                             gain=self.gain, seed=self.seed)


def resolve_config(args) -> RunConfig:
    values = {}
    if os.environ.get(SEED_ENV):
        values["seed"] = int(os.environ[SEED_ENV])
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise PacsimError(f"unknown config keys {sorted(unknown)}")
        values.update(data)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and v is not False:
            values[f.name] = v
    return RunConfig(**values)


def _evidence(items):
    ev = {}
    for item in items or ():
        nid, sep, state = item.partition("=")
        if not sep:
            raise PacsimError(f"evidence must look like id=stateIndex, got {item!r}")
        try:
            ev[nid] = int(state)
        except ValueError:
            raise PacsimError(f"evidence state for {nid} must be an integer, got {state!r}") from None
    return ev


def _fmt_vec(v) -> str:
    return " ".join(f"{float(x):.12g}" for x in v)


# -- subcommands ------------------------------------------------------------------

def cmd_infer(args, cfg: RunConfig, out) -> int:
    net = load_bn(args.bn)
    ev = _evidence(args.evidence)
    backends = ["exact", "composer"] if args.compare_backends else [cfg.backend]
    results = {b: bp_infer(net, ev, backend=b, config=cfg.circuit()) for b in backends}
    for b in backends:
        out.write(f"# backend {b}" + (f" n={cfg.n} k={cfg.k}" if b == "composer" else "") + "\n")
        for x, bel in results[b].beliefs.items():
            out.write(f"BEL({x}) = {_fmt_vec(bel)}\n")
    if args.compare_backends:
        gap = linf_gap(results["composer"].beliefs, results["exact"].beliefs)
        out.write(f"linf_gap {gap:.12g}\n")
        out.write(f"resolution {1.0 / (cfg.n * (cfg.k - 1)):.12g}\n")
    return 0


def cmd_sweep(args, cfg: RunConfig, out) -> int:
    settings = SweepSettings(n=cfg.n, k=cfg.k, gain=cfg.gain, corrected=not cfg.no_correction,
                             first_stage=args.first_stage or "voltage")
    sink = open(args.out, "w", newline="") if args.out else out
    worst = 0.0
    rows = 0
    try:
        w = csv.writer(sink, lineterminator="\n")
        header = sweep_header(args.kind)
        w.writerow(header)
        cols = [header.index("v_rel_diff"), header.index("i_rel_diff")]
        for row in sweep_rows(args.kind, settings):
            w.writerow([fmt12(x) for x in row])
            worst = max([worst] + [row[c] for c in cols if row[c] != ""])
            rows += 1
    finally:
        if args.out:
            sink.close()
    print(f"{args.kind}: {rows} rows, worst closed-form vs nodal relative difference {worst:.3g}",
          file=sys.stderr)
    if worst > SWEEP_TOLERANCE:
        print(f"error: disagreement exceeds {SWEEP_TOLERANCE:g}", file=sys.stderr)
        return 1
    return 0


def cmd_faults(args, cfg: RunConfig, out) -> int:
    net = load_bn(args.bn)
    report = run_campaign(net, cfg.faults, cfg.trials, cfg.seed, cfg.circuit(),
                          _evidence(args.evidence), cfg.workers)
    out.write(format_fault_report(report, per_trial=not args.summary))
    return 0


def _cost_netlist(args, cfg: RunConfig):
    if args.input and args.input.endswith(".net"):
        return load_netlist(args.input)
    if args.input:
        net = load_bn(args.input)
    else:
        net = fork_polytree(np.random.default_rng(cfg.seed), states=4)
    if args.module == "likelihood":
        node = args.node or next((x for x in net.nodes if len(net.children(x)) >= 2), None)
        if node is None:
            raise PacsimError("no node with two or more children for a likelihood module")
        return likelihood_module(net, node, cfg.circuit())
    return lower_bn(net, cfg.circuit())


REFERENCE_TARGETS = (
    # metric, baseline, expected, relative tolerance
    ("area", None, 24.32, 1e-12),
    ("compute_latency", None, 0.144, 1e-12),
    ("active_power", None, 0.016, 1e-12),
    ("area_ratio", "4bit", 78.95, 0.01),
    ("area_ratio", "5bit", 126.6, 0.01),
    ("compute_slowdown", "4bit", 288.0, 0.005),
    ("compute_slowdown", "5bit", 221.5, 0.005),
    ("overall_speedup", "4bit", 69.4, 0.01),
)


def reference_check(report, ratios) -> list[tuple[str, float, float, bool]]:
    """Compare a likelihood-module report with the tabulated reference figures."""
    by_base = {r.baseline: r for r in ratios}
    rows = []
    for metric, base, expected, tol in REFERENCE_TARGETS:
        got = getattr(report, metric) if base is None else getattr(by_base[base], metric)
        label = metric if base is None else f"{metric}_vs_{base}"
        rows.append((label, got, expected, abs(got - expected) <= tol * abs(expected)))
    return rows


def cmd_cost(args, cfg: RunConfig, out) -> int:
    params = CostParams()
    nl = _cost_netlist(args, cfg)
    report = estimate(count_resources(nl), params)
    names = sorted(params.baselines) if cfg.baseline == "all" else [cfg.baseline]
    if args.reference_check:
        names = sorted(set(names) | {"4bit", "5bit"})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PowerRatioWarning)
        ratios = [compare(report, b, params) for b in names]
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out.write(report_csv(report, ratios) if args.csv else format_report(report, ratios))
    if args.reference_check:
        failed = 0
        for label, got, expected, ok in reference_check(report, ratios):
            failed += not ok
            print(f"{'PASS' if ok else 'FAIL'} {label} {got:.12g} (expected {expected:g})", file=sys.stderr)
        if failed:
            print(f"error: {failed} reference figure(s) not reproduced", file=sys.stderr)
            return 1
    return 0


def cmd_run_netlist(args, cfg: RunConfig, out) -> int:
    nl = load_netlist(args.net)
    inputs = {}
    for item in args.input or ():
        ref, sep, val = item.partition("=")
        if not sep:
            raise PacsimError(f"inputs must look like inst.port=k2:... or inst.port=0.3, got {item!r}")
        inputs[ref] = parse_vector(val) if val.startswith("k") else float(val)
    first = next(iter(nl.instances.values()), None)
    config = None
    if first is not None:
        config = CircuitConfig(n=first.n, k=first.k, first_stage=cfg.first_stage, ladder=cfg.ladder,
                               gain=cfg.gain, seed=cfg.seed)
    result = simulate_netlist(nl, inputs, config)
    for iid in nl.topological_order():
        inst = nl.instances[iid]
        if iid in result.vectors:
            v = result.vectors[iid]
            out.write(f"{iid} {inst.kind} {v} {v.value:.12g}\n")
        else:
            out.write(f"{iid} {inst.kind} analog {result.analog[iid]:.12g}\n")
    return 0


def cmd_lower(args, cfg: RunConfig, out) -> int:
    net = load_bn(args.bn)
    roles = args.roles.split(",") if args.roles else None
    kw = {"roles": roles} if roles else {}
    nl = lower_bn(net, cfg.circuit(), nodes=args.nodes.split(",") if args.nodes else None,
                  decomposers=not args.no_decomposers, **kw)
    out.write(format_netlist(nl))
    counts = count_resources(nl)
    print(" ".join(f"{k}={v}" for k, v in counts.as_dict().items()), file=sys.stderr)
    return 0


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default settings")
    common.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
    common.add_argument("--n", type=int, help="digits per probability vector")
    common.add_argument("--k", type=int, help="levels per digit")
    common.add_argument("--first-stage", dest="first_stage", choices=("voltage", "current"),
                        help="readout of multiplier operand A")
    common.add_argument("--ladder", choices=("minimax", "diagonal"), help="multiplier decoder calibration")
    common.add_argument("--gain", type=float, help="amplifier gain")

    p = argparse.ArgumentParser(prog="pacsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pacsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("infer", parents=[common], help="belief propagation on a .bn file")
    s.add_argument("bn")
    s.add_argument("--evidence", action="append", metavar="ID=STATE")
    s.add_argument("--backend", choices=("exact", "composer"))
    s.add_argument("--compare-backends", action="store_true")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("sweep", parents=[common], help="exhaustive transfer sweep as CSV")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.add_argument("--no-correction", dest="no_correction", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("faults", parents=[common], help="stored-digit fault injection campaign")
    s.add_argument("bn")
    s.add_argument("--m", dest="faults", type=int, help="faults per trial")
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--evidence", action="append", metavar="ID=STATE")
    s.add_argument("--summary", action="store_true", help="omit per-trial lines")
    s.set_defaults(func=cmd_faults)

    s = sub.add_parser("cost", parents=[common], help="area/power/latency report")
    s.add_argument("input", nargs="?", help=".bn or .net file (default: a 4-state A->X->{Y,Z} net)")
    s.add_argument("--module", choices=("likelihood", "full"), default="likelihood")
    s.add_argument("--node", help="node whose likelihood module is costed")
    s.add_argument("--baseline", choices=("4bit", "5bit", "all"))
    s.add_argument("--csv", action="store_true")
    s.add_argument("--reference-check", "--paper-check", dest="reference_check", action="store_true",
                   help="check the likelihood-module figures against the reference table")
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("run-netlist", parents=[common], help="simulate a .net file")
    s.add_argument("net")
    s.add_argument("--input", action="append", metavar="INST.PORT=VALUE")
    s.set_defaults(func=cmd_run_netlist)

    s = sub.add_parser("lower", parents=[common], help="compile a .bn file to a .net netlist")
    s.add_argument("bn")
    s.add_argument("--roles", help="comma-separated subset of lik,prior,lam,pi,bel")
    s.add_argument("--nodes", help="comma-separated node ids")
    s.add_argument("--no-decomposers", action="store_true")
    s.set_defaults(func=cmd_lower)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg, out)
    except (PacsimError, OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"pacsim: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
