"""Command-line driver: one subcommand per experiment, JSON configs, CSV/JSON output.

Exit status is 0 on success, 1 when a checked invariant fails and 2 for
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import protocol, quantization, regions
from .hashing import HashFamily, derive_seed, rng_for
from .info_measures import (
    GaussianModel,
    JointPmf,
    cond_entropy,
    cond_renyi_entropy,
    gallager_cond_entropy,
    gaussian_cond_entropy,
    gaussian_cond_mi,
    kl_divergence,
    load_model,
    mutual_information,
    random_pmf,
    renyi_divergence,
    to_bits,
)
from .output_statistics import HashSystem, exact_ensemble_expectation, secrecy_exponent

log = logging.getLogger("multikey")

OK, VIOLATION, USAGE = 0, 1, 2
SLACK_TOL = 1e-9


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class Violation(RuntimeError):
    """A checked invariant failed; the output is still written."""


def _unit(args, value: float) -> float:
    return to_bits(value) if args.bits else value


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def _model(doc):
    try:
        return load_model(doc)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load model: {exc}") from exc


def _labels(x) -> list:
    return [x] if isinstance(x, str) else list(x)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_measures(args, cfg) -> int:
    """Divergences between ``p`` and ``q`` and conditional entropies of ``model``."""
    s_grid = [float(s) for s in cfg.get("s", [0.0, 0.25, 0.5, 0.75, 1.0])]
    rows = []
    if "p" in cfg:
        p, q = _model(cfg["p"]), _model(_need(cfg, "q"))
        rows.append(("kl_divergence", 0.0, _unit(args, kl_divergence(p, q))))
        for s in s_grid:
            rows.append(("renyi_divergence", s, _unit(args, renyi_divergence(p, q, s))))
    if "model" in cfg:
        model = _model(cfg["model"])
        target, given = _labels(_need(cfg, "target")), _labels(cfg.get("given", []))
        if isinstance(model, GaussianModel):
            rows.append(("gaussian_cond_entropy", 0.0,
                         _unit(args, gaussian_cond_entropy(model, target, given))))
            if "other" in cfg:
                mi = gaussian_cond_mi(model, target, _labels(cfg["other"]), given)
                rows.append(("gaussian_cond_mi", 0.0, _unit(args, mi)))
        else:
            rows.append(("cond_entropy", 0.0, _unit(args, cond_entropy(model, target, given))))
            if "other" in cfg:
                mi = mutual_information(model, target, _labels(cfg["other"]), given)
                rows.append(("mutual_information", 0.0, _unit(args, mi)))
            for s in s_grid:
                rows.append(("cond_renyi_entropy", s, _unit(args, cond_renyi_entropy(model, target, given, s))))
                rows.append(("gallager_cond_entropy", s,
                             _unit(args, gallager_cond_entropy(model, target, given, s))))
    if not rows:
        raise ConfigError("measures needs 'p' and 'q' and/or 'model'")
    _emit(args, _csv(["quantity", "s", "value"], rows))
    renyi = [v for name, _, v in rows if name == "renyi_divergence"]
    if any(b < a - 1e-10 for a, b in zip(renyi, renyi[1:])) and s_grid == sorted(s_grid):
        raise Violation("Renyi divergence decreased along the order grid")
    return OK


def _battery_sources(cfg, seed):
    if "sources" in cfg:
        return [(i, _model(doc)) for i, doc in enumerate(cfg["sources"])]
    rand = cfg.get("random", {})
    terminals = int(rand.get("terminals", 1))
    alphabet = int(rand.get("alphabet", 2))
    eve = int(rand.get("eve_size", 2))
    labels = [f"A{t}" for t in range(1, terminals + 1)] + ["E"]
    out = []
    for i in range(int(rand.get("count", 5))):
        rng = rng_for(derive_seed(seed, "battery", i))
        out.append((i, random_pmf(labels, [alphabet] * terminals + [eve], rng)))
    return out


def cmd_bound_verify(args, cfg) -> int:
    """Exact ensemble expectation against the one-shot bound for a battery of sources."""
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    kinds = cfg.get("families", ["fully_random_table", "modular_multiply"])
    n_list = [int(n) for n in cfg.get("n", [1])]
    s_list = [float(s) for s in cfg.get("s", [0.25, 0.5, 1.0])]
    range_size = int(cfg.get("range_size", 2))
    rows, worst = [], math.inf
    for idx, source in _battery_sources(cfg, seed):
        terms = [v for v in source.variables if v != "E"]
        for kind in kinds:
            for n in n_list:
                fams = [HashFamily(kind, source.alphabet_sizes[source.variables.index(t)] ** n, range_size)
                        for t in terms]
                system = HashSystem(fams, n)
                for s in s_list:
                    lhs, rhs, slack = exact_ensemble_expectation(source, system, s, ("E",), terms)
                    rows.append((kind, idx, n, s, lhs, rhs, slack))
                    worst = min(worst, slack)
    _emit(args, _csv(["family", "seed", "n", "s", "c_value", "bound_rhs", "slack"], rows))
    if worst < -SLACK_TOL:
        raise Violation(f"bound violated: worst slack {worst:.3e}")
    return OK


def cmd_exponents(args, cfg) -> int:
    """Error and secrecy exponent bounds of a scheme, or the hashing secrecy exponent."""
    source = _model(_need(cfg, "source"))
    rows = []
    if "bin_rates" in cfg:
        err = protocol.error_exponent_bound(source, cfg["bin_rates"])
        rows.append(("error_exponent", _unit(args, err.exponent)))
        rows.append(("error_prefactor", err.prefactor))
        sec = protocol.secrecy_exponent_bounds(source, _need(cfg, "key_rates"), cfg["bin_rates"],
                                               tuple(cfg.get("key_terminals", (1, 2))))
        for t, v in sec.items():
            rows.append((f"secrecy_exponent_K{t}", _unit(args, v)))
    else:
        rates = _need(cfg, "rates")
        eve = _labels(cfg.get("eve", ["E"]))
        val = secrecy_exponent(source, rates, float(cfg.get("s", 0.0)), eve=eve,
                               terminals=cfg.get("terminals"))
        rows.append(("secrecy_exponent", _unit(args, val)))
    _emit(args, _csv(["quantity", "value"], rows))
    return OK


def cmd_convergence(args, cfg) -> int:
    """Entropy differences of quantised Gaussians against their limits."""
    model = _model(cfg["model"]) if "model" in cfg else quantization.standard_model()
    if not isinstance(model, GaussianModel):
        raise ConfigError("quantize-convergence needs a Gaussian model")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    rows = quantization.convergence_report(model, cfg.get("q_list", [1, 2, 4]),
                                           int(cfg.get("samples", 1_000_000)), seed)
    cols = ["q", "delta", "quantity", "estimate", "stderr", "analytic_limit", "gap"]
    scaled = []
    for r in rows:
        r = dict(r)
        for k in ("estimate", "stderr", "analytic_limit", "gap"):
            r[k] = _unit(args, r[k])
        scaled.append([r[c] for c in cols])
    _emit(args, _csv(cols, scaled))
    return OK


def _oracle(doc: dict) -> dict:
    def num(v):
        return Fraction(v) if isinstance(v, str) else v
    return {k: num(v) for k, v in doc.items()}


def cmd_region(args, cfg) -> int:
    """Rate region as JSON, with a readable listing on stderr."""
    kind = cfg.get("kind", "mp")
    if kind == "scheme":
        delta = cfg.get("delta", "1/1000")
        delta = Fraction(delta) if isinstance(delta, str) else float(delta)
        region = regions.project_to_keys(regions.achievable_system(_oracle(_need(cfg, "oracle")), delta))
    else:
        model = _model(_need(cfg, "model"))
        if kind == "mp":
            region = regions.region_mp(model)
        elif kind in ("cellular-inner", "cellular-outer"):
            region = regions.region_cellular(model, _need(cfg, "S"), kind.split("-")[1])
        else:
            raise ConfigError(f"unknown region kind {kind!r}")
    doc = region.to_dict()
    if args.bits:
        for q in doc["inequalities"]:
            q["const"] = to_bits(q["const"])
    lines = region.describe()
    if len(region.variables) == 2:
        lines.append("vertices: " + ", ".join(f"({a:.6g}, {b:.6g})" for a, b in regions.vertices_2d(region)))
    for line in lines:
        print(line, file=sys.stderr)
    if any(q.const < 0 for q in region.inequalities):
        log.warning("region has a negative bound; no positive rate pair is certified")
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return OK


def _protocol_config(args, cfg) -> protocol.ProtocolConfig:
    doc = dict(cfg)
    doc["source"] = _model(_need(cfg, "source"))
    if args.seed is not None:
        doc["master_seed"] = args.seed
    try:
        return protocol.ProtocolConfig.from_dict(doc)
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from exc


def _report(args, cfg, report: protocol.SimulationReport) -> int:
    conf = report.config
    if isinstance(conf.source, JointPmf):
        report.exponents = protocol.exponent_report(conf)
        if cfg.get("leakage", False):
            leak = protocol.exact_leakage(conf, budget=int(cfg.get("leakage_budget", 200)))
            report.leakage = {f"K{t}": r._asdict() for t, r in leak.items()}
    _emit(args, report.to_json() + "\n")
    if report.leakage and any(v["mean"] < -1e-12 for v in report.leakage.values()):
        raise Violation("negative leakage")
    return OK


def cmd_simulate(args, cfg) -> int:
    """Agreement error, exponent bounds and optional exact leakage of one configuration."""
    conf = _protocol_config(args, cfg)
    trials = args.trials if args.trials is not None else int(cfg.get("trials", 1000))
    return _report(args, cfg, protocol.simulate_trials(conf, trials, args.threads))


def cmd_cellular(args, cfg) -> int:
    """As ``simulate`` with key terminals ``S`` and every other terminal revealed."""
    conf = _protocol_config(args, cfg)
    trials = args.trials if args.trials is not None else int(cfg.get("trials", 1000))
    S = _need(cfg, "S")
    return _report(args, cfg, protocol.cellular_simulate(conf, S, trials, args.threads))


COMMANDS = {
    "measures": cmd_measures,
    "lemma1-verify": cmd_bound_verify,
    "exponents": cmd_exponents,
    "quantize-convergence": cmd_convergence,
    "region": cmd_region,
    "simulate": cmd_simulate,
    "cellular": cmd_cellular,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multikey", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__.splitlines()[0])
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", help="output file (stdout when omitted)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--bits", action="store_true", help="report entropies and rates in bits")
        if name in ("simulate", "cellular"):
            p.add_argument("--trials", type=int, help="number of trials (overrides the config)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        return COMMANDS[args.command](args, cfg)
    except Violation as exc:
        log.error("invariant violated: %s", exc)
        print(f"invariant violated: {exc}", file=sys.stderr)
        return VIOLATION
    except (ConfigError, OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
