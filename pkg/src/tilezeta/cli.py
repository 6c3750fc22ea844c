"""Command-line front end.

Every command writes its table to ``<out>/<command>.csv`` with a provenance
header (rule hash, parameters, version) and prints a short summary.  The
output directory defaults to $TILEZETA_OUTPUT_DIR, else ./tilezeta-out.
Failures print one JSON error record on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .coding import (
    is_topologically_mixing,
    matrix_power_trace,
    shift_of_kind,
    verify_counting_identity,
)
from .counting import export_ledger, horizon_check, pot_report, primitive_orbits
from .metricize import (
    Potential,
    VisualMetricParams,
    cohomology_test,
    nli_test,
    sni_probe,
)
from .subdivision import (
    Dn_and_lambda0,
    RuleError,
    build_level,
    rule_from_source,
    serialize_rule,
    validate_rule,
)
from .thermo import pressure, s0
from .zeta import (
    Em_bound,
    enumerate_Em,
    factorization_grid,
    pressure_on_curve,
    random_vertex_sequence,
    verify_factorization,
    zeta_log_truncated,
)

OUTPUT_ENV = "TILEZETA_OUTPUT_DIR"
CONFIG_KEYS = {"tolerance", "max_iters", "depth", "Lambda", "alpha", "seed", "threads"}


class CommandFailed(Exception):
    """A command ran but its check failed; carries the error record."""

    def __init__(self, record: dict):
        super().__init__(record.get("message", ""))
        self.record = record


@dataclass
class RunConfig:
    rule_source: str
    depth: int | None = None
    Lambda: float = 2.0
    alpha: float = 1.0
    tolerance: float = 1e-12
    max_iters: int = 100_000
    seed: int = 0
    threads: int = 1
    out: Path = field(default_factory=lambda: Path(os.environ.get(OUTPUT_ENV, "tilezeta-out")))

    def __post_init__(self):
        if self.Lambda <= 1:
            raise ValueError("Lambda must exceed 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.max_iters < 1 or self.threads < 1 or (self.depth is not None and self.depth < 1):
            raise ValueError("caps must be positive")


# ---------------------------------------------------------------------------
# potentials


def _read_table(path: str) -> dict:
    table = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RuleError(f"{path}:{lineno}: expected 'word value'")
        table[tuple(parts[0].split("."))] = Fraction(parts[1])
    if not table:
        raise RuleError(f"{path}: empty potential table")
    if len({len(k) for k in table}) != 1:
        raise RuleError(f"{path}: words of mixed length")
    return table


def parse_potential(rule, text: str) -> Potential:
    kind, _, rest = text.partition(":")
    if kind == "const":
        return Potential.constant(rule, Fraction(rest))
    if kind == "indicator":
        tile, _, value = rest.rpartition(":")
        return Potential.indicator(rule, tile, Fraction(value))
    if kind == "table":
        table = _read_table(rest)
        depth = len(next(iter(table)))
        return Potential.from_table(rule, depth, table, label=text)
    if kind == "cobound":
        c, _, path = rest.partition(":")
        beta = _read_table(path)
        return Potential.coboundary(rule, Fraction(c), len(next(iter(beta))), beta, label=text)
    raise ValueError(f"unknown potential {text!r}")


def combined_potential(rule, specs) -> Potential:
    specs = specs or ["const:1"]
    phi = parse_potential(rule, specs[0])
    for s in specs[1:]:
        phi = phi.add(rule, parse_potential(rule, s))
    return phi


# ---------------------------------------------------------------------------
# output


def rule_hash(rule) -> str:
    return hashlib.sha256(serialize_rule(rule).encode()).hexdigest()


def provenance(rule, command: str, params: dict) -> str:
    return (
        f"# tilezeta {__version__}\n"
        f"# rule {rule.name} sha256={rule_hash(rule)}\n"
        f"# command {command} {json.dumps(params, sort_keys=True, default=str)}\n"
    )


def write_table(cfg: RunConfig, rule, command: str, params: dict, body: str) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"{command}.csv"
    path.write_text(provenance(rule, command, params) + body)
    return path


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg, rule, args):
    report = validate_rule(rule)
    body = _csv(["check", "passed", "witness"], [(c.name, int(c.passed), c.witness) for c in report.checks])
    write_table(cfg, rule, "validate", {}, body)
    for c in report.checks:
        print(f"{'ok  ' if c.passed else 'FAIL'} {c.name}{'' if c.passed else ': ' + c.witness}")
    if not report.ok:
        bad = report.failed()[0]
        raise CommandFailed({"error": "validation", "check": bad.name, "message": bad.witness})


def cmd_levels(cfg, rule, args):
    rows = []
    for n in range(args.n + 1):
        lvl = build_level(rule, n)
        rows.append((n, len(lvl.tiles), len(lvl.edges), len(lvl.vertices), lvl.euler_characteristic))
    dn, lam = Dn_and_lambda0(rule, args.n)
    body = _csv(["n", "tiles", "edges", "vertices", "euler"], rows)
    body += _csv(["n", "D_n"], dn) + f"lambda0_estimate,{lam!r}\n"
    write_table(cfg, rule, "levels", {"n": args.n}, body)
    for r in rows:
        print("level {}: {} tiles, {} edges, {} vertices, chi {}".format(*r))
    print(f"Lambda0 estimate {lam!r}")


def cmd_shifts(cfg, rule, args):
    rows = []
    for kind in ("tile", "edge", "edge_color", "post"):
        sh = shift_of_kind(rule, kind)
        traces = [matrix_power_trace(sh.transition, n) for n in range(1, args.n + 1)]
        rows.append((kind, sh.size, int(is_topologically_mixing(sh)), " ".join(map(str, traces))))
    write_table(cfg, rule, "shifts", {"n": args.n}, _csv(["shift", "states", "mixing", "traces"], rows))
    for r in rows:
        print(f"{r[0]}: {r[1]} states, mixing={bool(r[2])}, traces {r[3]}")


def cmd_orbits(cfg, rule, args):
    bodies, ok = [], True
    for n in range(1, args.n + 1):
        rep = verify_counting_identity(rule, n)
        ok &= rep.ok
        bodies.append(rep.to_csv())
        print(f"n={n}: {len(rep.rows)} fixed points, weighted count {rep.weighted_count}, identity {'PASS' if rep.ok else 'FAIL'}")
    write_table(cfg, rule, "orbits", {"n": args.n}, "".join(bodies))
    if not ok:
        raise CommandFailed({"error": "counting-identity", "message": "counting identity failed"})


def cmd_pressure(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    rows = []
    for t in args.t or [1.0]:
        res = pressure(rule, phi, t, cfg.depth, cfg.tolerance, cfg.max_iters)
        rows.append((repr(t), repr(res.value), repr(res.residual), res.iterations, res.depth))
        print(f"P(t={t}) = {res.value!r} (residual {res.residual:.2e})")
    write_table(cfg, rule, "pressure", {"phi": args.phi, "t": args.t}, _csv(["t", "pressure", "residual", "iterations", "depth"], rows))


def cmd_s0(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    value = s0(rule, phi, cfg.depth)
    write_table(cfg, rule, "s0", {"phi": args.phi}, _csv(["s0"], [(repr(value),)]))
    print(f"s0 = {value!r}")


def cmd_zeta(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    acc = zeta_log_truncated(rule, args.system, phi, complex(args.s), args.N, args.weight)
    write_table(cfg, rule, "zeta", {"phi": args.phi, "system": args.system, "s": args.s, "N": args.N, "weight": args.weight}, acc.to_csv())
    print(f"log zeta truncation = {acc.log_sum!r}; terms {acc.trend} (ratio {acc.mean_ratio:.4g})")


def cmd_factorize(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    grid = [complex(s) for s in args.s] if args.s else factorization_grid(s0(rule, phi, cfg.depth))
    rep = verify_factorization(rule, phi, grid, args.N)
    write_table(cfg, rule, "factorize", {"phi": args.phi, "s": [str(s) for s in grid], "N": args.N}, rep.to_csv())
    for r in rep.rows:
        print(f"s={r.s} n={r.n}: residual {r.error:.3e}")
    print("PASS" if rep.ok else "FAIL")
    if not rep.ok:
        raise CommandFailed({"error": "factorization", "message": f"max residual {rep.max_error!r}"})


def cmd_curvegap(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    res = pressure_on_curve(rule, phi, args.t)
    write_table(cfg, rule, "curvegap", {"phi": args.phi, "t": args.t}, _csv(["P_full", "P_curve", "gap"], [(repr(res.full), repr(res.curve), repr(res.gap))]))
    print(f"P(f) = {res.full!r}, P(f|C) = {res.curve!r}, gap = {res.gap!r}")


def cmd_em(cfg, rule, args):
    rng = random.Random(cfg.seed)
    rows, worst = [], 0.0
    for k in range(args.samples):
        q, seq = random_vertex_sequence(rule, args.m, args.n, rng)
        for n, S in enumerate(enumerate_Em(rule, args.m, seq, q), start=1):
            bound = Em_bound(args.m, n)
            worst = max(worst, len(S) / bound)
            rows.append((k, n, len(S), repr(bound), int(len(S) <= bound)))
    write_table(cfg, rule, "em", {"m": args.m, "n": args.n, "samples": args.samples, "seed": cfg.seed}, _csv(["sample", "n", "card_E", "bound", "ok"], rows))
    violations = sum(1 for r in rows if not r[4])
    print(f"{len(rows)} sets enumerated, {violations} violations, max card/bound {worst:.4f}")
    if violations:
        raise CommandFailed({"error": "em-bound", "message": f"{violations} violations"})


def cmd_nli(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    verdict = nli_test(rule, phi, args.samples)
    coh = cohomology_test(rule, phi, args.n_max)
    rows = [
        ("verdict", "locally-integrable-on-samples" if verdict.locally_integrable_on_samples else "witness-of-non-integrability"),
        ("checked", verdict.checked),
        ("witness", verdict.describe(rule.cells)),
        ("cohomologous_constant", "" if coh.constant is None else str(coh.constant)),
    ]
    write_table(cfg, rule, "nli", {"phi": args.phi, "samples": args.samples, "n_max": args.n_max}, _csv(["key", "value"], rows))
    print(verdict.describe(rule.cells))
    print("cohomologous to " + str(coh.constant) if coh.cohomologous else "not cohomologous to a constant (periodic averages differ)")


def cmd_sni(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    params = VisualMetricParams(cfg.Lambda, cfg.alpha)
    rep = sni_probe(rule, phi, params, args.N0, args.M0, args.M_max, args.tiles, args.span, args.epsilon)
    params_out = {"phi": args.phi, "N0": args.N0, "M0": args.M0, "M_max": args.M_max, "span": args.span, "epsilon": args.epsilon, "Lambda": cfg.Lambda, "alpha": cfg.alpha}
    write_table(cfg, rule, "sni", params_out, rep.to_csv())
    print(f"floor over the scanned range: {rep.floor!r}; clears epsilon={args.epsilon}: {rep.clears_threshold} (on-scanned-range)")


def cmd_pot(cfg, rule, args):
    phi = combined_potential(rule, args.phi)
    ledger = primitive_orbits(rule, phi, args.p_max, threads=cfg.threads)
    grid = args.T or _default_grid(ledger.horizon)
    rep = pot_report(rule, phi, grid, ledger)
    params = {"phi": args.phi, "p_max": args.p_max, "T": grid}
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "pot_ledger.csv").write_text(provenance(rule, "pot-ledger", params) + export_ledger(ledger, rule))
    summary = rep.summary()
    if args.horizon_check:
        extra = horizon_check(rule, phi, ledger)
        summary += f"horizon check at period {args.p_max + 1}: {len(extra)} orbits under the horizon\n"
        if extra:
            raise CommandFailed({"error": "horizon", "message": f"{len(extra)} orbits of period {args.p_max + 1} under the horizon"})
    write_table(cfg, rule, "pot", params, rep.to_csv() + "".join("# " + line + "\n" for line in summary.splitlines()))
    print(rep.to_csv(), end="")
    print(summary, end="")


def _default_grid(horizon: float) -> list[float]:
    top = math.floor(horizon)
    return [float(t) for t in range(1, top + 1)] if top >= 1 else [horizon]


COMMANDS = {
    "validate": cmd_validate,
    "levels": cmd_levels,
    "shifts": cmd_shifts,
    "orbits": cmd_orbits,
    "pressure": cmd_pressure,
    "s0": cmd_s0,
    "zeta": cmd_zeta,
    "factorize": cmd_factorize,
    "curvegap": cmd_curvegap,
    "em": cmd_em,
    "nli": cmd_nli,
    "sni": cmd_sni,
    "pot": cmd_pot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("rule", help="rule file or lattes:k")
    common.add_argument("--phi", action="append", help="potential: const:c, indicator:tile:value, table:path, cobound:c:path (repeatable, summed)")
    common.add_argument("--config", help="JSON file with tolerance, max_iters, depth, Lambda, alpha, seed, threads")
    common.add_argument("--depth", type=int)
    common.add_argument("--Lambda", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--max-iters", dest="max_iters", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./tilezeta-out)")

    p = argparse.ArgumentParser(prog="tilezeta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tilezeta {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common])
    for name in ("levels", "shifts", "orbits"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--n", type=int, default=4)
    sp = sub.add_parser("pressure", parents=[common])
    sp.add_argument("--t", type=float, action="append")
    sub.add_parser("s0", parents=[common])
    sp = sub.add_parser("zeta", parents=[common])
    sp.add_argument("--system", default="f", choices=["f", "tile", "edge", "edge_color", "post"])
    sp.add_argument("--s", default="2.0")
    sp.add_argument("--N", type=int, default=6)
    sp.add_argument("--weight", default="1", choices=["1", "deg"])
    sp = sub.add_parser("factorize", parents=[common])
    sp.add_argument("--s", action="append", help="complex s (repeatable); default grid around s0")
    sp.add_argument("--N", type=int, default=6)
    sp = sub.add_parser("curvegap", parents=[common])
    sp.add_argument("--t", type=float, default=1.0)
    sp = sub.add_parser("em", parents=[common])
    sp.add_argument("--m", type=int, default=14)
    sp.add_argument("--n", type=int, default=28)
    sp.add_argument("--samples", type=int, default=100)
    sp = sub.add_parser("nli", parents=[common])
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--n-max", dest="n_max", type=int, default=4)
    sp = sub.add_parser("sni", parents=[common])
    sp.add_argument("--N0", type=int, default=1)
    sp.add_argument("--M0", type=int, default=1)
    sp.add_argument("--M-max", dest="M_max", type=int, default=1)
    sp.add_argument("--span", type=int, default=2)
    sp.add_argument("--epsilon", type=float, default=1e-3)
    sp.add_argument("--tile", dest="tiles", action="append", help="candidate M0-tile as dotted tile ids (repeatable)")
    sp = sub.add_parser("pot", parents=[common])
    sp.add_argument("--p-max", dest="p_max", type=int, default=10)
    sp.add_argument("--T", type=float, action="append")
    sp.add_argument("--horizon-check", action="store_true")
    return p


def make_config(args) -> RunConfig:
    values = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if args.out:
        values["out"] = Path(args.out)
    return RunConfig(rule_source=args.rule, **values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        rule = rule_from_source(cfg.rule_source)
        if args.command != "validate":
            report = validate_rule(rule)
            if not report.ok:
                bad = report.failed()[0]
                raise CommandFailed({"error": "validation", "check": bad.name, "message": bad.witness})
        COMMANDS[args.command](cfg, rule, args)
    except CommandFailed as exc:
        record = {"command": args.command, **exc.record}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1
    except (RuleError, ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        record = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
