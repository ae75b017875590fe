"""Command-line entry point.

Exit status is 0 on success, 1 when a checked invariant fails (coupling
breach, block-consistency miss, boundary bound failure, non-monotone sweep)
and 2 on usage or configuration errors.  Every run given ``--out DIR``
writes its tables there together with ``manifest.json``; passing that file
to ``--from-manifest`` repeats the run.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .engine import SimConfig, run_variant
from .experiments import (
    NonMonotoneCurve,
    StudySettings,
    bracket_lambda_c,
    convergence_checks,
    variant_studies,
    write_survival_csv,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

COUPLING_NAMES = {"2": "no-recuperation", "3": "rate", "4": "initial",
                  "no-recuperation": "no-recuperation", "rate": "rate", "initial": "initial"}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    argv: list
    config: dict
    version: str
    seed: int
    started: str
    finished: str = ""
    outputs: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# flag dest -> SimConfig field
_OVERRIDES = {"d": "d", "D": "D", "lam": "lam", "muA": "mu_A", "L": "L", "boundary": "boundary",
              "T": "T", "seed": "seed", "variant": "variant", "n": "n", "initial_B": "initial_B",
              "clock_base": "clock_base"}


def _config_flags(p: argparse.ArgumentParser, **defaults) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--config", help="JSON file with SimConfig keys")
    g.add_argument("--d", type=int)
    g.add_argument("--D", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--muA", type=float)
    g.add_argument("--L", type=int)
    g.add_argument("--boundary", choices=("torus", "reflecting"))
    g.add_argument("--T", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--variant")
    g.add_argument("--n", type=int)
    g.add_argument("--initial-B", dest="initial_B", choices=("origin", "midpoint", "explicit"))
    g.add_argument("--clock-base", dest="clock_base", type=float)
    g.add_argument("--no-convert-at-seed", dest="convert_at_seed", action="store_false", default=None)
    p.set_defaults(_config_defaults=defaults)


def load_config(args) -> SimConfig:
    data = dict(args._config_defaults)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        data.update(loaded)
    for dest, key in _OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is not None:
            data[key] = v
    if args.convert_at_seed is not None:
        data["convert_at_seed"] = args.convert_at_seed
    try:
        return SimConfig.from_dict(data)
    except KeyError as exc:
        raise UsageError(exc.args[0] if exc.args else str(exc))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="infectwalk", description="A/B infection of random walkers on Z^d")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--from-manifest", help="repeat the run recorded in a manifest.json")
    p.add_argument("--out", help="directory for tables and manifest")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run replicas and print summaries")
    _config_flags(s)
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--events", action="store_true", help="also write the event log of replica 0")

    s = sub.add_parser("sweep", help="coupled survival curve over lambda")
    _config_flags(s, d=2, mu_A=1.0, L=64, T=200.0)
    s.add_argument("--lambdas", type=_floats, required=True)
    s.add_argument("--replicas", type=int, default=100)
    s.add_argument("--bisect", type=int, default=0, help="extra bisection steps")
    s.add_argument("--floor", type=float, default=0.0)

    s = sub.add_parser("couple", help="paired runs checked for exact dominance")
    _config_flags(s, d=1, mu_A=1.0, L=60, T=100.0)
    s.add_argument("--lemma", required=True, choices=sorted(COUPLING_NAMES))
    s.add_argument("--lambda1", type=float)
    s.add_argument("--lambda2", type=float)
    s.add_argument("--seeds", type=int, default=1)

    s = sub.add_parser("jpath", help="maximal jump counts J(t, 0)")
    _config_flags(s, d=2, mu_A=1.0, L=32, lam=0.0)
    s.add_argument("--times", type=_floats, default=[100.0, 200.0, 400.0])
    s.add_argument("--replicas", type=int, default=1)

    s = sub.add_parser("blocks", help="block certification runs")
    s.add_argument("--lambda", dest="lam", type=float, default=0.01)
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--levels", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("boundary-check", help="exhaustive boundary bounds on small sets")
    s.add_argument("--dim", type=int, default=2, help="spatial dimension d of the d+1 lattice")
    s.add_argument("--max-size", type=int, default=5)
    s.add_argument("--random", type=int, default=0, help="extra random sets")
    s.add_argument("--random-max", type=int, default=12)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--adjacency", choices=("linf", "nn"), default="linf")

    s = sub.add_parser("variants", help="frog, mass and pedestal studies")
    s.add_argument("--study", default="abcd")
    s.add_argument("--replicas", type=int, default=500)
    s.add_argument("--seed", type=int, default=1)

    s = sub.add_parser("converge", help="window doubling and discrete-time diagnostics")
    _config_flags(s, d=1, mu_A=1.0, L=100, T=50.0, lam=0.5)
    s.add_argument("--replicas", type=int, default=500)
    s.add_argument("--ns", type=_ints, default=[4, 16, 64])
    for s in sub.choices.values():
        s.add_argument("--out", default=argparse.SUPPRESS, help="directory for tables and manifest")
    return p


# ------------------------------------------------------------------ commands

def _emit(ctx, name: str) -> Path | None:
    if ctx.out is None:
        return None
    ctx.outputs.append(name)
    return ctx.out / name


def cmd_simulate(args, cfg, ctx) -> int:
    lines = []
    for r in range(args.replicas):
        c = replace(cfg, replica=r)
        _, log, summary = run_variant(c, log=args.events and r == 0)
        lines.append(summary.to_json_line())
        print(lines[-1])
        if log is not None and (path := _emit(ctx, "events.csv")):
            import csv
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                cols = ["time", "kind", "actor", "partner", "src", "dst"]
                w.writerow(cols)
                for row in log.to_rows():
                    w.writerow([repr(row["time"])] + [row[c] for c in cols[1:]])
    if path := _emit(ctx, "summaries.jsonl"):
        path.write_text("".join(l + "\n" for l in lines))
    return EXIT_OK


def cmd_sweep(args, cfg, ctx) -> int:
    status = EXIT_OK
    try:
        br = bracket_lambda_c(cfg, args.lambdas, args.replicas, args.bisect, args.floor)
    except NonMonotoneCurve as exc:
        print(f"non-monotone survival curve: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    for e in br.curve:
        print(f"lambda={e.config.lam!r} p_hat={e.p_hat:.4f} ci=[{e.ci_lo:.4f}, {e.ci_hi:.4f}]")
    print(json.dumps({"lambda_low": br.low, "lambda_high": br.high, "resolution": br.resolution,
                      "T": cfg.T, "L": cfg.L, "coupled_violations": br.monotone_violations}))
    if br.monotone_violations:
        status = EXIT_VIOLATION
    if path := _emit(ctx, "survival.csv"):
        write_survival_csv(path, br.curve)
    return status


def cmd_couple(args, cfg, ctx) -> int:
    from .couplings import run_coupling

    kind = COUPLING_NAMES[args.lemma]
    if kind == "rate" and (args.lambda1 is None or args.lambda2 is None):
        raise UsageError("rate coupling needs --lambda1 and --lambda2")
    lines, bad = [], 0
    for s in range(args.seeds):
        rep = run_coupling(kind, replace(cfg, seed=cfg.seed + s), args.lambda1, args.lambda2)
        lines.append(rep.verdict_line())
        bad += not rep.passed
        if not rep.passed:
            print(lines[-1])
    print(json.dumps({"lemma": kind, "seeds": args.seeds, "violations": bad}))
    if path := _emit(ctx, "couplings.jsonl"):
        path.write_text("".join(l + "\n" for l in lines))
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_jpath(args, cfg, ctx) -> int:
    from .genealogy import online_max_jumps, write_jsweep_csv

    times = sorted(args.times)
    cfg = replace(cfg, T=max(times))
    rows = []
    for r in range(args.replicas):
        J = online_max_jumps(replace(cfg, replica=r), times)
        rows.extend(zip(times, (int(j) for j in J)))
    for t, J in rows:
        print(f"t={t!r} J={J} J/t={J / t:.4f}")
    if path := _emit(ctx, "jpath.csv"):
        write_jsweep_csv(path, rows)
    return EXIT_OK


def cmd_blocks(args, cfg, ctx) -> int:
    from .renorm import block_runs, write_block_csv

    rows = block_runs(args.lam, args.runs, args.seed, args.levels)
    tested = sum(r["edges_tested"] for r in rows)
    opened = sum(r["edges_open"] for r in rows)
    viol = sum(r["lemma6_violations"] for r in rows)
    print(json.dumps({"runs": args.runs, "edges_tested": tested, "edges_open": opened,
                      "violations": viol}))
    if path := _emit(ctx, "blocks.csv"):
        write_block_csv(path, rows)
    return EXIT_VIOLATION if viol else EXIT_OK


def cmd_boundary(args, cfg, ctx) -> int:
    from .renorm import boundary_suite

    if args.dim < 1 or args.max_size < 1:
        raise UsageError("--dim and --max-size must be positive")
    res = boundary_suite(args.dim, args.max_size, args.random, args.random_max, args.seed,
                         args.adjacency)
    print(json.dumps({"dim": args.dim, "checked": res.checked, "failures": len(res.failures)}))
    for A, why in res.failures[:10]:
        print(f"FAIL {A}: {why}")
    if path := _emit(ctx, "boundary.json"):
        path.write_text(json.dumps({"checked": res.checked,
                                    "failures": [[list(map(list, A)), w] for A, w in res.failures]}) + "\n")
    return EXIT_OK if res.passed else EXIT_VIOLATION


def cmd_variants(args, cfg, ctx) -> int:
    which = set(args.study)
    if not which <= set("abcd"):
        raise UsageError("--study takes letters from 'abcd'")
    rep = variant_studies(StudySettings(replicas=args.replicas, seed=args.seed), which)
    survival = []
    for key in ("a", "b", "d"):
        for lam, val in rep.get(key, {}).items():
            ests = val if isinstance(val, list) else [val]
            for e in ests:
                print(f"study {key} variant={e.config.variant} lambda={lam!r} T={e.config.T!r} "
                      f"p_hat={e.p_hat:.4f}")
            survival.extend(ests)
    if "c" in rep:
        for k0, f in rep["c"].items():
            print(f"study c k0={k0} violation_frequency={f:.4f}")
    if path := _emit(ctx, "variants.csv"):
        write_survival_csv(path, survival)
    if "c" in rep and (path := _emit(ctx, "mass.json")):
        path.write_text(json.dumps({str(k): v for k, v in rep["c"].items()}) + "\n")
    return EXIT_OK


def cmd_converge(args, cfg, ctx) -> int:
    rep = convergence_checks(cfg, args.replicas, args.ns)
    a, b = rep.L_pair
    out = {"L": [a.config.L, b.config.L], "p_hat": [a.p_hat, b.p_hat],
           "ci": [[a.ci_lo, a.ci_hi], [b.ci_lo, b.ci_hi]], "L_disagreement": rep.L_disagreement,
           "continuous": rep.continuous.p_hat,
           "gaps": {str(n): g for n, g in rep.gaps.items()},
           "disagreement": {str(n): g for n, g in rep.disagreement.items()}}
    print(json.dumps(out))
    if path := _emit(ctx, "converge.csv"):
        write_survival_csv(path, [a, b, rep.continuous] + [rep.discrete[n] for n in args.ns])
    if path := _emit(ctx, "converge.json"):
        path.write_text(json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "couple": cmd_couple, "jpath": cmd_jpath,
            "blocks": cmd_blocks, "boundary-check": cmd_boundary, "variants": cmd_variants,
            "converge": cmd_converge}


@dataclass
class _Context:
    out: Path | None
    outputs: list


def _strip_out(argv: Sequence[str]) -> list[str]:
    res, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        res.append(a)
    return res


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.from_manifest:
            try:
                m = json.loads(Path(args.from_manifest).read_text())
                stored = list(m["argv"])
            except (OSError, KeyError, json.JSONDecodeError) as exc:
                raise UsageError(f"bad manifest {args.from_manifest}: {exc}")
            argv = (["--out", args.out] if args.out else []) + stored
            args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; see --help")
        cfg = load_config(args) if hasattr(args, "_config_defaults") else None
        out = Path(args.out) if args.out else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        ctx = _Context(out, [])
        started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        status = COMMANDS[args.command](args, cfg, ctx)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if out is not None:
        seed = cfg.seed if cfg is not None else getattr(args, "seed", 0)
        man = RunManifest(args.command, _strip_out(argv), cfg.to_dict() if cfg else {}, __version__,
                          int(seed), started, _dt.datetime.now(_dt.timezone.utc).isoformat(),
                          ctx.outputs)
        man.write(out / "manifest.json")
    return status


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
