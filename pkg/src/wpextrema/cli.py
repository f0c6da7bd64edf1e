"""Command-line entry point: ``wpextrema law | simulate | validate``.

Every option may also come from a ``--config`` file of ``key = value`` lines
(keys are option names with ``-`` or ``_``); flags on the command line win.
Outputs that go to ``--out-dir`` are accompanied by ``manifest.json``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._backend import BACKEND
from .ingest import (
    BinConfig,
    FilterPolicy,
    IngestError,
    bin_games,
    diagnostic_table,
    orient_and_filter,
    overlay_data,
    parse_games,
    qq_data,
    write_diagnostics_csv,
    write_jsonl,
    write_rows,
)
from .laws import DomainError, Law, LawKind, parse_priors
from .simulate import (
    Functional,
    Generator,
    Monitor,
    SimConfig,
    SimulationError,
    monte_carlo_sample,
    oracle_distance,
    stopping_identity_report,
    synthetic_corpus,
    write_sample_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_GRID_POINTS = 512
DATASET_CENTERS = "0.50,0.55,0.60,0.65,0.70,0.75,0.80"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# --- argument types ------------------------------------------------------------


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from None


def _prob(text: str) -> float:
    return float(_fraction(text))


def _prob_list(text: str) -> list:
    return [_prob(t) for t in str(text).split(",") if t.strip()]


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _text_list(text: str) -> list:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# --- parser --------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out-dir", help="directory for outputs and manifest.json")
    p.add_argument("--format", choices=("csv", "tsv"), default="csv", help="table format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wpextrema", description=__doc__.split("\n")[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    law = sub.add_parser("law", help="evaluate a closed-form law", allow_abbrev=False)
    law.add_argument("kind", choices=[k.value for k in LawKind] + ["finance"])
    law.add_argument("--p0", type=_prob, help="starting probability (fractions allowed)")
    law.add_argument("--priors", help="comma-separated priors for winner-min, e.g. 1/6,1/3,1/2")
    law.add_argument("--cdf-at", type=_prob_list, help="comma-separated x values")
    law.add_argument("--survival-at", type=_prob_list, help="comma-separated x values")
    law.add_argument("--quantile", type=_prob_list, help="comma-separated u values")
    law.add_argument("--grid", type=int, default=None,
                     help=f"emit x,cdf on N equally spaced points (default {DEFAULT_GRID_POINTS} "
                          "when no query is given)")
    _common(law)

    sim = sub.add_parser("simulate", help="Monte Carlo oracle runs", allow_abbrev=False)
    sim.add_argument("--gen", choices=[g.value for g in Generator], default="bridge")
    sim.add_argument("--p0", type=_prob)
    sim.add_argument("--priors", help="n-player priors, comma separated")
    sim.add_argument("--steps", type=int, default=2000, help="bridge steps N")
    sim.add_argument("--h", type=_fraction, help="lattice step 1/K for walks")
    sim.add_argument("--paths", type=int, default=100_000)
    sim.add_argument("--functional", choices=[f.value for f in Functional], default=None)
    sim.add_argument("--monitor", choices=[m.value for m in Monitor], default="grid")
    sim.add_argument("--max-steps", type=int, default=None)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--decompose-at", type=_prob, default=None,
                     help="report the optional-stopping decomposition at this level")
    sim.add_argument("--dataset", type=_bool, nargs="?", const=True, default=False,
                     help="write a synthetic games.jsonl corpus instead of a sample")
    sim.add_argument("--centers", type=_prob_list, default=_prob_list(DATASET_CENTERS))
    sim.add_argument("--width", type=_prob, default=0.05)
    sim.add_argument("--games-per-bin", type=int, default=200)
    sim.add_argument("--shrink", type=_prob, default=None)
    _common(sim)

    val = sub.add_parser("validate", help="calibration diagnostics for a game corpus", allow_abbrev=False)
    val.add_argument("data", nargs="?", help="games.jsonl, or games.csv with --series")
    val.add_argument("--series", help="series.csv for the long CSV format")
    val.add_argument("--centers", type=_prob_list, default=None)
    val.add_argument("--width", type=_prob, default=0.05)
    val.add_argument("--min-count", type=int, default=100)
    val.add_argument("--alpha", type=_prob, default=0.05)
    val.add_argument("--mode", choices=("center", "mixture"), default="center",
                     help="reference law per bin: at the bin center, or the mixture over games")
    val.add_argument("--seasons", type=_int_list, default=None)
    val.add_argument("--leagues", type=_text_list, default=None)
    _common(val)
    return parser


def _read_config(path: str) -> dict:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv: Sequence[str]):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_help())
    if args.config:
        cfg = _read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in subparser._actions}
        explicit = _explicit_dests(subparser, argv, args)
        for key, raw in cfg.items():
            if key in ("config", "help") or key not in actions:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if key in explicit:
                continue
            action = actions[key]
            try:
                value = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config {key}: {exc}") from exc
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config {key}: {value!r} not in {sorted(action.choices)}")
            setattr(args, key, value)
    return args


def _explicit_dests(subparser, argv, args) -> set:
    dests = set()
    for action in subparser._actions:
        if action.option_strings:
            if any(opt in argv or any(a.startswith(opt + "=") for a in argv)
                   for opt in action.option_strings):
                dests.add(action.dest)
        elif getattr(args, action.dest, None) != action.default:
            dests.add(action.dest)
    return dests


# --- output helpers ------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    inputs: Sequence[Path], outputs: Sequence[Path]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "master_seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {p.name: _sha256(p) for p in outputs},
        "version": __version__,
        "backend": BACKEND,
    }
    _dump_json(manifest, out_dir / "manifest.json")


def _out_dir(args) -> Path:
    out = Path(args.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _delim(args) -> str:
    return "\t" if args.format == "tsv" else ","


def _ext(args) -> str:
    return args.format


def _fmt(v: float) -> str:
    return repr(float(v))


# --- commands ------------------------------------------------------------------


def _law_from_args(args) -> Law:
    kind = "max-cond-loss" if args.kind == "finance" else args.kind
    if kind == LawKind.WINNER_MIN.value:
        if args.priors is None:
            raise UsageError("winner-min needs --priors")
        return Law.winner_min(parse_priors(args.priors).priors)
    if args.p0 is None:
        raise UsageError(f"{kind} needs --p0")
    return Law.from_kind(kind, args.p0)


def cmd_law(args, out) -> int:
    law = _law_from_args(args)
    d = _delim(args)
    rows = []
    for name, values, fn in (("cdf", args.cdf_at, law.cdf), ("survival", args.survival_at, law.survival),
                             ("quantile", args.quantile, law.quantile)):
        for v in values or []:
            rows.append((name, v, fn(v)))
    grid = args.grid
    if not rows and grid is None:
        grid = DEFAULT_GRID_POINTS
    params = law.params
    config = {"kind": law.kind.value, "grid": grid,
              "params": list(params.priors) if hasattr(params, "priors") else params.p0}
    if rows:
        lines = [d.join(("query", "x", "value"))]
        # 15 significant digits: readable, and far inside the 1e-12 accuracy of the laws
        lines += [d.join((name, f"{x:.15g}", f"{val:.15g}")) for name, x, val in rows]
        text = "\n".join(lines) + "\n"
        if args.out_dir:
            dest = _out_dir(args) / f"law_values.{_ext(args)}"
            dest.write_text(text, encoding="utf-8")
            _write_manifest(dest.parent, "law", config, args.seed, [], [dest])
        out.write(text)
    if grid is not None:
        if grid < 2:
            raise UsageError("--grid needs at least 2 points")
        xs = np.linspace(0.0, 1.0, grid)
        lines = [d.join(("x", "cdf"))] + [d.join((_fmt(x), _fmt(y))) for x, y in zip(xs, law.cdf(xs))]
        text = "\n".join(lines) + "\n"
        if args.out_dir:
            dest = _out_dir(args) / f"law_grid.{_ext(args)}"
            dest.write_text(text, encoding="utf-8")
            _write_manifest(dest.parent, "law", config, args.seed, [], [dest])
            out.write(f"wrote {dest}\n")
        else:
            out.write(text)
    return EXIT_OK


def _sim_config(args) -> SimConfig:
    gen = Generator(args.gen)
    kw = dict(generator=gen, n_paths=args.paths, master_seed=args.seed, monitor=args.monitor)
    if gen is Generator.NPLAYER_GRID_WALK:
        if args.priors is None:
            raise UsageError("--gen nplayer needs --priors")
        kw["priors"] = parse_priors(args.priors).priors
    else:
        if args.p0 is None:
            raise UsageError(f"--gen {gen.value} needs --p0")
        kw["p0"] = args.p0
    if gen is Generator.GAUSSIAN_BRIDGE:
        kw["steps"] = args.steps
    else:
        if args.h is None:
            raise UsageError(f"--gen {gen.value} needs --h")
        kw["grid_step"] = args.h
        kw["max_steps"] = args.max_steps
    return SimConfig(**kw)


def cmd_simulate(args, out) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    out_dir = _out_dir(args)
    if args.dataset:
        if Generator(args.gen) is not Generator.GAUSSIAN_BRIDGE:
            raise UsageError("--dataset uses the bridge generator")
        if args.steps < 2:
            raise UsageError("--steps must be >= 2")
        games = synthetic_corpus(args.centers, args.games_per_bin, args.steps, args.seed,
                                 width=args.width, shrink=args.shrink)
        dest = out_dir / "games.jsonl"
        write_jsonl(games, dest)
        config = {"mode": "dataset", "generator": "bridge", "steps": args.steps,
                  "centers": args.centers, "width": args.width,
                  "games_per_bin": args.games_per_bin, "shrink": args.shrink}
        _write_manifest(out_dir, "simulate", config, args.seed, [], [dest])
        out.write(f"wrote {len(games)} games to {dest}\n")
        return EXIT_OK

    cfg = _sim_config(args)
    if args.decompose_at is not None:
        dec = stopping_identity_report(cfg, args.decompose_at, workers=args.workers)
        z = dec.z_score()
        summary = {"level": dec.level, "p0": dec.p0, "n_paths": dec.n_paths,
                   "term_main": dec.term_main, "term_laststep": dec.term_laststep,
                   "term_overshoot": dec.term_overshoot, "total": dec.total,
                   "std_error": dec.std_error, "se_main": dec.se_main,
                   "se_laststep": dec.se_laststep, "se_overshoot": dec.se_overshoot,
                   "corrections": dec.corrections, "unabsorbed": dec.unabsorbed,
                   "z_score": z if math.isfinite(z) else str(z)}
        dest = out_dir / "decomposition.json"
        _dump_json(summary, dest)
        config = dict(cfg.as_dict(), mode="decompose", level=dec.level)
        _write_manifest(out_dir, "simulate", config, cfg.master_seed, [], [dest])
        for k in ("term_main", "term_laststep", "term_overshoot", "total", "std_error"):
            out.write(f"{k}: {_fmt(summary[k])}\n")
        if dec.std_error > 0 and abs(z) > 6:
            sys.stderr.write(f"decomposition total is {z:.1f} standard errors from p0\n")
            return EXIT_INTERNAL
        return EXIT_OK

    functional = Functional(args.functional or (
        "winner-min" if cfg.generator is Generator.NPLAYER_GRID_WALK else "loser-peak"))
    res = monte_carlo_sample(cfg, functional, workers=args.workers)
    sample_path = out_dir / f"sample.{_ext(args)}"
    write_sample_csv(res.sample, sample_path, header=functional.value, delimiter=_delim(args))
    dist = oracle_distance(res)
    summary = {"functional": functional.value, "generated": res.generated,
               "retained": res.retained, "unabsorbed": res.unabsorbed,
               "mean": float(np.mean(res.values)), "sup_distance": dist}
    summary_path = out_dir / "summary.json"
    _dump_json(summary, summary_path)
    config = dict(cfg.as_dict(), mode="sample", functional=functional.value)
    _write_manifest(out_dir, "simulate", config, cfg.master_seed, [], [sample_path, summary_path])
    out.write(f"retained {res.retained} of {res.generated} paths "
              f"({res.unabsorbed} unabsorbed); mean {_fmt(summary['mean'])}\n")
    out.write(f"sup_distance: {_fmt(dist)}\n")
    return EXIT_OK


def cmd_validate(args, out) -> int:
    data = args.data
    if not data:
        raise UsageError("validate needs a data file")
    data = Path(data)
    series = Path(args.series) if args.series else None
    if series is None and data.suffix.lower() == ".csv":
        series = data.with_name("series.csv")
    try:
        parsed = parse_games(data, series)
    except IngestError as exc:
        raise DataError(str(exc)) from exc
    for issue in parsed.errors[:20]:
        sys.stderr.write(f"skipped {issue}\n")
    if len(parsed.errors) > 20:
        sys.stderr.write(f"... {len(parsed.errors) - 20} more parse errors\n")
    policy = FilterPolicy(
        seasons=frozenset(args.seasons) if args.seasons else None,
        leagues=frozenset(args.leagues) if args.leagues else None,
    )
    games, counts = orient_and_filter(parsed.records, policy)
    if not games:
        raise DataError("no games left after filtering")
    try:
        bins_cfg = BinConfig(centers=tuple(args.centers) if args.centers else BinConfig().centers,
                             width=args.width, min_count=args.min_count)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    binning = bin_games(games, bins_cfg)
    if not binning.samples:
        raise DataError(f"every bin has fewer than {args.min_count} games")
    rows = diagnostic_table(binning, alpha=args.alpha, mode=args.mode)

    out_dir = _out_dir(args)
    d, ext = _delim(args), _ext(args)
    diag = out_dir / f"diagnostics.{ext}"
    write_diagnostics_csv(rows, diag, delimiter=d)
    overlay = out_dir / f"overlay.{ext}"
    write_rows(overlay_data(binning, args.mode), ("p0", "x", "ecdf", "theory"), overlay, d)
    qq = out_dir / f"qq.{ext}"
    write_rows(qq_data(binning, args.mode), ("p0", "theoretical", "empirical"), qq, d)
    report = {
        "parsed": len(parsed.records), "parse_errors": len(parsed.errors),
        "ties_dropped": counts.ties, "unknown_dropped": counts.unknown,
        "season_excluded": counts.season_excluded, "league_excluded": counts.league_excluded,
        "reoriented": counts.reoriented, "retained": counts.retained,
        "out_of_range": binning.out_of_range,
        "omitted_bins": {f"{c:.2f}": n for c, n in binning.omitted.items()},
        "bins": len(rows), "rejections": sum(r.reject for r in rows),
    }
    report_path = out_dir / "report.json"
    _dump_json(report, report_path)
    inputs = [data] + ([series] if series is not None else [])
    config = {"alpha": args.alpha, "centers": list(bins_cfg.centers), "width": args.width,
              "min_count": args.min_count, "mode": args.mode, "seasons": args.seasons,
              "leagues": args.leagues, "format": args.format}
    _write_manifest(out_dir, "validate", config, args.seed, inputs, [diag, overlay, qq, report_path])

    out.write(f"games: {report['parsed']} parsed, {report['parse_errors']} parse errors, "
              f"{counts.ties} ties dropped, {counts.unknown} unknown dropped, "
              f"{counts.retained} retained\n")
    out.write(d.join(("p0", "n", "kl", "ks_d", "p_value", "reject")) + "\n")
    for r in rows:
        out.write(d.join((f"{r.p0_center:.2f}", str(r.n), f"{r.kl:.4f}", f"{r.ks_d:.4f}",
                          f"{r.p_value:.4f}", "1" if r.reject else "0")) + "\n")
    return EXIT_OK


COMMANDS = {"law": cmd_law, "simulate": cmd_simulate, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args, out)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (DomainError, argparse.ArgumentTypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (DataError, IngestError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except SimulationError as exc:
        sys.stderr.write(f"simulation error: {exc}\n")
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - surfaced as an internal failure
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
