"""Command line entry point: run / sweep / classify / plotdata.

Exit status: 0 success, 1 a run failed, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from .core import BackendConfig, ClassifierParams, ConfigError, SystemConfig, Trajectory, config_to_json, load_config, parse_config, parse_p
from .engine import SimulationError, run_system
from .harness import SweepSpec, emit_plot_data, read_summary, run_sweep
from .metrics import classify

log = logging.getLogger("silosim")

EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2


def default_config() -> SystemConfig:
    text = resources.files("silosim").joinpath("configs/paper.json").read_text(encoding="utf-8")
    return parse_config(text)


def _csv_list(conv):
    def parse(text: str):
        try:
            return [conv(x.strip()) for x in text.split(",") if x.strip()]
        except (ValueError, ConfigError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _p_arg(text: str):
    try:
        return parse_p(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_overrides(sp: argparse.ArgumentParser, grid: bool = False) -> None:
    sp.add_argument("--config", help="JSON config file (default: bundled default config)")
    if not grid:
        sp.add_argument("--p", type=_p_arg, help="mirroring probability")
        sp.add_argument("--k", type=int, help="neighbour count")
    sp.add_argument("--n", type=int, help="agent count")
    sp.add_argument("--T", type=int, help="final tick")
    sp.add_argument("--seed", type=int, help="64-bit master seed")
    sp.add_argument("--backend", choices=["synthetic", "gmm", "llm"], help="backend kind (default parameters)")
    sp.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="silosim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("-q", "--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="simulate one system")
    _add_overrides(sp)
    sp.add_argument("--embeddings", action="store_true", help="also dump per-tick embeddings")

    sp = sub.add_parser("sweep", help="simulate a (p, k) grid with replicates")
    _add_overrides(sp, grid=True)
    sp.add_argument("--p-values", type=_csv_list(parse_p), default=None, help="comma-separated, e.g. 0.2,0.5,0.9")
    sp.add_argument("--k-values", type=_csv_list(int), default=None, help="comma-separated, e.g. 3,15,29")
    sp.add_argument("--replicates", type=int, default=8)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes (capped by SILOSIM_THREADS)")

    sp = sub.add_parser("classify", help="classify a stored trajectory JSONL")
    sp.add_argument("trajectory")
    sp.add_argument("--config", help="take classifier parameters from this config")
    sp.add_argument("--m", type=int)
    sp.add_argument("--W", type=int)
    sp.add_argument("--out", help="write report here instead of stdout")

    sp = sub.add_parser("plotdata", help="regenerate figure CSVs from summary.csv")
    sp.add_argument("summary")
    sp.add_argument("--out", help="output directory (default: next to summary.csv)")
    return ap


def _resolve_config(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.backend and args.backend != cfg.backend.kind:
        cfg = cfg.replace(backend=BackendConfig.build(args.backend))
    changes = {}
    for name in ("p", "k", "n", "T", "seed"):
        val = getattr(args, name, None)
        if val is not None:
            changes[name] = val
    if changes:
        cfg = cfg.replace(**changes)
    return cfg


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    params = cfg.classifier_resolved
    if cfg.T < params.W:
        raise ConfigError(f"T={cfg.T} is shorter than the classifier window W={params.W}", "T")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config_to_json(cfg), encoding="utf-8")
    try:
        traj = run_system(cfg, keep_embeddings=args.embeddings)
    except SimulationError as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUN_FAILED
    traj.write(out / "trajectory.jsonl", with_embeddings=args.embeddings)
    report = classify(traj, cfg.classifier)
    (out / "classification.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    log.info("T=%d silos=%d pattern=%s", cfg.T, traj.snapshots[-1].silo_count, report.label.value)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    base = _resolve_config(args)
    spec = SweepSpec(
        base=base,
        p_values=args.p_values or [base.p],
        k_values=args.k_values or [base.k],
        replicates=args.replicates,
        parallelism=args.jobs,
        output_dir=Path(args.out),
    )
    rows, _ = run_sweep(spec)
    failed = [r for r in rows if not r.ok]
    log.info("%d runs, %d failed; summary at %s", len(rows), len(failed), spec.output_dir / "summary.csv")
    return EXIT_RUN_FAILED if failed else EXIT_OK


def _cmd_classify(args) -> int:
    params = load_config(args.config).classifier if args.config else ClassifierParams()
    if args.m is not None or args.W is not None:
        params = ClassifierParams(
            m=args.m if args.m is not None else params.m,
            W=args.W if args.W is not None else params.W,
            eps_entropy_const=params.eps_entropy_const,
            delta_entropy_approx=params.delta_entropy_approx,
            eps_min=params.eps_min,
        )
    try:
        traj = Trajectory.read(args.trajectory)
        report = classify(traj, params)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    try:
        rows = read_summary(args.summary)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out) if args.out else Path(args.summary).parent
    emit_plot_data(rows, out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * args.verbose if not args.quiet else logging.ERROR
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "classify": _cmd_classify, "plotdata": _cmd_plotdata}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"silosim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
