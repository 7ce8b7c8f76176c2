"""Parameter sweeps over (p, k) with replicates, persisted summaries and plot data."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .core import ConfigError, StreamTag, SystemConfig, derive_seed, parse_p
from .engine import run_system
from .metrics import Pattern, classify

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "p",
    "k",
    "replicate",
    "seed",
    "silo_count_T",
    "entropy_T",
    "pattern",
    "trajectory_path",
    "status",
]


def fmt_float(x: float) -> str:
    return format(x, ".17g")


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    p_values: Sequence[Decimal]
    k_values: Sequence[int]
    replicates: int = 8
    parallelism: int = 1
    output_dir: Path = Path("sweep_out")

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(parse_p(p) for p in self.p_values))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1", "replicates")
        if not self.p_values or not self.k_values:
            raise ConfigError("empty p or k grid")
        for p in self.p_values:
            self.base.replace(p=p)  # validates
        for k in self.k_values:
            self.base.replace(k=k)

    def cells(self) -> list[tuple[Decimal, int, int]]:
        return [(p, k, r) for p in self.p_values for k in self.k_values for r in range(self.replicates)]


@dataclass(frozen=True)
class SweepRow:
    p: Decimal
    k: int
    replicate: int
    seed: int
    silo_count_T: int | None
    entropy_T: float | None
    pattern: Pattern | None
    trajectory_path: str
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_csv_row(self) -> list[str]:
        return [
            str(self.p),
            str(self.k),
            str(self.replicate),
            str(self.seed),
            "" if self.silo_count_T is None else str(self.silo_count_T),
            "" if self.entropy_T is None else fmt_float(self.entropy_T),
            "" if self.pattern is None else self.pattern.value,
            self.trajectory_path,
            self.status,
        ]

    @classmethod
    def from_csv(cls, rec: dict[str, str]) -> SweepRow:
        return cls(
            p=parse_p(rec["p"]),
            k=int(rec["k"]),
            replicate=int(rec["replicate"]),
            seed=int(rec["seed"]),
            silo_count_T=int(rec["silo_count_T"]) if rec["silo_count_T"] else None,
            entropy_T=float(rec["entropy_T"]) if rec["entropy_T"] else None,
            pattern=Pattern(rec["pattern"]) if rec["pattern"] else None,
            trajectory_path=rec["trajectory_path"],
            status=rec["status"],
        )


@dataclass(frozen=True)
class AggregateRow:
    group: str  # "p" (x = k) or "k" (x = p)
    group_value: str
    x: str
    silos: tuple[int, ...]
    patterns: tuple[str, ...]
    mean: float
    std_err: float
    degenerate: bool = field(default=False)

    @property
    def band(self) -> float:
        return 3.0 * self.std_err


def run_seed(master: int, p: Decimal, k: int, replicate: int) -> int:
    return derive_seed(master, StreamTag(p=str(p), k=k, replicate=replicate, role="run"))


def _trajectory_name(p: Decimal, k: int, r: int) -> str:
    return f"trajectories/p={p}_k={k}_r={r}.jsonl"


def _run_cell(base: SystemConfig, p: Decimal, k: int, r: int, out_dir: str) -> SweepRow:
    seed = run_seed(base.seed, p, k, r)
    rel = _trajectory_name(p, k, r)
    try:
        cfg = base.replace(p=p, k=k, seed=seed)
        traj = run_system(cfg)
        traj.write(Path(out_dir) / rel)
        report = classify(traj, cfg.classifier)
        last = traj.snapshots[-1]
        return SweepRow(p, k, r, seed, last.silo_count, last.entropy, report.label, rel)
    except Exception as exc:  # one failed run must not sink the sweep
        log.error("run p=%s k=%s r=%s failed: %s", p, k, r, exc)
        msg = " ".join(str(exc).split()).replace(",", ";")
        return SweepRow(p, k, r, seed, None, None, None, rel, f"error: {type(exc).__name__}: {msg}")


def max_workers(requested: int) -> int:
    cap = os.environ.get("SILOSIM_THREADS")
    n = max(1, requested)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer SILOSIM_THREADS=%r", cap)
    return n


def run_sweep(spec: SweepSpec) -> tuple[list[SweepRow], list[AggregateRow]]:
    """Run every (p, k, replicate) cell, persist trajectories, summary.csv and plot data."""
    out = spec.output_dir
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    cells = spec.cells()
    workers = max_workers(spec.parallelism)
    if workers == 1:
        rows = [_run_cell(spec.base, p, k, r, str(out)) for p, k, r in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, spec.base, p, k, r, str(out)) for p, k, r in cells]
            rows = [f.result() for f in futures]
    rows.sort(key=lambda row: (row.p, row.k, row.replicate))
    write_summary(rows, out / "summary.csv")
    aggs = emit_plot_data(rows, out)
    return rows, aggs


def summary_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow(row.as_csv_row())
    return buf.getvalue()


def write_summary(rows: Iterable[SweepRow], path: Path) -> None:
    Path(path).write_text(summary_csv(rows), encoding="utf-8")


def read_summary(path: str | Path) -> list[SweepRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(SUMMARY_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [SweepRow.from_csv(rec) for rec in reader]


def mean_stderr(values: Sequence[float]) -> tuple[float, float, bool]:
    """Mean and standard error (sample sd / sqrt(R)); R == 1 gives stderr 0 flagged degenerate."""
    R = len(values)
    if R == 0:
        raise ValueError("no values")
    mean = math.fsum(values) / R
    if R == 1:
        return mean, 0.0, True
    var = math.fsum((v - mean) ** 2 for v in values) / (R - 1)
    return mean, math.sqrt(var) / math.sqrt(R), False


def aggregate(rows: Sequence[SweepRow]) -> list[AggregateRow]:
    """Group successful rows per p (x = k) and per k (x = p)."""
    good = [r for r in rows if r.ok]
    out = []
    for group in ("p", "k"):
        xname = "k" if group == "p" else "p"
        cells: dict[tuple, list[SweepRow]] = {}
        for r in good:
            cells.setdefault((getattr(r, group), getattr(r, xname)), []).append(r)
        for (g, x), members in sorted(cells.items()):
            members.sort(key=lambda r: r.replicate)
            silos = tuple(r.silo_count_T for r in members)
            mean, se, degen = mean_stderr(silos)
            out.append(
                AggregateRow(group, str(g), str(x), silos, tuple(r.pattern.value for r in members), mean, se, degen)
            )
    return out


def _plot_csv(aggs: Sequence[AggregateRow], xname: str) -> str:
    width = max(len(a.silos) for a in aggs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        [xname, "runs"]
        + [f"silos_{i}" for i in range(width)]
        + [f"pattern_{i}" for i in range(width)]
        + ["mean", "std_err", "band", "degenerate"]
    )
    for a in aggs:
        pad = width - len(a.silos)
        w.writerow(
            [a.x, len(a.silos)]
            + [str(s) for s in a.silos] + [""] * pad
            + list(a.patterns) + [""] * pad
            + [fmt_float(a.mean), fmt_float(a.std_err), fmt_float(a.band), int(a.degenerate)]
        )
    return buf.getvalue()


def emit_plot_data(rows: Sequence[SweepRow], out_dir: str | Path) -> list[AggregateRow]:
    """Write figure4_p=<p>.csv (silos vs k) and figure5_k=<k>.csv (silos vs p)."""
    if not rows:
        raise ValueError("no rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggs = aggregate(rows)
    by_file: dict[str, list[AggregateRow]] = {}
    for a in aggs:
        name = f"figure4_p={a.group_value}.csv" if a.group == "p" else f"figure5_k={a.group_value}.csv"
        by_file.setdefault(name, []).append(a)
    for name, members in by_file.items():
        xname = "k" if members[0].group == "p" else "p"
        members.sort(key=lambda a: Decimal(a.x))
        (out_dir / name).write_text(_plot_csv(members, xname), encoding="utf-8")
    return aggs
