"""Silo tallies, stability, entropy and trajectory pattern classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import UNKNOWN_LABEL, ClassifierParams, Trajectory


class Pattern(str, enum.Enum):
    ONE_SILO = "OneSilo"
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    DECAYING = "Decaying"
    INDETERMINATE = "Indeterminate"


DEFAULT_PRECEDENCE = (Pattern.ONE_SILO, Pattern.STABLE, Pattern.DECAYING, Pattern.UNSTABLE)


def silo_tally(labels: Sequence[int]) -> tuple[dict[int, int], int, int]:
    """Count agents per silo.

    Returns ``(silo_counts, silo_count, unknown)``; answers carrying the
    unknown sentinel are left out of the counts and reported separately.
    """
    if len(labels) < 1:
        raise ValueError("need at least one label")
    counts: dict[int, int] = {}
    unknown = 0
    for lab in labels:
        lab = int(lab)
        if lab == UNKNOWN_LABEL:
            unknown += 1
            continue
        counts[lab] = counts.get(lab, 0) + 1
    return dict(sorted(counts.items())), len(counts), unknown


def stability(prev: Sequence[int], curr: Sequence[int]) -> float:
    """Fraction of agents whose silo is unchanged. Unknown answers never count as unchanged."""
    if len(prev) != len(curr):
        raise ValueError(f"label vectors differ in length: {len(prev)} vs {len(curr)}")
    if not len(curr):
        raise ValueError("empty label vectors")
    same = sum(1 for a, b in zip(prev, curr) if a == b and a != UNKNOWN_LABEL)
    return same / len(curr)


def entropy(silo_counts: Mapping[int, int], n: int | None = None) -> float:
    """Shannon entropy in bits of the agent distribution over silos."""
    total = sum(silo_counts.values())
    if n is None:
        n = total
    if n <= 0:
        raise ValueError("entropy needs a positive population")
    if total != n:
        raise ValueError(f"silo counts sum to {total}, expected {n}")
    h = 0.0
    # summing over sorted sizes makes the result independent of label ids
    for c in sorted(silo_counts.values()):
        if c > 0:
            q = c / n
            h -= q * math.log2(q)
    return h + 0.0  # normalise -0.0


@dataclass(frozen=True)
class ClassificationReport:
    label: Pattern
    t_min_entropy: int
    window_start: int
    silo_count_constant: bool
    entropy_spread: float
    entropy_max_deviation: float
    min_stability_in_window: float
    m: int
    W: int

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "evidence": {
                "tMinEntropy": self.t_min_entropy,
                "windowStart": self.window_start,
                "siloCountConstant": self.silo_count_constant,
                "entropySpread": self.entropy_spread,
                "entropyMaxDeviation": self.entropy_max_deviation,
                "minStabilityInWindow": self.min_stability_in_window,
            },
            "params": {"m": self.m, "W": self.W},
        }


def classify(
    traj: Trajectory,
    params: ClassifierParams | None = None,
    precedence: Sequence[Pattern] = DEFAULT_PRECEDENCE,
) -> ClassificationReport:
    """Assign exactly one silo pattern to a trajectory.

    Rules are evaluated in ``precedence`` order over the trailing window
    ``[T - W, T]``; the first that holds wins, otherwise Indeterminate.
    """
    snaps = traj.snapshots
    T = len(snaps) - 1
    params = (params or ClassifierParams()).resolved(T)
    m, W = params.m, params.W
    if len(snaps) < W + 1:
        raise ValueError(f"trajectory has {len(snaps)} snapshots; window W={W} needs at least {W + 1}")

    start = T - W
    window = snaps[start:]
    counts = [s.silo_count for s in window]
    ents = [s.entropy for s in window]
    # stability is absent only at t=0; the window may include it when T == W
    stabs = [s.stability for s in window if s.stability is not None]

    count_const = min(counts) == max(counts)
    spread = max(ents) - min(ents)
    mean_e = math.fsum(ents) / len(ents)
    max_dev = max(abs(e - mean_e) for e in ents)
    min_stab = min(stabs) if stabs else 1.0

    all_e = [s.entropy for s in snaps]
    floor = min(all_e) + params.eps_min
    t_min = next(t for t, e in enumerate(all_e) if e <= floor)

    rules = {
        Pattern.ONE_SILO: lambda: all(c == 1 for c in counts),
        Pattern.STABLE: lambda: count_const and spread <= params.eps_entropy_const and min_stab == 1.0,
        Pattern.DECAYING: lambda: T - t_min < m,
        Pattern.UNSTABLE: lambda: count_const and max_dev <= params.delta_entropy_approx and min_stab < 1.0,
    }
    label = Pattern.INDETERMINATE
    for pat in precedence:
        if rules[pat]():
            label = pat
            break

    return ClassificationReport(
        label=label,
        t_min_entropy=t_min,
        window_start=start,
        silo_count_constant=count_const,
        entropy_spread=spread,
        entropy_max_deviation=max_dev,
        min_stability_in_window=min_stab,
        m=m,
        W=W,
    )
