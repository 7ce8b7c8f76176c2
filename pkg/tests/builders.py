"""Hand-built trajectories with known classifications."""

import numpy as np

from silosim.core import Answer, SiloLabel, Trajectory
from silosim.engine import make_snapshot


def trajectory_from_labels(label_rows, config=None) -> Trajectory:
    """Build a trajectory whose snapshots carry the given per-tick label vectors."""
    snaps = []
    prev = None
    for t, row in enumerate(label_rows):
        answers = [Answer(SiloLabel(int(x)), np.zeros(1)) for x in row]
        snaps.append(make_snapshot(t, answers, prev))
        prev = snaps[-1].labels
    return Trajectory(config, snaps)


def frozen_trajectory(labels, T=80):
    return trajectory_from_labels([list(labels)] * (T + 1))


def strict_decay_trajectory():
    """n=100, T=80: one agent per tick leaves a pair to join the big silo until t=79, then one defects."""
    row = [0] * 10 + [1 + i // 2 for i in range(90)]  # big silo of 10, 45 pairs
    rows = [row[:]]
    for t in range(1, 80):
        row[9 + t] = 0
        rows.append(row[:])
    row = row[:]
    row[0] = 999
    rows.append(row)
    return trajectory_from_labels(rows)


def swap_trajectory():
    """n=30, three equal silos until t=40, then agents 0 and 1 flip between two silos of 16/14."""
    rows = []
    for t in range(81):
        if t < 40:
            rows.append([i % 3 for i in range(30)])
        else:
            side = 0 if t % 2 == 0 else 1
            rows.append([side, side] + [0] * 14 + [1] * 14)
    return trajectory_from_labels(rows)
