import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy as scipy_entropy

from silosim.core import UNKNOWN_LABEL, ClassifierParams
from silosim.metrics import Pattern, classify, entropy, silo_tally, stability

from builders import frozen_trajectory, strict_decay_trajectory, swap_trajectory, trajectory_from_labels


PARAMS = ClassifierParams(m=8, W=16)


class TestTally:
    def test_unanimous(self):
        assert silo_tally([3] * 7)[:2] == ({3: 7}, 1)

    def test_direct(self):
        assert silo_tally([0, 0, 1, 1, 2])[:2] == ({0: 2, 1: 2, 2: 1}, 3)

    def test_hash_map_oracle(self):
        rnd = random.Random(3)
        labels = [rnd.randrange(12) for _ in range(1000)]
        counts, count, unknown = silo_tally(labels)
        oracle = {}
        for lab in labels:
            oracle[lab] = oracle.get(lab, 0) + 1
        assert counts == oracle and count == len(oracle) and unknown == 0

    def test_unknown_excluded(self):
        assert silo_tally([UNKNOWN_LABEL, 2, 2, UNKNOWN_LABEL]) == ({2: 2}, 1, 2)

    def test_empty(self):
        with pytest.raises(ValueError):
            silo_tally([])


class TestStability:
    def test_bounds(self):
        assert stability([1, 2, 3], [1, 2, 3]) == 1.0
        assert stability([1, 2, 3], [2, 3, 1]) == 0.0

    def test_three_changed(self):
        prev = list(range(30))
        curr = prev[:27] + [99, 98, 97]
        assert stability(prev, curr) == pytest.approx(0.9, abs=1e-15)

    def test_unknown_never_stable(self):
        assert stability([UNKNOWN_LABEL, 1], [UNKNOWN_LABEL, 1]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            stability([1], [1, 2])

    @settings(max_examples=60)
    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=40), st.randoms())
    def test_permutation_equivariant(self, pairs, rnd):
        prev, curr = [a for a, _ in pairs], [b for _, b in pairs]
        idx = list(range(len(pairs)))
        rnd.shuffle(idx)
        assert stability(prev, curr) == stability([prev[i] for i in idx], [curr[i] for i in idx])


class TestEntropy:
    def test_one_silo(self):
        assert entropy({0: 30}) == 0.0
        assert math.copysign(1, entropy({0: 30})) == 1.0

    def test_even_split(self):
        assert entropy({0: 15, 1: 15}) == 1.0
        assert entropy({0: 10, 1: 10, 2: 10}) == pytest.approx(math.log2(3), abs=1e-12)

    def test_twenty_ten(self):
        # frozen from scipy.stats.entropy([20, 10], base=2)
        assert entropy({0: 20, 1: 10}, 30) == pytest.approx(0.9182958340544894, abs=1e-12)

    def test_bad_population(self):
        with pytest.raises(ValueError):
            entropy({}, 0)
        with pytest.raises(ValueError):
            entropy({0: 3}, 4)

    @settings(max_examples=100)
    @given(st.lists(st.integers(1, 50), min_size=1, max_size=12))
    def test_properties(self, sizes):
        counts = dict(enumerate(sizes))
        h = entropy(counts)
        assert h >= 0
        assert (h == 0) == (len(sizes) == 1)
        assert h <= math.log2(len(sizes)) + 1e-12
        if len(set(sizes)) == 1:
            assert h == pytest.approx(math.log2(len(sizes)), abs=1e-12)
        assert h == pytest.approx(scipy_entropy(sizes, base=2), abs=1e-12)


class TestClassify:
    def test_frozen_multi_silo_is_stable(self):
        rep = classify(frozen_trajectory([0, 1, 2] * 10), PARAMS)
        assert rep.label is Pattern.STABLE
        assert rep.entropy_spread == 0 and rep.min_stability_in_window == 1.0
        assert rep.t_min_entropy == 0

    def test_frozen_single_silo_is_one_silo(self):
        assert classify(frozen_trajectory([4] * 30), PARAMS).label is Pattern.ONE_SILO

    def test_strict_decay(self):
        traj = strict_decay_trajectory()
        ents = [s.entropy for s in traj.snapshots]
        assert all(a > b for a, b in zip(ents[:79], ents[1:80]))
        assert ents[80] > ents[79]
        rep = classify(traj, PARAMS)
        assert rep.t_min_entropy == 79
        assert rep.label is Pattern.DECAYING

    def test_swap_oscillation_is_unstable(self):
        traj = swap_trajectory()
        rep = classify(traj, PARAMS)
        assert rep.label is Pattern.UNSTABLE
        assert rep.silo_count_constant
        assert rep.entropy_max_deviation == 0.0
        assert rep.min_stability_in_window == pytest.approx(28 / 30)
        assert rep.t_min_entropy == 40

    def test_indeterminate(self):
        # silo count keeps changing and the entropy minimum is early
        two, three = [0] * 15 + [1] * 15, [0] * 10 + [1] * 10 + [2] * 10
        rows = [[0] * 30] + [two if t % 2 else three for t in range(1, 41)]
        rep = classify(trajectory_from_labels(rows), ClassifierParams(m=4, W=8))
        assert rep.label is Pattern.INDETERMINATE

    def test_precedence_configurable(self):
        traj = strict_decay_trajectory()
        rep = classify(traj, PARAMS, precedence=[Pattern.UNSTABLE, Pattern.DECAYING])
        assert rep.label in (Pattern.UNSTABLE, Pattern.DECAYING)

    def test_too_short(self):
        with pytest.raises(ValueError):
            classify(frozen_trajectory([0, 1], T=10), PARAMS)

    def test_default_params_follow_T(self):
        rep = classify(frozen_trajectory([0, 1], T=80))
        assert (rep.m, rep.W) == (8, 16)

    def test_never_decaying_when_frozen(self):
        for T in (8, 20, 50):
            rep = classify(frozen_trajectory([0, 1, 1], T=T), ClassifierParams(m=4, W=8))
            assert rep.label is Pattern.STABLE

    def test_report_dict(self):
        d = classify(swap_trajectory(), PARAMS).to_dict()
        assert d["label"] == "Unstable"
        assert set(d["evidence"]) >= {"tMinEntropy", "windowStart", "siloCountConstant", "entropySpread", "minStabilityInWindow"}


@settings(max_examples=40, deadline=None)
@given(
    rows=st.lists(st.lists(st.integers(0, 3), min_size=6, max_size=6), min_size=9, max_size=20),
    perm=st.permutations(list(range(4))),
)
def test_relabeling_invariance(rows, perm):
    relabelled = [[perm[x] for x in row] for row in rows]
    a = trajectory_from_labels(rows)
    b = trajectory_from_labels(relabelled)
    params = ClassifierParams(m=2, W=4)
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert sa.silo_count == sb.silo_count
        assert sa.stability == sb.stability
        assert sa.entropy == sb.entropy
    assert classify(a, params).label == classify(b, params).label


def test_brute_force_metrics_on_random_vectors():
    rnd = random.Random(17)
    for _ in range(1000):
        n = rnd.randint(1, 100)
        prev = [rnd.randrange(8) for _ in range(n)]
        curr = [rnd.randrange(8) for _ in range(n)]
        counts, _, _ = silo_tally(curr)
        oracle_h = scipy_entropy(list(Counter(curr).values()), base=2)
        assert abs(entropy(counts, n) - oracle_h) <= 1e-12
        assert abs(stability(prev, curr) - sum(a == b for a, b in zip(prev, curr)) / n) <= 1e-12
