"""Confusion, calibration, discard curves: fixtures plus brute-force oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segrel.errors import DataError
from segrel.evaluation import (
    CalibrationResult,
    ConfusionCounts,
    RiskCoverageCurve,
    calibration,
    confusion,
    curve_summary,
    curve_to_rows,
    discard_curve,
    flag_at_threshold,
    seg_metrics,
)


class TestConfusion:
    def test_fixture(self):
        pred = np.array([[1, 1], [0, 0]], dtype=np.uint8)
        true = np.array([[1, 0], [1, 0]], dtype=np.uint8)
        c = confusion(pred, true)
        assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 1, 1)
        assert c.total == 4

    def test_matches_pixel_loop(self):
        rng = np.random.default_rng(0)
        pred = rng.integers(0, 2, size=(13, 9)).astype(np.uint8)
        true = rng.integers(0, 2, size=(13, 9)).astype(np.uint8)
        c = confusion(pred, true)
        counts = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
        for p, t in zip(pred.ravel(), true.ravel()):
            if p and t:
                counts["tp"] += 1
            elif p and not t:
                counts["fp"] += 1
            elif not p and t:
                counts["fn"] += 1
            else:
                counts["tn"] += 1
        assert (c.tp, c.fp, c.tn, c.fn) == tuple(counts[k] for k in ("tp", "fp", "tn", "fn"))

    def test_additivity(self):
        a = ConfusionCounts(1, 2, 3, 4)
        b = ConfusionCounts(5, 6, 7, 8)
        s = a + b
        assert (s.tp, s.fp, s.tn, s.fn) == (6, 8, 10, 12)

    def test_rejects_non_binary(self):
        with pytest.raises(DataError):
            confusion(np.array([[2]]), np.array([[1]]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DataError):
            confusion(np.zeros((2, 2), dtype=np.uint8), np.zeros((3, 3), dtype=np.uint8))


class TestSegMetrics:
    def test_known_counts(self):
        m = seg_metrics(ConfusionCounts(tp=6, fp=2, tn=10, fn=2))
        assert m.iou == pytest.approx(0.6)
        assert m.f1 == pytest.approx(0.75)
        assert m.accuracy == pytest.approx(16 / 20)
        assert m.precision == pytest.approx(0.75)
        assert m.recall == pytest.approx(0.75)
        assert m.undefined == ()

    def test_f1_iou_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            tp, fp, fn = rng.integers(0, 20, size=3)
            m = seg_metrics(ConfusionCounts(int(tp), int(fp), 5, int(fn)))
            if m.iou is None:
                assert m.f1 is None
                continue
            assert m.f1 == pytest.approx(2 * m.iou / (1 + m.iou), abs=1e-12)

    def test_undefined_on_zero_denominators(self):
        m = seg_metrics(ConfusionCounts(tp=0, fp=0, tn=5, fn=0))
        assert m.iou is None and m.f1 is None
        assert m.precision is None and m.recall is None
        assert m.accuracy == 1.0
        assert set(m.undefined) == {"iou", "f1", "precision", "recall"}

    def test_empty_confusion_all_undefined(self):
        m = seg_metrics(ConfusionCounts(0, 0, 0, 0))
        assert set(m.undefined) == {"iou", "f1", "accuracy", "precision", "recall"}


class TestCalibrationECE:
    def test_two_bin_worked_example(self):
        # bin [0, .5): probs (.2, .4) conf .3, acc .5 -> |diff| .2 weight .5
        # bin [.5, 1]: probs (.6, .8) conf .7, acc 1  -> |diff| .3 weight .5
        res = calibration([0.2, 0.4, 0.6, 0.8], [0, 1, 1, 1], "ECE", m_bins=2)
        assert res.error == pytest.approx(0.25, abs=1e-12)
        assert [b.count for b in res.bins] == [2, 2]

    def test_prob_one_goes_to_last_bin(self):
        res = calibration([1.0] * 10, [1] * 10, "ECE", m_bins=5)
        assert res.bins[-1].count == 10
        assert res.error == pytest.approx(0.0, abs=1e-12)

    def test_all_wrong_certainty_is_error_one(self):
        res = calibration([1.0] * 20, [0] * 20, "ECE", m_bins=4)
        assert res.error == 1.0

    def test_empty_bins_contribute_zero(self):
        res = calibration([0.05] * 8, [0] * 8, "ECE", m_bins=8)
        assert res.bins[0].count == 8
        assert all(b.count == 0 for b in res.bins[1:])
        assert all(b.conf is None and b.acc is None for b in res.bins[1:])
        assert res.error == pytest.approx(0.05, abs=1e-12)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        p = rng.uniform(size=200)
        y = (rng.uniform(size=200) < p).astype(int)
        m = 10
        res = calibration(p, y, "ECE", m_bins=m)
        want = 0.0
        for b in range(m):
            members = [i for i in range(200) if min(int(p[i] * m), m - 1) == b]
            if not members:
                continue
            conf = sum(p[i] for i in members) / len(members)
            acc = sum(y[i] for i in members) / len(members)
            want += len(members) / 200 * abs(acc - conf)
        assert res.error == pytest.approx(want, abs=1e-12)

    def test_validation(self):
        with pytest.raises(DataError):
            calibration([0.5], [2], "ECE")
        with pytest.raises(DataError):
            calibration([1.5], [1], "ECE", m_bins=1)
        with pytest.raises(DataError):
            calibration([0.5, 0.5], [1, 0], "BRIER")
        with pytest.raises(DataError):
            calibration([0.5], [1], "ECE", m_bins=3)  # n < M


class TestCalibrationACE:
    def test_seven_sample_fixture_is_exactly_one_seventh(self):
        probs = [0.1, 0.2, 0.3, 0.6, 0.7, 0.8, 0.9]
        labels = [0, 0, 1, 0, 1, 1, 1]
        res = calibration(probs, labels, "ACE", m_bins=3)
        assert [b.count for b in res.bins] == [3, 2, 2]  # larger groups first
        assert res.error == pytest.approx(1.0 / 7.0, abs=1e-15)

    def test_equal_mass_sizes_differ_by_at_most_one(self):
        rng = np.random.default_rng(3)
        for n, m in ((10, 3), (100, 15), (17, 17), (23, 4)):
            p = rng.uniform(size=n)
            y = rng.integers(0, 2, size=n)
            res = calibration(p, y, "ACE", m_bins=m)
            sizes = [b.count for b in res.bins]
            assert sum(sizes) == n
            assert max(sizes) - min(sizes) <= 1
            # larger groups first
            assert sizes == sorted(sizes, reverse=True)

    def test_stable_sort_keeps_input_order_on_ties(self):
        # four equal probs with distinct labels: groups must preserve
        # input order, making the result deterministic
        res = calibration([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1], "ACE", m_bins=2)
        assert [b.count for b in res.bins] == [2, 2]
        assert res.bins[0].acc == pytest.approx(0.5)
        assert res.bins[1].acc == pytest.approx(0.5)

    def test_permutation_of_distinct_probs_is_invariant(self):
        rng = np.random.default_rng(4)
        p = rng.permutation(np.linspace(0.01, 0.99, 30))
        y = (p > 0.5).astype(int)
        base = calibration(p, y, "ACE", m_bins=4)
        perm = rng.permutation(30)
        other = calibration(p[perm], y[perm], "ACE", m_bins=4)
        assert base.error == pytest.approx(other.error, abs=1e-12)

    def test_all_wrong_certainty_is_error_one(self):
        res = calibration([1.0] * 9, [0] * 9, "ACE", m_bins=3)
        assert res.error == 1.0


# frozen oracle values for the four-scene fixture, re-derived by the
# brute-force loop in test_fixture_matches_brute_force below
FIXTURE_F1 = [0.1, 0.4, 0.7, 1.0]
FIXTURE_RISKS = (0.45, 0.3, 0.15, 0.0)
FIXTURE_AURC = 0.225
FIXTURE_RISK_AT_HALF = 0.15
FIXTURE_NRF1_AT_HALF = 0.85


def brute_force_curve(scores, f1s):
    """Sort scores descending, drop one at a time, average 1 - f1."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    points = []
    n = len(scores)
    for n_discard in range(n - 1, -1, -1):
        retained = order[n_discard:]
        risk = sum(1.0 - f1s[i] for i in retained) / len(retained)
        points.append((len(retained) / n, risk))
    xs = [c for c, _ in points]
    ys = [r for _, r in points]
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    aurc = area / (xs[-1] - xs[0]) if n > 1 else ys[0]
    return points, aurc


class TestDiscardCurve:
    def fixture_curve(self):
        scores = [1.0 - f for f in FIXTURE_F1]  # oracle: risk itself
        return discard_curve(
            ["s1", "s2", "s3", "s4"], scores, FIXTURE_F1, score_name="oracle"
        )

    def test_fixture_frozen_values(self):
        curve = self.fixture_curve()
        assert [pt.coverage for pt in curve.points] == [0.25, 0.5, 0.75, 1.0]
        got = tuple(pt.risk for pt in curve.points)
        want = tuple(reversed(FIXTURE_RISKS))
        for g, w in zip(got, want):
            assert g == pytest.approx(w, abs=1e-12)
        assert curve.aurc == pytest.approx(FIXTURE_AURC, abs=1e-4)
        assert curve.risk_at_half == pytest.approx(FIXTURE_RISK_AT_HALF, abs=1e-12)
        assert curve.nrf1_at_half == pytest.approx(FIXTURE_NRF1_AT_HALF, abs=1e-12)

    def test_fixture_matches_brute_force(self):
        curve = self.fixture_curve()
        scores = [1.0 - f for f in FIXTURE_F1]
        points, aurc = brute_force_curve(scores, FIXTURE_F1)
        assert curve.aurc == pytest.approx(aurc, abs=1e-12)
        for pt, (cov, risk) in zip(curve.points, points):
            assert pt.coverage == pytest.approx(cov, abs=1e-12)
            assert pt.risk == pytest.approx(risk, abs=1e-12)

    def test_risk_plus_nrf1_is_one(self):
        curve = self.fixture_curve()
        for pt in curve.points:
            assert pt.risk + pt.nonrejected_f1 == pytest.approx(1.0, abs=1e-12)
        assert curve.aurc + curve.auc_nrf1 == pytest.approx(1.0, abs=1e-12)

    def test_oracle_ordering_attains_exhaustive_minimum(self):
        # over every permutation (as induced by distinct score vectors),
        # discarding worst-first minimizes AURC; N <= 6 exhaustive
        rng = np.random.default_rng(5)
        for n in range(2, 7):
            f1s = sorted(float(x) for x in rng.uniform(size=n))
            ids = [f"s{i}" for i in range(n)]
            best = math.inf
            for perm in itertools.permutations(range(n)):
                # score rank encodes the discard order: position 0 first
                scores = [0.0] * n
                for rank, i in enumerate(perm):
                    scores[i] = float(n - rank)
                curve = discard_curve(ids, scores, f1s)
                best = min(best, curve.aurc)
            oracle = discard_curve(ids, [1.0 - f for f in f1s], f1s)
            assert oracle.aurc == pytest.approx(best, abs=1e-10)

    def test_constant_scores_fall_back_to_scene_id_order(self):
        curve = discard_curve(
            ["b", "a", "c"], [0.5, 0.5, 0.5], [0.2, 0.4, 0.6]
        )
        # discard order a, b, c -> retained-1 point keeps "c"
        assert curve.points[0].nonrejected_f1 == pytest.approx(0.6)

    def test_absent_scores_discard_first(self):
        curve = discard_curve(
            ["s1", "s2", "s3"], [None, 0.9, 0.1], [0.0, 0.5, 1.0]
        )
        # s1 (absent) leaves first, then s2 (0.9), leaving s3
        assert curve.points[0].nonrejected_f1 == pytest.approx(1.0)
        assert curve.points[1].nonrejected_f1 == pytest.approx(0.75)

    def test_undefined_f1_contributes_zero_risk_and_is_flagged(self):
        curve = discard_curve(["s1", "s2"], [1.0, 0.0], [None, 0.5])
        assert curve.undefined_f1_scenes == ("s1",)
        # full coverage: (0 + 0.5) / 2
        assert curve.points[-1].risk == pytest.approx(0.25)

    def test_single_scene_curve(self):
        curve = discard_curve(["only"], [0.3], [0.8])
        assert len(curve.points) == 1
        assert curve.aurc == pytest.approx(0.2, abs=1e-12)
        assert curve.risk_at_half == pytest.approx(0.2, abs=1e-12)

    def test_micro_mode_pools_confusions(self):
        confs = [
            ConfusionCounts(5, 0, 5, 0),   # perfect
            ConfusionCounts(0, 5, 0, 5),   # hopeless
        ]
        f1s = [seg_metrics(c).f1 for c in confs]
        curve = discard_curve(
            ["good", "bad"], [0.0, 1.0], f1s, mode="micro", confusions=confs
        )
        # full coverage pooled: tp=5 fp=5 fn=5 -> f1 = 10/20
        assert curve.points[-1].nonrejected_f1 == pytest.approx(0.5)
        # half coverage keeps "good"
        assert curve.points[0].nonrejected_f1 == pytest.approx(1.0)

    def test_at_half_is_smallest_coverage_geq_half(self):
        f1s = [0.0, 0.2, 0.4, 0.6, 0.8]
        scores = [1.0 - f for f in f1s]
        curve = discard_curve([f"s{i}" for i in range(5)], scores, f1s)
        # coverages .2 .4 .6 .8 1.0 -> at-half index is coverage 0.6
        assert curve.nrf1_at_half == pytest.approx((0.4 + 0.6 + 0.8) / 3)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0, 1), st.floats(0, 1)),
            min_size=1,
            max_size=12,
        )
    )
    def test_curve_is_well_formed(self, pairs):
        ids = [f"s{i:02d}" for i in range(len(pairs))]
        scores = [s for s, _ in pairs]
        f1s = [f for _, f in pairs]
        curve = discard_curve(ids, scores, f1s)
        assert len(curve.points) == len(pairs)
        assert curve.points[-1].coverage == pytest.approx(1.0)
        for pt in curve.points:
            assert 0.0 - 1e-12 <= pt.risk <= 1.0 + 1e-12
        assert 0.0 - 1e-12 <= curve.aurc <= 1.0 + 1e-12

    def test_validation(self):
        with pytest.raises(DataError):
            discard_curve([], [], [])
        with pytest.raises(DataError):
            discard_curve(["a"], [0.1, 0.2], [0.5])
        with pytest.raises(DataError):
            discard_curve(["a"], [math.nan], [0.5])
        with pytest.raises(DataError):
            discard_curve(["a"], [0.1], [0.5], mode="micro")


class TestFlagAtThreshold:
    def test_strict_inequality(self):
        flags = flag_at_threshold([0.4, 0.5, 0.6], 0.5)
        assert flags.tolist() == [False, False, True]

    def test_none_is_discarded(self):
        flags = flag_at_threshold([None, 0.0], 0.5)
        assert flags.tolist() == [True, False]

    def test_infinite_thresholds(self):
        assert flag_at_threshold([1e9], math.inf).tolist() == [False]
        assert flag_at_threshold([-1e9], -math.inf).tolist() == [True]

    def test_nan_threshold_rejected(self):
        with pytest.raises(DataError):
            flag_at_threshold([0.5], math.nan)

    def test_partition_matches_curve_point(self):
        # flagging at the retained/discarded boundary score reproduces the
        # corresponding curve coverage
        f1s = [0.1, 0.4, 0.7, 1.0]
        scores = [1.0 - f for f in f1s]
        flags = flag_at_threshold(scores, 0.45)
        assert int((~flags).sum()) == 2  # keeps the two best scenes


class TestSummaries:
    def test_curve_summary_keys(self):
        curve = discard_curve(["a", "b"], [1.0, 0.0], [0.0, 1.0])
        row = curve_summary(curve)
        assert set(row) == {
            "score_name",
            "auc_risk_coverage",
            "risk_coverage_at_half",
            "auc_nonrejected_f1",
            "nonrejected_f1_at_half",
        }
        assert row["score_name"] == "score"

    def test_curve_to_rows_round_trip(self):
        curve = discard_curve(["a", "b", "c"], [3.0, 2.0, 1.0], [0.1, 0.5, 0.9])
        rows = curve_to_rows(curve)
        assert [r["coverage"] for r in rows] == [pt.coverage for pt in curve.points]
        assert [r["risk"] for r in rows] == [pt.risk for pt in curve.points]


def test_curve_points_must_increase():
    from segrel.evaluation import CurvePoint

    with pytest.raises(DataError):
        RiskCoverageCurve(
            score_name="x",
            points=(
                CurvePoint(0.5, 0.1, 0.9),
                CurvePoint(0.5, 0.2, 0.8),
            ),
            aurc=0.1,
            risk_at_half=0.1,
            auc_nrf1=0.9,
            nrf1_at_half=0.9,
        )
