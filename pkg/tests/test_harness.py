import json
import math

import numpy as np
import pytest

from deskpick import footprints
from deskpick.harness import (
    EmptyReportError,
    TrialRecord,
    judge_place,
    records_from_json,
    records_to_json,
    report,
    run_trial,
    run_trials,
)
from deskpick.perception import NoiseConfig
from deskpick.scene import OBJECT_CLASSES, make_object


class TestJudgePlace:
    SQUARE = footprints.oriented_rect(0, 0, 0.04, 0.04, 0.0)

    def test_exact_hit(self):
        assert judge_place(np.array([0.1, 0.2]), np.array([0.1, 0.2]),
                           self.SQUARE)

    def test_point_target_convention_09cm(self):
        # Degenerate footprint: a point target. 0.9 cm offset sits inside
        # the 1 cm expansion.
        point = np.array([[0.0, 0.0], [1e-9, 0.0], [0.0, 1e-9]])
        assert judge_place(np.array([0.009, 0.0]), np.zeros(2), point)

    def test_15mm_beyond_boundary_fails(self):
        point = np.array([[0.0, 0.0], [1e-9, 0.0], [0.0, 1e-9]])
        # Footprint half-width ~0, expansion 1 cm: 1.5 cm offset + 1 cm
        # boundary = fail at 2.5 cm... use the square: half-width 2 cm,
        # expanded boundary at 3 cm; 1.5 cm beyond it fails.
        assert not judge_place(np.array([0.045, 0.0]), np.zeros(2), self.SQUARE)
        assert not judge_place(np.array([0.025, 0.0]), np.zeros(2), point)

    def test_boundary_is_inclusive(self):
        # Square half-width 0.02 + 1 cm expansion: flip exactly past 0.03.
        assert judge_place(np.array([0.03, 0.0]), np.zeros(2), self.SQUARE)
        assert not judge_place(np.array([0.0301, 0.0]), np.zeros(2), self.SQUARE)

    def test_translation_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            offset = rng.uniform(-0.05, 0.05, size=2)
            shift = rng.uniform(-1, 1, size=2)
            base = judge_place(offset, np.zeros(2), self.SQUARE)
            moved = judge_place(offset + shift, shift, self.SQUARE)
            assert base == moved

    def test_verdict_flips_once_along_ray(self):
        # Walking outward must cross from success to failure exactly once.
        verdicts = [judge_place(np.array([d, 0.0]), np.zeros(2), self.SQUARE)
                    for d in np.arange(0, 0.06, 0.001)]
        flips = sum(a != b for a, b in zip(verdicts, verdicts[1:]))
        assert flips == 1
        assert verdicts[0] is True and verdicts[-1] is False


class TestTrialRecord:
    def test_placed_implies_picked(self):
        with pytest.raises(ValueError):
            TrialRecord("ball", "semiauto", False, 1.0, True, 1.0, 2, 0,
                        (0, 0), (0.3, 0), (0.3, 0))

    def test_json_round_trip(self):
        rec = TrialRecord("ball", "semiauto", True, 1.5, True, 2.5, 2, 42,
                          (0.1, 0.2), (0.3, 0.4), (0.31, 0.41))
        back = records_from_json(records_to_json([rec]))
        assert back == [rec]


class TestRunTrials:
    def test_record_count_and_shape(self):
        records = run_trials(["ball", "tape"], 2, "semiauto", seed=7)
        assert len(records) == 4
        assert [r.object_class for r in records] == ["ball", "ball",
                                                     "tape", "tape"]

    def test_deterministic(self):
        a = run_trials(["ball"], 2, "semiauto", seed=11)
        b = run_trials(["ball"], 2, "semiauto", seed=11)
        assert a == b

    def test_target_distance_30cm(self):
        records = run_trials(["stapler", "bowl"], 2, "semiauto", seed=3)
        for r in records:
            d = math.dist(r.pickup_xy, r.target_xy)
            assert abs(d - 0.30) < 1e-9

    def test_zero_noise_two_commands_and_success(self):
        records = run_trials(["banana", "scissor"], 2, "semiauto", seed=5)
        for r in records:
            assert r.picked and r.placed
            assert r.n_commands == 2

    def test_cartesian_more_commands(self):
        semi = run_trials(["ball"], 1, "semiauto", seed=9)
        cart = run_trials(["ball"], 1, "cartesian", seed=9)
        assert cart[0].picked and cart[0].placed
        assert cart[0].n_commands >= 6
        assert semi[0].n_commands < cart[0].n_commands

    def test_full_miss_noise_fails_gracefully(self):
        noise = NoiseConfig(miss_rate=1.0)
        records = run_trials(["ball"], 1, "semiauto", noise=noise, seed=1)
        assert len(records) == 1
        assert not records[0].picked and not records[0].placed
        assert records[0].n_commands == 0

    def test_unknown_class_rejected(self):
        with pytest.raises(ValueError):
            run_trials(["unicorn"], 1, "semiauto")


class TestReport:
    def make_records(self):
        recs = []
        for i, (cls, picked, placed, t1, t2, n) in enumerate([
                ("ball", True, True, 10.0, 8.0, 2),
                ("ball", True, False, 12.0, 9.0, 2),
                ("tape", True, True, 20.0, 6.0, 2),
                ("tape", False, False, 5.0, 0.0, 2)]):
            recs.append(TrialRecord(cls, "semiauto", picked, t1, placed, t2,
                                    n, i, (0, 0), (0.3, 0), None))
        return recs

    def test_rows_and_average(self):
        rep = report(self.make_records())
        assert [r.object_class for r in rep.rows] == ["ball", "tape"]
        ball = rep.rows[0]
        assert ball.picked == 2 and ball.placed == 1
        assert abs(ball.pickup_mean - 11.0) < 1e-12
        assert abs(rep.average.pickup_mean - (11.0 + 12.5) / 2) < 1e-12

    def test_recomputation_oracle(self):
        # Means/stddevs must match a plain second pass over the records.
        records = self.make_records()
        rep = report(records)
        for row in rep.rows:
            rs = [r for r in records if r.object_class == row.object_class]
            times = [r.pickup_time for r in rs]
            mean = sum(times) / len(times)
            var = sum((t - mean) ** 2 for t in times) / (len(times) - 1)
            assert abs(row.pickup_mean - mean) < 1e-12
            assert abs(row.pickup_std - math.sqrt(var)) < 1e-12
        assert abs(rep.average.commands_mean
                   - sum(r.commands_mean for r in rep.rows) / len(rep.rows)) < 1e-12

    def test_single_record_zero_std(self):
        rec = TrialRecord("ball", "semiauto", True, 3.0, True, 2.0, 2, 0,
                          (0, 0), (0.3, 0), (0.3, 0))
        rep = report([rec])
        assert rep.rows[0].pickup_std == 0.0

    def test_empty_raises(self):
        with pytest.raises(EmptyReportError):
            report([])

    def test_text_table_mirrors_column_order(self):
        text = report(self.make_records()).to_text()
        header = text.splitlines()[1]
        cols = [c.strip() for c in header.split("|")]
        assert cols == ["object", "picked up", "pickup time (s)", "place",
                        "place time (s)", "# commands"]
        assert "average" in text.splitlines()[-1]
