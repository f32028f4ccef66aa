"""Per-step curves, trajectory heatmaps, and step-wise correlation."""

import numpy as np
import pytest

from kdiag.evaluation import (
    CURVES_HEADER,
    collect_records,
    curve_summary,
    per_step_curves,
    step_metrics,
    stepwise_correlation,
    trajectory_heatmap,
)
from kdiag.policy import PolicyBundle, uniform_policy


@pytest.fixture(scope="module")
def bundle(small_classifiers):
    f_d, f_s = small_classifiers
    return PolicyBundle(uniform_policy(64, 8, 32), f_d, f_s, initial_lines=3, budget=7)


class TestRecords:
    def test_snapshot_count_is_steps_plus_one(self, bundle, small_dataset):
        _, _, test = small_dataset
        records = collect_records(bundle, test, seed=1)
        for r in records:
            assert r.n_snapshots == bundle.budget + 1
            assert r.line_counts[0] == 3
            assert r.line_counts[-1] == 10

    def test_records_reproducible(self, bundle, small_dataset):
        _, _, test = small_dataset
        a = collect_records(bundle, test, seed=2)
        b = collect_records(bundle, test, seed=2)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.probs_d[-1], rb.probs_d[-1])


class TestCurves:
    def test_row_count_and_header(self, bundle, small_dataset):
        _, _, test = small_dataset
        rows = per_step_curves(bundle, test, budget=7, seeds=[1, 2])
        assert len(rows) == 2 * 8
        assert set(rows[0]) == set(CURVES_HEADER)

    def test_budget_zero_single_row(self, bundle, small_dataset):
        _, _, test = small_dataset
        rows = per_step_curves(bundle, test, budget=0, seeds=[1])
        assert len(rows) == 1
        assert rows[0]["step"] == 0
        assert rows[0]["lines_acquired"] == 3

    def test_final_step_matches_standalone_evaluation(self, bundle, small_dataset):
        _, _, test = small_dataset
        rows = per_step_curves(bundle, test, budget=7, seeds=[5])
        final = [r for r in rows if r["step"] == 7][0]
        records = collect_records(bundle, test, seed=5)
        standalone = step_metrics(records, -1)
        for key, value in standalone.items():
            assert abs(final[key] - value) < 1e-12

    def test_summary_aggregates_final_rows(self, bundle, small_dataset):
        _, _, test = small_dataset
        rows = per_step_curves(bundle, test, budget=3, seeds=[1, 2, 3])
        summary = curve_summary(rows)
        finals = [r["sequential_bacc"] for r in rows if r["step"] == 3]
        assert summary["sequential_bacc_mean"] == pytest.approx(np.mean(finals), abs=1e-15)
        assert summary["sequential_bacc_std"] == pytest.approx(np.std(finals), abs=1e-15)

    def test_single_seed_gives_zero_std(self, bundle, small_dataset):
        _, _, test = small_dataset
        rows = per_step_curves(bundle, test, budget=2, seeds=[1])
        summary = curve_summary(rows)
        for key in ("disease_bacc", "severity_bacc", "sequential_bacc"):
            assert summary[f"{key}_std"] == 0.0


class TestHeatmap:
    def test_rows_sum_to_one(self, bundle, small_dataset):
        _, _, test = small_dataset
        hm = trajectory_heatmap(bundle, test, budget=7, seed=1)
        assert hm.shape == (7, 32)
        assert np.abs(hm.sum(axis=1) - 1.0).max() < 1e-9

    def test_uniform_policy_rows_near_uniform(self, bundle, small_dataset):
        train, val, test = small_dataset
        subjects = (train + val + test)[:90]
        hm = trajectory_heatmap(bundle, subjects, budget=7, seed=1)
        assert np.abs(hm - 1.0 / 32).max() <= 0.02

    def test_single_subject_rows_equal_snapshots(self, bundle, small_dataset):
        _, _, test = small_dataset
        from kdiag.policy import episode_rng, run_inference_episode

        hm = trajectory_heatmap(bundle, test[:1], budget=7, seed=4)
        trace = run_inference_episode(
            test[0], bundle, mode="sample", rng=episode_rng(4, 0), subject_index=0
        )
        for t, step in enumerate(trace.steps):
            assert np.array_equal(hm[t], step.probs)


class TestCorrelation:
    def test_self_correlation_exactly_one(self, bundle, small_dataset):
        _, _, test = small_dataset
        hm = trajectory_heatmap(bundle, test, budget=5, seed=2)
        assert all(r == 1.0 for _, r in stepwise_correlation(hm, hm))

    def test_row_count_is_min_steps(self, rng):
        a = rng.random((7, 32))
        b = rng.random((4, 32))
        assert len(stepwise_correlation(a, b)) == 4

    def test_column_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            stepwise_correlation(rng.random((3, 32)), rng.random((3, 31)))
