"""Nearest-neighbor search, recall, localization and whitening tests."""

import math

import numpy as np
import pytest

from gvpr.fov2d import CameraPose2D
from gvpr.retrieval import (
    DEFAULT_LOC_THRESHOLDS,
    DescriptorSet,
    Ranking,
    apply_whitening,
    fit_pca_whitening,
    localization_accuracy,
    nn_search,
    read_descriptors,
    recall_at_k,
    write_descriptors,
)


def dset(ids, rows, **kw):
    return DescriptorSet(ids=tuple(ids), matrix=np.asarray(rows, dtype=float), **kw)


class TestContainers:
    def test_descriptor_set_validation(self):
        with pytest.raises(ValueError, match="unique"):
            dset(["a", "a"], [[1.0], [2.0]])
        with pytest.raises(ValueError):
            dset(["a"], [[1.0], [2.0]])
        with pytest.raises(ValueError, match="finite"):
            dset(["a"], [[np.inf]])
        with pytest.raises(ValueError, match="unit-norm"):
            dset(["a"], [[2.0, 0.0]], normalized=True)
        ok = dset(["a", "b"], [[1.0, 0.0], [0.0, 1.0]], normalized=True)
        assert len(ok) == 2 and ok.dim == 2

    def test_ranking_validation(self):
        with pytest.raises(ValueError):
            Ranking("q", ())
        with pytest.raises(ValueError, match="non-decreasing"):
            Ranking("q", (("a", 2.0), ("b", 1.0)))
        r = Ranking("q", (("a", 1.0), ("b", 2.0), ("c", 2.0)))
        assert r.top(2) == (("a", 1.0), ("b", 2.0))


class TestNnSearch:
    def test_hand_ordering(self):
        queries = dset(["q"], [[0.0, 0.0]])
        refs = dset(["b", "a", "c"], [[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
        (r,) = nn_search(queries, refs, k=3)
        assert [mid for mid, _ in r.hits] == ["b", "a", "c"]
        assert [d for _, d in r.hits] == pytest.approx([1.0, 2.0, 3.0])

    def test_exact_tie_broken_by_id(self):
        queries = dset(["q"], [[0.0, 0.0]])
        refs = dset(["z", "a"], [[1.0, 0.0], [-1.0, 0.0]])
        (r,) = nn_search(queries, refs, k=2)
        assert [mid for mid, _ in r.hits] == ["a", "z"]

    def test_invariant_under_map_row_permutation(self):
        rng = np.random.default_rng(0)
        queries = dset([f"q{i}" for i in range(5)], rng.normal(size=(5, 4)))
        ids = [f"m{i:02d}" for i in range(12)]
        rows = rng.normal(size=(12, 4))
        perm = rng.permutation(12)
        fwd = nn_search(queries, dset(ids, rows), k=12)
        shuf = nn_search(queries, dset([ids[i] for i in perm], rows[perm]), k=12)
        assert fwd == shuf

    def test_against_naive_oracle(self):
        rng = np.random.default_rng(1)
        q_rows = rng.normal(size=(20, 8))
        m_rows = rng.normal(size=(30, 8))
        m_ids = [f"m{i:02d}" for i in range(30)]
        queries = dset([f"q{i:02d}" for i in range(20)], q_rows)
        refs = dset(m_ids, m_rows)
        for qi, r in enumerate(nn_search(queries, refs, k=30)):
            naive = sorted(
                (float(np.linalg.norm(q_rows[qi] - m_rows[mi])), m_ids[mi])
                for mi in range(30)
            )
            assert [mid for mid, _ in r.hits] == [mid for _, mid in naive]
            assert [d for _, d in r.hits] == pytest.approx([d for d, _ in naive], abs=1e-9)

    def test_k_validation(self):
        queries = dset(["q"], [[0.0]])
        refs = dset(["a"], [[1.0]])
        for bad in (0, 2):
            with pytest.raises(ValueError):
                nn_search(queries, refs, k=bad)
        with pytest.raises(ValueError, match="dimension"):
            nn_search(queries, dset(["a"], [[1.0, 0.0]]), k=1)


class TestRecall:
    def rankings(self):
        return [
            Ranking("q1", (("a", 0.1), ("b", 0.2), ("c", 0.3))),
            Ranking("q2", (("a", 0.1), ("b", 0.2), ("c", 0.3))),
        ]

    def test_hand_percentages(self):
        positives = {"q1": {"a"}, "q2": {"c"}}
        res = recall_at_k(self.rankings(), positives, ks=[1, 2, 3])
        assert res[1] == 50.0
        assert res[2] == 50.0
        assert res[3] == 100.0
        assert res.evaluated == 2 and res.excluded == 0

    def test_empty_positive_sets_are_excluded(self):
        positives = {"q1": {"a"}, "q2": set()}
        res = recall_at_k(self.rankings(), positives, ks=[1])
        assert res[1] == 100.0
        assert res.evaluated == 1 and res.excluded == 1

    def test_missing_entry_is_key_error(self):
        with pytest.raises(KeyError, match="q2"):
            recall_at_k(self.rankings(), {"q1": {"a"}}, ks=[1])

    def test_all_excluded_is_error(self):
        with pytest.raises(ValueError):
            recall_at_k(self.rankings(), {"q1": set(), "q2": set()}, ks=[1])

    def test_monotone_in_k(self):
        rng = np.random.default_rng(2)
        queries = dset([f"q{i}" for i in range(15)], rng.normal(size=(15, 4)))
        refs = dset([f"m{i}" for i in range(25)], rng.normal(size=(25, 4)))
        rankings = nn_search(queries, refs, k=25)
        positives = {
            f"q{i}": set(rng.choice([f"m{j}" for j in range(25)], size=3, replace=False))
            for i in range(15)
        }
        res = recall_at_k(rankings, positives, ks=[1, 5, 10, 25])
        assert res[1] <= res[5] <= res[10] <= res[25]
        assert res[25] == 100.0

    def test_ks_validated(self):
        with pytest.raises(ValueError):
            recall_at_k(self.rankings(), {"q1": {"a"}, "q2": {"a"}}, ks=[])
        with pytest.raises(ValueError):
            recall_at_k(self.rankings(), {"q1": {"a"}, "q2": {"a"}}, ks=[0])


class TestLocalization:
    def test_threshold_tiers(self):
        rankings = [
            Ranking("near", (("m1", 0.1),)),
            Ranking("far", (("m2", 0.1),)),
        ]
        query_poses = {
            "near": CameraPose2D(0.0, 0.0, 0.0),
            "far": CameraPose2D(0.0, 0.0, 0.0),
        }
        map_poses = {
            "m1": CameraPose2D(0.1, 0.0, math.radians(1.0)),
            "m2": CameraPose2D(1.0, 0.0, math.radians(3.0)),
        }
        acc = localization_accuracy(rankings, query_poses, map_poses)
        assert acc[DEFAULT_LOC_THRESHOLDS[0]] == 50.0
        assert acc[DEFAULT_LOC_THRESHOLDS[1]] == 50.0
        assert acc[DEFAULT_LOC_THRESHOLDS[2]] == 100.0

    def test_heading_error_wraps(self):
        rankings = [Ranking("q", (("m", 0.0),))]
        qp = {"q": CameraPose2D(0.0, 0.0, math.radians(1.0))}
        mp = {"m": CameraPose2D(0.0, 0.0, math.radians(359.0))}
        acc = localization_accuracy(rankings, qp, mp)
        assert acc[DEFAULT_LOC_THRESHOLDS[0]] == 100.0

    def test_missing_poses_are_key_errors(self):
        rankings = [Ranking("q", (("m", 0.0),))]
        pose = CameraPose2D(0.0, 0.0, 0.0)
        with pytest.raises(KeyError, match="q"):
            localization_accuracy(rankings, {}, {"m": pose})
        with pytest.raises(KeyError, match="m"):
            localization_accuracy(rankings, {"q": pose}, {})

    def test_custom_thresholds(self):
        rankings = [Ranking("q", (("m", 0.0),))]
        qp = {"q": CameraPose2D(0.0, 0.0, 0.0)}
        mp = {"m": CameraPose2D(3.0, 0.0, 0.0)}
        acc = localization_accuracy(rankings, qp, mp, thresholds=[(10.0, 1.0)])
        assert acc[(10.0, 1.0)] == 100.0


def correlated_training_set(n=200, d=8, seed=3):
    rng = np.random.default_rng(seed)
    mixing = rng.normal(size=(d, d)) + np.diag(np.linspace(2.0, 0.5, d))
    rows = rng.normal(size=(n, d)) @ mixing.T + rng.normal(size=d)
    return dset([f"t{i:03d}" for i in range(n)], rows)


class TestWhitening:
    def test_whitened_training_set_has_identity_covariance(self):
        train = correlated_training_set()
        t = fit_pca_whitening(train, d_pca=8)
        out = apply_whitening(t, train, renormalize=False).matrix
        assert np.mean(out, axis=0) == pytest.approx(np.zeros(8), abs=1e-9)
        cov = out.T @ out / (len(train) - 1)
        assert np.max(np.abs(cov - np.eye(8))) <= 1e-6

    def test_reduced_dimension_keeps_unit_variance(self):
        train = correlated_training_set()
        t = fit_pca_whitening(train, d_pca=3)
        assert t.d_pca == 3
        out = apply_whitening(t, train, renormalize=False).matrix
        assert out.shape == (200, 3)
        var = np.var(out, axis=0, ddof=1)
        assert var == pytest.approx(np.ones(3), abs=1e-6)

    def test_sign_convention(self):
        t = fit_pca_whitening(correlated_training_set(), d_pca=5)
        for row in t.projection:
            nz = np.flatnonzero(np.abs(row) > 1e-12)
            assert row[nz[0]] > 0.0

    def test_renormalize_default_returns_unit_rows(self):
        train = correlated_training_set()
        t = fit_pca_whitening(train, d_pca=4)
        out = apply_whitening(t, train)
        assert out.normalized
        assert np.linalg.norm(out.matrix, axis=1) == pytest.approx(np.ones(len(train)))

    def test_apply_matches_affine_map(self):
        train = correlated_training_set()
        t = fit_pca_whitening(train, d_pca=6)
        other = correlated_training_set(n=10, seed=4)
        out = apply_whitening(t, other, renormalize=False).matrix
        manual = (other.matrix - t.mean) @ t.projection.T
        assert np.array_equal(out, manual)

    def test_fit_validation(self):
        train = correlated_training_set(n=8, d=8)
        with pytest.raises(ValueError, match="samples"):
            fit_pca_whitening(train, d_pca=8)
        with pytest.raises(ValueError):
            fit_pca_whitening(correlated_training_set(), d_pca=9)
        with pytest.raises(ValueError):
            fit_pca_whitening(correlated_training_set(), d_pca=0)

    def test_apply_dimension_mismatch(self):
        t = fit_pca_whitening(correlated_training_set(), d_pca=4)
        with pytest.raises(ValueError, match="mismatch"):
            apply_whitening(t, dset(["a"], [[1.0, 2.0]]))


class TestDescriptorIO:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        rows = rng.normal(size=(4, 6))
        rows /= np.linalg.norm(rows, axis=1)[:, None]
        original = dset([f"d{i}" for i in range(4)], rows, normalized=True)
        path = tmp_path / "descriptors.bin"
        write_descriptors(path, original)
        again = read_descriptors(path)
        assert again.ids == original.ids
        assert again.matrix == pytest.approx(original.matrix, abs=1e-7)
        assert not again.normalized

    def test_feature_file_with_many_locations_rejected(self, tmp_path):
        from gvpr.embed import FeatureMap, write_features

        path = tmp_path / "features.bin"
        write_features(path, [FeatureMap("a", np.ones((2, 3)))])
        with pytest.raises(ValueError, match="descriptor"):
            read_descriptors(path)
