import math

import numpy as np
import pytest

from emoloop.committee import (
    Committee,
    MAX_ENTROPY,
    committee_proba,
    consensus_entropy,
    entropy_batch,
    fold_assignment,
    load_committee,
    make_cv_splits,
    pretrain,
    save_committee,
)
from emoloop.core import ValidationError
from emoloop.gbt import BoostedEnsemble, TrainParams, predict_proba, train
from emoloop.synth import make_pretraining_records

FAST = TrainParams(rounds=4, learning_rate=0.3)


def dir_bytes(path):
    return {
        p.relative_to(path).as_posix(): p.read_bytes()
        for p in sorted(path.rglob("*"))
        if p.is_file()
    }


class TestCvSplits:
    def test_leave_one_out_degenerate(self):
        splits = make_cv_splits(list(range(15)), k=15, seed=0)
        assert len(splits) == 15
        for train_idx in splits:
            assert len(train_idx) == 14

    def test_deam_scale_fold_sizes(self):
        n, k = 1744, 15
        splits = make_cv_splits(list(range(n)), k=k, seed=1)
        fold_sizes = [n - len(s) for s in splits]
        assert set(fold_sizes) <= {116, 117}
        assert sum(fold_sizes) == n

    def test_partition_law(self):
        n, k = 103, 7
        splits = make_cv_splits(list(range(n)), k=k, seed=2)
        for train_idx in splits:
            held_out = set(range(n)) - set(train_idx.tolist())
            assert held_out | set(train_idx.tolist()) == set(range(n))
            assert held_out & set(train_idx.tolist()) == set()

    def test_disjoint_cover_across_seeds_and_k(self):
        for seed in range(5):
            for k in (2, 3, 15):
                n = 40
                assignment = fold_assignment(n, k, seed)
                assert assignment.shape == (n,)
                assert set(assignment.tolist()) == set(range(k))

    def test_too_small_dataset_rejected(self):
        with pytest.raises(ValidationError):
            make_cv_splits(list(range(10)), k=15, seed=0)

    def test_deterministic_given_seed(self):
        a = make_cv_splits(list(range(50)), k=5, seed=9)
        b = make_cv_splits(list(range(50)), k=5, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestPretrain:
    def test_members_beat_chance_on_held_out_fold(self):
        records = make_pretraining_records(n=300, seed=21)
        c = pretrain(records, params=FAST, k=15, seed=4)
        X, y = c.train_X, c.train_y
        for i, member in enumerate(c.members):
            held = np.flatnonzero(c.fold_assignment == i)
            acc = (predict_proba(member, X[held]).argmax(axis=1) == y[held]).mean()
            assert acc > 0.25, f"member {i} at chance: {acc}"

    def test_minimal_two_member_committee(self):
        records = make_pretraining_records(n=24, seed=22)
        c = pretrain(records, params=FAST, k=2, seed=5)
        assert c.n_members == 2
        p = committee_proba(c, c.train_X[0])
        assert abs(p.sum() - 1.0) < 1e-9

    def test_same_seed_identical_serialization(self, tmp_path):
        records = make_pretraining_records(n=40, seed=23)
        a = pretrain(records, params=FAST, k=3, seed=6)
        b = pretrain(records, params=FAST, k=3, seed=6)
        save_committee(a, tmp_path / "a")
        save_committee(b, tmp_path / "b")
        assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")

    def test_save_load_roundtrip(self, tmp_path):
        records = make_pretraining_records(n=40, seed=24)
        c = pretrain(records, params=FAST, k=3, seed=7, dataset_id="synth40")
        save_committee(c, tmp_path / "c")
        loaded = load_committee(tmp_path / "c")
        assert loaded.n_members == c.n_members
        assert loaded.provenance == c.provenance
        x = c.train_X[5]
        assert np.allclose(committee_proba(c, x), committee_proba(loaded, x), atol=0)
        save_committee(loaded, tmp_path / "c2")
        assert dir_bytes(tmp_path / "c") == dir_bytes(tmp_path / "c2")


def one_hot_member(cls_index, n_features=4):
    # a fake fully confident member: huge margin on one class
    base = np.full(4, -20.0)
    base[cls_index] = 20.0
    return BoostedEnsemble(
        n_classes=4,
        n_features=n_features,
        params=TrainParams(rounds=1),
        base_score=base,
        trees=[],
    )


class TestCommitteeProba:
    def test_full_disagreement_gives_uniform(self):
        from emoloop.features import Scaler

        members = [one_hot_member(i) for i in range(4)]
        c = Committee(
            members=members,
            scaler=Scaler(np.zeros(4), np.ones(4), fitted_on=2),
            train_X=np.zeros((2, 4)),
            train_y=np.zeros(2, dtype=int),
            fold_assignment=np.asarray([0, 1]),
        )
        p = committee_proba(c, np.zeros(4))
        assert np.allclose(p, [0.25, 0.25, 0.25, 0.25], atol=1e-9)
        assert abs(consensus_entropy(p) - 1.386) < 1e-3

    def test_identical_members_equal_single_member(self):
        records = make_pretraining_records(n=30, seed=25)
        c = pretrain(records, params=FAST, k=3, seed=8)
        single = c.members[0]
        from dataclasses import replace

        clones = replace(c, members=[single, single, single])
        x = c.train_X[3]
        assert np.allclose(committee_proba(clones, x), predict_proba(single, x), atol=1e-12)

    def test_matches_hand_averaging(self):
        records = make_pretraining_records(n=36, seed=26)
        c = pretrain(records, params=FAST, k=3, seed=9)
        rng = np.random.default_rng(10)
        x = rng.normal(size=c.feature_dim)
        by_hand = sum(predict_proba(m, x) for m in c.members) / len(c.members)
        assert np.allclose(committee_proba(c, x), by_hand, atol=1e-12)

    def test_convex_hull_soundness(self):
        records = make_pretraining_records(n=36, seed=27)
        c = pretrain(records, params=FAST, k=4, seed=11)
        rng = np.random.default_rng(12)
        for _ in range(20):
            x = rng.normal(size=c.feature_dim)
            member_ps = np.stack([predict_proba(m, x) for m in c.members])
            avg = committee_proba(c, x)
            assert np.all(avg >= member_ps.min(axis=0) - 1e-12)
            assert np.all(avg <= member_ps.max(axis=0) + 1e-12)


class TestConsensusEntropy:
    def test_uniform_is_ln4(self):
        h = consensus_entropy(np.asarray([0.25, 0.25, 0.25, 0.25]))
        assert abs(h - 1.386) < 1e-3
        assert abs(h - math.log(4)) < 1e-12

    def test_one_hot_is_zero(self):
        assert consensus_entropy(np.asarray([1.0, 0.0, 0.0, 0.0])) == 0.0

    def test_two_class_uniform_is_ln2(self):
        h = consensus_entropy(np.asarray([0.5, 0.5, 0.0, 0.0]))
        assert abs(h - math.log(2)) < 1e-12

    def test_bounds_and_unique_maximum(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            p = rng.dirichlet(np.ones(4))
            h = consensus_entropy(p)
            assert 0.0 <= h <= MAX_ENTROPY + 1e-12
            if not np.allclose(p, 0.25, atol=1e-3):
                assert h < MAX_ENTROPY

    def test_permutation_invariance(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            p = rng.dirichlet(np.ones(4))
            h = consensus_entropy(p)
            perm = rng.permutation(4)
            assert abs(consensus_entropy(p[perm]) - h) < 1e-12

    @pytest.mark.parametrize(
        "bad",
        [
            np.asarray([0.5, 0.5, 0.5, -0.5]),
            np.asarray([0.3, 0.3, 0.3, 0.3]),
            np.asarray([0.25, 0.25, 0.25]),
        ],
    )
    def test_invalid_simplex_rejected(self, bad):
        with pytest.raises(ValidationError):
            consensus_entropy(bad)

    def test_entropy_batch_matches_scalar(self):
        rng = np.random.default_rng(15)
        probs = rng.dirichlet(np.ones(4), size=20)
        batch = entropy_batch(probs)
        for row, h in zip(probs, batch):
            assert abs(consensus_entropy(row) - h) < 1e-12
