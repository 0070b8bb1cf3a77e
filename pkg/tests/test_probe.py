from __future__ import annotations

import numpy as np
import pytest

from gazecurate.errors import DataError, EmptySelection, NonFiniteFeature, SingleClass
from gazecurate.probe import (
    EvalDataset,
    ProbeConfig,
    _loss_and_grad,
    macro_f1,
    predict,
    run_cell,
    session_split,
    train,
)
from gazecurate.selection import SelectedFrame, SelectionManifest, StrategySpec


def blobs(rng, n_per_class=70, dim=10, n_classes=3, spread=6.0):
    X, y = [], []
    centers = rng.normal(0, spread, (n_classes, dim))
    for c in range(n_classes):
        X.append(centers[c] + rng.normal(0, 1.0, (n_per_class, dim)))
        y.extend([c] * n_per_class)
    return np.vstack(X), np.asarray(y)


# ---------------------------------------------------------------------------
# session_split


def tallies(mapping):
    return {sid: {c: 1 for c in classes} for sid, classes in mapping.items()}


def test_split_sizes():
    plan = session_split(tallies({f"s{i}": [0, 1] for i in range(10)}), 0.30, seed=0)
    assert len(plan.test_sessions) == 3
    assert len(plan.train_sessions) == 7
    assert not set(plan.train_sessions) & set(plan.test_sessions)


def test_split_warns_on_single_session_class():
    mapping = {f"s{i}": [0] for i in range(9)}
    mapping["s9"] = [0, 1]  # class 1 lives in one session only
    plan = session_split(tallies(mapping), 0.30, seed=1)
    assert any("class_absent" in w and w.endswith(":1") for w in plan.warnings)


def test_split_deterministic_per_seed():
    m = tallies({f"s{i}": [i % 3] for i in range(12)})
    a = session_split(m, 0.30, seed=7)
    b = session_split(m, 0.30, seed=7)
    assert a == b
    c = session_split(m, 0.30, seed=8)
    assert c.test_sessions != a.test_sessions or c.train_sessions != a.train_sessions


def test_split_covers_classes_when_possible():
    m = tallies({f"s{i}": [i % 4] for i in range(16)})
    plan = session_split(m, 0.25, seed=3)
    for side in (plan.train_sessions, plan.test_sessions):
        covered = {int(s[1:]) % 4 for s in side}
        assert covered == {0, 1, 2, 3}


# ---------------------------------------------------------------------------
# training


def test_train_separable_blobs_high_f1(rng):
    X, y = blobs(rng, n_per_class=67, dim=10)  # ~200 x 10
    model = train(X, y)
    f1 = macro_f1(predict(model, X), y, classes=np.unique(y))
    assert f1 >= 0.99


def test_train_huge_lambda_majority_class(rng):
    X, y = blobs(rng, n_per_class=30)
    y[:50] = 0  # make class 0 the clear majority
    model = train(X, y, ProbeConfig(l2_lambda=1e9))
    assert np.max(np.abs(model.weights)) < 1e-4
    pred = predict(model, X)
    majority = np.bincount(y).argmax()
    assert np.all(pred == majority)


def test_two_optimizers_reach_same_objective(rng):
    X, y = blobs(rng, n_per_class=20, dim=5, n_classes=3, spread=2.0)
    a = train(X, y, ProbeConfig(max_iters=2000, tol=1e-9))
    b = train(X, y, ProbeConfig(max_iters=20000, tol=1e-9), optimizer="agd")
    assert a.final_objective == pytest.approx(b.final_objective, abs=1e-6)


def test_gradient_matches_finite_differences(rng):
    for _ in range(20):
        n, d, K = int(rng.integers(10, 40)), int(rng.integers(2, 8)), int(rng.integers(2, 5))
        X = rng.normal(0, 1, (n, d))
        y_idx = rng.integers(0, K, n)
        y_idx[:K] = np.arange(K)  # every class present
        sw = rng.uniform(0.5, 2.0, n)
        lam = float(rng.uniform(0.1, 2.0))
        theta = rng.normal(0, 0.5, d * K + K)
        _, g = _loss_and_grad(theta, X, y_idx, sw, lam, K)
        h = 1e-5
        num = np.zeros_like(theta)
        for j in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            num[j] = (
                _loss_and_grad(up, X, y_idx, sw, lam, K)[0]
                - _loss_and_grad(dn, X, y_idx, sw, lam, K)[0]
            ) / (2 * h)
        rel = np.linalg.norm(g - num) / max(np.linalg.norm(num), 1e-12)
        assert rel < 1e-5


def test_objective_decreases_monotonically(rng):
    X, y = blobs(rng, n_per_class=40, dim=8, spread=1.5)
    model = train(X, y)
    hist = np.asarray(model.objective_history)
    assert hist.size >= 2
    assert np.all(np.diff(hist) <= 1e-12)


def test_training_deterministic(rng):
    X, y = blobs(rng, n_per_class=25)
    a = train(X, y)
    b = train(X, y)
    assert np.array_equal(a.weights, b.weights)
    assert a.final_objective == b.final_objective


def test_balanced_weights_noop_on_balanced_data(rng):
    X, y = blobs(rng, n_per_class=30)
    uni = train(X, y, ProbeConfig(class_weighting="uniform"))
    bal = train(X, y, ProbeConfig(class_weighting="balanced"))
    assert np.array_equal(predict(uni, X), predict(bal, X))


def test_train_rejects_single_class(rng):
    X = rng.normal(0, 1, (20, 4))
    with pytest.raises(SingleClass):
        train(X, np.zeros(20, dtype=int))


def test_train_rejects_nonfinite(rng):
    X = rng.normal(0, 1, (20, 4))
    X[3, 2] = np.nan
    with pytest.raises(NonFiniteFeature):
        train(X, np.arange(20) % 2)


# ---------------------------------------------------------------------------
# macro F1


def test_macro_f1_perfect():
    y = np.array([0, 1, 2, 0, 1, 2])
    assert macro_f1(y, y, classes=[0, 1, 2]) == 1.0


def test_macro_f1_hand_case_half():
    # per class: TP=1, FP=1, FN=1 -> F1 = 0.5 each -> macro 0.5
    actual = np.array([0, 0, 1, 1])
    predicted = np.array([0, 1, 0, 1])
    assert macro_f1(predicted, actual, classes=[0, 1]) == pytest.approx(0.5)


def test_macro_f1_all_one_class_on_balanced():
    actual = np.array([0] * 10 + [1] * 10)
    predicted = np.zeros(20, dtype=int)
    # class 0: F1 = 2/3; class 1: F1 = 0 -> macro 1/3
    assert macro_f1(predicted, actual, classes=[0, 1]) == pytest.approx(1.0 / 3.0)


def test_macro_f1_excludes_absent_classes():
    actual = np.array([0, 0, 1, 1])
    predicted = np.array([0, 0, 1, 1])
    assert macro_f1(predicted, actual, classes=[0, 1, 2]) == 1.0


# ---------------------------------------------------------------------------
# run_cell


def toy_dataset(rng, n_sessions=6, frames_per_session=30, dim=8):
    fids, sids, rows, labels = [], [], [], []
    centers = rng.normal(0, 5.0, (2, dim))
    for s in range(n_sessions):
        cls = s % 2
        for k in range(frames_per_session):
            fids.append(f"s{s}_f{k}")
            sids.append(f"s{s}")
            rows.append(centers[cls] + rng.normal(0, 1, dim))
            labels.append(cls)
    return EvalDataset(
        frame_ids=np.asarray(fids, dtype=str),
        session_ids=np.asarray(sids, dtype=str),
        features=np.vstack(rows),
        labels={"activity": np.asarray(labels)},
    )


def manifest_for(ids, dataset):
    frames = [
        SelectedFrame(frame_id=f, session_id=f.split("_")[0], g=0.5, nov=1.0, rank=i + 1)
        for i, f in enumerate(ids)
    ]
    return SelectionManifest(
        spec=StrategySpec(kind="random"),
        budget_b=0.5,
        selected=frames,
        pool_size=len(dataset.frame_ids),
        gated_size=len(dataset.frame_ids),
    )


def split_for(dataset, test=("s0", "s1")):
    from gazecurate.probe import SplitPlan

    all_sessions = sorted(set(dataset.session_ids))
    return SplitPlan(
        train_sessions=tuple(s for s in all_sessions if s not in test),
        test_sessions=tuple(test),
        seed=0,
    )


def test_run_cell_restricts_to_train_sessions(rng):
    dataset = toy_dataset(rng)
    split = split_for(dataset)
    # manifest deliberately includes test-session frames: they must be ignored
    ids = [f for f in dataset.frame_ids]
    res = run_cell(manifest_for(ids, dataset), split, dataset, "activity")
    assert set(res.train_sessions_used) <= set(split.train_sessions)
    assert res.n_train == sum(1 for s in dataset.session_ids if s not in ("s0", "s1"))
    assert res.f1 > 0.9


def test_run_cell_empty_selection(rng):
    dataset = toy_dataset(rng)
    split = split_for(dataset)
    test_only = [f for f, s in zip(dataset.frame_ids, dataset.session_ids) if s in ("s0", "s1")]
    with pytest.raises(EmptySelection):
        run_cell(manifest_for(test_only, dataset), split, dataset, "activity")


def test_run_cell_deterministic(rng):
    dataset = toy_dataset(rng)
    split = split_for(dataset)
    ids = [f for f, s in zip(dataset.frame_ids, dataset.session_ids) if s not in ("s0", "s1")][::2]
    a = run_cell(manifest_for(ids, dataset), split, dataset, "activity")
    b = run_cell(manifest_for(ids, dataset), split, dataset, "activity")
    assert abs(a.f1 - b.f1) < 1e-12


def test_run_cell_unknown_task(rng):
    dataset = toy_dataset(rng)
    split = split_for(dataset)
    with pytest.raises(DataError):
        run_cell(manifest_for(list(dataset.frame_ids), dataset), split, dataset, "nope")
