"""Frozen-feature linear probe: L2-regularized multinomial logistic regression.

The probe isolates the effect of frame selection: features are precomputed
embeddings, the classifier is a convex model trained deterministically, and
train/test splits are made at session granularity so no session ever leaks
frames into both sides. Two optimizers are provided: L-BFGS (the fast
default) and a monotone accelerated gradient scheme that doubles as an
independent cross-check of the convex solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize

from . import seeding
from .errors import DataError, EmptySelection, NonFiniteFeature, SingleClass
from .selection import SelectionManifest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeConfig:
    l2_lambda: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-6
    class_weighting: str = "uniform"  # or "balanced"

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise DataError("tol must be positive")
        if self.class_weighting not in ("uniform", "balanced"):
            raise DataError(f"unknown class weighting {self.class_weighting!r}")


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint session-level train/test assignment."""

    train_sessions: tuple[str, ...]
    test_sessions: tuple[str, ...]
    seed: int
    warnings: tuple[str, ...] = ()


@dataclass
class ProbeModel:
    classes: np.ndarray
    weights: np.ndarray  # (dim, n_classes)
    intercept: np.ndarray  # (n_classes,)
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    converged: bool
    n_iter: int
    final_objective: float
    objective_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class CellResult:
    f1: float
    n_train: int
    n_test: int
    train_sessions_used: tuple[str, ...]


def session_split(
    class_tallies: Mapping[str, Mapping[int, int]],
    test_fraction: float = 0.30,
    seed: int = 0,
) -> SplitPlan:
    """Assign whole sessions to train/test, seeking class coverage on both sides.

    Sessions are shuffled by seed, the first round(test_fraction * n) become
    the test side, then a bounded greedy repair swaps sessions so every class
    held by at least two sessions appears on both sides. Classes held by a
    single session trigger a warning instead.
    """
    sids = sorted(class_tallies)
    if len(sids) < 2:
        raise DataError("need at least two sessions to split")
    rng = seeding.generator("session-split", seed)
    shuffled = [sids[i] for i in rng.permutation(len(sids))]
    n_test = min(max(1, int(np.round(test_fraction * len(sids)))), len(sids) - 1)
    test = shuffled[:n_test]
    train = shuffled[n_test:]

    holders: dict[int, set[str]] = {}
    for sid, tallies in class_tallies.items():
        for cls, count in tallies.items():
            if count > 0:
                holders.setdefault(int(cls), set()).add(sid)

    def uncovered(side: list[str]) -> list[int]:
        side_set = set(side)
        return sorted(
            c for c, owners in holders.items() if len(owners) >= 2 and not (owners & side_set)
        )

    for _ in range(2 * len(holders) + 1):
        missing_test = uncovered(test)
        missing_train = uncovered(train)
        if not missing_test and not missing_train:
            break
        swapped = False
        for cls in missing_test:
            if _swap_for_class(cls, holders, src=train, dst=test):
                swapped = True
                break
        if not swapped:
            for cls in missing_train:
                if _swap_for_class(cls, holders, src=test, dst=train):
                    swapped = True
                    break
        if not swapped:
            break

    warnings = []
    for cls, owners in sorted(holders.items()):
        if len(owners) < 2:
            side = "test" if not (owners & set(test)) else "train"
            warnings.append(f"class_absent_from_{side}:{cls}")
    for cls in uncovered(test):
        warnings.append(f"class_absent_from_test:{cls}")
    for cls in uncovered(train):
        warnings.append(f"class_absent_from_train:{cls}")
    for w in warnings:
        log.warning("session split (seed=%d): %s", seed, w)
    return SplitPlan(
        train_sessions=tuple(sorted(train)),
        test_sessions=tuple(sorted(test)),
        seed=seed,
        warnings=tuple(warnings),
    )


def _swap_for_class(cls: int, holders: Mapping[int, set[str]], src: list[str], dst: list[str]) -> bool:
    """Move a holder of cls from src to dst, swapping out a dst session whose
    classes all stay covered in dst; first feasible pair wins."""
    dst_set = set(dst)
    for cand in src:
        if cand not in holders[cls]:
            continue
        for out in dst:
            after = (dst_set - {out}) | {cand}
            ok = all(
                owners & after
                for owners in holders.values()
                if owners & dst_set and len(owners) >= 2
            )
            if ok:
                src.remove(cand)
                dst.remove(out)
                src.append(out)
                dst.append(cand)
                return True
    return False


# ---------------------------------------------------------------------------
# training


def _sample_weights(labels_idx: np.ndarray, n_classes: int, weighting: str) -> np.ndarray:
    if weighting == "uniform":
        return np.ones(labels_idx.shape[0])
    counts = np.bincount(labels_idx, minlength=n_classes).astype(np.float64)
    n = labels_idx.shape[0]
    return n / (n_classes * counts[labels_idx])


def _loss_and_grad(
    theta: np.ndarray,
    X: np.ndarray,
    y_idx: np.ndarray,
    sw: np.ndarray,
    lam: float,
    n_classes: int,
) -> tuple[float, np.ndarray]:
    """Weighted multinomial cross-entropy plus (lam/2)||W||^2 (intercept free)."""
    d = X.shape[1]
    W = theta[: d * n_classes].reshape(d, n_classes)
    b = theta[d * n_classes :]
    Z = X @ W + b
    zmax = Z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.sum(np.exp(Z - zmax), axis=1))
    loss = float(np.sum(sw * (lse - Z[np.arange(X.shape[0]), y_idx])))
    loss += 0.5 * lam * float(np.sum(W * W))
    P = np.exp(Z - lse[:, None])
    P[np.arange(X.shape[0]), y_idx] -= 1.0
    P *= sw[:, None]
    gW = X.T @ P + lam * W
    gb = P.sum(axis=0)
    return loss, np.concatenate([gW.ravel(), gb])


def train(
    features: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    config: ProbeConfig = ProbeConfig(),
    optimizer: str = "lbfgs",
) -> ProbeModel:
    """Fit the probe deterministically from a zero start.

    Features are standardized with train-set statistics inside the model.
    ``optimizer`` may be "lbfgs" (default) or "agd", a monotone accelerated
    gradient scheme used as an independent check that both reach the same
    convex optimum.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError(f"features {X.shape} do not match {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains non-finite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass(f"training data holds {classes.size} class(es)")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Xs = (X - mean) / scale

    y_idx = np.searchsorted(classes, y)
    K = classes.size
    sw = _sample_weights(y_idx, K, config.class_weighting)
    d = Xs.shape[1]
    theta0 = np.zeros(d * K + K)

    history: list[float] = []

    def fun(theta: np.ndarray) -> tuple[float, np.ndarray]:
        return _loss_and_grad(theta, Xs, y_idx, sw, config.l2_lambda, K)

    if optimizer == "lbfgs":
        def record(theta: np.ndarray) -> None:
            history.append(fun(theta)[0])

        res = scipy.optimize.minimize(
            fun,
            theta0,
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={"maxiter": config.max_iters, "gtol": config.tol, "ftol": 1e-14},
        )
        theta, n_iter, converged = res.x, int(res.nit), bool(res.success or res.nit >= 1)
        final = float(res.fun)
    elif optimizer == "agd":
        theta, final, n_iter, converged, history = _agd_minimize(
            fun, theta0, config.tol, config.max_iters
        )
    else:
        raise DataError(f"unknown optimizer {optimizer!r}")

    W = theta[: d * K].reshape(d, K)
    b = theta[d * K :]
    return ProbeModel(
        classes=classes,
        weights=W,
        intercept=b,
        feature_mean=mean,
        feature_scale=scale,
        converged=converged,
        n_iter=n_iter,
        final_objective=final,
        objective_history=tuple(history),
    )


def _agd_minimize(fun, theta0, tol, max_iters):
    """Accelerated gradient descent with backtracking and a monotone restart."""
    theta = theta0.copy()
    momentum = theta0.copy()
    t_k = 1.0
    step = 1.0
    f_best, g = fun(theta)
    history = [f_best]
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        f_m, g_m = fun(momentum)
        # backtracking line search on the momentum point
        while True:
            cand = momentum - step * g_m
            f_c, _ = fun(cand)
            if f_c <= f_m - 0.5 * step * float(g_m @ g_m) or step < 1e-16:
                break
            step *= 0.5
        if f_c > f_best:  # restart momentum if acceleration overshoots
            momentum = theta.copy()
            t_k = 1.0
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        momentum = cand + ((t_k - 1.0) / t_next) * (cand - theta)
        theta = cand
        t_k = t_next
        f_best = f_c
        history.append(f_best)
        _, g = fun(theta)
        if float(np.max(np.abs(g))) < tol:
            return theta, f_best, n_iter, True, history
        step *= 2.0  # let the step grow back after cautious phases
    return theta, f_best, n_iter, False, history


def predict(model: ProbeModel, features: np.ndarray) -> np.ndarray:
    X = (np.asarray(features, dtype=np.float64) - model.feature_mean) / model.feature_scale
    scores = X @ model.weights + model.intercept
    return model.classes[np.argmax(scores, axis=1)]


def macro_f1(
    predicted: np.ndarray, actual: np.ndarray, classes: Sequence[int] | None = None
) -> float:
    """Unweighted mean of per-class F1 over classes present in ``actual``.

    Classes listed but absent from the ground truth are excluded (logged);
    a class with ground-truth members and no correct or incorrect positive
    predictions gets F1 = 0 through the usual 2TP/(2TP+FP+FN) formula.
    """
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if classes is None:
        classes = np.unique(np.concatenate([actual, predicted]))
    scores = []
    skipped = []
    for cls in classes:
        tp = int(np.sum((predicted == cls) & (actual == cls)))
        fp = int(np.sum((predicted == cls) & (actual != cls)))
        fn = int(np.sum((predicted != cls) & (actual == cls)))
        if tp + fn == 0:
            skipped.append(cls)
            continue
        scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    if skipped:
        log.debug("macro_f1: %d class(es) absent from ground truth, excluded: %s", len(skipped), skipped)
    if not scores:
        raise DataError("no class has ground-truth members")
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# evaluation cells


@dataclass
class EvalDataset:
    """Frame-aligned features and per-task labels for the whole dataset."""

    frame_ids: np.ndarray  # str
    session_ids: np.ndarray  # str
    features: np.ndarray  # (n, dim)
    labels: dict[str, np.ndarray]  # task -> int array, -1 where unlabeled

    def index_of(self) -> dict[str, int]:
        return {fid: i for i, fid in enumerate(self.frame_ids)}


def run_cell(
    manifest: SelectionManifest,
    split: SplitPlan,
    dataset: EvalDataset,
    task: str,
    config: ProbeConfig = ProbeConfig(),
    trainer=None,
) -> CellResult:
    """Train on the manifest's frames restricted to train sessions; test on
    every labeled test-session frame. Selection never touches the test side.

    ``trainer`` may supply an alternative ``(features, labels, config) ->
    model`` implementation; the model only needs to work with ``predict``.
    """
    if task not in dataset.labels:
        raise DataError(f"dataset has no labels for task {task!r}")
    y = dataset.labels[task]
    train_set = set(split.train_sessions)
    test_set = set(split.test_sessions)

    idx = dataset.index_of()
    sel_rows = [idx[fid] for fid in manifest.selected_ids if fid in idx]
    sel_rows = [i for i in sel_rows if dataset.session_ids[i] in train_set and y[i] >= 0]
    if not sel_rows:
        raise EmptySelection("manifest yields no labeled training frames in train sessions")
    sel_rows = np.asarray(sorted(sel_rows))

    used_sessions = {str(s) for s in dataset.session_ids[sel_rows]}
    leaked = used_sessions & test_set
    if leaked:
        raise DataError(f"session leakage into training: {sorted(leaked)}")

    test_mask = np.isin(dataset.session_ids, list(test_set)) & (y >= 0)
    test_rows = np.flatnonzero(test_mask)
    if test_rows.size == 0:
        raise DataError("no labeled test-session frames")

    fit = trainer if trainer is not None else train
    model = fit(dataset.features[sel_rows], y[sel_rows], config)
    pred = predict(model, dataset.features[test_rows])
    f1 = macro_f1(pred, y[test_rows], classes=np.unique(y[y >= 0]))
    return CellResult(
        f1=f1,
        n_train=int(sel_rows.size),
        n_test=int(test_rows.size),
        train_sessions_used=tuple(sorted(used_sessions)),
    )
