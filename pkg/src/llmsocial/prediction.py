"""Predicting agent scores from backstory and neighbor features.

Four feature levels are compared: backstory only (``B``), plus the mean
encoding of out-neighbors' posts (``B+NP``), plus the mean of
out-neighbors' scores (``B+NO``), and both (``B+NP+NO``).  The built-in
learners are ridge regression (closed form) and L2-regularised logistic
regression (gradient ascent with step ``1/L``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Snapshot
from .errors import EmptyTest, InsufficientBalance, SingularSystem
from .text import EncoderPort

LEVELS = ("B", "B+NP", "B+NO", "B+NP+NO")


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    balanced: bool = True
    cap_per_side: int = 1000

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) < 0:
            raise ValueError("split fractions must be non-negative and sum to 1")


@dataclass(frozen=True)
class FeatureBundle:
    agent_id: str
    backstory_vec: np.ndarray
    neighbor_posts_vec: np.ndarray | None
    neighbor_score_mean: float | None
    target: float

    @property
    def class_label(self) -> int:
        return 1 if self.target > 0 else -1

    def row(self, level: str) -> np.ndarray:
        parts = [self.backstory_vec]
        if "NP" in level:
            parts.append(self.neighbor_posts_vec)
        if "NO" in level:
            parts.append(np.array([self.neighbor_score_mean]))
        return np.concatenate(parts)


@dataclass
class Dataset:
    level: str
    X: np.ndarray
    y: np.ndarray
    agent_ids: list[str]
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def part(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        idx = getattr(self, name)
        return self.X[idx], self.y[idx]

    @property
    def width(self) -> int:
        return self.X.shape[1]


def neighbor_features(snapshot: Snapshot, scores: Mapping[str, float], enc: EncoderPort,
                      agent_id: str, direction: str = "out") -> tuple[np.ndarray, float]:
    """Mean agent encoding of neighbors with posts, and mean neighbor score
    (zeros when no neighbor qualifies).  The agent's own posts never enter."""
    if direction == "out":
        nbrs = snapshot.following(agent_id)
    elif direction == "in":
        nbrs = snapshot.followers(agent_id)
    elif direction == "both":
        nbrs = sorted(set(snapshot.following(agent_id)) | set(snapshot.followers(agent_id)))
    else:
        raise ValueError("direction must be 'out', 'in' or 'both'")
    vecs = []
    for n in nbrs:
        pids = snapshot.posts_by_author.get(n, [])
        if pids:
            vecs.append(np.mean([enc.encode(snapshot.posts[p].text) for p in pids], axis=0))
    nv = np.mean(vecs, axis=0) if vecs else np.zeros(enc.dim())
    ns = [scores[n] for n in nbrs if n in scores]
    return nv, float(np.mean(ns)) if ns else 0.0


def feature_bundles(snapshot: Snapshot, scores: Mapping[str, float], enc: EncoderPort,
                    direction: str = "out") -> list[FeatureBundle]:
    out = []
    for a in sorted(scores):
        rec = snapshot.agents.get(a)
        if rec is None or not rec.backstory:
            continue
        nv, ns = neighbor_features(snapshot, scores, enc, a, direction)
        out.append(FeatureBundle(a, enc.encode(rec.backstory), nv, ns, float(scores[a])))
    return out


def split_indices(n: int, spec: SplitSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = rng.permutation(n)
    n_train = int(round(spec.fractions[0] * n))
    n_val = int(round(spec.fractions[1] * n))
    return np.sort(order[:n_train]), np.sort(order[n_train:n_train + n_val]), np.sort(order[n_train + n_val:])


def build_dataset(snapshot: Snapshot | None, scores: Mapping[str, float], enc: EncoderPort | None,
                  level: str, split: SplitSpec = SplitSpec(), bundles: Sequence[FeatureBundle] | None = None,
                  direction: str = "out") -> Dataset:
    """Balanced, split design matrix for one feature level.

    Pass precomputed ``bundles`` to reuse features across levels and seeds.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    if bundles is None:
        bundles = feature_bundles(snapshot, scores, enc, direction)
    rows = [b for b in bundles if b.target != 0]
    rng = np.random.default_rng(split.seed)
    if split.balanced:
        pos = [b for b in rows if b.target > 0]
        neg = [b for b in rows if b.target < 0]
        k = min(len(pos), len(neg), split.cap_per_side)
        if k < 10:
            raise InsufficientBalance(f"only {k} agents on the smaller side")
        pick_p = sorted(rng.choice(len(pos), k, replace=False))
        pick_n = sorted(rng.choice(len(neg), k, replace=False))
        rows = [pos[i] for i in pick_p] + [neg[i] for i in pick_n]
    X = np.array([b.row(level) for b in rows])
    y = np.array([b.target for b in rows])
    tr, va, te = split_indices(len(rows), split, rng)
    return Dataset(level, X, y, [b.agent_id for b in rows], tr, va, te)


# ---------------------------------------------------------------------------
# Learners

class _Standardizer:
    def fit(self, X):
        self.mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)
        return self

    def __call__(self, X):
        return (X - self.mu) / self.sd


class Ridge:
    """Ridge regression on standardised features with an unpenalised intercept."""

    kind = "ridge"

    def __init__(self, lam: float = 1.0, standardize: bool = True):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = lam
        self.standardize = standardize

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.scale = _Standardizer().fit(X) if self.standardize else None
        Z = self.scale(X) if self.scale else X
        zm = Z.mean(axis=0)
        ym = y.mean()
        Zc = Z - zm
        A = Zc.T @ Zc + self.lam * np.eye(Z.shape[1])
        if self.lam == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
            raise SingularSystem("design matrix is rank deficient and lam = 0")
        self.coef = np.linalg.solve(A, Zc.T @ (y - ym))
        self.intercept = ym - zm @ self.coef
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        Z = self.scale(X) if self.scale else X
        return Z @ self.coef + self.intercept

    def predict_label(self, X):
        return np.where(self.predict(X) >= 0, 1, -1)


def _sigmoid(t):
    return np.where(t >= 0, 1 / (1 + np.exp(-np.abs(t))), np.exp(-np.abs(t)) / (1 + np.exp(-np.abs(t))))


class Logistic:
    """L2-regularised logistic regression on labels in {-1, +1}.

    Maximises ``mean log-likelihood - lam/2 * |w|^2`` (intercept not
    penalised) by gradient ascent with fixed step ``1/L``, where
    ``L = lam + max_eig(Z'Z) / (4 n)`` bounds the curvature, until the
    gradient norm falls below ``tol``.
    """

    kind = "logistic"

    def __init__(self, lam: float = 1.0, max_iter: int = 10_000, tol: float = 1e-8, standardize: bool = True):
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol
        self.standardize = standardize

    def _design(self, X):
        Z = self.scale(X) if self.scale else X
        return np.hstack([Z, np.ones((Z.shape[0], 1))])

    def gradient(self, Z, t, beta):
        p = _sigmoid(Z @ beta)
        g = Z.T @ (t - p) / len(t)
        g[:-1] -= self.lam * beta[:-1]
        return g

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.scale = _Standardizer().fit(X) if self.standardize else None
        Z = self._design(X)
        t = (y > 0).astype(float)
        L = self.lam + np.linalg.eigvalsh(Z.T @ Z).max() / (4 * len(t))
        beta = np.zeros(Z.shape[1])
        self.n_iter = 0
        for self.n_iter in range(1, self.max_iter + 1):
            g = self.gradient(Z, t, beta)
            if np.linalg.norm(g) < self.tol:
                break
            beta = beta + g / L
        self.beta = beta
        self.coef, self.intercept = beta[:-1], beta[-1]
        return self

    def predict_proba(self, X):
        return _sigmoid(self._design(np.asarray(X, dtype=float)) @ self.beta)

    def predict(self, X):
        return 2 * self.predict_proba(X) - 1

    def predict_label(self, X):
        return np.where(self.predict_proba(X) >= 0.5, 1, -1)


def linear_learner(mode: str = "ridge", lam: float = 1.0, max_iter: int = 10_000, tol: float = 1e-8):
    if mode == "ridge":
        return Ridge(lam)
    if mode == "logistic":
        return Logistic(lam, max_iter, tol)
    raise ValueError(f"unknown learner {mode!r}")


# ---------------------------------------------------------------------------
# Metrics

def rmse(y_true, y_pred) -> float:
    y_true, y_pred = np.asarray(y_true, float), np.asarray(y_pred, float)
    if y_true.size == 0:
        raise EmptyTest("empty test set")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def confusion(y_true, y_pred) -> tuple[int, int, int, int]:
    """``(tp, fp, fn, tn)`` with +1 as the positive class."""
    t, p = np.asarray(y_true) > 0, np.asarray(y_pred) > 0
    return int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(~t & ~p))


def accuracy(y_true, y_pred) -> float:
    if len(y_true) == 0:
        raise EmptyTest("empty test set")
    tp, fp, fn, tn = confusion(y_true, y_pred)
    return (tp + tn) / (tp + fp + fn + tn)


def f1_score(y_true, y_pred) -> float:
    if len(y_true) == 0:
        raise EmptyTest("empty test set")
    tp, fp, fn, _ = confusion(y_true, y_pred)
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def evaluate(model, X, y) -> dict[str, float]:
    """RMSE of ``model.predict`` against ``y``; accuracy and F1 of
    ``model.predict_label`` against ``sign(y)``."""
    X, y = np.asarray(X, float), np.asarray(y, float)
    if y.size == 0:
        raise EmptyTest("empty test set")
    labels = np.where(y > 0, 1, -1)
    pred_labels = model.predict_label(X)
    return {"rmse": rmse(y, model.predict(X)), "accuracy": accuracy(labels, pred_labels),
            "f1": f1_score(labels, pred_labels)}


@dataclass
class LevelRow:
    level: str
    n_seeds: int
    metrics: dict[str, tuple[float, float]]
    per_seed: dict[str, list[float]] = field(default_factory=dict)
    improved_rmse: bool | None = None


def incremental_report(make_dataset: Callable[[str, int], Dataset], levels: Sequence[str] = LEVELS,
                       seeds: Sequence[int] = (0, 1, 2, 3, 4), lam: float = 1.0,
                       logistic_iter: int = 2000) -> list[LevelRow]:
    """Mean and sd over seeds of test RMSE (ridge) and accuracy/F1 (logistic)
    for each level.  ``improved_rmse`` says whether a level beats the
    previous row's mean RMSE."""
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    rows = []
    for level in levels:
        per = {"rmse": [], "accuracy": [], "f1": []}
        for s in seeds:
            ds = make_dataset(level, s)
            Xtr, ytr = ds.part("train")
            Xte, yte = ds.part("test")
            reg = Ridge(lam).fit(Xtr, ytr)
            clf = Logistic(lam, logistic_iter, 1e-6).fit(Xtr, np.where(ytr > 0, 1, -1))
            per["rmse"].append(rmse(yte, reg.predict(Xte)))
            m = evaluate(clf, Xte, yte)
            per["accuracy"].append(m["accuracy"])
            per["f1"].append(m["f1"])
        stats = {k: (float(np.mean(v)), float(np.std(v, ddof=1)) if len(v) > 1 else 0.0) for k, v in per.items()}
        improved = None if not rows else stats["rmse"][0] < rows[-1].metrics["rmse"][0]
        rows.append(LevelRow(level, len(seeds), stats, per, improved))
    return rows


def write_report_csv(rows: Sequence[LevelRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "rmse_mean", "rmse_sd", "accuracy_mean", "accuracy_sd", "f1_mean", "f1_sd", "improved_rmse"])
        for r in rows:
            m = r.metrics
            w.writerow([r.level, *(f"{x:.6f}" for k in ("rmse", "accuracy", "f1") for x in m[k]),
                        "" if r.improved_rmse is None else int(r.improved_rmse)])


def write_dataset_csv(ds: Dataset, path) -> None:
    split = np.empty(len(ds.y), dtype=object)
    split[ds.train], split[ds.val], split[ds.test] = "train", "val", "test"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent_id", "split", "target", *(f"x{i}" for i in range(ds.width))])
        for i, a in enumerate(ds.agent_ids):
            w.writerow([a, split[i], repr(float(ds.y[i])), *(repr(float(v)) for v in ds.X[i])])
