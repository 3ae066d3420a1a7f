"""Phase-transition predictors: estimate/rank-1 criteria, prediction-threshold
classifier, and the logistic model over the dynamic features.

The estimate and rank-1 criteria are running-minimum rules over a solve's
history, so both are monotone in t: once they declare the transition they
stay positive.
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._ioutil import atomic_write_text, canonical_dumps, load_json
from .bnb import TreeEvent
from .dynamics import FEATURE_NAMES, DynamicSample

LOGISTIC_FORMAT = "logit-v1"


class DegenerateLabels(ValueError):
    """Training data contains only one class."""


@dataclass
class PhaseHistory:
    """Per processed node: incumbent, minimum open estimate, rank-1 set size."""

    ts: list[int] = field(default_factory=list)
    z_bar: list[float | None] = field(default_factory=list)
    cmin: list[float] = field(default_factory=list)
    r1_size: list[int] = field(default_factory=list)
    _est_fired: list[bool] = field(default_factory=list)
    _rank1_fired: list[bool] = field(default_factory=list)

    def append(self, t: int, z_bar: float | None, cmin: float, r1: int) -> None:
        self.ts.append(t)
        self.z_bar.append(z_bar)
        self.cmin.append(cmin)
        self.r1_size.append(r1)
        fired_now = z_bar is not None and (math.isinf(cmin) or z_bar - cmin < 0.0)
        prev = self._est_fired[-1] if self._est_fired else False
        self._est_fired.append(prev or fired_now)
        prev_r = self._rank1_fired[-1] if self._rank1_fired else False
        self._rank1_fired.append(prev_r or r1 == 0)

    def _index(self, t: int | None) -> int:
        if not self.ts:
            raise ValueError("empty history")
        if t is None:
            return len(self.ts) - 1
        if t < self.ts[0]:
            raise ValueError(f"t={t} precedes recorded history")
        return min(t, self.ts[-1]) - self.ts[0]


def c_est(history: PhaseHistory, t: int | None = None) -> int:
    """1 once the incumbent has dipped strictly below the best open estimate."""
    return int(history._est_fired[history._index(t)])


def c_rank1(history: PhaseHistory, t: int | None = None) -> int:
    """1 once no open node beats all processed nodes at its depth."""
    return int(history._rank1_fired[history._index(t)])


def c_gnn(f_pred: float, z_bar: float, epsilon: float) -> int:
    """1 iff the incumbent is strictly below the prediction inflated by epsilon."""
    if not -1.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [-1, 1]")
    return int(z_bar < f_pred + epsilon * abs(f_pred))


def build_phase_history(events: list[TreeEvent]) -> PhaseHistory:
    """Replay an event log into the per-node history the criteria need.

    The rank-1 set counts open nodes whose estimate is at most the best
    estimate among processed nodes of the same depth (+inf at depths nothing
    has been processed at, so open nodes at fresh depths always qualify).
    """
    history = PhaseHistory()
    open_nodes: dict[int, tuple[int, float]] = {0: (0, math.inf)}  # id -> depth, est
    open_by_depth: dict[int, list[float]] = {0: [math.inf]}
    min_proc: dict[int, float] = {}
    z_bar: float | None = None

    group: list[TreeEvent] = []

    def flush() -> None:
        nonlocal group
        if not any(ev.kind == "processed" for ev in group):
            group = []
            return
        t = group[0].t
        depth = 0
        for ev in group:
            if ev.kind == "processed":
                node_id = ev.payload["node"]
                depth = ev.payload["depth"]
                est = ev.payload["estimate"]
                est = math.inf if est is None else est
                if node_id in open_nodes:
                    d, e = open_nodes.pop(node_id)
                    lst = open_by_depth[d]
                    lst.pop(bisect_right(lst, e) - 1)
                if est < min_proc.get(depth, math.inf):
                    min_proc[depth] = est
            elif ev.kind == "branched":
                est = ev.payload["child_estimate"]
                for key in ("down", "up"):
                    open_nodes[ev.payload[key]] = (depth + 1, est)
                    insort(open_by_depth.setdefault(depth + 1, []), est)
        for ev in group:
            if ev.kind == "incumbent":
                nonlocal_z(ev.payload["z"])
        cmin = math.inf
        r1 = 0
        for d, lst in open_by_depth.items():
            if not lst:
                continue
            if lst[0] < cmin:
                cmin = lst[0]
            r1 += bisect_right(lst, min_proc.get(d, math.inf))
        history.append(t, z_bar, cmin, r1)
        group = []

    def nonlocal_z(value: float) -> None:
        nonlocal z_bar
        z_bar = value

    for ev in events:
        if ev.kind == "processed" and group:
            flush()
        group.append(ev)
    if group:
        flush()
    return history


# -- logistic classifier over the dynamic features -----------------------------


@dataclass
class LogisticModel:
    weights: np.ndarray  # over (gap, tree_weight, median_gap, open_trend, gnn_ratio)
    intercept: float
    mean: np.ndarray
    std: np.ndarray
    threshold: float = 0.5
    lam: float = 1e-3


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def feature_matrix(samples: list[DynamicSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([s.features() for s in samples], dtype=float)
    y = np.array([s.label for s in samples], dtype=float)
    return x, y


def train_logistic(samples: list[DynamicSample], lam: float = 1e-3,
                   lr: float = 0.1, epochs: int = 500,
                   seed: int = 0) -> tuple[LogisticModel, list[float]]:
    """Full-batch gradient descent on L2-regularized logistic loss.

    Deterministic: weights start at zero, so the seed argument exists only for
    interface uniformity.  Features are standardized with training-set stats;
    the intercept is not penalized.  Returns the model and the loss curve.
    """
    x, y = feature_matrix(samples)
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training data has a single class")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    xs = (x - mean) / std

    n = len(y)
    w = np.zeros(x.shape[1])
    b = 0.0
    losses: list[float] = []
    for _ in range(epochs):
        p = _sigmoid(xs @ w + b)
        eps = 1e-12
        ce = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
        losses.append(float(ce + 0.5 * lam * float(w @ w)))
        grad_w = xs.T @ (p - y) / n + lam * w
        grad_b = float(np.mean(p - y))
        w = w - lr * grad_w
        b = b - lr * grad_b
    return LogisticModel(weights=w, intercept=b, mean=mean, std=std, lam=lam), losses


def logistic_loss_and_grad(model: LogisticModel, x: np.ndarray, y: np.ndarray
                           ) -> tuple[float, np.ndarray, float]:
    """Loss and gradients at the model's parameters (for gradient checks)."""
    xs = (x - model.mean) / model.std
    p = _sigmoid(xs @ model.weights + model.intercept)
    eps = 1e-12
    ce = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    loss = float(ce + 0.5 * model.lam * float(model.weights @ model.weights))
    grad_w = xs.T @ (p - y) / len(y) + model.lam * model.weights
    grad_b = float(np.mean(p - y))
    return loss, grad_w, grad_b


def c_dyn(model: LogisticModel, features) -> tuple[float, int]:
    """(probability, class) for one dynamic-feature tuple."""
    x = (np.asarray(features, dtype=float) - model.mean) / model.std
    prob = float(_sigmoid(np.array([x @ model.weights + model.intercept]))[0])
    return prob, int(prob > model.threshold)


def write_logistic(path: str | Path, model: LogisticModel,
                   config_hash: str = "") -> None:
    doc = {
        "format": LOGISTIC_FORMAT,
        "config_hash": config_hash,
        "feature_names": list(FEATURE_NAMES),
        "weights": [float(v) for v in model.weights],
        "intercept": model.intercept,
        "mean": [float(v) for v in model.mean],
        "std": [float(v) for v in model.std],
        "threshold": model.threshold,
        "lam": model.lam,
    }
    atomic_write_text(path, canonical_dumps(doc) + "\n")


def read_logistic(path: str | Path) -> LogisticModel:
    doc = load_json(path, LOGISTIC_FORMAT)
    return LogisticModel(
        weights=np.array(doc["weights"]),
        intercept=doc["intercept"],
        mean=np.array(doc["mean"]),
        std=np.array(doc["std"]),
        threshold=doc["threshold"],
        lam=doc["lam"],
    )
