"""Graph-network regressor for the optimal objective value, in plain numpy.

Architecture: per-node embedding MLPs, one constraint<-variable half
convolution followed by one variable<-constraint half convolution, a per
variable output head, and mean pooling over variables.  Gradients are
accumulated by hand with reverse-mode rules; training uses Adam on the
mean-squared error of a standardized target.

Three learning targets are supported: the optimal objective itself (t1), its
ratio to the root LP value (t2), and its difference from the root LP value
(t3).  Predictions are mapped back to objective space before any error is
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._ioutil import atomic_write_text, canonical_dumps, load_json
from .graphfeat import D_CONS, D_VARS, BipartiteGraph
from .rng import Rng, derive_seed

MODEL_FORMAT = "gnn-v1"

TARGETS = ("t1", "t2", "t3")

_LP_TOL = 1e-6


class DimensionMismatch(ValueError):
    """Graph feature dimensions do not match the model."""


class DegenerateLp(ValueError):
    """Ratio target undefined: root LP value too close to zero."""


class Diverged(RuntimeError):
    """Training loss became non-finite (learning rate too high)."""


@dataclass
class RegressionSample:
    graph: BipartiteGraph
    z_lp: float
    z_star: float


@dataclass
class TrainParams:
    hidden: int = 32
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    target_kind: str = "t3"
    patience: int = 15


@dataclass
class GnnModel:
    hidden: int
    target_kind: str
    params: dict[str, np.ndarray]
    cons_mean: np.ndarray
    cons_std: np.ndarray
    var_mean: np.ndarray
    var_std: np.ndarray
    target_mean: float = 0.0
    target_std: float = 1.0

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def target_value(kind: str, z_star: float, z_lp: float) -> float:
    if kind == "t1":
        return z_star
    if kind == "t2":
        if abs(z_lp) <= _LP_TOL:
            raise DegenerateLp(f"|z_lp|={abs(z_lp)} too small for ratio target")
        return z_star / z_lp
    if kind == "t3":
        return z_star - z_lp
    raise ValueError(f"unknown target kind {kind!r}")


def init_model(hidden: int, target_kind: str, seed: int) -> GnnModel:
    """He-uniform weight init (limit sqrt(6/fan_in)), zero biases."""
    if target_kind not in TARGETS:
        raise ValueError(f"unknown target kind {target_kind!r}")
    rng = Rng(derive_seed(seed, 0x6EE))

    def mat(rows: int, cols: int) -> np.ndarray:
        limit = math.sqrt(6.0 / rows)
        return np.array([[rng.uniform(-limit, limit) for _ in range(cols)]
                         for _ in range(rows)])

    h = hidden
    params = {
        "wc1": mat(D_CONS, h), "bc1": np.zeros(h),
        "wc2": mat(h, h), "bc2": np.zeros(h),
        "wv1": mat(D_VARS, h), "bv1": np.zeros(h),
        "wv2": mat(h, h), "bv2": np.zeros(h),
        "w11": mat(h, h), "w12": mat(h, h),
        "w21": mat(h, h), "w22": mat(h, h),
        "wh1": mat(h, h), "bh1": np.zeros(h),
        "wh2": mat(h, 1)[:, 0], "bh2": np.zeros(()),
    }
    return GnnModel(
        hidden=h, target_kind=target_kind, params=params,
        cons_mean=np.zeros(D_CONS), cons_std=np.ones(D_CONS),
        var_mean=np.zeros(D_VARS), var_std=np.ones(D_VARS),
    )


def _forward_cache(model: GnnModel, graph: BipartiteGraph) -> dict:
    if graph.cons_feats.shape[1] != D_CONS or graph.var_feats.shape[1] != D_VARS:
        raise DimensionMismatch("graph feature widths do not match the schema")
    p = model.params
    a = graph.dense_adjacency()
    ct = (graph.cons_feats - model.cons_mean) / model.cons_std
    vt = (graph.var_feats - model.var_mean) / model.var_std

    zc1 = ct @ p["wc1"] + p["bc1"]
    hc1 = np.maximum(zc1, 0.0)
    zc2 = hc1 @ p["wc2"] + p["bc2"]
    hc = np.maximum(zc2, 0.0)
    zv1 = vt @ p["wv1"] + p["bv1"]
    hv1 = np.maximum(zv1, 0.0)
    zv2 = hv1 @ p["wv2"] + p["bv2"]
    hv = np.maximum(zv2, 0.0)

    av = a @ hv
    cp = hc @ p["w11"] + av @ p["w12"]
    ac = a.T @ cp
    vp = hv @ p["w21"] + ac @ p["w22"]

    zh = vp @ p["wh1"] + p["bh1"]
    hh = np.maximum(zh, 0.0)
    out = hh @ p["wh2"] + p["bh2"]
    yhat = float(out.mean())
    return {
        "a": a, "ct": ct, "vt": vt, "zc1": zc1, "hc1": hc1, "zc2": zc2,
        "hc": hc, "zv1": zv1, "hv1": hv1, "zv2": zv2, "hv": hv, "av": av,
        "cp": cp, "ac": ac, "vp": vp, "zh": zh, "hh": hh, "out": out,
        "yhat": yhat,
    }


def forward(model: GnnModel, graph: BipartiteGraph) -> float:
    """Standardized-target estimate for one graph."""
    return _forward_cache(model, graph)["yhat"]


def _backward(model: GnnModel, cache: dict, dy: float) -> dict[str, np.ndarray]:
    p = model.params
    a = cache["a"]
    n = cache["out"].shape[0]
    g: dict[str, np.ndarray] = {}

    dout = np.full(n, dy / n)
    g["wh2"] = cache["hh"].T @ dout
    g["bh2"] = np.asarray(dout.sum())
    dhh = np.outer(dout, p["wh2"])
    dzh = dhh * (cache["zh"] > 0)
    g["wh1"] = cache["vp"].T @ dzh
    g["bh1"] = dzh.sum(axis=0)
    dvp = dzh @ p["wh1"].T

    g["w21"] = cache["hv"].T @ dvp
    g["w22"] = cache["ac"].T @ dvp
    dhv = dvp @ p["w21"].T
    dac = dvp @ p["w22"].T
    dcp = a @ dac

    g["w11"] = cache["hc"].T @ dcp
    g["w12"] = cache["av"].T @ dcp
    dhc = dcp @ p["w11"].T
    dav = dcp @ p["w12"].T
    dhv = dhv + a.T @ dav

    dzv2 = dhv * (cache["zv2"] > 0)
    g["wv2"] = cache["hv1"].T @ dzv2
    g["bv2"] = dzv2.sum(axis=0)
    dhv1 = dzv2 @ p["wv2"].T
    dzv1 = dhv1 * (cache["zv1"] > 0)
    g["wv1"] = cache["vt"].T @ dzv1
    g["bv1"] = dzv1.sum(axis=0)

    dzc2 = dhc * (cache["zc2"] > 0)
    g["wc2"] = cache["hc1"].T @ dzc2
    g["bc2"] = dzc2.sum(axis=0)
    dhc1 = dzc2 @ p["wc2"].T
    dzc1 = dhc1 * (cache["zc1"] > 0)
    g["wc1"] = cache["ct"].T @ dzc1
    g["bc1"] = dzc1.sum(axis=0)
    return g


def loss_and_gradients(model: GnnModel, batch: list[tuple[BipartiteGraph, float]]
                       ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error over (graph, standardized target) pairs with gradients."""
    if not batch:
        raise ValueError("empty batch")
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    loss = 0.0
    for graph, target in batch:
        cache = _forward_cache(model, graph)
        err = cache["yhat"] - target
        loss += err * err / len(batch)
        g = _backward(model, cache, 2.0 * err / len(batch))
        for k in grads:
            grads[k] += g[k]
    return loss, grads


def predict_objective(model: GnnModel, graph: BipartiteGraph) -> float:
    """Objective-space prediction: de-standardize, then invert the target map."""
    raw = forward(model, graph) * model.target_std + model.target_mean
    if model.target_kind == "t1":
        return raw
    if model.target_kind == "t2":
        if abs(graph.z_lp_root) <= _LP_TOL:
            raise DegenerateLp("root LP value too close to zero for ratio target")
        return raw * graph.z_lp_root
    return raw + graph.z_lp_root


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0


def _feature_stats(graphs: list[BipartiteGraph]) -> tuple[np.ndarray, ...]:
    cons = np.vstack([g.cons_feats for g in graphs if g.num_cons])
    var = np.vstack([g.var_feats for g in graphs])
    cm, cs = cons.mean(axis=0), cons.std(axis=0)
    vm, vs = var.mean(axis=0), var.std(axis=0)
    cs = np.where(cs < 1e-8, 1.0, cs)
    vs = np.where(vs < 1e-8, 1.0, vs)
    return cm, cs, vm, vs


def train(train_samples: list[RegressionSample],
          val_samples: list[RegressionSample],
          params: TrainParams | None = None) -> tuple[GnnModel, TrainHistory]:
    """Adam training with early stopping on a validation plateau.

    Feature and target statistics come from the training split only.  Fully
    deterministic for a fixed seed (init and batch order use the seeded
    stream).
    """
    params = params or TrainParams()
    if len(train_samples) < 10:
        raise ValueError("need at least 10 training samples")
    model = init_model(params.hidden, params.target_kind, params.seed)
    model.cons_mean, model.cons_std, model.var_mean, model.var_std = (
        _feature_stats([s.graph for s in train_samples]))

    raw_targets = np.array([target_value(params.target_kind, s.z_star, s.z_lp)
                            for s in train_samples])
    model.target_mean = float(raw_targets.mean())
    std = float(raw_targets.std())
    model.target_std = std if std > 1e-12 else 1.0

    def standardized(samples: list[RegressionSample]) -> list[float]:
        return [(target_value(params.target_kind, s.z_star, s.z_lp)
                 - model.target_mean) / model.target_std for s in samples]

    train_t = standardized(train_samples)
    val_t = standardized(val_samples)

    rng = Rng(derive_seed(params.seed, 0xADA))
    adam_m = {k: np.zeros_like(v) for k, v in model.params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    history = TrainHistory()
    best_val = math.inf
    best_params = model.copy_params()
    patience_left = params.patience

    def val_loss() -> float:
        if not val_samples:
            return math.nan
        total = 0.0
        for s, tgt in zip(val_samples, val_t):
            err = forward(model, s.graph) - tgt
            total += err * err
        return total / len(val_samples)

    order = list(range(len(train_samples)))
    for epoch in range(params.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, len(order), params.batch_size):
            batch_idx = order[lo:lo + params.batch_size]
            batch = [(train_samples[i].graph, train_t[i]) for i in batch_idx]
            loss, grads = loss_and_gradients(model, batch)
            if not math.isfinite(loss):
                raise Diverged(f"non-finite loss at epoch {epoch}")
            epoch_loss += loss
            n_batches += 1
            step += 1
            for k, grad in grads.items():
                adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grad
                adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grad * grad
                m_hat = adam_m[k] / (1 - beta1 ** step)
                v_hat = adam_v[k] / (1 - beta2 ** step)
                model.params[k] = model.params[k] - params.lr * m_hat / (np.sqrt(v_hat) + eps)
        history.train_loss.append(epoch_loss / max(1, n_batches))
        vl = val_loss()
        history.val_loss.append(vl)
        if not math.isnan(vl) and vl < best_val - 1e-12:
            best_val = vl
            best_params = model.copy_params()
            history.best_epoch = epoch
            patience_left = params.patience
        else:
            patience_left -= 1
            if val_samples and patience_left <= 0:
                break
    if val_samples:
        model.params = best_params
    return model, history


def write_model(path: str | Path, model: GnnModel, config_hash: str = "") -> None:
    doc = {
        "format": MODEL_FORMAT,
        "config_hash": config_hash,
        "hidden": model.hidden,
        "target_kind": model.target_kind,
        "params": {k: v.tolist() for k, v in model.params.items()},
        "cons_mean": model.cons_mean.tolist(),
        "cons_std": model.cons_std.tolist(),
        "var_mean": model.var_mean.tolist(),
        "var_std": model.var_std.tolist(),
        "target_mean": model.target_mean,
        "target_std": model.target_std,
    }
    atomic_write_text(path, canonical_dumps(doc) + "\n")


def read_model(path: str | Path) -> GnnModel:
    doc = load_json(path, MODEL_FORMAT)
    params = {k: np.array(v, dtype=float) for k, v in doc["params"].items()}
    params["bh2"] = np.asarray(params["bh2"])
    return GnnModel(
        hidden=doc["hidden"],
        target_kind=doc["target_kind"],
        params=params,
        cons_mean=np.array(doc["cons_mean"]),
        cons_std=np.array(doc["cons_std"]),
        var_mean=np.array(doc["var_mean"]),
        var_std=np.array(doc["var_std"]),
        target_mean=doc["target_mean"],
        target_std=doc["target_std"],
    )
