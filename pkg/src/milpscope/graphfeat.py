"""Bipartite constraint/variable graph encoding of an instance at the root node.

Built once per instance after the root LP solve.  The feature schema is fixed
and versioned; it deliberately contains no incumbent-derived information.

Variable features (d_v = 10):
    0 objective coefficient / ||c||2
    1 integrality flag
    2 finite-upper-bound flag
    3 root LP value
    4 fractionality min(f, 1-f)
    5 reduced cost * / ||c||2
    6..9 basis status one-hot (basic, at-lower, at-upper, free)

Constraint features (d_c = 4):
    0 rhs / ||A_i||2
    1 dual * ||A_i||2 / ||c||2
    2 tightness flag (row active within 1e-6)
    3 cosine similarity of the row with the objective

Adjacency entries are a_ij / ||A_i||2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._ioutil import atomic_write_text, canonical_dumps, load_json
from .model import LpSolution, LpStatus, MilpInstance, VarStatus

GRAPH_FORMAT = "graph-v1"
FEATURE_SCHEMA = "feat-v1"
D_CONS = 4
D_VARS = 10

_BASIS_SLOT = {
    VarStatus.BASIC: 0,
    VarStatus.AT_LOWER: 1,
    VarStatus.AT_UPPER: 2,
    VarStatus.NONBASIC_FREE: 3,
}


class DegenerateNorm(ValueError):
    """Zero objective norm or an all-zero row; instance rejected for features."""


@dataclass
class BipartiteGraph:
    cons_feats: np.ndarray  # (m, D_CONS)
    var_feats: np.ndarray  # (n, D_VARS)
    adj_rows: np.ndarray  # nnz int
    adj_cols: np.ndarray  # nnz int
    adj_vals: np.ndarray  # nnz float, row-normalized coefficients
    z_lp_root: float
    schema: str = FEATURE_SCHEMA
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def num_cons(self) -> int:
        return self.cons_feats.shape[0]

    @property
    def num_vars(self) -> int:
        return self.var_feats.shape[0]

    def dense_adjacency(self) -> np.ndarray:
        if self._dense is None:
            a = np.zeros((self.num_cons, self.num_vars))
            a[self.adj_rows, self.adj_cols] = self.adj_vals
            self._dense = a
        return self._dense


def extract(instance: MilpInstance, root_lp: LpSolution) -> BipartiteGraph:
    """Build the graph encoding from the instance and its root LP solution."""
    if root_lp.status is not LpStatus.OPTIMAL:
        raise ValueError("graph extraction needs an optimal root LP")
    n, m = instance.num_vars, instance.num_cons
    c_norm = float(np.linalg.norm(instance.obj))
    if c_norm <= 0.0:
        raise DegenerateNorm("objective vector has zero norm")

    x = root_lp.x
    var_feats = np.zeros((n, D_VARS))
    var_feats[:, 0] = instance.obj / c_norm
    for j in instance.integer_set:
        var_feats[j, 1] = 1.0
    var_feats[:, 2] = np.isfinite(instance.var_upper).astype(float)
    var_feats[:, 3] = x
    frac = x - np.floor(x)
    var_feats[:, 4] = np.minimum(frac, 1.0 - frac)
    var_feats[:, 5] = root_lp.reduced_costs / c_norm
    for j, status in enumerate(root_lp.basis):
        var_feats[j, 6 + _BASIS_SLOT[status]] = 1.0

    cons_feats = np.zeros((m, D_CONS))
    rows_idx: list[int] = []
    cols_idx: list[int] = []
    vals: list[float] = []
    for i in range(m):
        idx, coef = instance.row(i)
        row_norm = float(np.linalg.norm(coef))
        if row_norm <= 0.0:
            raise DegenerateNorm(f"row {i} has zero norm")
        activity = float(coef @ x[idx])
        cons_feats[i, 0] = instance.rhs[i] / row_norm
        cons_feats[i, 1] = root_lp.duals[i] * row_norm / c_norm
        cons_feats[i, 2] = float(abs(activity - instance.rhs[i]) <= 1e-6)
        cons_feats[i, 3] = float(coef @ instance.obj[idx]) / (row_norm * c_norm)
        rows_idx.extend([i] * len(idx))
        cols_idx.extend(int(j) for j in idx)
        vals.extend(float(a) / row_norm for a in coef)

    graph = BipartiteGraph(
        cons_feats=cons_feats,
        var_feats=var_feats,
        adj_rows=np.asarray(rows_idx, dtype=np.int64),
        adj_cols=np.asarray(cols_idx, dtype=np.int64),
        adj_vals=np.asarray(vals, dtype=float),
        z_lp_root=float(root_lp.z_lp),
    )
    if (not np.all(np.isfinite(graph.cons_feats))
            or not np.all(np.isfinite(graph.var_feats))):
        raise DegenerateNorm("non-finite feature after normalization")
    return graph


def write_graph(path: str | Path, graph: BipartiteGraph, config_hash: str = "") -> None:
    doc = {
        "format": GRAPH_FORMAT,
        "schema": graph.schema,
        "config_hash": config_hash,
        "m": graph.num_cons,
        "n": graph.num_vars,
        "cons_feats": [[float(v) for v in row] for row in graph.cons_feats],
        "var_feats": [[float(v) for v in row] for row in graph.var_feats],
        "adj": [[int(i), int(j), float(v)] for i, j, v in
                zip(graph.adj_rows, graph.adj_cols, graph.adj_vals)],
        "z_lp_root": graph.z_lp_root,
    }
    atomic_write_text(path, canonical_dumps(doc) + "\n")


def read_graph(path: str | Path) -> BipartiteGraph:
    doc = load_json(path, GRAPH_FORMAT)
    if doc.get("schema") != FEATURE_SCHEMA:
        raise ValueError(f"{path}: feature schema {doc.get('schema')!r} "
                         f"does not match {FEATURE_SCHEMA!r}")
    adj = doc["adj"]
    return BipartiteGraph(
        cons_feats=np.array(doc["cons_feats"], dtype=float).reshape(doc["m"], D_CONS),
        var_feats=np.array(doc["var_feats"], dtype=float).reshape(doc["n"], D_VARS),
        adj_rows=np.array([r[0] for r in adj], dtype=np.int64),
        adj_cols=np.array([r[1] for r in adj], dtype=np.int64),
        adj_vals=np.array([r[2] for r in adj], dtype=float),
        z_lp_root=doc["z_lp_root"],
        schema=doc["schema"],
    )
