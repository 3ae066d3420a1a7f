"""Canonical data model: MILP instances in min/>= form, LP solutions, solve results.

The stored sense is always minimization with >= rows.  Generators for natively
maximizing problem families negate the objective on ingestion and set
``maximize_origin`` so user-facing reports can re-negate.  Binary variables are
integer variables with bounds [0, 1]; there is no separate binary kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._ioutil import atomic_write_text, canonical_dumps, fmt_float, load_json

INSTANCE_FORMAT = "milp-v1"

FEAS_TOL = 1e-6  # absolute tolerance on row activity
OBJ_REL_TOL = 1e-7  # relative tolerance on objective identities


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class VarStatus(Enum):
    BASIC = "basic"
    AT_LOWER = "at_lower"
    AT_UPPER = "at_upper"
    NONBASIC_FREE = "free"


class Proof(Enum):
    OPTIMALITY_PROVED = "optimality_proved"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


class MilpInstance:
    """min obj.x  s.t.  rows(x) >= rhs,  lower <= x <= upper, x integer on integer_set.

    Immutable after construction; rows are stored in CSR form.  Indices are
    0-based everywhere, including in instance files.
    """

    def __init__(
        self,
        name: str,
        obj,
        rows: list[list[tuple[int, float]]],
        rhs,
        integer_set,
        var_lower=None,
        var_upper=None,
        continuous_set=None,
        maximize_origin: bool = False,
    ) -> None:
        self.name = name
        self.obj = np.asarray(obj, dtype=float)
        self.num_vars = int(self.obj.shape[0])
        self.rhs = np.asarray(rhs, dtype=float)
        self.num_cons = int(self.rhs.shape[0])
        if len(rows) != self.num_cons:
            raise ValueError("rows and rhs length mismatch")

        starts = np.zeros(self.num_cons + 1, dtype=np.int64)
        cols: list[int] = []
        vals: list[float] = []
        for i, row in enumerate(rows):
            for j, a in row:
                cols.append(int(j))
                vals.append(float(a))
            starts[i + 1] = len(cols)
        self.row_starts = starts
        self.col_index = np.asarray(cols, dtype=np.int64)
        self.coefs = np.asarray(vals, dtype=float)

        self.integer_set = frozenset(int(j) for j in integer_set)
        if continuous_set is None:
            continuous_set = set(range(self.num_vars)) - self.integer_set
        self.continuous_set = frozenset(int(j) for j in continuous_set)

        if var_lower is None:
            var_lower = np.zeros(self.num_vars)
        if var_upper is None:
            var_upper = np.full(self.num_vars, math.inf)
        self.var_lower = np.asarray(var_lower, dtype=float)
        self.var_upper = np.asarray(var_upper, dtype=float)
        self.maximize_origin = bool(maximize_origin)

        for arr in (self.obj, self.rhs, self.coefs, self.var_lower, self.var_upper,
                    self.row_starts, self.col_index):
            arr.setflags(write=False)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(column indices, coefficients) of row i."""
        lo, hi = self.row_starts[i], self.row_starts[i + 1]
        return self.col_index[lo:hi], self.coefs[lo:hi]

    def rows_as_pairs(self) -> list[list[tuple[int, float]]]:
        out = []
        for i in range(self.num_cons):
            idx, coef = self.row(i)
            out.append([(int(j), float(a)) for j, a in zip(idx, coef)])
        return out

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.num_cons, self.num_vars))
        for i in range(self.num_cons):
            idx, coef = self.row(i)
            a[i, idx] = coef
        return a

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        act = np.empty(self.num_cons)
        for i in range(self.num_cons):
            idx, coef = self.row(i)
            act[i] = float(coef @ x[idx])
        return act

    def is_feasible(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        if np.any(x < self.var_lower - tol) or np.any(x > self.var_upper + tol):
            return False
        if self.num_cons and np.any(self.row_activity(x) < self.rhs - tol):
            return False
        for j in self.integer_set:
            if abs(x[j] - round(x[j])) > tol:
                return False
        return True


@dataclass
class LpSolution:
    """Outcome of one LP relaxation solve.

    ``basis_cols``/``col_status``/``binv`` capture the solver's internal
    extended basis (and optionally its cached inverse) purely to warm-start
    child solves; they are not part of the instance-facing contract.
    """

    status: LpStatus
    z_lp: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basis: list[VarStatus] | None = None
    iterations: int = 0
    basis_cols: np.ndarray | None = None
    col_status: np.ndarray | None = None
    binv: np.ndarray | None = None


@dataclass
class SolveResult:
    z_star: float | None
    x_star: np.ndarray | None
    node_count: int
    event_log: list
    proof: Proof
    incumbent_history: list[tuple[int, float]] = field(default_factory=list)


def validate(instance: MilpInstance) -> list[str]:
    """All invariant violations, empty when the instance is well formed.

    Reports and never raises; each message names the offending field + index.
    """
    out: list[str] = []
    n = instance.num_vars

    overlap = instance.integer_set & instance.continuous_set
    for j in sorted(overlap):
        out.append(f"partition overlap at {j}")
    missing = set(range(n)) - (instance.integer_set | instance.continuous_set)
    for j in sorted(missing):
        out.append(f"partition missing {j}")
    for j in sorted(instance.integer_set | instance.continuous_set):
        if j < 0 or j >= n:
            out.append(f"variable index out of range {j}")

    for i in range(instance.num_cons):
        idx, coef = instance.row(i)
        if len(idx) == 0 or not np.any(coef != 0.0):
            out.append(f"empty row {i}")
        if len(coef) and not np.all(np.isfinite(coef)):
            out.append(f"non-finite coefficient in row {i}")

    if not np.all(np.isfinite(instance.obj)):
        for j in np.nonzero(~np.isfinite(instance.obj))[0]:
            out.append(f"non-finite objective at {int(j)}")
    if not np.all(np.isfinite(instance.rhs)):
        for i in np.nonzero(~np.isfinite(instance.rhs))[0]:
            out.append(f"non-finite rhs {int(i)}")

    for j in range(n):
        lo, hi = instance.var_lower[j], instance.var_upper[j]
        if math.isnan(lo) or math.isnan(hi):
            out.append(f"NaN bound at {j}")
        elif lo > hi:
            out.append(f"bound order at {j}")
    return out


def negate_to_min(instance: MilpInstance) -> MilpInstance:
    """Flip the objective sign and toggle ``maximize_origin``.

    Applying twice restores the original objective.  Downstream code keeps all
    values in the stored min form; only user-facing report formatting
    re-negates when ``maximize_origin`` is set.
    """
    return MilpInstance(
        name=instance.name,
        obj=-instance.obj,
        rows=instance.rows_as_pairs(),
        rhs=instance.rhs,
        integer_set=instance.integer_set,
        var_lower=instance.var_lower,
        var_upper=instance.var_upper,
        continuous_set=instance.continuous_set,
        maximize_origin=not instance.maximize_origin,
    )


def instance_to_doc(instance: MilpInstance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "name": instance.name,
        "n": instance.num_vars,
        "m": instance.num_cons,
        "obj": [fmt_float(v) for v in instance.obj],
        "rows": [[[j, fmt_float(a)] for j, a in row] for row in instance.rows_as_pairs()],
        "rhs": [fmt_float(v) for v in instance.rhs],
        "integer_set": sorted(instance.integer_set),
        "bounds": [[fmt_float(lo), fmt_float(hi)]
                   for lo, hi in zip(instance.var_lower, instance.var_upper)],
        "maximize_origin": instance.maximize_origin,
    }


def instance_from_doc(doc: dict) -> MilpInstance:
    return MilpInstance(
        name=doc["name"],
        obj=[float(v) for v in doc["obj"]],
        rows=[[(int(j), float(a)) for j, a in row] for row in doc["rows"]],
        rhs=[float(v) for v in doc["rhs"]],
        integer_set=doc["integer_set"],
        var_lower=[float(lo) for lo, _ in doc["bounds"]],
        var_upper=[float(hi) for _, hi in doc["bounds"]],
        maximize_origin=doc["maximize_origin"],
    )


def write_instance(instance: MilpInstance, path: str | Path) -> None:
    atomic_write_text(path, canonical_dumps(instance_to_doc(instance)) + "\n")


def read_instance(path: str | Path) -> MilpInstance:
    return instance_from_doc(load_json(path, INSTANCE_FORMAT))


def user_facing_objective(instance: MilpInstance, z: float | None) -> float | None:
    """Report-space objective: re-negated for instances ingested from max form."""
    if z is None:
        return None
    return -z if instance.maximize_origin else z
