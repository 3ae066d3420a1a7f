"""LP-based branch-and-bound with full event instrumentation.

The engine maintains the open/inner/leaf node sets, incumbent and global
bound, pseudocost-based node estimates, and emits an ordered event stream
(one group of events per processed node) that downstream feature extraction
can replay exactly.  Time is the processed-node count, which keeps runs
hardware independent.

Node selection is best-bound (ties: deeper node, then lower id) and branching
is most-fractional (ties: lowest index).  The randomization seed only affects
which child of a branching gets the lower id and the threshold used by one
rounding attempt of the internal primal heuristic; both change exploration
order the way solver randomization seeds do without touching the documented
selection and branching rules.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._ioutil import atomic_write_text, canonical_dumps, load_json
from .model import (
    LpSolution,
    LpStatus,
    MilpInstance,
    Proof,
    SolveResult,
    validate,
)
from .rng import Rng, derive_seed
from .simplex import BoundSet, LpWorkspace, resolve_from_basis, solve_lp

EVENT_LOG_FORMAT = "bnblog-v1"

PRUNE_REL_TOL = 1e-9
INT_TOL = 1e-6
HEURISTIC_PERIOD = 10


class InfeasibleInstance(RuntimeError):
    """The tree was exhausted without finding any feasible solution."""


class NoFractionalVariable(RuntimeError):
    """branch() was called on an integer-feasible LP solution."""


class LeafReason(Enum):
    PRUNED_BY_BOUND = "bound"
    INFEASIBLE = "infeasible"
    INTEGER_FEASIBLE = "integer"


class NodeStatus(Enum):
    OPEN = "open"
    INNER = "inner"
    LEAF = "leaf"


@dataclass(slots=True)
class Node:
    id: int
    parent_id: int | None
    depth: int
    bounds: BoundSet
    bound: float  # inherited parent LP bound (z^LP once processed)
    estimate: float
    status: NodeStatus = NodeStatus.OPEN
    leaf_reason: LeafReason | None = None
    warm: LpSolution | None = None
    branch_var: int | None = None
    branch_up: bool | None = None
    branch_frac: float | None = None


@dataclass(slots=True)
class TreeEvent:
    t: int
    kind: str  # processed | branched | pruned | incumbent | finished
    payload: dict


@dataclass
class SolveParams:
    node_limit: int = 200_000
    time_limit: float | None = None
    seed: int = 0


class Pseudocosts:
    """Running average objective degradation per unit bound change.

    Uninitialized entries fall back to |c_j|.
    """

    def __init__(self, instance: MilpInstance) -> None:
        n = instance.num_vars
        self.fallback = np.abs(instance.obj)
        self.up_mean = np.zeros(n)
        self.up_count = np.zeros(n, dtype=np.int64)
        self.down_mean = np.zeros(n)
        self.down_count = np.zeros(n, dtype=np.int64)

    def value(self, j: int, up: bool) -> float:
        mean, count = ((self.up_mean, self.up_count) if up
                       else (self.down_mean, self.down_count))
        return float(mean[j]) if count[j] > 0 else float(self.fallback[j])

    def update(self, j: int, up: bool, delta_z: float, delta_bound: float) -> None:
        if delta_bound <= 0:
            raise ValueError("delta_bound must be positive")
        ratio = max(0.0, delta_z) / delta_bound
        mean, count = ((self.up_mean, self.up_count) if up
                       else (self.down_mean, self.down_count))
        count[j] += 1
        mean[j] += (ratio - mean[j]) / count[j]


def update_pseudocosts(pc: Pseudocosts, j: int, up: bool,
                       delta_z: float, delta_bound: float) -> Pseudocosts:
    pc.update(j, up, delta_z, delta_bound)
    return pc


def node_estimate(z_lp_parent: float, frac_values: list[tuple[int, float]],
                  pc: Pseudocosts) -> float:
    """Pseudocost best-estimate: parent bound plus cheapest rounding per variable."""
    total = 0.0
    for j, f in frac_values:
        total += min(pc.value(j, up=False) * f, pc.value(j, up=True) * (1.0 - f))
    return z_lp_parent + total


def fractional_entries(instance: MilpInstance, x: np.ndarray,
                       tol: float = INT_TOL) -> list[tuple[int, float]]:
    """(index, fractional part) for integer variables off their nearest integer."""
    out = []
    for j in sorted(instance.integer_set):
        f = x[j] - math.floor(x[j])
        if min(f, 1.0 - f) > tol:
            out.append((j, f))
    return out


def rounding_heuristic(lp: LpSolution, instance: MilpInstance) -> np.ndarray | None:
    """Round integer variables to nearest; on failure try rounding down.

    Returns a feasible point or None.  The floor fallback keeps packing-style
    instances (nonpositive row coefficients) always round-able.
    """
    if lp.status is not LpStatus.OPTIMAL:
        return None
    for rounder in (round, math.floor):
        x = lp.x.copy()
        for j in instance.integer_set:
            x[j] = float(np.clip(rounder(x[j]),
                                 instance.var_lower[j], instance.var_upper[j]))
        if instance.is_feasible(x):
            return x
    return None


def _threshold_round(lp: LpSolution, instance: MilpInstance, threshold: float,
                     node_bounds: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    lower, upper = node_bounds
    x = lp.x.copy()
    for j in instance.integer_set:
        f = x[j] - math.floor(x[j])
        v = math.floor(x[j]) + (1.0 if f >= threshold else 0.0)
        x[j] = float(np.clip(v, lower[j], upper[j]))
    return x


class TreeState:
    """Live search state: node sets, bounds, incumbent, estimate minima."""

    def __init__(self, instance: MilpInstance) -> None:
        self.instance = instance
        self.t = 0
        self.nodes: dict[int, Node] = {}
        self.open_heap: list[tuple[float, int, int]] = []  # (bound, -depth, id)
        self.open_ids: set[int] = set()
        self.estimate_heap: list[tuple[float, int]] = []  # lazy-deleted
        self.inner_count = 0
        self.leaf_count = 0
        self.created = 0
        self.incumbent_z: float | None = None
        self.incumbent_x: np.ndarray | None = None
        self.first_incumbent_z: float | None = None
        self.z_lp_root: float | None = None
        self.min_processed_estimate: dict[int, float] = {}
        self.omega = Fraction(0)
        self.cmin_history: list[float] = []
        self.open_count_history: list[int] = []
        self.incumbent_history: list[tuple[int, float]] = []

    # -- open set ----------------------------------------------------------

    def add_open(self, node: Node) -> None:
        self.nodes[node.id] = node
        self.open_ids.add(node.id)
        heapq.heappush(self.open_heap, (node.bound, -node.depth, node.id))
        heapq.heappush(self.estimate_heap, (node.estimate, node.id))
        self.created += 1

    def peek_best(self) -> int:
        return self.open_heap[0][2]

    def pop_best(self) -> Node:
        _, _, node_id = heapq.heappop(self.open_heap)
        self.open_ids.discard(node_id)
        return self.nodes[node_id]

    def open_count(self) -> int:
        return len(self.open_ids)

    def open_bounds(self) -> list[float]:
        return [entry[0] for entry in self.open_heap]

    def z_lower(self) -> float:
        return self.open_heap[0][0] if self.open_heap else math.inf

    def cmin(self) -> float:
        while self.estimate_heap and self.estimate_heap[0][1] not in self.open_ids:
            heapq.heappop(self.estimate_heap)
        return self.estimate_heap[0][0] if self.estimate_heap else math.inf

    # -- processed sets ------------------------------------------------------

    def close_leaf(self, node: Node, reason: LeafReason) -> None:
        node.status = NodeStatus.LEAF
        node.leaf_reason = reason
        self.leaf_count += 1
        self.omega += Fraction(1, 2 ** node.depth)
        self._note_processed_estimate(node)

    def mark_inner(self, node: Node) -> None:
        node.status = NodeStatus.INNER
        self.inner_count += 1
        self._note_processed_estimate(node)

    def _note_processed_estimate(self, node: Node) -> None:
        cur = self.min_processed_estimate.get(node.depth, math.inf)
        if node.estimate < cur:
            self.min_processed_estimate[node.depth] = node.estimate

    def omega_float(self) -> float:
        return float(self.omega)

    def set_incumbent(self, t: int, z: float, x: np.ndarray) -> bool:
        if self.incumbent_z is not None and z >= self.incumbent_z:
            return False
        self.incumbent_z = z
        self.incumbent_x = x.copy()
        if self.first_incumbent_z is None:
            self.first_incumbent_z = z
        self.incumbent_history.append((t, z))
        return True


def select_node(state: TreeState) -> int:
    """Best-bound open node; ties to greater depth, then lower id."""
    if not state.open_heap:
        raise ValueError("no open nodes")
    return state.peek_best()


def branch(node: Node, lp: LpSolution, instance: MilpInstance, pc: Pseudocosts,
           id_down: int, id_up: int) -> tuple[Node, Node]:
    """Split on the most fractional variable (ties: lowest index)."""
    fracs = fractional_entries(instance, lp.x)
    if not fracs:
        raise NoFractionalVariable(f"node {node.id} has an integral LP solution")
    j_star, f_star = max(fracs, key=lambda jf: (min(jf[1], 1.0 - jf[1]), -jf[0]))
    est = node_estimate(lp.z_lp, fracs, pc)
    lower, upper = node.bounds.apply(instance)
    value = lp.x[j_star]
    down = Node(
        id=id_down, parent_id=node.id, depth=node.depth + 1,
        bounds=node.bounds.child(j_star, lower[j_star], math.floor(value)),
        bound=lp.z_lp, estimate=est, warm=lp,
        branch_var=j_star, branch_up=False, branch_frac=f_star,
    )
    up = Node(
        id=id_up, parent_id=node.id, depth=node.depth + 1,
        bounds=node.bounds.child(j_star, math.ceil(value), upper[j_star]),
        bound=lp.z_lp, estimate=est, warm=lp,
        branch_var=j_star, branch_up=True, branch_frac=f_star,
    )
    return down, up


class Observer:
    """Callbacks a collector can attach to a run; default does nothing."""

    def on_root_lp(self, state: TreeState, lp: LpSolution) -> None:  # noqa: B027
        pass

    def on_node(self, state: TreeState, events: list[TreeEvent]) -> None:  # noqa: B027
        pass

    def on_finished(self, state: TreeState, result: SolveResult) -> None:  # noqa: B027
        pass


def _prune_threshold(z_bar: float) -> float:
    return z_bar - PRUNE_REL_TOL * (1.0 + abs(z_bar))


def _drop_warm(ws: LpWorkspace, node: Node) -> None:
    """Release the parent solution's cached inverse once both children used it."""
    warm = node.warm
    node.warm = None
    if warm is None:
        return
    users = getattr(warm, "_warm_users", 1) - 1
    warm._warm_users = users
    if users <= 0:
        ws.release_binv(warm)


def solve(instance: MilpInstance, params: SolveParams | None = None,
          observer: Observer | None = None) -> SolveResult:
    """Run branch-and-bound to optimality or a limit; returns the full event log."""
    params = params or SolveParams()
    problems = validate(instance)
    if problems:
        raise ValueError(f"invalid instance: {problems}")

    ws = LpWorkspace(instance)
    rng = Rng(derive_seed(params.seed, 0xB0B))
    pc = Pseudocosts(instance)
    state = TreeState(instance)
    events: list[TreeEvent] = []

    root = Node(id=0, parent_id=None, depth=0, bounds=BoundSet(),
                bound=-math.inf, estimate=math.inf)
    state.add_open(root)

    start = time.monotonic()
    proof = Proof.OPTIMALITY_PROVED
    while state.open_heap:
        if state.t >= params.node_limit:
            proof = Proof.NODE_LIMIT
            break
        if params.time_limit is not None and time.monotonic() - start > params.time_limit:
            proof = Proof.TIME_LIMIT
            break

        node = state.pop_best()
        state.t += 1
        t = state.t
        group: list[TreeEvent] = []
        incumbent_event: TreeEvent | None = None

        prunable_by_parent = (
            state.incumbent_z is not None
            and node.bound >= _prune_threshold(state.incumbent_z)
        )
        if prunable_by_parent:
            _drop_warm(ws, node)
            state.close_leaf(node, LeafReason.PRUNED_BY_BOUND)
            status_str, z_lp = "leaf_bound", None
            group.append(TreeEvent(t, "pruned", {"node": node.id, "reason": "bound"}))
        else:
            lp = (resolve_from_basis(instance, node.warm, node.bounds, workspace=ws)
                  if node.warm is not None
                  else solve_lp(instance, node.bounds, workspace=ws))
            _drop_warm(ws, node)
            if node.id == 0 and observer is not None:
                observer.on_root_lp(state, lp)

            if lp.status is not LpStatus.OPTIMAL:
                ws.release_binv(lp)
                state.close_leaf(node, LeafReason.INFEASIBLE)
                status_str, z_lp = "leaf_infeasible", None
                group.append(TreeEvent(t, "pruned",
                                       {"node": node.id, "reason": "infeasible"}))
            else:
                z_lp = lp.z_lp
                node.bound = z_lp
                if node.id == 0:
                    state.z_lp_root = z_lp
                if node.branch_var is not None:
                    dbound = (1.0 - node.branch_frac) if node.branch_up else node.branch_frac
                    pc.update(node.branch_var, node.branch_up,
                              z_lp - state.nodes[node.parent_id].bound, dbound)

                fracs = fractional_entries(instance, lp.x)
                if node.id == 0:
                    node.estimate = node_estimate(z_lp, fracs, pc)

                if (state.incumbent_z is not None
                        and z_lp >= _prune_threshold(state.incumbent_z)):
                    state.close_leaf(node, LeafReason.PRUNED_BY_BOUND)
                    status_str = "leaf_bound"
                    group.append(TreeEvent(t, "pruned",
                                           {"node": node.id, "reason": "bound"}))
                    ws.release_binv(lp)
                elif not fracs:
                    ws.release_binv(lp)
                    state.close_leaf(node, LeafReason.INTEGER_FEASIBLE)
                    status_str = "leaf_integer"
                    # snap integer variables so incumbents carry no LP dust
                    x_exact = lp.x.copy()
                    for j in instance.integer_set:
                        x_exact[j] = float(round(x_exact[j]))
                    z_exact = float(instance.obj @ x_exact)
                    if state.set_incumbent(t, z_exact, x_exact):
                        incumbent_event = TreeEvent(
                            t, "incumbent",
                            {"z": state.incumbent_z, "node": node.id, "source": "lp"})
                else:
                    if t == 1 or t % HEURISTIC_PERIOD == 0:
                        cand = _run_heuristic(lp, instance, node, rng)
                        if cand is not None:
                            z_cand = float(instance.obj @ cand)
                            if state.set_incumbent(t, z_cand, cand):
                                incumbent_event = TreeEvent(
                                    t, "incumbent",
                                    {"z": z_cand, "node": node.id,
                                     "source": "heuristic"})
                    nid = state.created
                    up_first = rng.random() < 0.5
                    ids = (nid + 1, nid) if up_first else (nid, nid + 1)
                    down, up = branch(node, lp, instance, pc, ids[0], ids[1])
                    lp._warm_users = 2  # children release the cached basis inverse
                    state.mark_inner(node)
                    status_str = "inner"
                    for child in sorted((down, up), key=lambda c: c.id):
                        state.add_open(child)
                    group.append(TreeEvent(t, "branched", {
                        "node": node.id, "var": down.branch_var,
                        "frac": down.branch_frac, "down": down.id, "up": up.id,
                        "child_estimate": down.estimate, "child_bound": z_lp,
                    }))

        processed = TreeEvent(t, "processed", {
            "node": node.id, "depth": node.depth, "parent": node.parent_id,
            "bound": None if math.isinf(node.bound) else node.bound,
            "z_lp": z_lp, "status": status_str, "estimate": _json_float(node.estimate),
            "n_open": state.open_count(),
        })
        group.insert(0, processed)
        if incumbent_event is not None:
            group.insert(1, incumbent_event)

        state.cmin_history.append(state.cmin())
        state.open_count_history.append(state.open_count())
        events.extend(group)
        if observer is not None:
            observer.on_node(state, group)

    if proof is Proof.OPTIMALITY_PROVED and state.incumbent_z is None:
        raise InfeasibleInstance(instance.name)

    finished = TreeEvent(state.t, "finished", {
        "proof": proof.value,
        "z_star": state.incumbent_z,
        "node_count": state.t,
        "omega": state.omega_float(),
    })
    events.append(finished)
    result = SolveResult(
        z_star=state.incumbent_z,
        x_star=state.incumbent_x,
        node_count=state.t,
        event_log=events,
        proof=proof,
        incumbent_history=list(state.incumbent_history),
    )
    if observer is not None:
        observer.on_finished(state, result)
    return result


def _run_heuristic(lp: LpSolution, instance: MilpInstance, node: Node,
                   rng: Rng) -> np.ndarray | None:
    """Primal heuristic: nearest rounding plus floor/ceil/seeded-threshold attempts.

    Floor keeps packing-style rows feasible, ceil keeps covering-style rows
    feasible; the random threshold varies trajectories across seeds.  Returns
    the best feasible attempt, if any.
    """
    node_bounds = node.bounds.apply(instance)
    attempts = []
    nearest = rounding_heuristic(lp, instance)
    if nearest is not None:
        attempts.append(nearest)
    theta = rng.uniform(0.25, 0.75)
    for threshold in (1.0 - 1e-9, 1e-9, theta):  # floor, ceil, seeded
        cand = _threshold_round(lp, instance, threshold, node_bounds)
        if instance.is_feasible(cand):
            attempts.append(cand)
    if not attempts:
        return None
    scores = [float(instance.obj @ x) for x in attempts]
    return attempts[int(np.argmin(scores))]


def _json_float(v: float) -> float | None:
    return None if math.isinf(v) or math.isnan(v) else v


# -- event log files ---------------------------------------------------------


def write_event_log(path: str | Path, instance_name: str, params: SolveParams,
                    events: list[TreeEvent], config_hash: str = "") -> None:
    header = {
        "format": EVENT_LOG_FORMAT,
        "instance": instance_name,
        "seed": params.seed,
        "node_limit": params.node_limit,
        "config_hash": config_hash,
    }
    lines = [canonical_dumps(header)]
    for ev in events:
        lines.append(canonical_dumps({"t": ev.t, "kind": ev.kind, **ev.payload}))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_event_log(path: str | Path) -> tuple[dict, list[TreeEvent]]:
    import json

    with open(path) as fh:
        lines = fh.read().splitlines()
    header = json.loads(lines[0])
    if header.get("format") != EVENT_LOG_FORMAT:
        raise ValueError(f"{path}: not a {EVENT_LOG_FORMAT} file")
    events = []
    for line in lines[1:]:
        rec = json.loads(line)
        t = rec.pop("t")
        kind = rec.pop("kind")
        events.append(TreeEvent(t, kind, rec))
    return header, events
