"""Dynamic solve-progress features and the sample collection protocol.

Five metrics summarize a running branch-and-bound search: the incumbent/bound
gap, the tree weight, the median gap to open-node bounds, the trend of the
open-node count, and the ratio of the predicted optimal objective to the
incumbent.  A collector samples them during (or by replaying) a run, and each
sample is labeled post-solve with whether the incumbent was already optimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from ._ioutil import atomic_write_text, canonical_dumps
from .bnb import Observer, SolveParams, TreeEvent, solve
from .model import MilpInstance, Proof, SolveResult
from .rng import Rng, derive_seed

SAMPLES_FORMAT = "dyn-v1"

GAP_EPS = 1e-9
TREND_WINDOW = 20  # h: trend uses |O_k| for k in {t-h .. t}
LABEL_REL_TOL = 1e-6

FEATURE_NAMES = ("gap", "tree_weight", "median_gap", "open_trend", "gnn_ratio")


class InsufficientHistory(ValueError):
    """Not enough open-count observations to fit a trend."""


class DegenerateIncumbent(ValueError):
    """Incumbent objective too close to zero for the prediction ratio."""


class CensoredRun(RuntimeError):
    """The run hit a limit before proving optimality; its samples are dropped."""


def gap(z_bar: float | None, z_lower: float) -> float:
    """Normalized incumbent/bound distance in [0, 1].

    1 with no incumbent or when the bounds straddle zero; 0 once the open set
    is exhausted (infinite lower bound means the search finished).
    """
    if z_bar is None:
        return 1.0
    if math.isinf(z_lower):
        return 0.0
    if z_bar * z_lower < 0.0:
        return 1.0
    return abs(z_bar - z_lower) / max(abs(z_bar), abs(z_lower), GAP_EPS)


def tree_weight(leaf_depths) -> float:
    """Sum of 2^-depth over leaves; 1 exactly for a completed binary tree."""
    total = Fraction(0)
    for d in leaf_depths:
        if d < 0:
            raise ValueError("negative depth")
        total += Fraction(1, 2 ** int(d))
    return float(total)


def median_gap(z_bar: float, open_lp_bounds, z_bar_first: float,
               z_lp_root: float) -> float:
    """Incumbent distance to the median open bound, scaled by first-incumbent gap.

    Empty open set uses the incumbent itself as the median (distance 0); a
    degenerate denominator (first incumbent equals the root LP) returns 0.
    """
    denom = abs(z_bar_first - z_lp_root)
    if denom <= 1e-9:
        return 0.0
    bounds = sorted(open_lp_bounds)
    if not bounds:
        m = z_bar
    else:
        k = len(bounds)
        if k % 2 == 1:
            m = bounds[k // 2]
        else:
            m = 0.5 * (bounds[k // 2 - 1] + bounds[k // 2])
    return abs(z_bar - m) / denom


def open_trend(window) -> float:
    """Least-squares slope of the open-node counts against their index."""
    values = list(window)
    if len(values) < 2:
        raise InsufficientHistory(f"need at least 2 observations, got {len(values)}")
    k_mean = (len(values) - 1) / 2.0
    v_mean = sum(values) / len(values)
    num = 0.0
    den = 0.0
    for k, v in enumerate(values):
        num += (k - k_mean) * (v - v_mean)
        den += (k - k_mean) ** 2
    return num / den


def gnn_ratio(f_pred: float, z_bar: float) -> float:
    """Predicted optimal objective over the incumbent objective."""
    if abs(z_bar) <= 1e-12:
        raise DegenerateIncumbent(f"incumbent {z_bar} too close to zero")
    return f_pred / z_bar


@dataclass
class DynamicSample:
    instance: str
    seed: int
    t: int
    gap: float
    tree_weight: float
    median_gap: float
    open_trend: float
    gnn_ratio: float
    z_bar: float
    z_star: float | None = None
    z_lp: float | None = None
    label: int | None = None

    def features(self) -> tuple[float, float, float, float, float]:
        return (self.gap, self.tree_weight, self.median_gap,
                self.open_trend, self.gnn_ratio)


@dataclass
class CollectParams:
    warmup: int = 100
    p_sample: float = 0.02
    seed: int = 0
    node_limit: int = 200_000


def _features_from_view(view, f_pred: float) -> tuple[float, ...]:
    """Shared feature computation for live state and log replay (bit identical)."""
    z_bar = view.incumbent_z
    g = gap(z_bar, view.z_lower())
    omega = view.omega_float()
    mu = median_gap(z_bar, view.open_bounds(), view.first_incumbent_z,
                    view.z_lp_root)
    window = view.open_count_history[-(TREND_WINDOW + 1):]
    tau = open_trend(window)
    rho = gnn_ratio(f_pred, z_bar)
    return g, omega, mu, tau, rho


class SampleCollector(Observer):
    """Attaches to a run; samples eligible nodes with probability p_sample.

    No samples are taken while t <= warmup or before an incumbent exists, so
    runs solved within the warmup produce none.  Samples with an incumbent too
    close to zero are discarded (counted in ``skipped``).
    """

    def __init__(self, instance: MilpInstance, f_pred: float,
                 params: CollectParams) -> None:
        self.instance = instance
        self.f_pred = f_pred
        self.params = params
        self.rng = Rng(derive_seed(params.seed, 0x5A11))
        self.partial: list[DynamicSample] = []
        self.skipped = 0
        self.z_lp_root: float | None = None

    def on_root_lp(self, state, lp) -> None:
        self.z_lp_root = lp.z_lp

    def on_node(self, state, events) -> None:
        if state.t <= self.params.warmup or state.incumbent_z is None:
            return
        if self.rng.random() >= self.params.p_sample:
            return
        try:
            feats = _features_from_view(state, self.f_pred)
        except DegenerateIncumbent:
            self.skipped += 1
            return
        self.partial.append(DynamicSample(
            instance=self.instance.name, seed=self.params.seed, t=state.t,
            gap=feats[0], tree_weight=feats[1], median_gap=feats[2],
            open_trend=feats[3], gnn_ratio=feats[4], z_bar=state.incumbent_z,
        ))

    def finalize(self, result: SolveResult) -> list[DynamicSample]:
        if result.proof is not Proof.OPTIMALITY_PROVED:
            raise CensoredRun(f"{self.instance.name}: proof={result.proof.value}")
        z_star = result.z_star
        for s in self.partial:
            s.z_star = z_star
            s.z_lp = self.z_lp_root
            s.label = int(abs(s.z_bar - z_star) <= LABEL_REL_TOL * (1.0 + abs(z_star)))
        return self.partial


def collect(instance: MilpInstance, f_pred: float,
            params: CollectParams | None = None) -> list[DynamicSample]:
    """Solve the instance live with an attached collector and label the samples.

    Raises CensoredRun when the node limit is hit before an optimality proof.
    """
    params = params or CollectParams()
    collector = SampleCollector(instance, f_pred, params)
    result = solve(instance, SolveParams(node_limit=params.node_limit,
                                         seed=params.seed), observer=collector)
    return collector.finalize(result)


class LogReplayer:
    """Reconstructs the tree-state view from an event log, node by node.

    Exposes the same attributes the live TreeState offers to feature code, so
    replayed features match live features bit for bit.
    """

    def __init__(self) -> None:
        self.t = 0
        self.open_info: dict[int, tuple[float, int, float]] = {
            0: (-math.inf, 0, math.inf)  # bound, depth, estimate
        }
        self.incumbent_z: float | None = None
        self.first_incumbent_z: float | None = None
        self.z_lp_root: float | None = None
        self.omega = Fraction(0)
        self.open_count_history: list[int] = []
        self.cmin_cache: float | None = None
        self.min_processed_estimate: dict[int, float] = {}
        self.proof: str | None = None
        self.z_star: float | None = None
        self.node_count: int | None = None
        self.final_omega: float | None = None

    # view API -----------------------------------------------------------

    def z_lower(self) -> float:
        if not self.open_info:
            return math.inf
        return min(b for b, _, _ in self.open_info.values())

    def open_bounds(self) -> list[float]:
        return [b for b, _, _ in self.open_info.values()]

    def omega_float(self) -> float:
        return float(self.omega)

    def cmin(self) -> float:
        if not self.open_info:
            return math.inf
        return min(e for _, _, e in self.open_info.values())

    def open_count(self) -> int:
        return len(self.open_info)

    # replay ----------------------------------------------------------------

    def apply_group(self, group: list[TreeEvent]) -> None:
        """Apply all events of one processed node (same t)."""
        processed_depth = 0
        has_processed = False
        for ev in group:
            if ev.kind == "processed":
                has_processed = True
                self.t = ev.t
                node_id = ev.payload["node"]
                self.open_info.pop(node_id, None)
                processed_depth = ev.payload["depth"]
                est = ev.payload["estimate"]
                est = math.inf if est is None else est
                if node_id == 0 and ev.payload["z_lp"] is not None:
                    self.z_lp_root = ev.payload["z_lp"]
                if ev.payload["status"].startswith("leaf"):
                    self.omega += Fraction(1, 2 ** processed_depth)
                cur = self.min_processed_estimate.get(processed_depth, math.inf)
                if est < cur:
                    self.min_processed_estimate[processed_depth] = est
            elif ev.kind == "branched":
                est = ev.payload["child_estimate"]
                bound = ev.payload["child_bound"]
                child_depth = processed_depth + 1
                self.open_info[ev.payload["down"]] = (bound, child_depth, est)
                self.open_info[ev.payload["up"]] = (bound, child_depth, est)
            elif ev.kind == "incumbent":
                self.incumbent_z = ev.payload["z"]
                if self.first_incumbent_z is None:
                    self.first_incumbent_z = ev.payload["z"]
            elif ev.kind == "finished":
                self.proof = ev.payload["proof"]
                self.z_star = ev.payload["z_star"]
                self.node_count = ev.payload["node_count"]
                self.final_omega = ev.payload["omega"]
        if has_processed:
            self.open_count_history.append(self.open_count())

    def apply(self, events: list[TreeEvent]):
        """Yield self after each processed-node group (events share a t per node)."""
        group: list[TreeEvent] = []
        for ev in events:
            if ev.kind == "processed" and group:
                self.apply_group(group)
                if any(e.kind == "processed" for e in group):
                    yield self
                group = []
            group.append(ev)
        if group:
            self.apply_group(group)
            if any(e.kind == "processed" for e in group):
                yield self


def collect_from_log(events: list[TreeEvent], instance_name: str, f_pred: float,
                     params: CollectParams | None = None) -> list[DynamicSample]:
    """Replay-based collection; identical output to a live collect with same seed."""
    params = params or CollectParams()
    rng = Rng(derive_seed(params.seed, 0x5A11))
    replayer = LogReplayer()
    partial: list[DynamicSample] = []
    for view in replayer.apply(events):
        if view.t <= params.warmup or view.incumbent_z is None:
            continue
        if rng.random() >= params.p_sample:
            continue
        try:
            feats = _features_from_view(view, f_pred)
        except DegenerateIncumbent:
            continue
        partial.append(DynamicSample(
            instance=instance_name, seed=params.seed, t=view.t,
            gap=feats[0], tree_weight=feats[1], median_gap=feats[2],
            open_trend=feats[3], gnn_ratio=feats[4], z_bar=view.incumbent_z,
        ))
    if replayer.proof != Proof.OPTIMALITY_PROVED.value:
        raise CensoredRun(f"{instance_name}: proof={replayer.proof}")
    for s in partial:
        s.z_star = replayer.z_star
        s.z_lp = replayer.z_lp_root
        s.label = int(abs(s.z_bar - replayer.z_star)
                      <= LABEL_REL_TOL * (1.0 + abs(replayer.z_star)))
    return partial


# -- sample files -------------------------------------------------------------


def write_samples(path: str | Path, samples: list[DynamicSample],
                  config_hash: str = "") -> None:
    header = {"format": SAMPLES_FORMAT, "config_hash": config_hash,
              "count": len(samples)}
    lines = [canonical_dumps(header)]
    for s in samples:
        lines.append(canonical_dumps({
            "instance": s.instance, "seed": s.seed, "t": s.t,
            "gap": s.gap, "tree_weight": s.tree_weight,
            "median_gap": s.median_gap, "open_trend": s.open_trend,
            "gnn_ratio": s.gnn_ratio, "z_bar": s.z_bar, "z_star": s.z_star,
            "z_lp": s.z_lp, "label": s.label,
        }))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_samples(path: str | Path) -> list[DynamicSample]:
    import json

    with open(path) as fh:
        lines = fh.read().splitlines()
    header = json.loads(lines[0])
    if header.get("format") != SAMPLES_FORMAT:
        raise ValueError(f"{path}: not a {SAMPLES_FORMAT} file")
    out = []
    for line in lines[1:]:
        rec = json.loads(line)
        out.append(DynamicSample(**rec))
    return out
