"""Seeded benchmark instance generators: set covering, combinatorial auctions, GISP.

All generators are pure functions of their configuration: the same arguments
produce byte-identical instances.  Auctions and GISP are natively maximization
problems and are stored negated (min form, ``maximize_origin=True``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import MilpInstance
from .rng import Rng, derive_seed

FAMILIES = ("set_covering", "comb_auction", "gisp", "mixed")

FAMILY_ALIASES = {
    "sc": "set_covering", "setcover": "set_covering", "set_covering": "set_covering",
    "ca": "comb_auction", "auction": "comb_auction", "comb_auction": "comb_auction",
    "gisp": "gisp",
    "mixed": "mixed",
}

# Sizes the in-repo branch-and-bound engine solves in roughly a second while
# still needing well over a hundred nodes on typical draws.
DESK_SCALE = {
    "set_covering": {"rows": 80, "cols": 160, "density": 0.05},
    "comb_auction": {"items": 40, "bids": 200},
    "gisp": {"graph_nodes": 22, "edge_prob": 0.6, "alpha": 0.75},
}

# Full-scale reference configuration (not used by the desk experiments).
PAPER_SCALE = {
    "set_covering": {"rows": 750, "cols": 1000, "density": 0.05},
    "comb_auction": {"items": 200, "bids": 1000},
    "gisp": {"graph_nodes": 80, "edge_prob": 0.6, "alpha": 0.75},
}

# Random-walk continuation probability for auction bundle growth.
_BUNDLE_GROW_PROB = 0.7


class ConfigError(ValueError):
    """Generator configuration cannot produce a well-formed instance."""


@dataclass
class GenConfig:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        self.family = FAMILY_ALIASES.get(self.family, self.family)
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")


def resolve_family(name: str) -> str:
    try:
        return FAMILY_ALIASES[name]
    except KeyError:
        raise ConfigError(f"unknown family {name!r}") from None


def gen_set_covering(rows: int, cols: int, density: float, seed: int,
                     name: str | None = None) -> MilpInstance:
    """Balas-Ho style set covering: Bernoulli membership plus a repair pass.

    Every row ends up covered by at least two columns and every column covers
    at least one row; costs are uniform integers in [1, 100].
    """
    if rows < 1 or cols < 1:
        raise ConfigError("rows and cols must be >= 1")
    if not 0.0 < density < 1.0:
        raise ConfigError("density must be in (0, 1)")
    if cols < 2:
        raise ConfigError("fewer than two columns cannot guarantee double coverage")

    rng = Rng(seed)
    costs = [rng.randint(1, 100) for _ in range(cols)]

    covers: list[set[int]] = [set() for _ in range(rows)]  # row -> columns
    for i in range(rows):
        for j in range(cols):
            if rng.random() < density:
                covers[i].add(j)

    for i in range(rows):  # repair rows covered by fewer than two columns
        while len(covers[i]) < 2:
            j = rng.randrange(cols)
            covers[i].add(j)

    col_used = [False] * cols
    for i in range(rows):
        for j in covers[i]:
            col_used[j] = True
    for j in range(cols):  # repair columns covering nothing
        if not col_used[j]:
            covers[rng.randrange(rows)].add(j)

    instance_rows = [[(j, 1.0) for j in sorted(covers[i])] for i in range(rows)]
    return MilpInstance(
        name=name or f"sc-{seed & 0xFFFFFFFFFFFFFFFF:016x}",
        obj=[float(c) for c in costs],
        rows=instance_rows,
        rhs=[1.0] * rows,
        integer_set=range(cols),
        var_lower=[0.0] * cols,
        var_upper=[1.0] * cols,
    )


def gen_comb_auction(items: int, bids: int, seed: int,
                     name: str | None = None) -> MilpInstance:
    """Set-packing auction with bundles grown by weighted random walks.

    Items carry common values in [1, 100]; a symmetric compatibility graph with
    uniform random edge weights steers bundle growth.  Each bid's price is a
    uniform [0.5, 1.5] multiple of its bundle's total common value, so bundles
    can be worth more than their parts and the packing is nontrivial.  Stored
    negated in min form.
    """
    if items < 1 or bids < 1:
        raise ConfigError("items and bids must be >= 1")

    rng = Rng(seed)
    values = [rng.uniform(1.0, 100.0) for _ in range(items)]
    compat = [[0.0] * items for _ in range(items)]
    for i in range(items):
        for k in range(i + 1, items):
            w = rng.random()
            compat[i][k] = w
            compat[k][i] = w

    bundles: list[set[int]] = []
    for _ in range(bids):
        current = rng.randrange(items)
        bundle = {current}
        while len(bundle) < items and rng.random() < _BUNDLE_GROW_PROB:
            candidates = [k for k in range(items) if k not in bundle]
            weights = [compat[current][k] for k in candidates]
            if sum(weights) <= 0.0:
                break
            current = candidates[rng.weighted_index(weights)]
            bundle.add(current)
        bundles.append(bundle)

    covered = set().union(*bundles) if bundles else set()
    for i in range(items):  # every item must appear in some bid
        if i not in covered:
            bundles[rng.randrange(bids)].add(i)

    prices = [rng.uniform(0.5, 1.5) * sum(values[i] for i in bundle)
              for bundle in bundles]

    rows = []
    for i in range(items):
        rows.append([(b, -1.0) for b in range(bids) if i in bundles[b]])
    return MilpInstance(
        name=name or f"ca-{seed & 0xFFFFFFFFFFFFFFFF:016x}",
        obj=[-p for p in prices],
        rows=rows,
        rhs=[-1.0] * items,
        integer_set=range(bids),
        var_lower=[0.0] * bids,
        var_upper=[1.0] * bids,
        maximize_origin=True,
    )


def gen_gisp(graph_nodes: int, p: float, alpha: float, seed: int,
             name: str | None = None) -> MilpInstance:
    """Generalized independent set on an Erdos-Renyi graph.

    Select nodes for uniform integer revenues in [1, 100]; each edge is
    removable with probability alpha at a uniform integer cost in [1, 100].
    Rows are x_u + x_v <= 1 (permanent) or x_u + x_v - y_e <= 1 (removable),
    stored negated in min form.
    """
    if graph_nodes < 2:
        raise ConfigError("graph_nodes must be >= 2")
    if not 0.0 < p < 1.0 or not 0.0 < alpha < 1.0:
        raise ConfigError("p and alpha must be in (0, 1)")

    rng = Rng(seed)
    revenues = [rng.randint(1, 100) for _ in range(graph_nodes)]

    edges: list[tuple[int, int, bool]] = []  # (u, v, removable)
    for u in range(graph_nodes):
        for v in range(u + 1, graph_nodes):
            if rng.random() < p:
                edges.append((u, v, rng.random() < alpha))

    removable = [(u, v) for u, v, rem in edges if rem]
    edge_costs = [rng.randint(1, 100) for _ in removable]
    y_index = {e: graph_nodes + k for k, e in enumerate(removable)}

    obj = [-float(r) for r in revenues] + [float(c) for c in edge_costs]
    rows = []
    for u, v, rem in edges:
        row = [(u, -1.0), (v, -1.0)]
        if rem:
            row.append((y_index[(u, v)], 1.0))
        rows.append(row)

    n = graph_nodes + len(removable)
    return MilpInstance(
        name=name or f"gisp-{seed & 0xFFFFFFFFFFFFFFFF:016x}",
        obj=obj,
        rows=rows,
        rhs=[-1.0] * len(edges),
        integer_set=range(n),
        var_lower=[0.0] * n,
        var_upper=[1.0] * n,
        maximize_origin=True,
    )


def generate(config: GenConfig, name: str | None = None) -> MilpInstance:
    """Dispatch a single-instance generation from a GenConfig."""
    p = config.params
    if config.family == "set_covering":
        return gen_set_covering(p["rows"], p["cols"], p["density"], config.seed, name)
    if config.family == "comb_auction":
        return gen_comb_auction(p["items"], p["bids"], config.seed, name)
    if config.family == "gisp":
        return gen_gisp(p["graph_nodes"], p["edge_prob"], p["alpha"], config.seed, name)
    raise ConfigError(f"generate() does not handle family {config.family!r}")


def gen_mixed(count: int, family_params: dict[str, dict], seed: int,
              name_prefix: str = "mixed") -> list[MilpInstance]:
    """Equal thirds of the three families, shuffled deterministically by seed."""
    if count % 3 != 0:
        raise ConfigError("mixed count must be divisible by 3")
    per = count // 3
    instances: list[MilpInstance] = []
    for fam_idx, family in enumerate(("set_covering", "comb_auction", "gisp")):
        params = family_params.get(family) or DESK_SCALE[family]
        for k in range(per):
            sub_seed = derive_seed(seed, fam_idx, k)
            cfg = GenConfig(family=family, params=params, seed=sub_seed)
            instances.append(generate(cfg))
    order = list(range(count))
    Rng(derive_seed(seed, 0xD5)).shuffle(order)
    shuffled = [instances[i] for i in order]
    for k, inst in enumerate(shuffled):
        inst.name = f"{name_prefix}-{seed & 0xFFFFFFFFFFFFFFFF:016x}-{k:04d}-{inst.name}"
    return shuffled


def family_of_instance(instance: MilpInstance) -> str:
    """Family tag recovered from the generated instance name."""
    base = instance.name.split("-")
    for token in base:
        if token in ("sc", "ca", "gisp"):
            return {"sc": "set_covering", "ca": "comb_auction", "gisp": "gisp"}[token]
    raise ValueError(f"no family tag in instance name {instance.name!r}")
