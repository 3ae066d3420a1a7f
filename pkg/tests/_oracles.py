"""Independent reference computations used as test oracles.

Everything here is deliberately brute-force and shares no code with the
implementations it checks.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def brute_force_binary_milp(instance) -> tuple[float | None, np.ndarray | None]:
    """Exhaustive optimum of a pure-binary min instance (None if infeasible)."""
    n = instance.num_vars
    assert instance.integer_set == frozenset(range(n)), "oracle handles pure binary only"
    assert np.all(instance.var_lower == 0.0) and np.all(instance.var_upper == 1.0)
    a = instance.dense_matrix()
    best, best_x = None, None
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.array(bits)
        if instance.num_cons and np.any(a @ x < instance.rhs - 1e-9):
            continue
        z = float(instance.obj @ x)
        if best is None or z < best - 1e-12:
            best, best_x = z, x
    return best, best_x


def vertex_enumeration_lp(c: np.ndarray, a: np.ndarray, b: np.ndarray,
                          upper: np.ndarray | None = None) -> float | None:
    """Minimum of c.x over {A x >= b, 0 <= x (<= upper)} by vertex enumeration.

    Assumes the feasible set is nonempty and the minimum is attained (use
    c > 0 or finite upper bounds when generating test problems).  Returns the
    optimal objective, or None if no feasible vertex exists.
    """
    m, n = a.shape
    # constraint rows in >= form: [A | b], x_j >= 0 rows, optionally -x_j >= -u
    rows = [(-a[i], -b[i]) for i in range(m)]  # as <=: -A x <= -b
    for j in range(n):
        e = np.zeros(n)
        e[j] = -1.0
        rows.append((e, 0.0))  # -x_j <= 0
    if upper is not None:
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append((e, float(upper[j])))  # x_j <= u_j
    lhs = np.array([r[0] for r in rows])
    rhs = np.array([r[1] for r in rows])

    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        sub = lhs[list(combo)]
        try:
            x = np.linalg.solve(sub, rhs[list(combo)])
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        if np.any(lhs @ x > rhs + 1e-7):
            continue
        z = float(c @ x)
        if best is None or z < best:
            best = z
    return best


def least_squares_slope(values) -> float:
    """Closed-form slope of values against 0..len-1 via the normal equations."""
    k = np.arange(len(values), dtype=float)
    v = np.asarray(values, dtype=float)
    kbar, vbar = k.mean(), v.mean()
    denom = float(((k - kbar) ** 2).sum())
    if denom == 0.0:
        return 0.0
    return float(((k - kbar) * (v - vbar)).sum() / denom)


def reference_splitmix64_stream(seed: int, count: int) -> list[int]:
    """Transliteration of the reference splitmix64 algorithm."""
    mask = (1 << 64) - 1
    out = []
    x = seed & mask
    for _ in range(count):
        x = (x + 0x9E3779B97F4A7C15) & mask
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out
