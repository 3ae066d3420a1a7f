import math

import numpy as np
import pytest

from milpscope.generators import gen_comb_auction, gen_gisp, gen_set_covering
from milpscope.model import LpStatus, MilpInstance, VarStatus
from milpscope.rng import Rng
from milpscope.simplex import BoundSet, LpWorkspace, resolve_from_basis, solve_lp

from _oracles import vertex_enumeration_lp


def lp_instance(obj, rows, rhs, upper=None, lower=None, name="lp"):
    n = len(obj)
    return MilpInstance(
        name=name, obj=obj, rows=rows, rhs=rhs, integer_set=[],
        var_lower=lower or [0.0] * n,
        var_upper=upper or [math.inf] * n,
    )


def random_lp(rng: Rng, n=8, m=6):
    """Feasible LP with positive costs (bounded below) and known interior point."""
    c = np.array([rng.uniform(0.1, 2.0) for _ in range(n)])
    a = np.array([[rng.uniform(-1.0, 1.0) for _ in range(n)] for _ in range(m)])
    x0 = np.array([rng.uniform(0.0, 3.0) for _ in range(n)])
    b = a @ x0 - np.array([rng.uniform(0.0, 2.0) for _ in range(m)])
    rows = [[(j, float(a[i, j])) for j in range(n)] for i in range(m)]
    inst = lp_instance(list(c), rows, list(b))
    return inst, c, a, b


class TestFixtures:
    def test_single_constraint_optimum_at_bound(self):
        # min -x s.t. -x >= -5, x >= 0
        inst = lp_instance([-1.0], [[(0, -1.0)]], [-5.0])
        sol = solve_lp(inst)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.z_lp == pytest.approx(-5.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(5.0, abs=1e-9)

    def test_contradictory_rows_infeasible(self):
        # x >= 3 and -x >= -2
        inst = lp_instance([1.0], [[(0, 1.0)], [(0, -1.0)]], [3.0, -2.0])
        sol = solve_lp(inst)
        assert sol.status is LpStatus.INFEASIBLE
        assert sol.x is None and sol.duals is None

    def test_unbounded_detected(self):
        inst = lp_instance([-1.0], [[(0, 1.0)]], [0.0])
        sol = solve_lp(inst)
        assert sol.status is LpStatus.UNBOUNDED

    def test_upper_bounds_respected(self):
        inst = lp_instance([-1.0, -1.0], [[(0, 1.0), (1, 1.0)]], [0.0],
                           upper=[1.0, 2.0])
        sol = solve_lp(inst)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.z_lp == pytest.approx(-3.0, abs=1e-9)

    def test_bound_overrides_encode_branching(self):
        inst = lp_instance([-1.0], [[(0, -1.0)]], [-5.0], upper=[10.0])
        sol = solve_lp(inst, BoundSet({0: (0.0, 2.0)}))
        assert sol.z_lp == pytest.approx(-2.0, abs=1e-9)

    def test_crossing_override_is_infeasible_instead_of_crash(self):
        inst = lp_instance([1.0], [[(0, 1.0)]], [0.0])
        with pytest.raises(ValueError):
            BoundSet({0: (3.0, 2.0)})


class TestAgainstVertexEnumeration:
    def test_random_lps_match_oracle(self):
        rng = Rng(2024)
        for trial in range(40):
            inst, c, a, b = random_lp(rng)
            sol = solve_lp(inst)
            assert sol.status is LpStatus.OPTIMAL, f"trial {trial}"
            expected = vertex_enumeration_lp(c, a, b)
            assert expected is not None
            assert sol.z_lp == pytest.approx(expected, abs=1e-6), f"trial {trial}"

    def test_box_bounded_lps_match_oracle(self):
        rng = Rng(77)
        for trial in range(25):
            n, m = 5, 4
            c = np.array([rng.uniform(-2.0, 2.0) for _ in range(n)])
            a = np.array([[rng.uniform(-1.0, 1.0) for _ in range(n)] for _ in range(m)])
            x0 = np.array([rng.uniform(0.0, 2.0) for _ in range(n)])
            b = a @ x0 - np.array([rng.uniform(0.0, 1.0) for _ in range(m)])
            upper = np.full(n, 2.5)
            rows = [[(j, float(a[i, j])) for j in range(n)] for i in range(m)]
            inst = lp_instance(list(c), rows, list(b), upper=list(upper))
            sol = solve_lp(inst)
            assert sol.status is LpStatus.OPTIMAL, f"trial {trial}"
            expected = vertex_enumeration_lp(c, a, b, upper=upper)
            assert sol.z_lp == pytest.approx(expected, abs=1e-6), f"trial {trial}"


class TestSolutionContracts:
    def test_primal_feasibility_and_objective_identity(self):
        rng = Rng(5)
        for _ in range(20):
            inst, c, a, b = random_lp(rng)
            sol = solve_lp(inst)
            act = a @ sol.x
            assert np.all(act >= b - 1e-6)
            assert abs(sol.z_lp - float(c @ sol.x)) <= 1e-7 * (1 + abs(sol.z_lp))

    def test_weak_duality_at_optimal(self):
        rng = Rng(6)
        for _ in range(20):
            inst, c, a, b = random_lp(rng)
            sol = solve_lp(inst)
            # dual objective: y.b plus reduced-cost terms at finite active bounds
            dual_obj = float(sol.duals @ b)
            for j, st in enumerate(sol.basis):
                if st is VarStatus.AT_LOWER:
                    dual_obj += sol.reduced_costs[j] * inst.var_lower[j]
                elif st is VarStatus.AT_UPPER:
                    dual_obj += sol.reduced_costs[j] * inst.var_upper[j]
            assert dual_obj <= sol.z_lp + 1e-6
            assert dual_obj == pytest.approx(sol.z_lp, abs=1e-5)
            assert np.all(sol.duals >= -1e-7)

    def test_feasible_milps_never_infeasible_lp(self):
        for seed in range(15):
            for inst in (
                gen_set_covering(8, 16, 0.25, seed),
                gen_comb_auction(5, 10, seed),
                gen_gisp(6, 0.5, 0.5, seed),
            ):
                sol = solve_lp(inst)
                assert sol.status in (LpStatus.OPTIMAL, LpStatus.UNBOUNDED)
                assert sol.status is LpStatus.OPTIMAL  # binary boxes are bounded

    def test_basis_statuses_consistent(self):
        inst = gen_set_covering(6, 12, 0.3, seed=3)
        sol = solve_lp(inst)
        n_basic = sum(1 for s in sol.basis if s is VarStatus.BASIC)
        assert n_basic <= inst.num_cons
        for j, st in enumerate(sol.basis):
            if st is VarStatus.AT_LOWER:
                assert sol.x[j] == pytest.approx(inst.var_lower[j], abs=1e-9)
            elif st is VarStatus.AT_UPPER:
                assert sol.x[j] == pytest.approx(inst.var_upper[j], abs=1e-9)


class TestWarmStart:
    def test_unchanged_bounds_same_objective(self):
        inst = gen_set_covering(8, 16, 0.25, seed=1)
        ws = LpWorkspace(inst)
        cold = solve_lp(inst, workspace=ws)
        warm = resolve_from_basis(inst, cold, BoundSet(), workspace=ws)
        assert warm.status is LpStatus.OPTIMAL
        assert warm.z_lp == pytest.approx(cold.z_lp, abs=1e-6)

    def test_tightening_satisfied_bound_keeps_objective(self):
        inst = gen_comb_auction(5, 10, seed=2)
        ws = LpWorkspace(inst)
        cold = solve_lp(inst, workspace=ws)
        j = int(np.argmin(cold.x))  # a variable at (or near) zero
        warm = resolve_from_basis(inst, cold, BoundSet({j: (0.0, 0.0)}), workspace=ws)
        if abs(cold.x[j]) < 1e-9:
            assert warm.z_lp == pytest.approx(cold.z_lp, abs=1e-6)

    def test_random_branchings_match_cold_solve(self):
        rng = Rng(31)
        checked = 0
        for seed in range(60):
            fam = seed % 3
            if fam == 0:
                inst = gen_set_covering(25, 50, 0.12, seed)
            elif fam == 1:
                inst = gen_comb_auction(12, 45, seed)
            else:
                inst = gen_gisp(10, 0.7, 0.4, seed)
            ws = LpWorkspace(inst)
            root = solve_lp(inst, workspace=ws)
            assert root.status is LpStatus.OPTIMAL
            queue = [(BoundSet(), root, 0)]
            while queue and checked < 140:
                bounds, parent, depth = queue.pop()
                fracs = [j for j in range(inst.num_vars)
                         if 1e-6 < parent.x[j] % 1.0 < 1.0 - 1e-6]
                if not fracs or depth >= 3:
                    continue
                j = fracs[rng.randrange(len(fracs))]
                lo = math.floor(parent.x[j])
                il, iu = inst.var_lower[j], inst.var_upper[j]
                for child_bounds in (bounds.child(j, il, float(lo)),
                                     bounds.child(j, float(lo + 1), iu)):
                    warm = resolve_from_basis(inst, parent, child_bounds, workspace=ws)
                    cold = solve_lp(inst, child_bounds, workspace=ws)
                    assert warm.status == cold.status
                    if cold.status is LpStatus.OPTIMAL:
                        assert warm.z_lp == pytest.approx(cold.z_lp, abs=1e-6)
                        assert warm.z_lp >= parent.z_lp - 1e-6  # child bound monotone
                        queue.append((child_bounds, warm, depth + 1))
                    checked += 1
        assert checked >= 100
