import pytest

from hamdirac import (
    InconsistentTheory,
    SymbolTable,
    dirac_iterate,
    dof,
    legendre,
    parse_expr,
    poisson,
    weak_reduce,
)
from hamdirac.dirac import DiracError
from hamdirac.expr import Expr
from hamdirac.lagrangian import PhaseSpace
from hamdirac.linalg import ExprMatrix, rank

from conftest import make_system, random_poly, rng_for


def phase2():
    t = SymbolTable()
    qs = [t.position(n) for n in ("q1", "q2")]
    ps = [t.register(n, "momentum") for n in ("p1", "p2")]
    return t, PhaseSpace(t, tuple(zip(qs, ps)))


def test_poisson_examples():
    t, phase = phase2()
    f = parse_expr("p1 + q2", t)
    g = parse_expr("p2 - q1", t)
    assert poisson(f, g, phase) == Expr.const(t, 2)
    assert poisson(f, f, phase).is_zero()


def test_poisson_l3_second_class_bracket(l3):
    t, fos, res = l3
    phi22 = parse_expr("(1/3)*p3 + q1 + q2 + q4", t)
    phi12 = parse_expr("(1/3)*(p1 + p2 - p3 + p4)", t)
    assert poisson(phi22, phi12, fos.phase) == Expr.const(t, 1)


def test_poisson_properties_random():
    t, phase = phase2()
    syms = [s for q, p in phase.pairs for s in (q, p)]
    rng = rng_for("poisson-props")
    one = Expr.const(t, 1)
    for _ in range(210):
        f = random_poly(t, syms, rng, max_degree=3, terms=3)
        g = random_poly(t, syms, rng, max_degree=3, terms=3)
        h = random_poly(t, syms, rng, max_degree=3, terms=3)
        pb = lambda a, b: poisson(a, b, phase)
        assert pb(f, g) == -pb(g, f)
        assert pb(f + 2 * g, h) == pb(f, h) + 2 * pb(g, h)
        jac = pb(f, pb(g, h)) + pb(g, pb(h, f)) + pb(h, pb(f, g))
        assert jac.is_zero()
        assert pb(f * g, h) == f * pb(g, h) + pb(f, h) * g


def test_weak_reduce_examples():
    t, phase = phase2()
    e = parse_expr("p1*p2", t)
    assert weak_reduce(e, [parse_expr("p1", t)], phase).is_zero()
    assert weak_reduce(e, [], phase) == e


def test_weak_reduce_random_multiple():
    # q1*X + p2 vanishes weakly for arbitrary polynomial X once q1 and p2 do
    t, phase = phase2()
    syms = [s for q, p in phase.pairs for s in (q, p)]
    rng = rng_for("weak-reduce")
    cons = [parse_expr("q1", t), parse_expr("p2", t)]
    for _ in range(40):
        x = random_poly(t, syms, rng)
        e = parse_expr("q1", t) * x + parse_expr("p2", t)
        assert weak_reduce(e, cons, phase).is_zero()


def test_weak_reduce_affine_solve():
    t, phase = phase2()
    cons = [parse_expr("p2 - q1", t)]
    # p2 is solved (highest index), leaving the expression in the rest
    assert weak_reduce(parse_expr("p2", t), cons, phase) == parse_expr("q1", t)


def test_cawley_chain(l1):
    t, fos, res = l1
    chain = [(c.generation, str(c.expr)) for c in res.constraints]
    assert chain == [(1, "p2"), (2, "q3"), (3, "p1")]
    assert any("irreducibility" in f and "q3" in f for f in res.flags)
    assert [z.name for z in res.free_multipliers] == ["zeta1"]
    assert res.multiplier_solutions == {}
    assert (res.F, res.S, res.dof) == (3, 0, 0)
    assert all(c.klass == "first" for c in res.constraints)


def test_l2_multipliers(l2):
    t, fos, res = l2
    assert len(res.constraints) == 2  # no secondaries
    sols = {z.name: v for z, v in res.multiplier_solutions.items()}
    assert sols["zeta1"] == parse_expr("-q2", t)
    assert sols["zeta2"] == parse_expr("q1", t)
    assert res.free_multipliers == []
    assert (res.F, res.S, res.dof) == (0, 2, 1)


def test_l3_chains_and_multipliers(l3):
    t, fos, res = l3
    gens = {}
    for c in res.constraints:
        gens.setdefault(c.generation, []).append(c.expr)
    assert sorted(gens) == [1, 2]
    # generation spans match the printed chains
    span1 = [parse_expr("p1", t), parse_expr("p2 - p3 + p4", t)]
    rebased1 = [parse_expr("p1 - (1/2)*(p2 - p3 + p4)", t), parse_expr("(1/3)*(p1 + p2 - p3 + p4)", t)]
    assert same_span(t, fos, gens[1], span1) and same_span(t, fos, gens[1], rebased1)
    rebased2 = [parse_expr("p3", t), parse_expr("(1/3)*p3 + q1 + q2 + q4", t)]
    assert same_span(t, fos, gens[2], rebased2)
    # one free multiplier on the first-class primary, one solved weakly -p4
    assert [z.name for z in res.free_multipliers] == ["zeta1"]
    (z2, val), = res.multiplier_solutions.items()
    assert z2.name == "zeta2"
    delta = val - parse_expr("-p4", t)
    assert weak_reduce(delta, [c.expr for c in res.constraints], fos.phase).is_zero()
    assert (res.F, res.S, res.dof) == (2, 2, 1)
    # first-class representatives literally land on the printed combination
    assert [str(r.expr) for r in res.first_class] == ["p1 - 1/2*p2 + 1/2*p3 - 1/2*p4", "p3"]


def same_span(t, fos, a, b):
    z = fos.phase.z_order()
    rows_a = [[e.diff(s) for s in z] for e in a]
    rows_b = [[e.diff(s) for s in z] for e in b]
    ra = rank(ExprMatrix.from_rows(rows_a))
    rb = rank(ExprMatrix.from_rows(rows_b))
    rab = rank(ExprMatrix.from_rows(rows_a + rows_b))
    return ra == rb == rab


def test_solved_multiplier_consistency_invariant(l1, l2, l3, l4_ssok, l4_pons):
    # after substituting the solved multipliers, every constraint's bracket
    # with H_T weakly vanishes identically in the remaining free multipliers
    for t, fos, res in (l1, l2, l3, l4_ssok, l4_pons):
        ht = res.total_hamiltonian(substitute_solved=True)
        cons = [c.expr for c in res.constraints]
        for c in res.constraints:
            r = weak_reduce(poisson(c.expr, ht, fos.phase), cons, fos.phase)
            if res.free_multipliers:
                const, coeffs = r.split_affine(res.free_multipliers)
                assert weak_reduce(const, cons, fos.phase).is_zero()
                for coeff in coeffs.values():
                    assert weak_reduce(coeff, cons, fos.phase).is_zero()
            else:
                assert r.is_zero()


def test_classification_gram_invariants(l3):
    t, fos, res = l3
    cons = [c.expr for c in res.constraints]
    # every first-class representative commutes weakly with all constraints
    for rep in res.first_class:
        for ce in cons:
            assert weak_reduce(poisson(rep.expr, ce, fos.phase), cons, fos.phase).is_zero()
    # the second-class Gram submatrix has full rank
    reps = [r.expr for r in res.second_class]
    gram = ExprMatrix.from_rows(
        [[weak_reduce(poisson(a, b, fos.phase), cons, fos.phase) for b in reps] for a in reps]
    )
    assert rank(gram) == res.S


def test_dof_examples_and_guards():
    assert dof(4, 2, 2) == 1
    assert dof(2, 0, 2) == 1
    assert dof(3, 3, 0) == 0
    with pytest.raises(DiracError):
        dof(1, 0, 1)  # odd remainder
    with pytest.raises(DiracError):
        dof(1, 2, 0)  # negative


def test_contradictory_theory():
    # L = q forces the consistency condition 1 = 0
    sys = make_system("q", ["q"])
    fos = legendre(sys)
    with pytest.raises(InconsistentTheory):
        dirac_iterate(fos)


def test_l4_ssok_chain(l4_ssok):
    t, fos, res = l4_ssok
    assert len(res.constraints) == 2
    assert (res.F, res.S, res.dof) == (0, 2, 1)
    prim, sec = res.constraints
    assert poisson(prim.expr, sec.expr, fos.phase) == Expr.const(t, -1)
    # the mathematically forced multiplier: consistency of the secondary
    (z, val), = res.multiplier_solutions.items()
    q1 = t["Q1_q"]
    assert val == -Expr.sym(t, q1)


def test_l4_pons_chain(l4_pons):
    t, fos, res = l4_pons
    assert (res.F, res.S, res.dof) == (0, 4, 1)
    assert [str(c.expr) for c in res.constraints] == ["lam1 + p_q", "1/2*q + p_x1", "p_lam1", "1/2*x1 + lam1"]
    sols = {z.name: str(v) for z, v in res.multiplier_solutions.items()}
    assert sols == {"zeta1": "x1", "zeta2": "-q", "zeta3": "1/2*q"}
    brackets = {
        ("lam1 + p_q", "1/2*q + p_x1"): "-1/2",
        ("lam1 + p_q", "p_lam1"): "1",
        ("1/2*x1 + lam1", "1/2*q + p_x1"): "1/2",
        ("1/2*x1 + lam1", "p_lam1"): "1",
    }
    by_expr = {str(c.expr): c.expr for c in res.constraints}
    for (a, b), v in brackets.items():
        assert str(poisson(by_expr[a], by_expr[b], fos.phase)) == v
