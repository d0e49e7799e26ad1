import pytest

from hamdirac import (
    LagrangianSystem,
    SymbolTable,
    UnsupportedShape,
    classify,
    counter_term,
    dirac_iterate,
    kinetic_matrix,
    legendre,
    ostrogradsky_reduce,
    parse_expr,
    pons_reduce,
)
from hamdirac.expr import Expr

from conftest import L1_SRC, L2_SRC, L4_SRC, make_system, random_poly, rng_for


def test_kinetic_matrix_l1():
    sys = make_system(L1_SRC, ["q1", "q2", "q3"])
    k = kinetic_matrix(sys)
    got = [[str(e) for e in k.row(i)] for i in range(3)]
    assert got == [["0", "0", "1"], ["0", "0", "0"], ["1", "0", "0"]]


def test_kinetic_matrix_l2_zero():
    sys = make_system(L2_SRC, ["q1", "q2"])
    k = kinetic_matrix(sys)
    assert all(k[i, j].is_zero() for i in range(2) for j in range(2))


def test_kinetic_matrix_free_particle_identity():
    sys = make_system("(1/2)*d(q1)^2 + (1/2)*d(q2)^2", ["q1", "q2"])
    k = kinetic_matrix(sys)
    assert [[str(e) for e in k.row(i)] for i in range(2)] == [["1", "0"], ["0", "1"]]


def test_kinetic_matrix_symmetric_random():
    rng = rng_for("kinetic-symmetry")
    t = SymbolTable()
    coords = tuple(t.position(n) for n in ("q1", "q2"))
    vels = [t["d(q1)"], t["d(q2)"]]
    for _ in range(20):
        lag = random_poly(t, list(coords) + vels, rng, max_degree=2)
        sys = LagrangianSystem(t, coords, 1, lag)
        assert kinetic_matrix(sys).is_symmetric()


def test_legendre_l2():
    sys = make_system(L2_SRC, ["q1", "q2"])
    t = sys.table
    fos = legendre(sys)
    assert [str(p) for p in fos.primaries] == ["q2 + p1", "-q1 + p2"]
    assert fos.H == parse_expr("q1^2 + q2^2", t)


def test_legendre_l1():
    sys = make_system(L1_SRC, ["q1", "q2", "q3"])
    t = sys.table
    fos = legendre(sys)
    assert [str(p) for p in fos.primaries] == ["p2"]
    assert fos.H == parse_expr("p1*p3 - (1/2)*q2*q3^2", t)


def test_legendre_nondegenerate():
    sys = make_system("(1/2)*d(q1)^2 + (1/2)*d(q2)^2", ["q1", "q2"])
    t = sys.table
    fos = legendre(sys)
    assert fos.primaries == []
    assert fos.H == parse_expr("(1/2)*p1^2 + (1/2)*p2^2", t)


def test_legendre_super_quadratic_rejected():
    sys = make_system("d(q1)^3", ["q1"])
    with pytest.raises(UnsupportedShape):
        legendre(sys)


def test_primary_definition_consistency():
    # substituting the momentum definitions must annihilate every primary
    for src, names in [(L1_SRC, ["q1", "q2", "q3"]), (L2_SRC, ["q1", "q2"])]:
        sys = make_system(src, names)
        fos = legendre(sys)
        t = sys.table
        subs = {p: defn for p, defn in fos.momentum_defs.items()}
        for phi in fos.primaries:
            assert phi.substitute(subs).is_zero()


def test_counter_term_l4():
    sys = make_system(L4_SRC, ["q"], order=2)
    t = sys.table
    w, red = counter_term(sys)
    assert w == parse_expr("(1/2)*q*d(q)", t)
    assert red.L == parse_expr("(1/2)*d(q)^2 - (1/2)*q^2", t)
    assert red.order == 1
    # the reduced system is a plain nondegenerate oscillator
    fos = legendre(red)
    assert fos.primaries == []
    assert fos.H == parse_expr("(1/2)*p_q^2 + (1/2)*q^2", t)


def test_counter_term_acceleration_free():
    sys = make_system("(1/2)*d(q)^2 - q^2", ["q"], order=2)
    w, red = counter_term(sys)
    assert w.is_zero()
    assert red.L == sys.L


def test_counter_term_nonconstant_coefficient():
    # oracle: expanding L + dW/dt must remove every acceleration
    sys = make_system("q^2*dd(q)", ["q"], order=2)
    t = sys.table
    w, red = counter_term(sys)
    assert red.L.degree_in(t["dd(q)"]) <= 0
    v, a = Expr.sym(t, t["d(q)"]), Expr.sym(t, t["dd(q)"])
    dw = w.diff(t["q"]) * v + w.diff(t["d(q)"]) * a
    assert sys.L + dw == red.L


def test_counter_term_needs_gradient():
    sys = make_system("d(q1)*dd(q2)", ["q1", "q2"], order=2)
    with pytest.raises(UnsupportedShape):
        counter_term(sys)


def test_ostrogradsky_l4():
    sys = make_system(L4_SRC, ["q"], order=2)
    t = sys.table
    red = ostrogradsky_reduce(sys)
    assert [c.name for c in red.coords] == ["Q1_q", "Q2_q"]
    fos = legendre(red)
    q1, q2 = red.coords
    p1, p2 = fos.phase.momenta
    half = Expr.const(t, 1) / 2
    assert len(fos.primaries) == 1
    assert fos.primaries[0] == Expr.sym(t, p2) + half * Expr.sym(t, q1)
    assert fos.H == Expr.sym(t, p1) * Expr.sym(t, q2) + half * Expr.sym(t, q1) ** 2
    # consistency generates the expected-secondary, then fixes the multiplier
    res = classify(dirac_iterate(fos))
    assert len(res.constraints) == 2
    sec = res.constraints[1].expr
    assert sec == half * Expr.sym(t, q2) - Expr.sym(t, p1)


def test_ostrogradsky_identity_on_first_order():
    sys = make_system(L2_SRC, ["q1", "q2"])
    assert ostrogradsky_reduce(sys) is sys


def test_pons_l4():
    sys = make_system(L4_SRC, ["q"], order=2)
    t = sys.table
    red = pons_reduce(sys)
    assert [c.name for c in red.coords] == ["q", "x1", "lam1"]
    assert red.L == parse_expr("-(1/2)*q*d(x1) - (1/2)*q^2 + lam1*(x1 - d(q))", t)
    fos = legendre(red)
    assert [str(p) for p in fos.primaries] == ["lam1 + p_q", "1/2*q + p_x1", "p_lam1"]


def test_pons_acceleration_free_recovers_velocity():
    # declared second order but with no acceleration: the multiplier pair must
    # collapse to second class and leave the single physical dof
    sys = make_system("(1/2)*d(q)^2", ["q"], order=2)
    fos = legendre(pons_reduce(sys))
    res = classify(dirac_iterate(fos))
    assert (res.F, res.S, res.dof) == (0, 4, 1)


def test_ssok_pons_dof_cross_check():
    dofs = []
    for path in ("ssok", "pons"):
        sys = make_system(L4_SRC, ["q"], order=2)
        red = ostrogradsky_reduce(sys) if path == "ssok" else pons_reduce(sys)
        res = classify(dirac_iterate(legendre(red)))
        dofs.append(res.dof)
    assert dofs == [1, 1]
