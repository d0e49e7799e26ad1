import math
from fractions import Fraction

import pytest

from hamdirac import (
    build_chart,
    frobenius_check,
    integral_constant_budget,
    parse_expr,
    poisson,
    select_embedding,
    transform,
    transform_float_expr,
    verify_chart,
)
from hamdirac.chart import CanonicalChart, ChartRow, float_bracket_table
from hamdirac.expr import Expr
from hamdirac.lagrangian import UnsupportedShape

from conftest import analyzed, random_poly, rng_for


ALL = ["l1", "l2", "l3", "l4_ssok", "l4_pons"]


@pytest.fixture
def charts(l1, l2, l3, l4_ssok, l4_pons):
    out = {}
    for name, trip in zip(ALL, (l1, l2, l3, l4_ssok, l4_pons)):
        t, fos, res = trip
        out[name] = (t, fos, res, build_chart(res))
    return out


def test_every_built_chart_is_exactly_symplectic(charts):
    for name, (t, fos, res, ch) in charts.items():
        ok, violations, _ = verify_chart(ch.matrix(), mode="exact")
        assert ok, (name, violations[:3])
        assert ch.notes == []


def test_bracket_table_matches_canonical_pattern(charts):
    for name, (t, fos, res, ch) in charts.items():
        n = ch.n
        exprs = [r.expr(t, fos.phase) for r in ch.rows]
        for i in range(2 * n):
            for j in range(2 * n):
                want = 1 if j == i + n else (-1 if i == j + n else 0)
                got = poisson(exprs[i], exprs[j], fos.phase)
                assert got == Expr.const(t, want), (name, ch.rows[i].name, ch.rows[j].name)


def test_row_spans_match_classification(charts):
    from hamdirac.linalg import ExprMatrix, rank

    for name, (t, fos, res, ch) in charts.items():
        z = fos.phase.z_order()

        def span_rank(exprs):
            return rank(ExprMatrix.from_rows([[e.diff(s) for s in z] for e in exprs])) if exprs else 0

        psi = [r.expr(t, fos.phase) for r in ch.rows_by_role("Psi")]
        fc = [rep.expr for rep in res.first_class]
        assert span_rank(psi) == span_rank(fc) == span_rank(psi + fc)
        theta = [r.expr(t, fos.phase) for r in ch.rows_by_role("ThU") + ch.rows_by_role("ThD")]
        cons = [c.expr for c in res.constraints]
        assert span_rank(psi + theta) == span_rank(cons) == span_rank(psi + theta + cons)


def test_verify_chart_identity():
    eye = [[Fraction(1 if i == j else 0) for j in range(4)] for i in range(4)]
    ok, violations, dev = verify_chart(eye, mode="exact")
    assert ok and not violations


def test_verify_chart_supplied_l3_exact(l3):
    t, fos, res = l3
    rows_text = {
        "Xi1": "2*q1 + (2/3)*p3 - q2 - q4",
        "ThU1": "(1/3)*p3 + q1 + q2 + q4",
        "Q1": "q2 - q4",
        "Psi1": "(1/3)*p1 - (1/6)*(p2 - p3 + p4)",
        "ThD1": "(1/3)*(p1 + p2 - p3 + p4)",
        "P1": "(1/2)*(p2 - p3 - p4)",
        "Xi2": "q3 + (1/3)*p1 + q2",
        "Psi2": "p3",
    }
    z = fos.phase.z_order()
    matrix = []
    for name in ("Xi1", "Xi2", "ThU1", "Q1", "Psi1", "Psi2", "ThD1", "P1"):
        coeffs, _off = parse_expr(rows_text[name], t).linear_form(z)
        matrix.append(coeffs)
    ok, violations, _ = verify_chart(matrix, mode="exact")
    assert ok, violations[:4]


def test_verify_chart_flags_broken_pairing():
    # flipping the sign of one momentum row breaks exactly its pairing
    eye = [[Fraction(1 if i == j else 0) for j in range(4)] for i in range(4)]
    eye[2] = [Fraction(0), Fraction(0), Fraction(-1), Fraction(0)]
    ok, violations, _ = verify_chart(eye, mode="exact")
    assert not ok
    assert any({i, j} == {0, 2} for i, j, _ in violations)


def test_verify_chart_sqrt2_l2_float():
    s = 1.0 / math.sqrt(2.0)
    # rows over z = (q1, q2, p1, p2): ThU1, Q1 | ThD1, P1
    matrix = [
        [0.0, s, s, 0.0],
        [s, 0.0, 0.0, s],
        [-s, 0.0, 0.0, s],
        [0.0, -s, s, 0.0],
    ]
    ok, violations, dev = verify_chart(matrix, mode="float", tol=1e-12)
    assert ok and dev <= 1e-12
    table = float_bracket_table(matrix)
    assert abs(table[0][2] - 1.0) < 1e-12  # {ThU1, ThD1} = 1


def test_transform_constant(charts):
    t, fos, res, ch = charts["l2"]
    c = Expr.const(t, Fraction(7, 3))
    assert transform(c, ch) == c


def test_transform_preserves_brackets(charts):
    t, fos, res, ch = charts["l2"]
    cp = ch.chart_phase()
    z = fos.phase.z_order()
    rng = rng_for("transform-brackets")
    for _ in range(110):
        f = random_poly(t, z, rng, max_degree=2, terms=3)
        g = random_poly(t, z, rng, max_degree=2, terms=3)
        lhs = transform(poisson(f, g, fos.phase), ch)
        rhs = poisson(transform(f, ch), transform(g, ch), cp)
        assert lhs == rhs


def test_transform_l2_total_hamiltonian(charts):
    # independent oracle: substitute the inverse chart directly and compare
    t, fos, res, ch = charts["l2"]
    ht = res.total_hamiltonian(substitute_solved=True)
    tr = transform(ht, ch)
    back = tr.substitute({r.symbol: r.expr(t, fos.phase) for r in ch.rows})
    assert back == ht


def test_transform_l2_under_sqrt2_chart_float(l2):
    # the sqrt2-normalized chart gives the symmetric 1/2 coefficients
    t, fos, res = l2
    ht = res.total_hamiltonian(substitute_solved=True)  # = q1*p2 - q2*p1
    assert ht == parse_expr("q1*p2 - q2*p1", t)
    s = 1.0 / math.sqrt(2.0)
    matrix = [
        [0.0, s, s, 0.0],  # ThU1
        [s, 0.0, 0.0, s],  # Q1
        [-s, 0.0, 0.0, s],  # ThD1
        [0.0, -s, s, 0.0],  # P1
    ]
    coeffs = transform_float_expr(ht, fos.phase, matrix)
    idx = {name: k for k, name in enumerate(("ThU1", "Q1", "ThD1", "P1"))}
    expected = {
        ((idx["P1"], 2),): 0.5,
        ((idx["Q1"], 2),): 0.5,
        ((idx["ThU1"], 2),): -0.5,
        ((idx["ThD1"], 2),): -0.5,
    }
    assert set(coeffs) == set(expected)
    for mono, v in expected.items():
        assert abs(coeffs[mono] - v) < 1e-12


def test_transform_l4_ssok_opposite_multiplier_sign(l4_ssok):
    # With the multiplier sign the consistency algebra rejects (+Q instead of
    # -Q; see the dirac tests), the transform produces this closed form; kept
    # as a regression pin for the transform itself.
    t, fos, res = l4_ssok
    q1, q2 = fos.phase.positions
    p1, p2 = fos.phase.momenta
    prim = res.constraints[0].expr
    ht_display = fos.H + Expr.sym(t, q1) * prim  # zeta := +Q_(1), as printed there
    rows = [
        ChartRow("ThU", 1, _cov(t, fos, "(1/2)*Q2_q - p_Q1_q"), Fraction(0), t.position("cThU1")),
        ChartRow("Q", 1, _cov(t, fos, "(1/2)*Q2_q + p_Q1_q"), Fraction(0), t.position("cQ1")),
        ChartRow("ThD", 1, _cov(t, fos, "(1/2)*Q1_q + p_Q2_q"), Fraction(0), t.position("cThD1")),
        ChartRow("P", 1, _cov(t, fos, "-(1/2)*Q1_q + p_Q2_q"), Fraction(0), t.position("cP1")),
    ]
    chart = CanonicalChart(fos.phase, rows)
    ok, violations, _ = verify_chart(chart.matrix(), mode="exact")
    assert ok, violations
    got = transform(ht_display, chart)
    want = parse_expr("(1/2)*cP1^2 + (1/2)*cQ1^2 - 2*cThD1*cP1 - (1/2)*cThU1^2 + (3/2)*cThD1^2", t)
    assert got == want


def _cov(t, fos, text):
    coeffs, _off = parse_expr(text, t).linear_form(fos.phase.z_order())
    return [Fraction(c) for c in coeffs]


def test_transform_l1_total_hamiltonian(charts):
    # the chart Hamiltonian of the gauge system: one bilinear coupling, one
    # cubic term, and the undetermined multiplier on its primary momentum
    t, fos, res, ch = charts["l1"]
    tr = transform(res.total_hamiltonian(substitute_solved=False), ch)
    want = parse_expr("-(1/2)*Xi1*Psi2^2 + zeta1*Psi1 - Xi2*Psi3", t)
    assert tr == want
    back = tr.substitute({r.symbol: r.expr(t, fos.phase) for r in ch.rows})
    assert back == res.total_hamiltonian(substitute_solved=False)


def test_transform_l4_ssok_solved_multiplier(charts):
    # with the multiplier the consistency algebra actually forces, the
    # constraint sector decouples cleanly
    t, fos, res, ch = charts["l4_ssok"]
    tr = transform(res.total_hamiltonian(substitute_solved=True), ch)
    want = parse_expr("(1/2)*Q1^2 + (1/2)*P1^2 - (1/2)*ThU1^2 - (1/2)*ThD1^2", t)
    assert tr == want


def test_nonlinear_constraint_rejected():
    # a primary nonlinear in the phase coordinates stops the analysis with
    # the unsupported-shape diagnostic rather than a guess
    with pytest.raises(UnsupportedShape):
        analyzed("d(q1)*q2^2 + d(q1)*q1", ["q1", "q2"])


def test_frobenius_reports(l1, l3):
    for trip in (l1, l3):
        t, fos, res = trip
        fr = frobenius_check(res)
        assert fr.verdict and fr.budget_ok
        assert all(e.is_zero() for _name, e in fr.residuals)


def test_frobenius_vacuous_on_unconstrained():
    t, fos, res = analyzed("(1/2)*d(q1)^2", ["q1"])
    fr = frobenius_check(res)
    assert fr.verdict and fr.budget_used == 0


def test_identity_chart_for_unconstrained():
    t, fos, res = analyzed("(1/2)*d(q1)^2 + (1/2)*d(q2)^2", ["q1", "q2"])
    ch = build_chart(res)
    assert [r.role for r in ch.rows] == ["Q", "Q", "P", "P"]
    eye = [[Fraction(1 if i == j else 0) for j in range(4)] for i in range(4)]
    assert ch.matrix() == eye


def test_integral_constant_budgets(l1, l2, l3):
    t, fos, res = l1
    bud = integral_constant_budget(res, select_embedding(res, gauge_fixing=False))
    assert (bud.total, bud.occupied, bud.free) == (6, 3, 3)
    assert (bud.by_boundary, bud.by_gauge) == (2, 1)
    t, fos, res = l2
    bud = integral_constant_budget(res, select_embedding(res, gauge_fixing=False))
    assert (bud.total, bud.occupied, bud.free) == (4, 2, 2)
    t, fos, res = l3
    bud = integral_constant_budget(res, select_embedding(res, gauge_fixing=False))
    assert (bud.total, bud.occupied, bud.free) == (8, 4, 4)
    bud = integral_constant_budget(res, select_embedding(res, gauge_fixing=True))
    assert (bud.total, bud.occupied, bud.free) == (8, 6, 2)
