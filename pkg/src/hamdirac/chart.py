"""Canonical charts built from classified constraints, plus verification.

The linear construction: second-class representatives are paired by a
symplectic Gram-Schmidt sweep with one member of each pair rescaled to a unit
bracket; every first-class representative becomes a momentum row and gets a
conjugate position row solved inside the remaining symplectic complement; the
leftover complement is completed into physical (Q, P) pairs with unit
brackets.  All of it over exact rationals.

Charts with irrational entries (the usual 1/sqrt(2) normalizations) are
handled in a float-only verification mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dirac import DiracResult, DiracError
from .expr import Expr, ExprError
from .lagrangian import PhaseSpace, UnsupportedShape


class ChartError(Exception):
    pass


ROLE_POSITION = ("Xi", "ThU", "Q")
ROLE_MOMENTUM = ("Psi", "ThD", "P")
ROLE_CONJUGATE = {"Xi": "Psi", "Psi": "Xi", "ThU": "ThD", "ThD": "ThU", "Q": "P", "P": "Q"}


@dataclass
class ChartRow:
    role: str
    pair: int  # 1-based index within the role family
    coeffs: list  # Fractions over phase z-order (q1..qn, p1..pn)
    offset: Fraction
    symbol: object
    generation: int | None = None  # Psi rows: generation of the constraint they represent

    @property
    def name(self):
        return self.symbol.name

    def expr(self, table, phase) -> Expr:
        z = phase.z_order()
        e = Expr.const(table, self.offset)
        for c, s in zip(self.coeffs, z):
            if c:
                e = e + Expr.const(table, c) * Expr.sym(table, s)
        return e


@dataclass
class CanonicalChart:
    phase: PhaseSpace
    rows: list  # position block then momentum block, canonical role order
    notes: list = None

    def __post_init__(self):
        if self.notes is None:
            self.notes = []

    @property
    def n(self):
        return self.phase.n

    @property
    def table(self):
        return self.phase.table

    def position_rows(self):
        return self.rows[: self.n]

    def momentum_rows(self):
        return self.rows[self.n :]

    def rows_by_role(self, role):
        return [r for r in self.rows if r.role == role]

    def matrix(self):
        return [list(r.coeffs) for r in self.rows]

    def offsets(self):
        return [r.offset for r in self.rows]

    def chart_phase(self) -> PhaseSpace:
        pairs = tuple((p.symbol, m.symbol) for p, m in zip(self.position_rows(), self.momentum_rows()))
        return PhaseSpace(self.table, pairs)

    def row_named(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise ChartError(f"no chart row named {name!r}")

    def conjugate(self, row: ChartRow) -> ChartRow:
        want = ROLE_CONJUGATE[row.role]
        for r in self.rows:
            if r.role == want and r.pair == row.pair:
                return r
        raise ChartError(f"chart row {row.name} has no conjugate")


def _bracket(u, v, n):
    """Poisson bracket of two covectors over z = (q1..qn, p1..pn)."""
    s = Fraction(0)
    for i in range(n):
        s += u[i] * v[n + i] - u[n + i] * v[i]
    return s


def _as_covector(expr: Expr, phase: PhaseSpace):
    try:
        coeffs, offset = expr.linear_form(phase.z_order())
    except ExprError as exc:
        raise UnsupportedShape(
            f"constraint {expr} is nonlinear; build_chart handles the linear case only "
            f"(supply a chart and use verify_chart instead)"
        ) from exc
    return [Fraction(c) for c in coeffs], Fraction(offset)


def _project_pair(x, xoff, pair, n):
    """Symplectic projection of x off a unit-bracket pair (e, f)."""
    (e, eoff), (f, foff) = pair
    a = _bracket(x, f, n)
    b = _bracket(x, e, n)
    nx = [xi - a * ei + b * fi for xi, ei, fi in zip(x, e, f)]
    noff = xoff - a * eoff + b * foff
    return nx, noff


def build_chart(result: DiracResult) -> CanonicalChart:
    """Symplectic Gram-Schmidt completion of the classified constraints."""
    if not result.classified:
        raise ChartError("classify the Dirac result before building a chart")
    phase = result.phase
    table = result.table
    n = phase.n

    psi = []
    for rep in result.first_class:
        coeffs, off = _as_covector(rep.expr, phase)
        psi.append((coeffs, off, rep.generation))
    pool = []
    for rep in result.second_class:
        coeffs, off = _as_covector(rep.expr, phase)
        pool.append((coeffs, off))

    theta_pairs = []
    while pool:
        e, eoff = pool.pop(0)
        partner = None
        for k, (f, foff) in enumerate(pool):
            br = _bracket(e, f, n)
            if br:
                partner = (k, f, foff, br)
                break
        if partner is None:
            raise DiracError("degenerate second-class pairing; classification bug")
        k, f, foff, br = partner
        pool.pop(k)
        f = [c / br for c in f]
        foff = foff / br
        pair = ((e, eoff), (f, foff))
        pool = [_project_pair(x, xoff, pair, n) for x, xoff in pool]
        theta_pairs.append(pair)

    # conjugate positions for the first-class momenta
    xi_rows = []
    for a in range(len(psi)):
        rows = []
        rhs = []
        for b, (pc, _off, _g) in enumerate(psi):
            rows.append(_sympl_grad(pc, n))
            rhs.append(Fraction(1 if b == a else 0))
        for (e, _eo), (f, _fo) in theta_pairs:
            rows.append(_sympl_grad(e, n))
            rhs.append(Fraction(0))
            rows.append(_sympl_grad(f, n))
            rhs.append(Fraction(0))
        x = _frac_solve(rows, rhs)
        if x is None:
            raise DiracError("no conjugate for a first-class momentum; classification bug")
        xoff = Fraction(0)
        for b in range(a):
            c = _bracket(xi_rows[b][0], x, n)
            if c:
                pb, pboff, _g = psi[b]
                x = [xi - c * pi for xi, pi in zip(x, pb)]
                xoff = xoff - c * pboff
        xi_rows.append((x, xoff))

    placed_pairs = list(theta_pairs)
    for (xi, xoff), (pc, poff, _g) in zip(xi_rows, psi):
        placed_pairs.append(((xi, xoff), (pc, poff)))

    qp_pairs = []
    want = n - len(psi) - len(theta_pairs)
    seeds = []
    for i in range(2 * n):
        v = [Fraction(0)] * (2 * n)
        v[i] = Fraction(1)
        seeds.append(v)

    def project_all(x):
        xo = Fraction(0)
        for pair in placed_pairs + qp_pairs:
            x, xo = _project_pair(x, xo, pair, n)
        return x

    while len(qp_pairs) < want:
        qvec = None
        start = 0
        for i, s in enumerate(seeds):
            p = project_all(list(s))
            if any(p):
                qvec = p
                start = i + 1
                break
        if qvec is None:
            raise DiracError("symplectic completion ran out of directions")
        pvec = None
        for s in seeds[start:]:
            y = project_all(list(s))
            br = _bracket(qvec, y, n)
            if br:
                pvec = [c / br for c in y]
                break
        if pvec is None:
            raise DiracError("no symplectic partner found; completion bug")
        qp_pairs.append(((qvec, Fraction(0)), (pvec, Fraction(0))))

    rows = _assemble_rows(table, psi, xi_rows, theta_pairs, qp_pairs)
    chart = CanonicalChart(phase, rows)
    _static_correct(chart, result)
    ok, violations, _ = verify_chart(chart.matrix(), mode="exact")
    if not ok:
        raise DiracError(f"internal: built chart fails S^T J S = J at {violations[:3]}")
    return chart


def _embedded_velocity(chart: CanonicalChart, result: DiracResult, row_expr: Expr):
    """Velocity of an affine phase function, transformed to chart symbols and
    restricted to the embedded subspace (all constraint and gauge coordinates
    at zero, free multipliers dropped)."""
    from .dirac import poisson

    table = chart.table
    ht = result.total_hamiltonian(substitute_solved=True)
    vel = poisson(row_expr, ht, result.phase)
    vel_c = transform(vel, chart)
    subs = {}
    for r in chart.rows:
        if r.role in ("Q", "P"):
            continue
        subs[r.symbol] = Expr.const(table, 0)
    for z in result.free_multipliers:
        subs[z] = Expr.const(table, 0)
    return vel_c.substitute(subs) if subs else vel_c


def _static_correct(chart: CanonicalChart, result: DiracResult):
    """Absorb physical-block content of secondary-and-higher gauge velocities.

    A Xi row conjugate to a non-primary first-class momentum should evolve
    only through constraint/gauge coordinates; leftover (Q, P) content is
    removed by shifting the row inside the physical block and compensating
    the physical rows with multiples of the paired momentum, which keeps the
    bracket table canonical.  Failure to solve is recorded, not fatal.
    """
    n = chart.n
    table = chart.table
    qp_rows = [r for r in chart.rows if r.role in ("Q", "P")]
    if not qp_rows:
        return
    qp_syms = [r.symbol for r in qp_rows]
    targets = [r for r in chart.rows if r.role == "Xi" and (r.generation or 1) > 1]
    for xi in targets:
        try:
            defect = _embedded_velocity(chart, result, xi.expr(table, chart.phase))
            if defect.is_zero():
                continue
            basis = [_embedded_velocity(chart, result, w.expr(table, chart.phase)) for w in qp_rows]
            zero_qp = {s: Expr.const(table, 0) for s in qp_syms}
            rows_sys, rhs = [], []
            for s in qp_syms:
                rows_sys.append([Fraction(b.diff(s).constant_value()) for b in basis])
                rhs.append(-Fraction(defect.diff(s).constant_value()))
            rows_sys.append([Fraction(b.substitute(zero_qp).constant_value()) for b in basis])
            rhs.append(-Fraction(defect.substitute(zero_qp).constant_value()))
            alpha = _frac_solve(rows_sys, rhs)
        except ExprError:
            alpha = None
        if alpha is None:
            chart.notes.append(
                f"{xi.name}: physical content of its velocity could not be absorbed; "
                f"canonical embeddings may be unavailable in this chart"
            )
            continue
        xi.coeffs = [c + sum(a * w.coeffs[k] for a, w in zip(alpha, qp_rows)) for k, c in enumerate(xi.coeffs)]
        xi.offset = xi.offset + sum(a * w.offset for a, w in zip(alpha, qp_rows))
        psi = chart.conjugate(xi)
        for w in qp_rows:
            lam = -_bracket(xi.coeffs, w.coeffs, n)
            if lam:
                w.coeffs = [c + lam * p for c, p in zip(w.coeffs, psi.coeffs)]
                w.offset = w.offset + lam * psi.offset


def _sympl_grad(c, n):
    """Row r with r . x = <x, c> for the symplectic pairing."""
    return list(c[n:]) + [-ci for ci in c[:n]]


def _frac_solve(rows, rhs):
    """Particular solution of a rational linear system (free vars zero)."""
    m = len(rows)
    if m == 0:
        return None
    cols = len(rows[0])
    a = [list(map(Fraction, rows[i])) + [Fraction(rhs[i])] for i in range(m)]
    piv = {}
    used = set()
    for c in range(cols):
        src = None
        for i in range(m):
            if i not in used and a[i][c]:
                src = i
                break
        if src is None:
            continue
        used.add(src)
        p = a[src][c]
        a[src] = [x / p for x in a[src]]
        for i in range(m):
            if i != src and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[src])]
        piv[c] = src
    for i in range(m):
        if i not in used and a[i][cols]:
            return None
    x = [Fraction(0)] * cols
    for c, i in piv.items():
        x[c] = a[i][cols]
    return x


def _assemble_rows(table, psi, xi_rows, theta_pairs, qp_pairs):
    def fresh(base):
        name = base
        while name in table:
            name = name + "_"
        return table.position(name)

    rows = []
    for a, ((xi, xoff), (_pc, _po, gen)) in enumerate(zip(xi_rows, psi), start=1):
        rows.append(ChartRow("Xi", a, xi, xoff, fresh(f"Xi{a}"), gen))
    for k, ((e, eoff), (_f, _fo)) in enumerate(theta_pairs, start=1):
        rows.append(ChartRow("ThU", k, e, eoff, fresh(f"ThU{k}")))
    for k, ((q, qoff), (_p, _po)) in enumerate(qp_pairs, start=1):
        rows.append(ChartRow("Q", k, q, qoff, fresh(f"Q{k}")))
    for a, (pc, poff, gen) in enumerate(psi, start=1):
        rows.append(ChartRow("Psi", a, pc, poff, fresh(f"Psi{a}"), gen))
    for k, ((_e, _eo), (f, foff)) in enumerate(theta_pairs, start=1):
        rows.append(ChartRow("ThD", k, f, foff, fresh(f"ThD{k}")))
    for k, ((_q, _qo), (p, poff)) in enumerate(qp_pairs, start=1):
        rows.append(ChartRow("P", k, p, poff, fresh(f"P{k}")))
    return rows


# ---------------------------------------------------------------------------
# verification

def _j_matrix(n):
    j = [[Fraction(0)] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        j[i][n + i] = Fraction(1)
        j[n + i][i] = Fraction(-1)
    return j


def verify_chart(matrix, mode="exact", tol=1e-12):
    """Check S^T J S = J.

    Returns (ok, violations, max_deviation); each violation is (i, j, delta)
    naming the offending bracket entry.
    """
    dim = len(matrix)
    if dim % 2 or any(len(r) != dim for r in matrix):
        raise ChartError("chart matrix must be square with even dimension")
    n = dim // 2
    if mode == "exact":
        s = [[Fraction(x) for x in row] for row in matrix]
        j = _j_matrix(n)
        # J S first (sparse J), then S^T (J S)
        js = [[s[a - n][k] if a >= n else Fraction(0) for k in range(dim)] for a in range(dim)]
        for i in range(n):
            for k in range(dim):
                js[i][k] = s[n + i][k]
                js[n + i][k] = -s[i][k]
        violations = []
        for i in range(dim):
            for k in range(dim):
                acc = Fraction(0)
                for a in range(dim):
                    if s[a][i]:
                        acc += s[a][i] * js[a][k]
                delta = acc - j[i][k]
                if delta:
                    violations.append((i, k, delta))
        return (not violations), violations, (max((abs(d) for _, _, d in violations), default=Fraction(0)))
    if mode == "float":
        s = np.array([[float(x) for x in row] for row in matrix], dtype=float)
        j = np.zeros((dim, dim))
        j[:n, n:] = np.eye(n)
        j[n:, :n] = -np.eye(n)
        dev = s.T @ j @ s - j
        maxdev = float(np.max(np.abs(dev)))
        violations = []
        if maxdev > tol:
            idx = np.argwhere(np.abs(dev) > tol)
            violations = [(int(i), int(k), float(dev[i, k])) for i, k in idx]
        return (not violations), violations, maxdev
    raise ChartError(f"unknown verify mode {mode!r}")


def transform(e: Expr, chart: CanonicalChart) -> Expr:
    """Rewrite a phase-space expression in chart symbols (exact charts only)."""
    table = chart.table
    n = chart.n
    s = chart.matrix()
    inv = _frac_inverse(s)
    z = chart.phase.z_order()
    subs = {}
    for i, zi in enumerate(z):
        acc = Expr.const(table, 0)
        for jj, row in enumerate(chart.rows):
            c = inv[i][jj]
            if c:
                acc = acc + Expr.const(table, c) * (Expr.sym(table, row.symbol) - Expr.const(table, row.offset))
        subs[zi] = acc
    return e.substitute(subs)


def _frac_inverse(matrix):
    dim = len(matrix)
    a = [[Fraction(x) for x in row] + [Fraction(1 if k == i else 0) for k in range(dim)] for i, row in enumerate(matrix)]
    for c in range(dim):
        src = None
        for i in range(c, dim):
            if a[i][c]:
                src = i
                break
        if src is None:
            raise ChartError("chart matrix is singular")
        a[c], a[src] = a[src], a[c]
        p = a[c][c]
        a[c] = [x / p for x in a[c]]
        for i in range(dim):
            if i != c and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return [row[dim:] for row in a]


# ---------------------------------------------------------------------------
# float-mode helpers (irrational charts, e.g. 1/sqrt(2) normalizations)

# ---------------------------------------------------------------------------
# integrability and budgets

@dataclass
class FrobeniusReport:
    residuals: list  # (coordinate name, residual Expr)
    verdict: bool
    budget_used: int
    budget_total: int
    budget_ok: bool


def frobenius_check(result: DiracResult) -> "FrobeniusReport":
    """Hamilton-side integrability: the free-multiplier 1-form residuals
    -sum_alpha zeta^alpha dPhi_alpha/dq_i must weakly vanish per position
    coordinate, identically in the multipliers, and the constraint count must
    respect the 2n budget."""
    if not result.classified:
        raise ChartError("classify the Dirac result before the Frobenius check")
    from .dirac import WeakReducer

    phase = result.phase
    table = result.table
    free = result.free_multipliers
    fc_primaries = result.rebased_primaries[: result.primary_fc_count]
    if len(free) != len(fc_primaries):
        raise DiracError("free multipliers out of sync with first-class primaries")
    reducer = WeakReducer([c.expr for c in result.constraints], phase)
    residuals = []
    ok = True
    for q in phase.positions:
        r = Expr.const(table, 0)
        for z, prim in zip(free, fc_primaries):
            r = r - Expr.sym(table, z) * prim.diff(q)
        r = reducer.reduce(r)
        if not r.is_zero():
            const, coeffs = r.split_affine(free)
            if not const.is_zero() or any(not reducer.reduce(c).is_zero() for c in coeffs.values()):
                ok = False
        residuals.append((q.name, r))
    used = len(result.constraints)
    total = 2 * phase.n
    budget_ok = used <= total
    return FrobeniusReport(residuals, ok and budget_ok, used, total, budget_ok)


@dataclass
class ConstantBudget:
    total: int
    occupied: int
    free: int
    by_boundary: int
    by_gauge: int


_OCCUPANCY = {
    "sigma3": lambda r, s: 2 * r + 2 * s,
    "sigma3_tilde": lambda r, s: r + 2 * s,
    "sigma2": lambda r, s: 2 * s,
    "sigma1": lambda r, s: 2 * r,
    "sigma1_tilde": lambda r, s: r,
    "trivial": lambda r, s: 0,
}


def integral_constant_budget(result: DiracResult, plan) -> ConstantBudget:
    """Integral constants occupied by an embedding: 2r+2s, r+2s, 2s, 2r, r
    for sigma3, sigma3~, sigma2, sigma1, sigma1~ (r = F, s = S/2)."""
    if not result.classified:
        raise ChartError("classify before computing the constant budget")
    r, s = result.F, result.S // 2
    kind = plan.kind if hasattr(plan, "kind") else str(plan)
    if kind not in _OCCUPANCY:
        raise ChartError(f"unknown embedding kind {kind!r}")
    occupied = _OCCUPANCY[kind](r, s)
    total = 2 * result.phase.n
    free = total - occupied
    gauge = result.primary_fc_count if kind.endswith("_tilde") else 0
    return ConstantBudget(total, occupied, free, free - gauge, gauge)


def float_bracket_table(matrix):
    dim = len(matrix)
    n = dim // 2
    s = np.array([[float(x) for x in row] for row in matrix], dtype=float)
    j = np.zeros((dim, dim))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return s @ j @ s.T


class FloatPoly(dict):
    """Sparse float polynomial over chart-row indices: {((idx, exp), ...): coeff}."""

    def add_term(self, mono, c):
        v = self.get(mono, 0.0) + c
        if abs(v) < 1e-300:
            self.pop(mono, None)
        else:
            self[mono] = v

    def mul(self, other):
        out = FloatPoly()
        for m1, c1 in self.items():
            for m2, c2 in other.items():
                mono = _fmono_mul(m1, m2)
                out.add_term(mono, c1 * c2)
        return out

    def cleaned(self, tol=1e-12):
        return {m: c for m, c in self.items() if abs(c) > tol}


def _fmono_mul(m1, m2):
    out = dict(m1)
    for i, e in m2:
        out[i] = out.get(i, 0) + e
    return tuple(sorted(out.items()))


def _float_replacements(matrix, offsets=None):
    """Linear FloatPoly replacement for each original phase coordinate."""
    dim = len(matrix)
    s = np.array([[float(x) for x in row] for row in matrix], dtype=float)
    inv = np.linalg.inv(s)
    off = np.array([float(x) for x in (offsets or [0.0] * dim)], dtype=float)
    lin = []
    for i in range(dim):
        p = FloatPoly()
        const = float(-(inv[i] @ off))
        if const:
            p.add_term((), const)
        for jj in range(dim):
            if inv[i][jj]:
                p.add_term(((jj, 1),), float(inv[i][jj]))
        lin.append(p)
    return lin


def transform_float_expr(e: Expr, phase: PhaseSpace, matrix, offsets=None, tol=1e-12):
    """Coefficients of a polynomial phase-space expression rewritten under a
    float chart; returns {monomial over chart-row indices: float}."""
    if not e.is_polynomial():
        raise ChartError("float transform expects a polynomial expression")
    lin = _float_replacements(matrix, offsets)
    zpos = {s.index: k for k, s in enumerate(phase.z_order())}
    out = FloatPoly()
    for mono, c in e.num.items():
        term = FloatPoly({(): float(c)})
        for i, exp in mono:
            if i not in zpos:
                raise ChartError(f"symbol index {i} is not a phase coordinate")
            rep = lin[zpos[i]]
            for _ in range(exp):
                term = term.mul(rep)
        for m2, c2 in term.items():
            out.add_term(m2, c2)
    den = e.den
    scale = float(list(den.values())[0]) if den else 1.0
    return {m: c / scale for m, c in out.cleaned(tol).items()}
