"""Lagrangian-side reductions.

Covers the kinetic matrix, the degenerate Legendre transform with primary
constraint extraction, the counter-term that strips accelerations from a
Newton-compatible second-order Lagrangian, and the two standard first-order
rewritings of a second-order system (auxiliary-coordinate pair per original
coordinate, with or without explicit multipliers).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .expr import Expr, ExprError
from .linalg import ExprMatrix, solve_linear
from .symbols import Symbol, SymbolTable


class MechanicsError(Exception):
    pass


class UnsupportedShape(MechanicsError):
    """Input outside the supported class (super-quadratic velocities, ...)."""


@dataclass
class LagrangianSystem:
    table: SymbolTable
    coords: tuple
    order: int
    L: Expr
    # SSOK-style systems declare the velocity of a coordinate to *be* another
    # coordinate; such coordinates get an undetermined momentum and no primary.
    velocity_aliases: dict = field(default_factory=dict)

    def velocity_symbols(self):
        return [self.table.velocity(c) for c in self.coords if c not in self.velocity_aliases]

    def genuine_coords(self):
        return [c for c in self.coords if c not in self.velocity_aliases]


@dataclass
class PhaseSpace:
    table: SymbolTable
    pairs: tuple  # ((q, p), ...) in symplectic layout order

    @property
    def n(self):
        return len(self.pairs)

    @property
    def positions(self):
        return [q for q, _ in self.pairs]

    @property
    def momenta(self):
        return [p for _, p in self.pairs]

    def z_order(self):
        """Phase symbols in (q1..qn, p1..pn) covector order."""
        return self.positions + self.momenta


@dataclass
class FirstOrderSystem:
    phase: PhaseSpace
    H: Expr
    primaries: list  # Expr, in coordinate row order
    momentum_defs: dict  # momentum Symbol -> defining Expr in (q, v); absent for alias momenta
    source: LagrangianSystem | None = None


def _momentum_name(table: SymbolTable, coord: Symbol) -> str:
    m = re.fullmatch(r"q(\d+)", coord.name)
    name = f"p{m.group(1)}" if m else f"p_{coord.name}"
    while name in table:
        name = name + "_"
    return name


def kinetic_matrix(sys: LagrangianSystem) -> ExprMatrix:
    """Second velocity-derivative matrix of L (genuine velocities only)."""
    if sys.order != 1:
        raise MechanicsError("kinetic_matrix expects a first-order system; reduce first")
    vels = sys.velocity_symbols()
    rows = [[sys.L.diff(vi).diff(vj) for vj in vels] for vi in vels]
    return ExprMatrix.from_rows(rows) if rows else ExprMatrix(0, 0, [])


def legendre(sys: LagrangianSystem, pivot_log: list | None = None) -> FirstOrderSystem:
    """Degenerate Legendre transform.

    Momenta are p_i = dL/dv_i; solvable velocities are eliminated, and each
    unsolvable momentum row yields one primary constraint (the leftover
    equation of the momentum system).  H comes out velocity-free.
    """
    if sys.order != 1:
        raise MechanicsError("legendre expects a first-order system; reduce first")
    table = sys.table
    vels = sys.velocity_symbols()
    for v in vels:
        if sys.L.degree_in(v) > 2:
            raise UnsupportedShape(f"L is super-quadratic in {v}; momentum not affine in velocities")

    momenta = {}
    for c in sys.coords:
        momenta[c] = table.register(_momentum_name(table, c), "momentum")
    phase = PhaseSpace(table, tuple((c, momenta[c]) for c in sys.coords))

    # momentum definitions for genuine velocities: p_i = b_i + sum_j A_ij v_j
    genuine = sys.genuine_coords()
    defs = {}
    b = []
    a_rows = []
    for c in genuine:
        v = table.velocity(c)
        p_def = sys.L.diff(v)
        defs[momenta[c]] = p_def
        try:
            bi, coeffs = p_def.split_affine(vels)
        except ExprError as exc:
            raise UnsupportedShape(f"momentum of {c} not affine in velocities: {exc}") from exc
        b.append(bi)
        a_rows.append([coeffs.get(v2, Expr.const(table, 0)) for v2 in vels])

    primaries = []
    subs = {}
    if genuine:
        # Solve highest-indexed velocities first, preferring the latest
        # momentum row per velocity: the free section then lives on the
        # earliest velocities and the earliest redundant momentum rows carry
        # the primary constraints.
        rev = list(reversed(range(len(vels))))
        a = ExprMatrix.from_rows([[row[j] for j in rev] for row in a_rows])
        rhs = [Expr.sym(table, momenta[c]) - b[i] for i, c in enumerate(genuine)]
        sol = solve_linear(a, rhs, pivot_log=pivot_log, prefer_late_rows=True)
        primaries = list(sol.witnesses)
        for k, j in enumerate(rev):
            subs[vels[j]] = sol.particular[k]

    h = Expr.const(table, 0)
    for c in sys.coords:
        p = Expr.sym(table, momenta[c])
        if c in sys.velocity_aliases:
            h = h + p * sys.velocity_aliases[c]
        else:
            h = h + p * Expr.sym(table, table.velocity(c))
    h = (h - sys.L).substitute(subs)
    leftover = [s for s in h.free_symbols() if s.kind in ("velocity", "acceleration")]
    if leftover:
        raise MechanicsError(f"internal: H kept velocity symbols {leftover}")
    return FirstOrderSystem(phase, h, primaries, defs, source=sys)


def _acceleration_decomposition(sys: LagrangianSystem):
    """L = sum_i f_i(q, v) * a_i + g(q, v); raises if L is not affine in accelerations."""
    table = sys.table
    accs = [table.acceleration(c) for c in sys.coords]
    try:
        g, coeffs = sys.L.split_affine(accs)
    except ExprError as exc:
        raise UnsupportedShape(f"L not affine in accelerations: {exc}") from exc
    f = [coeffs.get(a, Expr.const(table, 0)) for a in accs]
    return f, g


def _integrate_in(e: Expr, v: Symbol) -> Expr:
    """Polynomial antiderivative in v (denominator must be v-free)."""
    if e.den and any(v.index == i for i, _ in _den_vars(e)):
        raise MechanicsError(f"cannot integrate: denominator depends on {v}")
    table = e.table
    out = Expr.const(table, 0)
    num = e.num
    vsym = Expr.sym(table, v)
    for m, c in num.items():
        k = 0
        rest = []
        for i, ee in m:
            if i == v.index:
                k = ee
            else:
                rest.append((i, ee))
        term = Expr(table, {tuple(rest): c}, dict(e.den))
        out = out + term * vsym ** (k + 1) / (k + 1)
    return out


def _den_vars(e: Expr):
    for m in e.den:
        for pair in m:
            yield pair


def counter_term(sys: LagrangianSystem):
    """Total-derivative counter-term W with L + dW/dt acceleration-free.

    The integration constant C(q) is fixed to zero.  Requires the symmetry
    d f_i/d v_j = d f_j/d v_i, which is exactly the Newton-compatibility
    condition on the acceleration-affine Lagrangian.
    """
    if sys.order != 2:
        raise MechanicsError("counter_term expects a second-order system")
    table = sys.table
    f, _ = _acceleration_decomposition(sys)
    vels = [table.velocity(c) for c in sys.coords]
    n = len(sys.coords)
    for i in range(n):
        for j in range(i):
            if f[i].diff(vels[j]) != f[j].diff(vels[i]):
                raise UnsupportedShape("acceleration coefficients are not a gradient; no counter-term exists")
    w = Expr.const(table, 0)
    for i in range(n):
        residual = -f[i] - w.diff(vels[i])
        w = w + _integrate_in(residual, vels[i])
    dw_dt = Expr.const(table, 0)
    for c in sys.coords:
        v, a = Expr.sym(table, table.velocity(c)), Expr.sym(table, table.acceleration(c))
        dw_dt = dw_dt + w.diff(c) * v + w.diff(table.velocity(c)) * a
    reduced = sys.L + dw_dt
    for c in sys.coords:
        if reduced.degree_in(table.acceleration(c)) > 0:
            raise MechanicsError("internal: counter-term failed to cancel accelerations")
    return w, LagrangianSystem(table, sys.coords, 1, reduced)


def ostrogradsky_reduce(sys: LagrangianSystem) -> LagrangianSystem:
    """Rewrite a second-order system over doubled coordinates.

    Per original coordinate c a pair (c1, c2) is introduced; c2 stands for the
    velocity of c and d(c2) for its acceleration.  c1 carries c2 as its
    velocity alias, so the downstream Legendre transform produces the two
    momentum families and the primary constraints p2_i - f_i.
    """
    if sys.order == 1:
        return sys
    if sys.order != 2:
        raise MechanicsError("ostrogradsky_reduce supports order 2 only")
    _acceleration_decomposition(sys)  # shape check
    table = sys.table
    new_coords = []
    subs = {}
    aliases = {}
    for c in sys.coords:
        c1 = table.position(_fresh(table, f"Q1_{c.name}"))
        c2 = table.position(_fresh(table, f"Q2_{c.name}"))
        new_coords.extend([c1, c2])
        subs[c] = Expr.sym(table, c1)
        subs[table.velocity(c)] = Expr.sym(table, c2)
        subs[table.acceleration(c)] = Expr.sym(table, table.velocity(c2))
        aliases[c1] = Expr.sym(table, c2)
    return LagrangianSystem(table, tuple(new_coords), 1, sys.L.substitute(subs), aliases)


def pons_reduce(sys: LagrangianSystem) -> LagrangianSystem:
    """Rewrite a second-order system with auxiliary coordinates and multipliers.

    Adds x_i standing for the velocity of coordinate i and a multiplier lam_i
    enforcing x_i - d(q_i); the multiplier is itself treated as a position
    coordinate.  Works for any order-2 Lagrangian.
    """
    if sys.order == 1:
        return sys
    if sys.order != 2:
        raise MechanicsError("pons_reduce supports order 2 only")
    table = sys.table
    xs, lams = [], []
    subs = {}
    for i, c in enumerate(sys.coords, start=1):
        x = table.position(_fresh(table, f"x{i}"))
        lam = table.position(_fresh(table, f"lam{i}"))
        xs.append(x)
        lams.append(lam)
        subs[table.velocity(c)] = Expr.sym(table, x)
        subs[table.acceleration(c)] = Expr.sym(table, table.velocity(x))
    new_l = sys.L.substitute(subs)
    for c, x, lam in zip(sys.coords, xs, lams):
        new_l = new_l + Expr.sym(table, lam) * (Expr.sym(table, x) - Expr.sym(table, table.velocity(c)))
    return LagrangianSystem(table, tuple(sys.coords) + tuple(xs) + tuple(lams), 1, new_l)


def _fresh(table: SymbolTable, name: str) -> str:
    while name in table:
        name = name + "_"
    return name
