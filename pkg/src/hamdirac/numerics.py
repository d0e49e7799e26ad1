"""Numeric side of the boundary-value story.

The reduced Hamilton equations are compiled to plain float closures, a
fixed-step RK4 integrator produces deterministic trajectories, and a shooting
Newton iteration realizes the endpoint-to-constants map: given positions at
both ends it reconstructs the missing initial momenta.  For the unit
oscillator the classical A/B constants of Q(t) = A e^{it} + B e^{-it} are
reported as well.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

from .expr import Expr


class NumericsError(Exception):
    pass


class SingularShooting(NumericsError):
    pass


@dataclass
class ReducedField:
    pairs: list  # [(Q Symbol, P Symbol), ...]
    rhs: object  # rhs(t, y) -> tuple(dy)
    energy: object  # H(y) -> float
    h_expr: Expr
    oscillator_like: bool  # 1 dof, unit frequency, no linear terms

    @property
    def dim(self):
        return 2 * len(self.pairs)


def compile_field(h_reduced: Expr, pairs, params: dict | None = None) -> ReducedField:
    """Compile (dQ, dP) = (dH/dP, -dH/dQ) into float closures.

    params supplies float values for any parameter symbols left in H;
    anything else loose (an unfixed gauge coordinate, a multiplier) is an
    error.
    """
    table = h_reduced.table
    params = {s: float(v) for s, v in (params or {}).items()}
    allowed = {s for q, p in pairs for s in (q, p)} | set(params)
    stray = [s for s in h_reduced.free_symbols() if s not in allowed]
    if stray:
        raise NumericsError(f"stray symbols in reduced Hamiltonian: {[s.name for s in stray]}")

    h = h_reduced.substitute({s: Expr.const(table, Fraction(v)) for s, v in params.items()}) if params else h_reduced
    names = {}
    for k, (q, p) in enumerate(pairs):
        names[q.index] = f"y[{2 * k}]"
        names[p.index] = f"y[{2 * k + 1}]"

    comps = []
    for q, p in pairs:
        comps.append(h.diff(p))
        comps.append(-h.diff(q))
    body = ", ".join(_expr_to_py(c, names) for c in comps)
    rhs = eval(f"lambda t, y: ({body}{',' if len(comps) == 1 else ''})")  # noqa: S307 - generated from exact expressions
    energy = eval(f"lambda y: ({_expr_to_py(h, names)})")  # noqa: S307

    osc = False
    if len(pairs) == 1:
        q, p = pairs[0]
        a = h.diff(q).diff(q) / 2
        c = h.diff(p).diff(p) / 2
        b = h.diff(q).diff(p)
        lin_q = h.diff(q).substitute({q: Expr.const(table, 0), p: Expr.const(table, 0)})
        lin_p = h.diff(p).substitute({q: Expr.const(table, 0), p: Expr.const(table, 0)})
        if all(e.is_constant() for e in (a, b, c, lin_q, lin_p)):
            w2 = 4 * a.constant_value() * c.constant_value() - b.constant_value() ** 2
            osc = w2 == 1 and lin_q.constant_value() == 0 and lin_p.constant_value() == 0
    return ReducedField(list(pairs), rhs, energy, h, osc)


def _expr_to_py(e: Expr, names: dict) -> str:
    def poly(p):
        if not p:
            return "0.0"
        parts = []
        for mono, c in sorted(p.items()):
            factors = [repr(float(c))]
            for idx, exp in mono:
                var = names.get(idx)
                if var is None:
                    raise NumericsError(f"no runtime slot for symbol index {idx}")
                factors.append(var if exp == 1 else f"{var}**{exp}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    if e.is_polynomial():
        return f"({poly(e.num)})"
    return f"(({poly(e.num)}) / ({poly(e.den)}))"


@dataclass
class Trajectory:
    times: list
    states: list  # tuples, layout (Q1, P1, Q2, P2, ...)
    energies: list
    pairs: list

    def csv(self) -> str:
        header = ["t"]
        for q, _p in self.pairs:
            header.append(q.name)
        for _q, p in self.pairs:
            header.append(p.name)
        header.append("H")
        lines = [",".join(header)]
        m = len(self.pairs)
        for t, y, h in zip(self.times, self.states, self.energies):
            rec = [repr(t)]
            rec += [repr(y[2 * k]) for k in range(m)]
            rec += [repr(y[2 * k + 1]) for k in range(m)]
            rec.append(repr(h))
            lines.append(",".join(rec))
        return "\n".join(lines) + "\n"


def integrate(field: ReducedField, init, t1: float, t2: float, step: float) -> Trajectory:
    """Classical fixed-step RK4 from t1 to t2 (step adjusted to land on t2)."""
    if step <= 0:
        raise NumericsError("step must be positive")
    if t2 <= t1:
        raise NumericsError("t2 must exceed t1")
    nsteps = max(1, math.ceil((t2 - t1) / step - 1e-12))
    h = (t2 - t1) / nsteps
    rhs = field.rhs
    y = tuple(float(v) for v in init)
    if len(y) != field.dim:
        raise NumericsError(f"state dimension {len(y)} != {field.dim}")
    times = [t1]
    states = [y]
    energies = [field.energy(y)]
    t = t1
    half = h / 2.0
    sixth = h / 6.0
    for i in range(nsteps):
        k1 = rhs(t, y)
        y2 = tuple(a + half * b for a, b in zip(y, k1))
        k2 = rhs(t + half, y2)
        y3 = tuple(a + half * b for a, b in zip(y, k2))
        k3 = rhs(t + half, y3)
        y4 = tuple(a + h * b for a, b in zip(y, k3))
        k4 = rhs(t + h, y4)
        y = tuple(a + sixth * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
        t = t1 + (i + 1) * h
        if any(not math.isfinite(v) for v in y):
            raise NumericsError(f"non-finite state at t = {t}")
        times.append(t)
        states.append(y)
        energies.append(field.energy(y))
    return Trajectory(times, states, energies, field.pairs)


@dataclass
class IotaSolution:
    initial_state: tuple  # full (Q1, P1, ...) at t1
    constants: dict  # name -> float, the integral-constant parametrization
    trajectory: Trajectory
    residual: float


def solve_iota(
    field: ReducedField,
    boundary: dict,
    t1: float,
    t2: float,
    step: float = 1e-3,
    init_only: dict | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> IotaSolution:
    """Shooting solve of the two-point problem Q(t1), Q(t2) -> initial state.

    boundary maps each position symbol name to (value at t1, value at t2).
    Newton iterates on the unknown initial momenta; a singular shooting
    Jacobian (e.g. a resonant interval) is rejected.
    """
    m = len(field.pairs)
    if m == 0:
        raise NumericsError("the reduced system has no physical pairs; nothing to solve")
    names = [q.name for q, _p in field.pairs]
    missing = [nm for nm in names if nm not in boundary]
    if missing:
        raise NumericsError(f"boundary values required for positions: {missing}")
    q1 = [float(boundary[nm][0]) for nm in names]
    q2 = [float(boundary[nm][1]) for nm in names]

    def shoot(pvec):
        y0 = []
        for k in range(m):
            y0 += [q1[k], pvec[k]]
        traj = integrate(field, y0, t1, t2, step)
        yend = traj.states[-1]
        return [yend[2 * k] - q2[k] for k in range(m)], traj

    p = [0.0] * m
    res, traj = shoot(p)
    it = 0
    scale = max(1.0, max(abs(v) for v in q1 + q2))
    while max(abs(r) for r in res) > tol:
        if it >= max_iter:
            raise NumericsError("shooting iteration did not converge")
        jac = [[0.0] * m for _ in range(m)]
        eps = 1e-7 * scale
        for j in range(m):
            pj = list(p)
            pj[j] += eps
            rj, _ = shoot(pj)
            for i in range(m):
                jac[i][j] = (rj[i] - res[i]) / eps
        delta = _dense_solve(jac, [-r for r in res])
        if delta is None:
            raise SingularShooting(
                f"singular shooting Jacobian on [{t1}, {t2}]; endpoint data cannot determine the constants"
            )
        p = [a + d for a, d in zip(p, delta)]
        res, traj = shoot(p)
        it += 1

    constants = {}
    for k, (qs, ps) in enumerate(field.pairs):
        constants[f"{qs.name}(t1)"] = q1[k]
        constants[f"{ps.name}(t1)"] = p[k]
    for nm, val in (init_only or {}).items():
        constants[f"{nm}(t1)"] = float(val)
    if field.oscillator_like and m == 1:
        qa, qb = q1[0], q2[0]
        s = cmath.sin(complex(t2 - t1))
        a_const = (qa * cmath.exp(1j * t2) - qb * cmath.exp(1j * t1)) / (2j * s)
        b_const = (qb * cmath.exp(-1j * t1) - qa * cmath.exp(-1j * t2)) / (2j * s)
        constants["A"] = _tidy_complex(a_const)
        constants["B"] = _tidy_complex(b_const)
    init_state = []
    for k in range(m):
        init_state += [q1[k], p[k]]
    return IotaSolution(tuple(init_state), constants, traj, max(abs(r) for r in res))


def _tidy_complex(z):
    return z.real if abs(z.imag) < 1e-12 else (z.real, z.imag)


def _dense_solve(a, b):
    # pivots below the finite-difference noise floor mean a singular map
    n = len(b)
    m = [list(map(float, a[i])) + [float(b[i])] for i in range(n)]
    for c in range(n):
        piv, best = None, 0.0
        for i in range(c, n):
            if abs(m[i][c]) > best:
                piv, best = i, abs(m[i][c])
        if piv is None or best < 1e-6:
            return None
        m[c], m[piv] = m[piv], m[c]
        p = m[c][c]
        m[c] = [x / p for x in m[c]]
        for i in range(n):
            if i != c and m[i][c]:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return [m[i][n] for i in range(n)]
