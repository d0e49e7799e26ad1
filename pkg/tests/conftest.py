import random
from fractions import Fraction

import pytest

from hamdirac import (
    LagrangianSystem,
    SymbolTable,
    classify,
    dirac_iterate,
    legendre,
    ostrogradsky_reduce,
    parse_expr,
    pons_reduce,
)
from hamdirac.expr import Expr

L1_SRC = "d(q1)*d(q3) + (1/2)*q2*q3^2"
L2_SRC = "q1*d(q2) - q2*d(q1) - q1^2 - q2^2"
L3_SRC = "(1/2)*(q1 + d(q2) + d(q3))^2 + (1/2)*(d(q4) - d(q2))^2 + (1/2)*(q1 + 2*q2)*(q1 + 2*q4)"
L4_SRC = "-(1/2)*q*dd(q) - (1/2)*q^2"


def make_system(src, names, order=1):
    table = SymbolTable()
    coords = tuple(table.position(n) for n in names)
    return LagrangianSystem(table, coords, order, parse_expr(src, table))


def analyzed(src, names, order=1, path=None):
    sys = make_system(src, names, order)
    if order == 2:
        sys = ostrogradsky_reduce(sys) if path in (None, "ssok") else pons_reduce(sys)
    fos = legendre(sys)
    result = classify(dirac_iterate(fos))
    return sys.table, fos, result


@pytest.fixture
def l1():
    return analyzed(L1_SRC, ["q1", "q2", "q3"])


@pytest.fixture
def l2():
    return analyzed(L2_SRC, ["q1", "q2"])


@pytest.fixture
def l3():
    return analyzed(L3_SRC, ["q1", "q2", "q3", "q4"])


@pytest.fixture
def l4_ssok():
    return analyzed(L4_SRC, ["q"], order=2, path="ssok")


@pytest.fixture
def l4_pons():
    return analyzed(L4_SRC, ["q"], order=2, path="pons")


def random_poly(table, symbols, rng, max_degree=3, terms=4, coeff_range=4):
    """Random polynomial with small rational coefficients, exact arithmetic."""
    e = Expr.const(table, 0)
    for _ in range(rng.randint(1, terms)):
        c = Fraction(rng.randint(-coeff_range, coeff_range), rng.randint(1, 3))
        if c == 0:
            c = Fraction(1)
        term = Expr.const(table, c)
        deg = rng.randint(0, max_degree)
        for _ in range(deg):
            term = term * Expr.sym(table, rng.choice(symbols))
        e = e + term
    return e


def rng_for(name):
    return random.Random(name)
