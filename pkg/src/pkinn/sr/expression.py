"""Expression trees over the state variables X0, X1, X2.

Nodes are plain tuples so they hash and compare structurally:

* ``("const", value)``
* ``("var", index)``
* ``(op, left, right)`` with ``op`` in ``{"+", "-", "*"}``
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError

BINARY_OPS = ("+", "-", "*")
VAR_NAMES = ("X0", "X1", "X2")
N_VARS = 3


def const(value: float) -> tuple:
    return ("const", float(value))


def var(index: int) -> tuple:
    return ("var", int(index))


def add(a, b) -> tuple:
    return ("+", _node(a), _node(b))


def sub(a, b) -> tuple:
    return ("-", _node(a), _node(b))


def mul(a, b) -> tuple:
    return ("*", _node(a), _node(b))


def _node(x):
    if isinstance(x, Expression):
        return x.node
    if isinstance(x, (int, float, np.floating)):
        return const(x)
    return x


def evaluate_node(node: tuple, states: np.ndarray) -> np.ndarray:
    kind = node[0]
    if kind == "const":
        return np.full(states.shape[0], node[1])
    if kind == "var":
        return states[:, node[1]]
    a = evaluate_node(node[1], states)
    b = evaluate_node(node[2], states)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    raise InvalidArgumentError(f"unknown node kind {kind!r}")


def node_size(node: tuple) -> int:
    if node[0] in ("const", "var"):
        return 1
    return 1 + node_size(node[1]) + node_size(node[2])


def node_depth(node: tuple) -> int:
    if node[0] in ("const", "var"):
        return 1
    return 1 + max(node_depth(node[1]), node_depth(node[2]))


# -- polynomial view ---------------------------------------------------------

Monomial = tuple  # exponents (e0, e1, e2)


def polynomial(node: tuple) -> dict[Monomial, float]:
    """Expand into ``{exponents: coefficient}``; every tree over + - * is a polynomial."""
    kind = node[0]
    if kind == "const":
        return {(0,) * N_VARS: node[1]} if node[1] != 0.0 else {}
    if kind == "var":
        exps = [0] * N_VARS
        exps[node[1]] = 1
        return {tuple(exps): 1.0}
    a, b = polynomial(node[1]), polynomial(node[2])
    out: dict = defaultdict(float)
    if kind in ("+", "-"):
        sign = 1.0 if kind == "+" else -1.0
        for m, c in a.items():
            out[m] += c
        for m, c in b.items():
            out[m] += sign * c
    else:
        for ma, ca in a.items():
            for mb, cb in b.items():
                out[tuple(x + y for x, y in zip(ma, mb))] += ca * cb
    return {m: c for m, c in out.items() if c != 0.0}


def poly_degree(node: tuple) -> int:
    degs = [sum(m) for m, c in polynomial(node).items() if c != 0.0]
    return max(degs, default=0)


# -- simplification ----------------------------------------------------------
#
# An expression is normalised into a list of terms ``(coef, factors)`` where
# ``factors`` is a sorted tuple of variable nodes and (non-expanded) sum nodes.
# Products of a sum with anything stay factored; only like terms are merged.


def _factor_key(node):
    if node[0] == "var":
        return (0, node[1], "")
    return (1, 0, repr(node))


def _terms(node) -> list[tuple[float, tuple]]:
    kind = node[0]
    if kind == "const":
        return [(node[1], ())]
    if kind == "var":
        return [(1.0, (node,))]
    a, b = _terms(node[1]), _terms(node[2])
    if kind == "+":
        return a + b
    if kind == "-":
        return a + [(-c, f) for c, f in b]
    a, b = _merge(a), _merge(b)
    if not a or not b:
        return []
    ca, fa = _as_factor(a)
    cb, fb = _as_factor(b)
    return [(ca * cb, tuple(sorted(fa + fb, key=_factor_key)))]


def _as_factor(terms) -> tuple[float, tuple]:
    if len(terms) == 1:
        return terms[0]
    return 1.0, (_build_sum(terms),)


def _merge(terms):
    merged: dict = {}
    for c, f in terms:
        merged[f] = merged.get(f, 0.0) + c
    return [(c, f) for f, c in merged.items() if c != 0.0]


def _build_product(coef: float, factors: tuple):
    node = None
    for f in factors:
        node = f if node is None else ("*", node, f)
    if node is None:
        return const(coef)
    if coef == 1.0:
        return node
    return ("*", const(coef), node)


def _term_order(term):
    coef, factors = term
    exps = [0] * N_VARS
    deg = 0
    for f in factors:
        if f[0] == "var":
            exps[f[1]] += 1
            deg += 1
        else:
            deg += poly_degree(f)
    return (-deg, tuple(-e for e in exps), repr(factors))


def _build_sum(terms):
    terms = sorted(terms, key=_term_order)
    node = None
    for coef, factors in terms:
        if node is None:
            node = _build_product(coef, factors)
        elif coef < 0:
            node = ("-", node, _build_product(-coef, factors))
        else:
            node = ("+", node, _build_product(coef, factors))
    return const(0.0) if node is None else node


def simplify_node(node: tuple) -> tuple:
    return _build_sum(_merge(_terms(node)))


# -- rendering ---------------------------------------------------------------


def _fmt_coef(value: float, precision: int) -> str:
    return f"{value:.{precision}f}"


def _render_factors(factors, precision) -> str:
    parts = []
    i = 0
    while i < len(factors):
        f = factors[i]
        if f[0] == "var":
            power = 1
            while i + power < len(factors) and factors[i + power] == f:
                power += 1
            parts.append(VAR_NAMES[f[1]] + (f"^{power}" if power > 1 else ""))
            i += power
        else:
            parts.append("(" + _render_terms(_merge(_terms(f)), precision) + ")")
            i += 1
    return "*".join(parts)


def _render_terms(terms, precision) -> str:
    out = ""
    for coef, factors in sorted(terms, key=_term_order):
        mag = round(abs(coef), precision)
        if mag == 0.0:
            continue
        body = _render_factors(factors, precision)
        if not factors:
            text = _fmt_coef(mag, precision)
        elif mag == 1.0:
            text = body
        else:
            text = f"{_fmt_coef(mag, precision)}*{body}"
        if not out:
            out = ("-" if coef < 0 else "") + text
        else:
            out += (" - " if coef < 0 else " + ") + text
    return out or "0"


def render(node: tuple, precision: int = 1) -> str:
    return _render_terms(_merge(_terms(node)), precision)


def infix(node: tuple) -> str:
    """Unsimplified, fully parenthesised rendering at full precision."""
    kind = node[0]
    if kind == "const":
        return repr(node[1])
    if kind == "var":
        return VAR_NAMES[node[1]]
    return f"({infix(node[1])} {kind} {infix(node[2])})"


@dataclass(frozen=True)
class Expression:
    node: tuple

    @classmethod
    def constant(cls, value: float) -> Expression:
        return cls(const(value))

    @classmethod
    def variable(cls, index: int) -> Expression:
        return cls(var(index))

    @classmethod
    def linear(cls, coefficients, intercept: float = 0.0) -> Expression:
        """``intercept + sum_i coefficients[i] * X_i``, skipping zero terms."""
        node = None
        for i, c in enumerate(coefficients):
            if c == 0:
                continue
            term = mul(const(c), var(i))
            node = term if node is None else add(node, term)
        if intercept != 0 or node is None:
            node = const(intercept) if node is None else add(node, const(intercept))
        return cls(node)

    def __call__(self, states) -> np.ndarray:
        return self.evaluate(states)

    def evaluate(self, states) -> np.ndarray:
        x = np.atleast_2d(np.asarray(states, dtype=float))
        return evaluate_node(self.node, x)

    @property
    def size(self) -> int:
        return node_size(self.node)

    @property
    def depth(self) -> int:
        return node_depth(self.node)

    def polynomial(self) -> dict[Monomial, float]:
        return polynomial(self.node)

    def simplify(self) -> Expression:
        return Expression(simplify_node(self.node))

    def to_text(self, precision: int = 1) -> str:
        return render(self.node, precision)

    def __str__(self) -> str:
        return self.to_text()

    def __add__(self, other):
        return Expression(add(self.node, _node(other)))

    def __sub__(self, other):
        return Expression(sub(self.node, _node(other)))

    def __mul__(self, other):
        return Expression(mul(self.node, _node(other)))

    def __rmul__(self, other):
        return Expression(mul(_node(other), self.node))


X0, X1, X2 = (Expression.variable(i) for i in range(3))


def simplify(expr: Expression) -> Expression:
    return expr.simplify()


def to_text(expr: Expression, precision: int = 1) -> str:
    return expr.to_text(precision)
