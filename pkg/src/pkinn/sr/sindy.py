"""Sparse regression over a polynomial candidate library (sequentially thresholded least squares)."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from ..errors import IllConditionedError, InvalidArgumentError
from .expression import VAR_NAMES, Expression, add, const, mul, var


@dataclass(frozen=True)
class CandidateLibrary:
    """Monomials in (X0, X1, X2) up to ``degree``.

    Column order for degree 2 is ``1, X0, X1, X2, X0^2, X0*X1, X0*X2, X1^2, X1*X2, X2^2``.
    """

    degree: int = 2
    n_vars: int = 3

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise InvalidArgumentError(f"library degree must be 1 or 2, got {self.degree}")

    @property
    def terms(self) -> list[tuple[int, ...]]:
        """Each term as the tuple of variable indices it multiplies (empty for the constant)."""
        out = [()]
        for d in range(1, self.degree + 1):
            out += list(combinations_with_replacement(range(self.n_vars), d))
        return out

    @property
    def names(self) -> list[str]:
        names = []
        for term in self.terms:
            if not term:
                names.append("1")
                continue
            parts = []
            for i in sorted(set(term)):
                k = term.count(i)
                parts.append(VAR_NAMES[i] + (f"^{k}" if k > 1 else ""))
            names.append("*".join(parts))
        return names

    def __len__(self) -> int:
        return len(self.terms)

    def evaluate(self, states) -> np.ndarray:
        x = np.asarray(states, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_vars or x.shape[0] == 0:
            raise InvalidArgumentError(f"states must be a nonempty (n, {self.n_vars}) array")
        cols = [np.prod(x[:, list(term)], axis=1) if term else np.ones(len(x)) for term in self.terms]
        return np.column_stack(cols)

    def term_node(self, j: int) -> tuple:
        term = self.terms[j]
        if not term:
            return const(1.0)
        node = var(term[0])
        for i in term[1:]:
            node = mul(node, var(i))
        return node


def build_library(states, degree: int = 2) -> np.ndarray:
    return CandidateLibrary(degree).evaluate(states)


@dataclass
class SparseModel:
    library: CandidateLibrary
    coefficients: np.ndarray  # (n_targets, len(library))
    threshold: float
    history: list[list[np.ndarray]] = field(default_factory=list, repr=False)

    def predict(self, states) -> np.ndarray:
        return self.library.evaluate(states) @ self.coefficients.T

    def expression(self, k: int) -> Expression:
        node = None
        for j, c in enumerate(self.coefficients[k]):
            if c == 0.0:
                continue
            term = self.library.term_node(j)
            if term != ("const", 1.0):
                term = mul(const(c), term)
            else:
                term = const(c)
            node = term if node is None else add(node, term)
        return Expression(const(0.0) if node is None else node)

    def expressions(self) -> list[Expression]:
        return [self.expression(k) for k in range(self.coefficients.shape[0])]

    def supports(self) -> list[set[str]]:
        names = self.library.names
        return [{names[j] for j in np.flatnonzero(row)} for row in self.coefficients]


def _solve(a: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    if a.shape[1] == 0:
        return np.zeros(0)
    if ridge > 0:
        return np.linalg.solve(a.T @ a + ridge * np.eye(a.shape[1]), a.T @ y)
    return np.linalg.lstsq(a, y, rcond=None)[0]


def stlsq(
    design,
    targets,
    threshold: float = 0.1,
    max_iter: int = 20,
    ridge: float = 0.0,
    library: CandidateLibrary | None = None,
) -> SparseModel:
    """Sequentially thresholded least squares, one target column at a time.

    Each round fits on the current support, then drops coefficients with
    magnitude below ``threshold``; it stops once the support is unchanged.
    """
    theta = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if theta.ndim != 2 or theta.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"design {theta.shape} and targets {y.shape} row counts differ")
    if not threshold > 0:
        raise InvalidArgumentError("threshold must be positive")
    n, p = theta.shape
    if library is None:
        library = CandidateLibrary(2 if p == 10 else 1)
    if ridge <= 0 and (n < p or np.linalg.matrix_rank(theta) < p):
        raise IllConditionedError(f"design has {n} rows, {p} columns and is rank deficient; enable ridge")

    coefs = np.zeros((y.shape[1], p))
    history = []
    for k in range(y.shape[1]):
        support = np.ones(p, dtype=bool)
        c = np.zeros(p)
        c[support] = _solve(theta[:, support], y[:, k], ridge)
        trace = [support.copy()]
        for _ in range(max_iter):
            keep = support & (np.abs(c) >= threshold)
            if np.array_equal(keep, support):
                break
            support = keep
            c = np.zeros(p)
            c[support] = _solve(theta[:, support], y[:, k], ridge)
            trace.append(support.copy())
        # no-op at a fixed point; enforces the threshold if max_iter ran out
        c[np.abs(c) < threshold] = 0.0
        coefs[k] = c
        history.append(trace)
    return SparseModel(library, coefs, threshold, history)
