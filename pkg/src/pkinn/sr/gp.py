"""Genetic-programming symbolic regression over {+, -, *} trees with constant refinement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError
from .expression import BINARY_OPS, N_VARS, Expression, const, evaluate_node, node_size, var


@dataclass(frozen=True)
class GPConfig:
    population_size: int = 200
    generations: int = 100
    operators: tuple[str, ...] = BINARY_OPS
    max_size: int = 25
    parsimony: float = 1e-3
    crossover_rate: float = 0.7
    mutation_rate: float = 0.25
    tournament_size: int = 5
    elite_size: int = 2
    max_init_depth: int = 3
    constant_range: float = 2.0
    refine_steps: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise InvalidArgumentError("population_size must be >= 2")
        if self.generations < 0:
            raise InvalidArgumentError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")
        if not self.operators or any(op not in BINARY_OPS for op in self.operators):
            raise InvalidArgumentError(f"operators must be a nonempty subset of {BINARY_OPS}")
        if self.max_size < 1 or self.tournament_size < 1:
            raise InvalidArgumentError("max_size and tournament_size must be positive")


@dataclass
class GPResult:
    best: Expression
    fitness: float
    mse: float
    history: list[float] = field(default_factory=list)


# -- tree utilities ------------------------------------------------------------


def _paths(node, prefix=()):
    """Every subtree position as a path of child indices (1 = left, 2 = right)."""
    yield prefix
    if node[0] not in ("const", "var"):
        yield from _paths(node[1], prefix + (1,))
        yield from _paths(node[2], prefix + (2,))


def _get(node, path):
    for i in path:
        node = node[i]
    return node


def _replace(node, path, new):
    if not path:
        return new
    i = path[0]
    children = list(node)
    children[i] = _replace(node[i], path[1:], new)
    return tuple(children)


def _constants(node, out):
    if node[0] == "const":
        out.append(node[1])
    elif node[0] != "var":
        _constants(node[1], out)
        _constants(node[2], out)
    return out


def _set_constants(node, values, pos=None):
    pos = pos if pos is not None else [0]
    if node[0] == "const":
        v = values[pos[0]]
        pos[0] += 1
        return ("const", float(v))
    if node[0] == "var":
        return node
    return (node[0], _set_constants(node[1], values, pos), _set_constants(node[2], values, pos))


def _eval_jac(node, x, k, pos):
    """Value and Jacobian w.r.t. the tree's constants (preorder), forward mode."""
    n = x.shape[0]
    kind = node[0]
    if kind == "const":
        jac = np.zeros((n, k))
        jac[:, pos[0]] = 1.0
        pos[0] += 1
        return np.full(n, node[1]), jac
    if kind == "var":
        return x[:, node[1]], np.zeros((n, k))
    a, ja = _eval_jac(node[1], x, k, pos)
    b, jb = _eval_jac(node[2], x, k, pos)
    if kind == "+":
        return a + b, ja + jb
    if kind == "-":
        return a - b, ja - jb
    return a * b, ja * b[:, None] + jb * a[:, None]


# -- the search --------------------------------------------------------------


class _Search:
    def __init__(self, x: np.ndarray, y: np.ndarray, config: GPConfig):
        self.x, self.y, self.cfg = x, y, config
        self.rng = np.random.default_rng(config.seed)
        self.cache: dict[tuple, tuple[tuple, float, float]] = {}

    def random_leaf(self):
        if self.rng.random() < 0.6:
            return var(int(self.rng.integers(N_VARS)))
        r = self.cfg.constant_range
        return const(float(self.rng.uniform(-r, r)))

    def random_tree(self, depth: int):
        if depth <= 1 or (depth < self.cfg.max_init_depth and self.rng.random() < 0.3):
            return self.random_leaf()
        op = self.cfg.operators[int(self.rng.integers(len(self.cfg.operators)))]
        return (op, self.random_tree(depth - 1), self.random_tree(depth - 1))

    def mse(self, node) -> float:
        with np.errstate(all="ignore"):
            err = evaluate_node(node, self.x) - self.y
            value = float(np.mean(err * err))
        return value if np.isfinite(value) else np.inf

    def refine(self, node):
        """Levenberg-Marquardt on the tree's constants."""
        c = np.array(_constants(node, []))
        if c.size == 0 or self.cfg.refine_steps == 0:
            return node, self.mse(node)
        eye = np.eye(c.size)
        with np.errstate(all="ignore"):
            f, jac = _eval_jac(node, self.x, c.size, [0])
            r = self.y - f
            best = float(np.mean(r * r))
        if not np.isfinite(best):
            return node, np.inf
        mu = 1e-3
        for _ in range(self.cfg.refine_steps):
            with np.errstate(all="ignore"):
                jtj = jac.T @ jac
                g = jac.T @ r
            if not (np.all(np.isfinite(jtj)) and np.all(np.isfinite(g))):
                break
            try:
                step = np.linalg.solve(jtj + mu * (jtj * eye + 1e-12 * eye), g)
            except np.linalg.LinAlgError:
                break
            with np.errstate(all="ignore"):
                f_new, jac_new = _eval_jac(_set_constants(node, c + step), self.x, c.size, [0])
                r_new = self.y - f_new
                value = float(np.mean(r_new * r_new))
            if value < best:
                gain = best - value
                c, r, jac, best, mu = c + step, r_new, jac_new, value, mu / 3.0
                if gain <= 1e-9 * best:
                    break
            else:
                mu *= 4.0
                if mu > 1e6:
                    break
        return _set_constants(node, c), best

    def score(self, node):
        hit = self.cache.get(node)
        if hit is None:
            refined, mse = self.refine(node)
            fitness = mse + self.cfg.parsimony * node_size(refined)
            hit = (refined, fitness, mse)
            self.cache[node] = hit
        return hit

    def tournament(self, pop, fit):
        idx = self.rng.integers(len(pop), size=self.cfg.tournament_size)
        return pop[min(idx, key=lambda i: (fit[i], i))]

    def crossover(self, a, b):
        pa = list(_paths(a))
        pb = list(_paths(b))
        path_a = pa[int(self.rng.integers(len(pa)))]
        path_b = pb[int(self.rng.integers(len(pb)))]
        return _replace(a, path_a, _get(b, path_b))

    def mutate(self, node):
        paths = list(_paths(node))
        path = paths[int(self.rng.integers(len(paths)))]
        target = _get(node, path)
        if self.rng.random() < 0.5:
            return _replace(node, path, self.random_tree(int(self.rng.integers(1, self.cfg.max_init_depth + 1))))
        # point mutation
        if target[0] == "const":
            new = const(target[1] + float(self.rng.normal(0.0, 0.5)))
        elif target[0] == "var":
            new = self.random_leaf()
        else:
            ops = self.cfg.operators
            new = (ops[int(self.rng.integers(len(ops)))], target[1], target[2])
        return _replace(node, path, new)

    def offspring(self, pop, fit):
        parent = self.tournament(pop, fit)
        child = parent
        if self.rng.random() < self.cfg.crossover_rate:
            child = self.crossover(parent, self.tournament(pop, fit))
        if self.rng.random() < self.cfg.mutation_rate or child == parent:
            child = self.mutate(child)
        if node_size(child) > self.cfg.max_size:
            child = parent
        return child

    def run(self) -> GPResult:
        cfg = self.cfg
        pop, fit = [], []
        for i in range(cfg.population_size):
            depth = 1 + i % cfg.max_init_depth
            tree, f, _ = self.score(self.random_tree(depth + 1))
            pop.append(tree)
            fit.append(f)
        history = [min(fit)]
        for _ in range(cfg.generations):
            order = sorted(range(len(pop)), key=lambda i: (fit[i], i))
            new_pop = [pop[i] for i in order[: cfg.elite_size]]
            new_fit = [fit[i] for i in order[: cfg.elite_size]]
            while len(new_pop) < cfg.population_size:
                tree, f, _ = self.score(self.offspring(pop, fit))
                new_pop.append(tree)
                new_fit.append(f)
            pop, fit = new_pop, new_fit
            history.append(min(fit))
        best = min(range(len(pop)), key=lambda i: (fit[i], i))
        node = pop[best]
        return GPResult(Expression(node), fit[best], self.mse(node), history)


def gp_search(states, targets, config: GPConfig | None = None) -> GPResult:
    x = np.asarray(states, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.ndim != 2 or x.shape[1] != N_VARS or x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise InvalidArgumentError("states must be a nonempty (n, 3) array matching targets")
    return _Search(x, y, config or GPConfig()).run()


def gp_regress(states, targets, config: GPConfig | None = None) -> Expression:
    """Best-fitness expression (MSE plus parsimony times size) found by the search."""
    return gp_search(states, targets, config).best
