"""Partial set covering: choose the fewest viewpoints that cover at least delta * n triangles.

Solvers: greedy, a genetic hyper-heuristic (GA-HH) evolving sequences of
seven low-level move operators, a plain bit-vector GA, and an exact
branch-and-bound search for small instances.

Fitness (higher is better) for a selection ``s`` with cover counts
``c = s . A`` and ``n_cover`` triangles seen at least once::

    feasible:    (m - sum(s)) + (1 - n_cover / sum(c))
    infeasible:  n_cover / (delta * n)

Feasible means ``n_cover >= ceil(delta * n)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceInfeasible, TooLarge
from .visibility import VisibilityMatrix

N_LLH = 7
ACCEPTANCE_RULES = ("non_worsening", "improving_only", "always")


@dataclass(frozen=True)
class GaParams:
    population_size: int = 30
    llh_len: int = 5
    crossover_prob: float = 0.8
    mutation_prob: float = 0.1
    max_generations: int = 500
    stall_generations: int = 50
    delta: float = 1.0
    seed: int = 0
    acceptance: str = "non_worsening"

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.llh_len < 1:
            raise ValueError("llh_len must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if self.acceptance not in ACCEPTANCE_RULES:
            raise ValueError(f"acceptance must be one of {ACCEPTANCE_RULES}")


class ScpInstance:
    """Visibility matrix plus coverage target; immutable after construction."""

    def __init__(self, A, delta=1.0):
        bits = A.bits if isinstance(A, VisibilityMatrix) else np.asarray(A, dtype=bool)
        if bits.ndim != 2:
            raise ValueError("A must be a 2-D matrix")
        if not 0.0 < delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        self.A = bits.copy()
        self.A.setflags(write=False)
        self.m, self.n = bits.shape
        self.delta = float(delta)
        # ceiling with a guard against delta * n landing a hair above an integer
        self.need = max(1, math.ceil(self.delta * self.n - 1e-9)) if self.n else 0
        self._Af = self.A.astype(np.float32)

    def counts(self, S):
        """Cover counts for one selection (m,) or a batch (p, m)."""
        return np.asarray(S, dtype=np.float32) @ self._Af

    def evaluate(self, S):
        """``(fitness, feasible)`` for one selection or a batch."""
        S = np.asarray(S)
        single = S.ndim == 1
        S2 = S[None] if single else S
        c = self.counts(S2)
        n_cover = np.count_nonzero(c, axis=1)
        total = c.sum(axis=1, dtype=np.float64)
        chosen = S2.sum(axis=1)
        feasible = (n_cover >= self.need) & (total > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            f_ok = (self.m - chosen) + (1.0 - n_cover / np.where(total > 0, total, 1.0))
        f_bad = n_cover / (self.delta * self.n)
        f = np.where(feasible, f_ok, f_bad)
        if single:
            return float(f[0]), bool(feasible[0])
        return f, feasible

    def fitness(self, S):
        return self.evaluate(S)[0]

    def is_feasible(self, s):
        return int(np.count_nonzero(self.counts(s))) >= self.need

    def coverable(self):
        return np.flatnonzero(self.A.any(axis=0))


def fitness(s, inst):
    s = np.asarray(s)
    if s.shape != (inst.m,):
        raise ValueError(f"selection has shape {s.shape}, instance has m={inst.m}")
    return inst.fitness(s.astype(bool))


@dataclass
class SolveResult:
    best: np.ndarray
    best_fitness: float
    history: list = field(default_factory=list)  # (generation, best_fitness, best_size)
    iterations_to_best: int = 0
    generations: int = 0

    @property
    def size(self):
        return int(np.count_nonzero(self.best))


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "best_fitness", "best_size"])
        for gen, fit, size in history:
            w.writerow([gen, repr(float(fit)), size])


# --------------------------------------------------------------------------- greedy / exact

def greedy_cover(inst):
    """Repeatedly take the row covering most still-uncovered columns (lowest index on ties)."""
    if not inst.is_feasible(np.ones(inst.m, dtype=bool)):
        uncov = np.flatnonzero(~inst.A.any(axis=0))
        raise InstanceInfeasible(
            f"all {inst.m} candidates cover {inst.n - len(uncov)} of {inst.n} triangles, "
            f"target is {inst.need}",
            uncov,
        )
    s = np.zeros(inst.m, dtype=bool)
    covered = np.zeros(inst.n, dtype=bool)
    A = inst.A.astype(np.int64)
    while covered.sum() < inst.need:
        gain = A @ (~covered)
        gain[s] = -1
        i = int(np.argmax(gain))
        s[i] = True
        covered |= inst.A[i]
    return s


def _row_masks(A):
    return [int("".join("1" if b else "0" for b in row[::-1]) or "0", 2) for row in A]


def brute_force_scp(inst, max_m=25):
    """Exact minimum-cardinality partial cover; lexicographically smallest index set among ties."""
    if inst.m > max_m:
        raise TooLarge(f"exact search limited to m <= {max_m}, got {inst.m}")
    masks = _row_masks(inst.A)
    if bin(_or_all(masks)).count("1") < inst.need:
        raise InstanceInfeasible("full selection misses the target",
                                 np.flatnonzero(~inst.A.any(axis=0)))
    m, need = inst.m, inst.need
    suffix = [0] * (m + 1)
    for i in range(m - 1, -1, -1):
        suffix[i] = suffix[i + 1] | masks[i]
    sizes = [bin(x).count("1") for x in masks]
    max_after = [0] * (m + 1)
    for i in range(m - 1, -1, -1):
        max_after[i] = max(max_after[i + 1], sizes[i])

    def search(start, covered, picks_left, chosen):
        have = bin(covered).count("1")
        if have >= need:
            return chosen
        if picks_left == 0 or start >= m:
            return None
        if bin(covered | suffix[start]).count("1") < need:
            return None
        if have + picks_left * max_after[start] < need:
            return None
        for i in range(start, m):
            if bin(covered | suffix[i]).count("1") < need:
                break
            found = search(i + 1, covered | masks[i], picks_left - 1, chosen + [i])
            if found is not None:
                return found
        return None

    lower = 0 if need == 0 else math.ceil(need / max(1, max(sizes)))
    for k in range(lower, m + 1):
        found = search(0, 0, k, [])
        if found is not None:
            s = np.zeros(m, dtype=bool)
            s[found] = True
            return s
    raise InstanceInfeasible("no cover found")  # unreachable once the full set is feasible


def _or_all(masks):
    out = 0
    for x in masks:
        out |= x
    return out


# --------------------------------------------------------------------------- GA building blocks

def roulette_select(fitnesses, rng):
    """Index drawn with probability f_i / sum(f); uniform if every fitness is zero."""
    f = np.asarray(fitnesses, dtype=float)
    total = f.sum()
    if not total > 0:
        return int(rng.integers(len(f)))
    cum = np.cumsum(f)
    i = int(np.searchsorted(cum, rng.random() * total, side="right"))
    return min(i, len(f) - 1)


def _segment(rng, m):
    a, b = sorted(int(x) for x in rng.integers(0, m, size=2))
    return a, b + 1


@dataclass
class LlhContext:
    """Population snapshot an operator may borrow genes from."""

    solutions: np.ndarray  # (p, m) bool
    fitnesses: np.ndarray  # (p,)
    index: int

    @property
    def adjacent(self):
        return (self.index + 1) % len(self.solutions)

    def random_other(self, rng):
        p = len(self.solutions)
        if p == 1:
            return self.index
        j = int(rng.integers(p - 1))
        return j + (j >= self.index)


def apply_llh(op_id, s, ctx, rng):
    """Return a new solution produced by low-level heuristic ``op_id`` (1..7)."""
    s1 = np.array(s, dtype=bool)
    m = len(s1)
    if op_id == 1:  # random mutation
        i = int(rng.integers(m))
        s1[i] = not s1[i]
    elif op_id == 2:  # random swap
        if m > 1:
            i, j = rng.choice(m, size=2, replace=False)
            s1[i], s1[j] = s1[j], s1[i]
    elif op_id == 3:  # section crossover with the adjacent solution
        s2 = ctx.solutions[ctx.adjacent]
        a, b = _segment(rng, m)
        s1[a:b] = s2[a:b]
    elif op_id in (4, 5):  # scattered crossover, adjacent or random partner
        j = ctx.adjacent if op_id == 4 else ctx.random_other(rng)
        mask = rng.random(m) < 0.5
        s1 = np.where(mask, s1, ctx.solutions[j])
    elif op_id == 6:  # fusion crossover: mask density follows relative fitness
        j = ctx.adjacent
        f1, f2 = float(ctx.fitnesses[ctx.index]), float(ctx.fitnesses[j])
        density = 0.5 if f1 + f2 <= 0 else f1 / (f1 + f2)
        mask = rng.random(m) < density
        s1 = np.where(mask, s1, ctx.solutions[j])
    elif op_id == 7:  # multi-section crossover
        s2 = ctx.solutions[ctx.adjacent]
        for _ in range(int(rng.integers(2, 5))):
            a, b = _segment(rng, m)
            s1[a:b] = s2[a:b]
    else:
        raise ValueError(f"unknown low-level heuristic {op_id}")
    return s1


def _accept(rule, new, old):
    if rule == "always":
        return True
    if rule == "improving_only":
        return new > old
    return new >= old


def _roulette_many(fit, count, rng):
    return np.array([roulette_select(fit, rng) for _ in range(count)], dtype=np.int64)


def _two_point_swap(a, b, rng):
    lo, hi = _segment(rng, a.shape[0])
    a[lo:hi], b[lo:hi] = b[lo:hi].copy(), a[lo:hi].copy()


def _best_feasible(fit, ok):
    """Index of the fittest feasible individual (the elite always is one)."""
    return int(np.argmax(np.where(ok, fit, -np.inf)))


def _finish(best, best_fit, history, it_best, gen):
    return SolveResult(best.copy(), float(best_fit), history, it_best, gen)


# --------------------------------------------------------------------------- GA-HH

def ga_hh_solve(inst, params=None):
    """Genetic hyper-heuristic.

    Individuals pair a solution with a vector of operator ids (0 = no-op).
    Each generation: roulette selection (pairs copied together), segment
    crossover and one-point mutation on the operator vectors only, then each
    operator vector is played on its solution in order, keeping an operator's
    output when the acceptance rule allows. The best feasible pair of the
    previous generation replaces the worst newcomer. Tracking the elite among
    feasible individuals only matters when every feasible cover uses all m
    rows: there the feasible fitness drops below 1 and would otherwise lose
    to infeasible selections.

    Random draws come from one ``default_rng(seed)`` in this order: initial
    operator vectors; per generation, selection, crossover, mutation, then
    operator application individual by individual.
    """
    params = params or GaParams(delta=inst.delta)
    rng = np.random.default_rng(params.seed)
    greedy = greedy_cover(inst)
    P, L = params.population_size, params.llh_len

    sols = np.tile(greedy, (P, 1))
    llhs = rng.integers(0, N_LLH + 1, size=(P, L))
    fit, ok = inst.evaluate(sols)
    b = _best_feasible(fit, ok)
    best_sol, best_llh, best_fit = sols[b].copy(), llhs[b].copy(), float(fit[b])
    history = [(0, best_fit, int(best_sol.sum()))]
    it_best, stall, gen = 0, 0, 0

    for gen in range(1, params.max_generations + 1):
        sel = _roulette_many(fit, P, rng)
        sols, llhs, fit = sols[sel].copy(), llhs[sel].copy(), fit[sel].copy()

        for i in range(0, P - 1, 2):
            if rng.random() < params.crossover_prob:
                _two_point_swap(llhs[i], llhs[i + 1], rng)
        for i in range(P):
            if rng.random() < params.mutation_prob:
                llhs[i, int(rng.integers(L))] = int(rng.integers(0, N_LLH + 1))

        snapshot, snap_fit = sols.copy(), fit.copy()
        ok = np.zeros(P, dtype=bool)
        for i in range(P):
            ctx = LlhContext(snapshot, snap_fit, i)
            cur = sols[i]
            cur_fit, cur_ok = inst.evaluate(cur)
            for op in llhs[i]:
                if op == 0:
                    continue
                cand = apply_llh(int(op), cur, ctx, rng)
                cand_fit, cand_ok = inst.evaluate(cand)
                if _accept(params.acceptance, cand_fit, cur_fit):
                    cur, cur_fit, cur_ok = cand, cand_fit, cand_ok
            sols[i], fit[i], ok[i] = cur, cur_fit, cur_ok

        w = int(np.argmin(fit))
        sols[w], llhs[w], fit[w], ok[w] = best_sol, best_llh, best_fit, True

        b = _best_feasible(fit, ok)
        if fit[b] > best_fit:
            best_sol, best_llh, best_fit = sols[b].copy(), llhs[b].copy(), float(fit[b])
            it_best, stall = gen, 0
        else:
            stall += 1
        history.append((gen, best_fit, int(best_sol.sum())))
        if stall >= params.stall_generations:
            break
    return _finish(best_sol, best_fit, history, it_best, gen)


# --------------------------------------------------------------------------- plain GA

def ga_solve(inst, params=None):
    """Plain GA on solution bit vectors: roulette selection, two-point crossover, one-bit mutation.

    Starts from the same greedy population as :func:`ga_hh_solve` and shares
    its elitism and termination rules.
    """
    params = params or GaParams(delta=inst.delta)
    rng = np.random.default_rng(params.seed)
    greedy = greedy_cover(inst)
    P = params.population_size

    sols = np.tile(greedy, (P, 1))
    fit, ok = inst.evaluate(sols)
    best_sol, best_fit = sols[0].copy(), float(fit[0])
    history = [(0, best_fit, int(best_sol.sum()))]
    it_best, stall, gen = 0, 0, 0

    for gen in range(1, params.max_generations + 1):
        sel = _roulette_many(fit, P, rng)
        sols = sols[sel].copy()
        for i in range(0, P - 1, 2):
            if rng.random() < params.crossover_prob:
                _two_point_swap(sols[i], sols[i + 1], rng)
        for i in range(P):
            if rng.random() < params.mutation_prob:
                j = int(rng.integers(inst.m))
                sols[i, j] = not sols[i, j]
        fit, ok = inst.evaluate(sols)

        w = int(np.argmin(fit))
        sols[w], fit[w], ok[w] = best_sol, best_fit, True

        b = _best_feasible(fit, ok)
        if fit[b] > best_fit:
            best_sol, best_fit = sols[b].copy(), float(fit[b])
            it_best, stall = gen, 0
        else:
            stall += 1
        history.append((gen, best_fit, int(best_sol.sum())))
        if stall >= params.stall_generations:
            break
    return _finish(best_sol, best_fit, history, it_best, gen)


SOLVERS = {"gahh": ga_hh_solve, "ga": ga_solve}


def solve(inst, algo="gahh", params=None):
    """Dispatch by name; greedy and exact return a one-entry history."""
    if algo in SOLVERS:
        return SOLVERS[algo](inst, params)
    if algo == "greedy":
        s = greedy_cover(inst)
    elif algo == "exact":
        s = brute_force_scp(inst)
    else:
        raise ValueError(f"unknown solver {algo!r}")
    f = inst.fitness(s)
    return SolveResult(s, f, [(0, f, int(s.sum()))], 0, 0)
