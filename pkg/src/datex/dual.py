"""Multi-receiver rate allocation by Lagrangian dual decomposition.

The weighted-sum-rate problem couples the receivers only through the
shared per-terminal rates Z_i >= R_i^(l).  Relaxing that coupling with
multipliers splits the problem into one greedy-solvable subproblem per
receiver; the dual is maximized by projected subgradient ascent, and a
primal solution is recovered from the running average of the subproblem
vertices (max per terminal across receivers).  The result carries both
objectives and their gap, so optimality is certified, not assumed.

Multiplier layout: one row per user (sorted order), one column per
terminal.  Column i sums to weight alpha_i with the diagonal entry of a
user's own column pinned to zero.  Dual feasibility of every iterate is
maintained *exactly*: iterates live on a fixed grid of integer multiples
of `quantum` (default 1e-12) with column sums repaired exactly after each
projection, so reported dual values are true lower bounds and the gap is
a genuine certificate.  With exact weights and entropies, every quantity
here is a Fraction; floats never enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from .greedy import Instance, edmonds_allocate, tie_order, _greedy_rates_scaled
from .source import SourceModel

__all__ = [
    "StepSchedule",
    "SolverConfig",
    "Solution",
    "init_dual",
    "project_column",
    "subgradient_step",
    "recover_primal",
    "max_combine",
    "primal_value",
    "dual_value",
    "duality_gap",
    "solve",
]

RateVector = Tuple[Fraction, ...]
DualMatrix = Tuple[Tuple[Fraction, ...], ...]
TraceFn = Callable[[int, Fraction, Fraction, Fraction], None]


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step size.  kind "harmonic" is a/(b + c*n); kind
    "power" is n**(-a) with 0 < a < 1 (evaluated in floating point and
    snapped to the 1e-9 rational grid, which preserves the diminishing
    property and keeps the solver rational)."""

    kind: str = "harmonic"
    a: Fraction = Fraction(1)
    b: Fraction = Fraction(1)
    c: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        object.__setattr__(self, "c", Fraction(self.c))
        if self.kind == "harmonic":
            if self.a <= 0 or self.b < 0 or self.c <= 0:
                raise ValueError("harmonic schedule needs a > 0, b >= 0, c > 0")
        elif self.kind == "power":
            if not 0 < self.a < 1:
                raise ValueError("power schedule needs 0 < a < 1")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def theta(self, n: int) -> Fraction:
        if self.kind == "harmonic":
            return self.a / (self.b + self.c * n)
        snapped = Fraction(max(1, round(float(n) ** (-float(self.a)) * 10 ** 9)),
                           10 ** 9)
        return snapped

    @classmethod
    def harmonic(cls, a=1, b=1, c=1) -> "StepSchedule":
        return cls("harmonic", Fraction(a), Fraction(b), Fraction(c))

    @classmethod
    def power(cls, a) -> "StepSchedule":
        return cls("power", Fraction(a))


@dataclass(frozen=True)
class SolverConfig:
    """Solver knobs.  schedule None means the weight-scaled harmonic step
    max(1, max alpha)/(1+n), which reduces to 1/(1+n) for unit weights;
    heavier weights need proportionally longer dual steps to converge.
    Other defaults: uniform averaging, stop at duality gap <= 1e-3 or
    50000 iterations, multipliers kept on the 1e-12 grid."""

    schedule: Optional[StepSchedule] = None
    max_iterations: int = 50_000
    gap_tolerance: Fraction = Fraction(1, 1000)
    tie_break: Optional[Tuple[int, ...]] = None
    quantum: Fraction = Fraction(1, 10 ** 12)

    def __post_init__(self):
        object.__setattr__(self, "gap_tolerance", Fraction(self.gap_tolerance))
        object.__setattr__(self, "quantum", Fraction(self.quantum))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gap_tolerance <= 0:
            raise ValueError("gap_tolerance must be positive")
        if not (0 < self.quantum <= Fraction(1, 1000)):
            raise ValueError("quantum must be in (0, 1/1000]")
        if self.quantum.numerator != 1:
            raise ValueError("quantum must be a unit fraction")
        if self.tie_break is not None:
            object.__setattr__(self, "tie_break", tuple(self.tie_break))


@dataclass(frozen=True)
class Solution:
    """A certified outcome: primal rates plus the multiplier matrix whose
    dual value witnesses the reported gap."""

    instance: Instance
    config: SolverConfig
    rates: RateVector
    primal_objective: Fraction
    dual_objective: Fraction
    gap: Fraction
    iterations: int
    converged: bool
    dual_matrix: DualMatrix
    averaged_matrix: DualMatrix


# ---------------------------------------------------------------------------
# Exact building blocks (reference semantics, Fractions throughout)
# ---------------------------------------------------------------------------

def init_dual(instance: Instance) -> DualMatrix:
    """Starting multipliers: helper columns split alpha_i evenly across
    all k rows; a user's column splits it across the other k-1 rows with
    the own-row entry pinned at zero.  Requires k >= 2 (a single receiver
    needs no decomposition)."""
    users = instance.user_list
    k = len(users)
    if k < 2:
        raise ValueError("dual decomposition needs at least two users")
    rows = []
    for l in users:
        row = []
        for i in range(instance.m):
            a = instance.weights[i]
            if i == l:
                row.append(Fraction(0))
            elif i in instance.users:
                row.append(a / (k - 1))
            else:
                row.append(a / k)
        rows.append(tuple(row))
    return tuple(rows)


def project_column(values: Sequence, budget, pinned: Optional[int] = None
                   ) -> Tuple[Fraction, ...]:
    """Exact Euclidean projection onto {x >= 0, sum x = budget}, with one
    optional coordinate removed beforehand and reinserted as zero.

    Sort-and-threshold: with entries sorted descending, the largest j
    with u_j > (sum of the top j - budget)/j fixes the threshold tau and
    x = max(v - tau, 0).
    """
    v = [Fraction(x) for x in values]
    budget = Fraction(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if pinned is not None and not 0 <= pinned < len(v):
        raise ValueError("pinned index out of range")
    free = [i for i in range(len(v)) if i != pinned]
    out = [Fraction(0)] * len(v)
    if not free:
        if budget != 0:
            raise ValueError("cannot meet a positive budget with no free coordinates")
        return tuple(out)
    if budget == 0:
        return tuple(out)
    u = sorted((v[i] for i in free), reverse=True)
    tau = None
    prefix = Fraction(0)
    for j, uj in enumerate(u, start=1):
        prefix += uj
        t = (prefix - budget) / j
        if uj > t:
            tau = t
    assert tau is not None  # j = 1 always qualifies when budget > 0
    for i in free:
        d = v[i] - tau
        if d > 0:
            out[i] = d
    return tuple(out)


def subgradient_step(lam: DualMatrix, rates: Sequence[Sequence], theta,
                     instance: Instance) -> DualMatrix:
    """One exact ascent step: add theta * subgradient (the subproblem
    rates), then re-project every column onto its weight simplex.  User
    columns keep their own-row zero pinned."""
    theta = Fraction(theta)
    users = instance.user_list
    k = len(users)
    row_of_user = {u: r for r, u in enumerate(users)}
    cols = []
    for i in range(instance.m):
        moved = [lam[r][i] + theta * Fraction(rates[r][i]) for r in range(k)]
        cols.append(project_column(moved, instance.weights[i],
                                   pinned=row_of_user.get(i)))
    return tuple(tuple(cols[i][r] for i in range(instance.m)) for r in range(k))


def recover_primal(history: Sequence[Sequence[Sequence]],
                   mu: Optional[Sequence] = None) -> DualMatrix:
    """Convex combination of per-iteration rate matrices (uniform by
    default).  The running average the solver keeps is the uniform case
    computed incrementally."""
    n = len(history)
    if n == 0:
        raise ValueError("empty history")
    if mu is None:
        mu = [Fraction(1, n)] * n
    else:
        mu = [Fraction(x) for x in mu]
        if len(mu) != n:
            raise ValueError("mu length mismatch")
        if any(x < 0 for x in mu) or sum(mu) != 1:
            raise ValueError("mu must be a convex combination")
    k = len(history[0])
    m = len(history[0][0])
    out = [[Fraction(0)] * m for _ in range(k)]
    for w, mat in zip(mu, history):
        for r in range(k):
            row = mat[r]
            for i in range(m):
                if row[i]:
                    out[r][i] += w * Fraction(row[i])
    return tuple(tuple(row) for row in out)


def max_combine(matrix: Sequence[Sequence]) -> RateVector:
    """Per-terminal maximum across rows: the cheapest shared rate vector
    dominating every receiver's plan."""
    k = len(matrix)
    m = len(matrix[0])
    return tuple(max(Fraction(matrix[r][i]) for r in range(k)) for i in range(m))


def primal_value(instance: Instance, rates: Sequence) -> Fraction:
    return sum((w * Fraction(r) for w, r in zip(instance.weights, rates)),
               Fraction(0))


def dual_value(instance: Instance, lam: Sequence[Sequence],
               tie_break: Optional[Sequence[int]] = None) -> Fraction:
    """Sum of subproblem optima at the given multipliers: a lower bound on
    the optimal weighted rate sum whenever lam is dual feasible.  Each
    subproblem is re-solved greedily from scratch."""
    total = Fraction(0)
    for r, l in enumerate(instance.user_list):
        row = [Fraction(x) for x in lam[r]]
        rates = edmonds_allocate(instance, l, weights=row, tie_break=tie_break)
        total += sum((a * b for a, b in zip(row, rates)), Fraction(0))
    return total


def duality_gap(solution: Solution) -> Fraction:
    """Primal minus dual objective, both recomputed from the solution's
    own certificate (fresh greedy calls).  Nonnegative by weak duality."""
    p = primal_value(solution.instance, solution.rates)
    d = dual_value(solution.instance, solution.dual_matrix,
                   solution.config.tie_break)
    gap = p - d
    assert gap >= 0
    return gap


# ---------------------------------------------------------------------------
# The solver: same semantics as the blocks above, but all state held as
# integers on the quantum grid so 50k iterations stay cheap and exact.
# ---------------------------------------------------------------------------

def _quantize_column(vals: Sequence[Fraction], budget_grid: int, grid: int,
                     pinned: Optional[int]) -> List[int]:
    """Snap exact column values (summing to budget_grid/grid) onto the
    integer grid: floor everything, then hand out the missing quanta by
    largest remainder (ties to the lower index).  Sum is exact."""
    k = len(vals)
    out = [0] * k
    rem = []
    acc = 0
    for r in range(k):
        if r == pinned:
            continue
        num = vals[r].numerator * grid
        den = vals[r].denominator
        q, rr = divmod(num, den)
        out[r] = q
        acc += q
        rem.append((Fraction(rr, den), r))
    deficit = budget_grid - acc
    assert 0 <= deficit <= len(rem)
    rem.sort(key=lambda p: (-p[0], p[1]))
    for j in range(deficit):
        out[rem[j][1]] += 1
    return out


def _project_grid(vfine: List[int], refine: int, budget_grid: int,
                  pinned: Optional[int]) -> List[int]:
    """Integer-arithmetic projection of a column onto the weight simplex,
    then snap onto the grid.  `vfine` entries are in units of
    1/(grid*refine); the result is in units of 1/grid summing exactly to
    budget_grid."""
    k = len(vfine)
    out = [0] * k
    if budget_grid == 0:
        return out
    free = [r for r in range(k) if r != pinned]
    bfine = budget_grid * refine
    u = sorted((vfine[r] for r in free), reverse=True)
    prefix = 0
    tau_num = 0
    tau_den = 1
    for j, uj in enumerate(u, start=1):
        prefix += uj
        if uj * j > prefix - bfine:
            tau_num = prefix - bfine
            tau_den = j
    acc = 0
    rem = []
    denom = tau_den * refine
    for r in free:
        d = vfine[r] * tau_den - tau_num
        if d > 0:
            q, rr = divmod(d, denom)
            out[r] = q
            acc += q
            if rr:
                rem.append((rr, r))
    deficit = budget_grid - acc
    assert 0 <= deficit <= len(rem), "grid projection lost mass"
    rem.sort(key=lambda p: (-p[0], p[1]))
    for j in range(deficit):
        out[rem[j][1]] += 1
    return out


def _single_user_solution(instance: Instance, config: SolverConfig) -> Solution:
    (target,) = instance.user_list
    rates = edmonds_allocate(instance, target, tie_break=config.tie_break)
    obj = primal_value(instance, rates)
    lam_row = tuple(Fraction(0) if i == target else instance.weights[i]
                    for i in range(instance.m))
    return Solution(
        instance=instance, config=config, rates=rates,
        primal_objective=obj, dual_objective=obj, gap=Fraction(0),
        iterations=0, converged=True,
        dual_matrix=(lam_row,), averaged_matrix=(rates,))


def solve(instance: Instance, config: Optional[SolverConfig] = None,
          trace: Optional[TraceFn] = None) -> Solution:
    """Minimize the weighted sum of shared rates over all receivers'
    regions.  A single receiver short-circuits to the greedy allocation
    (gap exactly zero).  Otherwise runs projected subgradient ascent on
    the dual, recovering primal points as uniform averages of the
    subproblem vertices over two streams -- the full history and a
    doubling window of recent iterates, which sheds the bias of early
    iterates -- and returns the best primal point and best dual
    certificate seen; `converged` records whether the gap tolerance was
    met within the iteration budget.

    The trace callback, when given, receives (iteration, primal value,
    current dual value, best gap so far) each iteration.
    """
    if config is None:
        config = SolverConfig()
    users = instance.user_list
    k = len(users)
    if k == 1:
        return _single_user_solution(instance, config)
    schedule = config.schedule
    if schedule is None:
        schedule = StepSchedule.harmonic(
            max(Fraction(1), max(instance.weights)), 1, 1)

    model = instance.model
    m = instance.m
    js = model.joint_entropy_scaled
    de = model.entropy_denominator
    ranks = tie_order(m, config.tie_break)
    row_of_user = {u: r for r, u in enumerate(users)}
    senders_of = [sorted(t for t in instance.transmitters if t != l)
                  for l in users]
    columns = sorted(instance.transmitters)

    d_alpha = 1
    for w in instance.weights:
        d_alpha = math.lcm(d_alpha, w.denominator)
    alpha_scaled = [int(w * d_alpha) for w in instance.weights]
    grid = config.quantum.denominator * d_alpha
    budget_grid = [int(w * grid) for w in instance.weights]

    exact0 = init_dual(instance)
    lam: List[List[int]] = [[0] * m for _ in range(k)]
    for i in range(m):
        col = _quantize_column([exact0[r][i] for r in range(k)], budget_grid[i],
                               grid, row_of_user.get(i))
        for r in range(k):
            lam[r][i] = col[r]

    sums = [[0] * m for _ in range(k)]
    wsums = [[0] * m for _ in range(k)]     # window since last restart
    wstart = 0
    next_restart = 1
    best_dual_num: Optional[int] = None     # units 1/(grid*de)
    best_dual_lam: Optional[List[List[int]]] = None
    best_primal: Optional[Fraction] = None
    best_primal_sums: Optional[List[List[int]]] = None
    best_primal_count = 0
    tol = config.gap_tolerance
    gap = None
    converged = False
    n = 0

    while n < config.max_iterations:
        n += 1
        if n == next_restart:
            wsums = [[0] * m for _ in range(k)]
            wstart = n - 1
            next_restart *= 2
        # subproblem vertices and the dual value at the current multipliers
        dual_num = 0
        rt: List[List[int]] = []
        for r in range(k):
            lamr = lam[r]
            order = sorted(senders_of[r], key=lambda j: (lamr[j], ranks[j]))
            row = _greedy_rates_scaled(model, users[r], order)
            srow = sums[r]
            wrow = wsums[r]
            acc = 0
            for j in order:
                v = row[j]
                if v:
                    srow[j] += v
                    wrow[j] += v
                    acc += lamr[j] * v
            dual_num += acc
            rt.append(row)

        if best_dual_num is None or dual_num > best_dual_num:
            best_dual_num = dual_num
            best_dual_lam = [list(r_) for r_ in lam]

        wn = n - wstart
        primal_num = 0
        wprimal_num = 0
        for i in columns:
            a = alpha_scaled[i]
            if a:
                top = 0
                wtop = 0
                for r in range(k):
                    s = sums[r][i]
                    if s > top:
                        top = s
                    s = wsums[r][i]
                    if s > wtop:
                        wtop = s
                primal_num += a * top
                wprimal_num += a * wtop
        primal = Fraction(primal_num, d_alpha * de * n)
        if best_primal is None or primal < best_primal:
            best_primal = primal
            best_primal_sums = [list(r_) for r_ in sums]
            best_primal_count = n
        wprimal = Fraction(wprimal_num, d_alpha * de * wn)
        if wprimal < best_primal:
            best_primal = wprimal
            best_primal_sums = [list(r_) for r_ in wsums]
            best_primal_count = wn

        gap = best_primal - Fraction(best_dual_num, grid * de)
        if trace is not None:
            trace(n, primal, Fraction(dual_num, grid * de), gap)
        if gap <= tol:
            converged = True
            break
        if n == config.max_iterations:
            break

        theta = schedule.theta(n)
        tn, td = theta.numerator, theta.denominator
        refine = td * de
        qmul = tn * grid
        for i in columns:
            pin = row_of_user.get(i)
            vfine = [lam[r][i] * refine + qmul * rt[r][i] for r in range(k)]
            col = _project_grid(vfine, refine, budget_grid[i], pin)
            for r in range(k):
                lam[r][i] = col[r]

    assert best_primal is not None and best_dual_num is not None
    dual_obj = Fraction(best_dual_num, grid * de)
    gap = best_primal - dual_obj
    assert gap >= 0, "weak duality violated; arithmetic bug"
    nden = de * best_primal_count
    avg = tuple(tuple(Fraction(best_primal_sums[r][i], nden) for i in range(m))
                for r in range(k))
    zvec = tuple(max(avg[r][i] for r in range(k)) for i in range(m))
    dmat = tuple(tuple(Fraction(best_dual_lam[r][i], grid) for i in range(m))
                 for r in range(k))
    return Solution(
        instance=instance, config=config, rates=zvec,
        primal_objective=best_primal, dual_objective=dual_obj, gap=gap,
        iterations=n, converged=converged,
        dual_matrix=dmat, averaged_matrix=avg)
