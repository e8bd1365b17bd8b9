"""Turning rate allocations into working finite-field transmission schemes.

Pipeline: snap a (possibly approximate) rate vector to small rationals and
re-verify feasibility; pick a chunk count L (the lcm of the denominators)
so every terminal sends an integer number of chunk symbols; replicate the
observation matrices blockwise over the L chunks; then draw each
terminal's coding matrix uniformly at random over an extension field big
enough that decodability is likely, verifying exactly and retrying with
fresh randomness until it holds.  Every terminal codes only over its own
observation.

Decodability is a rank condition: receiver l recovers everything iff its
own replicated observation stacked with all coded transmissions has full
column rank.  `simulate_exchange` runs the whole exchange on a concrete
random source draw and checks each receiver actually reconstructs it
uniquely, which succeeds exactly when the rank condition holds.

The multicast graph view (super-source, per-terminal sender/relay nodes,
per-receiver sinks) is exported for DOT rendering; with feasible chunk
rates its min-cut to every receiver is at least the total chunk count.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .gf import Field, Matrix, embed_map, make_field, mat_vec, rank, solve_linear, stack
from .greedy import Instance, violated_cuts
from .source import LinearSource, mask_to_set

__all__ = [
    "TransmissionScheme",
    "MulticastGraph",
    "DecodabilityReport",
    "SimulationResult",
    "InfeasibleRatesError",
    "DesignFailureError",
    "min_extension_degree",
    "rationalize",
    "design_transmissions",
    "verify_decodability",
    "simulate_exchange",
    "build_multicast_graph",
    "graph_to_dot",
    "scheme_core_to_dict",
    "scheme_core_from_dict",
]


class InfeasibleRatesError(ValueError):
    """The requested rates fail some receiver's cut-set constraint."""


class DesignFailureError(RuntimeError):
    """No decodable scheme found within the attempt budget."""


@dataclass(frozen=True)
class TransmissionScheme:
    """A concrete linear exchange scheme.

    Terminal i sends matrices[i] . X'_i where X'_i is its observation
    replicated over L chunks and embedded into the coding field (an
    extension of the source field of the stated degree).  chunk_rates[i]
    is the number of coding-field symbols terminal i sends.
    """

    instance: Instance
    L: int
    chunk_rates: Tuple[int, ...]
    ext_degree: int
    coding_field: Field
    matrices: Dict[int, Matrix]
    seed: int = 0
    attempt: int = 0

    @property
    def source_field(self) -> Field:
        return self.instance.model.field

    @property
    def total_symbols(self) -> int:
        return sum(self.chunk_rates)


@dataclass
class DecodabilityReport:
    """Per-receiver rank deficits (0 means decodable)."""

    target_rank: int
    deficits: Dict[int, int]

    @property
    def ok(self) -> bool:
        return all(d == 0 for d in self.deficits.values())

    @property
    def per_user(self) -> Dict[int, bool]:
        return {l: d == 0 for l, d in self.deficits.items()}


@dataclass
class SimulationResult:
    """Outcome of one simulated exchange on a random source draw."""

    successes: Dict[int, bool]

    @property
    def ok(self) -> bool:
        return all(self.successes.values())


def min_extension_degree(field: Field, users: int, packets: int, L: int) -> int:
    """Smallest t with |field|^t > 2 * users * packets * L, the margin at
    which random coding matrices succeed with comfortable probability."""
    need = 2 * users * packets * L
    t = 1
    size = field.q
    while size <= need:
        t += 1
        size *= field.q
    return t


def _check_rates_feasible(instance: Instance, rates: Sequence[Fraction]) -> None:
    for l in instance.user_list:
        bad = violated_cuts(rates, instance, l, limit=1)
        if bad:
            cut, need, got = bad[0]
            raise InfeasibleRatesError(
                f"receiver {l}: cut {set(mask_to_set(cut))} needs rate "
                f"{need}, rates provide {got}")


def rationalize(rates: Sequence, max_denominator: int = 64,
                instance: Optional[Instance] = None) -> Tuple[int, Tuple[int, ...]]:
    """Chunk count L and integer per-terminal chunk rates for a rate vector.

    Each rate is snapped to the nearest rational with denominator at most
    max_denominator (this is where slightly-off solver output lands back
    on the exact optimum).  When an instance is supplied the snapped
    vector is re-verified against every receiver's cuts.  Deficits small
    enough to be snapping artifacts (at most m/(2*max_denominator), the
    most a cut sum can move when every coordinate shifts to its nearest
    grid point) are repaired: each terminal in ascending order is raised
    by the largest remaining deficit of the violated cuts through it,
    which restores all cuts in one pass.  A larger deficit means the
    requested rates were infeasible before snapping, which raises
    InfeasibleRatesError.  L is the lcm of the final denominators and
    must not exceed max_denominator.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    snapped = [Fraction(r).limit_denominator(max_denominator) for r in rates]
    if any(r < 0 for r in snapped):
        raise ValueError("rates must be nonnegative")
    if instance is not None:
        if len(snapped) != instance.m:
            raise ValueError("rate vector length mismatch")
        for i in range(instance.m):
            if i not in instance.transmitters and snapped[i] != 0:
                raise ValueError(f"terminal {i} does not transmit but has rate "
                                 f"{snapped[i]}")
        snap_slack = Fraction(len(snapped), 2 * max_denominator)
        for i in sorted(instance.transmitters):
            worst = Fraction(0)
            for l in instance.user_list:
                for cut, need, got in violated_cuts(snapped, instance, l):
                    deficit = need - got
                    if deficit > snap_slack:
                        raise InfeasibleRatesError(
                            f"receiver {l}: cut {set(mask_to_set(cut))} is "
                            f"short by {deficit}, more than snapping to the "
                            f"1/{max_denominator} grid can explain")
                    if (cut >> i) & 1 and deficit > worst:
                        worst = deficit
            if worst > 0:
                snapped[i] += worst
        _check_rates_feasible(instance, snapped)
    L = 1
    for r in snapped:
        L = math.lcm(L, r.denominator)
    if L > max_denominator:
        raise ValueError(
            f"chunk count {L} exceeds max_denominator={max_denominator}")
    return L, tuple(int(r * L) for r in snapped)


def _embedded_blocks(instance: Instance, L: int, coding_field: Field
                     ) -> Tuple[List[Matrix], Tuple[int, ...]]:
    model = instance.model
    if not isinstance(model, LinearSource):
        raise TypeError("transmission design needs a linear (or raw) source model")
    emb = embed_map(model.field, coding_field)
    blocks = [A.kron_identity(L).map_to_field(coding_field, emb)
              for A in model.matrices]
    return blocks, emb


def design_transmissions(instance: Instance, chunk_rates: Sequence[int], L: int,
                         ext_degree: Optional[int] = None, seed: int = 0,
                         max_attempts: int = 32) -> TransmissionScheme:
    """Draw coding matrices at random until every receiver can decode.

    Requires a linear/raw source model, chunk rates that are feasible for
    the L-chunk replicated source (checked exactly up front), and zero
    rate on non-transmitters.  Attempts are seeded independently, so the
    whole construction is reproducible; failure after max_attempts raises
    DesignFailureError (a larger extension degree is the usual fix).
    """
    model = instance.model
    if not isinstance(model, LinearSource):
        raise TypeError("transmission design needs a linear (or raw) source model")
    if L < 1:
        raise ValueError("L must be >= 1")
    chunk_rates = tuple(int(c) for c in chunk_rates)
    if len(chunk_rates) != instance.m or any(c < 0 for c in chunk_rates):
        raise ValueError("chunk_rates must be m nonnegative integers")
    for i, c in enumerate(chunk_rates):
        if c and i not in instance.transmitters:
            raise ValueError(f"terminal {i} does not transmit but has chunk rate {c}")
    _check_rates_feasible(instance, [Fraction(c, L) for c in chunk_rates])

    if ext_degree is None:
        ext_degree = min_extension_degree(model.field, instance.k, model.N, L)
    if ext_degree < 1:
        raise ValueError("ext_degree must be >= 1")
    coding_field = make_field(model.field.p, model.field.degree * ext_degree)
    blocks, _ = _embedded_blocks(instance, L, coding_field)

    q = coding_field.q
    for attempt in range(max_attempts):
        rng = random.Random(seed * 1_000_003 + attempt)
        mats: Dict[int, Matrix] = {}
        for i in range(instance.m):
            r = chunk_rates[i]
            if r == 0:
                continue
            ncols = blocks[i].nrows
            mats[i] = Matrix(coding_field, r, ncols,
                             [rng.randrange(q) for _ in range(r * ncols)],
                             validate=False)
        scheme = TransmissionScheme(instance, L, chunk_rates, ext_degree,
                                    coding_field, mats, seed, attempt)
        if verify_decodability(scheme).ok:
            return scheme
    raise DesignFailureError(
        f"no decodable scheme in {max_attempts} attempts; try a larger "
        f"extension degree (used {ext_degree})")


def verify_decodability(scheme: TransmissionScheme) -> DecodabilityReport:
    """Exact rank check per receiver: own replicated observation stacked
    with every other terminal's coded rows must span all chunked packets."""
    instance = scheme.instance
    model = instance.model
    blocks, _ = _embedded_blocks(instance, scheme.L, scheme.coding_field)
    target = model.N * scheme.L
    coded = {i: scheme.matrices[i] @ blocks[i] for i in scheme.matrices}
    deficits: Dict[int, int] = {}
    for l in instance.user_list:
        parts = [blocks[l]]
        parts.extend(coded[i] for i in sorted(coded) if i != l)
        got = rank(stack(*parts))
        deficits[l] = target - got
    return DecodabilityReport(target, deficits)


def simulate_exchange(scheme: TransmissionScheme, seed: int = 0) -> SimulationResult:
    """Run the exchange once on a uniformly drawn source.

    Each receiver solves the stacked linear system formed by its own
    observation and all received coded symbols; success means the system
    determines the source uniquely and the unique solution matches the
    truth.  This succeeds iff the receiver passes verify_decodability.
    """
    instance = scheme.instance
    model = instance.model
    if not isinstance(model, LinearSource):
        raise TypeError("simulation needs a linear (or raw) source model")
    F = model.field
    E = scheme.coding_field
    emb = embed_map(F, E)
    blocks, _ = _embedded_blocks(instance, scheme.L, E)
    nl = model.N * scheme.L
    rng = random.Random(seed)
    w = [rng.randrange(F.q) for _ in range(nl)]
    w_emb = tuple(emb[x] for x in w)
    # observations over the source field, then their coded transmissions
    obs = {i: mat_vec(model.matrices[i].kron_identity(scheme.L), w)
           for i in range(instance.m)}
    sent = {i: mat_vec(scheme.matrices[i], tuple(emb[x] for x in obs[i]))
            for i in scheme.matrices}
    successes: Dict[int, bool] = {}
    for l in instance.user_list:
        rows = [blocks[l]]
        rhs: List[int] = [emb[x] for x in obs[l]]
        for i in sorted(sent):
            if i == l:
                continue
            rows.append(scheme.matrices[i] @ blocks[i])
            rhs.extend(sent[i])
        coef = stack(*rows)
        sol = solve_linear(coef, rhs)
        unique = rank(coef) == nl
        successes[l] = unique and sol == w_emb
    return SimulationResult(successes)


# ---------------------------------------------------------------------------
# Multicast graph view
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MulticastGraph:
    """Super-source S owns all chunked packets; sender s_i carries terminal
    i's side information (capacity = observed symbols); relay t_i carries
    its broadcast (capacity = chunk rate) to every other receiver; each
    receiver also taps its own sender directly."""

    nodes: Tuple[str, ...]
    edges: Tuple[Tuple[str, str, int], ...]
    source: str
    receivers: Tuple[str, ...]
    total_chunks: int


def build_multicast_graph(instance: Instance, chunk_rates: Sequence[int],
                          L: int) -> MulticastGraph:
    model = instance.model
    if not isinstance(model, LinearSource):
        raise TypeError("the multicast graph needs a linear (or raw) source model")
    chunk_rates = tuple(int(c) for c in chunk_rates)
    if len(chunk_rates) != instance.m:
        raise ValueError("chunk_rates must have one entry per terminal")
    m = instance.m
    users = instance.user_list
    nodes = ["S"]
    nodes += [f"s{i}" for i in range(m)]
    nodes += [f"t{i}" for i in range(m)]
    nodes += [f"r{j}" for j in users]
    edges: List[Tuple[str, str, int]] = []
    for i in range(m):
        own = model.matrices[i].nrows * L
        edges.append(("S", f"s{i}", own))
        if i in instance.users:
            edges.append((f"s{i}", f"r{i}", own))
        edges.append((f"s{i}", f"t{i}", chunk_rates[i]))
        for j in users:
            if j != i:
                edges.append((f"t{i}", f"r{j}", chunk_rates[i]))
    return MulticastGraph(tuple(nodes), tuple(edges), "S",
                          tuple(f"r{j}" for j in users), model.N * L)


def graph_to_dot(graph: MulticastGraph) -> str:
    """Graphviz DOT text with capacities as edge labels."""
    out = ["digraph exchange {", "  rankdir=LR;"]
    for node in graph.nodes:
        shape = "doublecircle" if node == graph.source else (
            "box" if node in graph.receivers else "circle")
        out.append(f'  {node} [shape={shape}];')
    for u, v, cap in graph.edges:
        out.append(f'  {u} -> {v} [label="{cap}"];')
    out.append("}")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Scheme serialization (the instance part is handled by the CLI layer)
# ---------------------------------------------------------------------------

def scheme_core_to_dict(scheme: TransmissionScheme) -> dict:
    return {
        "L": scheme.L,
        "chunk_rates": list(scheme.chunk_rates),
        "ext_degree": scheme.ext_degree,
        "coding_field": {
            "characteristic": scheme.coding_field.p,
            "degree": scheme.coding_field.degree,
        },
        "matrices": {
            str(i): [list(M.row(r)) for r in range(M.nrows)]
            for i, M in sorted(scheme.matrices.items())
        },
        "seed": scheme.seed,
        "attempt": scheme.attempt,
    }


def scheme_core_from_dict(data: dict, instance: Instance) -> TransmissionScheme:
    model = instance.model
    if not isinstance(model, LinearSource):
        raise TypeError("schemes need a linear (or raw) source model")
    L = int(data["L"])
    chunk_rates = tuple(int(c) for c in data["chunk_rates"])
    ext_degree = int(data["ext_degree"])
    cf = data["coding_field"]
    coding_field = make_field(int(cf["characteristic"]), int(cf["degree"]))
    if (coding_field.p != model.field.p
            or coding_field.degree != model.field.degree * ext_degree):
        raise ValueError("coding field does not extend the source field as stated")
    mats: Dict[int, Matrix] = {}
    for key, rows in data["matrices"].items():
        i = int(key)
        width = model.matrices[i].nrows * L
        mats[i] = Matrix.from_rows(coding_field, rows, ncols=width)
        if mats[i].nrows != chunk_rates[i]:
            raise ValueError(f"terminal {i}: matrix rows != chunk rate")
    return TransmissionScheme(instance, L, chunk_rates, ext_degree,
                              coding_field, mats,
                              int(data.get("seed", 0)), int(data.get("attempt", 0)))
