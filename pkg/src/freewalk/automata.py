"""Cone-type automata: signatures, the labeled transition graph, and counts.

The cone of an element g collects the elements h whose multiplication on the
right extends g geodesically: l(g h) = l(g) + l(h).  Exact cone equality is
not decidable uniformly, so states are identified by the cone's intersection
with a probe ball of radius R, together with a stabilization check across
build radii; sphere-count cross-validation backs the truncation.

Two geometries are provided: free products (through the exact word
arithmetic) and integer lattices Z^d with the standard generators, whose
word length is the l1 norm.  Edges are labeled by single letters of length
one drawn from the generators and their inverses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import MalformedInputError, ResourceLimitError
from .words import (
    DEFAULT_BALL_CAP,
    FiniteCyclicFactor,
    GroupContext,
    IntegerFactor,
    ReducedWord,
    ball_enumerate,
    length,
    multiply,
)


class FreeProductGeometry:
    """Adapter exposing a free product to the automaton builder."""

    def __init__(self, ctx: GroupContext, ball_cap: int = DEFAULT_BALL_CAP):
        self.ctx = ctx
        self.ball_cap = ball_cap

    def identity(self) -> ReducedWord:
        return ReducedWord()

    def mul(self, a: ReducedWord, b: ReducedWord) -> ReducedWord:
        return multiply(a, b, self.ctx)

    def length(self, g: ReducedWord) -> int:
        return length(g, self.ctx)

    def letters(self) -> list[tuple[str, ReducedWord]]:
        """Length-one letters from the generators and their inverses."""
        out: list[tuple[str, ReducedWord]] = []
        seen: set[ReducedWord] = set()
        for fidx, fac in enumerate(self.ctx.factors):
            codes: list[int]
            if isinstance(fac, IntegerFactor):
                codes = [1, -1]
            elif isinstance(fac, FiniteCyclicFactor):
                codes = [1, fac.inv(1)]
            else:
                codes = []
                for _, c in fac.generators:
                    codes.extend((c, fac.inv(c)))
            for c in codes:
                w = ReducedWord(((fidx, c),))
                if w not in seen and self.length(w) == 1:
                    seen.add(w)
                    out.append((self.ctx.format_word(w), w))
        return out

    def ball(self, radius: float) -> list[ReducedWord]:
        return ball_enumerate(self.ctx, radius, cap=self.ball_cap)

    def serialize(self, g: ReducedWord):
        return g.letters

    def format(self, g: ReducedWord) -> str:
        return self.ctx.format_word(g)


class LatticeGeometry:
    """Z^d with generators plus/minus e_i; word length is the l1 norm."""

    def __init__(self, dim: int):
        if dim < 1:
            raise MalformedInputError("lattice dimension must be at least 1")
        self.dim = dim

    def identity(self) -> tuple[int, ...]:
        return (0,) * self.dim

    def mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def length(self, g) -> int:
        return sum(abs(x) for x in g)

    def letters(self):
        out = []
        for i in range(self.dim):
            plus = tuple(1 if j == i else 0 for j in range(self.dim))
            minus = tuple(-1 if j == i else 0 for j in range(self.dim))
            out.append((f"+e{i + 1}", plus))
            out.append((f"-e{i + 1}", minus))
        return out

    def ball(self, radius: float):
        r = int(radius)
        out = []

        def rec(prefix, remaining):
            if len(prefix) == self.dim - 1:
                for v in range(-remaining, remaining + 1):
                    out.append(tuple(prefix + [v]))
                return
            for v in range(-remaining, remaining + 1):
                rec(prefix + [v], remaining - abs(v))

        rec([], r)
        return out

    def serialize(self, g):
        return g

    def format(self, g) -> str:
        return "(" + ",".join(str(x) for x in g) + ")"


@dataclass(frozen=True)
class ConeSignature:
    """Canonical encoding of a cone truncated to the probe ball.

    The profile is the sorted tuple of serialized members, so equal profiles
    compare and hash equal regardless of discovery order.
    """

    profile: tuple


def cone_profile(geom, g, radius: int, ball: Optional[list] = None) -> ConeSignature:
    """Members h of the probe ball with l(g h) = l(g) + l(h)."""
    if ball is None:
        ball = geom.ball(radius)
    lg = geom.length(g)
    members = []
    for h in ball:
        if geom.length(geom.mul(g, h)) == lg + geom.length(h):
            members.append(geom.serialize(h))
    return ConeSignature(tuple(sorted(members)))


@dataclass(frozen=True)
class ConeAutomaton:
    """Finite labeled graph of truncated cone types.

    States carry a representative element (the first discovered); the edge
    relation is a partial function of (state, label), built from each
    state's representative: an edge labeled s leaves C(g) exactly when s
    extends g geodesically, and points at C(g s).
    """

    signatures: tuple[ConeSignature, ...]
    representatives: tuple
    rep_lengths: tuple[int, ...]
    initial: int
    edges: tuple[tuple[int, str, int], ...]
    labels: tuple[str, ...]
    probe_radius: int
    build_radius: int
    stabilized: bool

    @property
    def state_count(self) -> int:
        return len(self.signatures)

    def edge_map(self) -> dict[tuple[int, str], int]:
        out = {}
        for src, lab, dst in self.edges:
            key = (src, lab)
            if key in out and out[key] != dst:
                raise MalformedInputError("edge relation is not deterministic")
            out[key] = dst
        return out


def build_automaton(
    geom,
    probe_radius: int = 3,
    build_radius: int = 6,
    max_states: int = 10_000,
) -> ConeAutomaton:
    """Breadth-first construction over geodesic extensions.

    Representatives are explored out to ``build_radius``; state targets one
    step further are still instantiated so the last layer has complete
    outgoing edges.  The automaton is flagged stabilized when no new
    signature first appears at depth ``build_radius`` or beyond, i.e. the
    state count agrees with the one the previous build radius would give.
    """
    ball = geom.ball(probe_radius)
    letters = geom.letters()
    e = geom.identity()
    sig0 = cone_profile(geom, e, probe_radius, ball)
    signatures = [sig0]
    reps = [e]
    depths = [0]
    index = {sig0: 0}
    edges: list[tuple[int, str, int]] = []
    queue = [0]
    while queue:
        sid = queue.pop(0)
        g = reps[sid]
        lg = geom.length(g)
        if lg > build_radius:
            continue
        for label, s in letters:
            h = geom.mul(g, s)
            if geom.length(h) != lg + 1:
                continue
            sig = cone_profile(geom, h, probe_radius, ball)
            if sig not in index:
                index[sig] = len(signatures)
                signatures.append(sig)
                reps.append(h)
                depths.append(lg + 1)
                if len(signatures) > max_states:
                    raise ResourceLimitError(
                        f"cone automaton exceeded {max_states} states",
                        cap=max_states,
                    )
                if lg + 1 <= build_radius:
                    queue.append(index[sig])
            edges.append((sid, label, index[sig]))
    stabilized = all(d < build_radius for d in depths)
    return ConeAutomaton(
        signatures=tuple(signatures),
        representatives=tuple(reps),
        rep_lengths=tuple(depths),
        initial=0,
        edges=tuple(edges),
        labels=tuple(lab for lab, _ in letters),
        probe_radius=probe_radius,
        build_radius=build_radius,
        stabilized=stabilized,
    )


@dataclass(frozen=True)
class SccResult:
    components: tuple[tuple[int, ...], ...]
    whole_strongly_connected: bool
    non_initial_strongly_connected: bool


def _tarjan(n: int, adj: list[list[int]]) -> list[tuple[int, ...]]:
    """Iterative Tarjan over an adjacency list; components in finish order."""
    index_counter = [0]
    stack: list[int] = []
    on_stack = [False] * n
    index = [-1] * n
    lowlink = [0] * n
    comps: list[tuple[int, ...]] = []

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = lowlink[v] = index_counter[0]
                index_counter[0] += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(adj[v]):
                w = adj[v][pi]
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work[-1] = (v, pi)
            work.pop()
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(tuple(sorted(comp)))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return comps


def strongly_connected_components(auto: ConeAutomaton) -> SccResult:
    """Tarjan decomposition plus the two connectivity readings.

    Reported separately: whether the whole graph is one component, and
    whether the subgraph on the non-initial states is.  Geodesic-extension
    edges never re-enter the initial state, so the readings genuinely
    differ; both are reported and neither is asserted.
    """
    n = auto.state_count
    adj: list[list[int]] = [[] for _ in range(n)]
    for src, _, dst in set(auto.edges):
        adj[src].append(dst)
    comps = _tarjan(n, adj)
    whole = len(comps) == 1

    non_initial = [s for s in range(n) if s != auto.initial]
    if not non_initial:
        restricted = True
    else:
        remap = {s: i for i, s in enumerate(non_initial)}
        sub_adj: list[list[int]] = [[] for _ in non_initial]
        for src, _, dst in set(auto.edges):
            if src in remap and dst in remap:
                sub_adj[remap[src]].append(remap[dst])
        restricted = len(_tarjan(len(non_initial), sub_adj)) == 1
    return SccResult(tuple(comps), whole, restricted)


@dataclass(frozen=True)
class ConditionTwoResult:
    holds: bool
    checked_words: int
    failing_witnesses: tuple[tuple[str, ...], ...]


def condition_two_check(auto: ConeAutomaton, radius: int) -> ConditionTwoResult:
    """Every geodesic word from the initial state must be readable from some
    non-initial state as well.

    Geodesic words are enumerated as label paths from the initial state up
    to the given radius; failing words are returned as witnesses.
    """
    emap = auto.edge_map()
    words: list[tuple[str, ...]] = [()]
    frontier: list[tuple[tuple[str, ...], int]] = [((), auto.initial)]
    for _ in range(radius):
        nxt = []
        for word, state in frontier:
            for lab in auto.labels:
                dst = emap.get((state, lab))
                if dst is None:
                    continue
                nxt.append((word + (lab,), dst))
        frontier = nxt
        words.extend(w for w, _ in frontier)

    non_initial = [s for s in range(auto.state_count) if s != auto.initial]
    failing = []
    for word in words:
        if not word:
            continue
        ok = False
        for start in non_initial:
            state = start
            for lab in word:
                state = emap.get((state, lab))
                if state is None:
                    break
            else:
                ok = True
            if ok:
                break
        if not ok:
            failing.append(word)
    return ConditionTwoResult(not failing, len(words) - 1, tuple(failing))


@dataclass(frozen=True)
class SphereCounts:
    """Geodesic-word counts from the edge DP, and element counts when a
    geometry is available to expand paths and deduplicate endpoints."""

    word_counts: tuple[int, ...]
    element_counts: Optional[tuple[int, ...]]


def sphere_sizes(
    auto: ConeAutomaton,
    n_max: int,
    geom=None,
    element_cap: int = 2_000_000,
) -> SphereCounts:
    """Counts per length 0..n_max.

    Word counts come from matrix-power style dynamic programming over the
    edges (paths from the initial state).  With a geometry, paths are also
    expanded to group elements and deduplicated, giving exact sphere sizes
    of the group for cross-validation against direct enumeration.
    """
    emap = auto.edge_map()
    out_edges: list[list[int]] = [[] for _ in range(auto.state_count)]
    for (src, _), dst in emap.items():
        out_edges[src].append(dst)
    counts = [0] * (auto.state_count)
    counts[auto.initial] = 1
    word_counts = [1]
    for _ in range(n_max):
        nxt = [0] * auto.state_count
        for s, c in enumerate(counts):
            if c:
                for dst in out_edges[s]:
                    nxt[dst] += c
        counts = nxt
        word_counts.append(sum(counts))

    element_counts = None
    if geom is not None:
        by_label = {}
        for (src, lab), dst in emap.items():
            by_label.setdefault(src, []).append((lab, dst))
        letter_of = {lab: elem for lab, elem in geom.letters()}
        frontier = {geom.identity(): auto.initial}
        element_counts = [1]
        for _ in range(n_max):
            nxt: dict = {}
            for g, state in frontier.items():
                for lab, dst in by_label.get(state, ()):
                    h = geom.mul(g, letter_of[lab])
                    nxt[h] = dst
            if len(nxt) > element_cap:
                raise ResourceLimitError(
                    f"element expansion exceeded {element_cap} entries",
                    cap=element_cap,
                )
            frontier = nxt
            element_counts.append(len(frontier))
        element_counts = tuple(element_counts)
    return SphereCounts(tuple(word_counts), element_counts)


# -- exports -----------------------------------------------------------------


def to_adjacency_dict(auto: ConeAutomaton, geom=None) -> dict:
    states = []
    for i in range(auto.state_count):
        rep = auto.representatives[i]
        states.append(
            {
                "id": i,
                "representative": geom.format(rep) if geom is not None else repr(rep),
                "depth": auto.rep_lengths[i],
            }
        )
    return {
        "states": states,
        "initial": auto.initial,
        "edges": [[src, lab, dst] for src, lab, dst in sorted(set(auto.edges))],
        "probe_radius": auto.probe_radius,
        "build_radius": auto.build_radius,
        "stabilized": auto.stabilized,
    }


def to_dot(auto: ConeAutomaton, geom=None) -> str:
    lines = ["digraph cone_types {", "  rankdir=LR;"]
    for i in range(auto.state_count):
        rep = auto.representatives[i]
        label = geom.format(rep) if geom is not None else str(i)
        shape = "doublecircle" if i == auto.initial else "circle"
        lines.append(f'  s{i} [label="{label}", shape={shape}];')
    for src, lab, dst in sorted(set(auto.edges)):
        lines.append(f'  s{src} -> s{dst} [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines)
