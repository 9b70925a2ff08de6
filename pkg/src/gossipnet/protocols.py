"""Gossip protocols: coded all-to-all dissemination, round-robin rumor
broadcast, and the two-phase tree-assisted variant.

All runners share the trial-stream convention: a 64-bit seed names the
whole trial (placement, schedule offsets, and every coin flip), so a
(graph, parameters, seed) triple is fully reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field

from .engine import GossipEngine, RoundRobinSelector, UniformSelector
from .field import EquationBasis, Field, random_combination, try_insert, unit_message
from .graph import SpanningTree, Topology, bfs_tree
from .rng import derive_seed

DEFAULT_ROUND_CAP = 10 ** 6

CSV_HEADER = ("family,n,k,q,protocol,time_model,action,seed,"
              "rounds,timeslots,tree_time,tree_diameter,capped")


@dataclass
class StoppingReport:
    """One trial's outcome; serializes to a fixed-schema CSV row.

    rounds is the stopping time in rounds (for async runs, the ceiling
    of timeslots / n). timeslots counts node wakeups: exact for async,
    n per round for sync. tree_time and tree_diameter are blank for
    protocols that grow no spanning tree.
    """

    family: str
    n: int
    k: int
    q: int
    protocol: str
    time_model: str
    action: str
    seed: int
    rounds: int
    timeslots: int
    tree_time: int | None
    tree_diameter: int | None
    capped: bool
    finish_slots: list = dc_field(default_factory=list, repr=False, compare=False)
    trace_lines: list | None = dc_field(default=None, repr=False, compare=False)

    def csv_row(self) -> str:
        def cell(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return str(int(x))
            return str(x)

        return ",".join(cell(x) for x in (
            self.family, self.n, self.k, self.q, self.protocol,
            self.time_model, self.action, self.seed, self.rounds,
            self.timeslots, self.tree_time, self.tree_diameter, self.capped))


# --- protocol implementations -------------------------------------------


class UniformGossip:
    """Coded gossip with uniform random partners.

    Every stored equation set is an RREF basis; outgoing messages are
    uniform random combinations of the sender's rows. A node is done
    when its basis reaches rank k.
    """

    def __init__(self, g: Topology, k: int, q: int, action: str,
                 rng: random.Random, placement=None, payloads=None):
        self.action = action
        self.k = k
        f = Field(q)
        if placement is None:
            placement = rng.sample(range(g.n), k)
        if len(set(placement)) != k:
            raise ValueError("placement must name k distinct nodes")
        self.placement = list(placement)
        plen = None if payloads is None else len(payloads[0])
        self.bases = [EquationBasis(f, k, plen) for _ in range(g.n)]
        for i, v in enumerate(self.placement):
            msg = unit_message(f, k, i, None if payloads is None else payloads[i])
            self.bases[v], _ = try_insert(self.bases[v], msg)
        self.selector = UniformSelector(g)

    def wakeup(self, v, rng):
        return (self.action, self.selector.select(v, rng), "coded")

    def build(self, v, kind, rng):
        basis = self.bases[v]
        if basis.rank == 0:
            return None
        return random_combination(basis, rng)

    def deliver(self, v, sender, kind, msg):
        self.bases[v], helpful = try_insert(self.bases[v], msg)
        return int(helpful)

    def node_done(self, v):
        return self.bases[v].complete

    def tree_done(self):
        return None


class BrrTree:
    """Round-robin rumor broadcast that records first-informer parents.

    Carries a single rumor (the origin id). A node that hears the rumor
    for the first time marks the sending node as its parent, so the
    parent pointers form a spanning tree rooted at the origin once
    everyone is informed.
    """

    def __init__(self, g: Topology, origin: int, rng: random.Random):
        self.g = g
        self.origin = origin
        self.informed = [False] * g.n
        self.informed[origin] = True
        self.informed_count = 1
        self.parent = [-1] * g.n
        self.selector = RoundRobinSelector(g, rng)

    def partner(self, v, rng):
        return self.selector.select(v, rng)

    def build(self, v):
        return self.origin if self.informed[v] else None

    def deliver(self, v, sender, msg):
        if self.informed[v]:
            return 0
        self.informed[v] = True
        self.informed_count += 1
        self.parent[v] = sender
        return 1

    def done(self):
        return self.informed_count == self.g.n

    def tree(self):
        if not self.done():
            return None
        return SpanningTree(self.origin, tuple(self.parent))


class OracleTree:
    """Instantly available spanning tree (breadth-first from the root).

    Stands in for a tree protocol with zero construction time: all
    nodes start informed, so phase-1 contacts are inert no-ops.
    """

    def __init__(self, g: Topology, root: int, rng: random.Random):
        self.g = g
        self.origin = root
        t = bfs_tree(g, root)
        self.parent = list(t.parent)
        self.informed = [True] * g.n
        self.informed_count = g.n
        self.selector = RoundRobinSelector(g, rng)

    def partner(self, v, rng):
        return self.selector.select(v, rng)

    def build(self, v):
        return self.origin

    def deliver(self, v, sender, msg):
        return 0

    def done(self):
        return True

    def tree(self):
        return SpanningTree(self.origin, tuple(self.parent))


class BroadcastProtocol:
    """Engine adapter for a bare tree/rumor protocol (no coded phase)."""

    def __init__(self, tree_proto, action: str):
        self.s = tree_proto
        self.action = action

    def wakeup(self, v, rng):
        return (self.action, self.s.partner(v, rng), "rumor")

    def build(self, v, kind, rng):
        return self.s.build(v)

    def deliver(self, v, sender, kind, msg):
        return self.s.deliver(v, sender, msg)

    def node_done(self, v):
        return self.s.informed[v]

    def tree_done(self):
        return self.s.done()


class TagProtocol:
    """Tree-assisted gossip: odd wakeups grow the tree, even wakeups
    exchange coded messages with the parent.

    Phase switching is by the parity of the node's own wakeup ordinal,
    so under the sync model (one wakeup per node per round) the whole
    network alternates phases round by round. Phase-1 contacts keep
    happening after the tree is complete; they change nothing.
    """

    def __init__(self, g: Topology, k: int, q: int, tree_proto,
                 rng: random.Random, placement=None, payloads=None):
        self.k = k
        f = Field(q)
        if placement is None:
            placement = rng.sample(range(g.n), k)
        if len(set(placement)) != k:
            raise ValueError("placement must name k distinct nodes")
        self.placement = list(placement)
        plen = None if payloads is None else len(payloads[0])
        self.bases = [EquationBasis(f, k, plen) for _ in range(g.n)]
        for i, v in enumerate(self.placement):
            msg = unit_message(f, k, i, None if payloads is None else payloads[i])
            self.bases[v], _ = try_insert(self.bases[v], msg)
        self.s = tree_proto
        self.wakeups = [0] * g.n

    def wakeup(self, v, rng):
        self.wakeups[v] += 1
        if self.wakeups[v] % 2 == 1:
            return ("EXCHANGE", self.s.partner(v, rng), "rumor")
        p = self.s.parent[v]
        if p < 0:
            return None
        return ("EXCHANGE", p, "coded")

    def build(self, v, kind, rng):
        if kind == "rumor":
            return self.s.build(v)
        basis = self.bases[v]
        if basis.rank == 0:
            return None
        return random_combination(basis, rng)

    def deliver(self, v, sender, kind, msg):
        if kind == "rumor":
            return self.s.deliver(v, sender, msg)
        self.bases[v], helpful = try_insert(self.bases[v], msg)
        return int(helpful)

    def node_done(self, v):
        return self.bases[v].complete

    def tree_done(self):
        return self.s.done()


# --- runners -------------------------------------------------------------


def _use_fast(engine: str, eligible: bool) -> bool:
    """Pick the compiled q=2 path when allowed and applicable."""
    if engine == "pure":
        return False
    if engine == "fast":
        if not eligible:
            raise ValueError("fast engine requires q=2, no payloads, no trace")
        return True
    if engine != "auto":
        raise ValueError(f"engine must be auto, pure, or fast, got {engine!r}")
    if not eligible:
        return False
    try:
        from . import kernels  # noqa: F401
    except ImportError:
        return False
    return True


def _report(g, engine, protocol_name, k, q, action, seed, rounds, timeslots,
            capped, tree_proto=None):
    tree_time = engine.tree_rounds()
    tree_diameter = None
    if tree_proto is not None:
        t = tree_proto.tree()
        if t is not None:
            tree_diameter = t.diameter()
    return StoppingReport(
        family=g.family, n=g.n, k=k, q=q, protocol=protocol_name,
        time_model=engine.clock.time_model, action=action, seed=seed,
        rounds=rounds, timeslots=timeslots, tree_time=tree_time,
        tree_diameter=tree_diameter, capped=capped,
        finish_slots=list(engine.finish_slots),
        trace_lines=engine.trace,
    )


def _check_placement(placement, k: int, n: int) -> None:
    if placement is None:
        return
    nodes = list(placement)
    if len(nodes) != k or len(set(nodes)) != k:
        raise ValueError("placement must name k distinct nodes")
    if any(not 0 <= v < n for v in nodes):
        raise ValueError("placement node out of range")


def run_uniform_ag(g: Topology, k: int, q: int = 2, time_model: str = "async",
                   action: str = "EXCHANGE", seed: int = 0, placement=None,
                   payloads=None, cap: int = DEFAULT_ROUND_CAP,
                   collect_trace: bool = False,
                   engine: str = "auto") -> StoppingReport:
    """Uniform coded gossip until every node can decode (rank k)."""
    if not 1 <= k <= g.n:
        raise ValueError(f"k={k} out of range for n={g.n}")
    _check_placement(placement, k, g.n)
    eligible = q == 2 and payloads is None and not collect_trace
    if _use_fast(engine, eligible):
        from . import kernels
        placement, rounds, timeslots, capped, finish = kernels.uniform_ag_trial(
            g, k, time_model, action, seed, placement, cap)
        return StoppingReport(
            family=g.family, n=g.n, k=k, q=q, protocol="uniform_ag",
            time_model=time_model, action=action, seed=seed, rounds=rounds,
            timeslots=timeslots, tree_time=None, tree_diameter=None,
            capped=capped, finish_slots=finish)
    rng = random.Random(derive_seed(seed, "trial"))
    proto = UniformGossip(g, k, q, action, rng, placement, payloads)
    eng = GossipEngine(g, proto, time_model, rng, collect_trace)
    rounds, timeslots, capped = eng.run(cap)
    report = _report(g, eng, "uniform_ag", k, q, action, seed,
                     rounds, timeslots, capped)
    report.bases = proto.bases
    return report


def run_brr_broadcast(g: Topology, origin: int | None = None,
                      time_model: str = "sync", action: str = "PUSH",
                      seed: int = 0, cap: int = DEFAULT_ROUND_CAP,
                      collect_trace: bool = False,
                      engine: str = "auto") -> StoppingReport:
    """Round-robin rumor broadcast until every node is informed."""
    eligible = action == "PUSH" and not collect_trace
    if _use_fast(engine, eligible):
        from . import kernels
        origin, rounds, timeslots, capped, parent = kernels.brr_trial(
            g, origin, time_model, seed, cap)
        tree_diameter = None
        if not capped:
            tree_diameter = SpanningTree(origin, tuple(parent)).diameter()
        report = StoppingReport(
            family=g.family, n=g.n, k=1, q=2, protocol="brr",
            time_model=time_model, action="PUSH", seed=seed, rounds=rounds,
            timeslots=timeslots, tree_time=None if capped else rounds,
            tree_diameter=tree_diameter, capped=capped)
        report.parent = parent
        return report
    rng = random.Random(derive_seed(seed, "trial"))
    if origin is None:
        origin = rng.randrange(g.n)
    tree_proto = BrrTree(g, origin, rng)
    proto = BroadcastProtocol(tree_proto, action)
    eng = GossipEngine(g, proto, time_model, rng, collect_trace)
    rounds, timeslots, capped = eng.run(cap)
    report = _report(g, eng, "brr", 1, 2, action, seed,
                     rounds, timeslots, capped, tree_proto)
    report.parent = list(tree_proto.parent)
    return report


def run_tag(g: Topology, k: int, q: int = 2, time_model: str = "async",
            tree: str = "brr", seed: int = 0, placement=None, payloads=None,
            cap: int = DEFAULT_ROUND_CAP, collect_trace: bool = False,
            engine: str = "auto") -> StoppingReport:
    """Tree-assisted gossip with either a live B_RR tree or an oracle tree.

    The tree origin (equivalently the oracle root) is drawn uniformly
    per trial. Stops when every node reaches rank k; the tree phase
    keeps running inertly after completion.
    """
    if not 1 <= k <= g.n:
        raise ValueError(f"k={k} out of range for n={g.n}")
    _check_placement(placement, k, g.n)
    if tree not in ("brr", "oracle"):
        raise ValueError(f"tree must be brr or oracle, got {tree!r}")
    name = "tag" if tree == "brr" else "tag_oracle"
    eligible = q == 2 and payloads is None and not collect_trace
    if _use_fast(engine, eligible):
        from . import kernels
        (origin, placement, rounds, timeslots, capped, tree_slot,
         parent, finish) = kernels.tag_trial(g, k, time_model, tree, seed,
                                             placement, cap)
        tree_time = None
        tree_diameter = None
        if tree_slot >= 0:
            tree_time = -(-tree_slot // g.n)
            tree_diameter = SpanningTree(origin, tuple(parent)).diameter()
        report = StoppingReport(
            family=g.family, n=g.n, k=k, q=q, protocol=name,
            time_model=time_model, action="EXCHANGE", seed=seed,
            rounds=rounds, timeslots=timeslots, tree_time=tree_time,
            tree_diameter=tree_diameter, capped=capped, finish_slots=finish)
        report.parent = parent
        return report
    rng = random.Random(derive_seed(seed, "trial"))
    origin = rng.randrange(g.n)
    if tree == "brr":
        tree_proto = BrrTree(g, origin, rng)
    else:
        tree_proto = OracleTree(g, origin, rng)
    proto = TagProtocol(g, k, q, tree_proto, rng, placement, payloads)
    eng = GossipEngine(g, proto, time_model, rng, collect_trace)
    rounds, timeslots, capped = eng.run(cap)
    report = _report(g, eng, name, k, q, "EXCHANGE", seed,
                     rounds, timeslots, capped, tree_proto)
    report.bases = proto.bases
    return report
