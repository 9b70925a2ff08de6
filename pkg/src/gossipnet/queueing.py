"""Feedforward networks of single-server FCFS queues on trees and lines.

Customers start distributed over the queues and drain toward the root;
the stopping time is the moment the last one departs. This is the
continuous-time companion to the gossip simulators: a spanning tree of
the contact graph becomes a tree of exponential servers whose service
rate is a conservative per-timeslot bound on helpful deliveries, so the
queue-drain time upper-bounds the gossip stopping time.

The module also provides the auxiliary networks obtained by collapsing
tree levels into a line and by moving customers away from the root.
Each rewrite can only slow the drain down (stochastically), which the
`dominance_test` check verifies empirically with DKW confidence bands.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .graph import SpanningTree
from .rng import derive_seed

SHAPES = ("tree", "line")
SCHEDULINGS = ("work_conserving", "one_per_level")


@dataclass(frozen=True)
class QueueNetwork:
    """Immutable description of a feedforward queueing network.

    Queues are indexed 0..Q-1. `parent[q]` is the queue a customer
    enters after being served at q (-1 at the root, where customers
    leave the system). `level[q]` is 1 at the root and increases away
    from it. `initial[q]` lists the customer ids resident at q at time
    zero, in service order (head first).

    Scheduling: `work_conserving` runs every nonempty queue's server;
    `one_per_level` runs at most one server per level, picking the
    queue whose head customer arrived at that level earliest (initial
    residents count as arrivals at time zero, ordered by id).
    """

    shape: str
    mu: float
    parent: tuple[int, ...]
    level: tuple[int, ...]
    initial: tuple[tuple[int, ...], ...]
    scheduling: str = "work_conserving"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.scheduling not in SCHEDULINGS:
            raise ValueError(f"unknown scheduling {self.scheduling!r}")
        if not self.mu > 0:
            raise ValueError("service rate must be positive")
        q = len(self.parent)
        if len(self.level) != q or len(self.initial) != q:
            raise ValueError("parent/level/initial length mismatch")
        roots = [i for i, p in enumerate(self.parent) if p < 0]
        if len(roots) != 1:
            raise ValueError("exactly one root queue required")
        root = roots[0]
        if self.level[root] != 1:
            raise ValueError("root must sit at level 1")
        for i, p in enumerate(self.parent):
            if i == root:
                continue
            if not 0 <= p < q:
                raise ValueError(f"parent of queue {i} out of range")
            if self.level[i] != self.level[p] + 1:
                raise ValueError("levels must increase by 1 away from root")
        if self.shape == "line":
            expect = (-1,) + tuple(range(q - 1))
            if self.parent != expect:
                raise ValueError("line shape requires parent[i] == i-1")
        ids = sorted(c for grp in self.initial for c in grp)
        if not ids:
            raise ValueError("at least one customer required")
        if ids != list(range(len(ids))):
            raise ValueError("customer ids must be 0..k-1, each once")

    @property
    def n_queues(self) -> int:
        return len(self.parent)

    @property
    def k(self) -> int:
        return sum(len(grp) for grp in self.initial)

    @property
    def root(self) -> int:
        return self.parent.index(-1)

    @property
    def l_max(self) -> int:
        return max(self.level)


@dataclass(frozen=True)
class DepartureTrace:
    """Per-queue event record of one simulated drain.

    All per-queue tuples are in service order, which under FCFS is also
    arrival order: `arrivals[q][i]`, `starts[q][i]`, `services[q][i]`
    and `departures[q][i]` describe the i-th customer through queue q,
    with departures[q][i] == starts[q][i] + services[q][i] exactly and
    starts[q][i] >= max(arrivals[q][i], departures[q][i-1]) (equality
    under work-conserving scheduling). `served_ids` gives the customer
    order and `stopping_time` the final root departure.
    """

    arrivals: tuple[tuple[float, ...], ...]
    starts: tuple[tuple[float, ...], ...]
    services: tuple[tuple[float, ...], ...]
    departures: tuple[tuple[float, ...], ...]
    served_ids: tuple[tuple[int, ...], ...]
    stopping_time: float


def line_network(counts, mu, scheduling="work_conserving") -> QueueNetwork:
    """Line of queues, index 0 = root; counts[i] customers start at i.

    Customer ids are assigned in queue order, root first, so each
    queue's residents are consecutive ids in id order.
    """
    counts = tuple(int(c) for c in counts)
    if any(c < 0 for c in counts):
        raise ValueError("negative customer count")
    q = len(counts)
    initial = []
    nxt = 0
    for c in counts:
        initial.append(tuple(range(nxt, nxt + c)))
        nxt += c
    return QueueNetwork(
        shape="line",
        mu=mu,
        parent=(-1,) + tuple(range(q - 1)),
        level=tuple(range(1, q + 1)),
        initial=tuple(initial),
        scheduling=scheduling,
    )


def build_tree_from_graph(tree: SpanningTree, placement, mu,
                          scheduling="work_conserving") -> QueueNetwork:
    """Queue per tree node, routed child to parent toward the root.

    `placement` maps node -> customer count (dict or per-node sequence).
    Ids are assigned in node-index order.
    """
    n = len(tree.parent)
    if isinstance(placement, dict):
        counts = [int(placement.get(v, 0)) for v in range(n)]
    else:
        counts = [int(c) for c in placement]
        if len(counts) != n:
            raise ValueError("placement length must match tree size")
    if any(c < 0 for c in counts):
        raise ValueError("negative customer count")
    depths = tree.depths()
    initial = []
    nxt = 0
    for v in range(n):
        initial.append(tuple(range(nxt, nxt + counts[v])))
        nxt += counts[v]
    return QueueNetwork(
        shape="tree",
        mu=mu,
        parent=tuple(tree.parent),
        level=tuple(d + 1 for d in depths),
        initial=tuple(initial),
        scheduling=scheduling,
    )


def uniform_gossip_service_rate(n: int, max_degree: int) -> float:
    """Worst-case per-timeslot rate of a helpful delivery across a tree
    edge under uniform neighbor choice: the sending side wakes with
    probability 1/n, picks the edge with probability >= 1/degree, and
    the transmission helps with probability >= 1/2 at q=2."""
    return 1.0 / (2 * n * max_degree)


def fixed_partner_service_rate(n: int) -> float:
    """Same bound when every wakeup contacts one fixed partner, which
    removes the degree factor."""
    return 1.0 / (2 * n)


def simulate(net: QueueNetwork, seed: int, service: str = "exponential",
             ) -> DepartureTrace:
    """Exact event-driven drain of `net`; returns the full trace.

    Service draws are i.i.d. exponential(mu), or geometric with success
    probability mu per unit step when service="geometric" (integer
    durations, for cross-checks against slotted-time simulations).
    """
    if service not in ("exponential", "geometric"):
        raise ValueError(f"unknown service law {service!r}")
    rng = random.Random(derive_seed(seed, "queue"))
    mu = net.mu

    def draw() -> float:
        if service == "exponential":
            return rng.expovariate(mu)
        if mu >= 1.0:
            return 1.0
        u = rng.random()
        return float(math.ceil(math.log1p(-u) / math.log1p(-mu)))

    nq = net.n_queues
    root = net.root
    k = net.k
    # FCFS per queue: (arrival_time, customer_id), head at the left
    queues = [deque((0.0, cid) for cid in grp) for grp in net.initial]
    arrivals = [[0.0] * len(grp) for grp in net.initial]
    starts: list[list[float]] = [[] for _ in range(nq)]
    services: list[list[float]] = [[] for _ in range(nq)]
    departures: list[list[float]] = [[] for _ in range(nq)]
    served: list[list[int]] = [[] for _ in range(nq)]
    busy = [False] * nq
    per_level = net.scheduling == "one_per_level"
    level_of = net.level
    level_busy = [False] * (net.l_max + 1)
    by_level: dict[int, list[int]] = {}
    for q, lv in enumerate(level_of):
        by_level.setdefault(lv, []).append(q)

    events: list[tuple[float, int, int]] = []  # (finish, seq, queue)
    seq = 0

    def start_service(q: int, now: float) -> None:
        nonlocal seq
        x = draw()
        busy[q] = True
        if per_level:
            level_busy[level_of[q]] = True
        starts[q].append(now)
        services[q].append(x)
        heappush(events, (now + x, seq, q))
        seq += 1

    def next_at_level(lv: int) -> int | None:
        # serve the queue whose head arrived at this level first;
        # time-zero residents tie-break by customer id
        best = None
        key = None
        for q in by_level[lv]:
            if queues[q]:
                head = queues[q][0]
                if key is None or head < key:
                    key = head
                    best = q
        return best

    if per_level:
        for lv in sorted(by_level):
            q = next_at_level(lv)
            if q is not None:
                start_service(q, 0.0)
    else:
        for q in range(nq):
            if queues[q]:
                start_service(q, 0.0)

    stopping = 0.0
    while events:
        t, _, q = heappop(events)
        _, cid = queues[q].popleft()
        departures[q].append(t)
        served[q].append(cid)
        busy[q] = False
        p = net.parent[q]
        if p >= 0:
            queues[p].append((t, cid))
            arrivals[p].append(t)
        else:
            stopping = t
        if per_level:
            lv = level_of[q]
            level_busy[lv] = False
            nxt = next_at_level(lv)
            if nxt is not None:
                start_service(nxt, t)
            if p >= 0 and not level_busy[level_of[p]]:
                nxt = next_at_level(level_of[p])
                if nxt is not None:
                    start_service(nxt, t)
        else:
            if queues[q]:
                start_service(q, t)
            if p >= 0 and not busy[p]:
                start_service(p, t)

    assert len(departures[root]) == k, "customers lost or duplicated"
    return DepartureTrace(
        arrivals=tuple(tuple(a) for a in arrivals),
        starts=tuple(tuple(s) for s in starts),
        services=tuple(tuple(x) for x in services),
        departures=tuple(tuple(d) for d in departures),
        served_ids=tuple(tuple(c) for c in served),
        stopping_time=stopping,
    )


def collapse_levels(net: QueueNetwork) -> QueueNetwork:
    """Merge all queues of each level into one, producing a line.

    Residents of a level are ordered by id in the merged queue.
    """
    if net.shape != "tree":
        raise ValueError("collapse_levels expects a tree network")
    counts_by_level: dict[int, list[int]] = {lv: [] for lv in
                                             range(1, net.l_max + 1)}
    for q, grp in enumerate(net.initial):
        counts_by_level[net.level[q]].extend(grp)
    initial = tuple(tuple(sorted(counts_by_level[lv]))
                    for lv in range(1, net.l_max + 1))
    return QueueNetwork(
        shape="line",
        mu=net.mu,
        parent=(-1,) + tuple(range(net.l_max - 1)),
        level=tuple(range(1, net.l_max + 1)),
        initial=initial,
        scheduling="work_conserving",
    )


def move_customer_back(net: QueueNetwork, m: int | None = None,
                       ) -> QueueNetwork:
    """Move the last customer of the level-m queue to the head of the
    level-(m+1) queue (m is 1-based, m < l_max).

    Default m: the first level below l_max that still has customers.
    """
    if net.shape != "line":
        raise ValueError("move_customer_back expects a line network")
    last = net.n_queues  # == l_max for a line
    if m is None:
        m = next((lv for lv in range(1, last)
                  if net.initial[lv - 1]), None)
        if m is None:
            raise ValueError("no customer ahead of the farthest queue")
    if not 1 <= m < last:
        raise ValueError(f"level index {m} out of range [1, {last - 1}]")
    if not net.initial[m - 1]:
        raise ValueError(f"queue at level {m} is empty")
    initial = [list(grp) for grp in net.initial]
    moved = initial[m - 1].pop()
    initial[m].insert(0, moved)
    return QueueNetwork(
        shape="line",
        mu=net.mu,
        parent=net.parent,
        level=net.level,
        initial=tuple(tuple(grp) for grp in initial),
        scheduling=net.scheduling,
    )


def all_customers_back(net: QueueNetwork) -> QueueNetwork:
    """Place every customer in the farthest queue, ordered by id."""
    if net.shape != "line":
        raise ValueError("all_customers_back expects a line network")
    ids = tuple(sorted(c for grp in net.initial for c in grp))
    initial = tuple(() for _ in range(net.n_queues - 1)) + (ids,)
    return QueueNetwork(
        shape="line",
        mu=net.mu,
        parent=net.parent,
        level=net.level,
        initial=initial,
        scheduling=net.scheduling,
    )


def transform(net: QueueNetwork, which: str, m: int | None = None,
              ) -> QueueNetwork:
    """Dispatch to one of the slowing rewrites by name."""
    if which == "collapse_levels":
        return collapse_levels(net)
    if which == "move_customer_back":
        return move_customer_back(net, m)
    if which == "all_customers_back":
        return all_customers_back(net)
    raise ValueError(f"unknown transform {which!r}")


@dataclass(frozen=True)
class DominanceReport:
    """Outcome of an empirical CDF-dominance comparison."""

    consistent: bool
    max_violation: float
    band: float
    n_a: int
    n_b: int
    two_sided: bool


def cdf_dominance(samples_a, samples_b, alpha: float = 0.01,
                  two_sided: bool = False) -> DominanceReport:
    """Check F_A >= F_B - band pointwise (A stochastically <= B).

    The band is the sum of each sample's DKW envelope at level alpha,
    so a true dominance relation fails with probability <= 2*alpha.
    With two_sided=True the check becomes |F_A - F_B| <= band, used for
    pairs that should be equal in distribution.
    """
    a = np.sort(np.asarray(samples_a, dtype=float))
    b = np.sort(np.asarray(samples_b, dtype=float))
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / na
    fb = np.searchsorted(b, grid, side="right") / nb
    if two_sided:
        eps = (math.log(2 / alpha) / 2) ** 0.5
        gap = float(np.abs(fa - fb).max())
    else:
        eps = (math.log(1 / alpha) / 2) ** 0.5
        gap = float((fb - fa).max())
    band = eps / math.sqrt(na) + eps / math.sqrt(nb)
    violation = max(0.0, gap)
    return DominanceReport(
        consistent=gap <= band,
        max_violation=violation,
        band=band,
        n_a=na,
        n_b=nb,
        two_sided=two_sided,
    )


def stopping_samples(net: QueueNetwork, trials: int, seed: int = 0,
                     service: str = "exponential") -> np.ndarray:
    """Simulate `trials` independent drains; return stopping times."""
    out = np.empty(trials)
    for i in range(trials):
        out[i] = simulate(net, derive_seed(seed, "trial", i),
                          service=service).stopping_time
    return out


def dominance_test(net_a: QueueNetwork, net_b: QueueNetwork, trials: int,
                   alpha: float = 0.01, seed: int = 0,
                   two_sided: bool = False) -> DominanceReport:
    """Empirical check that net_a finishes stochastically no later than
    net_b. Independent seeds per side; verdict via `cdf_dominance`."""
    if net_a.k != net_b.k:
        raise ValueError("networks must hold the same customer count")
    if not math.isclose(net_a.mu, net_b.mu):
        raise ValueError("networks must share the service rate")
    a = stopping_samples(net_a, trials, derive_seed(seed, "side-a"))
    b = stopping_samples(net_b, trials, derive_seed(seed, "side-b"))
    return cdf_dominance(a, b, alpha=alpha, two_sided=two_sided)


def jackson_oracle_samples(k: int, levels: int, mu: float, trials: int,
                           seed: int = 0) -> np.ndarray:
    """Stopping-time samples of the slowed open-network construction.

    Take the line with every customer at the far end, pull the
    customers out, and feed them back in as a Poisson stream of rate
    mu/2 against servers kept at equilibrium. The last customer then
    enters after a sum of k exponential(mu/2) interarrivals and crosses
    the levels in a sum of `levels` exponential(mu - mu/2) waits, so
    the total is a Gamma(k + levels) variable at rate mu/2. This upper
    envelope dominates the closed line and is sampled directly.
    """
    rng = np.random.default_rng(derive_seed(seed, "jackson"))
    return rng.gamma(shape=k + levels, scale=2.0 / mu, size=trials)


def line_recurrence_times(k: int, levels: int, mu: float, trials: int,
                          seed: int = 0) -> np.ndarray:
    """Stopping times of the all-customers-at-the-far-end line, sampled
    by iterating the FCFS recurrence d_i = max(a_i, d_{i-1}) + X_i
    directly with vectorized draws. Independent of the event-driven
    simulator; used both as its oracle and for large scaling grids.
    """
    rng = np.random.default_rng(derive_seed(seed, "line-recurrence"))
    d = np.zeros((trials, k))
    for _ in range(levels):
        x = rng.exponential(1.0 / mu, size=(trials, k))
        cur = np.empty_like(d)
        run = np.zeros(trials)
        for i in range(k):
            run = np.maximum(d[:, i], run) + x[:, i]
            cur[:, i] = run
        d = cur
    return d[:, -1]


@dataclass(frozen=True)
class ScalingCell:
    k: int
    levels: int
    trials: int
    mean: float
    p99: float
    ratio: float

    def csv_row(self) -> str:
        return (f"{self.k},{self.levels},{self.trials},"
                f"{self.mean:.6g},{self.p99:.6g},{self.ratio:.6g}")


@dataclass(frozen=True)
class ScalingReport:
    """Grid of drain times against the (k + l_max + ln n) / mu budget."""

    cells: tuple[ScalingCell, ...]
    n: int
    mu: float
    max_ratio: float
    min_ratio: float
    fit_r2_vs_k: float
    fit_r2_vs_levels: float

    CSV_HEADER = "k,levels,trials,mean,p99,ratio"

    def csv_rows(self) -> list[str]:
        return [self.CSV_HEADER] + [c.csv_row() for c in self.cells]


def _affine_r2(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    total = ys - ys.mean()
    denom = float(total @ total)
    if denom == 0:
        return 1.0
    return 1.0 - float(resid @ resid) / denom


def scaling_report(k_values, depth_values, n: int, mu: float,
                   trials: int = 10_000, seed: int = 0) -> ScalingReport:
    """Drain-time scaling over a (k, depth) grid.

    Each cell runs the extremal line (every customer behind `depth`
    queues) and reports the 99th-percentile stopping time divided by
    (k + depth + ln n) / mu. Cells whose trials*k*depth volume exceeds
    10^8 halve the trial count until it fits, floored at 200.
    """
    cells = []
    means_by_depth: dict[int, list[tuple[int, float]]] = {}
    means_by_k: dict[int, list[tuple[int, float]]] = {}
    for k in k_values:
        for levels in depth_values:
            cell_trials = trials
            while cell_trials > 200 and k * levels * cell_trials > 10 ** 8:
                cell_trials //= 2
            times = line_recurrence_times(
                k, levels, mu, cell_trials, seed=derive_seed(seed, k, levels))
            p99 = float(np.percentile(times, 99))
            mean = float(times.mean())
            ratio = p99 * mu / (k + levels + math.log(n))
            cells.append(ScalingCell(k, levels, cell_trials, mean, p99,
                                     ratio))
            means_by_depth.setdefault(levels, []).append((k, mean))
            means_by_k.setdefault(k, []).append((levels, mean))
    ratios = [c.ratio for c in cells]
    r2_k = min((_affine_r2(*zip(*pts)) for pts in means_by_depth.values()
                if len(pts) >= 3), default=1.0)
    r2_l = min((_affine_r2(*zip(*pts)) for pts in means_by_k.values()
                if len(pts) >= 3), default=1.0)
    return ScalingReport(
        cells=tuple(cells),
        n=n,
        mu=mu,
        max_ratio=max(ratios),
        min_ratio=min(ratios),
        fit_r2_vs_k=r2_k,
        fit_r2_vs_levels=r2_l,
    )


TRACE_CSV_HEADER = "trial,queue,departure_index,time"


def traces_csv(traces, start_trial: int = 0) -> str:
    """Render departure events of one or more traces as CSV text."""
    if isinstance(traces, DepartureTrace):
        traces = [traces]
    lines = [TRACE_CSV_HEADER]
    for t_idx, trace in enumerate(traces, start=start_trial):
        for q, deps in enumerate(trace.departures):
            for i, d in enumerate(deps):
                lines.append(f"{t_idx},{q},{i},{d:.9g}")
    return "\n".join(lines) + "\n"
