"""Contact scheduling: wakeup clocks, partner selection, message delivery.

Two time models share one engine:

* async: each timeslot one node wakes, chosen independently and
  uniformly at random. A round is n consecutive timeslots
  (round = floor(timeslot / n)).
* sync: every node wakes once per round, in ascending id order. All
  outgoing messages of a round are built from the state at round start
  and only applied afterwards, so delivery order within a round cannot
  leak information.

Delivery discipline for sync rounds: messages are generated initiator
by initiator (forward message first, then the partner's reply for PULL
and EXCHANGE). If a node would receive two messages from the same
sender in one round, the second is discarded. Surviving deliveries are
applied in ascending (receiver, sender) order.

For async contacts, both sides of an EXCHANGE are built from the state
before either delivery lands: the initiator's message is applied to the
partner only after the partner's reply has been built.

Protocols plug in through a small duck interface:

    wakeup(v, rng) -> (action, partner, kind) or None for an idle slot
    build(v, kind, rng) -> message or None (nothing to send)
    deliver(v, sender, kind, msg) -> int helpfulness (rank gained)
    node_done(v) -> bool
    tree_done() -> bool or None for protocols that grow no tree
"""

from __future__ import annotations

import random

from .graph import Topology

ACTIONS = ("PUSH", "PULL", "EXCHANGE")


class EventClock:
    """Tracks elapsed wakeups (timeslots) and rounds for either model."""

    def __init__(self, n: int, time_model: str):
        if time_model not in ("sync", "async"):
            raise ValueError(f"time_model must be sync or async, got {time_model!r}")
        self.n = n
        self.time_model = time_model
        self.timeslot = 0  # completed node wakeups

    @property
    def round(self) -> int:
        # sync rounds advance n wakeups at a time, so this is exact there too
        return self.timeslot // self.n

    def rounds_at(self, timeslot: int) -> int:
        return -(-timeslot // self.n)  # ceil


class UniformSelector:
    """Contact partner chosen uniformly among neighbors."""

    def __init__(self, g: Topology):
        self.neighbors = g.neighbors

    def select(self, v: int, rng: random.Random) -> int:
        nb = self.neighbors[v]
        return nb[rng.randrange(len(nb))]


class RoundRobinSelector:
    """Cyclic neighbor schedule per node; start offsets drawn once at setup."""

    def __init__(self, g: Topology, rng: random.Random):
        self.neighbors = g.neighbors
        self.pointer = [rng.randrange(len(nb)) for nb in g.neighbors]

    def select(self, v: int, rng: random.Random = None) -> int:
        nb = self.neighbors[v]
        p = self.pointer[v]
        self.pointer[v] = (p + 1) % len(nb)
        return nb[p]


class FixedParentSelector:
    """Always contact the node's parent; the root gets no partner."""

    def __init__(self, parent):
        self.parent = parent  # mutable list; -1 marks "no parent yet"

    def select(self, v: int, rng: random.Random = None):
        p = self.parent[v]
        return None if p < 0 else p


class GossipEngine:
    """Runs a protocol over a topology until done or a round cap."""

    def __init__(self, g: Topology, protocol, time_model: str,
                 rng: random.Random, collect_trace: bool = False):
        self.g = g
        self.n = g.n
        self.protocol = protocol
        self.clock = EventClock(g.n, time_model)
        self.rng = rng
        self.trace = [] if collect_trace else None

        self.done = [protocol.node_done(v) for v in range(self.n)]
        self.done_count = sum(self.done)
        self.finish_slots = [0 if d else -1 for d in self.done]
        self.tree_slot = None
        if protocol.tree_done() is True:
            self.tree_slot = 0

    # -- bookkeeping ------------------------------------------------------

    def _after_delivery(self, receiver: int):
        if not self.done[receiver] and self.protocol.node_done(receiver):
            self.done[receiver] = True
            self.done_count += 1
            self.finish_slots[receiver] = self.clock.timeslot
        if self.tree_slot is None and self.protocol.tree_done():
            self.tree_slot = self.clock.timeslot

    def _emit(self, t, init, part, act, helpful):
        if self.trace is not None:
            self.trace.append(f"t={t} init={init} part={part} act={act} helpful={helpful}")

    @property
    def finished(self) -> bool:
        return self.done_count == self.n

    # -- async ------------------------------------------------------------

    def step_slot(self):
        """One async timeslot: a uniform node wakes and makes its contact."""
        proto = self.protocol
        rng = self.rng
        self.clock.timeslot += 1
        v = rng.randrange(self.n)
        intent = proto.wakeup(v, rng)
        if intent is None:
            return
        act, partner, kind = intent
        helpful = 0
        if act == "PUSH":
            msg = proto.build(v, kind, rng)
            if msg is not None:
                helpful += proto.deliver(partner, v, kind, msg)
                self._after_delivery(partner)
        elif act == "PULL":
            msg = proto.build(partner, kind, rng)
            if msg is not None:
                helpful += proto.deliver(v, partner, kind, msg)
                self._after_delivery(v)
        elif act == "EXCHANGE":
            # both messages precede both deliveries: the reply cannot
            # depend on what the initiator just sent
            fwd = proto.build(v, kind, rng)
            rep = proto.build(partner, kind, rng)
            if fwd is not None:
                helpful += proto.deliver(partner, v, kind, fwd)
                self._after_delivery(partner)
            if rep is not None:
                helpful += proto.deliver(v, partner, kind, rep)
                self._after_delivery(v)
        else:
            raise ValueError(f"unknown action {act!r}")
        self._emit(self.clock.timeslot, v, partner, act, helpful)

    # -- sync ---------------------------------------------------------------

    def step_round(self):
        """One sync round: every node wakes once, snapshot semantics."""
        proto = self.protocol
        rng = self.rng
        contacts = []   # (init, partner, act)
        sends = []      # (sender, receiver, kind, msg, contact_index)
        for v in range(self.n):
            intent = proto.wakeup(v, rng)
            if intent is None:
                continue
            act, partner, kind = intent
            ci = len(contacts)
            contacts.append([v, partner, act, 0])
            if act in ("PUSH", "EXCHANGE"):
                msg = proto.build(v, kind, rng)
                if msg is not None:
                    sends.append((v, partner, kind, msg, ci))
            if act in ("PULL", "EXCHANGE"):
                msg = proto.build(partner, kind, rng)
                if msg is not None:
                    sends.append((partner, v, kind, msg, ci))
        # duplicate rule: first message per (sender, receiver) wins
        seen = set()
        surviving = []
        for order, (s, r, kind, msg, ci) in enumerate(sends):
            if (s, r) in seen:
                continue
            seen.add((s, r))
            surviving.append((r, s, order, kind, msg, ci))
        surviving.sort(key=lambda item: (item[0], item[1]))
        self.clock.timeslot += self.n
        for r, s, _, kind, msg, ci in surviving:
            h = proto.deliver(r, s, kind, msg)
            contacts[ci][3] += h
            self._after_delivery(r)
        t = self.clock.round
        for v, partner, act, helpful in contacts:
            self._emit(t, v, partner, act, helpful)

    # -- driver -------------------------------------------------------------

    def run(self, round_cap: int = 10 ** 6):
        """Advance until the protocol finishes or the cap strikes.

        Returns (rounds, timeslots, capped). Stopping is tracked
        incrementally at each delivery, so the reported timeslot is the
        exact wakeup at which the last node finished.
        """
        if self.finished:
            return 0, 0, False
        if self.clock.time_model == "sync":
            while not self.finished and self.clock.round < round_cap:
                self.step_round()
            capped = not self.finished
            rounds = self.clock.round
            return rounds, rounds * self.n, capped
        slot_cap = round_cap * self.n
        while not self.finished and self.clock.timeslot < slot_cap:
            self.step_slot()
        capped = not self.finished
        slots = max(self.finish_slots) if not capped else self.clock.timeslot
        return self.clock.rounds_at(slots), slots, capped

    def tree_rounds(self):
        if self.tree_slot is None:
            return None
        return self.clock.rounds_at(self.tree_slot)
