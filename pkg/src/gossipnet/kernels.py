"""Compiled q=2 trial kernels for the heavy stopping-time workloads.

These replicate the contact semantics of engine.py / protocols.py for
coefficient-only GF(2) runs (no payloads, no trace): uniform wakeups,
snapshot rounds with the first-message-per-(sender, receiver) rule,
EXCHANGE replies built before either delivery, round-robin rumor trees
with the lowest-id first informer winning ties. The pure engine stays
the semantic reference; tests/test_kernels.py holds the two paths to
the same invariants and stopping distributions.

Bases are packed bit matrices: row vectors of ceil(k/64) uint64 words,
kept in reduced echelon form exactly like field.EquationBasis. The
random stream is xoshiro256++ seeded through rng.derive_seed, so trials
are reproducible by (seed, parameters) alone.
"""

from __future__ import annotations

import random

import numpy as np
from numba import int64, njit, uint64

from .graph import Topology, bfs_tree
from .rng import derive_seed

U64 = np.uint64
M64 = uint64(0xFFFFFFFFFFFFFFFF)
U1 = uint64(1)

ACTION_CODE = {"PUSH": 0, "PULL": 1, "EXCHANGE": 2}

# de Bruijn trailing-zero table for multiplier 0x022FDD63CC95386D
_CTZ_MUL = uint64(0x022FDD63CC95386D)
_CTZ_TAB = np.array([
    0, 1, 2, 53, 3, 7, 54, 27, 4, 38, 41, 8, 34, 55, 48, 28,
    62, 5, 39, 46, 44, 42, 22, 9, 24, 35, 59, 56, 49, 18, 29, 11,
    63, 52, 6, 26, 37, 40, 33, 47, 61, 45, 43, 21, 23, 58, 17, 10,
    51, 25, 36, 32, 60, 20, 57, 16, 50, 31, 19, 15, 30, 14, 13, 12,
], dtype=np.int64)


@njit(cache=True, nogil=True, inline="always")
def _ctz(x):
    return _CTZ_TAB[((x & (~x + U1)) * _CTZ_MUL & M64) >> uint64(58)]


@njit(cache=True, nogil=True)
def _splitmix(x):
    x = (x + uint64(0x9E3779B97F4A7C15)) & M64
    z = x
    z = ((z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)) & M64
    z = ((z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)) & M64
    return (z ^ (z >> uint64(31))) & M64


@njit(cache=True, nogil=True)
def _seed_state(state, seed):
    s = seed
    for i in range(4):
        s = (s + uint64(0x9E3779B97F4A7C15)) & M64
        state[i] = _splitmix(s)


@njit(cache=True, nogil=True, inline="always")
def _rotl(x, r):
    return ((x << r) | (x >> (uint64(64) - r))) & M64


@njit(cache=True, nogil=True, inline="always")
def _next64(state):
    # xoshiro256++
    out = (_rotl((state[0] + state[3]) & M64, uint64(23)) + state[0]) & M64
    t = (state[1] << uint64(17)) & M64
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], uint64(45))
    return out


@njit(cache=True, nogil=True, inline="always")
def _randint(state, bound):
    # modulo bias is below 2^-54 for bound <= 2^10; irrelevant here
    return int64(_next64(state) % uint64(bound))


@njit(cache=True, nogil=True)
def _sample(rows_v, rank_v, W, state, out):
    """Uniform random GF(2) combination of the first rank_v rows."""
    for w in range(W):
        out[w] = uint64(0)
    done = 0
    while done < rank_v:
        c = _next64(state)
        hi = min(64, rank_v - done)
        for b in range(hi):
            if (c >> uint64(b)) & U1:
                ri = done + b
                for w in range(W):
                    out[w] ^= rows_v[ri, w]
        done += hi
    return


@njit(cache=True, nogil=True)
def _insert(rows_v, pivrow_v, pivmask_v, rank_v, W, msg):
    """Reduce msg against an RREF basis and insert if independent.

    Returns the new rank. msg is clobbered. Stored rows carry zeros in
    every other pivot column, so per-word masking finds exactly the
    positions needing reduction and XORs never revive a pivot bit.
    """
    for w in range(W):
        x = msg[w] & pivmask_v[w]
        while x:
            p = (w << 6) + _ctz(x)
            ri = pivrow_v[p]
            for w2 in range(W):
                msg[w2] ^= rows_v[ri, w2]
            x &= x - U1
    piv = -1
    for w in range(W):
        if msg[w]:
            piv = (w << 6) + _ctz(msg[w])
            break
    if piv < 0:
        return rank_v
    pw = piv >> 6
    pb = uint64(piv & 63)
    for ri in range(rank_v):
        if (rows_v[ri, pw] >> pb) & U1:
            for w2 in range(W):
                rows_v[ri, w2] ^= msg[w2]
    for w2 in range(W):
        rows_v[rank_v, w2] = msg[w2]
    pivrow_v[piv] = rank_v
    pivmask_v[pw] |= U1 << pb
    return rank_v + 1


@njit(cache=True, nogil=True)
def _init_bases(rows, pivrow, pivmask, rank, placement, k):
    for i in range(placement.shape[0]):
        v = placement[i]
        w = i >> 6
        b = uint64(i & 63)
        rows[v, rank[v], w] = U1 << b
        pivrow[v, i] = rank[v]
        pivmask[v, w] |= U1 << b
        rank[v] += 1


@njit(cache=True, nogil=True)
def uniform_ag_kernel(n, k, W, adj, off, placement, sync, action, seed,
                      cap_rounds, finish):
    """One uniform coded-gossip trial. Returns (rounds, timeslots, capped)."""
    rows = np.zeros((n, k, W), dtype=np.uint64)
    pivrow = np.full((n, k), -1, dtype=np.int32)
    pivmask = np.zeros((n, W), dtype=np.uint64)
    rank = np.zeros(n, dtype=np.int32)
    _init_bases(rows, pivrow, pivmask, rank, placement, k)

    state = np.empty(4, dtype=np.uint64)
    _seed_state(state, uint64(seed))

    done = 0
    for v in range(n):
        finish[v] = -1
        if rank[v] == k:
            done += 1
            finish[v] = 0
    if done == n:
        return 0, 0, 0

    fwd = np.empty(W, dtype=np.uint64)
    rep = np.empty(W, dtype=np.uint64)

    if sync == 0:
        # async: one uniform wakeup per timeslot
        t = 0
        cap_slots = cap_rounds * n
        while done < n and t < cap_slots:
            t += 1
            v = _randint(state, n)
            d = off[v + 1] - off[v]
            u = adj[off[v] + _randint(state, d)]
            has_fwd = False
            has_rep = False
            if action != 1 and rank[v] > 0:      # PUSH or EXCHANGE
                _sample(rows[v], rank[v], W, state, fwd)
                has_fwd = True
            if action != 0 and rank[u] > 0:      # PULL or EXCHANGE
                _sample(rows[u], rank[u], W, state, rep)
                has_rep = True
            if has_fwd and rank[u] < k:
                nr = _insert(rows[u], pivrow[u], pivmask[u], rank[u], W, fwd)
                if nr == k:
                    done += 1
                    finish[u] = t
                rank[u] = nr
            if has_rep and rank[v] < k:
                nr = _insert(rows[v], pivrow[v], pivmask[v], rank[v], W, rep)
                if nr == k:
                    done += 1
                    finish[v] = t
                rank[v] = nr
        if done < n:
            return cap_rounds, cap_slots, 1
        tmax = 0
        for v in range(n):
            if finish[v] > tmax:
                tmax = finish[v]
        return -(-tmax // n), tmax, 0

    # sync: snapshot rounds with first-per-(sender, receiver) delivery
    msg = np.zeros((2 * n, W), dtype=np.uint64)
    msrc = np.empty(2 * n, dtype=np.int32)
    mdst = np.empty(2 * n, dtype=np.int32)
    stamp = np.zeros((n, n), dtype=np.int64)
    rnd = 0
    while done < n and rnd < cap_rounds:
        rnd += 1
        nm = 0
        for v in range(n):
            d = off[v + 1] - off[v]
            u = adj[off[v] + _randint(state, d)]
            if action != 1 and rank[v] > 0:
                _sample(rows[v], rank[v], W, state, msg[nm])
                msrc[nm] = v
                mdst[nm] = u
                nm += 1
            if action != 0 and rank[u] > 0:
                _sample(rows[u], rank[u], W, state, msg[nm])
                msrc[nm] = u
                mdst[nm] = v
                nm += 1
        for i in range(nm):
            s = msrc[i]
            r = mdst[i]
            if stamp[s, r] == rnd:
                continue
            stamp[s, r] = rnd
            if rank[r] == k:
                continue
            nr = _insert(rows[r], pivrow[r], pivmask[r], rank[r], W, msg[i])
            if nr == k:
                done += 1
                finish[r] = rnd * n
            rank[r] = nr
    if done < n:
        return cap_rounds, cap_rounds * n, 1
    return rnd, rnd * n, 0


@njit(cache=True, nogil=True)
def brr_kernel(n, adj, off, origin, sync, seed, cap_rounds, parent):
    """One round-robin push broadcast trial; fills first-informer parents."""
    state = np.empty(4, dtype=np.uint64)
    _seed_state(state, uint64(seed))
    ptr = np.empty(n, dtype=np.int32)
    for v in range(n):
        ptr[v] = _randint(state, off[v + 1] - off[v])
    informed = np.zeros(n, dtype=np.uint8)
    informed[origin] = 1
    count = 1
    for v in range(n):
        parent[v] = -1

    if sync == 0:
        t = 0
        cap_slots = cap_rounds * n
        while count < n and t < cap_slots:
            t += 1
            v = _randint(state, n)
            d = off[v + 1] - off[v]
            u = adj[off[v] + ptr[v]]
            ptr[v] = (ptr[v] + 1) % d
            if informed[v] and not informed[u]:
                informed[u] = 1
                parent[u] = v
                count += 1
        if count < n:
            return cap_rounds, cap_slots, 1
        return -(-t // n), t, 0

    newparent = np.empty(n, dtype=np.int32)
    rnd = 0
    while count < n and rnd < cap_rounds:
        rnd += 1
        for v in range(n):
            newparent[v] = -1
        # generation reads informed bits that only the apply phase mutates,
        # so this is the round-start snapshot
        for v in range(n):
            d = off[v + 1] - off[v]
            u = adj[off[v] + ptr[v]]
            ptr[v] = (ptr[v] + 1) % d
            if informed[v] and not informed[u]:
                if newparent[u] < 0 or v < newparent[u]:
                    newparent[u] = v
        for u in range(n):
            if newparent[u] >= 0 and not informed[u]:
                informed[u] = 1
                parent[u] = newparent[u]
                count += 1
    if count < n:
        return cap_rounds, cap_rounds * n, 1
    return rnd, rnd * n, 0


@njit(cache=True, nogil=True)
def tag_kernel(n, k, W, adj, off, placement, origin, oracle_parent, sync,
               seed, cap_rounds, finish, parent):
    """One tree-assisted gossip trial.

    Odd wakeups exchange the rumor over the round-robin schedule (both
    directions, lowest-id informer wins sync ties); even wakeups
    exchange coded messages with the parent. With oracle_parent[0] >= -1
    sentinel semantics: oracle_parent of length n preloads the tree and
    every node starts informed.

    Returns (rounds, timeslots, capped, tree_slot) with tree_slot in
    wakeup counts (-1 while incomplete).
    """
    rows = np.zeros((n, k, W), dtype=np.uint64)
    pivrow = np.full((n, k), -1, dtype=np.int32)
    pivmask = np.zeros((n, W), dtype=np.uint64)
    rank = np.zeros(n, dtype=np.int32)
    _init_bases(rows, pivrow, pivmask, rank, placement, k)

    state = np.empty(4, dtype=np.uint64)
    _seed_state(state, uint64(seed))
    ptr = np.empty(n, dtype=np.int32)
    for v in range(n):
        ptr[v] = _randint(state, off[v + 1] - off[v])

    informed = np.zeros(n, dtype=np.uint8)
    use_oracle = oracle_parent.shape[0] == n
    if use_oracle:
        for v in range(n):
            parent[v] = oracle_parent[v]
            informed[v] = 1
        informed_count = n
        tree_slot = 0
    else:
        for v in range(n):
            parent[v] = -1
        informed[origin] = 1
        informed_count = 1
        tree_slot = -1

    done = 0
    for v in range(n):
        finish[v] = -1
        if rank[v] == k:
            done += 1
            finish[v] = 0
    if done == n:
        return 0, 0, 0, tree_slot

    fwd = np.empty(W, dtype=np.uint64)
    rep = np.empty(W, dtype=np.uint64)

    if sync == 0:
        wk = np.zeros(n, dtype=np.int64)
        t = 0
        cap_slots = cap_rounds * n
        while done < n and t < cap_slots:
            t += 1
            v = _randint(state, n)
            wk[v] += 1
            if wk[v] & 1:
                d = off[v + 1] - off[v]
                u = adj[off[v] + ptr[v]]
                ptr[v] = (ptr[v] + 1) % d
                if informed[v] and not informed[u]:
                    informed[u] = 1
                    parent[u] = v
                    informed_count += 1
                elif informed[u] and not informed[v]:
                    informed[v] = 1
                    parent[v] = u
                    informed_count += 1
                if tree_slot < 0 and informed_count == n:
                    tree_slot = t
            else:
                p = parent[v]
                if p < 0:
                    continue
                has_fwd = rank[v] > 0
                has_rep = rank[p] > 0
                if has_fwd:
                    _sample(rows[v], rank[v], W, state, fwd)
                if has_rep:
                    _sample(rows[p], rank[p], W, state, rep)
                if has_fwd and rank[p] < k:
                    nr = _insert(rows[p], pivrow[p], pivmask[p], rank[p], W, fwd)
                    if nr == k:
                        done += 1
                        finish[p] = t
                    rank[p] = nr
                if has_rep and rank[v] < k:
                    nr = _insert(rows[v], pivrow[v], pivmask[v], rank[v], W, rep)
                    if nr == k:
                        done += 1
                        finish[v] = t
                    rank[v] = nr
        if done < n:
            return cap_rounds, cap_slots, 1, tree_slot
        tmax = 0
        for v in range(n):
            if finish[v] > tmax:
                tmax = finish[v]
        return -(-tmax // n), tmax, 0, tree_slot

    # sync: every node wakes each round, so phase parity is global
    msg = np.zeros((2 * n, W), dtype=np.uint64)
    msrc = np.empty(2 * n, dtype=np.int32)
    mdst = np.empty(2 * n, dtype=np.int32)
    newparent = np.empty(n, dtype=np.int32)
    rnd = 0
    while done < n and rnd < cap_rounds:
        rnd += 1
        if rnd & 1:
            for v in range(n):
                newparent[v] = -1
            for v in range(n):
                d = off[v + 1] - off[v]
                u = adj[off[v] + ptr[v]]
                ptr[v] = (ptr[v] + 1) % d
                if informed[v] and not informed[u]:
                    if newparent[u] < 0 or v < newparent[u]:
                        newparent[u] = v
                elif informed[u] and not informed[v]:
                    if newparent[v] < 0 or u < newparent[v]:
                        newparent[v] = u
            for u in range(n):
                if newparent[u] >= 0 and not informed[u]:
                    informed[u] = 1
                    parent[u] = newparent[u]
                    informed_count += 1
            if tree_slot < 0 and informed_count == n:
                tree_slot = rnd * n
        else:
            # tree edges carry at most one message per direction per
            # round, so the duplicate rule never triggers here
            nm = 0
            for v in range(n):
                p = parent[v]
                if p < 0:
                    continue
                if rank[v] > 0:
                    _sample(rows[v], rank[v], W, state, msg[nm])
                    msrc[nm] = v
                    mdst[nm] = p
                    nm += 1
                if rank[p] > 0:
                    _sample(rows[p], rank[p], W, state, msg[nm])
                    msrc[nm] = p
                    mdst[nm] = v
                    nm += 1
            for i in range(nm):
                r = mdst[i]
                if rank[r] == k:
                    continue
                nr = _insert(rows[r], pivrow[r], pivmask[r], rank[r], W, msg[i])
                if nr == k:
                    done += 1
                    finish[r] = rnd * n
                rank[r] = nr
    if done < n:
        return cap_rounds, cap_rounds * n, 1, tree_slot
    return rnd, rnd * n, 0, tree_slot


# --- python-side wrappers -------------------------------------------------


def adjacency_arrays(g: Topology):
    off = np.zeros(g.n + 1, dtype=np.int64)
    for v in range(g.n):
        off[v + 1] = off[v] + len(g.neighbors[v])
    adj = np.empty(off[-1], dtype=np.int64)
    for v in range(g.n):
        adj[off[v]:off[v + 1]] = g.neighbors[v]
    return adj, off


def _words(k):
    return (k + 63) >> 6


def uniform_ag_trial(g: Topology, k: int, time_model: str, action: str,
                     seed: int, placement=None, cap: int = 10 ** 6):
    """Fast-path uniform gossip trial.

    Returns (placement, rounds, timeslots, capped, finish_slots).
    """
    rng = random.Random(derive_seed(seed, "trial"))
    if placement is None:
        placement = rng.sample(range(g.n), k)
    adj, off = adjacency_arrays(g)
    finish = np.empty(g.n, dtype=np.int64)
    rounds, timeslots, capped = uniform_ag_kernel(
        g.n, k, _words(k), adj, off,
        np.asarray(placement, dtype=np.int64),
        1 if time_model == "sync" else 0,
        ACTION_CODE[action],
        U64(derive_seed(seed, "trial", "kernel")), cap, finish)
    return list(placement), rounds, timeslots, bool(capped), finish.tolist()


def brr_trial(g: Topology, origin: int | None, time_model: str, seed: int,
              cap: int = 10 ** 6):
    """Fast-path rumor broadcast trial.

    Returns (origin, rounds, timeslots, capped, parent list).
    """
    rng = random.Random(derive_seed(seed, "trial"))
    if origin is None:
        origin = rng.randrange(g.n)
    adj, off = adjacency_arrays(g)
    parent = np.empty(g.n, dtype=np.int32)
    rounds, timeslots, capped = brr_kernel(
        g.n, adj, off, origin, 1 if time_model == "sync" else 0,
        U64(derive_seed(seed, "trial", "kernel")), cap, parent)
    return origin, rounds, timeslots, bool(capped), parent.tolist()


def tag_trial(g: Topology, k: int, time_model: str, tree: str, seed: int,
              placement=None, cap: int = 10 ** 6):
    """Fast-path tree-assisted gossip trial.

    Returns (origin, placement, rounds, timeslots, capped, tree_slot,
    parent list, finish_slots).
    """
    rng = random.Random(derive_seed(seed, "trial"))
    origin = rng.randrange(g.n)
    if placement is None:
        placement = rng.sample(range(g.n), k)
    if tree == "oracle":
        oracle_parent = np.asarray(bfs_tree(g, origin).parent, dtype=np.int32)
    else:
        oracle_parent = np.empty(0, dtype=np.int32)
    adj, off = adjacency_arrays(g)
    finish = np.empty(g.n, dtype=np.int64)
    parent = np.empty(g.n, dtype=np.int32)
    rounds, timeslots, capped, tree_slot = tag_kernel(
        g.n, k, _words(k), adj, off,
        np.asarray(placement, dtype=np.int64), origin, oracle_parent,
        1 if time_model == "sync" else 0,
        U64(derive_seed(seed, "trial", "kernel")), cap, finish, parent)
    return (origin, list(placement), rounds, timeslots, bool(capped),
            int(tree_slot), parent.tolist(), finish.tolist())
