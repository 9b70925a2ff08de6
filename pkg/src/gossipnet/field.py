"""Finite-field arithmetic and rank-tracking equation stores for coded gossip.

Supports GF(q) for q in {2, 4, 16, 256}. Elements are ints in [0, q).
For q = 2^m with m > 1 the representation is polynomial: bit i of the
int is the coefficient of x^i, and multiplication uses log/antilog
tables built from a fixed primitive polynomial.

A node's knowledge is an EquationBasis: an immutable reduced
row-echelon basis of the span of everything the node has received.
Insertion is incremental (reduce the incoming row, then eliminate its
pivot from the stored rows), so the basis is always in RREF with pivot
columns strictly increasing. GF(2) rows are stored as packed bit
vectors; wider fields store coefficient tuples.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

SUPPORTED_Q = (2, 4, 16, 256)

# primitive polynomials, bit i = coefficient of x^i
_POLY = {4: 0b111, 16: 0b10011, 256: 0x11D}


class Field:
    """GF(q) arithmetic on int-encoded elements."""

    def __init__(self, q: int):
        if q not in SUPPORTED_Q:
            raise ValueError(f"unsupported field size {q}; expected one of {SUPPORTED_Q}")
        self.q = q
        if q > 2:
            self._exp, self._log = self._build_tables(q, _POLY[q])

    @staticmethod
    def _build_tables(q, poly):
        m = q.bit_length() - 1
        exp = [0] * (q - 1)
        log = [0] * q
        x = 1
        for i in range(q - 1):
            exp[i] = x
            log[x] = i
            # multiply by the generator x
            x <<= 1
            if x >> m & 1:
                x ^= poly
        return exp, log

    def add(self, a: int, b: int) -> int:
        return a ^ b

    # characteristic 2: subtraction is addition
    sub = add

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.q == 2:
            return 1
        return self._exp[(self._log[a] + self._log[b]) % (self.q - 1)]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("no inverse of 0")
        if self.q == 2:
            return 1
        return self._exp[(self.q - 1 - self._log[a]) % (self.q - 1)]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def random_element(self, rng: random.Random) -> int:
        return rng.randrange(self.q)

    def __repr__(self):
        return f"Field(q={self.q})"

    def __eq__(self, other):
        return isinstance(other, Field) and other.q == self.q

    def __hash__(self):
        return hash(("Field", self.q))


@dataclass(frozen=True)
class CodedMessage:
    """A linear equation: coefficient vector plus optional payload vector.

    Both vectors hold elements of the same field. coeffs has length k;
    payload, when present, is the matching combination of the original
    message payloads.
    """

    coeffs: tuple[int, ...]
    payload: tuple[int, ...] | None = None

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)


def unit_message(field: Field, k: int, index: int,
                 payload: tuple[int, ...] | None = None) -> CodedMessage:
    """The i-th original equation: coefficient vector e_i."""
    if not 0 <= index < k:
        raise ValueError(f"index {index} out of range for k={k}")
    coeffs = tuple(1 if j == index else 0 for j in range(k))
    return CodedMessage(coeffs, payload)


def _pack_bits(vec):
    bits = 0
    for i, c in enumerate(vec):
        if c:
            bits |= 1 << i
    return bits


def _unpack_bits(bits, length):
    return tuple(bits >> i & 1 for i in range(length))


class EquationBasis:
    """Immutable RREF basis over GF(q) with k coefficient columns.

    Rows are kept sorted by pivot column. Internal row storage is
    (bits, payload_bits) ints for q=2 and (coeffs, payload) tuples
    otherwise; the rows property presents CodedMessage values either way.
    """

    __slots__ = ("field", "k", "payload_len", "_rows", "_pivots")

    def __init__(self, field: Field, k: int, payload_len: int | None = None,
                 _rows=(), _pivots=()):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.field = field
        self.k = k
        self.payload_len = payload_len
        self._rows = _rows
        self._pivots = _pivots

    @property
    def rank(self) -> int:
        return len(self._rows)

    @property
    def complete(self) -> bool:
        return len(self._rows) == self.k

    @property
    def pivots(self) -> tuple[int, ...]:
        return self._pivots

    @property
    def rows(self) -> tuple[CodedMessage, ...]:
        if self.field.q == 2:
            return tuple(
                CodedMessage(
                    _unpack_bits(bits, self.k),
                    None if pay is None else _unpack_bits(pay, self.payload_len),
                )
                for bits, pay in self._rows
            )
        return tuple(CodedMessage(c, p) for c, p in self._rows)

    def __repr__(self):
        return f"EquationBasis(q={self.field.q}, k={self.k}, rank={self.rank})"


def _validate(basis: EquationBasis, msg: CodedMessage):
    if len(msg.coeffs) != basis.k:
        raise ValueError(f"coefficient length {len(msg.coeffs)} != k={basis.k}")
    q = basis.field.q
    if any(not 0 <= c < q for c in msg.coeffs):
        raise ValueError("coefficient out of field range")
    has_pay = msg.payload is not None
    if basis.rank == 0:
        if has_pay and basis.payload_len is not None and len(msg.payload) != basis.payload_len:
            raise ValueError("payload length mismatch")
    else:
        if has_pay != (basis.payload_len is not None):
            raise ValueError("payload mode mismatch with existing rows")
        if has_pay and len(msg.payload) != basis.payload_len:
            raise ValueError("payload length mismatch")


def try_insert(basis: EquationBasis, msg: CodedMessage) -> tuple[EquationBasis, bool]:
    """Insert a message into a basis; returns (new_basis, helpful).

    helpful is True iff the message increased the rank, i.e. it was
    linearly independent of the stored rows. The input basis is never
    mutated. A zero (or dependent) message returns the basis unchanged.
    """
    _validate(basis, msg)
    if basis.field.q == 2:
        return _try_insert_gf2(basis, msg)
    return _try_insert_wide(basis, msg)


def _try_insert_gf2(basis, msg):
    bits = _pack_bits(msg.coeffs)
    pay = None if msg.payload is None else _pack_bits(msg.payload)
    # a row's pivot bit is zero in every other stored row, so one pass reduces fully
    for (rbits, rpay), piv in zip(basis._rows, basis._pivots):
        if bits >> piv & 1:
            bits ^= rbits
            if pay is not None:
                pay ^= rpay
    if bits == 0:
        return basis, False
    piv = (bits & -bits).bit_length() - 1
    new_rows = []
    new_pivots = []
    inserted = False
    for (rbits, rpay), rpiv in zip(basis._rows, basis._pivots):
        if rbits >> piv & 1:
            rbits ^= bits
            if pay is not None:
                rpay ^= pay
        if not inserted and rpiv > piv:
            new_rows.append((bits, pay))
            new_pivots.append(piv)
            inserted = True
        new_rows.append((rbits, rpay))
        new_pivots.append(rpiv)
    if not inserted:
        new_rows.append((bits, pay))
        new_pivots.append(piv)
    payload_len = basis.payload_len
    if payload_len is None and msg.payload is not None:
        payload_len = len(msg.payload)
    return (
        EquationBasis(basis.field, basis.k, payload_len,
                      tuple(new_rows), tuple(new_pivots)),
        True,
    )


def _try_insert_wide(basis, msg):
    f = basis.field
    coeffs = list(msg.coeffs)
    pay = None if msg.payload is None else list(msg.payload)

    def addmul(dst, src, c):
        for i, s in enumerate(src):
            if s:
                dst[i] ^= f.mul(c, s)

    for (rcoeffs, rpay), piv in zip(basis._rows, basis._pivots):
        c = coeffs[piv]
        if c:
            addmul(coeffs, rcoeffs, c)
            if pay is not None:
                addmul(pay, rpay, c)
    piv = next((i for i, c in enumerate(coeffs) if c), -1)
    if piv < 0:
        return basis, False
    # normalize so the leading coefficient is 1
    lead_inv = f.inv(coeffs[piv])
    if lead_inv != 1:
        coeffs = [f.mul(lead_inv, c) for c in coeffs]
        if pay is not None:
            pay = [f.mul(lead_inv, c) for c in pay]
    new_row = (tuple(coeffs), None if pay is None else tuple(pay))
    new_rows = []
    new_pivots = []
    inserted = False
    for (rcoeffs, rpay), rpiv in zip(basis._rows, basis._pivots):
        c = rcoeffs[piv]
        if c:
            rc = list(rcoeffs)
            addmul(rc, coeffs, c)
            rcoeffs = tuple(rc)
            if rpay is not None:
                rp = list(rpay)
                addmul(rp, pay, c)
                rpay = tuple(rp)
        if not inserted and rpiv > piv:
            new_rows.append(new_row)
            new_pivots.append(piv)
            inserted = True
        new_rows.append((rcoeffs, rpay))
        new_pivots.append(rpiv)
    if not inserted:
        new_rows.append(new_row)
        new_pivots.append(piv)
    payload_len = basis.payload_len
    if payload_len is None and msg.payload is not None:
        payload_len = len(msg.payload)
    return (
        EquationBasis(basis.field, basis.k, payload_len,
                      tuple(new_rows), tuple(new_pivots)),
        True,
    )


def random_combination(basis: EquationBasis, rng: random.Random) -> CodedMessage:
    """Uniform random linear combination of the stored rows.

    Coefficients are drawn independently and uniformly from the field,
    so the result is uniform over the span (the zero message has
    probability q^-rank). Requires rank >= 1: empty nodes do not
    transmit.
    """
    if basis.rank == 0:
        raise ValueError("cannot combine an empty basis")
    if basis.field.q == 2:
        mask = rng.getrandbits(basis.rank)
        bits = 0
        pay = 0 if basis.payload_len is not None else None
        for i, (rbits, rpay) in enumerate(basis._rows):
            if mask >> i & 1:
                bits ^= rbits
                if pay is not None:
                    pay ^= rpay
        return CodedMessage(
            _unpack_bits(bits, basis.k),
            None if pay is None else _unpack_bits(pay, basis.payload_len),
        )
    f = basis.field
    coeffs = [0] * basis.k
    pay = [0] * basis.payload_len if basis.payload_len is not None else None
    for rcoeffs, rpay in basis._rows:
        c = rng.randrange(f.q)
        if c:
            for i, s in enumerate(rcoeffs):
                if s:
                    coeffs[i] ^= f.mul(c, s)
            if pay is not None:
                for i, s in enumerate(rpay):
                    if s:
                        pay[i] ^= f.mul(c, s)
    return CodedMessage(tuple(coeffs), None if pay is None else tuple(pay))


def decode(basis: EquationBasis) -> list[tuple[int, ...]]:
    """Recover the k original payload vectors from a complete basis.

    A complete RREF basis on k columns is the identity matrix, so row i
    carries exactly the payload of original message i.
    """
    if not basis.complete:
        raise ValueError(f"cannot decode at rank {basis.rank} < k={basis.k}")
    if basis.payload_len is None:
        raise ValueError("basis carries no payloads")
    out = []
    for i, row in enumerate(basis.rows):
        expected = tuple(1 if j == i else 0 for j in range(basis.k))
        if row.coeffs != expected:
            raise AssertionError("complete basis is not the identity; RREF invariant broken")
        out.append(row.payload)
    return out
