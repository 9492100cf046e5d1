"""Combinatorial and q-arithmetic primitives shared by the whole library.

Everything here is exact integer/float bookkeeping: Weyl chamber vectors
with their cluster decomposition, integer partitions, q-Pochhammer symbols
and q-factorials, the cluster weight C_q, and string specializations of
spectral variables.  All functions are pure and all containers immutable,
so concurrent use is safe.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence


class InfiniteGap:
    """Sentinel for the leading gap of a cluster decomposition.

    A dedicated object (not a large integer, not ``math.inf``) so that any
    accidental arithmetic on it fails loudly.  It compares greater than
    every real number, which is the only operation gap consumers need.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF_GAP"

    def __gt__(self, other):
        if isinstance(other, InfiniteGap):
            return False
        return True

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return isinstance(other, InfiniteGap)

    def __eq__(self, other):
        return isinstance(other, InfiniteGap)

    def __hash__(self):
        return hash("INF_GAP")


INF_GAP = InfiniteGap()


def check_q(q: float) -> float:
    """Validate the deformation parameter, 0 < q < 1."""
    q = float(q)
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in the open interval (0, 1), got {q}")
    return q


@dataclass(frozen=True)
class QParam:
    """A validated deformation parameter q in (0, 1)."""

    q: float

    def __post_init__(self):
        check_q(self.q)


@dataclass(frozen=True)
class WeylVector:
    """Ordered integer vector n_1 >= ... >= n_k, the state of k particles."""

    coords: tuple[int, ...]

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)
        if len(coords) < 1:
            raise ValueError("WeylVector needs at least one coordinate")
        for a, b in zip(coords, coords[1:]):
            if a < b:
                raise ValueError(f"coordinates must be weakly decreasing: {coords}")

    @property
    def k(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def total(self) -> int:
        return sum(self.coords)

    def bump(self, i: int, delta: int) -> "WeylVector":
        """Return the vector with coordinate ``i`` (0-based) shifted by delta."""
        c = list(self.coords)
        c[i] += delta
        return WeylVector(tuple(c))

    def bump_range(self, a: int, b: int, delta: int) -> "WeylVector":
        """Shift coordinates a..b inclusive (0-based) by delta."""
        c = list(self.coords)
        for i in range(a, b + 1):
            c[i] += delta
        return WeylVector(tuple(c))

    def shift(self, delta: int) -> "WeylVector":
        return WeylVector(tuple(c + delta for c in self.coords))

    def reflect(self) -> "WeylVector":
        """(n_1, ..., n_k) -> (-n_k, ..., -n_1)."""
        return WeylVector(tuple(-c for c in reversed(self.coords)))


@dataclass(frozen=True)
class ClusterData:
    """Run-length data of a WeylVector: sizes c_i, gaps g_i (g_1 infinite)."""

    sizes: tuple[int, ...]
    gaps: tuple

    def __post_init__(self):
        if len(self.sizes) != len(self.gaps):
            raise ValueError("sizes and gaps must have equal length")
        if not isinstance(self.gaps[0], InfiniteGap):
            raise ValueError("the first gap must be the INF_GAP sentinel")
        for g in self.gaps[1:]:
            if isinstance(g, InfiniteGap) or g < 1:
                raise ValueError("interior gaps must be integers >= 1")

    @property
    def count(self) -> int:
        return len(self.sizes)

    @property
    def k(self) -> int:
        return sum(self.sizes)

    def boundaries(self) -> tuple[int, ...]:
        """Cumulative sizes c_1 + ... + c_i for i = 1..M."""
        out, acc = [], 0
        for c in self.sizes:
            acc += c
            out.append(acc)
        return tuple(out)


@functools.lru_cache(maxsize=65536)
def cluster_decompose(n: WeylVector) -> ClusterData:
    """Split a WeylVector into clusters of equal coordinates and their gaps."""
    sizes = []
    gaps: list = [INF_GAP]
    run = 1
    for prev, cur in zip(n.coords, n.coords[1:]):
        if cur == prev:
            run += 1
        else:
            sizes.append(run)
            gaps.append(prev - cur)
            run = 1
    sizes.append(run)
    return ClusterData(tuple(sizes), tuple(gaps))


def reconstruct_weyl(cd: ClusterData, top: int) -> WeylVector:
    """Rebuild the WeylVector with leading value ``top`` from cluster data."""
    coords = []
    value = top
    for i, c in enumerate(cd.sizes):
        if i > 0:
            value -= cd.gaps[i]
        coords.extend([value] * c)
    return WeylVector(tuple(coords))


@dataclass(frozen=True)
class Partition:
    """Integer partition: weakly decreasing positive parts."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        for p in parts:
            if p < 1:
                raise ValueError("partition parts must be positive")
        for a, b in zip(parts, parts[1:]):
            if a < b:
                raise ValueError("partition parts must be weakly decreasing")

    @property
    def size(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def multiplicity(self, i: int) -> int:
        return sum(1 for p in self.parts if p == i)

    def multiplicities(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for p in self.parts:
            out[p] = out.get(p, 0) + 1
        return out

    def __iter__(self):
        return iter(self.parts)


@functools.lru_cache(maxsize=128)
def partitions_of(k: int) -> tuple[Partition, ...]:
    """All partitions of k in reverse-lexicographic order, e.g. (3),(2,1),(1,1,1).

    The order is fixed so that every sum over partitions is reproducible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")

    out: list[Partition] = []

    def rec(remaining: int, cap: int, prefix: list[int]):
        if remaining == 0:
            out.append(Partition(tuple(prefix)))
            return
        for part in range(min(cap, remaining), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix)
            prefix.pop()

    rec(k, k, [])
    return tuple(out)


def q_pochhammer(a: complex, q: float, n: int) -> complex:
    """(a; q)_n = prod_{i=0}^{n-1} (1 - q^i a).  Empty product for n = 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = 1.0 + 0.0j
    qi = 1.0
    for _ in range(n):
        out *= 1.0 - qi * a
        qi *= q
    if isinstance(a, complex):
        return out
    return complex(out).real if out.imag == 0.0 else out


def q_factorial(c: int, q: float) -> float:
    """c!_q = prod_{j=1}^{c} (1 - q^j) / (1 - q)."""
    if c < 0:
        raise ValueError("c must be >= 0")
    check_q(q)
    out = 1.0
    qj = 1.0
    for _ in range(c):
        qj *= q
        out *= (1.0 - qj) / (1.0 - q)
    return out


def cq_weight(n: WeylVector, q: float) -> float:
    """Cluster weight C_q(n) = (-1)^k q^{-k(k-1)/2} prod_i (c_i)!_q.

    Computed in log magnitude plus sign: the q^{-k(k-1)/2} factor overflows
    doubles near k ~ 40, and the log route keeps k <= 12 (our documented
    validity range) comfortably exact.
    """
    check_q(q)
    k = n.k
    cd = cluster_decompose(n)
    sign = -1.0 if k % 2 else 1.0
    logmag = -0.5 * k * (k - 1) * math.log(q)
    for c in cd.sizes:
        logmag += math.log(q_factorial(c, q))
    return sign * math.exp(logmag)


def cq_weight_inv(n: WeylVector, q: float) -> float:
    """Reciprocal of the cluster weight, 1 / C_q(n)."""
    check_q(q)
    k = n.k
    cd = cluster_decompose(n)
    sign = -1.0 if k % 2 else 1.0
    logmag = -0.5 * k * (k - 1) * math.log(q)
    for c in cd.sizes:
        logmag += math.log(q_factorial(c, q))
    return sign * math.exp(-logmag)


def factorial_cluster_weight(n: WeylVector) -> float:
    """Plain-factorial cluster weight (-1)^k prod_i (c_i)!, the q -> 1 analogue of C_q."""
    k = n.k
    cd = cluster_decompose(n)
    out = -1.0 if k % 2 else 1.0
    for c in cd.sizes:
        out *= math.factorial(c)
    return out


def string_points(
    w: Sequence[complex],
    lam: Partition,
    q: float | None = None,
    mode: str = "geometric",
    validate: bool = True,
) -> tuple[complex, ...]:
    """Expand base points w_j into strings of length lambda_j.

    geometric: (w_1, q w_1, ..., q^{lam_1 - 1} w_1, w_2, ...)
    additive:  (w_1, w_1 + 1, ..., w_1 + lam_1 - 1, w_2, ...)
    """
    if len(w) != lam.length:
        raise ValueError("need one base point per partition part")
    out: list[complex] = []
    if mode == "geometric":
        if q is None:
            raise ValueError("geometric strings need q")
        check_q(q)
        for wj, lj in zip(w, lam.parts):
            if wj == 0:
                raise ValueError("geometric string base points must be nonzero")
            val = complex(wj)
            for _ in range(lj):
                out.append(val)
                val *= q
    elif mode == "additive":
        for wj, lj in zip(w, lam.parts):
            val = complex(wj)
            for _ in range(lj):
                out.append(val)
                val += 1.0
    else:
        raise ValueError(f"unknown string mode {mode!r}")
    if validate:
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                if abs(out[i] - out[j]) < 1e-12 * max(1.0, abs(out[i])):
                    raise ValueError(
                        "string values coincide; base points must be distinct, "
                        "nonzero and off each other's orbits"
                    )
    return tuple(out)


def weyl_vectors_in_box(k: int, lo: int, hi: int) -> Iterator[WeylVector]:
    """All n in W^k with lo <= n_k and n_1 <= hi, in lexicographic order."""
    if hi < lo:
        return

    def rec(prefix: list[int], cap: int):
        if len(prefix) == k:
            yield WeylVector(tuple(prefix))
            return
        for v in range(lo, cap + 1):
            prefix.append(v)
            yield from rec(prefix, v)
            prefix.pop()

    yield from rec([], hi)


class CompactFn:
    """Finitely supported complex function on the Weyl chamber W^k.

    Lookups outside the stored support return 0.  Instances are immutable
    once built; build from a dict or from (vector, value) pairs.
    """

    __slots__ = ("_data", "_k")

    def __init__(self, data: Mapping[WeylVector, complex] | Iterable):
        if isinstance(data, Mapping):
            items = data.items()
        else:
            items = data
        store: dict[WeylVector, complex] = {}
        k = None
        for n, v in items:
            if not isinstance(n, WeylVector):
                n = WeylVector(tuple(n))
            if k is None:
                k = n.k
            elif n.k != k:
                raise ValueError("all support points must share the same k")
            v = complex(v)
            if v != 0:
                store[n] = v
        if k is None:
            raise ValueError("CompactFn needs at least one support point (use a zero value for the empty function)")
        self._data = store
        self._k = k

    @classmethod
    def delta(cls, n) -> "CompactFn":
        if not isinstance(n, WeylVector):
            n = WeylVector(tuple(n))
        return cls({n: 1.0})

    @classmethod
    def zero(cls, k: int) -> "CompactFn":
        obj = cls.__new__(cls)
        obj._data = {}
        obj._k = k
        return obj

    @property
    def k(self) -> int:
        return self._k

    def __call__(self, n: WeylVector) -> complex:
        if not isinstance(n, WeylVector):
            n = WeylVector(tuple(n))
        return self._data.get(n, 0.0 + 0.0j)

    def support(self) -> tuple[WeylVector, ...]:
        return tuple(self._data.keys())

    def items(self):
        return self._data.items()

    def __len__(self):
        return len(self._data)

    def map_values(self, fn: Callable[[WeylVector, complex], complex]) -> "CompactFn":
        obj = CompactFn.zero(self._k)
        obj._data = {n: fn(n, v) for n, v in self._data.items() if fn(n, v) != 0}
        return obj

    def __repr__(self):
        return f"CompactFn(k={self._k}, support={len(self._data)})"
