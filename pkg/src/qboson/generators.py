"""Generators of the q-Boson system and its deformations.

Provides pointwise application of the backward / forward / conjugated
forward generators and their free (separable) counterparts with two-body
boundary residuals, finite matrix representations on truncated state
boxes, and a uniformization oracle for exact finite-time transition
kernels of the stochastic (q-Boson forward) family.

Matrix convention: entry (i, j) is the coefficient of f(state_j) in
(A f)(state_i), i.e. columns are sources.  For the stochastic forward
generator, entry (x, y) is the jump rate y -> x and interior columns sum
to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from qboson.qcore import (
    WeylVector,
    check_q,
    cluster_decompose,
    cq_weight,
    factorial_cluster_weight,
    weyl_vectors_in_box,
)

GENERATOR_KINDS = ("bwd", "fwd", "cfwd", "free-bwd", "free-fwd")
MODELS = ("qboson", "eps", "sd")


class DomainMarginError(KeyError):
    """A table-backed function was queried outside its stored domain."""


@dataclass(frozen=True)
class GeneratorKind:
    kind: str
    model: str = "qboson"
    q: float = 0.5
    eps: float = 1.0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        check_q(self.q)

    def cluster_weight(self, n: WeylVector) -> float:
        if self.model == "sd":
            return factorial_cluster_weight(n)
        return cq_weight(n, self.q)


def table_fn(table: Mapping[tuple, complex]) -> Callable:
    """Wrap a finite table {coords: value} into a callable raising on misses."""

    def fn(coords) -> complex:
        key = tuple(coords)
        if key not in table:
            raise DomainMarginError(f"point {key} outside the table's domain")
        return table[key]

    return fn


def generator_apply(gk: GeneratorKind, f: Callable, n: WeylVector) -> complex:
    """Apply the interacting generator at n; f maps WeylVector -> complex."""
    q, eps = gk.q, gk.eps
    cd = cluster_decompose(n)
    bounds = cd.boundaries()
    out = 0.0 + 0.0j

    if gk.kind == "bwd":
        diag = eps if gk.model == "eps" else 1.0
        for i, c in enumerate(cd.sizes):
            tail = bounds[i] - 1  # 0-based index of the last particle of cluster i
            if gk.model == "sd":
                out += c * (f(n.bump(tail, -1)) - f(n)) + 0.5 * c * (c - 1) * f(n)
            else:
                out += (1.0 - q**c) * (f(n.bump(tail, -1)) - diag * f(n))
        return out

    if gk.kind == "cfwd":
        diag = eps if gk.model == "eps" else 1.0
        for i, c in enumerate(cd.sizes):
            head = bounds[i] - c  # 0-based index of the first particle of cluster i
            if gk.model == "sd":
                out += c * (f(n.bump(head, +1)) - f(n)) + 0.5 * c * (c - 1) * f(n)
            else:
                out += (1.0 - q**c) * (f(n.bump(head, +1)) - diag * f(n))
        return out

    if gk.kind == "fwd":
        diag = eps if gk.model == "eps" else 1.0
        for i, c in enumerate(cd.sizes):
            head = bounds[i] - c
            merge = cd.gaps[i] == 1  # INF_GAP compares unequal to any int
            if gk.model == "sd":
                rate_in = (cd.sizes[i - 1] + 1.0) if merge else 1.0
                out += rate_in * f(n.bump(head, +1)) - c * f(n) + 0.5 * c * (c - 1) * f(n)
            else:
                c_prev = cd.sizes[i - 1] if i > 0 else 0
                rate_in = (1.0 - q ** (c_prev + 1)) if merge else (1.0 - q)
                out += rate_in * f(n.bump(head, +1)) - diag * (1.0 - q**c) * f(n)
        return out

    raise ValueError(f"{gk.kind} is a free kind; use free_apply")


def _grad_bwd(u: Callable, coords: tuple, i: int, eps: float) -> complex:
    lowered = coords[:i] + (coords[i] - 1,) + coords[i + 1 :]
    return u(lowered) - eps * u(coords)


def _grad_fwd(u: Callable, coords: tuple, i: int, eps: float) -> complex:
    raised = coords[:i] + (coords[i] + 1,) + coords[i + 1 :]
    return u(raised) - eps * u(coords)


def free_apply(gk: GeneratorKind, u: Callable, n) -> complex:
    """Apply the separable free generator at an integer vector n in Z^k.

    ``u`` is a function on Z^k (tuple argument); use :func:`table_fn` to
    wrap finite tables, which raise :class:`DomainMarginError` when the
    one-step stencil leaves the table.
    """
    coords = tuple(n.coords) if isinstance(n, WeylVector) else tuple(n)
    k = len(coords)
    eps = gk.eps if gk.model == "eps" else 1.0
    scale = 1.0 if gk.model == "sd" else (1.0 - gk.q)
    grad = _grad_bwd if gk.kind == "free-bwd" else _grad_fwd
    if gk.kind not in ("free-bwd", "free-fwd"):
        raise ValueError(f"{gk.kind} is an interacting kind; use generator_apply")
    return scale * sum(grad(u, coords, i, eps) for i in range(k))


def boundary_residual(gk: GeneratorKind, u: Callable, i: int, n) -> complex:
    """Two-body boundary residual at coordinate pair (i, i+1), 0-based i.

    Backward forms: (grad_i - q grad_{i+1}) u for the q-Boson and eps
    families, (grad_i - grad_{i+1} - 1) u for the semi-discrete one.
    Forward forms: (q grad_i - grad_{i+1}) u, resp. (1 + grad_i - grad_{i+1}) u.
    Evaluated on the diagonal n_i = n_{i+1}.
    """
    coords = tuple(n.coords) if isinstance(n, WeylVector) else tuple(n)
    if coords[i] != coords[i + 1]:
        raise ValueError("boundary residual is defined on the diagonal n_i = n_{i+1}")
    q = gk.q
    eps = gk.eps if gk.model == "eps" else 1.0
    if gk.kind == "free-bwd":
        gi = _grad_bwd(u, coords, i, eps)
        gi1 = _grad_bwd(u, coords, i + 1, eps)
        if gk.model == "sd":
            return gi - gi1 - u(coords)
        return gi - q * gi1
    if gk.kind == "free-fwd":
        gi = _grad_fwd(u, coords, i, eps)
        gi1 = _grad_fwd(u, coords, i + 1, eps)
        if gk.model == "sd":
            return u(coords) + gi - gi1
        return q * gi - gi1
    raise ValueError("boundary residuals are defined for the free kinds")


def extended_apply(f: Callable, n, q: float) -> complex:
    """Apply the whole-lattice operator to a symmetric function on Z^k.

    (1-q) [ sum_i grad^bwd_i
            + (1 - q^{-1}) sum_{i<j} 1_{n_i = n_j} q^{j-i} grad^bwd_i ] f(n)

    On symmetric extensions of the left eigenfunctions this reproduces the
    interacting backward generator at every (possibly unordered) n.
    """
    check_q(q)
    coords = tuple(n.coords) if isinstance(n, WeylVector) else tuple(n)
    k = len(coords)
    grads = [_grad_bwd(f, coords, i, 1.0) for i in range(k)]
    out = sum(grads)
    for i in range(k):
        for j in range(i + 1, k):
            if coords[i] == coords[j]:
                out += (1.0 - 1.0 / q) * q ** (j - i) * grads[i]
    return (1.0 - q) * out


@dataclass(frozen=True)
class StateBox:
    """The finite set {n in W^k : lo <= n_k, n_1 <= hi}, lexicographically ordered."""

    k: int
    lo: int
    hi: int
    absorbing: bool = False

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError("need lo <= hi")

    @property
    def states(self) -> tuple[WeylVector, ...]:
        return self._states()

    def _states(self):
        if not hasattr(self, "_cached"):
            object.__setattr__(self, "_cached", tuple(weyl_vectors_in_box(self.k, self.lo, self.hi)))
        return getattr(self, "_cached")

    @property
    def size(self) -> int:
        return len(self._states())

    def index(self) -> dict[WeylVector, int]:
        if not hasattr(self, "_index"):
            object.__setattr__(self, "_index", {n: i for i, n in enumerate(self._states())})
        return getattr(self, "_index")


@dataclass
class RateMatrix:
    """Sparse generator matrix over a StateBox (columns = source states).

    ``absorbing_row`` holds, per column, the net rate leaking out of the
    box; it is only populated for stochastic kinds on absorbing boxes so
    truncation error is observable rather than silently lost.
    """

    matrix: sp.csr_matrix
    box: StateBox
    kind: GeneratorKind
    absorbing_row: np.ndarray | None = None

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def export_triplets(self, path: str) -> None:
        """Write (row, col, value) lines for debugging."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write("# row col value\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {complex(v)!r}\n")


def matrix_on_box(gk: GeneratorKind, box: StateBox) -> RateMatrix:
    """Realize generator_apply restricted to the box as a sparse matrix."""
    states = box.states
    idx = box.index()
    rows, cols, vals = [], [], []
    for j, src in enumerate(states):
        # Column j: coefficients of (A e_src)(target) for targets in the box.
        def e_src(m, _src=src):
            return 1.0 if m == _src else 0.0

        # Collect targets cheaply: A e_src is supported on src and its one-step
        # neighbours inside the chamber.
        targets = {src}
        for i in range(box.k):
            for d in (-1, +1):
                try:
                    targets.add(src.bump(i, d))
                except ValueError:
                    pass
        for tgt in targets:
            if tgt not in idx:
                continue
            v = generator_apply(gk, e_src, tgt)
            if v != 0:
                rows.append(idx[tgt])
                cols.append(j)
                vals.append(complex(v))
    m = sp.csr_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(box.size, box.size)
    )
    if np.allclose(m.toarray().imag, 0.0):
        m = sp.csr_matrix(m.real)
    absorbing_row = None
    if box.absorbing:
        absorbing_row = -np.asarray(m.sum(axis=0)).ravel()
    return RateMatrix(matrix=m, box=box, kind=gk, absorbing_row=absorbing_row)


def reflection_permutation(box: StateBox) -> np.ndarray:
    """Permutation p with p[i] = index of the reflected i-th state.

    Requires a reflection-closed box (lo = -hi).
    """
    if box.lo != -box.hi:
        raise ValueError("reflection needs a symmetric box lo = -hi")
    idx = box.index()
    return np.array([idx[n.reflect()] for n in box.states], dtype=int)


def cluster_weight_diagonal(gk: GeneratorKind, box: StateBox) -> np.ndarray:
    return np.array([gk.cluster_weight(n) for n in box.states], dtype=float)


@dataclass
class TransitionPMF:
    """Finite-time transition probabilities out of one state, plus leakage."""

    probs: dict[WeylVector, float]
    absorbed: float
    tail_bound: float

    def total(self) -> float:
        return sum(self.probs.values())

    def __getitem__(self, n) -> float:
        if not isinstance(n, WeylVector):
            n = WeylVector(tuple(n))
        return self.probs.get(n, 0.0)


def poisson_terms_needed(rate: float, tol: float) -> int:
    """Smallest J whose Chernoff bound on the Poisson(rate) tail is below tol.

    For J > rate the bound is P(X > J) <= exp(J - rate + J log(rate / J)).
    """
    if rate == 0.0:
        return 0
    J = max(1, int(math.ceil(rate)))
    while J < 10_000_000:
        log_bound = J - rate + J * math.log(rate / J) if J > rate else 0.0
        if J > rate and log_bound < math.log(tol):
            return J
        J += 1 + J // 8
    raise RuntimeError("Poisson truncation did not converge")


def uniformized_transition(
    gk: GeneratorKind, t: float, y: WeylVector, box: StateBox, tol: float = 1e-12
) -> TransitionPMF:
    """Exact e^{tA} delta_y for the stochastic q-Boson forward generator.

    Uniformization with rate Lambda = k (the total jump rate of any state
    is sum_i (1 - q^{c_i}) <= M <= k), truncating the Poisson series when
    the exact tail drops below tol.  Mass exiting the box accumulates in
    an absorbing pseudo-state.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if gk.kind != "fwd" or gk.model != "qboson":
        raise ValueError("uniformization applies to the stochastic q-Boson forward generator")
    if tol <= 0:
        raise ValueError("tol must be positive")
    abox = StateBox(box.k, box.lo, box.hi, absorbing=True)
    rm = matrix_on_box(gk, abox)
    size = abox.size
    idx = abox.index()
    if y not in idx:
        raise ValueError("initial state must lie in the box")
    lam = float(box.k)
    # P = I + A / Lambda on the box extended by one absorbing state.
    P = sp.lil_matrix((size + 1, size + 1))
    P[:size, :size] = sp.identity(size) + rm.matrix / lam
    P[size, :size] = rm.absorbing_row / lam
    P[size, size] = 1.0
    P = P.tocsr()

    if t == 0.0:
        return TransitionPMF({y: 1.0}, 0.0, 0.0)

    J = poisson_terms_needed(lam * t, tol)
    v = np.zeros(size + 1)
    v[idx[y]] = 1.0
    weight = math.exp(-lam * t)
    acc = weight * v
    used = weight
    for j in range(1, J + 1):
        v = P @ v
        weight *= lam * t / j
        acc += weight * v
        used += weight
    tail = 1.0 - used
    probs = {n: float(acc[i]) for n, i in idx.items() if acc[i] > 0.0}
    return TransitionPMF(probs=probs, absorbed=float(acc[size]), tail_bound=float(tail))


def dense_exponential_transition(
    gk: GeneratorKind, t: float, y: WeylVector, box: StateBox
) -> TransitionPMF:
    """Scaling-and-squaring matrix-exponential oracle for small boxes."""
    abox = StateBox(box.k, box.lo, box.hi, absorbing=True)
    rm = matrix_on_box(gk, abox)
    size = abox.size
    A = np.zeros((size + 1, size + 1))
    A[:size, :size] = rm.matrix.toarray().real
    A[size, :size] = rm.absorbing_row
    E = expm(t * A)
    idx = abox.index()
    col = E[:, idx[y]]
    probs = {n: float(col[i]) for n, i in idx.items()}
    return TransitionPMF(probs=probs, absorbed=float(col[size]), tail_bound=0.0)
