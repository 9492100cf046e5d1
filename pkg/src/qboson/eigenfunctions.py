"""Bethe-ansatz eigenfunctions for the q-Boson system and its degenerations.

Each eigenfunction is a sum over S_k of a product of two-body scattering
factors and one-particle plane waves.  Three model families share the same
skeleton and differ only in the one-particle factor and the scattering
shift:

    q-Boson       base 1 - z,   scattering z_A - q^{+-1} z_B
    eps-deformed  base eps - z, scattering z_A - q^{+-1} z_B
    semi-discrete base z,       scattering z_A - z_B -+ 1

The ``left`` member uses negative powers of the base, ``cfwd`` positive
powers, and ``right`` is ``cfwd`` divided by the cluster weight of n.

Evaluation iterates over all k! permutations with compensated (Kahan)
accumulation, valid for k <= 8 where k! stays cheap.  Spectral entries are
required to be pairwise distinct; at geometric/additive string points only
numerator factors vanish, so direct evaluation stays finite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qboson.qcore import (
    CompactFn,
    Partition,
    WeylVector,
    check_q,
    cq_weight,
    cq_weight_inv,
    factorial_cluster_weight,
    string_points,
)

FAMILY_KINDS = (
    "qboson-left",
    "qboson-right",
    "qboson-cfwd",
    "eps-left",
    "eps-right",
    "eps-cfwd",
    "sd-left",
    "sd-right",
    "sd-cfwd",
)

COINCIDENCE_TOL = 1e-12


class SpectralDomainError(ValueError):
    """Spectral point violates a family exclusion or has coincident entries."""


@dataclass(frozen=True)
class SpectralPoint:
    """A vector of k spectral variables, with optional string provenance."""

    values: tuple[complex, ...]
    tag: tuple | str = "free"

    @classmethod
    def free(cls, values: Sequence[complex]) -> "SpectralPoint":
        return cls(tuple(complex(v) for v in values), "free")

    @classmethod
    def geometric_string(cls, w: Sequence[complex], lam: Partition, q: float) -> "SpectralPoint":
        vals = string_points(w, lam, q, mode="geometric")
        return cls(vals, ("geometric", tuple(map(complex, w)), lam))

    @classmethod
    def additive_string(cls, w: Sequence[complex], lam: Partition) -> "SpectralPoint":
        vals = string_points(w, lam, mode="additive")
        return cls(vals, ("additive", tuple(map(complex, w)), lam))

    @property
    def k(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class EigenFamily:
    """Selector for one of the nine eigenfunction families."""

    kind: str
    q: float
    eps: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family {self.kind!r}; choose from {FAMILY_KINDS}")
        check_q(self.q)
        if self.model == "eps" and self.eps < 0:
            raise ValueError("eps must be >= 0")

    @property
    def model(self) -> str:
        return self.kind.split("-")[0]

    @property
    def side(self) -> str:
        return self.kind.split("-")[1]

    @property
    def excluded_point(self) -> complex:
        if self.model == "qboson":
            return 1.0 + 0.0j
        if self.model == "eps":
            return complex(self.eps)
        return 0.0 + 0.0j

    def base(self, z):
        """One-particle base: 1-z, eps-z, or z, usable on scalars or arrays."""
        if self.model == "qboson":
            return 1.0 - z
        if self.model == "eps":
            return self.eps - z
        return +z

    def power_sign(self) -> int:
        """Exponent sign of the base raised to n_j: -1 for left, +1 otherwise."""
        return -1 if self.side == "left" else +1

    def scattering(self, za, zb):
        """Two-body factor (numerator over z_A - z_B) for ordered pair B < A."""
        if self.model == "sd":
            shift = -1.0 if self.side == "left" else +1.0
            return (za - zb + shift) / (za - zb)
        s = self.q if self.side == "left" else 1.0 / self.q
        return (za - s * zb) / (za - zb)

    def prefactor(self, n: WeylVector) -> float:
        """Multiplier C^{-1}(n) for the right family; 1 for left and cfwd."""
        if self.side != "right":
            return 1.0
        if self.model == "sd":
            return 1.0 / factorial_cluster_weight(n)
        return cq_weight_inv(n, self.q)

    def eigenvalue(self, z) -> complex:
        """Generator eigenvalue attached to spectral point z."""
        zs = list(z)
        if self.model == "sd":
            return complex(sum(zi - 1.0 for zi in zs))
        return complex((self.q - 1.0) * sum(zs))


def _as_values(z) -> tuple[complex, ...]:
    if isinstance(z, SpectralPoint):
        return z.values
    return tuple(complex(v) for v in z)


def validate_spectral(fam: EigenFamily, z) -> tuple[complex, ...]:
    """Reject coincident entries and family-excluded points."""
    vals = _as_values(z)
    p = fam.excluded_point
    for i, zi in enumerate(vals):
        if abs(zi - p) < COINCIDENCE_TOL * max(1.0, abs(zi)):
            raise SpectralDomainError(f"spectral entry z_{i+1}={zi} hits the excluded point {p}")
        for j in range(i + 1, len(vals)):
            if abs(zi - vals[j]) < COINCIDENCE_TOL * max(1.0, abs(zi)):
                raise SpectralDomainError(f"coincident spectral entries z_{i+1} ~ z_{j+1} = {zi}")
    return vals


def eigen_eval_grid(fam: EigenFamily, zs: Sequence[np.ndarray], n: WeylVector) -> np.ndarray:
    """Evaluate the eigenfunction on arrays of spectral variables.

    ``zs`` holds k arrays, mutually broadcastable; the result has the
    broadcast shape.  No per-node domain validation is performed: quadrature
    grids are built on contours that already avoid the exclusions.
    """
    k = n.k
    if len(zs) != k:
        raise ValueError("need one spectral array per particle")
    zs = [np.asarray(z, dtype=complex) for z in zs]
    sign = fam.power_sign()
    bases = [fam.base(z) for z in zs]
    # One-particle powers base(z_m)^(sign * n_j), indexed [m][j].
    powers = [[b ** (sign * n.coords[j]) for j in range(k)] for b in bases]

    shape = np.broadcast_shapes(*[z.shape for z in zs])
    total = np.zeros(shape, dtype=complex)
    comp = np.zeros(shape, dtype=complex)
    for perm in itertools.permutations(range(k)):
        # perm[j] = index of the spectral variable paired with particle j.
        term = powers[perm[0]][0].astype(complex, copy=True)
        term = np.broadcast_to(term, shape).copy() if term.shape != shape else term
        for j in range(1, k):
            term = term * powers[perm[j]][j]
        for b_pos in range(k):
            for a_pos in range(b_pos + 1, k):
                term = term * fam.scattering(zs[perm[a_pos]], zs[perm[b_pos]])
        # Kahan step.
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total * fam.prefactor(n)


def eigen_eval(fam: EigenFamily, z, n: WeylVector, validate: bool = True) -> complex:
    """Eigenfunction value at a single spectral point."""
    vals = validate_spectral(fam, z) if validate else _as_values(z)
    arrs = [np.asarray(v, dtype=complex) for v in vals]
    out = eigen_eval_grid(fam, arrs, n)
    return complex(out)


def psi_left(z, n: WeylVector, q: float) -> complex:
    return eigen_eval(EigenFamily("qboson-left", q), z, n)


def psi_right(z, n: WeylVector, q: float) -> complex:
    return eigen_eval(EigenFamily("qboson-right", q), z, n)


def psi_cfwd(z, n: WeylVector, q: float) -> complex:
    return eigen_eval(EigenFamily("qboson-cfwd", q), z, n)


def reflect_map(f: CompactFn) -> CompactFn:
    """(Rf)(n_1..n_k) = f(-n_k..-n_1); an involution on compact functions."""
    return CompactFn({n.reflect(): v for n, v in f.items()})


def p_map(f: CompactFn, q: float) -> CompactFn:
    """(Pf)(n) = q^{k(k-1)/2} C_q(n) (Rf)(n), the right-to-left intertwiner.

    The constant is pinned by the reflection symmetry of the two
    eigenfunction families: with it, the forward transform of P delta_m is
    exactly the left eigenfunction labeled by m, which is what the pairing
    isomorphism identity requires.
    """
    check_q(q)
    rf = reflect_map(f)
    k = f.k
    scale = q ** (k * (k - 1) / 2.0)
    return CompactFn({n: scale * cq_weight(n, q) * v for n, v in rf.items()})
