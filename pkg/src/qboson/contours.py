"""Contour systems and spectrally accurate quadrature on products of circles.

The transforms and moment formulas are k-fold integrals over nested circles
whose validity rests on a handful of containment inequalities.  Contour
systems are built here and validated before use; `integrate` evaluates the
k-fold product trapezoidal rule (geometrically convergent for integrands
analytic near the circles) with an embedded-subgrid error estimate, and
`contract_powers` is the batched kernel used by the transform layer to
evaluate one grid integrand against many integer power exponents at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qboson.qcore import check_q

CONTOUR_FAMILIES = (
    "qboson-nested",
    "qboson-single",
    "eps-nested",
    "eps-single",
    "sd-nested",
    "string-product",
    "sd-string-product",
)


class ContourError(ValueError):
    """A contour system fails one of its validity conditions."""


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def contains_point(self, p: complex, margin: float = 0.0) -> bool:
        return abs(p - self.center) < self.radius - margin

    def contains_scaled(self, other: "Circle", factor: complex) -> bool:
        """True if this circle strictly contains factor * other."""
        return abs(self.center - factor * other.center) + abs(factor) * other.radius < self.radius

    def contains_shifted(self, other: "Circle", shift: complex) -> bool:
        """True if this circle strictly contains shift + other."""
        return abs(self.center - shift - other.center) + other.radius < self.radius

    def nodes(self, m: int, phase: float = 0.0) -> np.ndarray:
        theta = phase + 2.0 * np.pi * np.arange(m) / m
        return self.center + self.radius * np.exp(1j * theta)

    def weights(self, m: int, phase: float = 0.0) -> np.ndarray:
        """Per-node weights realizing dz/(2 pi i) on this circle."""
        theta = phase + 2.0 * np.pi * np.arange(m) / m
        return self.radius * np.exp(1j * theta) / m


@dataclass(frozen=True)
class ContourSystem:
    """Validated circles for one of the integral families.

    qboson-nested: all circles contain 1, gamma_A contains q * gamma_B for
    A < B, the innermost does not contain q, and every exclusion point is
    outside every circle.  eps-nested is the same picture around eps (the
    innermost must not contain q*eps).  The single-circle families need the
    circle to contain the marked point and its own q-image.  sd-nested:
    all circles contain 0, gamma_A contains 1 + gamma_B, the innermost does
    not contain 1.
    """

    circles: tuple[Circle, ...]
    family: str
    q: float = 0.5
    eps: float = 1.0
    exclusions: tuple[complex, ...] = ()

    def __post_init__(self):
        if self.family not in CONTOUR_FAMILIES:
            raise ContourError(f"unknown contour family {self.family!r}")
        self.validate()

    @property
    def k(self) -> int:
        return len(self.circles)

    def validate(self) -> None:
        q = self.q
        cs = self.circles
        if self.family in ("qboson-nested", "eps-nested"):
            check_q(q)
            mark = 1.0 if self.family == "qboson-nested" else self.eps
            for j, c in enumerate(cs):
                if not c.contains_point(mark):
                    raise ContourError(f"circle {j+1} does not contain the point {mark}")
            for a in range(len(cs)):
                for b in range(a + 1, len(cs)):
                    if not cs[a].contains_scaled(cs[b], q):
                        raise ContourError(
                            f"circle {a+1} does not contain q * circle {b+1} "
                            f"(|c_A - q c_B| + q r_B >= r_A)"
                        )
            if cs[-1].contains_point(q * mark):
                raise ContourError(f"innermost circle contains {q * mark}")
        elif self.family in ("qboson-single", "eps-single"):
            check_q(q)
            mark = 1.0 if self.family == "qboson-single" else self.eps
            c = cs[0]
            if not c.contains_point(mark):
                raise ContourError(f"circle does not contain the point {mark}")
            if not c.contains_scaled(c, q):
                raise ContourError("circle does not contain its own q-image (needs |center| < radius)")
        elif self.family == "sd-nested":
            for j, c in enumerate(cs):
                if not c.contains_point(0.0):
                    raise ContourError(f"circle {j+1} does not contain 0")
            for a in range(len(cs)):
                for b in range(a + 1, len(cs)):
                    if not cs[a].contains_shifted(cs[b], 1.0):
                        raise ContourError(f"circle {a+1} does not contain 1 + circle {b+1}")
            if cs[-1].contains_point(1.0):
                raise ContourError("innermost circle contains 1")
        elif self.family == "string-product":
            # Repeated copies of one small circle around the marked point,
            # the domain of the partition-expanded (string) integrals.  The
            # circle must keep all its q-orbit images disjoint from itself
            # so string components never collide across axes.
            check_q(q)
            c0 = cs[0]
            for c in cs[1:]:
                if c != c0:
                    raise ContourError("string-product circles must all coincide")
            mark = c0.center
            if abs(mark) * (1.0 - q) <= c0.radius * (1.0 + q):
                raise ContourError(
                    "string circle too large: its q-image overlaps it "
                    "(need |center| (1-q) > r (1+q))"
                )
        elif self.family == "sd-string-product":
            c0 = cs[0]
            for c in cs[1:]:
                if c != c0:
                    raise ContourError("string-product circles must all coincide")
            if 2.0 * c0.radius >= 1.0:
                raise ContourError("string circle too large: its unit-shifted image overlaps it")
            if c0.contains_point(1.0):
                raise ContourError("string circle contains 1")
        for p in self.exclusions:
            for j, c in enumerate(cs):
                if c.contains_point(p):
                    raise ContourError(f"exclusion point {p} lies inside circle {j+1}")

    def describe(self) -> dict:
        return {
            "family": self.family,
            "q": self.q,
            "eps": self.eps,
            "circles": [[c.center.real, c.center.imag, c.radius] for c in self.circles],
            "exclusions": [[p.real, p.imag] for p in map(complex, self.exclusions)],
        }


def default_inner_radius(q: float, eps: float = 1.0) -> float:
    """Innermost radius min(0.1, (1-q)/4), scaled by eps for the eps family.

    The (1-q)/4 cap keeps w q^{lam} far from the innermost circle so the
    string-measure determinant never degenerates on quadrature nodes.
    """
    return eps * min(0.1, (1.0 - q) / 4.0)


def nested_contours(
    k: int,
    q: float,
    r_k: float | None = None,
    margin: float | None = None,
    exclusions: Sequence[complex] = (),
    center: float = 1.0,
) -> ContourSystem:
    """Nested circles centered at ``center`` (1, or eps for the eps family).

    Radii satisfy r_j = center (1-q) + q r_{j+1} + margin going outward, the
    minimal growth that keeps q * gamma_{j+1} strictly inside gamma_j.  The
    margin is also the closest approach of the kernel poles z_A = q z_B to
    the circles, hence it controls the trapezoid convergence rate; the
    default 0.3 center (1-q) keeps 128 nodes comfortably past 1e-9.
    """
    check_q(q)
    if center <= 0:
        raise ContourError("contour center must be positive")
    if r_k is None:
        r_k = default_inner_radius(q, center)
    if margin is None:
        margin = 0.3 * center * (1.0 - q)
    if not (0 < r_k):
        raise ContourError("innermost radius must be positive")
    if margin <= 0:
        raise ContourError("margin must be positive")
    radii = [r_k]
    for _ in range(k - 1):
        radii.append(center * (1.0 - q) + q * radii[-1] + margin)
    radii.reverse()
    circles = tuple(Circle(complex(center), r) for r in radii)
    family = "qboson-nested" if center == 1.0 else "eps-nested"
    return ContourSystem(circles, family, q=q, eps=center, exclusions=tuple(map(complex, exclusions)))


def eps_nested_contours(k: int, q: float, eps: float, r_k: float | None = None, margin: float = 0.01,
                        exclusions: Sequence[complex] = ()) -> ContourSystem:
    if eps <= 0:
        raise ContourError("nested eps contours need eps > 0 (use the single-circle form at eps = 0)")
    return nested_contours(k, q, r_k=r_k, margin=margin, exclusions=exclusions, center=eps)


def sd_nested_contours(k: int, r_k: float = 0.4, step: float = 1.1,
                       exclusions: Sequence[complex] = ()) -> ContourSystem:
    """Nested circles around 0 with r_j = r_{j+1} + step; r_k < 1, step > 1."""
    radii = [r_k]
    for _ in range(k - 1):
        radii.append(radii[-1] + step)
    radii.reverse()
    circles = tuple(Circle(0.0 + 0.0j, r) for r in radii)
    return ContourSystem(circles, "sd-nested", exclusions=tuple(map(complex, exclusions)))


def single_gamma(q: float, k: int = 1, radius: float = 1.5, eps: float = 1.0,
                 family: str = "qboson-single") -> ContourSystem:
    """One circle (repeated k times) around 0 containing the marked point.

    Center 0, radius 1.5 by default: it contains 0 and 1 (or eps <= 1) and
    its own q-image, since |center| < radius.
    """
    circles = tuple(Circle(0.0 + 0.0j, radius) for _ in range(k))
    return ContourSystem(circles, family, q=q, eps=eps)


def gamma_prime(inner: ContourSystem | Circle, radius: float = 4.0) -> Circle:
    """Outer circle with min |p - w| on it exceeding max |p - z| on the inner one.

    For inner radius 1.5 around 0 and any marked point p in [0, 1], radius 4
    gives min |p - w| >= 3 > 2.5 >= max |p - z|.
    """
    c = inner if isinstance(inner, Circle) else inner.circles[0]
    if radius <= abs(c.center) + c.radius:
        raise ContourError("outer circle must contain the inner one")
    return Circle(c.center, radius)


@dataclass(frozen=True)
class QuadratureSpec:
    """Node count per circle (power of two, >= 16) and error-estimate flag."""

    nodes: int = 128
    doubling: bool = True
    phase: float = 0.0

    def __post_init__(self):
        m = self.nodes
        if m < 16 or (m & (m - 1)) != 0:
            raise ValueError("nodes must be a power of two >= 16")


def default_nodes(k: int) -> int:
    """Node budget per circle: 128 for k <= 3, 64 for k = 4 (cost M^k)."""
    return 128 if k <= 3 else 64


@dataclass
class QuadResult:
    value: complex
    error_estimate: float

    def __complex__(self):
        return complex(self.value)


def grid_nodes_weights(cs: ContourSystem, spec: QuadratureSpec):
    """Per-axis node and weight vectors (weights realize dz_j / (2 pi i)).

    Each axis gets a small distinct phase offset (a j/(k+1) fraction of the
    node spacing) so that repeated circles never share a node: factored
    integrands with removable diagonal singularities then stay finite on
    every node, while the trapezoid rule's accuracy on each axis is
    unchanged (it is phase-invariant for analytic integrands).
    """
    m = spec.nodes
    k = cs.k
    spacing = 2.0 * math.pi / m
    nodes, weights = [], []
    for j, c in enumerate(cs.circles):
        phase = spec.phase + spacing * j / (k + 1.0)
        nodes.append(c.nodes(m, phase))
        weights.append(c.weights(m, phase))
    return nodes, weights


def _axis_view(v: np.ndarray, axis: int, k: int) -> np.ndarray:
    shape = [1] * k
    shape[axis] = v.size
    return v.reshape(shape)


def integrate(cs: ContourSystem, integrand: Callable, spec: QuadratureSpec) -> QuadResult:
    """k-fold product trapezoidal rule over the contour system.

    ``integrand`` receives k arrays (one per circle) already shaped for
    broadcasting and must return the integrand on their broadcast product;
    it must be safe to call on array chunks.  The error estimate compares
    the full sum against its embedded half-node subgrid (i.e. what node
    doubling from M/2 to M changed).
    """
    k = cs.k
    m = spec.nodes
    nodes, weights = grid_nodes_weights(cs, spec)
    total = 0.0 + 0.0j
    coarse = 0.0 + 0.0j

    # Chunk along axis 0 to bound peak memory at ~chunk * m^(k-1) complexes.
    chunk = m if k <= 2 else max(2, min(m, (1 << 21) // m ** (k - 1) or 2))
    chunk += chunk % 2  # keep even alignment so the half-grid stays embedded
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        zs = [_axis_view(nodes[0][start:stop], 0, k)] + [
            _axis_view(nodes[j], j, k) for j in range(1, k)
        ]
        vals = np.asarray(integrand(tuple(zs)), dtype=complex)
        full_shape = tuple([stop - start] + [m] * (k - 1))
        vals = np.broadcast_to(vals, full_shape)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("integrand returned a non-finite value on a quadrature node")
        w0 = weights[0][start:stop]
        weighted = vals * _axis_view(w0, 0, k)
        for j in range(1, k):
            weighted = weighted * _axis_view(weights[j], j, k)
        total += weighted.sum()
        if spec.doubling:
            sl = [slice(None, None, 2)] * k
            sl[0] = slice(0, stop - start, 2)
            coarse += weighted[tuple(sl)].sum()
    if spec.doubling:
        # The half grid carries half the per-axis weight density per axis.
        coarse *= 2 ** k
        err = abs(total - coarse)
    else:
        err = float("nan")
    return QuadResult(total, err)


def power_matrix(base: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Matrix P[m, e - lo] = base[m] ** e for integer exponents lo..hi."""
    if hi < lo:
        raise ValueError("need lo <= hi")
    m = base.size
    out = np.empty((m, hi - lo + 1), dtype=complex)
    out[:, 0] = base ** lo
    for e in range(1, hi - lo + 1):
        out[:, e] = out[:, e - 1] * base
    return out


def contract_powers(tensor: np.ndarray, bases: Sequence[np.ndarray],
                    ranges: Sequence[tuple[int, int]]) -> np.ndarray:
    """Contract a grid tensor against per-axis integer powers of base vectors.

    Returns R with R[e_1 - lo_1, ..., e_k - lo_k] =
        sum_grid tensor * prod_j bases[j] ** e_j.

    This turns "integrate one grid integrand against many integer
    exponents" into k successive matrix products, the workhorse of the
    batched transform evaluations.
    """
    k = tensor.ndim
    if len(bases) != k or len(ranges) != k:
        raise ValueError("need one base vector and one exponent range per axis")
    out = tensor
    for j in range(k - 1, -1, -1):
        P = power_matrix(np.asarray(bases[j], dtype=complex), *ranges[j])
        out = np.tensordot(out, P, axes=([j], [0]))
    # tensordot appended new axes in reverse order; restore axis order.
    return np.transpose(out, axes=tuple(range(k - 1, -1, -1)))
