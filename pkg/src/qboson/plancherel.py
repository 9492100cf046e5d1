"""The transform pair, spectral measures, pairings, and residue expansion.

The forward transform pairs a compactly supported function with the right
eigenfunctions; the inverse transform is a k-fold contour integral that can
be evaluated three equivalent ways: over nested circles, over one large
circle against the k-string-free measure, or as a sum over partitions of
string-specialized integrals against the measure `mu_weight`.

Batched evaluators (`composition_table`, `inverse_J_batch`) factor the
integrand through per-permutation scattering tensors and integer power
contractions, so one quadrature grid serves a whole box of spatial
arguments at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qboson.contours import (
    ContourSystem,
    QuadResult,
    QuadratureSpec,
    contract_powers,
    grid_nodes_weights,
    integrate,
    power_matrix,
)
from qboson.eigenfunctions import EigenFamily, eigen_eval, eigen_eval_grid
from qboson.qcore import (
    CompactFn,
    Partition,
    WeylVector,
    check_q,
    partitions_of,
    string_points,
)


@dataclass(frozen=True)
class SpectralFn:
    """Symmetric function of k spectral variables with an analyticity tag.

    Tags: "laurent" (Laurent polynomial in the base variables, analytic off
    the family's marked point), "free" (entire apart from the marked
    point), or ("pole-at", points) for functions with extra poles that the
    integration contours must exclude.
    """

    fn: Callable
    k: int
    tag: tuple | str = "laurent"

    def __call__(self, zs):
        return self.fn(zs)

    def pole_points(self) -> tuple[complex, ...]:
        if isinstance(self.tag, tuple) and self.tag[0] == "pole-at":
            return tuple(map(complex, self.tag[1]))
        return ()


def check_symmetry(G: SpectralFn, rng: np.random.Generator, tol: float = 1e-10) -> float:
    """Spot-check symmetry of G at a random point; returns the residual."""
    z = rng.normal(size=G.k) + 0.3j * rng.normal(size=G.k) + 2.0
    zs = [np.asarray(v) for v in z]
    base = complex(G(tuple(zs)))
    worst = 0.0
    for perm in itertools.permutations(range(G.k)):
        v = complex(G(tuple(zs[p] for p in perm)))
        worst = max(worst, abs(v - base) / (1.0 + abs(base)))
    if worst > tol:
        raise ValueError(f"spectral function is not symmetric (residual {worst:.2e})")
    return worst


def _family(model: str, side: str, q: float, eps: float) -> EigenFamily:
    return EigenFamily(f"{model}-{side}", q, eps)


def _base_grid(model: str, eps: float, z):
    if model == "qboson":
        return 1.0 - z
    if model == "eps":
        return eps - z
    return +z


def nested_kernel_grid(zs: Sequence[np.ndarray], q: float, model: str = "qboson") -> np.ndarray:
    """prod_{A<B} (z_A - z_B)/(z_A - q z_B), resp. /(z_A - z_B - 1) for sd."""
    k = len(zs)
    out = None
    for a in range(k):
        for b in range(a + 1, k):
            diff = zs[a] - zs[b]
            den = (diff - 1.0) if model == "sd" else (zs[a] - q * zs[b])
            f = diff / den
            out = f if out is None else out * f
    if out is None:
        out = np.ones(np.broadcast_shapes(*[np.shape(z) for z in zs]), dtype=complex)
    return out


def transform_F(f: CompactFn, z, q: float, model: str = "qboson", eps: float = 1.0) -> complex:
    """Forward transform: sum over the support of f against the right eigenfunction."""
    fam = _family(model, "right", q, eps)
    out = 0.0 + 0.0j
    for n, v in f.items():
        out += v * eigen_eval(fam, z, n)
    return out


def transform_F_grid(f: CompactFn, zs: Sequence[np.ndarray], q: float,
                     model: str = "qboson", eps: float = 1.0, side: str = "right") -> np.ndarray:
    """Grid version of the transform; ``side`` switches to the left pairing."""
    fam = _family(model, side, q, eps)
    out = None
    for n, v in f.items():
        term = v * eigen_eval_grid(fam, zs, n)
        out = term if out is None else out + term
    if out is None:
        shape = np.broadcast_shapes(*[np.shape(z) for z in zs])
        out = np.zeros(shape, dtype=complex)
    return out


def pairing_spatial(f: CompactFn, g: CompactFn) -> complex:
    """<f, g> = sum_n f(n) g(n) over the Weyl chamber."""
    if len(f) > len(g):
        f, g = g, f
    return sum(v * g(n) for n, v in f.items())


# ---------------------------------------------------------------------------
# Spectral measures


def _mult_factorial(lam: Partition) -> float:
    out = 1.0
    for m in lam.multiplicities().values():
        out *= math.factorial(m)
    return out


def mu_density_grid(lam: Partition, ws: Sequence[np.ndarray], q: float,
                    model: str = "qboson") -> np.ndarray:
    """String-measure density at base points w (the dw/(2 pi i) lives in the quadrature).

    q-Boson / eps families:
        (1-q)^k (-1)^k q^{-k^2/2} / prod_i m_i! * det[1/(w_i q^{lam_i} - w_j)]
        * prod_j w_j^{lam_j} q^{lam_j^2/2}
    semi-discrete: det[1/(w_i + lam_i - w_j)] / prod_i m_i!.

    The determinant is a Cauchy determinant and is evaluated here through
    its product closed form (cheap and allocation-free on big quadrature
    grids); the scalar `mu_weight` keeps the literal determinant, and the
    measure-consistency check ties the two routes together.
    """
    ell = lam.length
    ws = [np.asarray(w, dtype=complex) for w in ws]
    shape = np.broadcast_shapes(*[w.shape for w in ws])

    def shifted(i):
        return ws[i] + lam.parts[i] if model == "sd" else ws[i] * q ** lam.parts[i]

    det = np.ones(shape, dtype=complex)
    for i in range(ell):
        for j in range(ell):
            if i < j:
                det = det * (shifted(i) - shifted(j)) * (ws[j] - ws[i])
            det = det / (shifted(i) - ws[j])
    if model == "sd":
        return det / _mult_factorial(lam)
    k = lam.size
    pref = (1.0 - q) ** k * (-1.0) ** k * q ** (-k * k / 2.0) / _mult_factorial(lam)
    extra = np.ones(shape, dtype=complex)
    for j in range(ell):
        lj = lam.parts[j]
        extra = extra * ws[j] ** lj * q ** (lj * lj / 2.0)
    return pref * det * extra


def mu_weight(lam: Partition, w: Sequence[complex], q: float) -> complex:
    """Scalar string-measure density (canonical normalization), evaluated
    through the literal determinant."""
    check_q(q)
    ell = lam.length
    ws = [complex(x) for x in w]
    M = np.empty((ell, ell), dtype=complex)
    for i in range(ell):
        for j in range(ell):
            gap = ws[i] * q ** lam.parts[i] - ws[j]
            if gap == 0:
                raise ValueError("singular string-measure determinant input")
            M[i, j] = 1.0 / gap
    det = complex(np.linalg.det(M))
    if not math.isfinite(det.real) or not math.isfinite(det.imag):
        raise ValueError("singular string-measure determinant input")
    k = lam.size
    pref = (1.0 - q) ** k * (-1.0) ** k * q ** (-k * k / 2.0) / _mult_factorial(lam)
    extra = 1.0 + 0.0j
    for j in range(ell):
        lj = lam.parts[j]
        extra *= ws[j] ** lj * q ** (lj * lj / 2.0)
    return pref * det * extra


def mu_weight_appendix(lam: Partition, w: Sequence[complex], q: float) -> complex:
    """Equivalent form with q^{-k(k-1)/2} and q^{lam_j (lam_j - 1)/2} exponents."""
    check_q(q)
    ell = lam.length
    k = lam.size
    ws = [complex(x) for x in w]
    M = np.empty((ell, ell), dtype=complex)
    for i in range(ell):
        for j in range(ell):
            M[i, j] = 1.0 / (ws[i] * q ** lam.parts[i] - ws[j])
    det = complex(np.linalg.det(M))
    pref = (1.0 - q) ** k * (-1.0) ** k * q ** (-k * (k - 1) / 2.0) / _mult_factorial(lam)
    extra = 1.0 + 0.0j
    for j in range(ell):
        lj = lam.parts[j]
        extra *= ws[j] ** lj * q ** (lj * (lj - 1) / 2.0)
    return pref * det * extra


def mu_weight_vandermonde(lam: Partition, w: Sequence[complex], q: float) -> complex:
    """Squared-Vandermonde form: the density as Delta(w o lam)^2 over the
    scattering denominator with its vanishing factors omitted."""
    return residue_weight_direct(lam, w, q) / _mult_factorial(lam)


def sd_mu_weight(lam: Partition, w: Sequence[complex]) -> complex:
    arrs = [np.asarray(complex(x)) for x in w]
    return complex(mu_density_grid(lam, arrs, 0.5, model="sd"))


def _string_consecutive_pairs(lam: Partition) -> set[tuple[int, int]]:
    """Ordered index pairs (deeper, shallower) adjacent within one string."""
    pairs = set()
    pos = 0
    for part in lam.parts:
        for t in range(1, part):
            pairs.add((pos + t, pos + t - 1))
        pos += part
    return pairs


def residue_weight_direct(lam: Partition, w: Sequence[complex], q: float) -> complex:
    """Iterated string residue of prod_{i != j} (y_i - y_j)/(y_i - q y_j).

    The residue multiplies in the factors (y_i - q y_{i-1}) along each
    string; those cancel, factor for factor, against the denominator, so
    the value is the plain product with exactly those denominator factors
    removed, evaluated at the geometric string point.
    """
    check_q(q)
    y = string_points(w, lam, q, mode="geometric")
    k = len(y)
    skip = _string_consecutive_pairs(lam)
    out = 1.0 + 0.0j
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            out *= y[i] - y[j]
            if (i, j) not in skip:
                out /= y[i] - q * y[j]
    return out


def residue_weight_determinant(lam: Partition, w: Sequence[complex], q: float) -> complex:
    """Closed-form value of the same residue via the Cauchy-type determinant."""
    return complex(mu_weight(lam, w, q)) * _mult_factorial(lam)


# ---------------------------------------------------------------------------
# Inverse transform and pairings (generic, single spatial argument)


def _string_components(lam: Partition, ws: Sequence[np.ndarray], q: float, model: str):
    """Per-component grid arrays of w o lam (geometric) or the additive analogue."""
    comps = []
    for s, part in enumerate(lam.parts):
        for i in range(part):
            comps.append(ws[s] * q**i if model != "sd" else ws[s] + i)
    return comps


def _string_poch_grid(lam: Partition, ws: Sequence[np.ndarray], q: float,
                      model: str, eps: float) -> np.ndarray:
    """prod_j (w_j; q)_{lam_j} (eps-deformed for the eps family) or the
    rising factorial (w_j)_{lam_j} for the semi-discrete family."""
    out = None
    for s, part in enumerate(lam.parts):
        f = np.ones_like(ws[s], dtype=complex)
        for i in range(part):
            if model == "sd":
                f = f * (ws[s] + i)
            elif model == "eps":
                f = f * (eps - q**i * ws[s])
            else:
                f = f * (1.0 - q**i * ws[s])
        out = f if out is None else out * f
    return out


def _gamma_k_system(cs: ContourSystem, ell: int) -> ContourSystem:
    """Product of ell copies of the innermost circle of a nested system."""
    inner = cs.circles[-1]
    family = "sd-string-product" if cs.family.startswith("sd") else "string-product"
    return ContourSystem(
        tuple(inner for _ in range(ell)), family, q=cs.q, eps=cs.eps, exclusions=cs.exclusions
    )


def check_contour_compat(G, cs: ContourSystem) -> None:
    if isinstance(G, SpectralFn):
        for p in G.pole_points():
            if not any(abs(p - e) < 1e-12 for e in cs.exclusions):
                raise ValueError(
                    f"G has a pole at {p} but the contour system does not exclude it"
                )


def inverse_J(G, n: WeylVector, mode: str, cs: ContourSystem, spec: QuadratureSpec,
              q: float, model: str = "qboson", eps: float = 1.0,
              return_error: bool = False):
    """Inverse transform of a symmetric spectral function at one point n.

    modes: "nested" (k-fold integral over the nested circles), "single-gamma"
    (one circle, k-string-free measure against the left eigenfunction), or
    "expanded" (sum over partitions of string-specialized integrals).
    """
    check_q(q)
    check_contour_compat(G, cs)
    k = n.k
    Gfn = G.fn if isinstance(G, SpectralFn) else G
    sd_sign = (-1.0) ** k if model == "sd" else 1.0

    if mode == "nested":
        if cs.k != k:
            raise ValueError("nested mode needs one circle per particle")

        def integrand(zs):
            kern = nested_kernel_grid(zs, q, model)
            pw = None
            for j, z in enumerate(zs):
                f = _base_grid(model, eps, z) ** (-n.coords[j] - 1)
                pw = f if pw is None else pw * f
            return kern * pw * Gfn(zs)

        res = integrate(cs, integrand, spec)
        res = QuadResult(sd_sign * res.value, res.error_estimate)
        return res if return_error else res.value

    if mode == "single-gamma":
        if model == "sd":
            raise ValueError("the semi-discrete family has no single-circle form")
        fam_l = _family(model, "left", q, eps)
        lam1 = Partition(tuple([1] * k))

        def integrand(zs):
            dens = mu_density_grid(lam1, list(zs), q, model="qboson")
            inv = None
            for z in zs:
                f = 1.0 / _base_grid(model, eps, z)
                inv = f if inv is None else inv * f
            return dens * inv * eigen_eval_grid(fam_l, list(zs), n) * Gfn(zs)

        res = integrate(cs, integrand, spec)
        return res if return_error else res.value

    if mode == "expanded":
        fam_l = _family(model, "left", q, eps)
        total = 0.0 + 0.0j
        err = 0.0
        for lam in partitions_of(k):
            ell = lam.length
            sub = _gamma_k_system(cs, ell)

            def integrand(ws, _lam=lam):
                comps = _string_components(_lam, list(ws), q, model)
                dens = mu_density_grid(_lam, list(ws), q, model="sd" if model == "sd" else "qboson")
                poch = _string_poch_grid(_lam, list(ws), q, model, eps)
                return dens / poch * eigen_eval_grid(fam_l, comps, n) * Gfn(comps)

            r = integrate(sub, integrand, spec)
            total += r.value
            err += r.error_estimate
        # the sign of the nested definition survives the string expansion
        res = QuadResult(sd_sign * total, err)
        return res if return_error else res.value

    raise ValueError(f"unknown inverse-transform mode {mode!r}")


def pairing_spectral(F, G, mode: str, cs: ContourSystem, spec: QuadratureSpec,
                     q: float, model: str = "qboson", eps: float = 1.0,
                     return_error: bool = False):
    """Bilinear spectral pairing of two symmetric functions.

    single-gamma: integral of dmu_{(1)^k} prod 1/base(w_j) F G over one circle;
    expanded: the partition sum over the innermost circle.
    """
    check_q(q)
    Ffn = F.fn if isinstance(F, SpectralFn) else F
    Gfn = G.fn if isinstance(G, SpectralFn) else G
    k = None
    for H in (F, G):
        if isinstance(H, SpectralFn):
            k = H.k
    if k is None:
        raise ValueError("at least one argument must be a SpectralFn carrying k")

    if mode == "single-gamma":
        if model == "sd":
            raise ValueError("the semi-discrete pairing has no single-circle form")
        lam1 = Partition(tuple([1] * k))
        if cs.k != k:
            raise ValueError("need one circle per variable")

        def integrand(ws):
            dens = mu_density_grid(lam1, list(ws), q)
            inv = None
            for w in ws:
                f = 1.0 / _base_grid(model, eps, w)
                inv = f if inv is None else inv * f
            return dens * inv * Ffn(ws) * Gfn(ws)

        res = integrate(cs, integrand, spec)
        return res if return_error else res.value

    if mode == "expanded":
        total = 0.0 + 0.0j
        err = 0.0
        for lam in partitions_of(k):
            sub = _gamma_k_system(cs, lam.length)

            def integrand(ws, _lam=lam):
                comps = _string_components(_lam, list(ws), q, model)
                dens = mu_density_grid(_lam, list(ws), q, model="sd" if model == "sd" else "qboson")
                poch = _string_poch_grid(_lam, list(ws), q, model, eps)
                return dens / poch * Ffn(comps) * Gfn(comps)

            r = integrate(sub, integrand, spec)
            total += r.value
            err += r.error_estimate
        res = QuadResult(total, err)
        return res if return_error else res.value

    raise ValueError(f"unknown pairing mode {mode!r}")


# ---------------------------------------------------------------------------
# Batched evaluators: one quadrature grid, a whole box of spatial arguments


def _full_grid(cs: ContourSystem, spec: QuadratureSpec):
    """Axis-shaped node arrays plus the materialized weight tensor."""
    nodes, weights = grid_nodes_weights(cs, spec)
    k = cs.k
    zs = []
    W = None
    for j in range(k):
        shape = [1] * k
        shape[j] = spec.nodes
        zs.append(nodes[j].reshape(shape))
        w = weights[j].reshape(shape)
        W = w if W is None else W * w
    return zs, W


def _scat_product(fam: EigenFamily, comps: Sequence[np.ndarray], perm) -> np.ndarray:
    out = None
    for b in range(len(perm)):
        for a in range(b + 1, len(perm)):
            f = fam.scattering(comps[perm[a]], comps[perm[b]])
            out = f if out is None else out * f
    if out is None:
        out = np.asarray(1.0 + 0.0j)
    return out


def inverse_J_batch(G, ns: Sequence[WeylVector], mode: str, cs: ContourSystem,
                    spec: QuadratureSpec, q: float, model: str = "qboson",
                    eps: float = 1.0, extra_grid: Callable | None = None) -> np.ndarray:
    """Inverse transform at many points n sharing one grid evaluation of G.

    ``extra_grid`` optionally multiplies the integrand by a further grid
    factor (e.g. the exponential time weight of the evolution solvers).
    Memory holds the full M^k grid, so this path is intended for k <= 3.
    """
    check_q(q)
    check_contour_compat(G, cs)
    Gfn = G.fn if isinstance(G, SpectralFn) else G
    ns = list(ns)
    k = ns[0].k
    lo = min(n.coords[j] for n in ns for j in range(k))
    hi = max(n.coords[j] for n in ns for j in range(k))
    sd_sign = (-1.0) ** k if model == "sd" else 1.0

    if mode == "nested":
        zs, W = _full_grid(cs, spec)
        T = W * nested_kernel_grid(zs, q, model) * Gfn(tuple(zs))
        if extra_grid is not None:
            T = T * extra_grid(tuple(zs))
        bases = [_base_grid(model, eps, z).ravel() for z in zs]
        table = contract_powers(T, bases, [(-hi - 1, -lo - 1)] * k)
        out = np.empty(len(ns), dtype=complex)
        for i, n in enumerate(ns):
            idx = tuple((-n.coords[j] - 1) - (-hi - 1) for j in range(k))
            out[i] = sd_sign * table[idx]
        return out

    if mode == "expanded":
        fam_l = _family(model, "left", q, eps)
        out = np.zeros(len(ns), dtype=complex)
        for lam in partitions_of(k):
            sub = _gamma_k_system(cs, lam.length)
            ws, W = _full_grid(sub, spec)
            comps = _string_components(lam, ws, q, model)
            dens = mu_density_grid(lam, ws, q, model="sd" if model == "sd" else "qboson")
            poch = _string_poch_grid(lam, ws, q, model, eps)
            T0 = W * dens / poch * Gfn(comps)
            if extra_grid is not None:
                T0 = T0 * extra_grid(comps)
            # Group components by their string axis for the power contraction.
            axis_of = []
            for s, part in enumerate(lam.parts):
                axis_of.extend([s] * part)
            base_comps = [_base_grid(model, eps, c) for c in comps]
            for sigma in itertools.permutations(range(k)):
                T = T0 * _scat_product(fam_l, comps, sigma)
                # exponent of component m is -n_{sigma^{-1}(m)}
                inv = [0] * k
                for j, m in enumerate(sigma):
                    inv[m] = j
                table, offsets = _contract_string_powers(
                    T, base_comps, axis_of, lam, (-hi, -lo)
                )
                for i, n in enumerate(ns):
                    idx = tuple(
                        (-n.coords[inv[m]]) - offsets[m] for m in range(k)
                    )
                    out[i] += table[idx]
        return sd_sign * out

    raise ValueError(f"batched inverse transform supports nested and expanded modes")


def _contract_string_powers(T: np.ndarray, base_comps: Sequence[np.ndarray],
                            axis_of: Sequence[int], lam: Partition,
                            erange: tuple[int, int]):
    """Contract a string-grid tensor against joint powers of its components.

    Components sharing a string axis are contracted jointly; the result is
    indexed by one exponent per component (offset by erange[0]).
    """
    lo, hi = erange
    ell = lam.length
    k = len(base_comps)
    ncols = hi - lo + 1
    # Per-axis joint power matrices via column-wise Kronecker products; each
    # tensordot consumes one grid axis and appends the merged exponent axis
    # at the end, so strings come out in reverse order.
    out = T
    comp_order: list[int] = []
    for s in range(ell - 1, -1, -1):
        members = [m for m in range(k) if axis_of[m] == s]
        P = None
        for m in members:
            Pm = power_matrix(base_comps[m].ravel(), lo, hi)
            if P is None:
                P = Pm
            else:
                P = (P[:, :, None] * Pm[:, None, :]).reshape(P.shape[0], -1)
        out = np.tensordot(out, P, axes=([s], [0]))
        comp_order.extend(members)
    out = out.reshape([ncols] * k)
    # Axis i currently carries component comp_order[i]; reorder to 0..k-1.
    perm = [comp_order.index(m) for m in range(k)]
    out = np.transpose(out, axes=perm)
    return out, [lo] * k


def composition_table(states: Sequence[WeylVector], cs: ContourSystem, spec: QuadratureSpec,
                      q: float, model: str = "qboson", eps: float = 1.0,
                      mode: str = "nested") -> np.ndarray:
    """Matrix T[ix, iy] = (inverse transform of the forward transform of
    delta_x) evaluated at y, for all x, y in ``states``.

    This is the identity-resolution table: the transform pair acts as the
    identity iff T is the unit matrix.  In single-gamma and expanded modes
    the same table is the spatial biorthogonality matrix of the left and
    right eigenfunctions.  All modes share one grid through per-permutation
    scattering tensors and integer power contraction.
    """
    check_q(q)
    states = list(states)
    k = states[0].k
    fam_r = _family(model, "right", q, eps)
    fam_c = _family(model, "cfwd", q, eps)
    fam_l = _family(model, "left", q, eps)
    lo = min(n.coords[j] for n in states for j in range(k))
    hi = max(n.coords[j] for n in states for j in range(k))
    npts = len(states)
    out = np.zeros((npts, npts), dtype=complex)
    prefac = np.array([fam_r.prefactor(n) for n in states])
    sd_sign = (-1.0) ** k if model == "sd" else 1.0

    coords = np.array([n.coords for n in states], dtype=int)

    if mode == "nested":
        zs, W = _full_grid(cs, spec)
        T0 = W * nested_kernel_grid(zs, q, model)
        bases = [_base_grid(model, eps, z).ravel() for z in zs]
        erange = (lo - hi - 1, hi - lo - 1)
        for tau in itertools.permutations(range(k)):
            T = T0 * _scat_product(fam_c, zs, tau)
            table = contract_powers(T, bases, [erange] * k)
            inv = [0] * k
            for j, m in enumerate(tau):
                inv[m] = j
            idx = tuple(
                coords[:, None, inv[m]] - coords[None, :, m] - 1 - erange[0]
                for m in range(k)
            )
            out += table[idx]
        return sd_sign * prefac[:, None] * out

    if mode in ("single-gamma", "expanded"):
        # (J F delta_x)(y) = pairing of the left eigenfunction at y with the
        # right one at x; computed stringwise in expanded mode.
        if mode == "single-gamma":
            if model == "sd":
                raise ValueError("the semi-discrete family has no single-circle form")
            lam_list = [Partition(tuple([1] * k))]
            single = True
        else:
            lam_list = list(partitions_of(k))
            single = False
        kfact = math.factorial(k)
        for lam in lam_list:
            sub = cs if single else _gamma_k_system(cs, lam.length)
            ws, W = _full_grid(sub, spec)
            comps = _string_components(lam, ws, q, model)
            if single:
                dens = mu_density_grid(lam, ws, q)
                inv_base = None
                for w in ws:
                    f = 1.0 / _base_grid(model, eps, w)
                    inv_base = f if inv_base is None else inv_base * f
                T0 = W * dens * inv_base
            else:
                dens = mu_density_grid(lam, ws, q, model="sd" if model == "sd" else "qboson")
                poch = _string_poch_grid(lam, ws, q, model, eps)
                T0 = W * dens / poch
            base_comps = [_base_grid(model, eps, c) for c in comps]
            axis_of = []
            for s, part in enumerate(lam.parts):
                axis_of.extend([s] * part)
            symmetric_measure = lam.parts == tuple([1] * k)
            sigmas = [tuple(range(k))] if symmetric_measure else list(
                itertools.permutations(range(k))
            )
            sig_scale = kfact if symmetric_measure else 1
            erange = (lo - hi, hi - lo)
            for sigma in sigmas:
                Tl = T0 * _scat_product(fam_l, comps, sigma) * sig_scale
                inv_s = [0] * k
                for j, m in enumerate(sigma):
                    inv_s[m] = j
                for tau in itertools.permutations(range(k)):
                    T = Tl * _scat_product(fam_c, comps, tau)
                    inv_t = [0] * k
                    for j, m in enumerate(tau):
                        inv_t[m] = j
                    table, offsets = _contract_string_powers(T, base_comps, axis_of, lam, erange)
                    idx = tuple(
                        coords[:, None, inv_t[m]] - coords[None, :, inv_s[m]] - offsets[m]
                        for m in range(k)
                    )
                    out += table[idx]
        return (sd_sign if mode == "expanded" else 1.0) * prefac[:, None] * out

    raise ValueError(f"unknown composition mode {mode!r}")


def right_right_pair_table(states: Sequence[WeylVector], cs: ContourSystem,
                           spec: QuadratureSpec, q: float) -> np.ndarray:
    """B[i, j] = spectral pairing of the right eigenfunctions at states i and j.

    Used by the isomorphism identity: <f, g> = <F(P f), F g> becomes a
    quadratic form in this table.
    """
    check_q(q)
    states = list(states)
    k = states[0].k
    fam_c = _family("qboson", "cfwd", q, 1.0)
    lam1 = Partition(tuple([1] * k))
    lo = min(n.coords[j] for n in states for j in range(k))
    hi = max(n.coords[j] for n in states for j in range(k))
    ws, W = _full_grid(cs, spec)
    dens = mu_density_grid(lam1, ws, q)
    inv_base = None
    for w in ws:
        f = 1.0 / (1.0 - w)
        inv_base = f if inv_base is None else inv_base * f
    T0 = W * dens * inv_base * math.factorial(k) * _scat_product(fam_c, ws, tuple(range(k)))
    bases = [(1.0 - w).ravel() for w in ws]
    npts = len(states)
    coords = np.array([n.coords for n in states], dtype=int)
    out = np.zeros((npts, npts), dtype=complex)
    erange = (2 * lo, 2 * hi)
    for tau in itertools.permutations(range(k)):
        T = T0 * _scat_product(fam_c, ws, tau)
        table = contract_powers(T, bases, [erange] * k)
        inv_t = [0] * k
        for j, m in enumerate(tau):
            inv_t[m] = j
        idx = tuple(
            coords[:, None, m] + coords[None, :, inv_t[m]] - erange[0]
            for m in range(k)
        )
        out += table[idx]
    pref = np.array([EigenFamily("qboson-right", q).prefactor(n) for n in states])
    return pref[:, None] * pref[None, :] * out


# ---------------------------------------------------------------------------
# Residue expansion of the bare nested kernel


def residue_expand_nested(Fs, cs: ContourSystem, spec: QuadratureSpec, q: float):
    """Nested integral of prod_{A<B} (z_A - z_B)/(z_A - q z_B) * F, for one
    F or a batch of them (the weighted kernel grid is built once)."""
    check_q(q)
    single = not isinstance(Fs, (list, tuple))
    fns = [Fs] if single else list(Fs)
    fns = [F.fn if isinstance(F, SpectralFn) else F for F in fns]
    k = cs.k
    m = spec.nodes
    nodes, weights = grid_nodes_weights(cs, spec)
    totals = np.zeros(len(fns), dtype=complex)
    chunk = m if k <= 2 else max(2, min(m, (1 << 21) // m ** (k - 1) or 2))
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        zs = [nodes[0][start:stop].reshape([-1] + [1] * (k - 1))]
        W = weights[0][start:stop].reshape([-1] + [1] * (k - 1)).astype(complex)
        for j in range(1, k):
            shape = [1] * k
            shape[j] = m
            zs.append(nodes[j].reshape(shape))
            W = W * weights[j].reshape(shape)
        base = W * nested_kernel_grid(zs, q)
        for i, fn in enumerate(fns):
            totals[i] += (base * fn(tuple(zs))).sum()
    return complex(totals[0]) if single else totals


def residue_expand_sum(Fs, k: int, cs: ContourSystem, spec: QuadratureSpec, q: float):
    """Partition-sum side: sum over partitions of the string measure paired
    with the symmetrized kernel.

    The symmetrized kernel at z is sum_sigma prod_{B<A} of the left
    scattering factors times F(sigma z).  For the string-free partition the
    measure is symmetric, so the permutation sum collapses to k! times the
    identity term (a change of integration variables, valid for any F).
    All measure and scattering tensors are shared across a batch of Fs.
    """
    check_q(q)
    single = not isinstance(Fs, (list, tuple))
    fns = [Fs] if single else list(Fs)
    fns = [F.fn if isinstance(F, SpectralFn) else F for F in fns]
    fam_l = EigenFamily("qboson-left", q)
    totals = np.zeros(len(fns), dtype=complex)
    m = spec.nodes
    for lam in partitions_of(k):
        ell = lam.length
        sub = _gamma_k_system(cs, ell)
        nodes, weights = grid_nodes_weights(sub, spec)
        chunk = m if ell <= 3 else max(2, min(m, (1 << 21) // m ** (ell - 1) or 2))
        for start in range(0, m, chunk):
            stop = min(m, start + chunk)
            ws = [nodes[0][start:stop].reshape([-1] + [1] * (ell - 1))]
            W = weights[0][start:stop].reshape([-1] + [1] * (ell - 1)).astype(complex)
            for j in range(1, ell):
                shape = [1] * ell
                shape[j] = m
                ws.append(nodes[j].reshape(shape))
                W = W * weights[j].reshape(shape)
            comps = _string_components(lam, ws, q, "qboson")
            dens = W * mu_density_grid(lam, ws, q)
            if lam.parts == tuple([1] * k):
                base = dens * math.factorial(k) * _scat_product(fam_l, comps, tuple(range(k)))
                for i, fn in enumerate(fns):
                    totals[i] += (base * fn(tuple(comps))).sum()
            else:
                for sigma in itertools.permutations(range(k)):
                    base = dens * _scat_product(fam_l, comps, sigma)
                    permuted = tuple(comps[s] for s in sigma)
                    for i, fn in enumerate(fns):
                        totals[i] += (base * fn(permuted)).sum()
    return complex(totals[0]) if single else totals
