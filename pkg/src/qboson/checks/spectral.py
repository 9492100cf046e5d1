"""Checks of the eigenrelations, boundary conditions, and generator symmetries."""

from __future__ import annotations

import numpy as np

from qboson.checks import random_spectral, random_weyl
from qboson.eigenfunctions import EigenFamily, eigen_eval
from qboson.generators import (
    GeneratorKind,
    StateBox,
    boundary_residual,
    cluster_weight_diagonal,
    extended_apply,
    generator_apply,
    matrix_on_box,
    reflection_permutation,
)
from qboson.qcore import WeylVector
from qboson.report import Accumulator, Report

# generator kind acting on each eigenfunction side
_SIDE_TO_GEN = {"left": "bwd", "cfwd": "cfwd", "right": "fwd"}


def _model_cases(q: float, eps: float):
    return [
        ("qboson", q, 1.0, 1.0 + 0.0j, 5),
        ("eps", q, eps, complex(eps), 4),
        ("sd", q, 1.0, 0.0 + 0.0j, 4),
    ]


def check_eigen_relation(q: float = 0.5, eps: float = 0.6, samples: int = 100,
                         tolerance: float = 1e-10, seed: int = 0) -> Report:
    """H Psi = E(z) Psi for all three sides of all three model families."""
    rng = np.random.default_rng(seed)
    acc = Accumulator("eigen-relation", {"q": q, "eps": eps, "samples": samples}, seed)
    for model, qq, ee, center, kmax in _model_cases(q, eps):
        for _ in range(samples):
            k = int(rng.integers(1, kmax + 1))
            n = random_weyl(rng, k)
            z = random_spectral(rng, k, center=center)
            for side in ("left", "cfwd", "right"):
                fam = EigenFamily(f"{model}-{side}", qq, ee)
                gk = GeneratorKind(_SIDE_TO_GEN[side], model, qq, ee)
                psi = lambda m, _f=fam: eigen_eval(_f, z, m, validate=False)
                lhs = generator_apply(gk, psi, n)
                rhs = fam.eigenvalue(z) * psi(n)
                acc.add(f"{model}-{side} k={k} n={n.coords}", lhs, rhs, tolerance)
    return acc.report()


def check_boundary_conditions(q: float = 0.5, eps: float = 0.6, samples: int = 100,
                              tolerance: float = 1e-12, seed: int = 0) -> Report:
    """Two-body boundary residuals of the eigenfunctions vanish on diagonals."""
    rng = np.random.default_rng(seed)
    acc = Accumulator("boundary-conditions", {"q": q, "eps": eps, "samples": samples}, seed)
    for model, qq, ee, center, kmax in _model_cases(q, eps):
        kmax = min(kmax, 4)
        for _ in range(samples):
            k = int(rng.integers(2, kmax + 1))
            # force a diagonal pair
            i = int(rng.integers(0, k - 1))
            coords = list(random_weyl(rng, k).coords)
            coords[i + 1] = coords[i]
            n = WeylVector(tuple(sorted(coords, reverse=True)))
            i = next(j for j in range(k - 1) if n.coords[j] == n.coords[j + 1])
            z = random_spectral(rng, k, center=center)
            for side, free_kind in (("left", "free-bwd"), ("cfwd", "free-fwd")):
                fam = EigenFamily(f"{model}-{side}", qq, ee)
                gk = GeneratorKind(free_kind, model, qq, ee)
                # the boundary conditions live on Z^k: probe the raw
                # symmetrized-sum formula, no coordinate sorting
                u = _raw_eigen(fam, z)
                res = boundary_residual(gk, u, i, n)
                scale = 1.0 + abs(u(n.coords))
                acc.add_residual(f"{model}-{side} k={k} i={i}", abs(res) / scale, tolerance)
    return acc.report()


def _raw_eigen(fam: EigenFamily, z):
    """The symmetrized-sum formula as a function on all of Z^k (no sorting)."""
    import itertools

    zs = [complex(v) for v in z]
    k = len(zs)

    def u(coords) -> complex:
        total = 0.0 + 0.0j
        for perm in itertools.permutations(range(k)):
            term = 1.0 + 0.0j
            for j in range(k):
                term *= fam.base(zs[perm[j]]) ** (fam.power_sign() * coords[j])
            for b in range(k):
                for a in range(b + 1, k):
                    term *= fam.scattering(zs[perm[a]], zs[perm[b]])
            total += term
        return total

    return u


def check_pt_invariance(q: float = 0.5, eps: float = 0.4, box_radius: int = 4,
                        kmax: int = 3, tolerance: float = 1e-12, seed: int = 0) -> Report:
    """Backward = (R C) forward (R C)^{-1} entrywise on symmetric boxes."""
    acc = Accumulator("pt-invariance",
                      {"q": q, "eps": eps, "box": box_radius, "kmax": kmax}, seed)
    for model in ("qboson", "eps", "sd"):
        ee = eps if model == "eps" else 1.0
        for k in range(1, kmax + 1):
            box = StateBox(k, -box_radius, box_radius)
            gb = GeneratorKind("bwd", model, q, ee)
            gf = GeneratorKind("fwd", model, q, ee)
            B = matrix_on_box(gb, box).to_dense()
            F = matrix_on_box(gf, box).to_dense()
            perm = reflection_permutation(box)
            C = cluster_weight_diagonal(gb, box)
            Rm = np.zeros_like(B)
            Rm[np.arange(len(perm)), perm] = 1.0
            RC = Rm @ np.diag(C)
            resid = np.abs(B - RC @ F @ np.linalg.inv(RC)).max()
            acc.add_residual(f"{model} k={k}", float(resid), tolerance)
            # transpose identity comes along for free
            acc.add_residual(f"{model} k={k} transpose", float(np.abs(B.T - F).max()), tolerance)
    return acc.report()


def check_extended_operator(q: float = 0.5, samples: int = 60,
                            tolerance: float = 1e-10, seed: int = 0) -> Report:
    """Whole-lattice operator reproduces the eigenrelation on symmetric
    extensions, at points whose equal coordinates sit in adjacent slots."""
    rng = np.random.default_rng(seed)
    acc = Accumulator("extended-operator", {"q": q, "samples": samples}, seed)
    for _ in range(samples):
        k = int(rng.integers(1, 5))
        n_sorted = random_weyl(rng, k, lo=-4, hi=4)
        # shuffle cluster blocks, keeping ties adjacent
        from qboson.qcore import cluster_decompose

        cd = cluster_decompose(n_sorted)
        blocks, pos = [], 0
        for c in cd.sizes:
            blocks.append(n_sorted.coords[pos:pos + c])
            pos += c
        order = rng.permutation(len(blocks))
        coords = tuple(v for b in order for v in blocks[b])
        z = random_spectral(rng, k)
        fam = EigenFamily("qboson-left", q)

        def psi_ext(cs_):
            return eigen_eval(fam, z, WeylVector(tuple(sorted(cs_, reverse=True))), validate=False)

        lhs = extended_apply(psi_ext, coords, q)
        rhs = (q - 1.0) * sum(z) * psi_ext(coords)
        acc.add(f"k={k} n={coords}", lhs, rhs, tolerance)
    # reduction to the free generator without ties
    from qboson.generators import free_apply

    for _ in range(10):
        k = int(rng.integers(2, 5))
        base = sorted(rng.choice(np.arange(-5, 6), size=k, replace=False).tolist(), reverse=True)
        coords = tuple(int(v) for v in rng.permutation(base))
        z = random_spectral(rng, k)
        fam = EigenFamily("qboson-left", q)
        psi_ext = lambda cs_: eigen_eval(fam, z, WeylVector(tuple(sorted(cs_, reverse=True))), validate=False)
        lhs = extended_apply(psi_ext, coords, q)
        gk = GeneratorKind("free-bwd", "qboson", q)
        rhs = free_apply(gk, lambda c: psi_ext(c), coords)
        acc.add(f"free-reduction k={k}", lhs, rhs, tolerance)
    # constant function: pure differences vanish
    lhs = extended_apply(lambda c: 1.0, (3, 3), q)
    acc.add("constant k=2", lhs, 0.0, tolerance)
    return acc.report()
