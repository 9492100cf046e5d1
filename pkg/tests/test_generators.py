import math

import numpy as np
import pytest

from qboson.eigenfunctions import EigenFamily, eigen_eval
from qboson.generators import (
    DomainMarginError,
    GeneratorKind,
    StateBox,
    boundary_residual,
    cluster_weight_diagonal,
    dense_exponential_transition,
    extended_apply,
    free_apply,
    generator_apply,
    matrix_on_box,
    reflection_permutation,
    table_fn,
    uniformized_transition,
)
from qboson.qcore import WeylVector

Q = 0.5


def test_backward_single_cluster():
    # two particles together: one rate 1 - q^2, the lower particle moves
    calls = []

    def f(n):
        calls.append(n.coords)
        return {(0, -1): 5.0, (0, 0): 2.0}.get(n.coords, 0.0)

    gk = GeneratorKind("bwd", "qboson", Q)
    v = generator_apply(gk, f, WeylVector((0, 0)))
    assert v == pytest.approx((1 - Q**2) * (5.0 - 2.0))


def test_forward_single_particle():
    gk = GeneratorKind("fwd", "qboson", Q)
    f = lambda n: {(1,): 3.0, (0,): 1.0}.get(n.coords, 0.0)
    # rate 1-q in, rate 1-q out
    assert generator_apply(gk, f, WeylVector((0,))) == pytest.approx((1 - Q) * (3.0 - 1.0))


def test_cfwd_is_conjugated_forward():
    from qboson.qcore import cq_weight

    rng = np.random.default_rng(0)
    for model, eps in (("qboson", 1.0), ("eps", 0.4)):
        for _ in range(60):
            k = int(rng.integers(1, 5))
            coords = tuple(sorted(rng.integers(-4, 5, size=k).tolist(), reverse=True))
            n = WeylVector(coords)
            table = {}

            def f(m):
                if m not in table:
                    table[m] = complex(*np.random.default_rng(hash(m.coords) % 2**32).normal(size=2))
                return table[m]

            gkc = GeneratorKind("cfwd", model, Q, eps)
            gkf = GeneratorKind("fwd", model, Q, eps)
            lhs = generator_apply(gkc, f, n)
            # C_q A^fwd C_q^{-1}
            g = lambda m: f(m) / cq_weight(m, Q)
            rhs = cq_weight(n, Q) * generator_apply(gkf, g, n)
            assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_free_apply_one_particle_eigen():
    z = 0.35 + 0.1j
    u = lambda c: (1 - z) ** (-c[0])
    gk = GeneratorKind("free-bwd", "qboson", Q)
    v = free_apply(gk, u, (3,))
    assert v == pytest.approx((Q - 1) * z * u((3,)))


def test_free_equals_interacting_on_chamber():
    # when the boundary conditions hold, free and interacting agree
    rng = np.random.default_rng(1)
    z = [0.4 + 0.2j, 1.7 - 0.4j, -0.6 + 0.9j]
    fam = EigenFamily("qboson-left", Q)
    import itertools

    def u(coords):
        total = 0.0 + 0.0j
        for perm in itertools.permutations(range(3)):
            term = 1.0 + 0.0j
            for j in range(3):
                term *= (1 - z[perm[j]]) ** (-coords[j])
            for b in range(3):
                for a in range(b + 1, 3):
                    term *= fam.scattering(z[perm[a]], z[perm[b]])
            total += term
        return total

    for _ in range(20):
        coords = tuple(sorted(rng.integers(-3, 4, size=3).tolist(), reverse=True))
        n = WeylVector(coords)
        a = free_apply(GeneratorKind("free-bwd", "qboson", Q), u, n)
        b = generator_apply(GeneratorKind("bwd", "qboson", Q), lambda m: u(m.coords), n)
        assert abs(a - b) <= 1e-11 * (1 + abs(a))


def test_table_fn_domain_margin():
    f = table_fn({(0,): 1.0, (1,): 2.0})
    assert f((0,)) == 1.0
    with pytest.raises(DomainMarginError):
        f((2,))


def test_boundary_residual_diagonal_requirement():
    gk = GeneratorKind("free-bwd", "qboson", Q)
    with pytest.raises(ValueError):
        boundary_residual(gk, lambda c: 1.0, 0, (2, 1))


def test_matrix_k1_lower_tridiagonal():
    box = StateBox(1, 0, 2)
    rm = matrix_on_box(GeneratorKind("bwd", "qboson", Q), box)
    dense = rm.to_dense().real
    # states are (0,), (1,), (2,): acting on f, row n picks f(n-1) with
    # rate 1 - q, i.e. the subdiagonal in the ascending state order
    expect = np.array([
        [-(1 - Q), 0, 0],
        [(1 - Q), -(1 - Q), 0],
        [0, (1 - Q), -(1 - Q)],
    ])
    assert np.allclose(dense, expect)


def test_matrix_transpose_and_pt():
    box = StateBox(2, -2, 2)
    B = matrix_on_box(GeneratorKind("bwd", "qboson", Q), box).to_dense()
    F = matrix_on_box(GeneratorKind("fwd", "qboson", Q), box).to_dense()
    assert np.abs(B.T - F).max() < 1e-14
    perm = reflection_permutation(box)
    C = cluster_weight_diagonal(GeneratorKind("bwd", "qboson", Q), box)
    Rm = np.zeros_like(B)
    Rm[np.arange(len(perm)), perm] = 1.0
    RC = Rm @ np.diag(C)
    assert np.abs(B - RC @ F @ np.linalg.inv(RC)).max() < 1e-12


def test_forward_matrix_stochasticity():
    box = StateBox(2, -3, 3, absorbing=True)
    rm = matrix_on_box(GeneratorKind("fwd", "qboson", Q), box)
    dense = rm.to_dense().real
    off = dense - np.diag(np.diag(dense))
    assert off.min() >= 0
    colsums = dense.sum(axis=0) + rm.absorbing_row
    assert np.abs(colsums).max() < 1e-13


def test_uniformization_t0_and_poisson():
    gk = GeneratorKind("fwd", "qboson", Q)
    y = WeylVector((0,))
    box = StateBox(1, -20, 1)
    pmf = uniformized_transition(gk, 0.0, y, box)
    assert pmf[y] == pytest.approx(1.0)
    t = 0.8
    pmf = uniformized_transition(gk, t, y, box, tol=1e-13)
    lam = (1 - Q) * t
    for j in range(6):
        expect = math.exp(-lam) * lam**j / math.factorial(j)
        assert pmf[WeylVector((-j,))] == pytest.approx(expect, abs=1e-12)


def test_uniformization_mass_conservation():
    gk = GeneratorKind("fwd", "qboson", Q)
    y = WeylVector((1, 0))
    box = StateBox(2, -12, 2)
    pmf = uniformized_transition(gk, 0.5, y, box, tol=1e-12)
    assert pmf.total() + pmf.absorbed == pytest.approx(1.0, abs=1e-11)
    assert pmf.absorbed < 1e-11


def test_uniformization_vs_dense_exponential():
    gk = GeneratorKind("fwd", "qboson", Q)
    y = WeylVector((1, 0))
    box = StateBox(2, -8, 2)  # 66 states plus the absorbing one
    a = uniformized_transition(gk, 0.7, y, box, tol=1e-13)
    b = dense_exponential_transition(gk, 0.7, y, box)
    worst = max(abs(a[n] - b[n]) for n in b.probs)
    assert worst < 1e-9


def test_uniformization_rejects_nonstochastic():
    with pytest.raises(ValueError):
        uniformized_transition(GeneratorKind("bwd", "qboson", Q), 1.0,
                               WeylVector((0,)), StateBox(1, -2, 2))
    with pytest.raises(ValueError):
        uniformized_transition(GeneratorKind("fwd", "sd", Q), 1.0,
                               WeylVector((0,)), StateBox(1, -2, 2))


def test_extended_apply_cases():
    # no equal coordinates: reduces to the plain free generator
    vals = {(2, 0): 1.0, (1, 0): 4.0, (2, -1): -2.0, (1, -1): 0.5}
    f = lambda c: vals.get(tuple(c), 0.0)
    lhs = extended_apply(f, (2, 0), Q)
    rhs = (1 - Q) * ((f((1, 0)) - f((2, 0))) + (f((2, -1)) - f((2, 0))))
    assert lhs == pytest.approx(rhs)
    # constant on a diagonal point: zero
    assert extended_apply(lambda c: 7.0, (3, 3), Q) == pytest.approx(0.0)


def test_extended_apply_eigenrelation_on_ties():
    z = [0.4 + 0.2j, -0.7 + 0.1j]
    fam = EigenFamily("qboson-left", Q)

    def psi_ext(coords):
        return eigen_eval(fam, z, WeylVector(tuple(sorted(coords, reverse=True))))

    for coords in ((1, 1), (0, 3), (3, 0)):
        lhs = extended_apply(psi_ext, coords, Q)
        rhs = (Q - 1) * sum(z) * psi_ext(coords)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))


def test_matrix_eigenvalue_on_interior_states():
    # matrix(bwd) applied to the left eigenfunction vector reproduces the
    # eigenvalue on states whose one-step stencil stays inside the box
    rng = np.random.default_rng(11)
    for k in (1, 2, 3):
        box = StateBox(k, -5, 5)
        gk = GeneratorKind("bwd", "qboson", Q)
        M = matrix_on_box(gk, box).to_dense()
        z = rng.normal(1.4, 0.4, k) + 1j * rng.normal(0, 0.5, k)
        fam = EigenFamily("qboson-left", Q)
        vec = np.array([eigen_eval(fam, z, n) for n in box.states])
        out = M @ vec
        ev = (Q - 1) * z.sum()
        for i, n in enumerate(box.states):
            if n.coords[-1] > box.lo:  # interior: the lowered state stays inside
                assert abs(out[i] - ev * vec[i]) <= 1e-9 * (1 + abs(ev * vec[i]))


def test_rate_matrix_triplet_export(tmp_path):
    box = StateBox(1, 0, 2)
    rm = matrix_on_box(GeneratorKind("bwd", "qboson", Q), box)
    path = tmp_path / "rates.txt"
    rm.export_triplets(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("#")
    rows = [ln.split() for ln in lines[1:]]
    assert len(rows) == rm.matrix.nnz
    # rebuild and compare
    rebuilt = np.zeros((3, 3), dtype=complex)
    for r, c, v in rows:
        rebuilt[int(r), int(c)] = complex(v.strip("()"))
    assert np.allclose(rebuilt, rm.to_dense())
