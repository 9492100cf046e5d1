"""Acceptance suite: every criterion at its stated tolerance.

Each test runs the corresponding registry checks with the criterion's
parameters, prints one pass/fail line, and asserts.  Run with

    pytest tests/test_acceptance.py -v -s
"""

import time

from qboson.registry import run_check

RESULTS = []


def _criterion(number, description, reports, runtime_limit_s=None):
    elapsed = sum(r.runtime_ms for r in reports) / 1000.0
    ok = all(r.passed for r in reports)
    if runtime_limit_s is not None:
        ok = ok and elapsed < runtime_limit_s
    worst = max(reports, key=lambda r: (r.abs_err if r.passed else float("inf")))
    line = (
        f"ACCEPTANCE {number:2d} [{'PASS' if ok else 'FAIL'}] {description}: "
        f"worst abs_err={worst.abs_err:.2e} rel_err={worst.rel_err:.2e} "
        f"tail={worst.tail_bound:.2e} ({elapsed:.1f} s)"
    )
    print(line, flush=True)
    RESULTS.append(line)
    assert ok, line
    return reports


def test_criterion_01_eigenrelations():
    t0 = time.perf_counter()
    reports = [run_check("eigen-relation", tolerance=1e-10),
               run_check("sd-eigen", tolerance=1e-10)]
    _criterion(1, "eigenrelations, all families, k <= 5 (sd k <= 4)", reports,
               runtime_limit_s=10.0)
    assert time.perf_counter() - t0 < 10.0


def test_criterion_02_boundary_conditions():
    _criterion(2, "two-body boundary residuals <= 1e-12, k <= 4",
               [run_check("boundary-conditions", tolerance=1e-12)])


def test_criterion_03_pt_invariance():
    _criterion(3, "PT-invariance matrix identity, |n_i| <= 4, k <= 3",
               [run_check("pt-invariance", box_radius=4, kmax=3, tolerance=1e-12)])


def test_criterion_04_plancherel_forward():
    reports = [run_check("plancherel-forward", box_radius=4, nodes=128,
                         tolerance=1e-6)]
    _criterion(4, "delta resolution, all three modes, k in {1,2,3}, box 4",
               reports, runtime_limit_s=60.0)


def test_criterion_05_plancherel_dual():
    _criterion(5, "dual identity on Laurent monomials with certified tails",
               [run_check("plancherel-dual", max_degree=3, n_points=20,
                          tolerance=1e-6)])


def test_criterion_06_pairing():
    _criterion(6, "pairing isomorphism on 20 random compact pairs, k <= 3",
               [run_check("plancherel-pairing", pairs=20, tolerance=1e-6)])


def test_criterion_07_biorthogonality():
    _criterion(7, "spatial biorthogonality over a k <= 3 box",
               [run_check("biorthogonality-spatial", tolerance=1e-6)])


def test_criterion_08_spectral_orthogonality():
    reports = [run_check("orthogonality-spectral", tolerance=1e-5),
               run_check("eps-orthogonality", tolerance=1e-5)]
    _criterion(8, "spectral orthogonality at eps in {0, 0.25, 0.5, 1}", reports)


def test_criterion_09_residue_expansion():
    reports = [run_check("residue-expansion", n_functions=5, tolerance=1e-6),
               run_check("residue-weight", tolerance=1e-10)]
    _criterion(9, "residue expansion (k <= 4) and string residue weights", reports)


def test_criterion_10_moments():
    t0 = time.perf_counter()
    reports = [run_check("moment-step", q=0.5, t=0.5, paths=1_000_000,
                         tolerance=1e-6),
               run_check("moment-half", q=0.5, t=0.5, alpha=0.1,
                         paths=1_000_000, tolerance=1e-6)]
    _criterion(10, "duality moments: formula = solver = simulation (1e6 paths)",
               reports, runtime_limit_s=120.0)
    assert time.perf_counter() - t0 < 120.0


def test_criterion_11_transitions():
    _criterion(11, "transition kernel vs uniformization, sign, unit mass",
               [run_check("transition-prob", t=1.0, tolerance=1e-6)])


def test_criterion_12_identities():
    reports = [run_check("identity-mqinverse", m_max=6, tolerance=1e-10),
               run_check("identity-qbinomial", k_max=5, tolerance=1e-10),
               run_check("identity-halfstat-transform", k_max=3, tolerance=1e-8)]
    _criterion(12, "combinatorial identities (subset sums and transforms)", reports)


def test_criterion_13_degenerations():
    reports = [run_check("eps-deriv-relation"),
               run_check("hl-identification", tolerance=1e-12),
               run_check("cauchy-littlewood", depth=40, tolerance=1e-8),
               run_check("eps-plancherel", tolerance=1e-6),
               run_check("sd-plancherel", tolerance=1e-6),
               run_check("sd-biorthogonality", tolerance=1e-6),
               run_check("sd-moment", paths=100_000, tolerance=1e-8)]
    _criterion(13, "degenerations: derivative matrices, HL limit, semi-discrete",
               reports)


def test_zz_summary():
    print("\n" + "\n".join(RESULTS), flush=True)
    assert len(RESULTS) == 13
