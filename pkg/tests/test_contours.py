import numpy as np
import pytest

from qboson.contours import (
    Circle,
    ContourError,
    ContourSystem,
    QuadratureSpec,
    contract_powers,
    default_inner_radius,
    gamma_prime,
    grid_nodes_weights,
    integrate,
    nested_contours,
    power_matrix,
    sd_nested_contours,
    single_gamma,
)

Q = 0.5


def test_nested_radii_recurrence():
    cs = nested_contours(2, Q, r_k=0.1, margin=0.01)
    assert [c.radius for c in cs.circles] == pytest.approx([0.56, 0.1])
    cs = nested_contours(3, Q, r_k=0.05, margin=0.01, exclusions=[0])
    assert [c.radius for c in cs.circles] == pytest.approx([0.7775, 0.535, 0.05])


def test_innermost_must_exclude_q():
    with pytest.raises(ContourError, match="innermost"):
        ContourSystem((Circle(1.0, 0.6),), "qboson-nested", q=Q)


def test_validator_soundness():
    # shrinking r_A below (1-q) + q r_B flips the validator to reject
    ContourSystem((Circle(1.0, 0.56), Circle(1.0, 0.1)), "qboson-nested", q=Q)
    with pytest.raises(ContourError, match="does not contain q"):
        ContourSystem((Circle(1.0, 0.549), Circle(1.0, 0.1)), "qboson-nested", q=Q)


def test_exclusions_enforced():
    with pytest.raises(ContourError, match="exclusion"):
        nested_contours(1, Q, r_k=0.4, exclusions=[1.2])
    cs = nested_contours(2, Q, r_k=0.2, margin=0.1, exclusions=[0.0, 0.2])
    assert cs.exclusions == (0, 0.2)


def test_single_gamma_geometry():
    cs = single_gamma(Q)
    c = cs.circles[0]
    assert c.contains_point(0.0) and c.contains_point(1.0)
    assert c.contains_scaled(c, Q)
    gp = gamma_prime(cs)
    # min |1 - w| on the outer circle exceeds max |1 - z| on gamma
    assert gp.radius - 1.0 > 1.0 + c.radius


def test_sd_nesting():
    cs = sd_nested_contours(3)
    assert cs.circles[-1].radius == pytest.approx(0.4)
    for a in range(2):
        assert cs.circles[a].contains_shifted(cs.circles[a + 1], 1.0)
    with pytest.raises(ContourError):
        sd_nested_contours(2, r_k=1.2)


def test_default_inner_radius():
    assert default_inner_radius(0.5) == pytest.approx(0.1)
    assert default_inner_radius(0.9) == pytest.approx(0.025)


def test_quadrature_spec_validation():
    QuadratureSpec(16)
    for bad in (8, 100, 0):
        with pytest.raises(ValueError):
            QuadratureSpec(bad)


def test_residue_integrals():
    spec = QuadratureSpec(16)
    cs = single_gamma(Q, radius=1.2)
    r = integrate(cs, lambda zs: 1.0 / zs[0], spec)
    assert r.value == pytest.approx(1.0, abs=1e-13)
    cs1 = nested_contours(1, Q, r_k=0.3)
    r = integrate(cs1, lambda zs: 1.0 / (1.0 - zs[0]), spec)
    assert r.value == pytest.approx(-1.0, abs=1e-13)


def test_two_fold_product_residue():
    # independent residues multiply across the product contour
    circles = (Circle(0.0, 1.2), Circle(0.0, 1.2))
    cs = ContourSystem(circles, "qboson-single", q=Q)
    r = integrate(cs, lambda zs: 1.0 / (zs[0] * zs[1]), QuadratureSpec(32))
    assert r.value == pytest.approx(1.0, abs=1e-12)


def test_integrand_nonfinite_detected():
    cs = single_gamma(Q, radius=1.2)
    bad_node = cs.circles[0].nodes(16)[3]

    def bad(zs):
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / (zs[0] - bad_node)

    with pytest.raises(FloatingPointError):
        integrate(cs, bad, QuadratureSpec(16))


def test_exponential_error_decay():
    # analytic integrand with a pole 15% outside the circle: doubling the
    # node count must collapse the embedded error estimate by >= 1e3
    cs = nested_contours(2, Q, r_k=0.3)
    pole0 = 1.0 + 1.35 * cs.circles[0].radius
    pole1 = 1.0 + 1.35 * cs.circles[1].radius

    def f(zs):
        return ((1 - zs[0]) ** -2 * np.exp(zs[0]) / (zs[0] - pole0)
                * (1 - zs[1]) ** -2 * np.exp(zs[1]) / (zs[1] - pole1))

    e64 = integrate(cs, f, QuadratureSpec(64)).error_estimate
    e128 = integrate(cs, f, QuadratureSpec(128)).error_estimate
    assert e64 > 1e3 * e128
    v128 = integrate(cs, f, QuadratureSpec(128)).value
    v256 = integrate(cs, f, QuadratureSpec(256)).value
    assert abs(v128 - v256) < 1e-12 * (1 + abs(v256))


def test_phase_rotation_invariance():
    cs = nested_contours(2, Q, r_k=0.3)

    def f(zs):
        return (1 - zs[0]) ** -2 * (1 - zs[1]) ** -1 * np.exp(zs[0] * zs[1])

    a = integrate(cs, f, QuadratureSpec(128, phase=0.0)).value
    b = integrate(cs, f, QuadratureSpec(128, phase=0.77)).value
    assert abs(a - b) <= 1e-10 * (1 + abs(a))


def test_axis_phase_offsets_distinct_nodes():
    cs = single_gamma(Q, k=3)
    nodes, _ = grid_nodes_weights(cs, QuadratureSpec(32))
    for a in range(3):
        for b in range(a + 1, 3):
            assert np.min(np.abs(nodes[a][:, None] - nodes[b][None, :])) > 1e-4


def test_power_matrix_and_contract():
    rng = np.random.default_rng(0)
    base = rng.normal(size=5) + 1j * rng.normal(size=5) + 3.0
    P = power_matrix(base, -2, 3)
    for i, e in enumerate(range(-2, 4)):
        assert np.allclose(P[:, i], base**e)
    T = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    b2 = rng.normal(size=7) + 2.5
    R = contract_powers(T, [base, b2], [(-1, 1), (0, 2)])
    for i, e1 in enumerate(range(-1, 2)):
        for j, e2 in enumerate(range(0, 3)):
            brute = np.sum(T * base[:, None] ** e1 * b2[None, :] ** e2)
            assert abs(R[i, j] - brute) < 1e-10 * (1 + abs(brute))


def test_describe_roundtrip():
    cs = nested_contours(2, Q, exclusions=[0.0])
    d = cs.describe()
    assert d["family"] == "qboson-nested"
    assert len(d["circles"]) == 2
    assert d["exclusions"] == [[0.0, 0.0]]
