import math

import numpy as np
import pytest

from qboson.contours import ContourError
from qboson.dynamics import (
    MomentSpec,
    QTasepState,
    combinatorial_identity,
    h0_build,
    identity_halfstat_transform,
    moment_contours,
    moment_formula,
    moment_mc,
    qboson_sample_ensemble,
    qtasep_sample_ensemble,
    sample_q_geometric,
    simulate,
    solve_evolution,
    transition_probability,
)
from qboson.generators import GeneratorKind, StateBox, uniformized_transition
from qboson.qcore import CompactFn, WeylVector, q_pochhammer, weyl_vectors_in_box

Q = 0.5


def test_moment_spec_validation():
    MomentSpec(WeylVector((2, 1)), 0.5, "step", q=Q)
    with pytest.raises(ValueError):
        MomentSpec(WeylVector((1, 0)), 0.5, "step", q=Q)  # n_k >= 1
    with pytest.raises(ValueError):
        MomentSpec(WeylVector((1,)), -1.0, "step", q=Q)
    with pytest.raises(ValueError):
        MomentSpec(WeylVector((2, 1)), 0.5, "half-stationary", alpha=0.3, q=Q)  # >= q^k
    with pytest.raises(ValueError):
        MomentSpec(WeylVector((1,)), 0.5, "step", alpha=0.1, q=Q)


def test_step_moment_k1_closed_form():
    for t in (0.2, 1.0, 2.5):
        spec = MomentSpec(WeylVector((1,)), t, "step", q=Q)
        assert moment_formula(spec) == pytest.approx(math.exp((Q - 1) * t), abs=1e-12)


def test_moment_t0_is_one_for_step():
    for n in ((1,), (2, 1), (3, 2)):
        spec = MomentSpec(WeylVector(n), 0.0, "step", q=Q)
        assert moment_formula(spec) == pytest.approx(1.0, abs=1e-10)


def test_half_moment_t0_geometric():
    spec = MomentSpec(WeylVector((1,)), 0.0, "half-stationary", alpha=0.1, q=Q)
    assert moment_formula(spec) == pytest.approx(1.0 / (1.0 - 0.1 / Q), abs=1e-10)


def test_moment_contour_invariance():
    spec = MomentSpec(WeylVector((2, 1)), 0.5, "half-stationary", alpha=0.1, q=Q)
    a = moment_formula(spec)
    b = moment_formula(spec, cs=moment_contours(spec, r_k=0.13, margin=0.12))
    assert abs(a - b) < 1e-8


def test_moment_infeasible_contours():
    # radii big enough that the outermost circle swallows the pole alpha/q
    spec = MomentSpec(WeylVector((2, 1)), 0.5, "half-stationary", alpha=0.1, q=Q)
    with pytest.raises(ContourError):
        moment_contours(spec, r_k=0.4, margin=0.41)


def test_h0_build():
    f, ev = h0_build("step", 2, 3, Q)
    assert ev(WeylVector((2, 1))) == 1.0
    assert ev(WeylVector((2, 0))) == 0.0
    assert ev(WeylVector((2, -1))) == 0.0
    assert set(f.support()) == set(weyl_vectors_in_box(2, 1, 3))
    f, ev = h0_build("half-stationary", 2, 3, Q, 0.1)
    assert ev(WeylVector((2, 1))) == pytest.approx(2.6041666666666665)
    fh0, ev0 = h0_build("half-stationary", 2, 3, Q, 0.0)
    _, evs = h0_build("step", 2, 3, Q)
    for n in weyl_vectors_in_box(2, -1, 3):
        assert ev0(n) == evs(n)
    with pytest.raises(ValueError):
        h0_build("half-stationary", 2, 3, Q, 0.3)


def test_simulate_qboson_trajectory():
    traj = simulate("qboson", WeylVector((1, 0)), 1.5, seed=42, q=Q)
    assert traj.events[0][0] == 0.0
    times = [t for t, _ in traj.events]
    assert times == sorted(times)
    for t, state in traj.events:
        assert tuple(sorted(state, reverse=True)) == state
    # same seed reproduces
    again = simulate("qboson", WeylVector((1, 0)), 1.5, seed=42, q=Q)
    assert again.events == traj.events


def test_simulate_t0():
    traj = simulate("qtasep", (-1, -2), 0.0, seed=1, q=Q)
    assert len(traj.events) == 1


def test_qtasep_state_validation():
    QTasepState((3, 1, 0))
    with pytest.raises(ValueError):
        QTasepState((1, 1))


def test_trajectory_csv(tmp_path):
    traj = simulate("qboson", WeylVector((0,)), 2.0, seed=3, q=Q)
    path = tmp_path / "traj.csv"
    traj.to_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "time,coord_1"
    assert len(lines) == len(traj.events) + 1


def test_single_particle_displacement_poisson():
    # q-Boson: one particle jumps left at rate 1-q
    rng = np.random.default_rng(7)
    t, paths = 1.2, 40_000
    x = qboson_sample_ensemble(WeylVector((0,)), Q, t, paths, rng)
    disp = -x[:, 0]
    lam = (1 - Q) * t
    assert abs(disp.mean() - lam) < 4 * math.sqrt(lam / paths)
    # q-TASEP: leading particle jumps right at rate 1 (infinite gap)
    x = qtasep_sample_ensemble(1, "step", 0.0, Q, t, paths, rng)
    disp = x[:, 0] + 1
    assert abs(disp.mean() - t) < 4 * math.sqrt(t / paths)


def test_q_geometric_sampler_moments():
    rng = np.random.default_rng(8)
    alpha = 0.2
    draws = sample_q_geometric(alpha, Q, 200_000, rng)
    # E q^{-X} = 1/(1 - alpha/q) by the q-binomial theorem
    emp = np.mean(Q ** (-draws.astype(float)))
    assert abs(emp - 1 / (1 - alpha / Q)) < 0.02
    # pmf at 0: (alpha; q)_inf
    p0 = (draws == 0).mean()
    target = float(np.real(q_pochhammer(alpha, Q, 60)))
    assert abs(p0 - target) < 0.01


def test_moment_mc_matches_formula():
    spec = MomentSpec(WeylVector((2, 1)), 0.5, "step", q=Q)
    est, se = moment_mc(spec, 200_000, seed=11)
    v = moment_formula(spec).real
    assert abs(est - v) < 4 * se
    # variance shrinks like 1/paths
    _, se_small = moment_mc(spec, 50_000, seed=12)
    assert se < se_small


def test_duality_triangle_half():
    spec = MomentSpec(WeylVector((2, 1)), 0.5, "half-stationary", alpha=0.1, q=Q)
    vf = moment_formula(spec)
    f0, _ = h0_build("half-stationary", 2, 2, Q, 0.1)
    vb = solve_evolution("backward", "spectral", f0, 0.5, WeylVector((2, 1)), Q)
    vo = solve_evolution("backward", "ode-oracle", f0, 0.5, WeylVector((2, 1)), Q)
    assert abs(vf - vb) < 1e-8
    assert abs(vf - vo) < 1e-8
    est, se = moment_mc(spec, 150_000, seed=13)
    assert abs(est - vf.real) < 4 * se


def test_backward_solver_poisson_chain():
    f0 = CompactFn.delta(WeylVector((0,)))
    lam_t = (1 - Q) * 0.8
    for n in range(0, 4):
        v = solve_evolution("backward", "spectral", f0, 0.8, WeylVector((n,)), Q)
        assert v == pytest.approx(math.exp(-lam_t) * lam_t**n / math.factorial(n), abs=1e-11)
        vo = solve_evolution("backward", "ode-oracle", f0, 0.8, WeylVector((n,)), Q)
        assert vo == pytest.approx(v, abs=1e-11)


def test_transition_kernel_k1_poisson():
    y, t = WeylVector((0,)), 0.9
    lam_t = (1 - Q) * t
    for j in range(4):
        ps = transition_probability("spectral", y, WeylVector((-j,)), t, Q)
        pu = transition_probability("uniformization", y, WeylVector((-j,)), t, Q)
        expect = math.exp(-lam_t) * lam_t**j / math.factorial(j)
        assert ps == pytest.approx(expect, abs=1e-10)
        assert pu == pytest.approx(expect, abs=1e-10)
    assert transition_probability("spectral", y, y, 0.0, Q) == pytest.approx(1.0, abs=1e-10)


def test_qboson_marginals_match_uniformization():
    # total-variation distance between simulated and exact laws, k = 2
    rng = np.random.default_rng(9)
    y, t, paths = WeylVector((1, 0)), 0.6, 100_000
    x = qboson_sample_ensemble(y, Q, t, paths, rng)
    box = StateBox(2, -9, 2)
    pmf = uniformized_transition(GeneratorKind("fwd", "qboson", Q), t, y, box, tol=1e-12)
    counts: dict = {}
    for row in x:
        counts[tuple(row)] = counts.get(tuple(row), 0) + 1
    tv = 0.0
    seen = set()
    for n, p in pmf.probs.items():
        emp = counts.get(n.coords, 0) / paths
        tv += abs(emp - p)
        seen.add(n.coords)
    for c, cnt in counts.items():
        if c not in seen:
            tv += cnt / paths
    tv *= 0.5
    # 5-sigma-equivalent bound on the expected TV fluctuation
    bound = 5.0 * 0.5 * sum(math.sqrt(p / paths) for p in pmf.probs.values())
    assert tv <= bound


def test_identity_dispatch_and_values():
    r = combinatorial_identity("mqinverse", m=2, q=Q, z=[2.0, 3.0])
    assert r.lhs == pytest.approx(3.0)
    r = combinatorial_identity("qbinomial", k=2, q=Q, alpha=0.1, z=[2.0, 3.0])
    assert r.lhs == pytest.approx(0.48)
    assert r.rhs == pytest.approx(0.48)
    r = combinatorial_identity("halfstat-transform", k=1, q=Q, alpha=0.05, z=[0.9],
                               depth=100)
    assert r.lhs == pytest.approx(-0.125, abs=1e-12)
    assert r.rhs == pytest.approx(-0.125, abs=1e-12)
    assert r.tail_bound < 1e-12
    with pytest.raises(ValueError):
        combinatorial_identity("nope")


def test_halfstat_divergence_detected():
    with pytest.raises(ValueError, match="diverges"):
        identity_halfstat_transform(1, Q, 0.3, [0.05], depth=10)
