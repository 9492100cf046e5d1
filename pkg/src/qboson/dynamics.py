"""Evolution solvers, particle-system simulators, and duality moment formulas.

The q-Boson system is dual to q-TASEP through the observable
prod_i q^{x_{n_i}(t) + n_i}: its expectation solves the q-Boson backward
equation, whose spectral solution is a nested contour integral.  This
module provides that moment formula for step and half-stationary initial
data, exact Doob-Gillespie simulators (single trajectories and vectorized
ensembles), spectral and matrix-ODE solvers for the backward/forward
equations, transition probabilities, and the combinatorial identities that
the half-stationary computation rests on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from qboson.contours import ContourSystem, QuadratureSpec, integrate, nested_contours
from qboson.eigenfunctions import EigenFamily, eigen_eval
from qboson.generators import (
    GeneratorKind,
    StateBox,
    matrix_on_box,
    uniformized_transition,
)
from qboson.plancherel import (
    SpectralFn,
    inverse_J,
    inverse_J_batch,
    nested_kernel_grid,
    transform_F_grid,
)
from qboson.qcore import (
    CompactFn,
    WeylVector,
    check_q,
    cq_weight_inv,
    q_factorial,
    weyl_vectors_in_box,
)


@dataclass(frozen=True)
class QTasepState:
    """Strictly decreasing particle positions x_1 > x_2 > ... > x_N."""

    positions: tuple[int, ...]
    time: float = 0.0

    def __post_init__(self):
        for a, b in zip(self.positions, self.positions[1:]):
            if a <= b:
                raise ValueError("q-TASEP positions must be strictly decreasing")

    @property
    def n_particles(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class QBosonState:
    n: WeylVector
    time: float = 0.0


@dataclass
class Trajectory:
    """Event log of one exact simulation run."""

    model: str
    seed: int
    events: list  # [(time, state tuple), ...] with strictly increasing times

    def final_state(self) -> tuple:
        return self.events[-1][1]

    def to_csv(self, path: str) -> None:
        k = len(self.events[0][1])
        with open(path, "w") as fh:
            fh.write("time," + ",".join(f"coord_{i+1}" for i in range(k)) + "\n")
            for t, state in self.events:
                fh.write(f"{t!r}," + ",".join(str(c) for c in state) + "\n")


@dataclass(frozen=True)
class MomentSpec:
    """Which q-TASEP moment to compute: E prod_i q^{x_{n_i}(t) + n_i}."""

    n: WeylVector
    t: float
    init: str = "step"  # or "half-stationary"
    alpha: float = 0.0
    q: float = 0.5
    n_particles: int | None = None

    def __post_init__(self):
        check_q(self.q)
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if self.n.coords[-1] < 1:
            raise ValueError("moment indices must satisfy n_k >= 1")
        if self.init not in ("step", "half-stationary"):
            raise ValueError(f"unknown initial data {self.init!r}")
        if self.init == "half-stationary":
            if not (0.0 <= self.alpha < self.q ** self.n.k):
                raise ValueError("half-stationary data needs 0 <= alpha < q^k")
        elif self.alpha != 0.0:
            raise ValueError("alpha only applies to half-stationary data")

    @property
    def k(self) -> int:
        return self.n.k

    @property
    def N(self) -> int:
        return self.n_particles if self.n_particles is not None else self.n.coords[0]


# ---------------------------------------------------------------------------
# Exact simulation


def _qboson_rates(n: WeylVector, q: float):
    """(rate, mover index) per cluster: the lowest particle of a size-c
    cluster moves left at rate 1 - q^c."""
    from qboson.qcore import cluster_decompose

    cd = cluster_decompose(n)
    out = []
    pos = 0
    for c in cd.sizes:
        pos += c
        out.append((1.0 - q**c, pos - 1))
    return out


def _qtasep_rates(x: tuple[int, ...], q: float):
    """Jump rates 1 - q^gap; the leading particle sees an infinite gap."""
    rates = [1.0]
    for i in range(1, len(x)):
        gap = x[i - 1] - x[i] - 1
        rates.append(1.0 - q**gap if gap > 0 else 0.0)
    return rates


def simulate(model: str, init, t: float, seed: int, q: float = 0.5) -> Trajectory:
    """Exact Doob-Gillespie simulation of one trajectory up to time t.

    ``init`` is a WeylVector (q-Boson) or a tuple of strictly decreasing
    positions (q-TASEP).  The event log records the initial state and every
    jump; the trajectory is a deterministic function of the seed.
    """
    check_q(q)
    if t < 0:
        raise ValueError("t must be >= 0")
    rng = np.random.default_rng(seed)
    if model == "qboson":
        state = init if isinstance(init, WeylVector) else WeylVector(tuple(init))
        coords = state.coords
    elif model == "qtasep":
        coords = tuple(init.positions) if isinstance(init, QTasepState) else tuple(init)
        QTasepState(coords)
    else:
        raise ValueError(f"unknown model {model!r}")

    now = 0.0
    events = [(0.0, coords)]
    while True:
        if model == "qboson":
            pairs = _qboson_rates(WeylVector(coords), q)
            rates = [r for r, _ in pairs]
        else:
            rates = _qtasep_rates(coords, q)
        total = sum(rates)
        if total <= 0:
            break
        now += rng.exponential(1.0 / total)
        if now >= t:
            break
        u = rng.uniform(0.0, total)
        acc = 0.0
        chosen = len(rates) - 1
        for i, r in enumerate(rates):
            acc += r
            if u < acc:
                chosen = i
                break
        c = list(coords)
        if model == "qboson":
            c[pairs[chosen][1]] -= 1
        else:
            c[chosen] += 1
        coords = tuple(c)
        events.append((now, coords))
    return Trajectory(model=model, seed=seed, events=events)


def sample_q_geometric(alpha: float, q: float, size: int, rng: np.random.Generator,
                       tail: float = 1e-14) -> np.ndarray:
    """Draw from P(X = j) = (alpha; q)_inf alpha^j / (q; q)_j by inverse CDF."""
    check_q(q)
    if alpha == 0.0:
        return np.zeros(size, dtype=int)
    if not (0.0 < alpha < 1.0):
        raise ValueError("need 0 <= alpha < 1")
    # (alpha; q)_inf via the finite product until factors hit 1.
    prefac, aq = 1.0, alpha
    while aq > 1e-18:
        prefac *= 1.0 - aq
        aq *= q
    pmf = []
    term = prefac
    denom = 1.0
    j = 0
    while term > tail or j < 2:
        pmf.append(term)
        j += 1
        denom *= 1.0 - q**j
        term = prefac * alpha**j / denom
        if j > 10_000:
            break
    cdf = np.cumsum(pmf)
    u = rng.uniform(0.0, 1.0, size=size)
    return np.searchsorted(cdf, u * cdf[-1], side="right").astype(int)


def qtasep_sample_ensemble(N: int, init: str, alpha: float, q: float, t: float,
                           paths: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized Gillespie over all paths; returns final positions (paths, N).

    All paths advance through synchronized vector steps but with their own
    exponential clocks, so the sampled law is the exact jump chain.
    """
    x = np.empty((paths, N), dtype=np.int64)
    x[:] = -np.arange(1, N + 1)
    if init == "half-stationary":
        gaps = sample_q_geometric(alpha, q, paths * N, rng).reshape(paths, N)
        x = -np.cumsum(gaps + 1, axis=1)
    elif init != "step":
        raise ValueError(f"unknown initial data {init!r}")

    now = np.zeros(paths)
    active = np.ones(paths, dtype=bool)
    qpow = q ** np.arange(0, 64)
    while active.any():
        idx = np.nonzero(active)[0]
        xa = x[idx]
        gaps = np.empty_like(xa)
        gaps[:, 0] = 63  # effectively infinite: rate 1 - q^63 ~ 1
        if N > 1:
            gaps[:, 1:] = xa[:, :-1] - xa[:, 1:] - 1
        rates = 1.0 - qpow[np.minimum(gaps, 63)]
        total = rates.sum(axis=1)
        dt = rng.exponential(1.0, size=idx.size) / total
        now[idx] += dt
        still = now[idx] < t
        if not still.any():
            active[idx] = False
            continue
        jdx = idx[still]
        r = rates[still]
        cum = np.cumsum(r, axis=1)
        u = rng.uniform(0.0, 1.0, size=jdx.size) * cum[:, -1]
        chosen = (u[:, None] >= cum).sum(axis=1)
        x[jdx, chosen] += 1
        active[idx[~still]] = False
    return x


def qboson_sample_ensemble(n0: WeylVector, q: float, t: float, paths: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Vectorized q-Boson sampler; returns final ordered coordinates (paths, k).

    Uses the per-particle rate split (1-q) q^depth, depth = number of
    same-site particles with smaller index; summed over a cluster this is
    the cluster rate 1 - q^c, and the move is applied to the lowest-index
    particle of the chosen particle's cluster so coordinates stay ordered.
    """
    k = n0.k
    x = np.tile(np.asarray(n0.coords, dtype=np.int64), (paths, 1))
    now = np.zeros(paths)
    active = np.ones(paths, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        xa = x[idx]
        depth = np.zeros_like(xa)
        for i in range(1, k):
            same = xa[:, i] == xa[:, i - 1]
            depth[:, i] = np.where(same, depth[:, i - 1] + 1, 0)
        rates = (1.0 - q) * q**depth
        total = rates.sum(axis=1)
        dt = rng.exponential(1.0, size=idx.size) / total
        now[idx] += dt
        still = now[idx] < t
        if not still.any():
            active[idx] = False
            continue
        jdx = idx[still]
        xs = xa[still]
        r = rates[still]
        cum = np.cumsum(r, axis=1)
        u = rng.uniform(0.0, 1.0, size=jdx.size) * cum[:, -1]
        chosen = (u[:, None] >= cum).sum(axis=1)
        # Move the last member of the chosen particle's cluster.
        mover = chosen.copy()
        for i in range(1, k):
            extend = (mover == i - 1) & (xs[:, i] == xs[np.arange(xs.shape[0]), mover])
            mover = np.where(extend, i, mover)
        x[jdx, mover] -= 1
        active[idx[~still]] = False
    return x


# ---------------------------------------------------------------------------
# Duality initial data and moment formulas


def h0_build(kind: str, k: int, N: int, q: float, alpha: float = 0.0):
    """Duality initial data: a truncated CompactFn and the closed-form evaluator.

    step: prod_i 1_{n_i > 0} (truncated to n_1 <= N);
    half-stationary: prod_j 1_{n_j > 0} (1 - alpha/q^j)^{-n_j}.
    """
    check_q(q)
    if kind == "step":
        def evaluator(n: WeylVector) -> float:
            return 1.0 if n.coords[-1] > 0 else 0.0
    elif kind == "half-stationary":
        if not (0.0 <= alpha < q**k):
            raise ValueError("half-stationary data needs 0 <= alpha < q^k")

        def evaluator(n: WeylVector) -> float:
            if n.coords[-1] <= 0:
                return 0.0
            out = 1.0
            for j, nj in enumerate(n.coords, start=1):
                out *= (1.0 - alpha / q**j) ** (-nj)
            return out
    else:
        raise ValueError(f"unknown initial data {kind!r}")

    table = {n: evaluator(n) for n in weyl_vectors_in_box(k, 1, N)}
    return CompactFn(table), evaluator


def moment_contours(spec: MomentSpec, r_k: float = 0.2, margin: float = 0.1) -> ContourSystem:
    pole = 0.0 if spec.init == "step" else spec.alpha / spec.q
    return nested_contours(spec.k, spec.q, r_k=r_k, margin=margin, exclusions=(pole,))


def moment_formula(spec: MomentSpec, quad: QuadratureSpec | None = None,
                   cs: ContourSystem | None = None, return_error: bool = False):
    """Nested-contour moment formula for E prod_i q^{x_{n_i}(t) + n_i}.

    (-1)^k q^{k(k-1)/2} times the k-fold integral of
    prod_{A<B} (z_A - z_B)/(z_A - q z_B) prod_j (1 - z_j)^{-n_j}
    e^{(q-1) t z_j} / (z_j - pole), pole 0 for step and alpha/q for
    half-stationary data; the contours must exclude the pole.
    """
    q, t, k = spec.q, spec.t, spec.k
    if cs is None:
        cs = moment_contours(spec)
    if quad is None:
        quad = QuadratureSpec(256 if k <= 2 else 128)
    pole = 0.0 if spec.init == "step" else spec.alpha / q

    def integrand(zs):
        kern = nested_kernel_grid(zs, q)
        rest = None
        for j, z in enumerate(zs):
            f = (1.0 - z) ** (-spec.n.coords[j]) * np.exp((q - 1.0) * t * z) / (z - pole)
            rest = f if rest is None else rest * f
        return kern * rest

    res = integrate(cs, integrand, quad)
    scale = (-1.0) ** k * q ** (k * (k - 1) / 2.0)
    value = scale * res.value
    if return_error:
        return value, scale * res.error_estimate
    return value


def moment_mc(spec: MomentSpec, paths: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo moment over independent q-TASEP paths: (estimate, stderr)."""
    if paths < 1:
        raise ValueError("paths must be >= 1")
    rng = np.random.default_rng(seed)
    q = spec.q
    x = qtasep_sample_ensemble(spec.N, spec.init, spec.alpha, q, spec.t, paths, rng)
    obs = np.ones(paths)
    for ni in spec.n.coords:
        obs = obs * q ** (x[:, ni - 1] + ni).astype(float)
    est = float(obs.mean())
    se = float(obs.std(ddof=1) / math.sqrt(paths)) if paths > 1 else float("inf")
    return est, se


# ---------------------------------------------------------------------------
# Kolmogorov equation solvers


def _time_weight(q: float, t: float, model: str = "qboson"):
    def extra(zs):
        ssum = None
        for z in zs:
            ssum = z if ssum is None else ssum + z
        if model == "sd":
            return np.exp(t * (ssum - len(zs)))
        return np.exp((q - 1.0) * t * ssum)

    return extra


def solve_evolution(direction: str, method: str, f0: CompactFn, t: float, n: WeylVector,
                    q: float, mode: str = "nested", cs: ContourSystem | None = None,
                    quad: QuadratureSpec | None = None) -> complex:
    """Solve the backward or forward equation at time t and state n.

    method "spectral": the eigenfunction-decomposition integral with the
    exponential time weight.  method "ode-oracle": the triangular matrix
    system on a box; exact for the backward flow (states exiting below the
    support of f0 carry value 0), absorbing with a leakage check for the
    forward flow.
    """
    check_q(q)
    if t < 0:
        raise ValueError("t must be >= 0")
    k = f0.k
    if method == "spectral":
        vals = solve_evolution_batch(direction, f0, t, [n], q, mode=mode, cs=cs, quad=quad)
        return complex(vals[0])

    if method != "ode-oracle":
        raise ValueError(f"unknown method {method!r}")

    supp = f0.support()
    if not supp:
        return 0.0 + 0.0j
    lo_s = min(m.coords[-1] for m in supp)
    hi_s = max(m.coords[0] for m in supp)
    if direction == "backward":
        box = StateBox(k, lo_s, max(hi_s, n.coords[0]))
        gk = GeneratorKind("bwd", "qboson", q)
        rm = matrix_on_box(gk, box)
        idx = box.index()
        v0 = np.zeros(box.size, dtype=complex)
        for m, val in f0.items():
            v0[idx[m]] = val
        vt = expm(t * rm.to_dense()) @ v0
        if n not in idx:
            return 0.0 + 0.0j  # below the box the solution vanishes exactly
        return complex(vt[idx[n]])
    if direction == "forward":
        # the forward flow transports mass downward (particles only jump
        # left), so a truncation from below is exact for in-box values:
        # mass past the bottom edge can never re-enter.  The absorbing row
        # still measures it so the truncation stays observable.
        margin = 2 + int(math.ceil(k * t + 4 * math.sqrt(k * t + 1.0)))
        box = StateBox(k, min(lo_s, n.coords[-1]) - margin, max(hi_s, n.coords[0]) + 1,
                       absorbing=True)
        gk = GeneratorKind("fwd", "qboson", q)
        rm = matrix_on_box(gk, box)
        size = box.size
        A = np.zeros((size + 1, size + 1))
        A[:size, :size] = rm.to_dense().real
        A[size, :size] = rm.absorbing_row
        idx = box.index()
        if n not in idx:
            raise ValueError("target state outside the oracle box")
        v0 = np.zeros(size + 1, dtype=complex)
        for m, val in f0.items():
            v0[idx[m]] = val
        vt = expm(t * A) @ v0
        return complex(vt[idx[n]])
    raise ValueError(f"unknown direction {direction!r}")


def solve_evolution_batch(direction: str, f0: CompactFn, t: float, ns: Sequence[WeylVector],
                          q: float, mode: str = "nested", cs: ContourSystem | None = None,
                          quad: QuadratureSpec | None = None) -> np.ndarray:
    """Spectral solver evaluated at many states with one grid pass."""
    check_q(q)
    k = f0.k
    if cs is None:
        cs = nested_contours(k, q, r_k=0.3)
    if quad is None:
        quad = QuadratureSpec(128)
    extra = _time_weight(q, t)

    if direction == "backward":
        G = lambda zs: transform_F_grid(f0, list(zs), q)
        return inverse_J_batch(G, list(ns), mode, cs, quad, q, extra_grid=extra)
    if direction == "forward":
        G = lambda zs: transform_F_grid(f0, list(zs), q, side="left")
        refl = [n.reflect() for n in ns]
        vals = inverse_J_batch(G, refl, mode, cs, quad, q, extra_grid=extra)
        pref = np.array(
            [q ** (-k * (k - 1) / 2.0) * cq_weight_inv(n, q) for n in ns], dtype=complex
        )
        # the reflected-exponent integral carries (1-z)^{-m_j-1} with
        # m = reflect(n), i.e. exactly (1-z_j)^{n_{k-j+1}-1}
        return pref * vals
    raise ValueError(f"unknown direction {direction!r}")


def transition_probability(method: str, y: WeylVector, x: WeylVector, t: float,
                           q: float, tol: float = 1e-10) -> complex:
    """P(state x at time t | state y at time 0) for the q-Boson system."""
    check_q(q)
    if t < 0:
        raise ValueError("t must be >= 0")
    if method == "spectral":
        return solve_evolution("forward", "spectral", CompactFn.delta(y), t, x, q)
    if method == "uniformization":
        k = y.k
        # the chain descends: pad the box below
        margin = 3 + int(math.ceil(k * t + 6 * math.sqrt(k * t + 1.0)))
        box = StateBox(k, min(x.coords[-1], y.coords[-1]) - margin,
                       max(x.coords[0], y.coords[0]) + 1)
        pmf = uniformized_transition(GeneratorKind("fwd", "qboson", q), t, y, box, tol=tol)
        return complex(pmf[x])
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Combinatorial identities


@dataclass
class IdentityResult:
    name: str
    params: dict
    lhs: complex
    rhs: complex
    tail_bound: float = 0.0

    @property
    def abs_err(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_err(self) -> float:
        return self.abs_err / max(1.0, abs(self.rhs))


def identity_mqinverse(m: int, q: float, z: Sequence[complex]) -> IdentityResult:
    """Symmetrization identity: the S_m sum of strict-pair scattering ratios
    with shift q^{-1} equals m!_{q^{-1}}."""
    check_q(q)
    z = [complex(v) for v in z]
    if len(z) != m:
        raise ValueError("need m spectral values")
    lhs = 0.0 + 0.0j
    for sigma in itertools.permutations(range(m)):
        term = 1.0 + 0.0j
        for b in range(m):
            for a in range(b + 1, m):
                za, zb = z[sigma[a]], z[sigma[b]]
                term *= (za - zb / q) / (za - zb)
        lhs += term
    rhs = q ** (-m * (m - 1) / 2.0) * q_factorial(m, q)
    return IdentityResult("identity-mqinverse", {"m": m, "q": q}, lhs, rhs)


def identity_qbinomial(k: int, q: float, alpha: float, z: Sequence[complex]) -> IdentityResult:
    """q-deformed binomial expansion over ordered subset splittings (I, J),
    with the q^{-m(m-1)/2} weight carried by m = |I|."""
    check_q(q)
    z = [complex(v) for v in z]
    if len(z) != k:
        raise ValueError("need k spectral values")
    lhs = 0.0 + 0.0j
    for bits in itertools.product((0, 1), repeat=k):
        I = [i for i in range(k) if bits[i]]
        J = [j for j in range(k) if not bits[j]]
        m = len(I)
        term = q ** (-m * (m - 1) / 2.0) + 0.0j
        for i in I:
            for j in J:
                term *= (z[i] - z[j] / q) / (z[i] - z[j])
        for i in I:
            term *= z[i] - alpha / q
        for j in J:
            term *= 1.0 - z[j]
        lhs += term
    rhs = 1.0 + 0.0j
    for ell in range(1, k + 1):
        rhs *= 1.0 - alpha / q**ell
    return IdentityResult("identity-qbinomial", {"k": k, "q": q, "alpha": alpha}, lhs, rhs)


def identity_halfstat_transform(k: int, q: float, alpha: float, z: Sequence[complex],
                                depth: int = 40) -> IdentityResult:
    """Forward transform of the half-stationary data against its closed form.

    The series sum_{n, n_k >= 1} Psi^r_z(n) prod_j (1 - alpha/q^j)^{-n_j}
    is truncated at n_1 <= depth with a certified geometric tail: each term
    is bounded by C rho^{sum n_j} with rho = max_{i,j} |1-z_i| / (1-alpha/q^j).
    """
    check_q(q)
    z = [complex(v) for v in z]
    if not (0.0 <= alpha < q**k):
        raise ValueError("need 0 <= alpha < q^k")
    fam = EigenFamily("qboson-right", q)
    weights = [1.0 - alpha / q**j for j in range(1, k + 1)]
    rho = max(abs(1.0 - zi) for zi in z) / min(weights)
    if rho >= 1.0:
        raise ValueError("series diverges for these z: need max |1-z_i| < min_j (1-alpha/q^j)")
    lhs = 0.0 + 0.0j
    for n in weyl_vectors_in_box(k, 1, depth):
        w = 1.0
        for j, nj in enumerate(n.coords):
            w *= weights[j] ** (-nj)
        lhs += w * eigen_eval(fam, z, n)
    rhs = (-1.0) ** k * q ** (k * (k - 1) / 2.0)
    for j, zj in enumerate(z):
        rhs *= (1.0 - zj) / (zj - alpha / q)
    # Tail certificate: |C_q^{-1}| max_sigma |scattering| times the count of
    # chamber points at each total size s > depth, summed geometrically.
    scat_max = 0.0
    for sigma in itertools.permutations(range(k)):
        term = 1.0
        for b in range(k):
            for a in range(b + 1, k):
                za, zb = z[sigma[a]], z[sigma[b]]
                term *= abs((za - zb / q) / (za - zb))
        scat_max = max(scat_max, term)
    cmax = max(abs(cq_weight_inv(m, q)) for m in weyl_vectors_in_box(k, 0, k))
    C = cmax * math.factorial(k) * scat_max
    tail, s = 0.0, depth + 1
    while True:
        shell = math.comb(s - 1, k - 1) * rho**s
        tail += shell
        s += 1
        if shell < 1e-22 * (1.0 + tail) or s > depth + 100000:
            break
    tail *= C
    return IdentityResult(
        "identity-halfstat-transform",
        {"k": k, "q": q, "alpha": alpha, "depth": depth},
        lhs,
        rhs,
        tail_bound=tail,
    )


def combinatorial_identity(name: str, **params) -> IdentityResult:
    """Dispatch by identity name: mqinverse | qbinomial | halfstat-transform."""
    if name == "mqinverse":
        return identity_mqinverse(**params)
    if name == "qbinomial":
        return identity_qbinomial(**params)
    if name == "halfstat-transform":
        return identity_halfstat_transform(**params)
    raise ValueError(f"unknown identity {name!r}")
