"""Validation suites: duality, projection, oracle, stability.

Each suite returns a report ``{"suite", "passed", "checks": [...]}`` where
every check records the measured value next to its tolerance.  Criterion
numbers refer to the acceptance list in the README.
"""
from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .dual import (
    DwDualParams,
    FvDualParams,
    block_coeff_raw,
    dw_s_decay,
    fv_kernel_matrix,
    fv_transition_row,
)
from .dw import dw_filter, dw_predict
from .fv import fv_filter, fv_predict
from .lattice import (
    MultiplicityVector,
    Partition,
    down_set,
    down_set_array,
    hypergeom_pmf,
    project,
)
from .measures import (
    AtomRegistry,
    BaseMeasure,
    DwFilterState,
    FvFilterState,
    Uniform,
    new_prior,
    project_state,
)
from .oracles import lattice_row_expm, rk4_s
from .parametric import (
    DirichletMixture,
    GammaMixture,
    cir_filter,
    multi_cir_product_predict,
    wf_filter,
    wf_predict,
)
from .simulation import (
    SimConfig,
    grid_oracle_cir,
    mc_duality_check,
    particle_oracle_wf,
    sim_cir_hmm,
    sim_dw_hmm,
    sim_fv_hmm,
    sim_wf_hmm,
)

SUITES = ("duality", "projection", "oracle", "stability")


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def _check(criterion, name, value, tol, ok=None, detail=""):
    value = float(value)
    return Check(criterion, name, bool(value <= tol if ok is None else ok), value, tol, detail)


def _dict_gap(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def _random_counts(rng, K, max_total):
    total = int(rng.integers(0, max_total + 1))
    return rng.multinomial(total, np.full(K, 1.0 / K))


def _random_partition(rng, K):
    cells = int(rng.integers(1, K + 1))
    labels = rng.permutation(np.arange(K) % cells)
    return Partition({i: int(c) for i, c in enumerate(labels)}, cells)


# ---------------------------------------------------------------------------
# death-process kernels (criterion 1)


def check_fv_kernels() -> list[Check]:
    start = time.perf_counter()
    starts = [(12,), (6, 6), (3, 4, 5), (2, 3, 3, 4), (1, 0, 2), (5,), (4, 4, 4)]
    row_err = sum_err = ck_err = 0.0
    for theta in (0.5, 1.0, 3.0):
        params = FvDualParams(theta)
        for t in (0.01, 0.1, 1.0, 10.0):
            for m in starts:
                m = np.array(m)
                targets, probs, _ = fv_transition_row(m, t, params)
                ref_states, ref = lattice_row_expm(m, t, theta)
                got = dict(zip(map(tuple, targets), probs))
                row_err = max(row_err, max(abs(got.get(tuple(s), 0.0) - r)
                                           for s, r in zip(ref_states, ref)))
                sum_err = max(sum_err, abs(probs.sum() - 1.0))
            for m in ((6, 6), (2, 3, 3, 4)):
                states = down_set_array(np.array(m))
                P_t = fv_kernel_matrix(states, t, params)
                P_half = fv_kernel_matrix(states, t / 2, params)
                ck_err = max(ck_err, np.abs(P_half @ P_half - P_t).max())
    elapsed = time.perf_counter() - start
    return [
        _check(1, "lattice rows vs matrix exponential", row_err, 1e-8),
        _check(1, "row sums", sum_err, 1e-10),
        _check(1, "Chapman-Kolmogorov", ck_err, 1e-8),
        _check(1, "kernel runtime seconds", elapsed, 10.0),
    ]


# ---------------------------------------------------------------------------
# projection suite (criteria 2-4)


def check_hypergeom_merging(rng) -> list[Check]:
    worst = 0.0
    for K in (2, 3, 4):
        for total in range(11):
            for comp in itertools.combinations_with_replacement(range(K), total):
                m = MultiplicityVector.from_dense(np.bincount(comp, minlength=K))
                part = _random_partition(rng, K)
                pm = project(m, part)
                merged: dict = {}
                for i in down_set(m):
                    key = project(i, part)
                    merged[key] = merged.get(key, 0.0) + hypergeom_pmf(i, m)
                for j, v in merged.items():
                    worst = max(worst, abs(v - hypergeom_pmf(j, pm)))
    return [_check(2, "hypergeometric merging over partitions", worst, 1e-12)]


def _random_fv_state(rng, K, max_total, n_comp=3):
    base = BaseMeasure(float(rng.choice([0.5, 1.0, 3.0])), Uniform(0.0, 1.0))
    registry = AtomRegistry(tuple(np.sort(rng.uniform(size=K))))
    counts = np.array([_random_counts(rng, K, max_total) for _ in range(n_comp)])
    counts = np.unique(counts, axis=0)
    weights = rng.dirichlet(np.ones(len(counts)))
    return base, registry, counts, weights


def check_fv_commutation(rng, n_states=100) -> list[Check]:
    worst = 0.0
    for _ in range(n_states):
        K = int(rng.integers(1, 5))
        base, registry, counts, weights = _random_fv_state(rng, K, 10)
        state = FvFilterState(base, registry, counts, weights)
        part = _random_partition(rng, K)
        masses = np.full(part.K, 1.0 / part.K)
        t = float(rng.exponential(1.0))
        lhs = project_state(fv_predict(state, t), part, masses)
        rhs = wf_predict(project_state(state, part, masses), t)
        worst = max(worst, _dict_gap(lhs.components, rhs.components))
    return [_check(3, "FV propagation commutes with projection", worst, 1e-10)]


def check_dw_product(rng, n_cases=100) -> list[Check]:
    worst = 0.0
    identity_exact = True
    far_weight = far_s = 0.0
    for _ in range(n_cases):
        K = int(rng.integers(1, 5))
        base, registry, counts, weights = _random_fv_state(rng, K, 8)
        beta = float(rng.uniform(0.2, 5.0))
        s0 = float(rng.uniform(0.0, 10.0))
        t = float(rng.exponential(1.0))
        state = DwFilterState(base, registry, counts, weights, beta=beta, s=s0)
        part = Partition({i: i for i in range(K)}, K)
        masses = np.full(K, 1.0 / K)
        lhs = project_state(dw_predict(state, t), part, masses)
        rhs = multi_cir_product_predict(project_state(state, part, masses), t)
        worst = max(worst, _dict_gap(lhs.components, rhs.components), abs(lhs.s - rhs.s))
        same = dw_predict(state, 0.0)
        identity_exact &= (np.array_equal(same.counts, state.counts)
                           and np.array_equal(same.weights, state.weights) and same.s == s0)
        far = dw_predict(state, 100.0 / beta)
        nonzero = far.counts.sum(axis=1) > 0
        far_weight = max(far_weight, float(far.weights[nonzero].max(initial=0.0)))
        far_s = max(far_s, far.s)
    return [
        _check(4, "DW propagation vs product of CIR expansions", worst, 1e-10),
        _check(4, "identity at t=0", 0.0 if identity_exact else 1.0, 0.0, ok=identity_exact),
        _check(4, "non-origin weight at t=100/beta", far_weight, 1e-6, ok=far_weight < 1e-6),
        _check(4, "S at t=100/beta", far_s, 1e-6, ok=far_s < 1e-6),
    ]


# ---------------------------------------------------------------------------
# oracle suite (criteria 1, 5, 6, 7, 9)


def check_s_decay(rng, n_cases=50) -> list[Check]:
    ode_err = semi_err = 0.0
    steps = 20000
    for _ in range(n_cases):
        beta = float(rng.uniform(0.1, 5.0))
        s0 = float(rng.uniform(0.0, 20.0))
        params = DwDualParams(1.0, beta)
        path = rk4_s(s0, beta, 10.0, steps)
        grid = np.linspace(0.0, 10.0, steps + 1)
        for k in range(0, steps + 1, 200):
            ode_err = max(ode_err, abs(dw_s_decay(s0, grid[k], params)[0].s - path[k]))
        t, u = rng.uniform(0.0, 5.0, size=2)
        mid = dw_s_decay(s0, t, params)[0].s
        semi_err = max(semi_err, abs(dw_s_decay(mid, u, params)[0].s
                                     - dw_s_decay(s0, t + u, params)[0].s))
    return [
        _check(5, "S_t closed form vs RK4", ode_err, 1e-8),
        _check(5, "S_t semigroup", semi_err, 1e-10),
    ]


def check_cir_grid(seed: int) -> list[Check]:
    start = time.perf_counter()
    cfg = SimConfig("cir", [(float(j), 3) for j in range(10)], seed=seed, alpha=[2.0], beta=1.0)
    data = sim_cir_hmm(cfg)
    records = cir_filter(GammaMixture.prior([2.0], 1.0), data.batches)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid = grid_oracle_cir(data.batches, 2.0, 1.0, n_grid=2000)
    mean_err = max(abs(r.extra["mean"][0] / g - 1) for r, g in zip(records, grid["mean"]))
    var_err = max(abs(r.extra["variance"][0] / g - 1) for r, g in zip(records, grid["variance"]))
    elapsed = time.perf_counter() - start
    return [
        _check(6, "CIR posterior mean vs grid (relative)", mean_err, 1e-3),
        _check(6, "CIR posterior variance vs grid (relative)", var_err, 1e-3),
        _check(6, "CIR grid runtime seconds", elapsed, 30.0),
    ]


def check_wf_particles(seed: int, n_particles: int = 200_000) -> list[Check]:
    start = time.perf_counter()
    alpha = [0.5, 1.0, 1.5]
    cfg = SimConfig("wf", [(float(j), 5) for j in range(10)], seed=seed, alpha=alpha)
    data = sim_wf_hmm(cfg)
    records = wf_filter(DirichletMixture.prior(alpha), data.batches, prune_eps=1e-8)
    oracle = particle_oracle_wf(data.batches, alpha, n_particles, np.random.default_rng(seed))
    means = np.array([r.extra["mean"] for r in records])
    z = np.abs(means - oracle["mean"]) / oracle["se"]
    elapsed = time.perf_counter() - start
    return [
        _check(7, "WF posterior mean vs particle filter (max |z|)", z.max(), 3.0),
        _check(7, "WF particle runtime seconds", elapsed, 300.0),
    ]


def check_figure_behaviour(seed: int) -> list[Check]:
    beta = 1.0
    times = np.arange(0.0, 50.0 / beta + 1e-9, 0.5 / beta)
    batches = [(float(times[0]), [4, 6, 5])] + [(float(t), []) for t in times[1:]]
    records = cir_filter(GammaMixture.prior([2.0], beta), batches)
    full = np.array([r.extra["weight_fullinfo"] for r in records])
    prior = records[-1].extra["weight_prior"]
    # the full-information component is the posterior after the single batch
    full_monotone = bool(np.all(np.diff(full) < 0)) and full[0] == 1.0
    checks = [
        _check(9, "full-information weight decreasing from 1", 0.0 if full_monotone else 1.0,
               0.0, ok=full_monotone),
        _check(9, "full-information weight at t=50/beta", full[-1], 0.01, ok=full[-1] < 0.01),
        _check(9, "prior weight at t=50/beta", 1 - prior, 0.01, ok=prior > 0.99),
    ]
    cfg = SimConfig("dw", [(100.0, 1), (200.0, 1), (300.0, 1)], seed=seed,
                    theta=1.0, p0={"family": "uniform", "a": 0.0, "b": 1.0}, beta=0.05)
    data = sim_dw_hmm(cfg)
    recs = dw_filter(new_prior(BaseMeasure(1.0, Uniform(0.0, 1.0)), beta=0.05), data.batches,
                     prune_eps=1e-8)
    s = [r.extra["s"] for r in recs]
    params = DwDualParams(1.0, 0.05)
    sawtooth = s[0] == 1.0
    for j in range(1, len(s)):
        gap = recs[j].time - recs[j - 1].time
        path = [dw_s_decay(s[j - 1], u, params)[0].s for u in np.linspace(0, gap, 50)]
        decays = bool(np.all(np.diff(path) < 0))
        sawtooth &= decays and abs(s[j] - (path[-1] + 1.0)) < 1e-12
    checks.append(_check(9, "sawtooth s path", 0.0 if sawtooth else 1.0, 0.0, ok=sawtooth))
    return checks


# ---------------------------------------------------------------------------
# duality suite (criterion 8)


def check_duality(seed: int, n_configs: int = 20, N: int = 100_000) -> list[Check]:
    rng = np.random.default_rng(seed)
    configs = []
    for _ in range(n_configs):
        K = int(rng.integers(2, 4))
        theta = float(rng.choice([0.5, 1.0, 3.0]))
        alpha = theta * rng.dirichlet(np.ones(K) * 2)
        x0 = rng.dirichlet(np.ones(K) * 2)
        m = _random_counts(rng, K, 6)
        t = float(rng.uniform(0.5, 2.0))
        configs.append((x0, m, t, alpha))
    zs = [mc_duality_check(x0, m, t, a, N, rng)["z"] for x0, m, t, a in configs]
    bad = [j for j, z in enumerate(zs) if abs(z) > 3]
    rerun_ok = True
    if len(bad) == 1:
        x0, m, t, a = configs[bad[0]]
        z = mc_duality_check(x0, m, t, a, N, np.random.default_rng(seed + 10**6))["z"]
        rerun_ok = abs(z) <= 3
    ok = len(bad) == 0 or (len(bad) == 1 and rerun_ok)
    detail = f"{len(bad)} above 3"
    if bad:
        detail += f"; rerun {'passed' if rerun_ok else 'failed'}"
    return [_check(8, "duality z-scores (max |z|)", max(abs(z) for z in zs), 3.0, ok=ok,
                   detail=detail)]


# ---------------------------------------------------------------------------
# stability suite (criteria 10, 11)


def check_extended_precision() -> list[Check]:
    worst_raw = np.inf
    simplex_err = 0.0
    negative = False
    base = BaseMeasure(1.0, Uniform(0.0, 1.0))
    for theta in (0.5, 1.0, 3.0):
        for t in (1e-3, 1e-2):
            worst_raw = min(worst_raw, min(block_coeff_raw(40, k, t, theta, precision="extended")
                                           for k in range(41)))
    for m in ((40,), (20, 20), (10, 10, 10, 10)):
        registry = AtomRegistry(tuple(np.linspace(0.1, 0.9, len(m))))
        state = FvFilterState(base, registry, [m], [1.0])
        for t in (1e-3, 1e-2):
            out = fv_predict(state, t)
            negative |= bool(np.any(out.weights < 0))
            simplex_err = max(simplex_err, abs(out.weights.sum() - 1.0))
    return [
        _check(10, "most negative raw level probability", -worst_raw, 1e-9, ok=worst_raw >= -1e-9),
        _check(10, "propagated weights on the simplex", simplex_err, 1e-12, ok=not negative
               and simplex_err <= 1e-12),
    ]


def check_fv_performance(seed: int) -> list[Check]:
    cfg = SimConfig("fv", [(float(j), 10) for j in range(10)], seed=seed, theta=1.0,
                    p0={"family": "uniform", "a": 0.0, "b": 1.0})
    data = sim_fv_hmm(cfg)
    start = time.perf_counter()
    records = fv_filter(new_prior(BaseMeasure(1.0, Uniform(0.0, 1.0))), data.batches,
                        prune_eps=1e-6)
    elapsed = time.perf_counter() - start
    peak = max(max(r.n_before_prune, r.n_after_prune) for r in records)
    return [
        _check(11, "FV filter runtime seconds", elapsed, 10.0),
        _check(11, "peak component count", peak, 1e5),
        _check(11, "cumulative pruned mass", records[-1].pruned_mass, 1e-3,
               ok=records[-1].pruned_mass < 1e-3),
    ]


# ---------------------------------------------------------------------------


def run_suite(name: str, seed: int = 0) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    rng = np.random.default_rng(seed)
    if name == "projection":
        checks = check_hypergeom_merging(rng) + check_fv_commutation(rng) + check_dw_product(rng)
    elif name == "oracle":
        checks = (check_fv_kernels() + check_s_decay(rng) + check_cir_grid(seed)
                  + check_wf_particles(seed) + check_figure_behaviour(seed))
    elif name == "duality":
        checks = check_duality(seed)
    else:
        checks = check_extended_precision() + check_fv_performance(seed)
    return {
        "suite": name,
        "seed": seed,
        "passed": all(c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
