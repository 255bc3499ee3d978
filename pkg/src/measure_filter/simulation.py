"""Exact synthetic data and Monte Carlo reference harnesses.

The measure-valued signals are simulated marginally, without ever
instantiating the random measure: an urn over ``alpha`` plus a finite set of
seed atoms represents the current state exactly.  Between epochs the seeds
are replaced by a fresh sample of the lineage-count size drawn through the
same urn.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .dual import (
    DwDualParams,
    FvDualParams,
    dw_sstar,
    fv_death_prob,
    sample_lineage_count,
)
from .lattice import MultiplicityVector, ResourceCapError, down_set
from .measures import P0, p0_from_dict

MODELS = ("fv", "dw", "wf", "cir")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *key); independent of call order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


@dataclass
class SimConfig:
    """Simulation settings.

    ``schedule`` holds ``(time, size)`` pairs.  ``size`` is the batch size
    for fv, the number of multinomial draws for wf and the number of
    Poisson counts for cir; for dw it must be 1 (one unit window of the
    Poisson point process, whose size is random).
    """

    model: str
    schedule: list
    seed: int = 0
    theta: float | None = None
    p0: dict | None = None
    alpha: list | None = None
    beta: float | None = None
    sigma_speed: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model: must be one of {MODELS}, got {self.model!r}")
        self.schedule = [(float(t), int(n)) for t, n in self.schedule]
        times = [t for t, _ in self.schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule: times must increase strictly")
        if any(n < 0 for _, n in self.schedule):
            raise ValueError("schedule: sizes must be nonnegative")
        if not self.sigma_speed > 0:
            raise ValueError("sigma_speed: must be positive")
        if self.model in ("fv", "dw"):
            if self.theta is None or not self.theta > 0:
                raise ValueError(f"theta: must be positive, got {self.theta}")
            if self.p0 is None:
                raise ValueError("p0: required for measure-valued models")
            p0_from_dict(self.p0)
        else:
            if self.alpha is None or len(self.alpha) == 0 or min(self.alpha) <= 0:
                raise ValueError(f"alpha: must be a nonempty positive vector, got {self.alpha}")
            if self.model == "cir" and len(self.alpha) != 1:
                raise ValueError("alpha: cir takes a single shape parameter")
        if self.model in ("dw", "cir"):
            if self.beta is None or not self.beta > 0:
                raise ValueError(f"beta: must be positive, got {self.beta}")
        if self.model == "dw" and any(n != 1 for _, n in self.schedule):
            raise ValueError("schedule: dw windows must have size 1")

    @property
    def base(self) -> P0:
        return p0_from_dict(self.p0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = [[t, n] for t, n in self.schedule]
        return {k: v for k, v in d.items() if v is not None}


@dataclass
class Dataset:
    batches: list
    config: SimConfig | None = None
    latent: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# finite-dimensional transitions


def sim_wf_transition(x, dt: float, alpha, rng: np.random.Generator,
                      sigma_speed: float = 1.0) -> np.ndarray:
    """Exact WF transition; ``x`` may be one point or an (N, K) array of points."""
    x = np.asarray(x, dtype=float)
    if dt == 0:
        return x.copy()
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    alpha = np.asarray(alpha, dtype=float)
    params = FvDualParams(float(alpha.sum()), sigma_speed)
    pts = np.atleast_2d(x)
    m = sample_lineage_count(dt, params, rng, size=len(pts))
    counts = rng.multinomial(m, pts)
    g = rng.standard_gamma(alpha + counts)
    out = g / g.sum(axis=1, keepdims=True)
    return out[0] if x.ndim == 1 else out


def sim_cir_transition(z, dt: float, alpha: float, beta: float, rng: np.random.Generator,
                       sigma_speed: float = 1.0):
    """Exact CIR transition (Poisson-mixed gamma); vectorised over ``z``."""
    if dt == 0:
        return np.array(z, dtype=float)
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    sstar = dw_sstar(dt, DwDualParams(alpha, beta, sigma_speed))
    m = rng.poisson(np.asarray(z, dtype=float) * sstar)
    return rng.gamma(alpha + m, 1.0 / (beta + sstar))


# ---------------------------------------------------------------------------
# measure-valued signals via the urn


class _Urn:
    """Blackwell-MacQueen urn over theta*P0 plus a pool of atoms."""

    def __init__(self, theta: float, p0: P0, pool):
        self.theta, self.p0 = theta, p0
        self.pool = list(pool)

    def draw(self, rng) -> float:
        n = len(self.pool)
        if rng.uniform() * (self.theta + n) < self.theta:
            y = float(self.p0.sample(rng))
        else:
            y = self.pool[int(rng.integers(n))]
        self.pool.append(y)
        return y

    def draws(self, n: int, rng) -> list[float]:
        return [self.draw(rng) for _ in range(n)]


def _check_seed_count(m: int, cap: int):
    if m > cap:
        raise SeedCountTooLarge(f"{m} transition seeds exceeds cap {cap}; use longer time gaps")


class SeedCountTooLarge(ResourceCapError):
    pass


def sim_fv_hmm(cfg: SimConfig, seed_cap: int = 10**6) -> Dataset:
    if cfg.model != "fv":
        raise ValueError("sim_fv_hmm needs an fv config")
    p0, params = cfg.base, FvDualParams(cfg.theta, cfg.sigma_speed)
    seeds: list[float] = []
    posterior: list[float] = []  # seeds + data: the urn for the current state given data
    batches = []
    for j, (t, n) in enumerate(cfg.schedule):
        rng = stream(cfg.seed, j)
        if j:
            m = sample_lineage_count(t - cfg.schedule[j - 1][0], params, rng)
            _check_seed_count(m, seed_cap)
            seeds = _Urn(cfg.theta, p0, posterior).draws(m, rng)
        obs = _Urn(cfg.theta, p0, seeds).draws(n, rng)
        batches.append((t, obs))
        posterior = seeds + obs
    return Dataset(batches, cfg, [])


def sim_dw_hmm(cfg: SimConfig, seed_cap: int = 10**6) -> Dataset:
    if cfg.model != "dw":
        raise ValueError("sim_dw_hmm needs a dw config")
    p0 = cfg.base
    params = DwDualParams(cfg.theta, cfg.beta, cfg.sigma_speed)
    rng = stream(cfg.seed, 0)
    total = float(rng.gamma(cfg.theta, 1.0 / cfg.beta))
    seeds: list[float] = []
    posterior: list[float] = []
    batches, latent = [], []
    for j, (t, _) in enumerate(cfg.schedule):
        rng = stream(cfg.seed, j + 1)
        if j:
            sstar = dw_sstar(t - cfg.schedule[j - 1][0], params)
            m = int(rng.poisson(total * sstar))
            _check_seed_count(m, seed_cap)
            seeds = _Urn(cfg.theta, p0, posterior).draws(m, rng)
            total = float(rng.gamma(cfg.theta + m, 1.0 / (cfg.beta + sstar)))
        obs = _Urn(cfg.theta, p0, seeds).draws(int(rng.poisson(total)), rng)
        batches.append((t, obs))
        latent.append(total)
        posterior = seeds + obs
    return Dataset(batches, cfg, latent)


def sim_wf_hmm(cfg: SimConfig) -> Dataset:
    if cfg.model != "wf":
        raise ValueError("sim_wf_hmm needs a wf config")
    alpha = np.asarray(cfg.alpha, dtype=float)
    rng = stream(cfg.seed, 0)
    x = rng.dirichlet(alpha)
    batches, latent = [], []
    for j, (t, n) in enumerate(cfg.schedule):
        rng = stream(cfg.seed, j + 1)
        if j:
            x = sim_wf_transition(x, t - cfg.schedule[j - 1][0], alpha, rng, cfg.sigma_speed)
        batches.append((t, rng.multinomial(n, x).tolist()))
        latent.append(x.tolist())
    return Dataset(batches, cfg, latent)


def sim_cir_hmm(cfg: SimConfig) -> Dataset:
    if cfg.model != "cir":
        raise ValueError("sim_cir_hmm needs a cir config")
    a = float(cfg.alpha[0])
    rng = stream(cfg.seed, 0)
    z = float(rng.gamma(a, 1.0 / cfg.beta))
    batches, latent = [], []
    for j, (t, n) in enumerate(cfg.schedule):
        rng = stream(cfg.seed, j + 1)
        if j:
            z = float(sim_cir_transition(z, t - cfg.schedule[j - 1][0], a, cfg.beta, rng,
                                         cfg.sigma_speed))
        batches.append((t, rng.poisson(z, n).tolist()))
        latent.append(z)
    return Dataset(batches, cfg, latent)


def simulate(cfg: SimConfig) -> Dataset:
    return {"fv": sim_fv_hmm, "dw": sim_dw_hmm, "wf": sim_wf_hmm, "cir": sim_cir_hmm}[cfg.model](cfg)


# ---------------------------------------------------------------------------
# Monte Carlo checks


def wf_duality_h(x, m, alpha) -> np.ndarray:
    """Moment duality function Gamma(theta+|m|)/Gamma(theta) prod Gamma(a_i)/Gamma(a_i+m_i) x^m."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m = np.asarray(m, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=float)
    theta = alpha.sum()
    log_c = gammaln(theta + m.sum()) - gammaln(theta) + np.sum(gammaln(alpha) - gammaln(alpha + m))
    with np.errstate(divide="ignore"):
        return np.exp(log_c + (m * np.log(x)).sum(axis=1, where=m > 0))


def mc_duality_check(x0, m, t: float, alpha, N: int, rng: np.random.Generator,
                     sigma_speed: float = 1.0) -> dict:
    """Compare E^{x0} h(X_t, m) by simulation with E^m h(x0, M_t) summed exactly."""
    if N < 1000:
        raise ValueError("N must be at least 1000")
    x0 = np.asarray(x0, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    params = FvDualParams(float(alpha.sum()), sigma_speed)
    mvec = MultiplicityVector.from_dense(m)
    if t == 0:
        lhs = rhs = float(wf_duality_h(x0, m, alpha)[0])
        return {"lhs": lhs, "rhs": rhs, "diff": 0.0, "se": 0.0, "z": 0.0}
    xs = sim_wf_transition(np.broadcast_to(x0, (N, len(x0))), t, alpha, rng, sigma_speed)
    h = wf_duality_h(xs, m, alpha)
    lhs, se = float(h.mean()), float(h.std(ddof=1) / math.sqrt(N))
    rhs = 0.0
    for n in down_set(mvec):
        rhs += fv_death_prob(mvec, n, t, params) * float(
            wf_duality_h(x0, n.to_dense(len(x0)), alpha)[0]
        )
    diff = lhs - rhs
    return {"lhs": lhs, "rhs": rhs, "diff": diff, "se": se,
            "z": diff / se if se > 0 else 0.0}


def _systematic(weights: np.ndarray, rng) -> np.ndarray:
    n = len(weights)
    u = (rng.uniform() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(weights), u)
    return np.minimum(idx, n - 1)


def particle_oracle_wf(batches, alpha, N: int, rng: np.random.Generator,
                       replicates: int = 20, sigma_speed: float = 1.0) -> dict:
    """Bootstrap particle filter for multinomial data with exact WF moves.

    The N particles are split into independent replicate filters; the
    reported mean averages them and the standard error comes from their
    spread.
    """
    alpha = np.asarray(alpha, dtype=float)
    per = N // replicates
    means = np.zeros((replicates, len(batches), len(alpha)))
    for r in range(replicates):
        x = rng.dirichlet(alpha, size=per)
        for j, (t, counts) in enumerate(batches):
            if j:
                x = sim_wf_transition(x, t - batches[j - 1][0], alpha, rng, sigma_speed)
            c = np.asarray(counts, dtype=float)
            logw = (np.log(x) * c).sum(axis=1, where=c > 0)
            w = np.exp(logw - logw.max())
            w /= w.sum()
            if 1.0 / np.sum(w**2) < per / 100:
                warnings.warn(f"particle degeneracy at step {j}", RuntimeWarning)
            means[r, j] = w @ x
            x = x[_systematic(w, rng)]
    return {"mean": means.mean(axis=0),
            "se": means.std(axis=0, ddof=1) / math.sqrt(replicates)}


def grid_oracle_cir(batches, alpha: float, beta: float, n_grid: int = 2000,
                    z_max: float | None = None, sigma_speed: float = 1.0) -> dict:
    """Discretised forward filter for Poisson counts of a 1-dim CIR signal (alpha > 1)."""
    if not alpha > 1:
        raise ValueError("grid oracle needs alpha > 1 so the density vanishes at 0")
    if z_max is None:
        y_all = sum(sum(obs) for _, obs in batches)
        z_max = stats.gamma.ppf(1 - 1e-15, alpha + y_all + 10, scale=1 / min(beta, 1.0))
    z = np.linspace(0.0, z_max, n_grid)
    quad = np.full(n_grid, z[1])
    quad[[0, -1]] /= 2
    dens = stats.gamma.pdf(z, alpha, scale=1 / beta)
    out = {"mean": [], "variance": [], "boundary_mass": []}
    for j, (t, obs) in enumerate(batches):
        if j:
            dt = t - batches[j - 1][0]
            sstar = dw_sstar(dt, DwDualParams(alpha, beta, sigma_speed))
            m_max = int(stats.poisson.ppf(1 - 1e-16, z_max * sstar)) + 10
            ms = np.arange(m_max + 1)
            P = stats.poisson.pmf(ms[None, :], z[:, None] * sstar)
            G = stats.gamma.pdf(z[None, :], alpha + ms[:, None], scale=1 / (beta + sstar))
            dens = (dens * quad) @ P @ G
        obs = np.asarray(obs, dtype=float)
        if len(obs):
            with np.errstate(divide="ignore"):
                loglik = obs.sum() * np.log(z) - len(obs) * z
            dens = dens * np.exp(loglik - loglik[np.isfinite(loglik)].max())
        dens = dens / (dens @ quad)
        mean = float((z * dens) @ quad)
        out["mean"].append(mean)
        out["variance"].append(float(((z - mean) ** 2 * dens) @ quad))
        boundary = float(dens[-n_grid // 100:] @ quad[-n_grid // 100:])
        out["boundary_mass"].append(boundary)
        if boundary > 1e-8:
            warnings.warn(f"grid may be too short at step {j}: tail mass {boundary:.2e}",
                          RuntimeWarning)
    return out
