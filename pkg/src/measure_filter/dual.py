"""Dual death processes and the deterministic dual component.

The mixture weights produced by propagation are transition probabilities of
pure-death chains on the multiplicity lattice.  For the probability-measure
model the chain loses one lineage at total rate ``lambda_n = n(theta+n-1)/2``
and picks the coordinate in proportion to its count; the level reached after
time t is independent of which coordinates were hit, so every transition
probability factors as (level probability) x (hypergeometric pmf).

For the finite-measure model the level is binomial with a survival
probability driven by the logistic decay ``dS/dt = -S(beta+S)/2``.

The speed parameter ``sigma_speed`` only ever enters as effective time
``sigma_speed * t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from numba import njit
from scipy.special import digamma, polygamma

from .lattice import (
    MultiplicityVector,
    ResourceCapError,
    binom_pmf,
    down_set_array,
    hypergeom_pmf,
    leq,
    log_hypergeom,
)

CLAMP_FLOOR = -1e-9
# absolute error budget for the double-precision alternating sum
DOUBLE_ERR_BUDGET = 1e-14
# spread allowed in the time the chain spends above its start level, relative to t
LINEAGE_JITTER_FRACTION = 1e-3
LINEAGE_START_CAP = 10**7


class InstabilityError(ArithmeticError):
    """A level probability came out negative beyond the clamp floor."""


class LineageCapExceeded(ResourceCapError):
    pass


@dataclass(frozen=True)
class FvDualParams:
    theta: float
    sigma_speed: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.sigma_speed > 0:
            raise ValueError(f"sigma_speed must be positive, got {self.sigma_speed}")


@dataclass(frozen=True)
class DwDualParams:
    theta: float
    beta: float
    sigma_speed: float = 1.0

    def __post_init__(self):
        for name in ("theta", "beta", "sigma_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class DualTimeState:
    s: float

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError(f"s must be nonnegative, got {self.s}")


def lambda_rate(n: int, theta: float) -> float:
    return n * (theta + n - 1) / 2.0


# ---------------------------------------------------------------------------
# level probabilities C_{N, N-k}(t)


def _term_logs(total: int, dead: int, t_eff: float, theta: float):
    """log|T_j| and signs of the alternating-sum terms, j = 0..dead."""
    lam = np.array([lambda_rate(total - h, theta) for h in range(dead + 1)])
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    log_prefactor = np.log(lam[:dead]).sum()
    logs = log_prefactor - lam * t_eff - np.log(np.abs(diff)).sum(axis=1)
    j = np.arange(dead + 1)
    signs = np.where((dead + j) % 2 == 0, 1.0, -1.0)
    return logs, signs


def _coeff_double(total: int, dead: int, t_eff: float, theta: float):
    logs, signs = _term_logs(total, dead, t_eff, theta)
    terms = signs * np.exp(logs)
    value = math.fsum(terms.tolist())
    err = float(np.abs(terms).max()) * 8.0 * (dead + 1) * np.finfo(float).eps
    return value, err, float(logs.max())


def _coeff_extended(total: int, dead: int, t_eff: float, theta: float, max_log: float):
    dps = max(30, int(max_log / math.log(10)) + 25)
    with mpmath.workdps(dps):
        th = mpmath.mpf(theta)
        tt = mpmath.mpf(t_eff)
        lam = [(total - h) * (th + total - h - 1) / 2 for h in range(dead + 1)]
        pref = mpmath.fprod(lam[:dead])
        acc = mpmath.mpf(0)
        for j in range(dead + 1):
            den = mpmath.fprod(lam[j] - lam[h] for h in range(dead + 1) if h != j)
            acc += mpmath.exp(-lam[j] * tt) / den
        value = (-1) ** dead * pref * acc
        return float(value)


def block_coeff_raw(
    total: int, dead: int, t_eff: float, theta: float, precision: str = "auto"
) -> float:
    """Unclamped C_{total, total-dead} at effective time ``t_eff``.

    ``precision`` is ``"double"``, ``"extended"`` or ``"auto"``; auto switches
    to the multiprecision sum when the double-precision error estimate
    exceeds the absolute budget or the double result is negative.
    """
    if not 0 <= dead <= total:
        raise ValueError(f"need 0 <= dead <= total, got dead={dead}, total={total}")
    if t_eff < 0:
        raise ValueError("time must be nonnegative")
    if dead == 0:
        return math.exp(-lambda_rate(total, theta) * t_eff)
    if t_eff == 0:
        return 0.0
    value, err, max_log = _coeff_double(total, dead, t_eff, theta)
    if precision == "double":
        return value
    if precision == "extended" or err > DOUBLE_ERR_BUDGET or value < 0:
        return _coeff_extended(total, dead, t_eff, theta, max_log)
    return value


def _stabilise(value: float) -> float:
    if value < CLAMP_FLOOR:
        raise InstabilityError(f"level probability {value:.3e} below {CLAMP_FLOOR}")
    return max(value, 0.0)


@lru_cache(maxsize=4096)
def level_probs(total: int, t_eff: float, theta: float) -> tuple[float, ...]:
    """(C_{N,N}, C_{N,N-1}, ..., C_{N,0}) at effective time; index = number dead."""
    return tuple(
        _stabilise(block_coeff_raw(total, k, t_eff, theta)) for k in range(total + 1)
    )


def block_coeff(total: int, dead: int, t: float, params: FvDualParams,
                precision: str = "auto") -> float:
    """Probability that the level chain started at ``total`` has lost ``dead`` lineages by time t.

    With ``precision="double"`` an unstable result raises
    :class:`InstabilityError` instead of being recomputed.
    """
    t_eff = params.sigma_speed * t
    if precision == "auto":
        return level_probs(total, t_eff, params.theta)[dead]
    return _stabilise(block_coeff_raw(total, dead, t_eff, params.theta, precision))


def fv_death_prob(m: MultiplicityVector, n: MultiplicityVector, t: float,
                  params: FvDualParams) -> float:
    if not leq(n, m):
        raise ValueError(f"{n} is not below {m}")
    i = m - n
    c = block_coeff(m.total, i.total, t, params)
    return c * hypergeom_pmf(i, m)


def fv_transition_row(m: np.ndarray, t: float, params: FvDualParams,
                      min_level_mass: float = 0.0):
    """Dense transition row from ``m``: (targets n as rows, probabilities).

    Whole levels whose total probability is below ``min_level_mass`` are left
    out; the third return value is the probability mass skipped that way.
    """
    m = np.asarray(m, dtype=np.int64)
    total = int(m.sum())
    levels = np.asarray(level_probs(total, params.sigma_speed * t, params.theta))
    targets = down_set_array(m)
    dead = total - targets.sum(axis=1)
    keep_level = levels >= min_level_mass if min_level_mass > 0 else levels > 0
    skipped = float(levels[~keep_level].sum())
    sel = keep_level[dead]
    targets, dead = targets[sel], dead[sel]
    probs = levels[dead] * np.exp(log_hypergeom(m - targets, m))
    return targets, probs, skipped


def fv_kernel_matrix(states: np.ndarray, t: float, params: FvDualParams) -> np.ndarray:
    """Transition matrix of the lattice death chain restricted to ``states``.

    ``states`` must be down-closed (e.g. a down-set) for rows to sum to one.
    """
    states = np.asarray(states, dtype=np.int64)
    n = len(states)
    P = np.zeros((n, n))
    totals = states.sum(axis=1)
    t_eff = params.sigma_speed * t
    for a in range(n):
        below = np.all(states <= states[a], axis=1)
        idx = np.nonzero(below)[0]
        levels = np.asarray(level_probs(int(totals[a]), t_eff, params.theta))
        removed = states[a] - states[idx]
        P[a, idx] = levels[totals[a] - totals[idx]] * np.exp(
            log_hypergeom(removed, np.broadcast_to(states[a], removed.shape))
        )
    return P


# ---------------------------------------------------------------------------
# lineage counts of the transition function (death chain from infinity)


def lineage_tail(K: int, theta: float) -> float:
    """Expected time spent above level K: sum_{k>K} 1/lambda_k."""
    if abs(theta - 1.0) < 1e-12:
        return float(2.0 * polygamma(1, K + 1))
    return float(2.0 / (theta - 1.0) * (digamma(K + theta) - digamma(K + 1)))


def lineage_tail_sd(K: int) -> float:
    """Upper bound on the standard deviation of the time spent above level K (any theta > 0)."""
    return math.sqrt(4.0 * float(polygamma(3, K)) / 6.0)


def lineage_start(t_eff: float, theta: float) -> int:
    K = 16
    while (lineage_tail_sd(K) >= LINEAGE_JITTER_FRACTION * t_eff
           or lineage_tail(K, theta) >= 0.5 * t_eff):
        K *= 2
        if K > LINEAGE_START_CAP:
            raise LineageCapExceeded(
                f"lineage start above {LINEAGE_START_CAP} for effective time {t_eff}; "
                "use longer time gaps"
            )
    return K


@njit(cache=True)
def _death_chain_draws(seed, rates, t_eff, size):
    np.random.seed(seed)
    k_init = rates.shape[0] - 1
    out = np.empty(size, np.int64)
    for r in range(size):
        elapsed = 0.0
        k = k_init
        while k > 0:
            elapsed += np.random.exponential(1.0) / rates[k]
            if elapsed > t_eff:
                break
            k -= 1
        out[r] = k
    return out


def sample_lineage_count(t: float, params: FvDualParams, rng: np.random.Generator,
                         size: int | None = None):
    """Draw the number of surviving lineages at time t of a chain started at infinity.

    The chain is started at a finite level K and run for t minus the
    expected time spent above K; K is chosen so that the spread of that
    neglected passage time is below 0.1% of t.
    """
    if not t > 0:
        raise ValueError("lineage count is infinite at t=0; copy the state instead")
    t_eff = params.sigma_speed * t
    K = lineage_start(t_eff, params.theta)
    k = np.arange(K + 1, dtype=float)
    rates = k * (params.theta + k - 1) / 2.0
    seed = int(rng.integers(0, 2**31 - 1))
    t_rest = t_eff - lineage_tail(K, params.theta)
    draws = _death_chain_draws(seed, rates, t_rest, 1 if size is None else int(size))
    return int(draws[0]) if size is None else draws


# ---------------------------------------------------------------------------
# finite-measure dual


def _decay_factor(s0: float, t_eff: float, beta: float) -> float:
    """S_t / s0, written to stay finite for large t and at s0 = 0."""
    x = beta * t_eff / 2.0
    return beta * math.exp(-x) / (beta - s0 * math.expm1(-x))


def dw_s_decay(s0: float, t: float, params: DwDualParams):
    """Deterministic dual after time t: returns (DualTimeState, survival probability)."""
    if s0 < 0 or t < 0:
        raise ValueError("s0 and t must be nonnegative")
    if t == 0:
        return DualTimeState(s0), 1.0
    if s0 == 0:
        # a stationary start carries no counts worth keeping
        return DualTimeState(0.0), 0.0
    p = _decay_factor(s0, params.sigma_speed * t, params.beta)
    return DualTimeState(s0 * p), p


def dw_sstar(t: float, params: DwDualParams) -> float:
    if not t > 0:
        raise ValueError("S* diverges at t=0")
    return params.beta / math.expm1(params.beta * params.sigma_speed * t / 2.0)


def dw_level_probs(total: int, p: float, convention: str = "survivor") -> np.ndarray:
    """Binomial level weights indexed by the surviving count 0..total."""
    survivors = np.arange(total + 1)
    probs = np.array([binom_pmf(int(k), total, p) for k in survivors])
    if convention == "survivor":
        return probs
    if convention == "paper_literal":
        return probs[::-1].copy()
    raise ValueError(f"unknown binomial convention {convention!r}")


def dw_death_prob(m: MultiplicityVector, n: MultiplicityVector, t: float, s0: float,
                  params: DwDualParams, convention: str = "survivor") -> float:
    if not leq(n, m):
        raise ValueError(f"{n} is not below {m}")
    _, p = dw_s_decay(s0, t, params)
    level = dw_level_probs(m.total, p, convention)[n.total]
    return float(level) * hypergeom_pmf(n, m)


def dw_transition_row(m: np.ndarray, p: float, convention: str = "survivor",
                      min_level_mass: float = 0.0):
    m = np.asarray(m, dtype=np.int64)
    total = int(m.sum())
    levels = dw_level_probs(total, p, convention)
    targets = down_set_array(m)
    surv = targets.sum(axis=1)
    keep_level = levels >= min_level_mass if min_level_mass > 0 else levels > 0
    skipped = float(levels[~keep_level].sum())
    sel = keep_level[surv]
    targets, surv = targets[sel], surv[sel]
    probs = levels[surv] * np.exp(log_hypergeom(targets, m))
    return targets, probs, skipped
