"""Finite-dimensional Wright-Fisher and Cox-Ingersoll-Ross filters.

These are the projections of the measure-valued filters onto a partition
with K cells.  They serve as standalone filters and as the reference side of
the projection/commutation checks.

Mixture components are integer vectors ``m`` stored as rows of ``counts``:
a Dirichlet component is Dir(alpha + m), a gamma component is the product
of Ga(alpha_j + m_j, beta + s).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._mix import (
    FilterStepRecord,
    accumulate_rows,
    check_times,
    frozen,
    fullinfo_index,
    normalise_log,
    prior_weight,
    prune_arrays,
)
from .dual import (
    DwDualParams,
    FvDualParams,
    dw_level_probs,
    dw_s_decay,
    dw_transition_row,
    fv_transition_row,
)


def _check_mixture(alpha, counts, weights):
    if np.any(alpha <= 0):
        raise ValueError("all alpha entries must be positive")
    if counts.ndim != 2 or counts.shape[1] != len(alpha):
        raise ValueError(f"counts must have shape (n, {len(alpha)})")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    if len(weights) != len(counts) or np.any(weights <= 0):
        raise ValueError("need one strictly positive weight per component")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {weights.sum()}, not 1")


@dataclass(frozen=True, eq=False)
class DirichletMixture:
    alpha: np.ndarray
    counts: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", frozen(np.asarray(self.alpha, dtype=float)))
        object.__setattr__(self, "counts", frozen(np.asarray(self.counts, dtype=np.int64)))
        object.__setattr__(self, "weights", frozen(np.asarray(self.weights, dtype=float)))
        _check_mixture(self.alpha, self.counts, self.weights)

    @classmethod
    def prior(cls, alpha) -> "DirichletMixture":
        alpha = np.asarray(alpha, dtype=float)
        return cls(alpha, np.zeros((1, len(alpha)), dtype=np.int64), np.ones(1))

    @property
    def theta(self) -> float:
        return float(self.alpha.sum())

    @property
    def components(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(c) for c in row): float(w) for row, w in zip(self.counts, self.weights)}

    def mean(self) -> np.ndarray:
        a = self.alpha + self.counts
        return self.weights @ (a / a.sum(axis=1, keepdims=True))

    def variance(self) -> np.ndarray:
        a = self.alpha + self.counts
        a0 = a.sum(axis=1, keepdims=True)
        second = self.weights @ (a * (a + 1) / (a0 * (a0 + 1)))
        return second - self.mean() ** 2


@dataclass(frozen=True, eq=False)
class GammaMixture:
    alpha: np.ndarray
    beta: float
    s: float
    counts: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", frozen(np.atleast_1d(np.asarray(self.alpha, dtype=float))))
        object.__setattr__(self, "counts", frozen(np.asarray(self.counts, dtype=np.int64)))
        object.__setattr__(self, "weights", frozen(np.asarray(self.weights, dtype=float)))
        _check_mixture(self.alpha, self.counts, self.weights)
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.s >= 0:
            raise ValueError("s must be nonnegative")

    @classmethod
    def prior(cls, alpha, beta: float) -> "GammaMixture":
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        return cls(alpha, beta, 0.0, np.zeros((1, len(alpha)), dtype=np.int64), np.ones(1))

    @property
    def rate(self) -> float:
        return self.beta + self.s

    @property
    def components(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(c) for c in row): float(w) for row, w in zip(self.counts, self.weights)}

    def mean(self) -> np.ndarray:
        return self.weights @ ((self.alpha + self.counts) / self.rate)

    def variance(self) -> np.ndarray:
        a = self.alpha + self.counts
        second = self.weights @ (a * (a + 1) / self.rate**2)
        return second - self.mean() ** 2


# ---------------------------------------------------------------------------
# Wright-Fisher


def wf_update(mix: DirichletMixture, counts) -> tuple[DirichletMixture, float]:
    """Condition on multinomial category counts (ordered sample)."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != mix.alpha.shape:
        raise ValueError(f"counts has shape {counts.shape}, expected {mix.alpha.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    if counts.sum() == 0:
        return mix, 0.0
    a = mix.alpha + mix.counts
    a0 = a.sum(axis=1)
    log_marg = (gammaln(a + counts) - gammaln(a)).sum(axis=1) - (
        gammaln(a0 + counts.sum()) - gammaln(a0)
    )
    w, lse = normalise_log(np.log(mix.weights) + log_marg)
    keep = w > 0
    return DirichletMixture(mix.alpha, (mix.counts + counts)[keep], w[keep] / w[keep].sum()), lse


def _spread(mix, row_fn, level_floor):
    """Push every component through ``row_fn``; returns (counts, weights, lost mass)."""
    blocks, wblocks, lost = [], [], 0.0
    for m, w in zip(mix.counts, mix.weights):
        targets, probs, skipped = row_fn(m, level_floor / w if level_floor > 0 else 0.0)
        lost += w * skipped
        blocks.append(targets)
        wblocks.append(w * probs)
    counts, weights = accumulate_rows(blocks, wblocks, len(mix.alpha))
    keep = weights > 0
    lost += float(weights[~keep].sum())
    return counts[keep], weights[keep] / weights[keep].sum(), lost


def _wf_predict(mix, t, sigma_speed, level_floor):
    params = FvDualParams(mix.theta, sigma_speed)
    counts, weights, lost = _spread(
        mix, lambda m, floor: fv_transition_row(m, t, params, floor), level_floor
    )
    return DirichletMixture(mix.alpha, counts, weights), lost


def wf_predict(mix: DirichletMixture, t: float, sigma_speed: float = 1.0) -> DirichletMixture:
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return mix
    return _wf_predict(mix, t, sigma_speed, 0.0)[0]


# ---------------------------------------------------------------------------
# Cox-Ingersoll-Ross


def cir_update(mix: GammaMixture, n: int, y: int) -> tuple[GammaMixture, float]:
    """Condition a 1-dim gamma mixture on n Poisson counts with total y.

    The returned log increment omits the data-only factor prod(y_i!).
    """
    if len(mix.alpha) != 1:
        raise ValueError("cir_update expects a one-dimensional mixture")
    if n < 0 or y < 0:
        raise ValueError("n and y must be nonnegative")
    if n == 0:
        if y:
            raise ValueError("positive total with no observations")
        return mix, 0.0
    a = mix.alpha[0] + mix.counts[:, 0]
    b = mix.rate
    log_marg = gammaln(a + y) - gammaln(a) + a * np.log(b) - (a + y) * np.log(b + n)
    w, lse = normalise_log(np.log(mix.weights) + log_marg)
    keep = w > 0
    return GammaMixture(mix.alpha, mix.beta, mix.s + n, (mix.counts + y)[keep],
                        w[keep] / w[keep].sum()), lse


def cir_predict(mix: GammaMixture, t: float, sigma_speed: float = 1.0) -> GammaMixture:
    """One-dimensional CIR propagation: binomial thinning of the shape increment."""
    if len(mix.alpha) != 1:
        raise ValueError("cir_predict expects a one-dimensional mixture")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return mix
    params = DwDualParams(float(mix.alpha[0]), mix.beta, sigma_speed)
    state, p = dw_s_decay(mix.s, t, params)
    blocks, wblocks = [], []
    for (m,), w in zip(mix.counts, mix.weights):
        levels = dw_level_probs(int(m), p)
        blocks.append(np.arange(m + 1, dtype=np.int64)[:, None])
        wblocks.append(w * levels)
    counts, weights = accumulate_rows(blocks, wblocks, 1)
    keep = weights > 0
    return GammaMixture(mix.alpha, mix.beta, state.s, counts[keep],
                        weights[keep] / weights[keep].sum())


def _multi_cir_predict(mix, t, sigma_speed, convention, level_floor):
    params = DwDualParams(float(mix.alpha.sum()), mix.beta, sigma_speed)
    state, p = dw_s_decay(mix.s, t, params)
    counts, weights, lost = _spread(
        mix, lambda m, floor: dw_transition_row(m, p, convention, floor), level_floor
    )
    return GammaMixture(mix.alpha, mix.beta, state.s, counts, weights), lost


def multi_cir_predict(mix: GammaMixture, t: float, sigma_speed: float = 1.0,
                      convention: str = "survivor") -> GammaMixture:
    """Binomial-level x hypergeometric propagation of independent CIR coordinates."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return mix
    return _multi_cir_predict(mix, t, sigma_speed, convention, 0.0)[0]


def multi_cir_product_predict(mix: GammaMixture, t: float, sigma_speed: float = 1.0) -> GammaMixture:
    """Reference propagation: tensor product of per-coordinate 1-dim expansions."""
    if t == 0:
        return mix
    K = len(mix.alpha)
    blocks, wblocks, s_new = [], [], mix.s
    for m, w in zip(mix.counts, mix.weights):
        factors = []
        for j in range(K):
            one = GammaMixture([mix.alpha[j]], mix.beta, mix.s, [[m[j]]], [1.0])
            out = cir_predict(one, t, sigma_speed)
            s_new = out.s
            factors.append(list(zip(out.counts[:, 0].tolist(), out.weights.tolist())))
        rows, ws = [], []
        for combo in itertools.product(*factors):
            rows.append([c for c, _ in combo])
            ws.append(w * np.prod([v for _, v in combo]))
        blocks.append(np.array(rows, dtype=np.int64).reshape(-1, K))
        wblocks.append(np.array(ws))
    counts, weights = accumulate_rows(blocks, wblocks, K)
    return GammaMixture(mix.alpha, mix.beta, s_new, counts, weights / weights.sum())


# ---------------------------------------------------------------------------
# recursions


def _parametric_record(time, inc, before, after, pruned, mix):
    return FilterStepRecord(
        time=time,
        logml_increment=inc,
        n_before_prune=before,
        n_after_prune=after,
        pruned_mass=pruned,
        state=mix,
        extra={
            "weight_fullinfo": float(mix.weights[fullinfo_index(mix.counts)]),
            "weight_prior": prior_weight(mix.counts, mix.weights),
            "mean": mix.mean().tolist(),
            "variance": mix.variance().tolist(),
        },
    )


def _run(prior, batches, predict, update, prune_eps, make):
    batches = list(batches)
    check_times(t for t, _ in batches)
    mix, records, pruned = prior, [], 0.0
    before = after = 1
    for j, (t, obs) in enumerate(batches):
        if j:
            mix, lost = predict(mix, t - batches[j - 1][0], prune_eps)
            pruned += lost
            before = len(mix.weights)
            counts, weights, dropped = prune_arrays(mix.counts, mix.weights, prune_eps)
            pruned += dropped
            mix = make(mix, counts, weights)
            after = len(mix.weights)
        mix, inc = update(mix, obs)
        records.append(_parametric_record(t, inc, before, after, pruned, mix))
    return records


def wf_filter(prior: DirichletMixture, batches, prune_eps: float = 0.0,
              sigma_speed: float = 1.0) -> list[FilterStepRecord]:
    """Alternate multinomial updates and WF propagation over ``(time, counts)`` batches."""
    return _run(prior, batches,
                lambda mix, dt, eps: _wf_predict(mix, dt, sigma_speed, eps),
                wf_update, prune_eps,
                lambda mix, c, w: DirichletMixture(mix.alpha, c, w))


def cir_filter(prior: GammaMixture, batches, prune_eps: float = 0.0,
               sigma_speed: float = 1.0) -> list[FilterStepRecord]:
    """Alternate Poisson updates and CIR propagation over ``(time, [counts...])`` batches."""

    def update(mix, obs):
        obs = [int(v) for v in obs]
        return cir_update(mix, len(obs), sum(obs))

    return _run(prior, batches,
                lambda mix, dt, eps: _multi_cir_predict(mix, dt, sigma_speed, "survivor", eps),
                update, prune_eps,
                lambda mix, c, w: GammaMixture(mix.alpha, mix.beta, mix.s, c, w))
