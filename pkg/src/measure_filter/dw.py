"""Update, prediction and the filtering recursion for Dawson-Watanabe signals."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.special import gammaln

from ._mix import FilterStepRecord
from .dual import DwDualParams, dw_s_decay, dw_transition_row
from .fv import _propagate, _urn_loglik, run_recursion
from .lattice import DEFAULT_DOWN_SET_CAP
from .measures import DwFilterState

WEIGHT_MODES = ("full_marginal", "paper_literal")


def total_mass_loglik(state: DwFilterState, n: int) -> np.ndarray:
    """log E[exp(-|z|) |z|^n] for |z| ~ Ga(theta+|m|, beta+s), per component."""
    a = state.theta + state.counts.sum(axis=1)
    b = state.beta + state.s
    return gammaln(a + n) - gammaln(a) + a * np.log(b / (b + 1.0)) - n * np.log(b + 1.0)


def dw_update(state: DwFilterState, obs, mode: str = "full_marginal") -> tuple[DwFilterState, float]:
    """Condition on the points of one Poisson observation window.

    An empty window is informative in ``full_marginal`` mode (it favours
    components with little mass) and always advances ``s`` by one.
    """
    if mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode {mode!r}")
    obs = [float(y) for y in obs]
    if obs:
        registry, counts, log_lik = _urn_loglik(state, obs)
    else:
        registry, counts, log_lik = state.registry, state.counts, np.zeros(state.n_components)
    if mode == "full_marginal":
        log_lik = log_lik + total_mass_loglik(state, len(obs))
    log_w = np.log(state.weights) + log_lik
    lse = float(np.logaddexp.reduce(log_w))
    weights = np.exp(log_w - lse)
    keep = weights > 0
    new = replace(state, registry=registry, counts=counts[keep],
                  weights=weights[keep] / weights[keep].sum(), s=state.s + 1.0)
    return new, lse


def dw_predict(state: DwFilterState, dt: float, level_floor: float = 0.0,
               convention: str = "survivor", cap: int = DEFAULT_DOWN_SET_CAP) -> DwFilterState:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return state
    params = DwDualParams(state.theta, state.beta, state.sigma_speed)
    new_s, p = dw_s_decay(state.s, dt, params)
    counts, weights, lost = _propagate(
        state, lambda m, floor: dw_transition_row(m, p, convention, floor), level_floor, cap
    )
    return replace(state, counts=counts, weights=weights, s=new_s.s,
                   pruned_mass=state.pruned_mass + lost)


def dw_filter(prior: DwFilterState, batches, prune_eps: float = 0.0,
              mode: str = "full_marginal", convention: str = "survivor",
              cap: int = DEFAULT_DOWN_SET_CAP) -> list[FilterStepRecord]:
    """Filtering distributions at every observation window; records carry ``s``."""
    return run_recursion(
        prior, batches,
        lambda s, obs: dw_update(s, obs, mode),
        lambda s, dt, eps: dw_predict(s, dt, level_floor=eps, convention=convention, cap=cap),
        prune_eps,
        extra=lambda s: {"s": s.s},
    )
