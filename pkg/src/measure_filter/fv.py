"""Update, prediction and the filtering recursion for Fleming-Viot signals."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ._mix import (
    FilterStepRecord,
    accumulate_rows,
    check_times,
    fullinfo_index,
    normalise_log,
    prior_weight,
)
from .dual import FvDualParams, fv_transition_row
from .lattice import DEFAULT_DOWN_SET_CAP, DownSetTooLarge
from .measures import FvFilterState, observation_likelihoods, prune


def _urn_loglik(state, obs):
    """Extend the registry and score a batch under every component's Polya urn.

    Returns (registry, updated counts, per-component log predictive).
    """
    registry, idx = state.registry.extended(obs)
    counts = state.padded_counts(len(registry)).copy()
    log_lik = np.zeros(len(counts))
    for y, atom in zip(obs, idx):
        lik = observation_likelihoods(state, counts, y, atom)
        if not np.any(lik > 0):
            raise ValueError(f"observation {y} has zero density under every component")
        with np.errstate(divide="ignore"):
            log_lik += np.log(lik)
        counts[:, atom] += 1
    return registry, counts, log_lik


def fv_update(state: FvFilterState, obs) -> tuple[FvFilterState, float]:
    """Condition on one batch of exchangeable draws; returns (state, log increment)."""
    obs = [float(y) for y in obs]
    if not obs:
        return state, 0.0
    registry, counts, log_lik = _urn_loglik(state, obs)
    weights, lse = normalise_log(np.log(state.weights) + log_lik)
    keep = weights > 0
    return replace(state, registry=registry, counts=counts[keep],
                   weights=weights[keep] / weights[keep].sum()), lse


def _propagate(state, row_fn, level_floor: float, cap: int):
    sizes = np.prod(state.counts + 1, axis=1, dtype=float)
    if sizes.sum() > cap:
        raise DownSetTooLarge(int(sizes.sum()), cap)
    blocks, wblocks, skipped = [], [], 0.0
    for m, w in zip(state.counts, state.weights):
        targets, probs, lost = row_fn(m, level_floor / w if level_floor > 0 else 0.0)
        skipped += w * lost
        blocks.append(targets)
        wblocks.append(w * probs)
    counts, weights = accumulate_rows(blocks, wblocks, state.counts.shape[1], cap)
    keep = weights > 0
    lost = skipped + float(weights[~keep].sum())
    weights = weights[keep]
    return counts[keep], weights / weights.sum(), lost


def fv_predict(state: FvFilterState, dt: float, level_floor: float = 0.0,
               cap: int = DEFAULT_DOWN_SET_CAP) -> FvFilterState:
    """Propagate the mixture over a time gap ``dt``.

    With ``level_floor > 0`` whole (component, level) blocks carrying less
    than that much mass are never enumerated; their mass is added to the
    state's ``pruned_mass``.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return state
    params = FvDualParams(state.theta, state.sigma_speed)
    counts, weights, lost = _propagate(
        state, lambda m, floor: fv_transition_row(m, dt, params, floor), level_floor, cap
    )
    return replace(state, counts=counts, weights=weights,
                   pruned_mass=state.pruned_mass + lost)


def filter_record(time, inc, before, after, state, **extra) -> FilterStepRecord:
    return FilterStepRecord(
        time=time,
        logml_increment=inc,
        n_before_prune=before,
        n_after_prune=after,
        pruned_mass=state.pruned_mass,
        state=state,
        extra={
            "weight_fullinfo": float(state.weights[fullinfo_index(state.counts)]),
            "weight_prior": prior_weight(state.counts, state.weights),
            **extra,
        },
    )


def run_recursion(prior, batches, update, predict, prune_eps, extra=lambda s: {}):
    batches = [(t, list(obs)) for t, obs in batches]
    check_times(t for t, _ in batches)
    state, records = prior, []
    before = after = state.n_components
    for j, (t, obs) in enumerate(batches):
        if j:
            state = predict(state, t - batches[j - 1][0], prune_eps)
            before = state.n_components
            state = prune(state, prune_eps)
            after = state.n_components
        state, inc = update(state, obs)
        records.append(filter_record(t, inc, before, after, state, **extra(state)))
    return records


def fv_filter(prior: FvFilterState, batches, prune_eps: float = 0.0,
              cap: int = DEFAULT_DOWN_SET_CAP) -> list[FilterStepRecord]:
    """Filtering distributions at every batch time for ``(time, values)`` batches.

    Time gaps are scaled by the state's ``sigma_speed`` inside propagation.
    Pruning runs after each propagation.
    """
    return run_recursion(
        prior, batches, fv_update,
        lambda s, dt, eps: fv_predict(s, dt, level_floor=eps, cap=cap),
        prune_eps,
    )


def total_log_marginal(records) -> float:
    return float(sum(r.logml_increment for r in records))
