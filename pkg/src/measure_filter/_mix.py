"""Array bookkeeping shared by every finite-mixture filter."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .lattice import DEFAULT_DOWN_SET_CAP, DownSetTooLarge


class NonMonotoneTimes(ValueError):
    pass


@dataclass
class FilterStepRecord:
    """Filtering distribution at one observation time plus bookkeeping.

    ``n_before_prune`` / ``n_after_prune`` describe the propagation that led
    into this time (both 1 at the first step); ``pruned_mass`` is cumulative.
    """

    time: float
    logml_increment: float
    n_before_prune: int
    n_after_prune: int
    pruned_mass: float
    state: Any
    extra: dict = field(default_factory=dict)


def check_times(times) -> None:
    times = list(times)
    for a, b in zip(times, times[1:]):
        if not b > a:
            raise NonMonotoneTimes(f"observation times must increase strictly: {a} then {b}")


def accumulate_rows(blocks, weight_blocks, K: int, cap: int = DEFAULT_DOWN_SET_CAP):
    """Sum weights over identical rows; returns rows in lexicographic order."""
    if not blocks:
        return np.zeros((0, K), dtype=np.int64), np.zeros(0)
    rows = np.concatenate(blocks, axis=0)
    weights = np.concatenate(weight_blocks)
    if len(rows) > cap:
        raise DownSetTooLarge(len(rows), cap)
    if K == 0:
        return np.zeros((1, 0), dtype=np.int64), np.array([weights.sum()])
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    summed = np.bincount(inverse.ravel(), weights=weights, minlength=len(uniq))
    return uniq, summed


def normalise_log(log_w: np.ndarray):
    """Normalised weights and the log normaliser."""
    lse = float(logsumexp(log_w))
    return np.exp(log_w - lse), lse


def prune_arrays(counts: np.ndarray, weights: np.ndarray, eps: float):
    """Drop weights below eps (never the largest), renormalise; returns dropped mass."""
    if eps <= 0:
        keep = weights > 0
    else:
        keep = weights >= eps
        keep[int(np.argmax(weights))] = True
    dropped = float(weights[~keep].sum())
    kept = weights[keep]
    return counts[keep], kept / kept.sum(), dropped


def fullinfo_index(counts: np.ndarray) -> int:
    """Index of the component with the largest total (ties: lexicographically largest)."""
    totals = counts.sum(axis=1)
    best = np.flatnonzero(totals == totals.max())
    if len(best) == 1:
        return int(best[0])
    order = np.lexsort(counts[best].T[::-1])
    return int(best[order[-1]])


def prior_weight(counts: np.ndarray, weights: np.ndarray) -> float:
    zero = np.flatnonzero(counts.sum(axis=1) == 0)
    return float(weights[zero[0]]) if len(zero) else 0.0


def frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a
