"""Reference computations that share no code path with the closed forms.

Everything here is brute force: matrix exponentials of explicit generators
and a fixed-step Runge-Kutta integrator.  Only meant for small problems.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .lattice import down_set_array


def level_generator(top: int, theta: float) -> np.ndarray:
    """Generator of the pure-death chain on {0..top} with rates n(theta+n-1)/2."""
    Q = np.zeros((top + 1, top + 1))
    for n in range(1, top + 1):
        rate = n * (theta + n - 1) / 2.0
        Q[n, n] = -rate
        Q[n, n - 1] = rate
    return Q


def level_probs_expm(total: int, t_eff: float, theta: float) -> np.ndarray:
    """Level distribution after t_eff from ``total``, indexed by the number of deaths."""
    row = expm(level_generator(total, theta) * t_eff)[total]
    return row[::-1].copy()


def lattice_generator(states: np.ndarray, theta: float) -> np.ndarray:
    """Generator of the lattice death chain on a down-closed set of count vectors.

    From n the chain moves to n - e_j at rate lambda_|n| * n_j / |n|.
    """
    states = np.asarray(states, dtype=np.int64)
    index = {tuple(row): a for a, row in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for a, row in enumerate(states):
        n = int(row.sum())
        if n == 0:
            continue
        lam = n * (theta + n - 1) / 2.0
        for j in np.flatnonzero(row):
            dest = row.copy()
            dest[j] -= 1
            Q[a, index[tuple(dest)]] += lam * row[j] / n
        Q[a, a] = -lam
    return Q


def lattice_row_expm(m, t_eff: float, theta: float):
    """(targets, probabilities) of the lattice chain from m, by matrix exponential."""
    m = np.asarray(m, dtype=np.int64)
    states = down_set_array(m)
    P = expm(lattice_generator(states, theta) * t_eff)
    start = int(np.flatnonzero(np.all(states == m, axis=1))[0])
    return states, P[start]


def lineage_pmf_expm(t_eff: float, theta: float, top: int) -> np.ndarray:
    """Lineage count distribution of a chain from infinity, truncated at ``top``.

    The chain starts at ``top`` after the expected time spent above it,
    summed directly (with an integral remainder) rather than in closed form.
    """
    k = np.arange(top + 1, 10**7, dtype=float)
    far = 10**7
    tail = float(np.sum(2.0 / (k * (theta + k - 1)))) + 2.0 / (far + theta / 2 - 1)
    return expm(level_generator(top, theta) * (t_eff - tail))[top]


def rk4_s(s0: float, beta: float, t_end: float, steps: int = 20000) -> np.ndarray:
    """Integrate dS/dt = -S(beta+S)/2 with classical RK4; returns S on the uniform grid."""
    f = lambda s: -s * (beta + s) / 2.0  # noqa: E731
    h = t_end / steps
    out = np.empty(steps + 1)
    s = out[0] = s0
    for k in range(steps):
        k1 = f(s)
        k2 = f(s + h * k1 / 2)
        k3 = f(s + h * k2 / 2)
        k4 = f(s + h * k3)
        s = s + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        out[k + 1] = s
    return out
