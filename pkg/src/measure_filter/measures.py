"""Filter states: finite mixtures of Dirichlet processes and of gamma random measures.

A component with multiplicity vector ``m`` is the Dirichlet process with
parameter ``theta*P0 + sum_i m_i delta_{y*_i}`` (or the gamma random measure
with that shape and rate ``beta + s``).  Components are stored as rows of a
dense count matrix over the atom registry; registries only ever grow, and
new atoms enter as zero columns.

Likelihoods of a single observation use the mixed dominating measure:
counting measure at atoms a component already carries, Lebesgue measure
elsewhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import stats

from ._mix import frozen, prune_arrays
from .lattice import MultiplicityVector, Partition
from .parametric import DirichletMixture, GammaMixture


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"uniform needs a < b, got a={self.a}, b={self.b}")

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        return np.where((y >= self.a) & (y <= self.b), 1.0 / (self.b - self.a), 0.0)

    def cdf(self, y):
        return np.clip((np.asarray(y, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def sample(self, rng, size=None):
        return rng.uniform(self.a, self.b, size)

    def to_dict(self):
        return {"family": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Gaussian:
    mu: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError(f"gaussian needs var > 0, got {self.var}")

    def pdf(self, y):
        return stats.norm.pdf(y, self.mu, math.sqrt(self.var))

    def cdf(self, y):
        return stats.norm.cdf(y, self.mu, math.sqrt(self.var))

    def sample(self, rng, size=None):
        return rng.normal(self.mu, math.sqrt(self.var), size)

    def to_dict(self):
        return {"family": "gaussian", "mu": self.mu, "var": self.var}


P0 = Union[Uniform, Gaussian]


def p0_from_dict(d: dict) -> P0:
    d = dict(d)
    family = d.pop("family", None)
    if family == "uniform":
        return Uniform(float(d.pop("a")), float(d.pop("b")))
    if family == "gaussian":
        return Gaussian(float(d.pop("mu")), float(d.pop("var")))
    raise ValueError(f"unknown p0 family {family!r}")


@dataclass(frozen=True)
class BaseMeasure:
    theta: float
    p0: P0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass(frozen=True)
class AtomRegistry:
    """Append-only list of distinct observed values."""

    atoms: tuple[float, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        index = {a: i for i, a in enumerate(atoms)}
        if len(index) != len(atoms):
            raise ValueError("registry values must be pairwise distinct")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.atoms)

    def index(self, y: float) -> int | None:
        return self._index.get(float(y))

    def extended(self, values) -> tuple["AtomRegistry", list[int]]:
        """Registry with unseen values appended, and the index of every value."""
        atoms = list(self.atoms)
        index = dict(self._index)
        out = []
        for y in values:
            y = float(y)
            if y not in index:
                index[y] = len(atoms)
                atoms.append(y)
            out.append(index[y])
        return AtomRegistry(tuple(atoms)), out


@dataclass(frozen=True, eq=False)
class FvFilterState:
    base: BaseMeasure
    registry: AtomRegistry
    counts: np.ndarray
    weights: np.ndarray
    sigma_speed: float = 1.0
    pruned_mass: float = 0.0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64).reshape(len(weights), len(self.registry))
        if len(weights) != len(counts) or len(weights) == 0:
            raise ValueError("need one weight per component and at least one component")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be strictly positive and sum to 1")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if not self.sigma_speed > 0:
            raise ValueError("sigma_speed must be positive")
        object.__setattr__(self, "counts", frozen(counts))
        object.__setattr__(self, "weights", frozen(weights))

    @property
    def theta(self) -> float:
        return self.base.theta

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def components(self) -> dict[MultiplicityVector, float]:
        return {
            MultiplicityVector.from_dense(row): float(w)
            for row, w in zip(self.counts, self.weights)
        }

    def padded_counts(self, K: int) -> np.ndarray:
        extra = K - self.counts.shape[1]
        return np.pad(self.counts, ((0, 0), (0, extra))) if extra else self.counts

    def _rates(self) -> np.ndarray:
        """Per-component denominator of the mean measure."""
        return self.theta + self.counts.sum(axis=1)


@dataclass(frozen=True, eq=False)
class DwFilterState(FvFilterState):
    beta: float = 1.0
    s: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.s >= 0:
            raise ValueError("s must be nonnegative")

    def _rates(self) -> np.ndarray:
        return np.full(self.n_components, self.beta + self.s)


State = Union[FvFilterState, DwFilterState]


def new_prior(base: BaseMeasure, beta: float | None = None,
              sigma_speed: float = 1.0) -> State:
    common = dict(
        base=base,
        registry=AtomRegistry(),
        counts=np.zeros((1, 0), dtype=np.int64),
        weights=np.ones(1),
        sigma_speed=sigma_speed,
    )
    if beta is None:
        return FvFilterState(**common)
    return DwFilterState(**common, beta=beta, s=0.0)


def observation_likelihoods(state: State, counts: np.ndarray, y: float,
                            atom: int | None, offset: int = 0) -> np.ndarray:
    """Sequential urn probability of one more point, per component.

    ``counts`` are the components' current counts (including earlier points of
    the same batch) and ``offset`` the number of such earlier points.
    """
    theta = state.theta
    denom = theta + counts.sum(axis=1)
    fresh = theta * float(state.base.p0.pdf(y))
    if atom is None or atom >= counts.shape[1]:
        return np.full(len(counts), fresh) / denom
    at = counts[:, atom]
    return np.where(at > 0, at, fresh) / denom


def predictive_density(state: State, y: float) -> float:
    lik = observation_likelihoods(state, state.counts, y, state.registry.index(y))
    return float(state.weights @ lik)


def _cell_masses(part: Partition, cell_masses) -> np.ndarray:
    masses = np.asarray(cell_masses, dtype=float)
    if masses.shape != (part.K,) or np.any(masses <= 0) or abs(masses.sum() - 1) > 1e-12:
        raise ValueError("cell masses must be positive, one per cell, summing to 1")
    return masses


def mean_measure(state: State, query, cell_masses=None):
    """Posterior mean measure of an atom (int) or of every cell of a partition.

    Probability-measure states return probabilities; finite-measure states
    return expected masses.
    """
    rates = state._rates()
    if isinstance(query, (int, np.integer)):
        if not 0 <= query < len(state.registry):
            raise ValueError(f"atom index {query} not in registry")
        return float(state.weights @ (state.counts[:, query] / rates))
    if not isinstance(query, Partition):
        raise TypeError("query must be an atom index or a Partition")
    masses = _cell_masses(query, cell_masses)
    cells = state.counts @ query.matrix(len(state.registry))
    return state.weights @ ((state.theta * masses + cells) / rates[:, None])


def project_state(state: State, part: Partition, cell_masses):
    """Law of the measure evaluated on the cells: a Dirichlet or gamma mixture."""
    masses = _cell_masses(part, cell_masses)
    alpha = state.theta * masses
    cells = state.counts @ part.matrix(len(state.registry))
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    weights = np.bincount(inverse.ravel(), weights=state.weights, minlength=len(uniq))
    if isinstance(state, DwFilterState):
        return GammaMixture(alpha, state.beta, state.s, uniq, weights)
    return DirichletMixture(alpha, uniq, weights)


def interval_partition(state: State, edges) -> tuple[Partition, np.ndarray]:
    """Partition of the line at ``edges`` into cells (-inf,e0], (e0,e1], ..., (ek,inf)."""
    edges = np.sort(np.asarray(edges, dtype=float))
    atoms = np.asarray(state.registry.atoms, dtype=float)
    cells = np.searchsorted(edges, atoms, side="left")
    cdf = np.concatenate([[0.0], state.base.p0.cdf(edges), [1.0]])
    part = Partition({i: int(c) for i, c in enumerate(cells)}, len(edges) + 1)
    return part, np.diff(cdf)


def prune(state: State, eps: float) -> State:
    """Drop components lighter than eps (never the heaviest) and renormalise."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    if eps == 0:
        return state
    counts, weights, dropped = prune_arrays(state.counts, state.weights, eps)
    return replace(state, counts=counts, weights=weights,
                   pruned_mass=state.pruned_mass + dropped)


# ---------------------------------------------------------------------------
# serialisation


def state_to_dict(state: State) -> dict:
    out = {
        "theta": state.theta,
        "p0": state.base.p0.to_dict(),
    }
    if isinstance(state, DwFilterState):
        out["beta"] = state.beta
        out["s"] = state.s
    out["sigma_speed"] = state.sigma_speed
    out["atoms"] = list(state.registry.atoms)
    out["components"] = [
        {"counts": {str(i): int(c) for i, c in enumerate(row) if c}, "w": float(w)}
        for row, w in zip(state.counts, state.weights)
    ]
    out["pruned_mass"] = state.pruned_mass
    return out


def state_from_dict(d: dict) -> State:
    base = BaseMeasure(float(d["theta"]), p0_from_dict(d["p0"]))
    registry = AtomRegistry(tuple(float(a) for a in d["atoms"]))
    K = len(registry)
    counts = np.zeros((len(d["components"]), K), dtype=np.int64)
    weights = np.zeros(len(d["components"]))
    for r, comp in enumerate(d["components"]):
        for idx, c in comp["counts"].items():
            if not 0 <= int(idx) < K:
                raise ValueError(f"component references unknown atom {idx}")
            counts[r, int(idx)] = int(c)
        weights[r] = float(comp["w"])
    common = dict(base=base, registry=registry, counts=counts, weights=weights,
                  sigma_speed=float(d.get("sigma_speed", 1.0)),
                  pruned_mass=float(d.get("pruned_mass", 0.0)))
    if "beta" in d:
        return DwFilterState(**common, beta=float(d["beta"]), s=float(d.get("s", 0.0)))
    return FvFilterState(**common)
