"""Multiplicity vectors on the lattice Z_+^K and the combinatorics attached to them.

A multiplicity vector records how many times each distinct observed atom has
been seen.  Zeros are implicit, so vectors built over registries of different
sizes compare equal whenever their nonzero counts agree.

Down-sets are enumerated in lexicographic order of the dense coordinates
(atom 0 varies slowest), which keeps every file written from them
deterministic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

DEFAULT_DOWN_SET_CAP = 10**7
EXACT_TOTAL_LIMIT = 20


class ResourceCapError(RuntimeError):
    """A computation would exceed a configured size cap."""


class DownSetTooLarge(ResourceCapError):
    """Raised when a down-set would exceed the configured cardinality cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(
            f"down-set of size {size} exceeds cap {cap}; prune the mixture first"
        )
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class MultiplicityVector:
    """Sparse nonnegative integer vector; absent indices are zero."""

    items: tuple[tuple[int, int], ...] = ()
    total: int = field(default=0, compare=False)

    def __post_init__(self):
        clean = tuple(sorted((int(i), int(c)) for i, c in self.items if c != 0))
        for i, c in clean:
            if i < 0 or c < 0:
                raise ValueError(f"invalid entry {i}:{c} in multiplicity vector")
        if len({i for i, _ in clean}) != len(clean):
            raise ValueError("duplicate atom index in multiplicity vector")
        object.__setattr__(self, "items", clean)
        object.__setattr__(self, "total", sum(c for _, c in clean))

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "MultiplicityVector":
        return cls(tuple(counts.items()))

    @classmethod
    def from_dense(cls, dense: Iterable[int]) -> "MultiplicityVector":
        return cls(tuple((i, int(c)) for i, c in enumerate(dense) if c))

    @property
    def counts(self) -> dict[int, int]:
        return dict(self.items)

    @property
    def dim(self) -> int:
        """Smallest K such that the vector lives in Z_+^K."""
        return self.items[-1][0] + 1 if self.items else 0

    def __getitem__(self, idx: int) -> int:
        for i, c in self.items:
            if i == idx:
                return c
        return 0

    def to_dense(self, K: int | None = None) -> np.ndarray:
        K = self.dim if K is None else K
        if K < self.dim:
            raise ValueError(f"dimension {K} too small for vector of dim {self.dim}")
        out = np.zeros(K, dtype=np.int64)
        for i, c in self.items:
            out[i] = c
        return out

    def __add__(self, other: "MultiplicityVector") -> "MultiplicityVector":
        acc = self.counts
        for i, c in other.items:
            acc[i] = acc.get(i, 0) + c
        return MultiplicityVector.from_counts(acc)

    def __sub__(self, other: "MultiplicityVector") -> "MultiplicityVector":
        if not leq(other, self):
            raise ValueError("subtraction would leave the lattice")
        acc = self.counts
        for i, c in other.items:
            acc[i] -= c
        return MultiplicityVector.from_counts(acc)

    def __repr__(self):
        inner = ", ".join(f"{i}:{c}" for i, c in self.items)
        return f"MultiplicityVector({{{inner}}})"


def mv(*dense: int) -> MultiplicityVector:
    """Shorthand: ``mv(2, 1)`` is the vector with counts 2 and 1 on atoms 0, 1."""
    return MultiplicityVector.from_dense(dense)


@dataclass(frozen=True)
class Partition:
    """Assignment of atom indices to cells ``0..K-1``."""

    cell_of: Mapping[int, int]
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("a partition needs at least one cell")
        for atom, cell in self.cell_of.items():
            if not 0 <= cell < self.K:
                raise ValueError(f"atom {atom} mapped to cell {cell} outside 0..{self.K - 1}")
        object.__setattr__(self, "cell_of", dict(self.cell_of))

    @classmethod
    def from_cells(cls, cells: Sequence[Iterable[int]]) -> "Partition":
        cell_of = {}
        for j, cell in enumerate(cells):
            for atom in cell:
                if atom in cell_of:
                    raise ValueError(f"atom {atom} appears in two cells")
                cell_of[atom] = j
        return cls(cell_of, len(cells))

    def matrix(self, n_atoms: int) -> np.ndarray:
        """(n_atoms, K) 0/1 matrix mapping dense counts to cell counts."""
        out = np.zeros((n_atoms, self.K), dtype=np.int64)
        for atom in range(n_atoms):
            if atom not in self.cell_of:
                raise KeyError(f"atom {atom} is not mapped by the partition")
            out[atom, self.cell_of[atom]] = 1
        return out


def leq(m: MultiplicityVector, n: MultiplicityVector) -> bool:
    return all(c <= n[i] for i, c in m.items)


def down_set_size(m: MultiplicityVector) -> int:
    return math.prod(c + 1 for _, c in m.items)


def down_set(m: MultiplicityVector, cap: int = DEFAULT_DOWN_SET_CAP) -> list[MultiplicityVector]:
    """All n with 0 <= n <= m, in lexicographic order of the nonzero coordinates."""
    size = down_set_size(m)
    if size > cap:
        raise DownSetTooLarge(size, cap)
    idx = [i for i, _ in m.items]
    ranges = [range(c + 1) for _, c in m.items]
    return [
        MultiplicityVector(tuple(zip(idx, combo)))
        for combo in itertools.product(*ranges)
    ]


def down_set_union(
    M: Iterable[MultiplicityVector], cap: int = DEFAULT_DOWN_SET_CAP
) -> list[MultiplicityVector]:
    seen: dict[MultiplicityVector, None] = {}
    for m in M:
        for n in down_set(m, cap):
            seen[n] = None
            if len(seen) > cap:
                raise DownSetTooLarge(len(seen), cap)
    K = max((v.dim for v in seen), default=0)
    return sorted(seen, key=lambda v: tuple(v.to_dense(K)))


def project(m: MultiplicityVector, part: Partition) -> MultiplicityVector:
    acc: dict[int, int] = {}
    for i, c in m.items:
        if i not in part.cell_of:
            raise KeyError(f"atom {i} is not mapped by the partition")
        cell = part.cell_of[i]
        acc[cell] = acc.get(cell, 0) + c
    return MultiplicityVector.from_counts(acc)


def _log_comb(n, k):
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(
        np.asarray(n) - np.asarray(k) + 1.0
    )


def hypergeom_pmf(i: MultiplicityVector, m: MultiplicityVector, exact: bool = False) -> float:
    """Multivariate hypergeometric probability prod_j C(m_j, i_j) / C(|m|, |i|)."""
    if not leq(i, m):
        raise ValueError(f"{i} is not below {m}")
    if exact:
        if m.total > EXACT_TOTAL_LIMIT:
            raise ValueError(f"exact path limited to |m| <= {EXACT_TOTAL_LIMIT}")
        num = math.prod(math.comb(c, i[j]) for j, c in m.items)
        return float(Fraction(num, math.comb(m.total, i.total)))
    log_num = sum(float(_log_comb(c, i[j])) for j, c in m.items)
    return math.exp(log_num - float(_log_comb(m.total, i.total)))


def log_hypergeom(i: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Vectorised log hypergeometric pmf over rows of dense arrays ``i <= m``."""
    i = np.atleast_2d(i)
    m = np.atleast_2d(m)
    num = _log_comb(m, i).sum(axis=-1)
    return num - _log_comb(m.sum(axis=-1), i.sum(axis=-1))


def binom_pmf(k: int, n: int, p: float, exact: bool = False) -> float:
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    if exact:
        return math.comb(n, k) * p**k * (1.0 - p) ** (n - k)
    return math.exp(float(_log_comb(n, k)) + k * math.log(p) + (n - k) * math.log1p(-p))


def t_update(obs_mults: MultiplicityVector, m: MultiplicityVector) -> MultiplicityVector:
    """Add the multiplicities of a new sample to ``m``.

    ``obs_mults`` is indexed over the registry after it has been extended with
    the sample's new atoms, so unseen values appear as fresh coordinates.
    """
    return m + obs_mults


def down_set_array(m: np.ndarray) -> np.ndarray:
    """Dense version of :func:`down_set`: rows of all n <= m, lexicographic."""
    m = np.asarray(m, dtype=np.int64)
    nz = np.flatnonzero(m)
    out = np.zeros((math.prod(int(m[j]) + 1 for j in nz), len(m)), dtype=np.int64)
    if len(nz):
        grids = np.indices(tuple(int(m[j]) + 1 for j in nz), dtype=np.int64)
        out[:, nz] = grids.reshape(len(nz), -1).T
    return out
