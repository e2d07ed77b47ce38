"""epsilon-almost universal2 hash families.

Three concrete families are provided:

``fully_random_table``
    Every map ``[0, D) -> [1, N]`` with equal probability (random binning).
    Universal2 with ``epsilon = 1``.
``toeplitz_gf2``
    ``y = T x`` over GF(2) with a random ``m x k`` Toeplitz matrix ``T``
    (``k + m - 1`` random bits), ``D = 2**k`` and ``N = 2**m``.
    Universal2 with ``epsilon = 1``.
``modular_multiply``
    ``x -> ((a x) mod p) mod N + 1`` with ``p`` the smallest prime ``>= D`` and
    ``a`` uniform in ``[1, p - 1]``.  Collision probability at most ``2 / N``,
    so ``epsilon = 2``.

Domain elements are flat indices ``0 <= x < D``; buckets are 1-indexed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np
from scipy.stats import binomtest

KINDS = ("fully_random_table", "toeplitz_gf2", "modular_multiply")

#: Largest family we enumerate member by member.
MAX_MEMBERS = 2**20


class EnumerationError(ValueError):
    """Raised when a family is too large to enumerate."""


def derive_seed(master_seed: int, *path) -> int:
    """Deterministic 64-bit seed for the work item addressed by ``path``.

    ``path`` entries may be integers or short strings (role names).
    """
    words = []
    for item in path:
        if isinstance(item, str):
            words.extend(item.encode())
        else:
            words.append(int(item))
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(words))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _toeplitz_nbits(family) -> int:
    if family.domain_bits == 0:
        return 0
    return family.domain_bits + family.range_bits - 1


def _is_power_of_two(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


def _next_prime(x: int) -> int:
    x = max(int(x), 2)
    while True:
        if all(x % d for d in range(2, math.isqrt(x) + 1)):
            return x
        x += 1


@dataclass(frozen=True)
class HashFamily:
    """Descriptor of a hash family from ``[0, domain_size)`` to ``[1, range_size]``."""

    kind: str
    domain_size: int
    range_size: int
    epsilon: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown hash family kind {self.kind!r}; choose from {KINDS}")
        if self.domain_size < 1 or self.range_size < 1:
            raise ValueError("domain and range sizes must be positive")
        if self.kind == "toeplitz_gf2" and not (
            _is_power_of_two(self.domain_size) and _is_power_of_two(self.range_size)
        ):
            raise ValueError("toeplitz_gf2 needs power-of-two domain and range sizes")
        object.__setattr__(self, "epsilon", 2.0 if self.kind == "modular_multiply" else 1.0)

    @property
    def domain_bits(self) -> int:
        return self.domain_size.bit_length() - 1

    @property
    def range_bits(self) -> int:
        return self.range_size.bit_length() - 1

    @property
    def prime(self) -> int:
        return _next_prime(self.domain_size)

    def member_count(self) -> int:
        if self.kind == "fully_random_table":
            return self.range_size**self.domain_size
        if self.kind == "toeplitz_gf2":
            return 2 ** _toeplitz_nbits(self)
        return self.prime - 1

    def members(self) -> Iterator["HashInstance"]:
        """All members in a fixed order (each produced once)."""
        if self.member_count() > MAX_MEMBERS:
            raise EnumerationError(
                f"{self.kind} family has {self.member_count()} members, guard is {MAX_MEMBERS}")
        if self.kind == "fully_random_table":
            for tab in itertools.product(range(self.range_size), repeat=self.domain_size):
                yield HashInstance(self, np.array(tab, dtype=np.int64))
        elif self.kind == "toeplitz_gf2":
            nbits = _toeplitz_nbits(self)
            for bits in itertools.product((0, 1), repeat=nbits):
                yield HashInstance(self, np.array(bits, dtype=np.uint8))
        else:
            for a in range(1, self.prime):
                yield HashInstance(self, np.array(a, dtype=np.int64))

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "domain_size": self.domain_size, "range_size": self.range_size}
        if self.kind == "toeplitz_gf2":
            doc["domain_bits"] = self.domain_bits
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "HashFamily":
        if "domain_size" in doc:
            domain = int(doc["domain_size"])
        else:
            domain = 2 ** int(doc["domain_bits"])
        return cls(doc["kind"], domain, int(doc["range_size"]))


@dataclass(frozen=True, eq=False)
class HashInstance:
    """A realised member ``f_X`` of a family; ``seed_material`` is ``X``.

    ``seed_material`` is the lookup table (0-indexed buckets) for
    ``fully_random_table``, the ``k + m - 1`` Toeplitz bits for
    ``toeplitz_gf2`` and the multiplier for ``modular_multiply``.
    """

    family: HashFamily
    seed_material: np.ndarray

    def __post_init__(self):
        mat = np.array(self.seed_material)
        mat.setflags(write=False)
        object.__setattr__(self, "seed_material", mat)

    @cached_property
    def table(self) -> np.ndarray:
        """0-indexed bucket of every domain element."""
        fam = self.family
        if fam.kind == "fully_random_table":
            tab = self.seed_material.astype(np.int64)
        elif fam.kind == "toeplitz_gf2":
            tab = _toeplitz_table(self.seed_material, fam.domain_bits, fam.range_bits)
        else:
            x = np.arange(fam.domain_size, dtype=np.int64)
            tab = (int(self.seed_material) * x) % fam.prime % fam.range_size
        tab.setflags(write=False)
        return tab

    def __call__(self, element) -> int:
        return apply(self, element)

    def to_dict(self) -> dict:
        return {"family": self.family.to_dict(), "seed_material": self.seed_material.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "HashInstance":
        return cls(HashFamily.from_dict(doc["family"]), np.array(doc["seed_material"]))


def toeplitz_columns(bits: np.ndarray, k: int, m: int) -> np.ndarray:
    """Column ``j`` of the Toeplitz matrix packed as an integer (row ``i`` is bit ``i``).

    Entry ``T[i, j] = bits[i - j + k - 1]``; works on a batch of bit rows.
    """
    bits = np.asarray(bits, dtype=np.int64)
    cols = np.zeros(bits.shape[:-1] + (k,), dtype=np.int64)
    for j in range(k):
        for i in range(m):
            cols[..., j] |= bits[..., i - j + k - 1] << i
    return cols


def toeplitz_tables(cols: np.ndarray) -> np.ndarray:
    """Outputs of ``x -> T x`` for every ``x`` in ``[0, 2**k)`` (batched)."""
    cols = np.atleast_2d(cols)
    tab = np.zeros((cols.shape[0], 1), dtype=np.int64)
    for j in range(cols.shape[1]):
        tab = np.concatenate([tab, tab ^ cols[:, j : j + 1]], axis=1)
    return tab


def _toeplitz_table(bits, k, m) -> np.ndarray:
    if k == 0:
        return np.zeros(1, dtype=np.int64)
    if m == 0:
        return np.zeros(2**k, dtype=np.int64)
    return toeplitz_tables(toeplitz_columns(bits, k, m))[0]


def sample(family: HashFamily, seed: int) -> HashInstance:
    """Draw the member of ``family`` selected by ``seed`` (deterministic)."""
    rng = rng_for(seed)
    if family.kind == "fully_random_table":
        mat = rng.integers(0, family.range_size, size=family.domain_size, dtype=np.int64)
    elif family.kind == "toeplitz_gf2":
        mat = rng.integers(0, 2, size=_toeplitz_nbits(family), dtype=np.uint8)
    else:
        mat = np.array(rng.integers(1, family.prime), dtype=np.int64)
    return HashInstance(family, mat)


def apply(instance: HashInstance, element) -> int:
    """Bucket in ``[1, N]`` of a domain element."""
    x = int(element)
    if not 0 <= x < instance.family.domain_size:
        raise IndexError(f"element {x} outside domain [0, {instance.family.domain_size})")
    return int(instance.table[x]) + 1


def enumerate_family(family: HashFamily) -> Iterator[tuple]:
    """Yield ``(instance, weight)`` over the whole family; weights sum to one."""
    weight = 1.0 / family.member_count()
    for inst in family.members():
        yield inst, weight


class AuditResult(NamedTuple):
    """Worst pairwise collision probability of a family."""

    max_collision: object  # Fraction in exact mode, float when sampled
    bound: float  # epsilon / N
    passed: bool
    worst_pair: tuple
    ci: tuple | None = None


def collision_audit(family: HashFamily, mode: str = "exact", budget: int = 10_000,
                    seed: int = 0) -> AuditResult:
    """Maximum over distinct pairs of ``Pr{f(a1) = f(a2)}``.

    ``mode="exact"`` enumerates the family and returns a :class:`Fraction`;
    ``mode="sampled"`` draws ``budget`` members and reports a Wilson interval
    for the worst observed pair, Bonferroni-corrected over all pairs so the
    family-wide level is 95%.
    """
    bound = family.epsilon / family.range_size
    if family.domain_size < 2:
        return AuditResult(Fraction(0), bound, True, ())
    if mode == "exact":
        if family.member_count() > MAX_MEMBERS:
            raise EnumerationError("exact audit needs an enumerable family")
        tables = np.stack([inst.table for inst in family.members()])
        total = tables.shape[0]
    elif mode == "sampled":
        tables = np.stack([sample(family, derive_seed(seed, i)).table for i in range(budget)])
        total = budget
    else:
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    best, pair = -1, ()
    for a in range(family.domain_size - 1):
        counts = np.sum(tables[:, a : a + 1] == tables[:, a + 1 :], axis=0)
        j = int(np.argmax(counts))
        if counts[j] > best:
            best, pair = int(counts[j]), (a, a + 1 + j)
    if mode == "exact":
        prob = Fraction(best, total)
        exact_bound = Fraction(int(family.epsilon), family.range_size)
        return AuditResult(prob, bound, prob <= exact_bound, pair)
    pairs = family.domain_size * (family.domain_size - 1) // 2
    ci = binomtest(best, total).proportion_ci(confidence_level=1 - 0.05 / pairs, method="wilson")
    prob = best / total
    return AuditResult(prob, bound, ci.low <= bound, pair, (ci.low, ci.high))
