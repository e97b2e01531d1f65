"""Binary search spaces: points, Hamming geometry and the NK / HIFF fitness families.

Points are encoded as unsigned integer codes with locus 0 stored in the most
significant bit, so integer order on codes is lexicographic order on the bit
strings. Vectorized evaluation over whole code arrays is the workhorse; the
scalar functions (:func:`nk_fitness`, :func:`hiff_fitness`) are written
independently and double as reference implementations in the tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import CapabilityError, ConfigurationError, InputError

MAX_N = 24
HIFF_VARIANTS = ("classic", "hiffc", "hiffm")


@dataclass(frozen=True, order=True)
class BitPoint:
    """A fixed-length binary string.

    Ordering compares length first and then code, which for equal lengths is
    lexicographic order on the bits.
    """

    n: int
    code: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_N:
            raise InputError(f"point length must be in [1, {MAX_N}], got {self.n}")
        if not 0 <= self.code < (1 << self.n):
            raise InputError(f"code {self.code} does not fit in {self.n} bits")

    @classmethod
    def from_str(cls, bits: str) -> "BitPoint":
        if not bits or set(bits) - {"0", "1"}:
            raise InputError(f"not a bit string: {bits!r}")
        return cls(len(bits), int(bits, 2))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BitPoint":
        return cls.from_str("".join(str(int(b)) for b in bits))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.code >> (self.n - 1 - i)) & 1 for i in range(self.n))

    def flip(self, locus: int) -> "BitPoint":
        return BitPoint(self.n, self.code ^ (1 << (self.n - 1 - locus)))

    def complement(self) -> "BitPoint":
        return BitPoint(self.n, self.code ^ ((1 << self.n) - 1))

    def __len__(self) -> int:
        return self.n

    def __str__(self) -> str:
        return format(self.code, f"0{self.n}b")


PointLike = Union[BitPoint, str, Sequence[int]]


def as_point(p: PointLike) -> BitPoint:
    if isinstance(p, BitPoint):
        return p
    if isinstance(p, str):
        return BitPoint.from_str(p)
    return BitPoint.from_bits(p)


def hamming_distance(a: PointLike, b: PointLike) -> int:
    """Number of loci at which two equal-length points differ."""
    a, b = as_point(a), as_point(b)
    if a.n != b.n:
        raise InputError(f"length mismatch: {a.n} vs {b.n}")
    return (a.code ^ b.code).bit_count()


def popcount(x) -> np.ndarray:
    """Elementwise number of set bits of a non-negative integer array."""
    return np.bitwise_count(np.asarray(x, dtype=np.uint32)).astype(np.int64)


def codes_to_strings(codes: Iterable[int], n: int) -> list[str]:
    fmt = f"0{n}b"
    return [format(int(c), fmt) for c in codes]


def strings_to_codes(bits: Iterable[str]) -> np.ndarray:
    return np.array([int(b, 2) for b in bits], dtype=np.int64)


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise CapabilityError(f"n must be in [1, {MAX_N}], got {n}")


class Landscape:
    """Common surface of a fitness function over ``2**n`` binary strings."""

    n: int
    kind: str

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def ref(self) -> str:
        raise NotImplementedError

    def evaluate_codes(self, codes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fitness(self, p: PointLike) -> float:
        raise NotImplementedError

    @cached_property
    def values(self) -> np.ndarray:
        """Fitness of every point, indexed by code. Computed once and cached."""
        _check_n(self.n)
        return self.evaluate_codes(np.arange(self.size, dtype=np.int64))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class NkInstance(Landscape):
    """Kauffman NK landscape with random neighbourhoods.

    ``tables[i][c]`` is the contribution of locus ``i`` when its local
    configuration integer is ``c``: the bit of locus ``i`` is the most
    significant bit, followed by the bits of ``neighborhoods[i]`` in order.
    """

    n: int
    k: int
    neighborhoods: tuple[tuple[int, ...], ...]
    tables: np.ndarray
    seed: int | None = None
    kind: str = field(default="nk", init=False)

    def __post_init__(self):
        _check_n(self.n)
        if not 0 <= self.k <= self.n - 1:
            raise InputError(f"k must satisfy 0 <= k <= n-1, got k={self.k}, n={self.n}")
        if len(self.neighborhoods) != self.n:
            raise InputError("one neighbourhood per locus required")
        for i, nb in enumerate(self.neighborhoods):
            if len(nb) != self.k or len(set(nb)) != self.k or i in nb:
                raise InputError(f"neighbourhood of locus {i} must hold {self.k} distinct loci other than {i}")
            if any(not 0 <= j < self.n for j in nb):
                raise InputError(f"neighbourhood of locus {i} references a locus outside [0, {self.n})")
        tables = np.asarray(self.tables, dtype=np.float64)
        if tables.shape != (self.n, 1 << (self.k + 1)):
            raise InputError(f"tables must have shape ({self.n}, {1 << (self.k + 1)}), got {tables.shape}")
        if tables.size and (tables.min() < 0.0 or tables.max() >= 1.0):
            raise InputError("table entries must lie in [0, 1)")
        object.__setattr__(self, "tables", tables)

    @property
    def ref(self) -> str:
        return f"nk-n{self.n}-k{self.k}-s{self.seed}"

    def evaluate_codes(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        total = np.zeros(codes.shape, dtype=np.float64)
        for i in range(self.n):
            idx = (codes >> (self.n - 1 - i)) & 1
            for j in self.neighborhoods[i]:
                idx = (idx << 1) | ((codes >> (self.n - 1 - j)) & 1)
            total += self.tables[i][idx]
        return total / self.n

    def fitness(self, p: PointLike) -> float:
        return nk_fitness(self, p)

    def to_dict(self) -> dict:
        return {
            "kind": "nk",
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "bit_order": "locus 0 = most significant bit",
            "neighborhoods": [list(nb) for nb in self.neighborhoods],
            "tables": self.tables.tolist(),
        }


def generate_nk(n: int, k: int, seed: int) -> NkInstance:
    """Draw an NK instance; the same ``(n, k, seed)`` always gives the same instance."""
    _check_n(n)
    if not 0 <= k <= n - 1:
        raise InputError(f"k must satisfy 0 <= k <= n-1, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    neighborhoods = []
    for i in range(n):
        others = np.array([j for j in range(n) if j != i])
        picked = rng.choice(others, size=k, replace=False) if k else np.array([], dtype=int)
        neighborhoods.append(tuple(sorted(int(j) for j in picked)))
    tables = rng.random((n, 1 << (k + 1)))
    return NkInstance(n=n, k=k, neighborhoods=tuple(neighborhoods), tables=tables, seed=seed)


def nk_fitness(inst: NkInstance, p: PointLike) -> float:
    """Mean over loci of the table contribution selected by each local configuration."""
    p = as_point(p)
    if p.n != inst.n:
        raise InputError(f"point has length {p.n}, instance expects {inst.n}")
    bits = p.bits
    total = 0.0
    for i in range(inst.n):
        local = [bits[i]] + [bits[j] for j in inst.neighborhoods[i]]
        c = int("".join(map(str, local)), 2)
        total += float(inst.tables[i][c])
    return total / inst.n


@dataclass(frozen=True, eq=False)
class TabulatedLandscape(Landscape):
    """Landscape given by an explicit fitness value for every code."""

    n: int
    table: np.ndarray
    name: str = "table"
    kind: str = field(default="table", init=False)

    def __post_init__(self):
        _check_n(self.n)
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != (1 << self.n,):
            raise InputError(f"table must hold {1 << self.n} values, got shape {table.shape}")
        object.__setattr__(self, "table", table)

    @property
    def seed(self) -> None:
        return None

    @property
    def ref(self) -> str:
        return self.name

    def evaluate_codes(self, codes: np.ndarray) -> np.ndarray:
        return self.table[np.asarray(codes, dtype=np.int64)]

    def fitness(self, p: PointLike) -> float:
        p = as_point(p)
        if p.n != self.n:
            raise InputError(f"point has length {p.n}, instance expects {self.n}")
        return float(self.table[p.code])

    def to_dict(self) -> dict:
        return {"kind": "table", "n": self.n, "name": self.name, "table": self.table.tolist()}


# -- HIFF ---------------------------------------------------------------------

HiffEvaluator = Callable[[np.ndarray, int], np.ndarray]


def _classic_hiff_codes(codes: np.ndarray, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    total = np.zeros(codes.shape, dtype=np.float64)
    size = 1
    while size <= n:
        full = (1 << size) - 1
        for start in range(0, n, size):
            block = (codes >> (n - start - size)) & full
            total += np.where((block == 0) | (block == full), float(size), 0.0)
        size *= 2
    return total


@dataclass
class HiffVariant:
    evaluate: HiffEvaluator
    # fixed bin layout (start, stop, width) for Wang-Landau sampling, if any
    bins: tuple[float, float, float] | None = None


_HIFF_REGISTRY: dict[str, HiffVariant] = {"classic": HiffVariant(_classic_hiff_codes)}


def register_hiff_variant(name: str, evaluate: HiffEvaluator, bins: tuple[float, float, float] | None = None) -> None:
    """Install a fitness function for a HIFF variant.

    ``evaluate(codes, n)`` must return one fitness per code. ``bins`` optionally
    fixes the sampling bin layout as ``(start, stop, width)``.
    """
    if name not in HIFF_VARIANTS:
        raise InputError(f"unknown HIFF variant {name!r}; expected one of {HIFF_VARIANTS}")
    _HIFF_REGISTRY[name] = HiffVariant(evaluate, bins)


def unregister_hiff_variant(name: str) -> None:
    if name == "classic":
        raise InputError("the classic variant cannot be removed")
    _HIFF_REGISTRY.pop(name, None)


def hiff_variant(name: str) -> HiffVariant:
    try:
        return _HIFF_REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"HIFF variant {name!r} has no registered fitness function; "
            "install one with register_hiff_variant()"
        ) from None


@dataclass(frozen=True, eq=False)
class HiffInstance(Landscape):
    n: int
    variant: str = "classic"
    kind: str = field(default="hiff", init=False)

    def __post_init__(self):
        _check_n(self.n)
        if self.n & (self.n - 1):
            raise InputError(f"HIFF length must be a power of two, got {self.n}")
        if self.variant not in HIFF_VARIANTS:
            raise InputError(f"unknown HIFF variant {self.variant!r}; expected one of {HIFF_VARIANTS}")

    @property
    def seed(self) -> None:
        return None

    @property
    def ref(self) -> str:
        return f"hiff-n{self.n}-{self.variant}"

    def evaluate_codes(self, codes: np.ndarray) -> np.ndarray:
        return np.asarray(hiff_variant(self.variant).evaluate(np.asarray(codes, dtype=np.int64), self.n), dtype=np.float64)

    def fitness(self, p: PointLike) -> float:
        return hiff_fitness(self, p)

    def to_dict(self) -> dict:
        return {"kind": "hiff", "n": self.n, "variant": self.variant}


def hiff_fitness(inst: HiffInstance, p: PointLike) -> float:
    """Classic HIFF sums the size of every homogeneous aligned block at every level."""
    p = as_point(p)
    if p.n != inst.n:
        raise InputError(f"point has length {p.n}, instance expects {inst.n}")
    if inst.variant != "classic":
        return float(hiff_variant(inst.variant).evaluate(np.array([p.code]), inst.n)[0])
    s = str(p)
    total = 0
    size = 1
    while size <= inst.n:
        for start in range(0, inst.n, size):
            if len(set(s[start:start + size])) == 1:
                total += size
        size *= 2
    return float(total)


def fitness_extrema(inst: Landscape) -> tuple[float, float]:
    """Exact minimum and maximum fitness over the whole space."""
    _check_n(inst.n)
    if isinstance(inst, HiffInstance) and inst.variant == "classic":
        # every block of size >= 2 is mixed in 0101...; homogeneous strings score at every level
        return float(inst.n), float(inst.n * (int(math.log2(inst.n)) + 1))
    v = inst.values
    return float(v.min()), float(v.max())


# -- persistence ------------------------------------------------------------------

def instance_from_dict(d: dict) -> Landscape:
    kind = d.get("kind")
    if kind == "nk":
        return NkInstance(
            n=int(d["n"]),
            k=int(d["k"]),
            neighborhoods=tuple(tuple(int(j) for j in nb) for nb in d["neighborhoods"]),
            tables=np.array(d["tables"], dtype=np.float64),
            seed=d.get("seed"),
        )
    if kind == "hiff":
        return HiffInstance(n=int(d["n"]), variant=d.get("variant", "classic"))
    if kind == "table":
        return TabulatedLandscape(n=int(d["n"]), table=np.array(d["table"], dtype=np.float64), name=d.get("name", "table"))
    raise InputError(f"unknown instance kind {kind!r}")


def save_instance(inst: Landscape, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), sort_keys=True) + "\n")


def load_instance(path: str | Path) -> Landscape:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read instance file {path}: {exc}") from exc
    return instance_from_dict(d)
