"""Point sets fed to the walkers: full enumeration, adjusted Wang-Landau and uniform random.

The adjusted Wang-Landau sampler runs an ordinary flat-histogram random walk
over fitness bins with 1-bit-flip proposals, but stops early once the
histogram has been flat often enough and enough distinct points have been
seen, or as soon as the sample reaches its size cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapabilityError, InputError, InternalError
from .problems import MAX_N, HiffInstance, Landscape, codes_to_strings, fitness_extrema, hiff_variant, strings_to_codes

ORIGINS = ("ENUM", "AWL", "RAND")


@dataclass(eq=False)
class Sample:
    """A duplicate-free set of points with their fitness values.

    ``points`` is kept sorted by code; ``fitness[i]`` belongs to ``points[i]``.
    """

    n: int
    points: np.ndarray
    fitness: np.ndarray
    origin: str
    instance_ref: str = ""
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.int64)
        fitness = np.asarray(self.fitness, dtype=np.float64)
        if points.shape != fitness.shape or points.ndim != 1:
            raise InputError("points and fitness must be 1-D arrays of equal length")
        order = np.argsort(points, kind="stable")
        points, fitness = points[order], fitness[order]
        if points.size and (np.any(np.diff(points) == 0)):
            raise InputError("sample contains duplicate points")
        if points.size and (points[0] < 0 or points[-1] >= (1 << self.n)):
            raise InputError(f"point codes must lie in [0, 2**{self.n})")
        if self.origin not in ORIGINS and self.origin != "MANUAL":
            raise InputError(f"unknown sample origin {self.origin!r}")
        self.points, self.fitness = points, fitness

    @classmethod
    def from_points(cls, inst: Landscape, codes: Sequence[int], origin: str = "MANUAL", seed: int | None = None, **meta) -> "Sample":
        codes = np.unique(np.asarray(codes, dtype=np.int64))
        return cls(inst.n, codes, inst.evaluate_codes(codes), origin, inst.ref, seed, dict(meta))

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def coverage(self) -> float:
        return len(self) / float(1 << self.n)

    @cached_property
    def position(self) -> np.ndarray:
        """Map from code to index in the sample, ``-1`` for absent codes."""
        pos = np.full(1 << self.n, -1, dtype=np.int64)
        pos[self.points] = np.arange(len(self))
        return pos

    def contains(self, code: int) -> bool:
        return bool(self.position[code] >= 0)

    def index_of(self, code: int) -> int:
        i = int(self.position[code])
        if i < 0:
            raise InputError(f"point {code} is not in the sample")
        return i

    def fitness_of(self, code: int) -> float:
        return float(self.fitness[self.index_of(code)])

    def check_against(self, inst: Landscape) -> bool:
        """True when every stored fitness equals a fresh evaluation on ``inst``."""
        return bool(np.array_equal(inst.evaluate_codes(self.points), self.fitness))

    def to_dict(self) -> dict:
        return {
            "origin": self.origin,
            "instance_ref": self.instance_ref,
            "seed": self.seed,
            "n": self.n,
            "meta": self.meta,
            "points": [{"bits": b, "fitness": float(f)} for b, f in zip(codes_to_strings(self.points, self.n), self.fitness)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        pts = d["points"]
        n = int(d.get("n") or len(pts[0]["bits"]))
        codes = strings_to_codes(p["bits"] for p in pts)
        fit = np.array([p["fitness"] for p in pts], dtype=np.float64)
        return cls(n, codes, fit, d["origin"], d.get("instance_ref", ""), d.get("seed"), d.get("meta") or {})


def save_sample(sample: Sample, path: str | Path) -> None:
    Path(path).write_text(json.dumps(sample.to_dict(), sort_keys=True) + "\n")


def load_sample(path: str | Path) -> Sample:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read sample file {path}: {exc}") from exc
    return Sample.from_dict(d)


def enumerate_space(inst: Landscape) -> Sample:
    """Every point of the space with its fitness."""
    if inst.n > MAX_N:
        raise CapabilityError(f"cannot enumerate n={inst.n} > {MAX_N}")
    codes = np.arange(1 << inst.n, dtype=np.int64)
    return Sample(inst.n, codes, inst.values.copy(), "ENUM", inst.ref, None)


def rand_sample(inst: Landscape, size: int, seed: int) -> Sample:
    """``size`` distinct points drawn uniformly without replacement."""
    total = 1 << inst.n
    if not 1 <= size <= total:
        raise InputError(f"sample size must be in [1, {total}], got {size}")
    rng = np.random.default_rng(seed)
    codes = np.sort(rng.choice(total, size=size, replace=False)).astype(np.int64)
    return Sample(inst.n, codes, inst.evaluate_codes(codes), "RAND", inst.ref, seed)


# -- bins ---------------------------------------------------------------------

@dataclass(frozen=True)
class BinLayout:
    """Fitness bins ``[edges[i], edges[i+1])``; the last bin is closed on the right.

    ``live`` lists the raw bin indices that some point of the space falls in.
    """

    edges: tuple[float, ...]
    live: tuple[int, ...]

    def __post_init__(self):
        if len(self.edges) < 2 or any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise InputError("bin edges must be strictly increasing with at least two entries")
        if not self.live or any(not 0 <= i < len(self.edges) - 1 for i in self.live):
            raise InputError("live bins must be a non-empty subset of the raw bins")

    @property
    def raw_count(self) -> int:
        return len(self.edges) - 1

    def raw_index(self, values) -> np.ndarray:
        """Raw bin index per value, ``-1`` outside ``[edges[0], edges[-1]]``."""
        v = np.asarray(values, dtype=np.float64)
        idx = np.searchsorted(np.asarray(self.edges), v, side="right") - 1
        idx = np.where(v == self.edges[-1], self.raw_count - 1, idx)
        return np.where((v < self.edges[0]) | (v > self.edges[-1]), -1, idx)

    def live_index(self, values) -> np.ndarray:
        """Position among the live bins per value, ``-1`` if the value maps to no live bin."""
        lookup = np.full(self.raw_count, -1, dtype=np.int64)
        lookup[list(self.live)] = np.arange(len(self.live))
        raw = self.raw_index(values)
        return np.where(raw >= 0, lookup[np.maximum(raw, 0)], -1)


def build_bins(inst: Landscape, width: float | None = 0.1) -> BinLayout:
    """Equal-width bins from the minimum to the maximum fitness, empty ones removed.

    HIFF variants registered with a fixed layout use that layout instead.
    Pruning scans the full space, so it is only meant for small ``n``.
    """
    fixed = None
    if isinstance(inst, HiffInstance):
        fixed = hiff_variant(inst.variant).bins
    if fixed is not None:
        start, stop, step = fixed
        edges = np.arange(start, stop + step / 2, step)
    else:
        if width is None or not width > 0:
            raise InputError(f"bin width must be positive, got {width}")
        lo, hi = fitness_extrema(inst)
        count = max(1, math.ceil((hi - lo) / width))
        edges = lo + width * np.arange(count + 1)
        if edges[-1] < hi:
            edges[-1] = hi
    layout_all = BinLayout(tuple(float(e) for e in edges), tuple(range(len(edges) - 1)))
    raw = layout_all.raw_index(inst.values)
    live = np.unique(raw[raw >= 0])
    if live.size == 0:
        raise InputError("no fitness value falls inside the bin layout")
    return BinLayout(layout_all.edges, tuple(int(i) for i in live))


# -- adjusted Wang-Landau ---------------------------------------------------------

def is_flat(histogram: Sequence[float], flatness: float = 0.85) -> bool:
    """Every bin visited, and none below ``flatness`` times the mean count."""
    if len(histogram) == 0:
        return False
    lowest = min(histogram)
    return lowest > 0 and lowest >= flatness * (sum(histogram) / len(histogram))


def default_size_bounds(n: int) -> tuple[int, int]:
    max_size = 1 << n if n <= 16 else 1 << 16
    return max_size, max_size // 2


@dataclass
class WlParams:
    flatness: float = 0.85
    epsilon: float = 1e-8
    flat_target: int = 5
    max_size: int | None = None
    min_size: int | None = None
    seed: int = 0
    max_iterations: int | None = None
    trace_every: int = 1000

    def bounds(self, n: int) -> tuple[int, int]:
        dmax, _ = default_size_bounds(n)
        max_size = self.max_size if self.max_size is not None else dmax
        min_size = self.min_size if self.min_size is not None else max_size // 2
        return max_size, min_size


@dataclass
class WlState:
    """Final state of one adjusted Wang-Landau run."""

    ln_g: list[float]
    histogram: list[int]
    ln_f: float
    flat_count: int
    visited: list[int]
    iterations: int
    evaluations: int
    terminated_by: str
    trace: list[dict]


def run_wang_landau(inst: Landscape, bins: BinLayout, params: WlParams | None = None) -> WlState:
    """One adjusted Wang-Landau chain with 1-bit-flip proposals.

    Each iteration proposes a flip, accepts it with probability
    ``min(1, g(current bin) / g(proposed bin))``, then adds ``ln f`` to the
    current bin's ``ln g`` and one to its histogram count, and records the
    current point. On a flat histogram ``ln f`` is halved and the histogram reset.
    """
    params = params or WlParams()
    n = inst.n
    max_size, min_size = params.bounds(n)
    if not 0 < params.flatness <= 1:
        raise InputError("flatness must lie in (0, 1]")
    if params.flat_target < 0 or max_size < 1:
        raise InputError("flat_target must be >= 0 and max_size >= 1")
    bin_of = bins.live_index(inst.values).tolist()
    n_bins = len(bins.live)
    rng = np.random.default_rng(params.seed)

    ln_g = [0.0] * n_bins
    hist = [0] * n_bins
    ln_f = 1.0
    flat_count = 0
    seen = bytearray(1 << n)
    visited: list[int] = []
    trace: list[dict] = []

    cur = int(rng.integers(1 << n))
    cur_bin = bin_of[cur]
    if cur_bin < 0:
        raise InternalError(f"fitness of point {cur} maps to no live bin")
    seen[cur] = 1
    visited.append(cur)
    evaluations = 1
    it = 0
    batch = 1 << 16
    flips: list[int] = []
    coins: list[float] = []
    exp = math.exp
    trace_every = max(1, params.trace_every)

    def record(event: str) -> None:
        trace.append({
            "iteration": it, "sample_size": len(visited), "flat_count": flat_count,
            "ln_f": ln_f, "f": round(exp(ln_f), 4), "event": event,
        })

    record("start")
    while True:
        j = it % batch
        if j == 0:
            flips = (1 << rng.integers(0, n, batch)).tolist()
            coins = rng.random(batch).tolist()
        nxt = cur ^ flips[j]
        nxt_bin = bin_of[nxt]
        evaluations += 1
        if nxt_bin < 0:
            raise InternalError(f"fitness of point {nxt} maps to no live bin")
        delta = ln_g[cur_bin] - ln_g[nxt_bin]
        if delta >= 0.0 or coins[j] < exp(delta):
            cur, cur_bin = nxt, nxt_bin
        ln_g[cur_bin] += ln_f
        hist[cur_bin] += 1
        if not seen[cur]:
            seen[cur] = 1
            visited.append(cur)
        it += 1

        if is_flat(hist, params.flatness):
            flat_count += 1
            ln_f = max(ln_f / 2.0, params.epsilon)
            hist = [0] * n_bins
            record("flat")
        elif it % trace_every == 0:
            record("progress")

        if flat_count >= params.flat_target and len(visited) > min_size:
            reason = "flat"
            break
        if len(visited) >= max_size:
            reason = "max_size"
            break
        if params.max_iterations is not None and it >= params.max_iterations:
            reason = "iteration_cap"
            break
    record("end")
    return WlState(ln_g, hist, ln_f, flat_count, visited, it, evaluations, reason, trace)


def awl_sample(inst: Landscape, bins: BinLayout | None = None, params: WlParams | None = None) -> Sample:
    """The set of points visited by one adjusted Wang-Landau run."""
    params = params or WlParams()
    bins = bins or build_bins(inst)
    state = run_wang_landau(inst, bins, params)
    codes = np.sort(np.asarray(state.visited, dtype=np.int64))
    max_size, min_size = params.bounds(inst.n)
    meta = {
        "wang_landau": {
            "iterations": state.iterations,
            "evaluations": state.evaluations,
            "flat_count": state.flat_count,
            "final_ln_f": state.ln_f,
            "terminated_by": state.terminated_by,
            "max_size": max_size,
            "min_size": min_size,
            "flatness": params.flatness,
            "flat_target": params.flat_target,
            "bin_edges": list(bins.edges),
            "live_bins": list(bins.live),
            "ln_g": state.ln_g,
            "trace": state.trace,
        }
    }
    return Sample(inst.n, codes, inst.evaluate_codes(codes), "AWL", inst.ref, params.seed, meta)
