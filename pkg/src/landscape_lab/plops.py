"""Step statistics, local optima scores and PLOP detection.

A point's score compares the sizes of the steps walkers took to leave it with
the sizes of the steps that brought them there. Large outgoing steps relative
to incoming ones flag a potential local optimum point (PLOP).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InputError
from .problems import Landscape, codes_to_strings, popcount, strings_to_codes
from .sampling import Sample
from .walks import WalkRecord, WalkSet

LOS_CONSTANT = 7.0
"""Score given to points that were entered but never left."""

_CHUNK = 1 << 20


def _mode_from_hist(hist: np.ndarray) -> np.ndarray:
    """Row-wise most frequent size, smallest on ties, 0 for empty rows."""
    # argmax returns the first (smallest) position among equal maxima
    return np.where(hist.sum(axis=1) > 0, hist.argmax(axis=1), 0)


@dataclass(eq=False)
class StepStatsTable:
    """Incoming and outgoing step-size multisets per sample point.

    The multisets are kept as histograms of shape ``(len(sample), n + 1)``;
    column ``s`` counts steps of Hamming size ``s``. Statistics of an empty
    multiset are 0, which can never be a real step size.
    """

    sample: Sample
    incoming: np.ndarray
    outgoing: np.ndarray

    def __post_init__(self):
        shape = (len(self.sample), self.sample.n + 1)
        if self.incoming.shape != shape or self.outgoing.shape != shape:
            raise InputError(f"step histograms must have shape {shape}")
        sizes = np.arange(shape[1])
        for name, h in (("in", self.incoming), ("out", self.outgoing)):
            total = h.sum(axis=1)
            seen = total > 0
            avg = np.zeros(shape[0])
            avg[seen] = (h[seen] @ sizes) / total[seen]
            setattr(self, f"{name}_count", total)
            setattr(self, f"{name}_avg", avg)
            setattr(self, f"{name}_mode", _mode_from_hist(h))
        self.in_max = np.where(self.in_count > 0, shape[1] - 1 - np.argmax(self.incoming[:, ::-1] > 0, axis=1), 0)
        self.out_min = np.where(self.out_count > 0, np.argmax(self.outgoing > 0, axis=1), 0)

    def multiset(self, code: int, direction: str = "in") -> list[int]:
        """Sorted step sizes of one point, ``direction`` being ``"in"`` or ``"out"``."""
        h = self.incoming if direction == "in" else self.outgoing
        row = h[self.sample.index_of(code)]
        return [s for s in range(row.size) for _ in range(int(row[s]))]

    def merge(self, other: "StepStatsTable") -> "StepStatsTable":
        if other.sample is not self.sample and not np.array_equal(other.sample.points, self.sample.points):
            raise InputError("step tables are over different samples")
        return StepStatsTable(self.sample, self.incoming + other.incoming, self.outgoing + other.outgoing)


def _as_walkset(walks, n: int) -> WalkSet:
    if isinstance(walks, WalkSet):
        return walks
    records = list(walks)
    if records and not all(isinstance(r, WalkRecord) for r in records):
        raise InputError("expected a WalkSet or WalkRecords")
    return WalkSet.from_records(n, records)


def accumulate_steps(sample: Sample, walks: WalkSet | Iterable[WalkRecord]) -> StepStatsTable:
    """Histogram every walk step at its origin (outgoing) and destination (incoming)."""
    ws = _as_walkset(walks, sample.n)
    if ws.n != sample.n:
        raise InputError("walks and sample differ in bit length")
    m, width = len(sample), sample.n + 1
    inc = np.zeros(m * width, dtype=np.int64)
    out = np.zeros(m * width, dtype=np.int64)
    a, b = ws.paths[:, :-1], ws.paths[:, 1:]
    valid = b >= 0
    src, dst = a[valid], b[valid]
    size = popcount(src ^ dst).astype(np.int64)
    si, di = sample.position[src], sample.position[dst]
    if np.any(si < 0) or np.any(di < 0):
        raise InputError("walks visit points outside the sample")
    np.add.at(out, si * width + size, 1)
    np.add.at(inc, di * width + size, 1)
    return StepStatsTable(sample, inc.reshape(m, width), out.reshape(m, width))


def local_optima_score(in_max, in_avg, in_mode, out_min, out_avg, out_mode):
    """Score for one point or, given arrays, for many.

    No incoming step scores 0; incoming but no outgoing step scores
    :data:`LOS_CONSTANT`; otherwise the positive parts of
    ``out_mode - in_mode``, ``out_avg - in_avg`` and ``out_min - in_max`` are summed.
    """
    in_max, out_min = np.asarray(in_max), np.asarray(out_min)
    pos = lambda v: np.maximum(np.asarray(v, dtype=float), 0.0)
    body = pos(np.asarray(out_mode) - in_mode) + pos(np.asarray(out_avg) - in_avg) + pos(out_min - in_max)
    los = np.where(in_max == 0, 0.0, np.where(out_min == 0, LOS_CONSTANT, body))
    return float(los) if los.ndim == 0 else los


@dataclass(eq=False)
class LosReport:
    """Scores for every sample point; ``plop`` marks the points with a positive score."""

    sample: Sample
    stats: StepStatsTable | None
    los: np.ndarray
    plef: np.ndarray | None = None

    @property
    def plop(self) -> np.ndarray:
        return self.los > 0.0

    @property
    def plop_codes(self) -> np.ndarray:
        return self.sample.points[self.plop]

    @property
    def plop_count(self) -> int:
        return int(self.plop.sum())

    def with_plef(self, inst: Landscape) -> "LosReport":
        return LosReport(self.sample, self.stats, self.los, plef_scores(inst, self.sample.points))

    def to_csv(self, path: str | Path) -> None:
        s, st = self.sample, self.stats
        if st is None:
            raise InputError("a report loaded without step statistics cannot be written back")
        bits = codes_to_strings(s.points, s.n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bits", "fitness", "in_max", "in_avg", "in_mode", "out_min", "out_avg", "out_mode", "los", "is_plop", "plef"])
            for i in range(len(s)):
                w.writerow([
                    bits[i], repr(float(s.fitness[i])), int(st.in_max[i]), repr(float(st.in_avg[i])), int(st.in_mode[i]),
                    int(st.out_min[i]), repr(float(st.out_avg[i])), int(st.out_mode[i]), repr(float(self.los[i])),
                    int(self.los[i] > 0), "" if self.plef is None else repr(float(self.plef[i])),
                ])


def load_los_report(path: str | Path) -> LosReport:
    """Read a report CSV back; step statistics are not reconstructed."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read report {path}: {exc}") from exc
    if not rows:
        raise InputError(f"report {path} is empty")
    try:
        bits = [r["bits"] for r in rows]
        fit = np.array([float(r["fitness"]) for r in rows])
        los = np.array([float(r["los"]) for r in rows])
        plef = None if rows[0].get("plef", "") == "" else np.array([float(r["plef"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed report {path}: {exc}") from exc
    codes = strings_to_codes(bits)
    order = np.argsort(codes, kind="stable")
    sample = Sample(len(bits[0]), codes[order], fit[order], "MANUAL")
    return LosReport(sample, None, los[order], None if plef is None else plef[order])


def detect_plops(sample: Sample, walks: WalkSet | Iterable[WalkRecord], inst: Landscape | None = None) -> LosReport:
    """Score every sample point from the walks; attach oracle ``plef`` values when ``inst`` is given."""
    st = walks if isinstance(walks, StepStatsTable) else accumulate_steps(sample, walks)
    los = local_optima_score(st.in_max, st.in_avg, st.in_mode, st.out_min, st.out_avg, st.out_mode)
    report = LosReport(sample, st, np.asarray(los, dtype=float))
    return report.with_plef(inst) if inst is not None else report


# -- plef oracle ---------------------------------------------------------------

def plef_scores(inst: Landscape, codes: np.ndarray | None = None) -> np.ndarray:
    """Fraction of 1-bit-flip neighbours no fitter than the point, over the full landscape."""
    n = inst.n
    values = inst.values
    codes = np.arange(1 << n, dtype=np.int64) if codes is None else np.asarray(codes, dtype=np.int64)
    flips = (1 << np.arange(n, dtype=np.int64))
    out = np.empty(codes.size)
    step = max(1, _CHUNK // n)
    for lo in range(0, codes.size, step):
        c = codes[lo:lo + step]
        out[lo:lo + step] = (values[c[:, None] ^ flips[None, :]] <= values[c][:, None]).sum(axis=1) / n
    return out


def plef_score(inst: Landscape, p) -> float:
    """Scalar form of :func:`plef_scores` for one point (code or :class:`BitPoint`)."""
    code = int(getattr(p, "code", p))
    v = inst.evaluate_codes(np.array([code] + [code ^ (1 << b) for b in range(inst.n)], dtype=np.int64))
    return float(np.count_nonzero(v[1:] <= v[0])) / inst.n


def plef_local_optima(inst: Landscape) -> np.ndarray:
    """Codes of all points with plef 1.0."""
    return np.flatnonzero(plef_scores(inst) == 1.0).astype(np.int64)


def detection_metrics(report: LosReport, inst: Landscape, lo_total: int | None = None) -> dict:
    """Detection quality of one report against the plef oracle.

    ``lo_total`` (number of plef local optima in the whole space) is computed
    when not supplied; pass it to avoid rescanning the landscape.
    """
    plef = report.plef if report.plef is not None else plef_scores(inst, report.sample.points)
    is_lo = plef == 1.0
    in_sample = int(is_lo.sum())
    total = int(plef_local_optima(inst).size) if lo_total is None else int(lo_total)
    detected = int((is_lo & report.plop).sum())
    plops = report.plop_count
    plop_fit = report.sample.fitness[report.plop]
    return {
        "plop_count": plops,
        "plef_lo_count_in_sample": in_sample,
        "plef_lo_count_total": total,
        "detection_rate": detected / in_sample if in_sample else None,
        "overestimation_factor": plops / total if total else None,
        "capture_rate": in_sample / total if total else None,
        "plop_mean_fitness": float(plop_fit.mean()) if plops else None,
        "plop_mean_plef": float(plef[report.plop].mean()) if plops else None,
        "sample_mean_fitness": float(report.sample.fitness.mean()),
        "sample_mean_plef": float(plef.mean()),
    }


def estimator_metrics(est, act) -> dict:
    """False-positive and false-negative rates and Jaccard overlap of two PLOP sets.

    Rates whose denominator set is empty are ``None``.
    """
    e = {int(c) for c in est}
    a = {int(c) for c in act}
    both, union = len(e & a), len(e | a)
    return {
        "fp": len(e - a) / len(e) if e else None,
        "fn": len(a - e) / len(a) if a else None,
        "overlap": both / union if union else None,
        "est_count": len(e),
        "act_count": len(a),
    }
