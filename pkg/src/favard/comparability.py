"""Empirical comparability of a solution with its driving base point.

The criterion under test: for every epsilon there is a delta such that any
shift returning the base phase within delta also returns the solution state
within epsilon.  On finite data the shift range, the scan resolution and the
candidate delta grid are explicit parameters carried by every report.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .cocycle import CocycleSystem, _as_state, affine_path, evaluate_affine
from .errors import BlowUpError

#: Geometric candidate grid pi, pi/2, ..., pi/2**20 for the modulus search.
DEFAULT_DELTA_GRID = tuple(math.pi * 0.5**k for k in range(21))

_BLOWUP_FACTOR = 1e8


@dataclass(frozen=True)
class ComparabilityReport:
    epsilons: tuple
    deltas: tuple  # delta(epsilon) per entry; 0.0 means no admissible delta
    counts: tuple  # qualifying shifts backing each delta(epsilon)
    horizon: float
    min_tau: float
    scan_step: float
    base_return_count: int
    solution_norm_kind: str

    def __post_init__(self):
        if not (len(self.epsilons) == len(self.deltas) == len(self.counts)):
            raise ValueError("epsilons, deltas and counts must have equal length")

    def delta_of(self, epsilon: float) -> float:
        return self.deltas[self.epsilons.index(epsilon)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epsilon,delta,horizon,count\n")
        for eps, dlt, cnt in zip(self.epsilons, self.deltas, self.counts):
            buf.write(f"{eps!r},{dlt!r},{self.horizon!r},{cnt}\n")
        return buf.getvalue()


def _scan_shifts(sys: CocycleSystem, span: float, scan_step: float | None) -> np.ndarray:
    if sys.continuous:
        step = 0.01 if scan_step is None else scan_step
        step = max(1, round(step / sys.h)) * sys.h
        count = int(math.floor(span / step + 1e-9))
        return step * np.arange(1, count + 1)
    stride = 1 if scan_step is None else max(1, int(round(scan_step)))
    return np.arange(1, int(span) + 1, stride, dtype=float)


def estimate_modulus(
    sys: CocycleSystem,
    u,
    epsilons,
    horizon: float,
    delta_grid=DEFAULT_DELTA_GRID,
    min_tau: float = 0.0,
    scan_step: float | None = None,
) -> ComparabilityReport:
    """Modulus delta(epsilon) of the recurrence-comparability test.

    ``min_tau`` advances the tested point along its own trajectory before
    scanning, so a decaying transient can be excluded; the shift scan then
    covers (0, horizon - min_tau].  For each epsilon the reported delta is
    the largest grid value whose qualifying shifts (base quality below
    delta, at least one of them) all return the state within epsilon; a
    vacuously satisfied delta with no qualifying shift does not count.
    """
    u = _as_state(sys, u)
    if min_tau > 0:
        u = evaluate_affine(sys, u, float(min_tau))
        sys = sys.shifted(float(min_tau))
    taus = _scan_shifts(sys, horizon - min_tau, scan_step)
    if taus.size == 0:
        raise ValueError("horizon leaves no shifts to scan")
    Phi, b = affine_path(sys, taus)
    states = Phi @ u + b
    peak = float(np.max(sys.state_norm(states)))
    nu = float(sys.state_norm(u))
    if not np.isfinite(peak) or peak > _BLOWUP_FACTOR * (1.0 + nu):
        raise BlowUpError(
            f"trajectory exceeded the bounded-orbit threshold (peak {peak:.3g})"
        )
    deviations = sys.state_norm(states - u)
    qualities = sys.spec.base_return_quality(taus)

    grid = sorted(delta_grid)
    deltas, counts = [], []
    for eps in epsilons:
        best, best_count = 0.0, 0
        for g in grid:
            mask = qualities < g
            hits = int(np.count_nonzero(mask))
            if hits and bool(np.all(deviations[mask] < eps)):
                best, best_count = g, hits
        deltas.append(best)
        counts.append(best_count)
    return ComparabilityReport(
        epsilons=tuple(float(e) for e in epsilons),
        deltas=tuple(deltas),
        counts=tuple(counts),
        horizon=float(horizon),
        min_tau=float(min_tau),
        scan_step=float(taus[0]),
        base_return_count=max(counts) if counts else 0,
        solution_norm_kind=sys.norm_kind,
    )


def check_sequence_inclusion(sys: CocycleSystem, u, taus, epsilon: float):
    """True iff the state returns within epsilon along every listed base shift.

    Returns (ok, (worst_tau, worst_deviation)).
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(np.diff(taus) < 0):
        raise ValueError("taus must be sorted increasing")
    u = _as_state(sys, u)
    Phi, b = affine_path(sys, taus)
    deviations = sys.state_norm(Phi @ u + b - u)
    worst = int(np.argmax(deviations))
    ok = bool(np.all(deviations < epsilon))
    return ok, (float(taus[worst]), float(deviations[worst]))
