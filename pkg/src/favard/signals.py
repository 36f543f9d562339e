"""Finite-window signal analysis: compact-window metric and almost-period scans."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainMismatchError
from .torus import QuasiPeriodicSpec

_NORMS = ("euclidean", "sup", "delay_sum")


def vector_norm(values: np.ndarray, kind: str, block: int | None = None) -> np.ndarray:
    """Norm of each row of a (..., d) array.

    ``delay_sum`` sums the Euclidean norms of consecutive blocks of size
    ``block`` (the history-segment norm for delay states).
    """
    if kind == "euclidean":
        return np.linalg.norm(values, axis=-1)
    if kind == "sup":
        return np.max(np.abs(values), axis=-1)
    if kind == "delay_sum":
        if block is None or values.shape[-1] % block != 0:
            raise ValueError("delay_sum norm needs a block size dividing the dimension")
        parts = values.reshape(values.shape[:-1] + (-1, block))
        return np.sum(np.linalg.norm(parts, axis=-1), axis=-1)
    raise ValueError(f"unknown norm kind {kind!r}")


@dataclass(frozen=True)
class TrajectorySample:
    """Uniformly sampled vector path on a window starting at ``t0``."""

    t0: float
    dt: float
    values: np.ndarray  # (N, d)
    norm_kind: str = "euclidean"
    block: int | None = None  # block size for delay_sum

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[0] == 0:
            raise ValueError("values must be nonempty")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.norm_kind not in _NORMS:
            raise ValueError(f"norm_kind must be one of {_NORMS}")
        if self.norm_kind == "delay_sum" and self.block is None:
            raise ValueError("delay_sum samples must carry a block size")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self) - 1) * self.dt

    def index_of(self, t: float) -> int:
        """Nearest grid index for time ``t``; raises if outside the window."""
        i = round((t - self.t0) / self.dt)
        if i < 0 or i >= len(self):
            raise CoverageError(f"time {t} outside sampled window [{self.t0}, {self.t_end}]")
        return int(i)

    def diff_norms(self, other_values: np.ndarray) -> np.ndarray:
        return vector_norm(self.values - other_values, self.norm_kind, self.block)


def sample_signal(fn, t0: float, dt: float, count: int, **kwargs) -> TrajectorySample:
    """Sample a vectorized function of time on a uniform grid."""
    t = t0 + dt * np.arange(count)
    vals = np.asarray(fn(t), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return TrajectorySample(t0=t0, dt=dt, values=vals, **kwargs)


def sample_forcing(
    spec: QuasiPeriodicSpec, base_phase: np.ndarray, t0: float, dt: float, count: int
) -> TrajectorySample:
    """Sample the forcing term along the base flow."""
    t = t0 + dt * np.arange(count)
    theta = spec.phase_at(np.asarray(base_phase, dtype=float), t)
    return TrajectorySample(t0=t0, dt=dt, values=spec.forcing_form(theta))


def bebutov_distance(a: TrajectorySample, b: TrajectorySample, L_grid) -> float:
    """max over L of min(sup_{|t|<=L} |a-b|, 1/L), on the sampled grid.

    Both samples must share the same symmetric grid around 0.  The true
    distance takes a sup over every L > 0; here the caller supplies a finite
    grid of window half-widths.
    """
    if (
        abs(a.t0 - b.t0) > 1e-12
        or abs(a.dt - b.dt) > 1e-15
        or len(a) != len(b)
    ):
        raise DomainMismatchError("samples must share t0, dt and length")
    diffs = a.diff_norms(b.values)
    i_zero = a.index_of(0.0)
    best = 0.0
    for L in sorted(L_grid):
        if L <= 0:
            raise ValueError("window half-widths must be positive")
        k = int(math.floor(L / a.dt + 1e-9))
        lo = max(0, i_zero - k)
        hi = min(len(a), i_zero + k + 1)
        best = max(best, min(float(np.max(diffs[lo:hi])), 1.0 / L))
    return best


@dataclass(frozen=True)
class AlmostPeriodReport:
    """Shifts tau whose windowed translation error stays below epsilon."""

    epsilon: float
    window_halfwidth: float
    periods: np.ndarray
    max_gap: float
    scan_range: tuple[float, float]
    scan_step: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("tau,window_L,epsilon\n")
        for tau in self.periods:
            buf.write(f"{tau!r},{self.window_halfwidth!r},{self.epsilon!r}\n")
        return buf.getvalue()


def scan_almost_periods(
    traj: TrajectorySample,
    epsilon: float,
    scan_range: tuple[float, float],
    scan_step: float,
    window_halfwidth: float,
) -> AlmostPeriodReport:
    """List every grid shift tau with sup_{|t|<=L} |traj(t+tau) - traj(t)| < epsilon.

    Candidate shifts are snapped to the sample grid, so the scan step must be
    an integer multiple of ``traj.dt``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    L = window_halfwidth
    tau_min, tau_max = scan_range
    if tau_max < tau_min:
        raise ValueError("scan range must be increasing")
    step_idx = round(scan_step / traj.dt)
    if step_idx < 1 or abs(step_idx * traj.dt - scan_step) > 1e-9 * max(1.0, scan_step):
        raise ValueError("scan_step must be a positive multiple of the sample dt")
    if traj.t0 > -L + 1e-12 or traj.t_end < L + tau_max - 1e-12:
        raise CoverageError(
            f"sample [{traj.t0}, {traj.t_end}] cannot support the window "
            f"[-{L}, {L + tau_max}]"
        )
    i_lo = traj.index_of(-L)
    i_hi = traj.index_of(L)
    base = traj.values[i_lo : i_hi + 1]
    k_lo = int(math.ceil(tau_min / traj.dt - 1e-9))
    k_hi = int(math.floor(tau_max / traj.dt + 1e-9))
    ks = np.arange(k_lo, k_hi + 1, step_idx)
    periods = []
    for k in ks:
        shifted = traj.values[i_lo + k : i_hi + 1 + k]
        dev = float(np.max(vector_norm(shifted - base, traj.norm_kind, traj.block)))
        if dev < epsilon:
            periods.append(k * traj.dt)
    periods_arr = np.array(sorted(periods), dtype=float)
    max_gap = _max_gap(periods_arr, tau_min, tau_max)
    return AlmostPeriodReport(
        epsilon=epsilon,
        window_halfwidth=L,
        periods=periods_arr,
        max_gap=max_gap,
        scan_range=(tau_min, tau_max),
        scan_step=step_idx * traj.dt,
    )


def _max_gap(periods: np.ndarray, tau_min: float, tau_max: float) -> float:
    if periods.size == 0:
        return math.inf
    edges = np.concatenate(([tau_min], periods, [tau_max]))
    return float(np.max(np.diff(edges)))


def relative_density_gap(report: AlmostPeriodReport) -> float:
    """Largest interval inside the scan range containing no listed period."""
    if report.periods.size == 0:
        return math.inf
    return report.max_gap
