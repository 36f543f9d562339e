"""Distinguished bounded solution via a min-max over near-return maps.

Given the affine return maps ``u -> Phi_k u + b_k`` collected at shifts
that nearly return the base phase, the candidate distinguished state
minimizes ``l(u) = max_k |Phi_k u + b_k - u0|`` over the convex hull of
the return images of the anchor ``u0``.  A small residual of ``l`` at
the minimizer certifies an (approximate) common fixed point of the
return semigroup.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import (
    AffineMapSample,
    CocycleSystem,
    _as_state,
    affine_map_samples,
    affine_path,
)
from .errors import UncertifiedError

_FLAT_GRADIENT = 1e-14
_HULL_RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# near returns


@dataclass(frozen=True)
class NearReturnSet:
    """Shifts whose base-phase return quality stays below ``delta_cap``."""

    taus: np.ndarray
    deltas: np.ndarray
    delta_cap: float
    horizon: float
    scan_step: float

    def __post_init__(self):
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        deltas = np.atleast_1d(np.asarray(self.deltas, dtype=float))
        if taus.shape != deltas.shape:
            raise ValueError("taus and deltas must align")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "deltas", deltas)

    def __len__(self) -> int:
        return int(self.taus.size)

    def best(self) -> tuple[float, float]:
        """(tau, delta) of the highest-quality return."""
        if len(self) == 0:
            raise ValueError("no near returns recorded")
        i = int(np.argmin(self.deltas))
        return float(self.taus[i]), float(self.deltas[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("tau,delta\n")
        for tau, dlt in zip(self.taus, self.deltas):
            buf.write(f"{tau!r},{dlt!r}\n")
        return buf.getvalue()


def find_near_returns(
    sys: CocycleSystem,
    delta_cap: float,
    horizon: float,
    scan_step: float | None = None,
) -> NearReturnSet:
    """Scan shifts in (0, horizon] and keep those returning the base phase.

    Purely arithmetic (no integration); an empty result is a valid report,
    not an error.  Continuous scan steps are snapped to multiples of the
    integrator step so the resulting shifts land on the march grid.
    """
    if delta_cap <= 0:
        raise ValueError("delta_cap must be positive")
    if sys.continuous:
        step = 0.01 if scan_step is None else scan_step
        step = max(1, round(step / sys.h)) * sys.h
        count = int(math.floor(horizon / step + 1e-9))
        taus = step * np.arange(1, count + 1)
    else:
        step = 1.0 if scan_step is None else max(1.0, round(scan_step))
        taus = np.arange(step, math.floor(horizon) + 1, step, dtype=float)
    qualities = sys.spec.base_return_quality(taus)
    mask = qualities < delta_cap
    return NearReturnSet(
        taus=taus[mask],
        deltas=qualities[mask],
        delta_cap=float(delta_cap),
        horizon=float(horizon),
        scan_step=float(step),
    )


def compose_returns(
    sys: CocycleSystem,
    returns: NearReturnSet,
    depth: int = 1,
    max_base: int = 12,
) -> list[AffineMapSample]:
    """Affine maps at the return shifts, plus pairwise-sum shifts at depth 1.

    Sums tau_i + tau_j stand in for semigroup compositions; each carries a
    ``composition_defect``, the discrepancy between the map evaluated
    directly at the sum and the naive composition of the two summand maps
    anchored at the original base point.  Only the ``max_base`` best
    returns feed the sums, keeping the map count quadratic-safe.
    """
    if depth not in (0, 1):
        raise ValueError("composition depth must be 0 or 1")
    base = affine_map_samples(sys, returns.taus) if len(returns) else []
    if depth == 0 or len(base) == 0:
        return base
    order = np.argsort(returns.deltas, kind="stable")[:max_base]
    picks = [base[i] for i in order]
    sums = sorted(
        {
            round(a.tau + b.tau, 12)
            for a in picks
            for b in picks
            if a.tau <= b.tau
        }
    )
    direct = affine_map_samples(sys, np.array(sums))
    by_tau = {round(s.tau, 12): s for s in picks}
    out = list(base)
    for s in direct:
        defect = math.inf
        for a in picks:
            partner = by_tau.get(round(s.tau - a.tau, 12))
            if partner is None:
                continue
            Phi_c = partner.Phi @ a.Phi
            b_c = partner.Phi @ a.b + partner.b
            d = float(
                np.linalg.norm(s.Phi - Phi_c) + sys.state_norm(s.b - b_c)
            )
            defect = min(defect, d)
        out.append(
            AffineMapSample(
                tau=s.tau, Phi=s.Phi, b=s.b, delta=s.delta,
                composition_defect=defect,
            )
        )
    return out


# ---------------------------------------------------------------------------
# min-max problem over the hull of return images


@dataclass(frozen=True)
class FavardProblem:
    """Anchor state, return maps, and the hull of return images of the anchor."""

    system: CocycleSystem
    anchor: np.ndarray
    maps: tuple
    hull_points: np.ndarray  # (K, n): images of the anchor under base returns

    @classmethod
    def from_returns(
        cls,
        sys: CocycleSystem,
        anchor,
        returns: NearReturnSet,
        depth: int = 1,
        max_base: int = 12,
    ) -> "FavardProblem":
        anchor = _as_state(sys, anchor)
        maps = compose_returns(sys, returns, depth=depth, max_base=max_base)
        if not maps:
            raise ValueError("cannot build a problem without near returns")
        base_count = len(returns)
        hull = np.stack([m.Phi @ anchor + m.b for m in maps[:base_count]])
        return cls(system=sys, anchor=anchor, maps=tuple(maps), hull_points=hull)

    def objective(self, u: np.ndarray) -> float:
        """l(u) = max over maps of |Phi u + b - anchor|."""
        return float(self.objective_batch(np.asarray(u, dtype=float)[None, :])[0])

    def objective_batch(self, us: np.ndarray) -> np.ndarray:
        """Vectorized ``objective`` over rows of a (B, n) array."""
        us = np.asarray(us, dtype=float)
        best = np.zeros(us.shape[0])
        for m in self.maps:
            r = us @ m.Phi.T + (m.b - self.anchor)
            np.maximum(best, self.system.state_norm(r), out=best)
        return best

    def hull_dimension(self) -> int:
        centered = self.hull_points - self.hull_points.mean(axis=0)
        if self.hull_points.shape[0] == 1:
            return 0
        s = np.linalg.svd(centered, compute_uv=False)
        scale = max(1.0, float(s[0]))
        return int(np.sum(s > _HULL_RANK_TOL * scale))


@dataclass(frozen=True)
class FavardResult:
    u_bar: np.ndarray
    value: float
    weights: np.ndarray
    iterations: int
    converged: bool
    tie_break_shift: float
    hull_dimension: int
    method: str = "subgradient"


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _norm_gradient(sys: CocycleSystem, x: np.ndarray) -> np.ndarray:
    """A subgradient of the state norm at x."""
    if sys.norm_kind == "euclidean":
        n = np.linalg.norm(x)
        return x / n if n > 0 else np.zeros_like(x)
    blocks = x.reshape(-1, sys.spec.dimension)
    norms = np.linalg.norm(blocks, axis=1, keepdims=True)
    g = np.divide(blocks, norms, out=np.zeros_like(blocks), where=norms > 0)
    return g.ravel()


#: Weight of the anchor-proximity term added to the min-max objective.  It
#: breaks ties on flat objectives (contracting cocycles make every hull
#: point an equally good fixed-point candidate) in favor of the point
#: nearest the anchor, while perturbing the reported optimum by at most
#: this factor times the hull diameter.
ANCHOR_REGULARIZATION = 1e-8

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo: float, hi: float, iters: int = 90) -> tuple[float, float]:
    """Minimize a unimodal function on [lo, hi]; returns (argmin, min)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    cands = [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)]
    return min(cands, key=lambda p: p[1])


def solve_minmax(
    problem: FavardProblem,
    method: str = "simplex_subgradient",
    iterations: int = 10_000,
    polish_rounds: int = 200,
    grid_resolution: int = 801,
) -> FavardResult:
    """Minimize the regularized max-residual functional over the hull.

    The objective is ``l(u) + mu |u - anchor|`` with a tiny ``mu``
    (:data:`ANCHOR_REGULARIZATION`), convex over the hull.  The default
    method runs a projected subgradient on the simplex with Polyak-style
    steps and best-iterate tracking, then polishes with exact line
    searches toward hull vertices, which lands exactly on vertex
    minimizers.  ``method="grid_oracle"`` instead brute-forces a grid of
    the hull (dimension <= 2 only).
    """
    if method not in ("simplex_subgradient", "grid_oracle"):
        raise ValueError("method must be 'simplex_subgradient' or 'grid_oracle'")
    sys = problem.system
    P = problem.hull_points  # (K, n)
    K = P.shape[0]
    dim = problem.hull_dimension()
    mu = ANCHOR_REGULARIZATION

    def composite(u: np.ndarray) -> float:
        return problem.objective(u) + mu * float(sys.state_norm(u - problem.anchor))

    lam = np.full(K, 1.0 / K)
    spread = float(np.max(np.linalg.norm(P - P.mean(axis=0), axis=1)))
    if dim == 0 or spread == 0.0:
        u = P.mean(axis=0)
        return FavardResult(
            u_bar=u, value=problem.objective(u), weights=lam, iterations=0,
            converged=True, tie_break_shift=0.0, hull_dimension=dim,
        )

    if method == "grid_oracle":
        u_bar, _ = grid_oracle(problem, resolution=grid_resolution)
        lam = _hull_weights(P, u_bar)
        return FavardResult(
            u_bar=u_bar,
            value=problem.objective(u_bar),
            weights=lam,
            iterations=0,
            converged=True,
            tie_break_shift=0.0,
            hull_dimension=dim,
            method="grid_oracle",
        )

    def u_gradient(u: np.ndarray) -> tuple[float, np.ndarray]:
        """Composite value and a subgradient in state space."""
        best, g = -1.0, None
        for m in problem.maps:
            r = m.Phi @ u + m.b - problem.anchor
            v = float(sys.state_norm(r))
            if v > best:
                best = v
                g = m.Phi.T @ _norm_gradient(sys, r)
        d = u - problem.anchor
        return best + mu * float(sys.state_norm(d)), g + mu * _norm_gradient(sys, d)

    def value_and_grad(lam: np.ndarray):
        val, gu = u_gradient(P.T @ lam)
        g = P @ gu
        # the all-ones component is annulled by the simplex constraint, so
        # work with the tangent-space gradient throughout
        return val, g - g.mean()

    best_val = math.inf
    best_lam = lam
    it = 0
    for it in range(1, iterations + 1):
        val, g = value_and_grad(lam)
        if val < best_val:
            best_val, best_lam = val, lam
        gn2 = float(g @ g)
        if gn2 < _FLAT_GRADIENT**2:
            break
        step = (val - best_val + 1e-3 / it) / gn2
        lam = project_simplex(lam - step * g)

    # polish: exact line searches from the current point toward hull
    # vertices (a Frank-Wolfe sweep); convexity makes each segment
    # restriction unimodal, so a vertex minimizer is reached exactly.
    lam = best_lam
    u_before = P.T @ best_lam
    converged = False
    for _ in range(polish_rounds):
        val, gu = u_gradient(P.T @ lam)
        scores = P @ gu
        targets = np.argsort(scores, kind="stable")[:3]
        improved = False
        for v in targets:
            u = P.T @ lam
            seg = P[v] - u

            def along(gamma: float) -> float:
                return composite(u + gamma * seg)

            gamma, f_gamma = _golden_section(along, 0.0, 1.0)
            if f_gamma < val - 1e-16 * (1.0 + abs(val)):
                lam = (1.0 - gamma) * lam + gamma * _unit(K, v)
                val = f_gamma
                improved = True
        if not improved:
            converged = True
            break

    u_bar = P.T @ lam
    return FavardResult(
        u_bar=u_bar,
        value=problem.objective(u_bar),
        weights=lam,
        iterations=it,
        converged=converged,
        tie_break_shift=float(sys.state_norm(u_bar - u_before)),
        hull_dimension=dim,
        method="simplex_subgradient",
    )


def _unit(K: int, j: int) -> np.ndarray:
    e = np.zeros(K)
    e[j] = 1.0
    return e


def _hull_weights(P: np.ndarray, u: np.ndarray, iters: int = 2_000) -> np.ndarray:
    """Simplex weights reproducing ``u`` as a hull combination (least squares).

    Pairwise steps between the steepest-descent vertex and the worst
    supported vertex, with exact step lengths; linear convergence on this
    quadratic, including boundary (vertex) solutions.
    """
    K = P.shape[0]
    lam = np.full(K, 1.0 / K)
    for _ in range(iters):
        r = P.T @ lam - u
        if float(r @ r) < 1e-30:
            break
        g = P @ r
        v = int(np.argmin(g))
        support = np.flatnonzero(lam > 1e-15)
        a = int(support[np.argmax(g[support])])
        if a == v:
            break
        d = P[v] - P[a]
        denom = float(d @ d)
        if denom < 1e-300:
            break
        gamma = min(max(-float(r @ d) / denom, 0.0), float(lam[a]))
        if gamma <= 0.0:
            break
        lam[v] += gamma
        lam[a] -= gamma
    return lam


def grid_oracle(problem: FavardProblem, resolution: int = 201) -> tuple[np.ndarray, float]:
    """Brute-force minimizer over a grid of the hull, for hull dimension <= 2.

    Independent of the subgradient path: parametrizes the affine span of
    the hull points, grids it, discards points outside the hull, and takes
    the best objective value.  Used as a cross-check oracle in tests.
    """
    P = problem.hull_points
    mean = P.mean(axis=0)
    centered = P - mean
    dim = problem.hull_dimension()
    if dim == 0:
        return mean, problem.objective(mean)
    U, s, Vt = np.linalg.svd(centered, full_matrices=False)
    axes = Vt[:dim]  # (dim, n)
    coords = centered @ axes.T  # (K, dim)
    if dim == 1:
        lo, hi = float(coords.min()), float(coords.max())
        ts = np.linspace(lo, hi, resolution)
        cands = mean + np.outer(ts, axes[0])
    elif dim == 2:
        from scipy.spatial import ConvexHull

        hull = ConvexHull(coords)
        xs = np.linspace(coords[:, 0].min(), coords[:, 0].max(), resolution)
        ys = np.linspace(coords[:, 1].min(), coords[:, 1].max(), resolution)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        # keep grid points satisfying every facet inequality A x + b <= 0
        A, b = hull.equations[:, :-1], hull.equations[:, -1]
        inside = np.all(pts @ A.T + b <= 1e-12, axis=1)
        pts = np.vstack([pts[inside], coords])  # vertices always included
        cands = mean + pts @ axes
    else:
        raise ValueError("grid oracle supports hull dimension 0, 1 or 2 only")
    vals = problem.objective_batch(cands)
    i = int(np.argmin(vals))
    return cands[i], float(vals[i])


# ---------------------------------------------------------------------------
# fixed-point certificate


@dataclass(frozen=True)
class FixedPointReport:
    """Residual curve r(delta) of a candidate common fixed point.

    ``r(delta)`` is the worst return deviation among shifts of base quality
    below delta; an empty qualifying set contributes 0 by convention, with
    the honest count recorded alongside.  The curve is nonincreasing by
    construction (max over shrinking sets).
    """

    delta_grid: tuple
    residuals: tuple
    counts: tuple
    tolerance: float
    verdict: str  # "certified" or "inconclusive"
    max_residual: float

    def to_dict(self) -> dict:
        return {
            "delta_grid": list(self.delta_grid),
            "residuals": list(self.residuals),
            "counts": list(self.counts),
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
        }


def default_certificate_tolerance(sys: CocycleSystem) -> float:
    """Residual level below which a fixed point counts as certified.

    Continuous time allows ten times the nominal one-step truncation error
    of the fourth-order integrator; discrete recursions are exact up to
    roundoff.
    """
    if sys.continuous:
        return max(1e-6, 10.0 * sys.h**4)
    return 1e-9


def verify_fixed_point(
    sys: CocycleSystem,
    u_bar,
    maps,
    delta_grid,
    tolerance: float | None = None,
) -> FixedPointReport:
    """Certify ``u_bar`` as a common fixed point of the base return maps."""
    u = _as_state(sys, u_bar)
    base = [m for m in maps if m.composition_defect == 0.0]
    if tolerance is None:
        tolerance = default_certificate_tolerance(sys)
    deltas = np.array([m.delta for m in base])
    residuals = np.array(
        [float(sys.state_norm(m.Phi @ u + m.b - u)) for m in base]
    )
    grid = sorted(delta_grid, reverse=True)
    curve, counts = [], []
    for g in grid:
        mask = deltas < g
        counts.append(int(np.count_nonzero(mask)))
        curve.append(float(residuals[mask].max()) if counts[-1] else 0.0)
    populated = any(c > 0 for c in counts)
    certified = populated and curve[-1] <= tolerance
    return FixedPointReport(
        delta_grid=tuple(float(g) for g in grid),
        residuals=tuple(curve),
        counts=tuple(counts),
        tolerance=float(tolerance),
        verdict="certified" if certified else "inconclusive",
        max_residual=float(residuals.max()) if residuals.size else 0.0,
    )


def comparability_from_fixed_point(
    sys: CocycleSystem,
    u_bar,
    report: FixedPointReport,
    epsilons,
    horizon: float,
    **kwargs,
):
    """Comparability modulus of a certified fixed point; refuses uncertified input."""
    if report.verdict != "certified":
        raise UncertifiedError(
            "comparability analysis requires a certified fixed point"
        )
    from .comparability import estimate_modulus

    return estimate_modulus(sys, u_bar, epsilons, horizon, **kwargs)
