"""Quasi-periodic coefficient data as trigonometric polynomials on a torus.

A coefficient function of time is represented as a function on the
m-torus evaluated along the linear flow ``theta0 + t*omega (mod 2*pi)``.
The torus functions are finite trigonometric polynomials, optionally
wrapped in a reciprocal ``p(theta) / (c + q(theta))`` to cover signals
such as ``1 / (2 + cos t + cos sqrt(2) t)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingularityError

TWO_PI = 2.0 * np.pi

#: Default lower bound on the magnitude of a reciprocal denominator.
DEFAULT_DENOMINATOR_MARGIN = 1e-6


def reduce_phase(theta: np.ndarray) -> np.ndarray:
    """Reduce torus coordinates to [0, 2*pi). Applied after every phase addition.

    ``np.mod(x, 2*pi)`` rounds up to exactly 2*pi for tiny negative x, so
    that endpoint is folded back to 0.
    """
    r = np.mod(theta, TWO_PI)
    return np.where(r >= TWO_PI, 0.0, r)


def angular_distance(theta: np.ndarray) -> np.ndarray:
    """Distance of each coordinate to 0 along the circle, in [0, pi]."""
    r = np.mod(theta, TWO_PI)
    return np.minimum(r, TWO_PI - r)


@dataclass(frozen=True)
class TrigPolynomial:
    """Finite trigonometric polynomial theta -> sum_k cos(k.theta) C_k + sin(k.theta) S_k.

    ``indices`` has shape (T, m); the coefficient arrays have shape
    (T, *value_shape).  Values may be matrices or vectors.
    """

    indices: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        idx = np.atleast_2d(np.asarray(self.indices, dtype=int))
        cc = np.asarray(self.cos_coeffs, dtype=float)
        sc = np.asarray(self.sin_coeffs, dtype=float)
        if cc.shape != sc.shape or cc.shape[0] != idx.shape[0]:
            raise ValueError("coefficient arrays must share a leading term axis")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "cos_coeffs", cc)
        object.__setattr__(self, "sin_coeffs", sc)

    @property
    def num_variables(self) -> int:
        return self.indices.shape[1]

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.cos_coeffs.shape[1:]

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        """Evaluate at one torus point (m,) or a batch (..., m)."""
        theta = np.asarray(theta, dtype=float)
        phase = theta @ self.indices.T  # (..., T)
        out = np.tensordot(np.cos(phase), self.cos_coeffs, axes=([-1], [0]))
        out += np.tensordot(np.sin(phase), self.sin_coeffs, axes=([-1], [0]))
        return out

    def to_terms(self) -> list[dict]:
        return [
            {
                "k": [int(v) for v in self.indices[i]],
                "cos": self.cos_coeffs[i].tolist(),
                "sin": self.sin_coeffs[i].tolist(),
            }
            for i in range(self.indices.shape[0])
        ]

    @classmethod
    def from_terms(cls, terms: list[dict]) -> "TrigPolynomial":
        if not terms:
            raise ValueError("a trigonometric polynomial needs at least one term")
        idx = np.array([t["k"] for t in terms], dtype=int)
        cc = np.array([t["cos"] for t in terms], dtype=float)
        sc = np.array([t["sin"] for t in terms], dtype=float)
        return cls(idx, cc, sc)

    @classmethod
    def constant(cls, value: np.ndarray, num_variables: int) -> "TrigPolynomial":
        value = np.asarray(value, dtype=float)
        return cls(
            np.zeros((1, num_variables), dtype=int),
            value[None, ...],
            np.zeros_like(value)[None, ...],
        )


@dataclass(frozen=True)
class ReciprocalForcing:
    """Torus function p(theta) / (c + q(theta)) with a scalar denominator.

    Evaluation raises :class:`NearSingularityError` whenever the denominator
    magnitude drops below ``margin`` at a requested point.
    """

    numerator: TrigPolynomial
    c: float
    q: TrigPolynomial
    margin: float = DEFAULT_DENOMINATOR_MARGIN

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.numerator.value_shape

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        den = self.c + self.q(theta)
        bad = np.min(np.abs(den))
        if bad < self.margin:
            raise NearSingularityError(float(bad), self.margin)
        num = self.numerator(theta)
        return num / np.expand_dims(den, tuple(range(np.ndim(den), np.ndim(num))))


@dataclass(frozen=True)
class QuasiPeriodicSpec:
    """Frequency vector plus torus-function descriptions of A(t) and f(t).

    In the delay case (``delay_order`` r > 0) the matrix function maps the
    stacked history of dimension n*(r+1) to the next n-vector, so its values
    have shape (n, n*(r+1)).
    """

    frequencies: np.ndarray
    matrix_form: TrigPolynomial
    forcing_form: TrigPolynomial | ReciprocalForcing
    time_domain: str = "continuous"
    dimension: int = 1
    delay_order: int = 0

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "frequencies", omega)
        if omega.size == 0:
            raise ValueError("at least one frequency is required")
        if np.any(omega == 0.0):
            raise ValueError("frequencies must be nonzero")
        if len(set(omega.tolist())) != omega.size:
            raise ValueError("frequencies must be pairwise distinct")
        if self.time_domain not in ("continuous", "discrete"):
            raise ValueError("time_domain must be 'continuous' or 'discrete'")
        if self.delay_order < 0:
            raise ValueError("delay_order must be >= 0")
        if self.delay_order > 0 and self.time_domain != "discrete":
            raise ValueError("delay systems are supported in discrete time only")
        n = self.dimension
        cols = n * (self.delay_order + 1)
        if self.matrix_form.value_shape != (n, cols):
            raise ValueError(
                f"matrix_form values must have shape ({n}, {cols}), "
                f"got {self.matrix_form.value_shape}"
            )
        if self.forcing_form.value_shape != (n,):
            raise ValueError(
                f"forcing_form values must have shape ({n},), "
                f"got {self.forcing_form.value_shape}"
            )
        for form in (self.matrix_form, getattr(self.forcing_form, "numerator", self.forcing_form)):
            if form.num_variables != omega.size:
                raise ValueError("torus function arity must match the frequency count")

    @property
    def num_frequencies(self) -> int:
        return int(self.frequencies.size)

    @property
    def stacked_dimension(self) -> int:
        return self.dimension * (self.delay_order + 1)

    def phase_at(self, base_phase: np.ndarray, t) -> np.ndarray:
        """Torus point(s) reached from ``base_phase`` after time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        theta = np.asarray(base_phase, dtype=float) + np.multiply.outer(t, self.frequencies)
        return reduce_phase(theta)

    def base_return_quality(self, tau) -> np.ndarray:
        """Sup over coordinates of the angular distance of tau*omega to 0."""
        tau = np.asarray(tau, dtype=float)
        d = angular_distance(np.multiply.outer(tau, self.frequencies))
        return np.max(d, axis=-1)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "frequencies": self.frequencies.tolist(),
            "matrix_terms": self.matrix_form.to_terms(),
            "time_domain": self.time_domain,
            "dimension": self.dimension,
            "delay_order": self.delay_order,
        }
        if isinstance(self.forcing_form, ReciprocalForcing):
            doc["forcing_terms"] = self.forcing_form.numerator.to_terms()
            doc["reciprocal"] = {
                "c": self.forcing_form.c,
                "q_terms": self.forcing_form.q.to_terms(),
            }
        else:
            doc["forcing_terms"] = self.forcing_form.to_terms()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "QuasiPeriodicSpec":
        required = {"frequencies", "matrix_terms", "forcing_terms"}
        missing = required - doc.keys()
        if missing:
            raise KeyError(f"missing spec fields: {sorted(missing)}")
        forcing: TrigPolynomial | ReciprocalForcing
        forcing = TrigPolynomial.from_terms(doc["forcing_terms"])
        if "reciprocal" in doc and doc["reciprocal"] is not None:
            rec = doc["reciprocal"]
            forcing = ReciprocalForcing(
                numerator=forcing,
                c=float(rec["c"]),
                q=TrigPolynomial.from_terms(rec["q_terms"]),
            )
        return cls(
            frequencies=np.asarray(doc["frequencies"], dtype=float),
            matrix_form=TrigPolynomial.from_terms(doc["matrix_terms"]),
            forcing_form=forcing,
            time_domain=doc.get("time_domain", "continuous"),
            dimension=int(doc.get("dimension", 1)),
            delay_order=int(doc.get("delay_order", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "QuasiPeriodicSpec":
        return cls.from_dict(json.loads(text))


def eval_base(spec: QuasiPeriodicSpec, phase: np.ndarray, t: float):
    """Coefficients (A, f) seen at time ``t`` along the base flow from ``phase``."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if spec.time_domain == "discrete" and float(t) != int(t):
        raise ValueError("discrete-time systems take integer times")
    theta = spec.phase_at(np.asarray(phase, dtype=float), float(t))
    return spec.matrix_form(theta), spec.forcing_form(theta)
