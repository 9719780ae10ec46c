"""Analytic layer: couplings, Jacobi coordinates, superpotential, singular geometry.

Conventions
-----------
The particle-space superpotential is

    W(x) = alpha * sum_{i != j} (x_i - x_j)**2 + (gamma / 2) * sum_{i != j} ln|x_i - x_j|

with ordered pairs in both sums.  For centre-of-mass free configurations
``sum_{i<j} (x_i - x_j)**2 = N * |y|**2`` (y the first N-1 Jacobi
coordinates), so the ordered-pair sum is ``2N |y|**2`` and

    w(y) = 2 N alpha |y|**2 + gamma * sum_{i<j} ln|f_ij(y)|,
    f_ij(y) = (x_i - x_j) / sqrt(2).

For N=3 this is ``6 alpha (y1**2 + y2**2) + gamma ln|f1 f2 f3|``.  The
constant ``gamma * P * ln(sqrt 2)`` (P pairs) separating W and w is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

__all__ = [
    "ModelParams",
    "JacobiMap",
    "SingularGeometry",
    "SuperpotentialEval",
    "SingularPointError",
    "jacobi_forward",
    "jacobi_inverse",
    "eval_superpotential",
    "superpotential_fields",
    "superpotential_value",
    "superpotential_x",
    "singular_distance",
    "box_half_width",
]


class SingularPointError(ValueError):
    """Raised when an analytic quantity is requested on a coincidence line."""


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the Calogero superpotential.

    ``gamma`` may be negative: the sign decides which end of the chain
    carries the normalizable zero mode ``exp(-w)``.  Both couplings
    ``gamma*(gamma +- 1)`` of the neighbouring scalar sectors stay in the
    limit-point regime for ``|gamma| >= 1/2``; ``gamma == 0`` is the free
    oscillator.
    """

    alpha: float = 1.0 / 12.0
    gamma: float = 1.5
    n_particles: int = 3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.n_particles not in (3, 4):
            raise ValueError(f"n_particles must be 3 or 4, got {self.n_particles}")
        if self.gamma != 0 and abs(self.gamma) < 0.5:
            raise ValueError(f"|gamma| must be >= 0.5 (or exactly 0), got {self.gamma}")

    @property
    def dim(self) -> int:
        """Number of relative (Jacobi) coordinates."""
        return self.n_particles - 1

    @property
    def harmonic_w(self) -> float:
        """Coefficient of |y|**2 in w."""
        return 2.0 * self.n_particles * self.alpha

    @property
    def omega(self) -> float:
        """Oscillator frequency of the scalar Hamiltonians (12 alpha for N=3)."""
        return 2.0 * self.harmonic_w

    @property
    def n_pairs(self) -> int:
        return self.n_particles * (self.n_particles - 1) // 2

    def with_gamma(self, gamma: float) -> "ModelParams":
        return ModelParams(self.alpha, gamma, self.n_particles)


@dataclass(frozen=True)
class JacobiMap:
    """Orthogonal transform ``y = R x`` to Jacobi coordinates."""

    n: int
    matrix_r: np.ndarray = field(repr=False)

    @classmethod
    def for_particles(cls, n: int) -> "JacobiMap":
        r = np.zeros((n, n))
        for b in range(1, n):
            r[b - 1, :b] = 1.0
            r[b - 1, b] = -float(b)
            r[b - 1] /= np.sqrt(b * (b + 1))
        r[n - 1, :] = 1.0 / np.sqrt(n)
        r.setflags(write=False)
        return cls(n, r)


def _check_dim(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != n:
        raise ValueError(f"expected trailing dimension {n}, got shape {v.shape}")
    return v


def jacobi_forward(x, jmap: JacobiMap) -> np.ndarray:
    x = _check_dim(x, jmap.n)
    return x @ jmap.matrix_r.T


def jacobi_inverse(y, jmap: JacobiMap) -> np.ndarray:
    y = _check_dim(y, jmap.n)
    return y @ jmap.matrix_r


@dataclass(frozen=True)
class SingularGeometry:
    """Coincidence hyperplanes ``f_ij(y) = normal . y = 0`` in relative space.

    The pairs are ordered (1,2), (1,3), (2,3), ... so that for N=3 the lines
    are ``f1 = y1``, ``f2 = y1/2 + sqrt(3) y2/2``, ``f3 = -y1/2 + sqrt(3) y2/2``.
    All offsets are zero (the planes pass through the origin).
    """

    n_particles: int
    pairs: tuple
    normals: np.ndarray = field(repr=False)

    @classmethod
    def for_particles(cls, n: int) -> "SingularGeometry":
        r = JacobiMap.for_particles(n).matrix_r[: n - 1]
        pairs = tuple(combinations(range(n), 2))
        normals = np.array([(r[:, i] - r[:, j]) / np.sqrt(2.0) for i, j in pairs])
        normals.setflags(write=False)
        return cls(n, pairs, normals)

    @property
    def lines(self):
        """List of (unit normal, offset) tuples."""
        return [(nrm.copy(), 0.0) for nrm in self.normals]

    def values(self, y) -> np.ndarray:
        """All ``f_ij(y)``; trailing axis indexes the pair."""
        y = _check_dim(y, self.n_particles - 1)
        return y @ self.normals.T


def singular_distance(y, geometry: SingularGeometry) -> np.ndarray:
    """Euclidean distance from ``y`` to the nearest coincidence plane."""
    return np.min(np.abs(geometry.values(y)), axis=-1)


@dataclass(frozen=True)
class SuperpotentialEval:
    w: float
    grad: np.ndarray
    hess: np.ndarray


def superpotential_fields(y, params: ModelParams, geometry: SingularGeometry | None = None):
    """Vectorized ``w``, gradient and Hessian at points ``y`` (shape ``(..., d)``).

    No guarding: points on a plane produce infinities.  Callers that need a
    guard use :func:`eval_superpotential`.
    """
    geometry = geometry or SingularGeometry.for_particles(params.n_particles)
    y = _check_dim(y, params.dim)
    f = geometry.values(y)
    c = params.harmonic_w
    g = params.gamma
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(f)).sum(axis=-1) if g != 0 else 0.0
        inv = 1.0 / f
    w = c * np.sum(y * y, axis=-1) + g * logs
    grad = 2.0 * c * y
    hess = np.broadcast_to(2.0 * c * np.eye(params.dim), y.shape + (params.dim,)).copy()
    if g != 0:
        outer = np.einsum("pi,pj->pij", geometry.normals, geometry.normals)
        grad = grad + g * inv @ geometry.normals
        hess = hess - g * np.einsum("...p,pij->...ij", inv * inv, outer)
    return w, grad, hess


def superpotential_value(y, params: ModelParams, geometry: SingularGeometry | None = None):
    """Vectorized ``w`` alone; ``-inf``/``+inf`` on the planes when gamma != 0."""
    geometry = geometry or SingularGeometry.for_particles(params.n_particles)
    y = _check_dim(y, params.dim)
    w = params.harmonic_w * np.sum(y * y, axis=-1)
    if params.gamma != 0:
        with np.errstate(divide="ignore"):
            w = w + params.gamma * np.log(np.abs(geometry.values(y))).sum(axis=-1)
    return w


def eval_superpotential(y, params: ModelParams, eps: float = 1e-9) -> SuperpotentialEval:
    """Closed-form w, grad w, Hess w at a single regular point."""
    geometry = SingularGeometry.for_particles(params.n_particles)
    y = _check_dim(y, params.dim)
    if y.ndim != 1:
        raise ValueError("eval_superpotential takes a single point; use superpotential_fields")
    if params.gamma != 0 and singular_distance(y, geometry) <= eps:
        raise SingularPointError(f"point {y} lies within {eps} of a coincidence plane")
    w, grad, hess = superpotential_fields(y, params, geometry)
    return SuperpotentialEval(float(w), grad, hess)


def superpotential_x(x, params: ModelParams) -> np.ndarray:
    """Particle-space W(x) exactly as written with ordered pairs (no constant dropped)."""
    x = _check_dim(x, params.n_particles)
    total = 0.0
    for i, j in combinations(range(params.n_particles), 2):
        d = x[..., i] - x[..., j]
        total = total + 2.0 * params.alpha * d * d
        if params.gamma != 0:
            total = total + params.gamma * np.log(np.abs(d))
    return total


def box_half_width(params: ModelParams, tol: float = 1e-12, quantum: float = 0.5) -> float:
    """Smallest multiple of ``quantum`` with ``exp(-w_harm L**2) < tol``."""
    lmin = np.sqrt(np.log(1.0 / tol) / params.harmonic_w)
    return float(np.ceil(lmin / quantum) * quantum)
