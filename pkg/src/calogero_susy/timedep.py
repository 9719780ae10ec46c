"""Time-dependent gauge transformations of the chain.

Unitary map
    (U psi)(y) = exp(i a |y|^2) exp(d b) psi(exp(2 b) y),
i.e. ``exp(i a |y|^2) exp(b sum(y_i d_i + d_i y_i))`` with ``d`` the number
of relative coordinates.  Conjugation gives ``U p U^-1 = exp(-2b)(p - 2 a y)``,
so ``U h U^-1`` has kinetic factor ``exp(-4b)``, harmonic factor
``exp(4b)`` and singular factor ``exp(-4b)``; the gauge term is
``i (dU/dt) U^-1 = (4 a b' - a') |y|^2 - b' K`` with ``K = sum(y p + p y)``.

On the grid the kinetic plus momentum block
``c_T p^2 / 2 + c_K K`` is written as
``c_T (p + kappa y)^2 / 2 - (2 c_K^2 / c_T) |y|^2`` with
``kappa = 2 c_K / c_T`` and discretised by conjugating the Dirichlet
Laplacian with the diagonal phase ``exp(-i kappa |y|^2 / 2)``.  This keeps
phase-only transformations exact on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .grid import Grid
from .model import ModelParams
from .operators import explicit_potential, laplacian

__all__ = [
    "GaugeProfile",
    "SplineProfile",
    "AnalyticProfile",
    "ConstrainedProfile",
    "QuasiStationaryProfile",
    "comoving_profile",
    "builtin_profile",
    "read_profile_table",
    "DilationPhaseMap",
    "WavefunctionState",
    "SupportOverflowError",
    "NormDriftError",
    "apply_dilation_phase",
    "dilation_series",
    "hamiltonian_coefficients",
    "NodeSector",
    "TimeDependentOperator",
    "build_h_tilde",
    "gauge_term",
    "InvariantOperator",
    "build_invariant",
    "propagate_tdse",
    "Trajectory",
]


class SupportOverflowError(ValueError):
    """Scaling moved a non-negligible part of the state outside the box."""


class NormDriftError(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


# ---------------------------------------------------------------------------
# Profiles


class GaugeProfile:
    """Gauge functions ``a(t)``, ``b(t)`` with derivative access."""

    constrained = False
    name = "profile"

    def a(self, t):
        raise NotImplementedError

    def b(self, t):
        raise NotImplementedError

    def adot(self, t):
        raise NotImplementedError

    def bdot(self, t):
        raise NotImplementedError

    def bddot(self, t):
        raise NotImplementedError

    def a_eta(self, t):
        """``a exp(-4b)``; constrained profiles return ``-b'`` exactly."""
        return self.a(t) * np.exp(-4.0 * self.b(t))

    def constraint_defect(self, t) -> float:
        return float(abs(self.a(t) + self.bdot(t) * np.exp(4.0 * self.b(t))))


class AnalyticProfile(GaugeProfile):
    """Profile from callables; missing derivatives default to zero."""

    def __init__(self, a, b, adot=None, bdot=None, bddot=None, name="analytic"):
        zero = lambda t: 0.0 * np.asarray(t, dtype=float)
        self._a, self._b = a, b
        self._adot, self._bdot, self._bddot = adot or zero, bdot or zero, bddot or zero
        self.name = name

    def a(self, t):
        return self._a(t)

    def b(self, t):
        return self._b(t)

    def adot(self, t):
        return self._adot(t)

    def bdot(self, t):
        return self._bdot(t)

    def bddot(self, t):
        return self._bddot(t)


class SplineProfile(GaugeProfile):
    """Cubic-spline profile through tabulated ``(t, a, b)``; derivatives are spline derivatives."""

    def __init__(self, t, a, b, name="table"):
        self._sa = CubicSpline(t, a)
        self._sb = CubicSpline(t, b)
        self.name = name

    def a(self, t):
        return self._sa(t)

    def b(self, t):
        return self._sb(t)

    def adot(self, t):
        return self._sa(t, 1)

    def bdot(self, t):
        return self._sb(t, 1)

    def bddot(self, t):
        return self._sb(t, 2)


class ConstrainedProfile(GaugeProfile):
    """``a = -b' exp(4b)`` built from ``b`` and its first two derivatives."""

    constrained = True

    def __init__(self, b, bdot, bddot, name="constrained"):
        self._b, self._bdot, self._bddot = b, bdot, bddot
        self.name = name

    def b(self, t):
        return self._b(t)

    def bdot(self, t):
        return self._bdot(t)

    def bddot(self, t):
        return self._bddot(t)

    def a(self, t):
        return -self._bdot(t) * np.exp(4.0 * self._b(t))

    def adot(self, t):
        bd = self._bdot(t)
        return -(self._bddot(t) + 4.0 * bd * bd) * np.exp(4.0 * self._b(t))

    def a_eta(self, t):
        return -self._bdot(t)


class QuasiStationaryProfile(ConstrainedProfile):
    """Constrained profile driven by a solution of the quasi-stationary ODE."""

    def __init__(self, solution, name="quasi-stationary"):
        self.solution = solution
        super().__init__(
            lambda t: solution.at(t)[0], lambda t: solution.at(t)[1], lambda t: solution.at(t)[2], name
        )


def comoving_profile(profile: GaugeProfile) -> AnalyticProfile:
    """Phase-only profile seen in the frame that follows the dilation.

    With ``D_b`` the dilation, ``D^-1 U D = exp(i a' |y|^2)`` where
    ``a' = a exp(-4b)``; its derivative is ``(a' - 4 a b') exp(-4b)``.
    """
    a1 = lambda t: profile.a_eta(t)
    a1dot = lambda t: (profile.adot(t) - 4.0 * profile.a(t) * profile.bdot(t)) * np.exp(-4.0 * profile.b(t))
    return AnalyticProfile(a1, lambda t: 0.0 * np.asarray(t, dtype=float), a1dot, name=f"{profile.name}:comoving")


def builtin_profile(name: str, alpha: float = 1.0 / 12.0, amplitude: float = 0.05) -> GaugeProfile:
    """Named profiles.

    ``stationary``: a = b = 0.  ``phase``: b = 0, a = A sin(pi t).
    ``smooth``: unconstrained a = A sin(pi t), b = A sin(2 pi t) / 2.
    ``constrained-exp``: b = A (1 - exp(-t)), a = -b' exp(4b).
    ``quasi-stationary``: b from the quasi-stationary ODE with b(0) = A.
    """
    A = amplitude
    pi = np.pi
    if name == "stationary":
        return AnalyticProfile(lambda t: 0.0 * np.asarray(t, float), lambda t: 0.0 * np.asarray(t, float), name=name)
    if name == "phase":
        return AnalyticProfile(
            lambda t: A * np.sin(pi * t), lambda t: 0.0 * np.asarray(t, float), lambda t: A * pi * np.cos(pi * t), name=name
        )
    if name == "smooth":
        return AnalyticProfile(
            lambda t: A * np.sin(pi * t),
            lambda t: 0.5 * A * np.sin(2 * pi * t),
            lambda t: A * pi * np.cos(pi * t),
            lambda t: A * pi * np.cos(2 * pi * t),
            lambda t: -2.0 * A * pi * pi * np.sin(2 * pi * t),
            name=name,
        )
    if name == "constrained-exp":
        return ConstrainedProfile(
            lambda t: A * (1.0 - np.exp(-t)), lambda t: A * np.exp(-t), lambda t: -A * np.exp(-t), name=name
        )
    if name == "quasi-stationary":
        from .ode import solve_quasistationary_ode

        sol = solve_quasistationary_ode(alpha, A, 0.0, (0.0, 2.0), rtol=1e-10)
        return QuasiStationaryProfile(sol, name=name)
    raise ValueError(f"unknown profile {name!r}")


def read_profile_table(path) -> SplineProfile:
    """Whitespace or comma separated ``t a b`` rows; ``#`` starts a comment."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].replace(",", " ").strip()
            if line:
                rows.append([float(v) for v in line.split()[:3]])
    arr = np.array(rows)
    if arr.ndim != 2 or arr.shape[1] != 3 or len(arr) < 4:
        raise ValueError("profile table needs at least four rows of t, a, b")
    return SplineProfile(arr[:, 0], arr[:, 1], arr[:, 2], name=str(path))


# ---------------------------------------------------------------------------
# States and the unitary map


@dataclass
class WavefunctionState:
    values: np.ndarray
    t: float = 0.0
    norm: float = field(default=float("nan"))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("state contains non-finite values")
        if not np.isfinite(self.norm):
            self.norm = float(np.linalg.norm(self.values))


@dataclass
class DilationPhaseMap:
    profile: GaugeProfile
    dim: int = 2


def _interp(field_: np.ndarray, coords: np.ndarray) -> np.ndarray:
    re = map_coordinates(field_.real, coords, order=3, mode="constant", cval=0.0)
    if np.iscomplexobj(field_):
        return re + 1j * map_coordinates(field_.imag, coords, order=3, mode="constant", cval=0.0)
    return re


def apply_dilation_phase(
    psi: WavefunctionState, umap: DilationPhaseMap, t: float, grid: Grid, components: int = 1, overflow_tol: float = 1e-8
) -> WavefunctionState:
    """``(U psi)(y) = exp(i a |y|^2) exp(d b) psi(exp(2b) y)`` by cubic-spline interpolation.

    ``psi.values`` is a flat node vector with ``components`` blocks.
    """
    a = float(umap.profile.a(t))
    b = float(umap.profile.b(t))
    d = umap.dim
    vals = psi.values.reshape((components,) + grid.shape)
    pts = grid.points()
    s = np.exp(2.0 * b)
    if s < 1.0:
        inside = np.all(np.abs(pts) <= grid.half_width * s + 0.5 * grid.h, axis=-1)
        total = np.sum(np.abs(vals) ** 2)
        lost = np.sum(np.abs(vals[:, ~inside]) ** 2)
        if total > 0 and lost / total > overflow_tol:
            raise SupportOverflowError(f"fraction {lost / total:.2e} of the state leaves the box")
    coords = (s * pts + grid.half_width) / grid.h - 0.5
    coords = np.moveaxis(coords, -1, 0)
    phase = np.exp(1j * a * np.sum(pts * pts, axis=-1)) * np.exp(d * b)
    out = np.stack([phase * _interp(v, coords) for v in vals])
    return WavefunctionState(out.ravel(), t)


def dilation_series(values: np.ndarray, grid: Grid, b: float, terms: int = 12) -> np.ndarray:
    """``exp(b G) psi`` with ``G = sum(y_i d_i + d_i y_i)`` by a truncated Taylor series.

    Derivatives are fourth-order central differences; intended for smooth,
    well-contained test functions and small ``b``.
    """
    pts = grid.points()
    h = grid.h

    def gen(f):
        out = grid.dim * f
        for ax in range(grid.dim):
            df = (
                -np.roll(f, -2, ax) + 8 * np.roll(f, -1, ax) - 8 * np.roll(f, 1, ax) + np.roll(f, 2, ax)
            ) / (12.0 * h)
            out = out + 2.0 * pts[..., ax] * df
        return out

    term = np.asarray(values, dtype=complex).reshape(grid.shape)
    total = term.copy()
    for k in range(1, terms + 1):
        term = gen(term) * (b / k)
        total = total + term
    return total.ravel()


# ---------------------------------------------------------------------------
# Coefficient-form operators on the node grid


def hamiltonian_coefficients(profile: GaugeProfile, t: float, params: ModelParams) -> dict:
    """Time-dependent coefficients of the transformed Hamiltonian.

    ``c_T`` multiplies ``p^2/2``, ``c_K`` multiplies ``sum(y p + p y)``,
    ``c_Y`` multiplies ``|y|^2`` and ``c_S`` the inverse-square part.
    """
    a, b = float(profile.a(t)), float(profile.b(t))
    ad, bd = float(profile.adot(t)), float(profile.bdot(t))
    eta = np.exp(-4.0 * b)
    harm = 8.0 * params.n_particles**2 * params.alpha**2
    return {
        "c_T": eta,
        "c_K": -(float(profile.a_eta(t)) + bd),
        "c_Y": 2.0 * a * a * eta + harm * np.exp(4.0 * b) + 4.0 * a * bd - ad,
        "c_S": eta,
    }


class NodeSector:
    """Static pieces of a sector Hamiltonian on the full node grid (Dirichlet box).

    Sector 0 and the top sector are scalar; sector 1 carries the collocated
    matrix potential in the derived Witten form with component-major layout.
    """

    def __init__(
        self, params: ModelParams, grid: Grid, sector: int = 0, form: str = "derived", kinetic_order: int = 4
    ):
        if sector not in range(params.dim + 1):
            raise ValueError(f"invalid sector {sector}")
        if params.n_particles != 3 and sector not in (0, params.dim):
            raise ValueError("time-dependent matrix sectors are implemented for three bodies")
        self.params, self.grid, self.sector = params, grid, sector
        d = grid.dim
        self.components = d if sector == 1 and d == 2 else 1
        pts = grid.points()
        self.r2 = np.tile(np.sum(pts * pts, axis=-1).ravel(), self.components)
        lap = laplacian(grid.axis, d, order=kinetic_order)
        self.kinetic = sp.kron(sp.identity(self.components), -0.5 * lap, format="csr")
        harm = 8.0 * params.n_particles**2 * params.alpha**2
        if self.components == 1:
            pot = explicit_potential(params, pts, 0 if sector == 0 else params.dim).ravel()
            self.singular = sp.diags(pot - harm * self.r2)
            self.constant = 0.0
        else:
            pot = explicit_potential(params, pts, 1, form).reshape(-1, d, d)
            const = 4.0 * params.n_particles * params.alpha * params.gamma * params.n_pairs
            pot = pot - (harm * self.r2[: pot.shape[0]] + const)[:, None, None] * np.eye(d)
            self.singular = sp.bmat([[sp.diags(pot[:, i, j]) for j in range(d)] for i in range(d)], format="csr")
            self.constant = const
        self.harm = harm
        self._deriv = self._central_derivatives()

    @property
    def size(self) -> int:
        return self.components * self.grid.size

    def _central_derivatives(self):
        n, d, h = self.grid.n, self.grid.dim, self.grid.h
        d1 = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2.0 * h)
        eye = sp.identity(n, format="csr")
        out = []
        for a in range(d):
            term = None
            for b in range(d):
                f = d1 if a == b else eye
                term = f if term is None else sp.kron(term, f, format="csr")
            out.append(sp.kron(sp.identity(self.components), term, format="csr"))
        return out

    def dilation_operator(self) -> sp.csr_matrix:
        """``K = sum(y p + p y)`` with central differences (hermitian)."""
        pts = self.grid.points().reshape(-1, self.grid.dim)
        k = None
        for a, dmat in enumerate(self._deriv):
            y = sp.diags(np.tile(pts[:, a], self.components))
            term = -1j * (y @ dmat + dmat @ y)
            k = term if k is None else k + term
        return k.tocsr()

    def stationary(self) -> sp.csr_matrix:
        """``h`` itself (coefficient form, constants included)."""
        mat = self.kinetic + sp.diags(self.harm * self.r2) + self.singular
        if self.constant:
            mat = mat + self.constant * sp.identity(self.size)
        return mat.tocsr()


class TimeDependentOperator:
    """``c_T P T P^* + diag(c_Y' r^2) + c_S V + const`` with ``P = exp(-i kappa r^2 / 2)``.

    ``c_Y'`` absorbs the ``-2 c_K^2 / c_T`` completion term.
    """

    def __init__(self, sector: NodeSector, coeffs: dict):
        self.sector = sector
        self.coeffs = dict(coeffs)
        ct, ck = coeffs["c_T"], coeffs["c_K"]
        self.kappa = 2.0 * ck / ct
        self.phase = np.exp(-0.5j * self.kappa * sector.r2)
        cy = coeffs["c_Y"] - 2.0 * ck * ck / ct
        self.diag = cy * sector.r2 + sector.constant
        self.shape = (sector.size, sector.size)

    def matvec(self, v):
        s = self.sector
        kin = self.phase * (s.kinetic @ (np.conj(self.phase) * v))
        return self.coeffs["c_T"] * kin + self.diag * v + self.coeffs["c_S"] * (s.singular @ v)

    def unphased_matvec(self, v):
        """``P^* H P v``: the operator with the momentum shift gauged away."""
        s = self.sector
        return self.coeffs["c_T"] * (s.kinetic @ v) + self.diag * v + self.coeffs["c_S"] * (s.singular @ v)

    def unphased_matrix(self) -> sp.csr_matrix:
        s = self.sector
        return sp.csr_matrix(self.coeffs["c_T"] * s.kinetic + sp.diags(self.diag) + self.coeffs["c_S"] * s.singular)

    def matrix(self) -> sp.csr_matrix:
        s = self.sector
        p = sp.diags(self.phase)
        mat = self.coeffs["c_T"] * (p @ s.kinetic @ p.conj()) + sp.diags(self.diag) + self.coeffs["c_S"] * s.singular
        return sp.csr_matrix(mat)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matvec, dtype=complex)


def build_h_tilde(sector: int, params: ModelParams, grid: Grid, profile: GaugeProfile, t: float, node_sector=None):
    """Transformed Hamiltonian at time ``t`` (see :func:`hamiltonian_coefficients`)."""
    ns = node_sector or NodeSector(params, grid, sector)
    if ns.sector != sector:
        raise ValueError("node_sector does not match sector")
    return TimeDependentOperator(ns, hamiltonian_coefficients(profile, t, params))


def gauge_term(profile: GaugeProfile, t: float, grid: Grid, node_sector: NodeSector | None = None) -> sp.csr_matrix:
    """``(4 a b' - a') |y|^2 - b' K`` with central-difference ``K``."""
    ns = node_sector or NodeSector(ModelParams(), grid, 0)
    a, bd, ad = float(profile.a(t)), float(profile.bdot(t)), float(profile.adot(t))
    mat = sp.diags((4.0 * a * bd - ad) * ns.r2).astype(complex)
    if bd != 0.0:
        mat = mat - bd * ns.dilation_operator()
    return sp.csr_matrix(mat)


@dataclass
class InvariantOperator:
    sector: int
    t: float
    operator: TimeDependentOperator
    route: str
    frame: str

    def matrix(self) -> sp.csr_matrix:
        return self.operator.matrix()

    def matvec(self, v):
        return self.operator.matvec(v)


def build_invariant(
    sector: int, params: ModelParams, grid: Grid, profile: GaugeProfile, t: float, frame: str = "lab", node_sector=None
) -> InvariantOperator:
    """``R(t) = h~(t) - i (dU/dt) U^-1`` assembled coefficient by coefficient.

    Removing the gauge term leaves ``c_K = -a exp(-4b)`` and
    ``c_Y = 2 a^2 exp(-4b) + 72 alpha^2 exp(4b)``.  ``frame='comoving'`` uses
    :func:`comoving_profile`, in which ``R`` is a diagonal-phase conjugate of
    the stationary grid operator.
    """
    if frame == "comoving":
        profile = comoving_profile(profile)
    elif frame != "lab":
        raise ValueError("frame must be 'lab' or 'comoving'")
    ns = node_sector or NodeSector(params, grid, sector)
    c = hamiltonian_coefficients(profile, t, params)
    a, bd, ad = float(profile.a(t)), float(profile.bdot(t)), float(profile.adot(t))
    c["c_K"] = c["c_K"] + bd
    c["c_Y"] = c["c_Y"] - (4.0 * a * bd - ad)
    return InvariantOperator(sector, t, TimeDependentOperator(ns, c), "h_tilde-minus-gauge", frame)


# ---------------------------------------------------------------------------
# Crank-Nicolson


def _factor(matrix_fn, dt, size):
    mat = sp.identity(size, format="csc", dtype=complex) + 0.5j * dt * matrix_fn()
    return spla.splu(sp.csc_matrix(mat), permc_spec="MMD_AT_PLUS_A")


def _solve(lhs, rhs, guess, lu, tol, maxiter=12):
    """Preconditioned Richardson iteration; returns ``(solution or None, iterations)``."""
    x = guess
    target = tol * np.linalg.norm(rhs)
    for it in range(1, maxiter + 1):
        r = rhs - lhs.matvec(x)
        if np.linalg.norm(r) <= target:
            return x, it - 1
        x = x + lu.solve(r)
    r = rhs - lhs.matvec(x)
    return (x if np.linalg.norm(r) <= target else None), maxiter


@dataclass
class Trajectory:
    t: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    invariant: np.ndarray
    final: WavefunctionState
    snapshots: dict = field(default_factory=dict)


def propagate_tdse(
    h_builder,
    psi0: WavefunctionState,
    t_span,
    dt: float,
    invariant_builder=None,
    record_every: int = 1,
    snapshot_times=(),
    solve_tol: float = 1e-12,
    drift_limit: float = 1e-8,
    refactor_after: int = 4,
) -> Trajectory:
    """Crank-Nicolson with the Hamiltonian sampled at the step midpoint.

    ``h_builder(t)`` returns an object with ``matvec``.  Each step solves
    ``(1 + i dt H/2) psi' = (1 - i dt H/2) psi`` iteratively, preconditioned with a
    sparse LU of the same system at an earlier step (preconditioned Richardson).  The factorisation is
    refreshed once the iteration count exceeds ``refactor_after``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    steps = int(round((t1 - t0) / dt))
    if steps < 1 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1)):
        raise ValueError("t_span must be an integer number of steps")
    psi = psi0.values.astype(complex).copy()
    n0 = float(np.linalg.norm(psi))
    if abs(n0 - 1.0) > 1e-10:
        raise ValueError("initial state must be normalised")
    size = psi.size
    ts, norms, energies, invs = [], [], [], []
    snaps = {}
    snap_steps = {int(round((s - t0) / dt)): s for s in snapshot_times}

    def record(t):
        ts.append(t)
        norms.append(float(np.linalg.norm(psi)))
        energies.append(float(np.real(np.vdot(psi, h_builder(t).matvec(psi)))))
        if invariant_builder is not None:
            invs.append(float(np.real(np.vdot(psi, invariant_builder(t).matvec(psi)))))
        else:
            invs.append(np.nan)

    record(t0)
    if 0 in snap_steps:
        snaps[snap_steps[0]] = psi.copy()
    lu = None
    prev = None
    for k in range(steps):
        hop = h_builder(t0 + (k + 0.5) * dt)
        # H = P G P^* with diagonal P, so the system is solved for P^* psi
        phase = getattr(hop, "phase", None)
        if phase is None:
            phase = np.ones(size, dtype=complex)
            gmv, gmat = hop.matvec, hop.matrix
        else:
            gmv, gmat = hop.unphased_matvec, hop.unphased_matrix
        x = np.conj(phase) * psi
        gx = gmv(x)
        rhs = x - 0.5j * dt * gx
        lhs = spla.LinearOperator((size, size), matvec=lambda v: v + 0.5j * dt * gmv(v), dtype=complex)
        # linear extrapolation of the two previous steps
        guess = np.conj(phase) * (2.0 * psi - prev) if prev is not None else x
        if lu is None:
            lu = _factor(gmat, dt, size)
        sol, iters = _solve(lhs, rhs, guess, lu, solve_tol)
        if sol is None or iters > refactor_after:
            lu = _factor(gmat, dt, size)
            sol, iters = _solve(lhs, rhs, guess, lu, solve_tol)
            if sol is None:
                raise RuntimeError(f"linear solve failed at step {k}")
        sol = phase * sol
        prev = psi
        psi = sol
        if (k + 1) % record_every == 0 or k + 1 == steps:
            record(t0 + (k + 1) * dt)
        if k + 1 in snap_steps:
            snaps[snap_steps[k + 1]] = psi.copy()
    traj = Trajectory(np.array(ts), np.array(norms), np.array(energies), np.array(invs), WavefunctionState(psi, t1), snaps)
    drift = abs(traj.norm[-1] - n0) / max(t1 - t0, 1e-300)
    if drift > drift_limit:
        raise NormDriftError(f"norm drift {drift:.2e} per unit time", traj)
    return traj
