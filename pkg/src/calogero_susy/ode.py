"""Quasi-stationary gauge equation for b(t).

Requiring ``h~(t) = eta(t) h`` with ``eta = exp(-4 b)`` for the coefficient
form of the transformed Hamiltonian forces ``a = -b' exp(4b)`` and

    b'' + 2 b'**2 + 72 alpha**2 (1 - exp(-8 b)) = 0          (form='derived')

for the three-body harmonic coefficient.  The variant
``b'' + 6 b'**2 + 72 alpha**2 (exp(-8 b) - 1) = 0`` (form='printed') is
kept for comparison; it does not make the coefficients factorize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

__all__ = [
    "ODESolution",
    "StepUnderflowError",
    "ode_rhs",
    "solve_quasistationary_ode",
    "linear_rate",
    "measured_linear_rate",
    "reference_deviation",
]


class StepUnderflowError(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


def _harmonic(alpha: float, n_particles: int = 3) -> float:
    return 8.0 * n_particles**2 * alpha**2


def ode_rhs(alpha: float, form: str = "derived", n_particles: int = 3):
    k = _harmonic(alpha, n_particles)
    if form == "derived":
        return lambda t, s: np.array([s[1], -2.0 * s[1] ** 2 - k * (1.0 - np.exp(-8.0 * s[0]))])
    if form == "printed":
        return lambda t, s: np.array([s[1], -6.0 * s[1] ** 2 - k * (np.exp(-8.0 * s[0]) - 1.0)])
    raise ValueError(f"unknown form {form!r}")


def linear_rate(alpha: float, form: str = "derived", n_particles: int = 3) -> float:
    """Magnitude of the linearised exponent, ``sqrt(8 k)``; 24 alpha for three bodies.

    Around ``b = 0`` the derived form oscillates with this angular frequency,
    the printed form grows with it.
    """
    return float(np.sqrt(8.0 * _harmonic(alpha, n_particles)))


@dataclass
class ODESolution:
    t: np.ndarray
    b: np.ndarray
    bdot: np.ndarray
    bddot: np.ndarray
    eta: np.ndarray
    tau: np.ndarray
    alpha: float
    form: str
    dense: object = None
    status: int = 0

    def at(self, t):
        """``(b, bdot, bddot)`` at arbitrary times via the dense output."""
        s = np.asarray(self.dense(t))
        rhs = ode_rhs(self.alpha, self.form)
        return s[0], s[1], rhs(t, s)[1]


def solve_quasistationary_ode(
    alpha: float,
    b0: float,
    bdot0: float,
    t_span=(0.0, 1.0),
    rtol: float = 1e-8,
    atol: float = 1e-12,
    form: str = "derived",
    n_eval: int = 1001,
    method: str = "RK45",
) -> ODESolution:
    """Adaptive embedded Runge-Kutta 4(5) solution with ``eta`` and ``tau``.

    ``tau(t) = int_0^t eta`` is integrated with the trapezoid rule on the
    output mesh.
    """
    if not rtol > 0:
        raise ValueError("rtol must be positive")
    t_eval = np.linspace(t_span[0], t_span[1], n_eval)
    sol = solve_ivp(
        ode_rhs(alpha, form), t_span, [b0, bdot0], method=method, rtol=rtol, atol=atol, t_eval=t_eval, dense_output=True
    )
    rhs = ode_rhs(alpha, form)
    b, bd = sol.y
    bdd = np.array([rhs(t, s)[1] for t, s in zip(sol.t, sol.y.T)]) if sol.t.size else np.zeros(0)
    eta = np.exp(-4.0 * b)
    tau = cumulative_trapezoid(eta, sol.t, initial=0.0) if sol.t.size else eta
    out = ODESolution(sol.t, b, bd, bdd, eta, tau, alpha, form, sol.sol, sol.status)
    if sol.status != 0:
        raise StepUnderflowError(f"integration stopped: {sol.message}", out)
    return out


def measured_linear_rate(alpha: float, form: str = "derived", n_particles: int = 3, b0: float = 1e-6) -> float:
    """Exponent magnitude read off a small-amplitude trajectory started at rest.

    The derived form oscillates, so the first zero of ``b`` at ``pi / (2 w)``
    gives ``w``.  The printed form grows like ``b0 cosh(w t)``.
    """
    from scipy.optimize import brentq

    rate = linear_rate(alpha, form, n_particles)
    t_end = 1.5 * np.pi / (2.0 * rate) if form == "derived" else 1.0 / rate
    rhs = ode_rhs(alpha, form, n_particles)
    sol = solve_ivp(rhs, (0.0, t_end), [b0, 0.0], method="RK45", rtol=1e-11, atol=1e-16 * max(b0, 1.0), dense_output=True)
    if form == "derived":
        t0 = brentq(lambda t: sol.sol(t)[0], 0.5 * t_end / 1.5, t_end)
        return float(np.pi / (2.0 * t0))
    return float(np.arccosh(sol.y[0, -1] / b0) / t_end)


def reference_deviation(sol: ODESolution) -> float:
    """Max deviation of ``b`` from an eighth-order reference, relative to ``max |b|``."""
    rhs = ode_rhs(sol.alpha, sol.form)
    ref = solve_ivp(
        rhs, (sol.t[0], sol.t[-1]), [sol.b[0], sol.bdot[0]], method="DOP853",
        rtol=1e-13, atol=1e-16, t_eval=sol.t,
    )
    scale = max(float(np.max(np.abs(ref.y[0]))), 1e-300)
    return float(np.max(np.abs(sol.b - ref.y[0])) / scale)
