"""Curves in M2(eps): the constant-curvature catalog and curve reconstruction.

Constant-curvature curves are produced in closed form from the linear system
alpha' = T, T' = k N - eps alpha (N = J T, arclength parameter), whose
characteristic frequency is nu^2 = k^2 + eps.  The canonical representatives
land on the classical catalog sets: latitude circles x3 = const, hypercycles
x1 = const, and the horocycle x1 - x3 = -1.

``integrate_curve`` rebuilds a curve from prescribed speed s(x) and geodesic
curvature k(x), the data in which the profile families describe their second
factor.  The curvature sign convention is k = <psi'', J psi'> / |psi'|^3 with
the package-wide orientation of J.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ambient import (
    check_eps,
    cross_eps,
    factor_constraint,
    inner3,
    norm3,
    project_to_factor,
    tangent_project3,
)
from .errors import DomainError, PreconditionError
from .utils import hermite_interp


def extract_curvature(vel, acc, point, eps):
    """Geodesic curvature <psi'', J psi'> / |psi'|^3 from a 2-jet of the curve."""
    jv = cross_eps(point, vel, eps)
    speed = norm3(vel, eps)
    return inner3(acc, jv, eps) / speed**3


@dataclass(frozen=True)
class ConstantCurvatureCurve:
    """Arclength-parametrized curve of constant geodesic curvature k in M2(eps)."""

    eps: int
    k: float
    kind: str
    # coefficients of the closed-form solution
    _A: np.ndarray
    _B: np.ndarray
    _C: np.ndarray
    _nu: float

    def point(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        if self._nu > 0:
            w = self._nu
            return self._A + self._B * np.cos(w * t) + self._C * np.sin(w * t)
        if self._nu < 0:
            w = -self._nu
            return self._A + self._B * np.cosh(w * t) + self._C * np.sinh(w * t)
        return self._A + self._C * t + self._B * (t * t / 2.0)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        if self._nu > 0:
            w = self._nu
            return w * (-self._B * np.sin(w * t) + self._C * np.cos(w * t))
        if self._nu < 0:
            w = -self._nu
            return w * (self._B * np.sinh(w * t) + self._C * np.cosh(w * t))
        return np.broadcast_to(self._C, t.shape[:-1] + (3,)) + self._B * t

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        if self._nu > 0:
            w = self._nu
            return -w * w * (self._B * np.cos(w * t) + self._C * np.sin(w * t))
        if self._nu < 0:
            w = -self._nu
            return w * w * (self._B * np.cosh(w * t) + self._C * np.sinh(w * t))
        return np.broadcast_to(self._B, t.shape[:-1] + (3,)).copy()


def _canonical_start(eps, k):
    """Initial point and unit tangent placing the curve on its catalog set."""
    if eps == +1:
        r = 1.0 / np.sqrt(1.0 + k * k)
        return np.array([r, 0.0, k * r]), np.array([0.0, 1.0, 0.0]), ("circle" if k != 0 else "geodesic")
    ak = abs(k)
    if ak > 1.0:
        a = ak / np.sqrt(k * k - 1.0)
        p0 = np.array([np.sqrt(a * a - 1.0), 0.0, a])
        T0 = np.array([0.0, np.sign(k), 0.0])
        return p0, T0, "circle"
    if ak == 1.0:
        return np.array([0.0, 0.0, 1.0]), np.array([0.0, -np.sign(k), 0.0]), "horocycle"
    b0 = k / np.sqrt(1.0 - k * k)
    p0 = np.array([b0, 0.0, np.sqrt(1.0 + b0 * b0)])
    T0 = np.array([0.0, 1.0, 0.0])
    return p0, T0, ("hypercycle" if k != 0 else "geodesic")


def constant_curvature_curve(eps, k, p0=None, T0=None):
    """Closed-form curve of constant curvature k, canonically placed unless (p0, T0) given.

    Canonical placements: eps=+1 the latitude circle x3 = k/sqrt(1+k^2);
    eps=-1 the circle x3 = |k|/sqrt(k^2-1) for |k|>1, the horocycle
    x1 - x3 = -1 for |k|=1, the hypercycle x1 = k/sqrt(1-k^2) for |k|<1.
    """
    eps = check_eps(eps)
    k = float(k)
    if p0 is None or T0 is None:
        p0, T0, kind = _canonical_start(eps, k)
    else:
        p0 = np.asarray(p0, dtype=float)
        T0 = np.asarray(T0, dtype=float)
        _, _, kind = _canonical_start(eps, k)
        if abs(factor_constraint(p0, eps)) > 1e-10 or (eps == -1 and p0[2] <= 0):
            raise PreconditionError("p0 is not a point of M2(eps)")
        if abs(inner3(p0, T0, eps)) > 1e-10 or abs(inner3(T0, T0, eps) - 1.0) > 1e-10:
            raise PreconditionError("T0 must be a unit tangent vector at p0")
    N0 = cross_eps(p0, T0, eps)
    acc0 = k * N0 - eps * p0
    nu_sq = k * k + eps
    if nu_sq > 0:
        nu = np.sqrt(nu_sq)
        B = -acc0 / nu_sq
        C = T0 / nu
        A = p0 - B
        return ConstantCurvatureCurve(eps, k, kind, A, B, C, nu)
    if nu_sq < 0:
        mu = np.sqrt(-nu_sq)
        B = acc0 / (-nu_sq)
        C = T0 / mu
        A = p0 - B
        return ConstantCurvatureCurve(eps, k, kind, A, B, C, -mu)
    return ConstantCurvatureCurve(eps, k, kind, p0, acc0, T0, 0.0)


@dataclass
class CurveSpec:
    """Prescription of a curve by speed and curvature plus an initial frame."""

    eps: int
    speed: Callable
    curvature: Callable
    p0: np.ndarray
    T0: np.ndarray
    speed_prime: Optional[Callable] = None

    def __post_init__(self):
        self.eps = check_eps(self.eps)
        self.p0 = np.asarray(self.p0, dtype=float)
        self.T0 = np.asarray(self.T0, dtype=float)
        if abs(factor_constraint(self.p0, self.eps)) > 1e-10:
            raise PreconditionError("p0 is not on M2(eps)")
        if self.eps == -1 and self.p0[2] <= 0:
            raise PreconditionError("p0 must lie on the upper sheet")
        if abs(inner3(self.p0, self.T0, self.eps)) > 1e-10:
            raise PreconditionError("T0 is not tangent at p0")
        if abs(inner3(self.T0, self.T0, self.eps) - 1.0) > 1e-10:
            raise PreconditionError("T0 is not a unit vector")

    def speed_derivative(self, x):
        if self.speed_prime is not None:
            return self.speed_prime(x)
        d = 1e-6
        return (self.speed(np.asarray(x) + d) - self.speed(np.asarray(x) - d)) / (2 * d)


@dataclass
class SampledCurve:
    """Dense-output curve from ``integrate_curve``: psi with its moving frame."""

    spec: CurveSpec
    x: np.ndarray
    psi: np.ndarray
    T: np.ndarray

    def _interp(self, x):
        s = np.asarray(self.spec.speed(self.x))[:, None]
        k = np.asarray(self.spec.curvature(self.x))[:, None]
        N = cross_eps(self.psi, self.T, self.spec.eps)
        psi_p = s * self.T
        T_p = s * (k * N - self.spec.eps * self.psi)
        p = hermite_interp(self.x, self.psi, psi_p, x)
        t = hermite_interp(self.x, self.T, T_p, x)
        return p, t

    def point(self, x):
        return self._interp(x)[0]

    def frame(self, x):
        """(psi, T, N) at x, with T re-orthonormalized against psi."""
        p, t = self._interp(x)
        p = project_to_factor(p, self.spec.eps)
        t = tangent_project3(p, t, self.spec.eps)
        t = t / norm3(t, self.spec.eps)[..., None]
        return p, t, cross_eps(p, t, self.spec.eps)

    def velocity(self, x):
        p, t, _ = self.frame(x)
        return np.asarray(self.spec.speed(x))[..., None] * t

    def acceleration(self, x):
        p, t, n = self.frame(x)
        s = np.asarray(self.spec.speed(x))[..., None]
        sp = np.asarray(self.spec.speed_derivative(x))[..., None]
        k = np.asarray(self.spec.curvature(x))[..., None]
        return sp * t + s * s * (k * n - self.spec.eps * p)

    def constraint_defect(self):
        quad = np.max(np.abs(factor_constraint(self.psi, self.spec.eps)))
        tang = np.max(np.abs(inner3(self.psi, self.T, self.spec.eps)))
        unit = np.max(np.abs(inner3(self.T, self.T, self.spec.eps) - 1.0))
        return float(max(quad, tang, unit))

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "p1", "p2", "p3"])
            for xi, pi in zip(self.x, self.psi):
                writer.writerow([f"{xi:.16e}"] + [f"{v:.16e}" for v in pi])


def _curve_rhs(spec, x, y):
    psi, T = y[:3], y[3:]
    s = float(spec.speed(x))
    if s <= 0:
        raise DomainError(f"speed must stay positive, got {s} at x={x}")
    k = float(spec.curvature(x))
    N = cross_eps(psi, T, spec.eps)
    return np.concatenate([s * T, s * (k * N - spec.eps * psi)])


def _renormalize(spec, y):
    psi = project_to_factor(y[:3], spec.eps)
    T = tangent_project3(psi, y[3:], spec.eps)
    T = T / norm3(T, spec.eps)
    return np.concatenate([psi, T])


def integrate_curve(spec, x_span=(-1.0, 1.0), step=None):
    """Reconstruct the curve with |psi'| = speed and geodesic curvature = curvature.

    Fourth-order one-step integration of psi' = s T, T' = s (k N - eps psi),
    N = J T, with per-step projection of (psi, T) back onto the quadric and
    its tangent plane.  x = 0 anchors the initial frame (p0, T0).
    """
    x0, x1 = float(x_span[0]), float(x_span[1])
    if not (x0 <= 0.0 <= x1) or x1 <= x0:
        raise DomainError(f"x_span must contain 0, got {x_span}")
    if step is None:
        step = (x1 - x0) / 4000.0

    y0 = np.concatenate([spec.p0, spec.T0])

    def march(n, h):
        ys = np.empty((n + 1, 6))
        ys[0] = y0
        y = y0.copy()
        for i in range(n):
            xi = i * h
            k1 = _curve_rhs(spec, xi, y)
            k2 = _curve_rhs(spec, xi + 0.5 * h, y + 0.5 * h * k1)
            k3 = _curve_rhs(spec, xi + 0.5 * h, y + 0.5 * h * k2)
            k4 = _curve_rhs(spec, xi + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            y = _renormalize(spec, y)
            ys[i + 1] = y
        return ys

    n1 = int(np.ceil(x1 / step - 1e-12)) if x1 > 0 else 0
    n0 = int(np.ceil(-x0 / step - 1e-12)) if x0 < 0 else 0
    fwd = march(n1, step)
    bwd = march(n0, -step)
    x = np.concatenate([-step * np.arange(n0, 0, -1), step * np.arange(0, n1 + 1)])
    y = np.vstack([bwd[:0:-1], fwd])
    return SampledCurve(spec, x, y[:, :3], y[:, 3:])
