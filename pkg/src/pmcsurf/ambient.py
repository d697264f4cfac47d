"""Signature-aware linear algebra on the factor M2(eps) and the product M2(eps) x M2(eps).

The factor is the unit sphere S2 in Euclidean 3-space (eps = +1) or the upper
hyperboloid sheet x1^2 + x2^2 - x3^2 = -1, x3 > 0, in Lorentz 3-space with
signature (+, +, -) (eps = -1).  The product sits in R^6 with the block metric.

Orientation convention fixed here once and for all: the factor complex
structure is J v = cross_eps(p, v), the signed cross product for which
J(1,0,0) = (0,1,0) at the point p = (0,0,1) for both signatures.  All signs of
Kaehler functions and Hopf coefficients downstream inherit this choice.

All operations broadcast over leading array axes; points are rows of shape
(..., 3) and ambient vectors rows of shape (..., 6).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError

# Default tolerance for tangency / on-manifold preconditions.
TANGENCY_TOL = 1e-8


def check_eps(eps):
    """Validate the signature flag and return it as a plain int."""
    eps = int(eps)
    if eps not in (+1, -1):
        raise DomainError(f"eps must be +1 or -1, got {eps}")
    return eps


def metric_diag(eps, dim=3):
    """Diagonal of the flat metric: (+,+,eps) per 3-block."""
    eps = check_eps(eps)
    block = np.array([1.0, 1.0, float(eps)])
    if dim == 3:
        return block
    if dim == 6:
        return np.concatenate([block, block])
    raise DomainError(f"unsupported dimension {dim}")


def inner3(v, w, eps):
    """Factor inner product, Euclidean for eps=+1 and Lorentz (+,+,-) for eps=-1."""
    g = metric_diag(eps, 3)
    return np.einsum("...i,...i->...", np.asarray(v) * g, np.asarray(w))


def inner(v, w, eps):
    """Product metric on R^6: the sum of two factor blocks."""
    g = metric_diag(eps, 6)
    return np.einsum("...i,...i->...", np.asarray(v) * g, np.asarray(w))


def norm3(v, eps):
    return np.sqrt(inner3(v, v, eps))


def norm6(v, eps):
    return np.sqrt(inner(v, v, eps))


def cross_eps(a, b, eps):
    """Signed cross product: the vector with <cross_eps(a,b), c>_eps = det(a,b,c).

    For eps=+1 this is the Euclidean cross product; for eps=-1 the Euclidean
    cross product with the third component negated.
    """
    c = np.cross(np.asarray(a), np.asarray(b))
    if check_eps(eps) == -1:
        c = c * np.array([1.0, 1.0, -1.0])
    return c


def tangent_project3(p, v, eps):
    """Project v onto the tangent plane of M2(eps) at p."""
    coef = inner3(v, p, eps)
    return np.asarray(v) - check_eps(eps) * coef[..., None] * np.asarray(p)


def factor_j(p, v, eps, check=True, tol=TANGENCY_TOL):
    """Rotation by +90 degrees in T_p M2(eps): J v = cross_eps(p, v).

    Satisfies J(Jv) = -v, |Jv| = |v| and <Jv, v> = 0 on tangent vectors.
    Complex vectors are accepted (J extends complex-linearly).
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v)
    if check:
        defect = np.abs(inner3(p, v, eps))
        if np.any(defect > tol):
            raise PreconditionError(
                f"vector not tangent: max |<p,v>_eps| = {float(np.max(defect)):.3e} > {tol:.1e}"
            )
    return cross_eps(p, v, eps)


def product_j(which, P, V, eps, check=True, tol=TANGENCY_TOL):
    """The product complex structures J1 = (J, J) and J2 = (J, -J), blockwise."""
    if which not in (1, 2):
        raise DomainError(f"which must be 1 or 2, got {which}")
    P = np.asarray(P, dtype=float)
    V = np.asarray(V)
    out = np.empty_like(V)
    out[..., :3] = factor_j(P[..., :3], V[..., :3], eps, check=check, tol=tol)
    second = factor_j(P[..., 3:], V[..., 3:], eps, check=check, tol=tol)
    out[..., 3:] = second if which == 1 else -second
    return out


def factor_constraint(p, eps):
    """Residual <p,p>_eps - eps of the quadric constraint."""
    return inner3(p, p, eps) - check_eps(eps)


def project_to_factor(p, eps):
    """Rescale p radially onto M2(eps); for eps=-1 the point must have x3 > 0."""
    p = np.asarray(p, dtype=float)
    q = check_eps(eps) * inner3(p, p, eps)
    if np.any(q <= 0):
        raise DomainError("point cannot be projected onto the quadric (wrong causal type)")
    return p / np.sqrt(q)[..., None]


def tangent_basis(p, eps):
    """An orthonormal oriented tangent basis (e, Je) at each point p."""
    p = np.asarray(p, dtype=float)
    seeds = np.eye(3)
    # pick the seed axis least aligned with p, then project and normalize
    scores = np.stack([np.abs(inner3(np.broadcast_to(s, p.shape), p, eps)) for s in seeds], axis=-1)
    idx = np.argmin(scores, axis=-1)
    seed = seeds[idx]
    e = tangent_project3(p, seed, eps)
    e = e / norm3(e, eps)[..., None]
    return e, factor_j(p, e, eps, check=False)


@dataclass(frozen=True)
class FactorPoint:
    """A validated point of M2(eps) in its quadric model."""

    coords: np.ndarray
    eps: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (3,):
            raise DomainError(f"factor point must have 3 coordinates, got shape {coords.shape}")
        eps = check_eps(self.eps)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "eps", eps)
        if abs(inner3(coords, coords, eps) - eps) > 1e-10:
            raise DomainError(f"point violates <p,p>_eps = eps: {coords}")
        if eps == -1 and coords[2] <= 0:
            raise DomainError("hyperbolic points live on the upper sheet (x3 > 0)")


@dataclass(frozen=True)
class ProductPoint:
    """A validated point of M2(eps) x M2(eps)."""

    first: FactorPoint
    second: FactorPoint

    def __post_init__(self):
        if self.first.eps != self.second.eps:
            raise DomainError("both factors must share the same eps")

    @property
    def eps(self):
        return self.first.eps

    @property
    def coords(self):
        return np.concatenate([self.first.coords, self.second.coords])


def two_form_wedge(alpha, beta, frame):
    """Evaluate (alpha ^ beta)(v1, v2, v3, v4) for 2-forms given as callables.

    ``frame`` is a sequence of four vectors; alpha and beta take two vectors.
    """
    v1, v2, v3, v4 = frame
    return (
        alpha(v1, v2) * beta(v3, v4)
        - alpha(v1, v3) * beta(v2, v4)
        + alpha(v1, v4) * beta(v2, v3)
        + alpha(v3, v4) * beta(v1, v2)
        - alpha(v2, v4) * beta(v1, v3)
        + alpha(v2, v3) * beta(v1, v4)
    )


def orientation_form(P, v1, v2, v3, v4, eps):
    """The orientation 4-form pi1*omega ^ pi2*omega of the product, evaluated on a frame.

    omega is the factor Kaehler form omega(X, Y) = <JX, Y>.  A positive value
    means (v1, v2, v3, v4) is positively oriented.
    """
    P = np.asarray(P, dtype=float)

    def om1(a, b):
        return inner3(cross_eps(P[..., :3], np.asarray(a)[..., :3], eps), np.asarray(b)[..., :3], eps)

    def om2(a, b):
        return inner3(cross_eps(P[..., 3:], np.asarray(a)[..., 3:], eps), np.asarray(b)[..., 3:], eps)

    return two_form_wedge(om1, om2, (v1, v2, v3, v4))
