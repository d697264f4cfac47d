"""Constructors for every explicit surface family: PMC charts in M2(eps) x M2(eps)
and CMC charts in M2(eps) x R (or x S1).

Every constructor returns an ``ImmersionChart`` whose ``evaluate`` broadcasts
over coordinate arrays and whose ``jet`` supplies first and second partials.
Charts backed by closed forms carry exact jets; charts backed by a profile
solution or an integrated curve inherit the dense-output accuracy of those
solvers, which is far below the verification tolerances.

Conventions: product charts live in R^6 (two factor blocks), charts into
M2(eps) x R in R^4 with the height as fourth coordinate.  The height of the
torus family is the multivalued lift; ``embed_circle`` provides the
single-valued S1 embedding.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ambient import check_eps, factor_constraint
from .curves import CurveSpec, constant_curvature_curve, integrate_curve
from .elliptic import complete_k, jacobi_sncndn
from .errors import DomainError
from .profile import ProfileParams
from .utils import CumulativeIntegral

TARGET_PRODUCT = "product"
TARGET_LINE = "factor_times_line"
TARGET_CIRCLE = "factor_times_circle"


@dataclass
class ImmersionChart:
    """A parametrized surface patch with optional analytic 2-jet.

    evaluate(x, y) -> (..., dim) points, dim = 6 (product) or 4 (x R / x S1);
    jet(x, y) -> dict with keys p, px, py, pxx, pxy, pyy of the same shape.
    """

    name: str
    eps: int
    target: str
    domain: tuple
    evaluate: Callable
    jet: Optional[Callable] = None
    metadata: dict = field(default_factory=dict)
    circle_radius: Optional[float] = None
    periods: Optional[tuple] = None
    embed_circle: Optional[Callable] = None

    @property
    def dim(self):
        return 6 if self.target == TARGET_PRODUCT else 4

    def grid(self, nx, ny, shrink=0.0):
        """Meshgrid of the domain rectangle, optionally shrunk by a margin fraction."""
        x0, x1, y0, y1 = self.domain
        mx = shrink * (x1 - x0)
        my = shrink * (y1 - y0)
        xs = np.linspace(x0 + mx, x1 - mx, nx)
        ys = np.linspace(y0 + my, y1 - my, ny)
        return np.meshgrid(xs, ys, indexing="ij")

    def manifold_defect(self, x, y):
        """Max violation of the target-manifold constraints at the given samples."""
        p = self.evaluate(x, y)
        d1 = np.abs(factor_constraint(p[..., :3], self.eps))
        if self.target == TARGET_PRODUCT:
            d2 = np.abs(factor_constraint(p[..., 3:], self.eps))
            return float(max(d1.max(), d2.max()))
        return float(d1.max())


def _stack_blocks(first, second):
    return np.concatenate([first, second], axis=-1)


def _jet_dict(p, px, py, pxx, pxy, pyy):
    return {"p": p, "px": px, "py": py, "pxx": pxx, "pxy": pxy, "pyy": pyy}


# ---------------------------------------------------------------------------
# products of constant-curvature curves
# ---------------------------------------------------------------------------


def product_chart_from_curves(alpha, beta, eps, domain, name="curves_product", metadata=None, periods=None):
    """Chart (alpha(x), beta(y)) from two curve objects exposing point/velocity/acceleration."""

    def evaluate(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return _stack_blocks(alpha.point(x), beta.point(y))

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        zero = np.zeros(x.shape + (3,))
        return _jet_dict(
            p=_stack_blocks(alpha.point(x), beta.point(y)),
            px=_stack_blocks(alpha.velocity(x), zero),
            py=_stack_blocks(zero, beta.velocity(y)),
            pxx=_stack_blocks(alpha.acceleration(x), zero),
            pxy=_stack_blocks(zero, zero),
            pyy=_stack_blocks(zero, beta.acceleration(y)),
        )

    return ImmersionChart(
        name=name,
        eps=eps,
        target=TARGET_PRODUCT,
        domain=domain,
        evaluate=evaluate,
        jet=jet,
        metadata=metadata or {},
        periods=periods,
    )


def product_of_curves(eps, k_alpha, k_beta, require_pmc=True, domain=None):
    """Flat PMC chart (alpha(x), beta(y)) from two constant-curvature curves.

    4 |H|^2 = k_alpha^2 + k_beta^2; both curvatures zero gives a minimal chart
    with null mean curvature, rejected when a PMC chart is demanded.
    """
    eps = check_eps(eps)
    if require_pmc and k_alpha == 0.0 and k_beta == 0.0:
        raise DomainError("two geodesics give a minimal chart: H is null, not a PMC chart")
    alpha = constant_curvature_curve(eps, k_alpha)
    beta = constant_curvature_curve(eps, k_beta)
    periods = None
    if eps == +1:
        periods = (2 * np.pi / np.sqrt(1 + k_alpha**2), 2 * np.pi / np.sqrt(1 + k_beta**2))
        if domain is None:
            domain = (0.0, periods[0], 0.0, periods[1])
    if domain is None:
        domain = (-2.0, 2.0, -2.0, 2.0)
    return product_chart_from_curves(
        alpha,
        beta,
        eps,
        domain,
        metadata={"k_alpha": k_alpha, "k_beta": k_beta, "H_sq": (k_alpha**2 + k_beta**2) / 4.0},
        periods=periods,
    )


# ---------------------------------------------------------------------------
# the invariant PMC family (profile solutions)
# ---------------------------------------------------------------------------


def _first_factor_jet(params, h, x, y):
    """Analytic 2-jet of the first factor of the invariant PMC family."""
    eps, a = params.eps, params.a
    hv = h.h_at(x)
    hp = h.hp_at(x)
    hpp = h.hpp_at(x)
    uc = eps * (a - hv**2)
    ucp = -2.0 * eps * hv * hp
    ucpp = -2.0 * eps * (hp**2 + hv * hpp)
    if np.any(uc <= 0):
        raise DomainError("eps (a - h^2) > 0 fails on the requested samples")
    R = np.sqrt(uc)
    Rp = ucp / (2.0 * R)
    Rpp = ucpp / (2.0 * R) - ucp**2 / (4.0 * R**3)

    if a > 0:
        w = np.sqrt(a)
        cw, sw = np.cos(w * y), np.sin(w * y)
        inv = 1.0 / w
        p = inv * np.stack([R * cw, R * sw, hv], axis=-1)
        px = inv * np.stack([Rp * cw, Rp * sw, hp], axis=-1)
        py = inv * np.stack([-R * w * sw, R * w * cw, np.zeros_like(hv)], axis=-1)
        pxx = inv * np.stack([Rpp * cw, Rpp * sw, hpp], axis=-1)
        pxy = inv * np.stack([-Rp * w * sw, Rp * w * cw, np.zeros_like(hv)], axis=-1)
        pyy = inv * np.stack([-R * w * w * cw, -R * w * w * sw, np.zeros_like(hv)], axis=-1)
    elif a < 0:
        m = np.sqrt(-a)
        ch, sh = np.cosh(m * y), np.sinh(m * y)
        inv = 1.0 / m
        zeros = np.zeros_like(hv)
        p = inv * np.stack([hv, R * sh, R * ch], axis=-1)
        px = inv * np.stack([hp, Rp * sh, Rp * ch], axis=-1)
        py = inv * np.stack([zeros, R * m * ch, R * m * sh], axis=-1)
        pxx = inv * np.stack([hpp, Rpp * sh, Rpp * ch], axis=-1)
        pxy = inv * np.stack([zeros, Rp * m * ch, Rp * m * sh], axis=-1)
        pyy = inv * np.stack([zeros, R * m * m * sh, R * m * m * ch], axis=-1)
    else:
        # a = 0 (eps = -1, h > 0): phi = ((y^2-1)h/2 + 1/(2h), y h, (y^2+1)h/2 + 1/(2h))
        g = 1.0 / (2.0 * hv)
        gp = -hp / (2.0 * hv**2)
        gpp = (-hpp + 2.0 * hp**2 / hv) / (2.0 * hv**2)
        y2 = y * y
        zeros = np.zeros_like(hv)
        p = np.stack([(y2 - 1) * hv / 2 + g, y * hv, (y2 + 1) * hv / 2 + g], axis=-1)
        px = np.stack([(y2 - 1) * hp / 2 + gp, y * hp, (y2 + 1) * hp / 2 + gp], axis=-1)
        py = np.stack([y * hv, hv, y * hv], axis=-1)
        pxx = np.stack([(y2 - 1) * hpp / 2 + gpp, y * hpp, (y2 + 1) * hpp / 2 + gpp], axis=-1)
        pxy = np.stack([y * hp, hp, y * hp], axis=-1)
        pyy = np.stack([hv, zeros, hv], axis=-1)
    return _jet_dict(p, px, py, pxx, pxy, pyy)


def _profile_psi_curve(params, h, step=None):
    """Second-factor curve of the invariant families: |psi'|^2 = b (1 + (h-c)^2)."""
    eps, b, c = params.eps, params.b, params.c

    def speed(x):
        return np.sqrt(b * (1.0 + (h.h_at(x) - c) ** 2))

    def speed_prime(x):
        return b * (h.h_at(x) - c) * h.hp_at(x) / speed(x)

    def curvature(x):
        return -eps * b * (params.a - h.h_at(x) ** 2) / speed(x) ** 3

    p0 = np.array([1.0, 0.0, 0.0]) if eps == +1 else np.array([0.0, 0.0, 1.0])
    T0 = np.array([0.0, 1.0, 0.0]) if eps == +1 else np.array([1.0, 0.0, 0.0])
    spec = CurveSpec(eps, speed, curvature, p0=p0, T0=T0, speed_prime=speed_prime)
    lo, hi = h.span
    if step is None:
        step = min(1e-3, (hi - lo) / 2000.0)
    return integrate_curve(spec, x_span=(lo, hi), step=step)


def pmc_profile_family(params, h, y_span=(-1.0, 1.0), name="prop4"):
    """PMC chart of the invariant family built on a profile solution h.

    The chart has 4 |H|^2 = b, conformal factor eps (a - h^2), equal Kaehler
    functions with C1^2 = h'^2/(a - h^2)^2 and constant Hopf coefficients
    (eps b / 4)(a + 1 - c^2 + 2 (-1)^j i c).
    """
    if h.params != params:
        raise DomainError("profile solution was built for different parameters")
    if params.a <= 0 and params.eps != -1:
        raise DomainError("branches a <= 0 require eps = -1")
    if params.a == 0.0 and np.any(h.h <= 0):
        raise DomainError("the a = 0 branch needs h > 0 on the span")
    if np.any(params.eps * (params.a - h.h**2) <= 0):
        raise DomainError("profile solution leaves the admissible band eps (a - h^2) > 0")
    psi = _profile_psi_curve(params, h)

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        first = _first_factor_jet(params, h, x, y)
        zero = np.zeros(x.shape + (3,))
        return _jet_dict(
            p=_stack_blocks(first["p"], psi.point(x)),
            px=_stack_blocks(first["px"], psi.velocity(x)),
            py=_stack_blocks(first["py"], zero),
            pxx=_stack_blocks(first["pxx"], psi.acceleration(x)),
            pxy=_stack_blocks(first["pxy"], zero),
            pyy=_stack_blocks(first["pyy"], zero),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    lo, hi = h.span
    pad = 0.01 * (hi - lo)
    # constant Hopf pair; the j-labels follow the package orientation convention,
    # under which theta_1 carries +2ic for eps=+1 and -2ic for eps=-1
    hopf = [
        (params.eps * params.b / 4.0)
        * (params.a + 1 - params.c**2 + 2 * (-1) ** (j + 1) * params.eps * 1j * params.c)
        for j in (1, 2)
    ]
    return ImmersionChart(
        name=name,
        eps=params.eps,
        target=TARGET_PRODUCT,
        domain=(lo + pad, hi - pad, y_span[0], y_span[1]),
        evaluate=evaluate,
        jet=jet,
        metadata={
            "params": params,
            "H_sq": params.b / 4.0,
            "hopf_expected": hopf,
            # the curve factor is pinned only up to congruence; this chart uses
            # the canonical start (model center point, first tangent axis)
            "psi_frame": "canonical",
        },
    )


def pmc_phi0(h_abs, y_span=(-1.5, 1.5), x_frac=0.6):
    """The complete PMC chart with vanishing Hopf differentials in H2 x H2.

    Defined for 0 < |H| < 1/2 on (-pi/2, pi/2) x R; induced metric
    (1 - 4|H|^2)^{-1} cos^{-2} x (dx^2 + dy^2), constant curvature 4|H|^2 - 1,
    C1^2 = C2^2 = 1 - 4|H|^2.
    """
    H = float(h_abs)
    if not 0.0 < H < 0.5:
        raise DomainError("pmc_phi0 requires 0 < |H| < 1/2")
    s = np.sqrt(1.0 - 4.0 * H * H)

    def speed(x):
        return 2.0 * H / (s * np.cos(x))

    def speed_prime(x):
        return 2.0 * H * np.sin(x) / (s * np.cos(x) ** 2)

    def curvature(x):
        return -np.cos(x) / (2.0 * H)

    half = np.pi / 2.0
    spec = CurveSpec(
        -1, speed, curvature, p0=np.array([0.0, 0.0, 1.0]), T0=np.array([1.0, 0.0, 0.0]), speed_prime=speed_prime
    )
    psi = integrate_curve(spec, x_span=(-x_frac * half, x_frac * half), step=5e-4)

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        sec = 1.0 / np.cos(x)
        tn = np.tan(x)
        Y = y / s
        shY, chY = np.sinh(Y), np.cosh(Y)
        zeros = np.zeros_like(x)
        dsec = np.sin(x) * sec**2  # d/dx sec x
        d2sec = (1.0 + np.sin(x) ** 2) * sec**3  # d^2/dx^2 sec x
        p1 = np.stack([tn, shY * sec, chY * sec], axis=-1)
        px = np.stack([sec**2, shY * dsec, chY * dsec], axis=-1)
        py = np.stack([zeros, chY * sec / s, shY * sec / s], axis=-1)
        pxx = np.stack([2 * sec**2 * tn, shY * d2sec, chY * d2sec], axis=-1)
        pxy = np.stack([zeros, chY * dsec / s, shY * dsec / s], axis=-1)
        pyy = np.stack([zeros, shY * sec / s**2, chY * sec / s**2], axis=-1)
        zero3 = np.zeros(x.shape + (3,))
        return _jet_dict(
            p=_stack_blocks(p1, psi.point(x)),
            px=_stack_blocks(px, psi.velocity(x)),
            py=_stack_blocks(py, zero3),
            pxx=_stack_blocks(pxx, psi.acceleration(x)),
            pxy=_stack_blocks(pxy, zero3),
            pyy=_stack_blocks(pyy, zero3),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    return ImmersionChart(
        name="phi0",
        eps=-1,
        target=TARGET_PRODUCT,
        domain=(-x_frac * half * 0.98, x_frac * half * 0.98, y_span[0], y_span[1]),
        evaluate=evaluate,
        jet=jet,
        metadata={
            "H": H,
            "H_sq": H * H,
            "K_expected": 4 * H * H - 1,
            "C_sq_expected": 1 - 4 * H * H,
            "hopf_expected": [0j, 0j],
        },
    )


# ---------------------------------------------------------------------------
# the invariant CMC family in M2(eps) x R (profile solutions)
# ---------------------------------------------------------------------------


def _truncate_admissible(params, h, margin=1e-9):
    """Largest x-interval around 0 where eps (a - h^2) > b holds on h's grid."""
    ok = params.eps * (params.a - h.h**2) > params.b + margin
    if not np.any(ok):
        raise DomainError("eps (a - h^2) > b holds nowhere on the profile span")
    i0 = np.searchsorted(h.x, 0.0)
    i0 = min(max(i0, 0), len(h.x) - 1)
    if not ok[i0]:
        raise DomainError("eps (a - h^2) > b fails at x = 0")
    lo = i0
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = i0
    while hi < len(ok) - 1 and ok[hi + 1]:
        hi += 1
    truncated = (lo > 0) or (hi < len(ok) - 1)
    return float(h.x[lo]), float(h.x[hi]), truncated


def cmc_profile_family(params, h, y_span=(-1.0, 1.0), x0=None, name="prop6"):
    """CMC chart in M2(eps) x R built on a profile solution h.

    4 |H|^2 = b, conformal factor eps (a - h^2), Abresch-Rosenberg coefficient
    (eps b / 8)(a + 1 - c^2 - 2 i c).  The x-domain is truncated to the band
    where eps (a - h^2) > b.
    """
    if h.params != params:
        raise DomainError("profile solution was built for different parameters")
    eps, a, b, c = params.eps, params.a, params.b, params.c
    E = a - eps * b
    if E < 0 and eps != -1:
        raise DomainError("the E < 0 branch requires eps = -1")
    lo, hi, truncated = _truncate_admissible(params, h)
    if x0 is None:
        x0 = lo

    def f_integrand(t):
        ht = h.h_at(t)
        return b * (c - ht) / (eps * (E - ht**2))

    def eta_integrand(t):
        return h.h_at(t) - c

    F = CumulativeIntegral(f_integrand, lo, hi, x0=x0)
    G = CumulativeIntegral(eta_integrand, lo, hi, x0=x0)
    sqb = np.sqrt(b)

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        hv, hp, hpp = h.h_at(x), h.hp_at(x), h.hpp_at(x)
        f = y + F(x)
        fx = f_integrand(x)
        # d/dx of the f-integrand
        den = eps * (E - hv**2)
        fxx = (-b * hp * den + b * (c - hv) * 2.0 * eps * hv * hp) / den**2
        W2 = eps * (E - hv**2)
        W = np.sqrt(W2)
        Wp = -eps * hv * hp / W
        Wpp = -eps * (hp**2 + hv * hpp) / W - Wp**2 / W
        zeros = np.zeros_like(hv)

        if E > 0:
            sE = np.sqrt(E)
            ang = sE * f
            Z = W * np.exp(1j * ang)
            Zx = (Wp + 1j * W * sE * fx) * np.exp(1j * ang)
            Zy = 1j * sE * Z
            Zxx = (Wpp + 2j * Wp * sE * fx + 1j * W * sE * fxx - W * E * fx**2) * np.exp(1j * ang)
            Zxy = 1j * sE * Zx
            Zyy = -E * Z
            inv = 1.0 / sE
            p = inv * np.stack([Z.real, Z.imag, hv], axis=-1)
            px = inv * np.stack([Zx.real, Zx.imag, hp], axis=-1)
            py = inv * np.stack([Zy.real, Zy.imag, zeros], axis=-1)
            pxx = inv * np.stack([Zxx.real, Zxx.imag, hpp], axis=-1)
            pxy = inv * np.stack([Zxy.real, Zxy.imag, zeros], axis=-1)
            pyy = inv * np.stack([Zyy.real, Zyy.imag, zeros], axis=-1)
        elif E < 0:
            m = np.sqrt(-E)
            # hyperbolic analogue through exponentials: A_pm = W exp(+-m f)
            Apl = W * np.exp(m * f)
            Ami = W * np.exp(-m * f)
            Apl_x = (Wp + W * m * fx) * np.exp(m * f)
            Ami_x = (Wp - W * m * fx) * np.exp(-m * f)
            Apl_y = m * Apl
            Ami_y = -m * Ami
            Apl_xx = (Wpp + 2 * Wp * m * fx + W * m * fxx + W * m**2 * fx**2) * np.exp(m * f)
            Ami_xx = (Wpp - 2 * Wp * m * fx - W * m * fxx + W * m**2 * fx**2) * np.exp(-m * f)
            Apl_xy = m * Apl_x
            Ami_xy = -m * Ami_x
            Apl_yy = m**2 * Apl
            Ami_yy = m**2 * Ami
            inv = 1.0 / m

            def assemble(ap, am, dh):
                return inv * np.stack([dh, 0.5 * (ap - am), 0.5 * (ap + am)], axis=-1)

            p = assemble(Apl, Ami, hv)
            px = assemble(Apl_x, Ami_x, hp)
            py = assemble(Apl_y, Ami_y, zeros)
            pxx = assemble(Apl_xx, Ami_xx, hpp)
            pxy = assemble(Apl_xy, Ami_xy, zeros)
            pyy = assemble(Apl_yy, Ami_yy, zeros)
        else:
            # E = 0 (eps = -1): psi = (h f^2 - h/4 + 1/h, h f, h f^2 + h/4 + 1/h)
            g = 1.0 / hv
            gp = -hp / hv**2
            gpp = -hpp / hv**2 + 2 * hp**2 / hv**3
            q = hv * f * f
            qx = hp * f * f + 2 * hv * f * fx
            qy = 2 * hv * f
            qxx = hpp * f * f + 4 * hp * f * fx + 2 * hv * fx**2 + 2 * hv * f * fxx
            qxy = 2 * hp * f + 2 * hv * fx
            qyy = 2 * hv
            p = np.stack([q - hv / 4 + g, hv * f, q + hv / 4 + g], axis=-1)
            px = np.stack([qx - hp / 4 + gp, hp * f + hv * fx, qx + hp / 4 + gp], axis=-1)
            py = np.stack([qy, hv, qy], axis=-1)
            pxx = np.stack([qxx - hpp / 4 + gpp, hpp * f + 2 * hp * fx + hv * fxx, qxx + hpp / 4 + gpp], axis=-1)
            pxy = np.stack([qxy, hp, qxy], axis=-1)
            pyy = np.stack([qyy, zeros, qyy], axis=-1)

        eta = sqb * (y + G(x))
        eta_x = sqb * (hv - c)
        eta_y = np.full_like(hv, sqb)
        eta_xx = sqb * hp
        return _jet_dict(
            p=np.concatenate([p, eta[..., None]], axis=-1),
            px=np.concatenate([px, eta_x[..., None]], axis=-1),
            py=np.concatenate([py, eta_y[..., None]], axis=-1),
            pxx=np.concatenate([pxx, eta_xx[..., None]], axis=-1),
            pxy=np.concatenate([pxy, zeros[..., None]], axis=-1),
            pyy=np.concatenate([pyy, zeros[..., None]], axis=-1),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    pad = 0.01 * (hi - lo)
    theta_ar = (eps * b / 8.0) * (a + 1 - c**2 - 2j * c)
    return ImmersionChart(
        name=name,
        eps=eps,
        target=TARGET_LINE,
        domain=(lo + pad, hi - pad, y_span[0], y_span[1]),
        evaluate=evaluate,
        jet=jet,
        metadata={
            "params": params,
            "H_sq": b / 4.0,
            "theta_ar_expected": theta_ar,
            "truncated": truncated,
            "x0": x0,
        },
    )


# ---------------------------------------------------------------------------
# closed-form CMC charts (Examples 4 and 5)
# ---------------------------------------------------------------------------


def cmc_sinh_chart(lam, domain=(-1.5, 1.5, -1.5, 1.5)):
    """Closed-form CMC embedding of (R^2, (1+lam^2)/lam^2 cosh^2 x (dx^2+dy^2)) in H2 x R.

    H = 1/2 and the Abresch-Rosenberg coefficient is 1/8 for every lam > 0.
    """
    lam = float(lam)
    if lam <= 0:
        raise DomainError("cmc_sinh_chart needs lam > 0")
    r = np.sqrt(1.0 + lam * lam)

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        chx, shx = np.cosh(x), np.sinh(x)
        chy, shy = np.cosh(y), np.sinh(y)
        k = r / lam
        zeros = np.zeros_like(x)
        p = k * np.stack([shx, chx * shy + chy / r, chx * chy + shy / r], axis=-1)
        px = k * np.stack([chx, shx * shy, shx * chy], axis=-1)
        py = k * np.stack([zeros, chx * chy + shy / r, chx * shy + chy / r], axis=-1)
        pxx = k * np.stack([shx, chx * shy, chx * chy], axis=-1)
        pxy = k * np.stack([zeros, shx * chy, shx * shy], axis=-1)
        pyy = k * np.stack([zeros, chx * shy + chy / r, chx * chy + shy / r], axis=-1)
        eta = (y + r * chx) / lam
        eta_x = r * shx / lam
        eta_y = np.full_like(x, 1.0 / lam)
        eta_xx = r * chx / lam
        return _jet_dict(
            p=np.concatenate([p, eta[..., None]], axis=-1),
            px=np.concatenate([px, eta_x[..., None]], axis=-1),
            py=np.concatenate([py, eta_y[..., None]], axis=-1),
            pxx=np.concatenate([pxx, eta_xx[..., None]], axis=-1),
            pxy=np.concatenate([pxy, zeros[..., None]], axis=-1),
            pyy=np.concatenate([pyy, zeros[..., None]], axis=-1),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    return ImmersionChart(
        name="example4",
        eps=-1,
        target=TARGET_LINE,
        domain=domain,
        evaluate=evaluate,
        jet=jet,
        metadata={"lam": lam, "H_sq": 0.25, "theta_ar_expected": 0.125 + 0j},
    )


def cmc_leite_chart(h_scalar, y_span=(-1.2, 1.2), x_frac=0.88):
    """Closed-form CMC embedding of the hyperbolic plane of curvature 4H^2 - 1 in H2 x R.

    Vanishing Abresch-Rosenberg differential; defined for 0 < H < 1/2.
    """
    H = float(h_scalar)
    if not 0.0 < H < 0.5:
        raise DomainError("cmc_leite_chart requires 0 < H < 1/2")
    s = np.sqrt(1.0 - 4.0 * H * H)
    half = np.pi / 2.0

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        cx, sx = np.cos(x), np.sin(x)
        sec = 1.0 / cx
        dsec = sx * sec**2
        d2sec = (1.0 + sx**2) * sec**3
        tn = sx * sec
        shy, chy = np.sinh(y), np.cosh(y)
        e = 2.0 * H * H * np.exp(-y)
        zeros = np.zeros_like(x)
        inv = 1.0 / s
        p = inv * np.stack([tn, shy * sec + e * cx, chy * sec - e * cx], axis=-1)
        px = inv * np.stack([sec**2, shy * dsec - e * sx, chy * dsec + e * sx], axis=-1)
        py = inv * np.stack([zeros, chy * sec - e * cx, shy * sec + e * cx], axis=-1)
        pxx = inv * np.stack([2 * sec**2 * tn, shy * d2sec - e * cx, chy * d2sec + e * cx], axis=-1)
        pxy = inv * np.stack([zeros, chy * dsec + e * sx, shy * dsec - e * sx], axis=-1)
        pyy = inv * np.stack([zeros, shy * sec + e * cx, chy * sec - e * cx], axis=-1)
        eta = (2.0 * H / s) * (y - np.log(cx))
        eta_x = (2.0 * H / s) * tn
        eta_y = np.full_like(x, 2.0 * H / s)
        eta_xx = (2.0 * H / s) * sec**2
        return _jet_dict(
            p=np.concatenate([p, eta[..., None]], axis=-1),
            px=np.concatenate([px, eta_x[..., None]], axis=-1),
            py=np.concatenate([py, eta_y[..., None]], axis=-1),
            pxx=np.concatenate([pxx, eta_xx[..., None]], axis=-1),
            pxy=np.concatenate([pxy, zeros[..., None]], axis=-1),
            pyy=np.concatenate([pyy, zeros[..., None]], axis=-1),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    return ImmersionChart(
        name="example5",
        eps=-1,
        target=TARGET_LINE,
        domain=(-x_frac * half, x_frac * half, y_span[0], y_span[1]),
        evaluate=evaluate,
        jet=jet,
        metadata={"H": H, "H_sq": H * H, "theta_ar_expected": 0j, "K_expected": 4 * H * H - 1},
    )


# ---------------------------------------------------------------------------
# the CMC torus family in S2 x S1
# ---------------------------------------------------------------------------


def cmc_torus(a, b):
    """Doubly periodic CMC chart in S2 x S1(sqrt(b)/sqrt(a-b)) for 0 < b < a.

    kappa^2 = (a-b)/(a(1+b)); fundamental domain [0, 4K(kappa)] x [0, 2 pi/kappa];
    H = sqrt(b)/2 and the Abresch-Rosenberg coefficient is b(1+a)/(8a(1+b)).
    The fourth coordinate of ``evaluate`` is the multivalued height lift;
    ``embed_circle`` gives the genuine S1 embedding in R^5.
    """
    a, b = float(a), float(b)
    if not 0.0 < b < a:
        raise DomainError("cmc_torus requires 0 < b < a")
    kappa_sq = (a - b) / (a * (1.0 + b))
    kappa = np.sqrt(kappa_sq)
    Kk = complete_k(kappa)
    radius = np.sqrt(b) / np.sqrt(a - b)
    ca = 1.0 / np.sqrt(1.0 + a)
    cb = 1.0 / np.sqrt(1.0 + b)
    heta = np.sqrt(b) / np.sqrt(1.0 + b)
    slope = np.sqrt(b) / np.sqrt(a * (1.0 + b))

    def jet(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        S, C, D = jacobi_sncndn(x, kappa)
        Sp = C * D
        Cp = -S * D
        Dp = -kappa_sq * S * C
        Z = np.sqrt(a) * D + 1j * C
        Zp = np.sqrt(a) * Dp + 1j * Cp
        Zpp = np.sqrt(a) * (-kappa_sq * D * (C * C - S * S)) + 1j * (-C * (D * D - kappa_sq * S * S))
        ph = np.exp(1j * kappa * y)
        W = Z * ph * ca
        Wx = Zp * ph * ca
        Wy = 1j * kappa * W
        Wxx = Zpp * ph * ca
        Wxy = 1j * kappa * Wx
        Wyy = -kappa_sq * W
        p3 = S * cb
        p3x = Sp * cb
        p3xx = -S * (D * D + kappa_sq * C * C) * cb
        zeros = np.zeros_like(x)
        eta = heta * np.log(D - kappa * C) + slope * y
        eta_x = heta * kappa * S
        eta_xx = heta * kappa * Sp
        eta_y = np.full_like(x, slope)

        def pack(w, third, e):
            return np.stack([w.real, w.imag, third, e], axis=-1)

        return _jet_dict(
            p=pack(W, p3, eta),
            px=pack(Wx, p3x, eta_x),
            py=pack(Wy, zeros, eta_y),
            pxx=pack(Wxx, p3xx, eta_xx),
            pxy=pack(Wxy, zeros, zeros),
            pyy=pack(Wyy, zeros, zeros),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    def embed_circle(x, y):
        p = jet(x, y)["p"]
        ang = p[..., 3] / radius
        return np.concatenate(
            [p[..., :3], radius * np.cos(ang)[..., None], radius * np.sin(ang)[..., None]], axis=-1
        )

    periods = (4.0 * Kk, 2.0 * np.pi / kappa)
    theta_ar = b * (1.0 + a) / (8.0 * a * (1.0 + b))
    return ImmersionChart(
        name="torus",
        eps=+1,
        target=TARGET_CIRCLE,
        domain=(0.0, periods[0], 0.0, periods[1]),
        evaluate=evaluate,
        jet=jet,
        metadata={
            "a": a,
            "b": b,
            "kappa_sq": kappa_sq,
            "H_sq": b / 4.0,
            "theta_ar_expected": theta_ar + 0j,
        },
        circle_radius=radius,
        periods=periods,
        embed_circle=embed_circle,
    )


# ---------------------------------------------------------------------------
# the totally geodesic inclusion M2(eps) x R -> M2(eps) x M2(eps)
# ---------------------------------------------------------------------------


def geodesic_inclusion(chart):
    """Compose a chart in M2(eps) x R with the totally geodesic inclusion.

    (p, t) maps to (p, (cos t, sin t, 0)) for eps = +1 and to
    (p, (0, sinh t, cosh t)) for eps = -1.  The composite is a PMC chart with
    C1 = C2 and Hopf differentials twice the Abresch-Rosenberg one.
    """
    if chart.target not in (TARGET_LINE, TARGET_CIRCLE):
        raise DomainError("geodesic_inclusion expects a chart into M2(eps) x R")
    eps = chart.eps
    src = chart.jet

    if eps == +1:

        def geo(t):
            return np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)

        def geo_d(t):
            return np.stack([-np.sin(t), np.cos(t), np.zeros_like(t)], axis=-1)

        def geo_dd(t):
            return -geo(t)

    else:

        def geo(t):
            return np.stack([np.zeros_like(t), np.sinh(t), np.cosh(t)], axis=-1)

        def geo_d(t):
            return np.stack([np.zeros_like(t), np.cosh(t), np.sinh(t)], axis=-1)

        def geo_dd(t):
            return geo(t)

    def jet(x, y):
        J = src(x, y)
        t = J["p"][..., 3]
        tx, ty = J["px"][..., 3], J["py"][..., 3]
        txx, txy, tyy = J["pxx"][..., 3], J["pxy"][..., 3], J["pyy"][..., 3]
        g, gd, gdd = geo(t), geo_d(t), geo_dd(t)
        return _jet_dict(
            p=_stack_blocks(J["p"][..., :3], g),
            px=_stack_blocks(J["px"][..., :3], tx[..., None] * gd),
            py=_stack_blocks(J["py"][..., :3], ty[..., None] * gd),
            pxx=_stack_blocks(J["pxx"][..., :3], txx[..., None] * gd + (tx * tx)[..., None] * gdd),
            pxy=_stack_blocks(J["pxy"][..., :3], txy[..., None] * gd + (tx * ty)[..., None] * gdd),
            pyy=_stack_blocks(J["pyy"][..., :3], tyy[..., None] * gd + (ty * ty)[..., None] * gdd),
        )

    def evaluate(x, y):
        return jet(x, y)["p"]

    meta = dict(chart.metadata)
    meta["included_from"] = chart.name
    return ImmersionChart(
        name=f"incl({chart.name})",
        eps=eps,
        target=TARGET_PRODUCT,
        domain=chart.domain,
        evaluate=evaluate,
        jet=jet,
        metadata=meta,
        periods=chart.periods,
    )


# ---------------------------------------------------------------------------
# convenience constructors for the named examples
# ---------------------------------------------------------------------------


def example1_chart(which, **kw):
    """Product-of-curves charts of the catalog: T_{a,ahat}, C_{a,b}, Chat_a, P..., Ptilde."""
    if which == "T":
        a, ahat = kw["a"], kw["ahat"]
        return product_of_curves(+1, a / np.sqrt(1 - a * a), ahat / np.sqrt(1 - ahat * ahat))
    if which == "That":
        a, ahat = kw["a"], kw["ahat"]
        return product_of_curves(-1, a / np.sqrt(a * a - 1), ahat / np.sqrt(ahat * ahat - 1))
    if which == "Chat":
        a = kw["a"]
        return product_of_curves(-1, a / np.sqrt(a * a - 1), 1.0)
    if which == "Ptilde":
        return product_of_curves(-1, 1.0, 1.0)
    raise DomainError(f"unknown example-1 chart '{which}'")


def pmc_sinh_family(lam, x_span=(-1.2, 1.2), y_span=(-1.2, 1.2)):
    """The 1-parameter PMC family with 4|H|^2 = 1 and Hopf coefficient lam^2/4."""
    lam = float(lam)
    params = ProfileParams(-1, a=-(1.0 + lam * lam), b=1.0, c=0.0)
    from .profile import closed_form

    h = closed_form("sinh_family", params, x_span=x_span)
    chart = pmc_profile_family(params, h, y_span=y_span, name="example2")
    chart.metadata["lam"] = lam
    return chart
