"""The PMC <-> CMC correspondence made executable.

Frenet data (u, C_j, gamma_j, f_j) of a PMC chart maps to CMC data
(u, nu = C_j, p = sqrt(2) f_j, eta_j) for j = 1, 2 and back; integrating the
first-order Frenet systems rebuilds the immersions from data alone.  The
reconstruction initial frame is canonical and constructed in closed form from
the data at the base grid corner, so round trips recover the original chart up
to an ambient isometry, which ``weak_congruence_check`` pins down by frame
matching.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .ambient import cross_eps, inner3, metric_diag, project_to_factor
from .errors import DomainError, PreconditionError, VerificationError
from .families import TARGET_LINE, TARGET_PRODUCT, ImmersionChart
from .diffgeo import (
    conformal_data,
    frenet_scalars,
    grid_d,
    kaehler_functions,
    normal_frame,
    normalized_mismatch,
    parallelism_residual,
    sample_jet,
)

PARALLELISM_GATE = 1e-4
DATA_TOL = 1e-3


def _ip4(eps):
    g = np.concatenate([metric_diag(eps, 3), [1.0]])

    def ip(v, w):
        return np.einsum("...i,...i->...", v * g, w)

    return ip


def _ip6(eps):
    g = metric_diag(eps, 6)

    def ip(v, w):
        return np.einsum("...i,...i->...", v * g, w)

    return ip


# ---------------------------------------------------------------------------
# data records
# ---------------------------------------------------------------------------


@dataclass
class PmcFrenetData:
    """Frenet data (u, C_j, gamma_j, f_j, |H|) of a PMC chart on a grid."""

    eps: int
    Hnorm: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    fields: Optional[Callable] = None  # dense evaluation (x, y) -> dict
    residuals: dict = field(default_factory=dict)

    def grids(self):
        return {
            "u": self.u,
            "C1": self.C1,
            "C2": self.C2,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "f1": self.f1,
            "f2": self.f2,
        }

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["x", "y", "u", "C1", "C2", "gamma1_re", "gamma1_im", "gamma2_re", "gamma2_im",
                 "f1_re", "f1_im", "f2_re", "f2_im"]
            )
            cols = [self.x, self.y, self.u, self.C1, self.C2,
                    self.gamma1.real, self.gamma1.imag, self.gamma2.real, self.gamma2.imag,
                    self.f1.real, self.f1.imag, self.f2.real, self.f2.imag]
            for row in zip(*[np.asarray(c).ravel() for c in cols]):
                w.writerow([f"{v:.12e}" for v in row])


@dataclass
class CmcFrenetData:
    """Conformal CMC data (u, nu, p, eta) in M2(eps) x R on a grid."""

    eps: int
    Hval: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    nu: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    eta_x: np.ndarray
    eta_y: np.ndarray
    fields: Optional[Callable] = None
    residuals: dict = field(default_factory=dict)

    def eta_z(self):
        return 0.5 * (self.eta_x - 1j * self.eta_y)

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "u", "nu", "p_re", "p_im", "eta", "eta_x", "eta_y"])
            cols = [self.x, self.y, self.u, self.nu, self.p.real, self.p.imag,
                    self.eta, self.eta_x, self.eta_y]
            for row in zip(*[np.asarray(c).ravel() for c in cols]):
                w.writerow([f"{v:.12e}" for v in row])


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


def _pmc_point_fields(chart):
    """Dense pointwise Frenet data of a PMC chart."""

    def fields(x, y):
        jet = sample_jet(chart, x, y)
        u, _ = conformal_data(jet)
        frame = normal_frame(jet)
        C1, C2, _, _ = kaehler_functions(jet)
        gamma1, gamma2, f1, f2 = frenet_scalars(jet, frame)
        e2u = np.exp(2 * u)
        ux = jet.ip(jet.pxx, jet.px) / e2u
        uy = jet.ip(jet.pxy, jet.px) / e2u
        return {
            "u": u, "ux": ux, "uy": uy, "C1": C1, "C2": C2,
            "gamma1": gamma1, "gamma2": gamma2, "f1": f1, "f2": f2,
            "Hnorm": frame.Hnorm,
        }

    return fields


def pmc_compatibility_residuals(data):
    """Normalized residuals of the PMC integrability system on the data grids."""
    dx = data.x[1, 0] - data.x[0, 0]
    dy = data.y[0, 1] - data.y[0, 0]
    e2u = np.exp(2 * data.u)
    H = data.Hnorm
    inner = (slice(1, -1), slice(1, -1))
    out = {}
    for j, (C, gamma, f) in ((1, (data.C1, data.gamma1, data.f1)), (2, (data.C2, data.gamma2, data.f2))):
        gx, gy = grid_d(gamma, dx, dy)
        g_zbar = 0.5 * (gx + 1j * gy)
        rhs = -1j * H * C * e2u / np.sqrt(2.0)
        out[f"gamma{j}_zbar"] = normalized_mismatch(g_zbar[inner], rhs[inner], terms=(H * e2u[inner],))
        fx, fy = grid_d(f, dx, dy)
        f_zbar = 0.5 * (fx + 1j * fy)
        rhs = 1j * data.eps * e2u * C * gamma / 4.0
        out[f"f{j}_zbar"] = normalized_mismatch(
            f_zbar[inner], rhs[inner], terms=((e2u * np.abs(gamma))[inner],)
        )
        Cx, Cy = grid_d(C, dx, dy)
        C_z = 0.5 * (Cx - 1j * Cy)
        rhs = 2j * np.exp(-2 * data.u) * f * np.conj(gamma) - 1j * H / np.sqrt(2.0) * gamma
        out[f"C{j}_z"] = normalized_mismatch(C_z[inner], rhs[inner], terms=(H * np.abs(gamma)[inner],))
        out[f"gamma{j}_norm"] = normalized_mismatch(
            np.abs(gamma) ** 2, e2u * (1 - C**2) / 2.0, terms=(e2u / 2.0,)
        )
    return out


def extract_pmc_data(chart, nx=81, ny=81, shrink=0.02, parallelism_gate=PARALLELISM_GATE):
    """Sample the Frenet data of a PMC chart, refusing non-parallel charts."""
    if chart.target != TARGET_PRODUCT:
        raise DomainError("extract_pmc_data expects a product chart")
    X, Y = chart.grid(nx, ny, shrink=shrink)
    resid = parallelism_residual(chart, X[:: max(1, nx // 16), :: max(1, ny // 16)],
                                 Y[:: max(1, nx // 16), :: max(1, ny // 16)], 5e-4)
    if resid > parallelism_gate:
        raise PreconditionError(
            f"chart is not PMC: parallelism residual {resid:.2e} > {parallelism_gate:.1e}"
        )
    fields = _pmc_point_fields(chart)
    F = fields(X, Y)
    Hgrid = F["Hnorm"]
    data = PmcFrenetData(
        eps=chart.eps,
        Hnorm=float(np.mean(Hgrid)),
        x=X,
        y=Y,
        u=F["u"],
        C1=F["C1"],
        C2=F["C2"],
        gamma1=F["gamma1"],
        gamma2=F["gamma2"],
        f1=F["f1"],
        f2=F["f2"],
        fields=fields,
    )
    data.residuals = pmc_compatibility_residuals(data)
    data.residuals["H_spread"] = float(np.max(Hgrid) - np.min(Hgrid))
    data.residuals["parallelism"] = resid
    return data


# ---------------------------------------------------------------------------
# the data maps of the correspondence
# ---------------------------------------------------------------------------


def _path_integrate(x, y, gx, gy, gx_fn=None, gy_fn=None):
    """Potential eta on a grid with eta_x = gx, eta_y = gy (bottom row, then columns).

    Uses Simpson increments with midpoint values from the dense integrands
    when available, trapezoid increments otherwise.
    """
    nx, ny = gx.shape
    dx = x[1, 0] - x[0, 0]
    dy = y[0, 1] - y[0, 0]
    eta = np.zeros_like(gx)
    # bottom row
    if gx_fn is not None:
        mid = gx_fn(x[:-1, 0] + 0.5 * dx, y[:-1, 0])
        inc = (dx / 6.0) * (gx[:-1, 0] + 4.0 * mid + gx[1:, 0])
    else:
        inc = 0.5 * dx * (gx[:-1, 0] + gx[1:, 0])
    eta[1:, 0] = np.cumsum(inc)
    # columns
    if gy_fn is not None:
        mid = gy_fn(x[:, :-1], y[:, :-1] + 0.5 * dy)
        inc = (dy / 6.0) * (gy[:, :-1] + 4.0 * mid + gy[:, 1:])
    else:
        inc = 0.5 * dy * (gy[:, :-1] + gy[:, 1:])
    eta[:, 1:] = eta[:, [0]] + np.cumsum(inc, axis=1)
    return eta


def pmc_to_cmc(data, j, mixed_tol=1e-5):
    """Forward data map of the correspondence: (u, C_j, gamma_j, f_j) to (u, nu, p, eta).

    eta comes from path integration of eta_x = -sqrt(2) Im gamma_j,
    eta_y = -sqrt(2) Re gamma_j; the mixed-partial consistency of these
    integrands is reported (and gates) as ``eta_mixed``.
    """
    if j not in (1, 2):
        raise DomainError("j must be 1 or 2")
    gamma = data.gamma1 if j == 1 else data.gamma2
    C = data.C1 if j == 1 else data.C2
    f = data.f1 if j == 1 else data.f2
    gx = -np.sqrt(2.0) * gamma.imag
    gy = -np.sqrt(2.0) * gamma.real
    dx = data.x[1, 0] - data.x[0, 0]
    dy = data.y[0, 1] - data.y[0, 0]
    cross1 = np.gradient(gx, dy, axis=1, edge_order=2)
    cross2 = np.gradient(gy, dx, axis=0, edge_order=2)
    mixed = normalized_mismatch(
        cross1[1:-1, 1:-1], cross2[1:-1, 1:-1], terms=(np.abs(gx) + np.abs(gy),)
    )
    if mixed > mixed_tol:
        raise VerificationError(
            f"eta path integration inconsistent: mixed-partial residual {mixed:.2e}"
        )

    pf = data.fields
    gx_fn = gy_fn = None
    if pf is not None:
        key = f"gamma{j}"
        gx_fn = lambda xs, ys: -np.sqrt(2.0) * pf(xs, ys)[key].imag
        gy_fn = lambda xs, ys: -np.sqrt(2.0) * pf(xs, ys)[key].real
    eta = _path_integrate(data.x, data.y, gx, gy, gx_fn, gy_fn)

    fields = None
    if pf is not None:
        x0, y0 = data.x[0, 0], data.y[0, 0]

        def fields(xs, ys, _pf=pf, _j=j):
            F = _pf(xs, ys)
            g = F[f"gamma{_j}"]
            return {
                "u": F["u"], "ux": F["ux"], "uy": F["uy"],
                "nu": F[f"C{_j}"], "p": np.sqrt(2.0) * F[f"f{_j}"],
                "eta_x": -np.sqrt(2.0) * g.imag, "eta_y": -np.sqrt(2.0) * g.real,
            }

    out = CmcFrenetData(
        eps=data.eps,
        Hval=data.Hnorm,
        x=data.x,
        y=data.y,
        u=data.u,
        nu=C,
        p=np.sqrt(2.0) * f,
        eta=eta,
        eta_x=gx,
        eta_y=gy,
        fields=fields,
    )
    out.residuals = cmc_compatibility_residuals(out)
    out.residuals["eta_mixed"] = mixed
    return out


def cmc_compatibility_residuals(data):
    """Normalized residuals of the CMC integrability system on the data grids."""
    dx = data.x[1, 0] - data.x[0, 0]
    dy = data.y[0, 1] - data.y[0, 0]
    e2u = np.exp(2 * data.u)
    H = data.Hval
    eta_z = data.eta_z()
    inner = (slice(1, -1), slice(1, -1))
    out = {}
    px, py = grid_d(data.p, dx, dy)
    p_zbar = 0.5 * (px + 1j * py)
    out["p_zbar"] = normalized_mismatch(
        p_zbar[inner], (data.eps * e2u / 2.0 * data.nu * eta_z)[inner], terms=(e2u[inner],)
    )
    nx_, ny_ = grid_d(data.nu, dx, dy)
    nu_z = 0.5 * (nx_ - 1j * ny_)
    rhs = -H * eta_z - 2.0 * np.exp(-2 * data.u) * data.p * np.conj(eta_z)
    out["nu_z"] = normalized_mismatch(nu_z[inner], rhs[inner], terms=(H * np.abs(eta_z)[inner] + 1.0,))
    ex_x, _ = grid_d(data.eta_x, dx, dy)
    _, ey_y = grid_d(data.eta_y, dx, dy)
    eta_lap = 0.25 * (ex_x + ey_y)
    out["eta_zzbar"] = normalized_mismatch(
        eta_lap[inner], (e2u / 2.0 * H * data.nu)[inner], terms=(e2u[inner] * H,)
    )
    out["eta_z_norm"] = normalized_mismatch(
        np.abs(eta_z) ** 2, e2u / 4.0 * (1 - data.nu**2), terms=(e2u / 4.0,)
    )
    return out


def cmc_to_pmc(data1, data2, tol=DATA_TOL):
    """Inverse data map: two CMC data sets with equal (u, H) assemble to PMC data."""
    if data1.eps != data2.eps:
        raise DomainError("signatures differ")
    if data1.x.shape != data2.x.shape or np.max(np.abs(data1.x - data2.x)) > 1e-12 or np.max(
        np.abs(data1.y - data2.y)
    ) > 1e-12:
        raise DomainError("grids differ")
    if np.max(np.abs(data1.u - data2.u)) > tol:
        raise DomainError("induced metrics differ: the data do not describe one surface")
    if abs(data1.Hval - data2.Hval) > tol:
        raise DomainError("mean curvatures differ")

    def gamma_of(d):
        return -1j * np.sqrt(2.0) * d.eta_z()

    fields = None
    if data1.fields is not None and data2.fields is not None:

        def fields(xs, ys, f1=data1.fields, f2=data2.fields):
            F1 = f1(xs, ys)
            F2 = f2(xs, ys)
            def gm(F):
                return -1j * np.sqrt(2.0) * 0.5 * (F["eta_x"] - 1j * F["eta_y"])
            return {
                "u": F1["u"], "ux": F1["ux"], "uy": F1["uy"],
                "C1": F1["nu"], "C2": F2["nu"],
                "gamma1": gm(F1), "gamma2": gm(F2),
                "f1": F1["p"] / np.sqrt(2.0), "f2": F2["p"] / np.sqrt(2.0),
                "Hnorm": np.full_like(F1["u"], 0.5 * (data1.Hval + data2.Hval)),
            }

    out = PmcFrenetData(
        eps=data1.eps,
        Hnorm=0.5 * (data1.Hval + data2.Hval),
        x=data1.x,
        y=data1.y,
        u=data1.u,
        C1=data1.nu,
        C2=data2.nu,
        gamma1=gamma_of(data1),
        gamma2=gamma_of(data2),
        f1=data1.p / np.sqrt(2.0),
        f2=data2.p / np.sqrt(2.0),
        fields=fields,
    )
    out.residuals = pmc_compatibility_residuals(out)
    return out


# ---------------------------------------------------------------------------
# canonical initial frames
# ---------------------------------------------------------------------------


def _factor_base(eps):
    if eps == +1:
        p0 = np.array([1.0, 0.0, 0.0])
        E1 = np.array([0.0, 1.0, 0.0])
    else:
        p0 = np.array([0.0, 0.0, 1.0])
        E1 = np.array([1.0, 0.0, 0.0])
    return p0, E1, cross_eps(p0, E1, eps)


def initial_cmc_state(eps, u0, nu0, eta_x0, eta_y0, eta0=0.0):
    """Canonical start (Psi, Psi_x, Psi_y, N) compatible with the data values."""
    p0, F1, F2 = _factor_base(eps)
    e2u = np.exp(2 * u0)
    a_sq = e2u - eta_x0**2
    if a_sq <= 0:
        raise DomainError("initial data violates |Psi_x|^2 = e^{2u}")
    a = np.sqrt(a_sq)
    alpha = -eta_x0 * eta_y0 / a
    beta_sq = e2u - eta_y0**2 - alpha**2
    if beta_sq < -1e-10 * e2u:
        raise DomainError("initial data violates the conformal frame conditions")
    # beta = 0 is legitimate: cylinders have a rank-one factor projection
    beta = np.sqrt(max(beta_sq, 0.0))
    psi_x = a * F1
    psi_y = alpha * F1 + beta * F2
    Psi = np.concatenate([p0, [eta0]])
    Psi_x = np.concatenate([psi_x, [eta_x0]])
    Psi_y = np.concatenate([psi_y, [eta_y0]])
    # unit normal in T(M2 x R), sign chosen to match the vertical component nu
    ip = _ip4(eps)
    cands = []
    for f in (np.concatenate([F1, [0.0]]), np.concatenate([F2, [0.0]]), np.array([0.0, 0, 0, 1.0])):
        v = f - ip(f, Psi_x) * Psi_x / e2u - ip(f, Psi_y) * Psi_y / e2u
        cands.append((ip(v, v), v))
    nsq, N = max(cands, key=lambda t: t[0])
    N = N / np.sqrt(nsq)
    if abs(N[3]) > 1e-12 and abs(nu0) > 1e-12 and np.sign(N[3]) != np.sign(nu0):
        N = -N
    if abs(abs(N[3]) - abs(nu0)) > 1e-6:
        raise DomainError(
            f"initial data inconsistent: |N_vertical| = {abs(N[3]):.6f} but nu = {nu0:.6f}"
        )
    return np.concatenate([Psi, Psi_x, Psi_y, N])


def initial_pmc_state(eps, u0, C1, C2, gamma1, gamma2):
    """Canonical start (Phi, Phi_x, Phi_y, xi) solving the frame relations.

    Solved in closed form in the null basis m = E1 - i E2 of each factor:
    with A = |a1|^2 + |a2|^2 = e^{2u}(1+C1)/8 split by (1 +- C2), the blocks
    a_k, b_k of Phi_z and the xi coefficients follow from the J-relations.
    """
    if min(1 - C1**2, 1 - C2**2) < 1e-12:
        raise DomainError("complex point: the canonical frame construction needs C_j^2 < 1")
    p0, E1, E2 = _factor_base(eps)
    m = E1 - 1j * E2
    e2u = np.exp(2 * u0)
    t = e2u * (1 + C1) / 16.0
    a1 = np.sqrt((1 + C2) * t)
    a2 = np.sqrt((1 - C2) * t)
    b1 = (1 - C1) * np.conj(a1) * gamma2 / ((1 + C2) * np.conj(gamma1))
    b2 = -(1 - C1) * np.conj(a2) * gamma2 / ((1 - C2) * np.conj(gamma1))
    s1 = 1j * (1 - C1) * a1 / gamma1
    t1 = -1j * (1 + C1) * b1 / gamma1
    s2 = 1j * (1 - C1) * a2 / gamma1
    t2 = -1j * (1 + C1) * b2 / gamma1
    phi_z = a1 * m + b1 * np.conj(m)
    psi_z = a2 * m + b2 * np.conj(m)
    xi = np.concatenate([s1 * m + t1 * np.conj(m), s2 * m + t2 * np.conj(m)])
    Phi = np.concatenate([p0, p0])
    Phi_z = np.concatenate([phi_z, psi_z])
    Phi_x = 2.0 * Phi_z.real
    Phi_y = -2.0 * Phi_z.imag
    return Phi, Phi_x, Phi_y, xi


# ---------------------------------------------------------------------------
# reconstruction: CMC charts in M2(eps) x R
# ---------------------------------------------------------------------------


def _spline_chart(x, y, fields_by_name, eps, target, name, metadata, domain_pad=0.0):
    """Wrap gridded jet fields into an ImmersionChart via quintic splines."""
    xs = x[:, 0]
    ys = y[0, :]
    kx = min(5, len(xs) - 1)
    ky = min(5, len(ys) - 1)
    splines = {
        key: [RectBivariateSpline(xs, ys, comp, kx=kx, ky=ky) for comp in np.moveaxis(arr, -1, 0)]
        for key, arr in fields_by_name.items()
    }
    dim = fields_by_name["p"].shape[-1]

    def eval_field(key, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        out = np.empty(X.shape + (dim,))
        for i, sp in enumerate(splines[key]):
            out[..., i] = sp.ev(X, Y)
        return out

    def evaluate(X, Y):
        return eval_field("p", X, Y)

    def jet(X, Y):
        return {key: eval_field(key, X, Y) for key in ("p", "px", "py", "pxx", "pxy", "pyy")}

    domain = (xs[0] + domain_pad, xs[-1] - domain_pad, ys[0] + domain_pad, ys[-1] - domain_pad)
    return ImmersionChart(
        name=name, eps=eps, target=target, domain=domain, evaluate=evaluate, jet=jet, metadata=metadata
    )


def _cmc_rhs_blocks(eps, S, F, Hval):
    """Second derivatives and N derivatives from the CMC Frenet system.

    S holds rows (Psi, Psi_x, Psi_y, N) flattened to (..., 16); F is the dict
    of data fields at the evaluation points.
    """
    Psi, Px, Py, N = S[..., 0:4], S[..., 4:8], S[..., 8:12], S[..., 12:16]
    Psi_hat = np.concatenate([Psi[..., :3], np.zeros_like(Psi[..., :1])], axis=-1)
    Psi_z = 0.5 * (Px - 1j * Py)
    u_z = 0.5 * (F["ux"] - 1j * F["uy"])
    eta_z = 0.5 * (F["eta_x"] - 1j * F["eta_y"])
    e2u = np.exp(2 * F["u"])
    p = F["p"]
    nu = F["nu"]
    A = 2.0 * u_z[..., None] * Psi_z + p[..., None] * N + eps * (eta_z**2)[..., None] * Psi_hat
    B = (e2u / 2.0 * Hval)[..., None] * N + eps * (np.abs(eta_z) ** 2 - e2u / 2.0)[..., None] * Psi_hat
    Nz = (
        -Hval * Psi_z
        - (2.0 * np.exp(-2 * F["u"]) * p)[..., None] * np.conj(Psi_z)
        + (eps * nu * eta_z)[..., None] * Psi_hat
    )
    Pxx = 2.0 * (A.real + B.real)
    Pyy = 2.0 * (B.real - A.real)
    Pxy = -2.0 * A.imag
    Nx = 2.0 * Nz.real
    Ny = -2.0 * Nz.imag
    return Pxx, Pxy, Pyy, Nx, Ny


def _project_cmc_state(eps, S, u_val):
    """Restore the quadric, tangency and Gram constraints of a CMC state."""
    ip = _ip4(eps)
    Psi, Px, Py, N = S[..., 0:4], S[..., 4:8], S[..., 8:12], S[..., 12:16]
    psi = project_to_factor(Psi[..., :3], eps)
    Psi = np.concatenate([psi, Psi[..., 3:]], axis=-1)
    Psi_hat = np.concatenate([psi, np.zeros_like(Psi[..., :1])], axis=-1)

    def detach(V):
        return V - (eps * ip(V, Psi_hat))[..., None] * Psi_hat

    Px, Py, N = detach(Px), detach(Py), detach(N)
    eu = np.exp(u_val)
    e1 = Px / np.sqrt(ip(Px, Px))[..., None]
    f2 = Py - ip(Py, e1)[..., None] * e1
    e2 = f2 / np.sqrt(ip(f2, f2))[..., None]
    n = N - ip(N, e1)[..., None] * e1 - ip(N, e2)[..., None] * e2
    n = n / np.sqrt(ip(n, n))[..., None]
    keep = np.where(ip(n, N) >= 0, 1.0, -1.0)
    return np.concatenate([Psi, eu[..., None] * e1, eu[..., None] * e2, keep[..., None] * n], axis=-1)


def _march(state0, t0, t1, n_steps, rhs, project):
    """RK4 with per-step projection from t0 to t1; returns states at the nodes."""
    h = (t1 - t0) / n_steps
    states = [state0]
    S = state0
    for k in range(n_steps):
        t = t0 + k * h
        k1 = rhs(t, S)
        k2 = rhs(t + 0.5 * h, S + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, S + 0.5 * h * k2)
        k4 = rhs(t + h, S + h * k3)
        S = S + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        S = project(t + h, S)
        states.append(S)
    return states


def _grid_fields(data):
    """Dense field evaluation, from the data's own closure or spline fallback."""
    if data.fields is not None:
        return data.fields
    xs = data.x[:, 0]
    ys = data.y[0, :]
    kx = min(5, len(xs) - 1)
    ky = min(5, len(ys) - 1)
    if isinstance(data, CmcFrenetData):
        names = {"u": data.u, "nu": data.nu, "eta_x": data.eta_x, "eta_y": data.eta_y}
        complexes = {"p": data.p}
    else:
        names = {"u": data.u, "C1": data.C1, "C2": data.C2}
        complexes = {"gamma1": data.gamma1, "gamma2": data.gamma2, "f1": data.f1, "f2": data.f2}
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    ux, uy = grid_d(names["u"], dx, dy)
    sp = {k: RectBivariateSpline(xs, ys, v, kx=kx, ky=ky) for k, v in names.items()}
    sp["ux"] = RectBivariateSpline(xs, ys, ux, kx=kx, ky=ky)
    sp["uy"] = RectBivariateSpline(xs, ys, uy, kx=kx, ky=ky)
    spc = {
        k: (RectBivariateSpline(xs, ys, v.real, kx=kx, ky=ky), RectBivariateSpline(xs, ys, v.imag, kx=kx, ky=ky))
        for k, v in complexes.items()
    }

    def fields(X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        out = {k: s.ev(X, Y) for k, s in sp.items()}
        for k, (sr, si) in spc.items():
            out[k] = sr.ev(X, Y) + 1j * si.ev(X, Y)
        return out

    return fields


def integrate_cmc_frenet(data, init=None, resid_tol=DATA_TOL, substeps=1, recertify=True):
    """Rebuild the CMC immersion from its data by integrating the Frenet system.

    Marches the bottom row first, then all columns in parallel; the top row is
    marched independently and the loop-closure defect reported.  Returns the
    reconstructed chart (quintic-spline evaluate with Frenet-exact jets) and a
    report dictionary.
    """
    worst = max(v for k, v in data.residuals.items() if k != "parallelism")
    if worst > resid_tol:
        raise PreconditionError(f"data residuals too large to integrate: {worst:.2e}")
    fields = _grid_fields(data)
    eps = data.eps
    X, Y = data.x, data.y
    nx, ny = X.shape
    if init is None:
        F0 = {k: np.asarray(v).reshape(()) for k, v in fields(X[0, 0], Y[0, 0]).items()}
        init = initial_cmc_state(
            eps, float(F0["u"]), float(F0["nu"]), float(F0["eta_x"]), float(F0["eta_y"]),
            eta0=float(data.eta[0, 0]),
        )

    def rhs_x(xv, S, y_fixed):
        F = fields(np.full(S.shape[:-1], xv), np.full(S.shape[:-1], y_fixed))
        Pxx, Pxy, _, Nx, _ = _cmc_rhs_blocks(eps, S, F, data.Hval)
        return np.concatenate([S[..., 4:8], Pxx, Pxy, Nx], axis=-1)

    def rhs_y(yv, S, x_arr):
        F = fields(x_arr, np.full_like(x_arr, yv))
        _, Pxy, Pyy, _, Ny = _cmc_rhs_blocks(eps, S, F, data.Hval)
        return np.concatenate([S[..., 8:12], Pxy, Pyy, Ny], axis=-1)

    def proj_x(xv, S, y_fixed):
        u_val = fields(np.full(S.shape[:-1], xv), np.full(S.shape[:-1], y_fixed))["u"]
        return _project_cmc_state(eps, S, u_val)

    def proj_y(yv, S, x_arr):
        u_val = fields(x_arr, np.full_like(x_arr, yv))["u"]
        return _project_cmc_state(eps, S, u_val)

    # bottom row
    row = [np.asarray(init, dtype=float)]
    for i in range(nx - 1):
        seg = _march(
            row[-1], X[i, 0], X[i + 1, 0], substeps,
            lambda t, S: rhs_x(t, S, Y[0, 0]), lambda t, S: proj_x(t, S, Y[0, 0]),
        )
        row.append(seg[-1])
    row = np.stack(row)  # (nx, 16)

    # all columns at once
    states = np.empty((nx, ny, 16))
    states[:, 0, :] = row
    S = row
    xs_row = X[:, 0]
    for jcol in range(ny - 1):
        seg = _march(
            S, Y[0, jcol], Y[0, jcol + 1], substeps,
            lambda t, S_: rhs_y(t, S_, xs_row), lambda t, S_: proj_y(t, S_, xs_row),
        )
        S = seg[-1]
        states[:, jcol + 1, :] = S

    # loop closure: march the top row from its left end
    top = [states[0, -1, :]]
    for i in range(nx - 1):
        seg = _march(
            top[-1], X[i, -1], X[i + 1, -1], substeps,
            lambda t, S_: rhs_x(t, S_, Y[0, -1]), lambda t, S_: proj_x(t, S_, Y[0, -1]),
        )
        top.append(seg[-1])
    top = np.stack(top)
    closure = float(np.max(np.linalg.norm(top[:, 0:4] - states[:, -1, 0:4], axis=-1)))

    # assemble jets from the Frenet right-hand side at the nodes
    Fg = fields(X, Y)
    Pxx, Pxy, Pyy, _, _ = _cmc_rhs_blocks(eps, states, Fg, data.Hval)
    chart = _spline_chart(
        X, Y,
        {"p": states[..., 0:4], "px": states[..., 4:8], "py": states[..., 8:12],
         "pxx": Pxx, "pxy": Pxy, "pyy": Pyy},
        eps, TARGET_LINE, "cmc_reconstruction", {"Hval": data.Hval},
    )
    report = {"loop_closure": closure}
    if recertify:
        from .diffgeo import abresch_rosenberg

        ar = abresch_rosenberg(chart, nx=min(nx, 41), ny=min(ny, 41), shrink=0.03, h_const_tol=1e-3)
        report["H_match"] = float(np.max(np.abs(ar.H_scalar - data.Hval)))
        xg, yg = ar.x, ar.y
        Fa = fields(xg, yg)
        eta_z = 0.5 * (Fa["eta_x"] - 1j * Fa["eta_y"])
        theta_data = data.Hval * Fa["p"] - 0.5 * eps * eta_z**2
        report["theta_ar_match"] = float(np.max(np.abs(ar.theta_ar - theta_data)))
        report["conformal_defect"] = float(np.max(ar.conformal_defect))
        if report["H_match"] > 1e-3:
            raise VerificationError(f"reconstruction failed: |H| off by {report['H_match']:.2e}")
    return chart, report


# ---------------------------------------------------------------------------
# reconstruction: PMC charts in M2(eps) x M2(eps)
# ---------------------------------------------------------------------------


def _pmc_rhs_blocks(eps, Phi, Px, Py, xi, F, Hval):
    """Second derivatives of Phi and first derivatives of xi from the Frenet system."""
    Phi_hat = np.concatenate([Phi[..., :3], -Phi[..., 3:]], axis=-1)
    Phi_z = 0.5 * (Px - 1j * Py)
    u_z = 0.5 * (F["ux"] - 1j * F["uy"])
    e2u = np.exp(2 * F["u"])
    C1, C2 = F["C1"], F["C2"]
    g1, g2, f1, f2 = F["gamma1"], F["gamma2"], F["f1"], F["f2"]
    xibar = np.conj(xi)
    H = Hval / np.sqrt(2.0) * (xi + xibar)
    A = (
        2.0 * u_z[..., None] * Phi_z
        + f1[..., None] * xi
        + f2[..., None] * xibar
        - (eps * g1 * g2 / 2.0)[..., None] * Phi_hat
    )
    B = (e2u / 2.0)[..., None] * H - (eps * e2u / 4.0)[..., None] * Phi - (
        eps * e2u / 4.0 * C1 * C2
    )[..., None] * Phi_hat
    xi_z = (
        -(Hval / np.sqrt(2.0)) * Phi_z
        - (2.0 * np.exp(-2 * F["u"]) * f2)[..., None] * np.conj(Phi_z)
        + (eps * 1j * C1 * g2 / 2.0)[..., None] * Phi_hat
    )
    xi_zbar = (
        -(Hval / np.sqrt(2.0)) * np.conj(Phi_z)
        - (2.0 * np.exp(-2 * F["u"]) * np.conj(f1))[..., None] * Phi_z
        - (eps * 1j * C2 * np.conj(g1) / 2.0)[..., None] * Phi_hat
    )
    Pxx = 2.0 * (A.real + B.real)
    Pyy = 2.0 * (B.real - A.real)
    Pxy = -2.0 * A.imag
    xi_x = xi_z + xi_zbar
    xi_y = 1j * (xi_z - xi_zbar)
    return Pxx, Pxy, Pyy, xi_x, xi_y


def _pack_pmc(Phi, Px, Py, xi):
    return np.concatenate([Phi, Px, Py, xi.real, xi.imag], axis=-1)


def _unpack_pmc(S):
    return S[..., 0:6], S[..., 6:12], S[..., 12:18], S[..., 18:24] + 1j * S[..., 24:30]


def _project_pmc_state(eps, S, u_val):
    ip = _ip6(eps)
    Phi, Px, Py, xi = _unpack_pmc(S)
    phi = project_to_factor(Phi[..., :3], eps)
    psi = project_to_factor(Phi[..., 3:], eps)
    Phi = np.concatenate([phi, psi], axis=-1)
    Phi_hat = np.concatenate([phi, -psi], axis=-1)

    def detach(V):
        V = V - (ip(V, Phi) / (2.0 * eps))[..., None] * Phi
        return V - (ip(V, Phi_hat) / (2.0 * eps))[..., None] * Phi_hat

    Px, Py, xi = detach(Px), detach(Py), detach(xi)
    eu = np.exp(u_val)
    e1 = Px / np.sqrt(ip(Px, Px))[..., None]
    f2 = Py - ip(Py, e1)[..., None] * e1
    e2 = f2 / np.sqrt(ip(f2, f2))[..., None]
    xi = xi - ip(xi, e1)[..., None] * e1 - ip(xi, e2)[..., None] * e2
    # restore <xi, xi> = 0 at first order, then <xi, conj(xi)> = 1
    xi = xi - 0.5 * ip(xi, xi)[..., None] * np.conj(xi)
    xi = xi / np.sqrt(np.abs(ip(xi, np.conj(xi))))[..., None]
    return _pack_pmc(Phi, eu[..., None] * e1, eu[..., None] * e2, xi)


def integrate_pmc_frenet(data, init=None, resid_tol=DATA_TOL, substeps=1, recertify=True):
    """Rebuild the PMC immersion from its data by integrating the Frenet system."""
    worst = max(v for k, v in data.residuals.items() if k != "parallelism")
    if worst > resid_tol:
        raise PreconditionError(f"data residuals too large to integrate: {worst:.2e}")
    fields = _grid_fields(data)
    eps = data.eps
    X, Y = data.x, data.y
    nx, ny = X.shape
    if init is None:
        F0 = {k: np.asarray(v).reshape(()) for k, v in fields(X[0, 0], Y[0, 0]).items()}
        Phi0, Px0, Py0, xi0 = initial_pmc_state(
            eps, float(F0["u"]), float(F0["C1"]), float(F0["C2"]),
            complex(F0["gamma1"]), complex(F0["gamma2"]),
        )
        init = _pack_pmc(Phi0, Px0, Py0, xi0)

    def rhs_x(xv, S, y_fixed):
        F = fields(np.full(S.shape[:-1], xv), np.full(S.shape[:-1], y_fixed))
        Phi, Px, Py, xi = _unpack_pmc(S)
        Pxx, Pxy, _, xi_x, _ = _pmc_rhs_blocks(eps, Phi, Px, Py, xi, F, data.Hnorm)
        return _pack_pmc(Px, Pxx, Pxy, xi_x)

    def rhs_y(yv, S, x_arr):
        F = fields(x_arr, np.full_like(x_arr, yv))
        Phi, Px, Py, xi = _unpack_pmc(S)
        _, Pxy, Pyy, _, xi_y = _pmc_rhs_blocks(eps, Phi, Px, Py, xi, F, data.Hnorm)
        return _pack_pmc(Py, Pxy, Pyy, xi_y)

    def proj_x(xv, S, y_fixed):
        u_val = fields(np.full(S.shape[:-1], xv), np.full(S.shape[:-1], y_fixed))["u"]
        return _project_pmc_state(eps, S, u_val)

    def proj_y(yv, S, x_arr):
        u_val = fields(x_arr, np.full_like(x_arr, yv))["u"]
        return _project_pmc_state(eps, S, u_val)

    row = [np.asarray(init, dtype=float)]
    for i in range(nx - 1):
        seg = _march(
            row[-1], X[i, 0], X[i + 1, 0], substeps,
            lambda t, S: rhs_x(t, S, Y[0, 0]), lambda t, S: proj_x(t, S, Y[0, 0]),
        )
        row.append(seg[-1])
    row = np.stack(row)

    states = np.empty((nx, ny, 30))
    states[:, 0, :] = row
    S = row
    xs_row = X[:, 0]
    for jcol in range(ny - 1):
        seg = _march(
            S, Y[0, jcol], Y[0, jcol + 1], substeps,
            lambda t, S_: rhs_y(t, S_, xs_row), lambda t, S_: proj_y(t, S_, xs_row),
        )
        S = seg[-1]
        states[:, jcol + 1, :] = S

    top = [states[0, -1, :]]
    for i in range(nx - 1):
        seg = _march(
            top[-1], X[i, -1], X[i + 1, -1], substeps,
            lambda t, S_: rhs_x(t, S_, Y[0, -1]), lambda t, S_: proj_x(t, S_, Y[0, -1]),
        )
        top.append(seg[-1])
    top = np.stack(top)
    closure = float(np.max(np.linalg.norm(top[:, 0:6] - states[:, -1, 0:6], axis=-1)))

    Fg = fields(X, Y)
    Phi, Px, Py, xi = _unpack_pmc(states)
    Pxx, Pxy, Pyy, _, _ = _pmc_rhs_blocks(eps, Phi, Px, Py, xi, Fg, data.Hnorm)
    chart = _spline_chart(
        X, Y,
        {"p": Phi, "px": Px, "py": Py, "pxx": Pxx, "pxy": Pxy, "pyy": Pyy},
        eps, TARGET_PRODUCT, "pmc_reconstruction", {"Hnorm": data.Hnorm},
    )
    report = {"loop_closure": closure}
    if recertify:
        Xs, Ys = chart.grid(min(nx, 33), min(ny, 33), shrink=0.03)
        report["parallelism"] = parallelism_residual(chart, Xs, Ys, 5e-4)
        jet = sample_jet(chart, Xs, Ys)
        frame = normal_frame(jet)
        scal = frenet_scalars(jet, frame)
        from .diffgeo import hopf_coefficients

        t1, t2 = hopf_coefficients(jet, frame, scal)
        Fa = fields(Xs, Ys)
        amp = 2.0 * np.sqrt(2.0) * data.Hnorm
        td1 = amp * Fa["f1"] + 0.5 * eps * Fa["gamma1"] ** 2
        td2 = amp * Fa["f2"] + 0.5 * eps * Fa["gamma2"] ** 2
        report["theta_match"] = float(max(np.max(np.abs(t1 - td1)), np.max(np.abs(t2 - td2))))
        report["H_match"] = float(np.max(np.abs(frame.Hnorm - data.Hnorm)))
    return chart, report


# ---------------------------------------------------------------------------
# congruence testing
# ---------------------------------------------------------------------------


def _factor_frame_matrix(p, v, eps, reflect=False):
    e = v / np.sqrt(inner3(v, v, eps))
    je = cross_eps(p, e, eps)
    if reflect:
        je = -je
    return np.stack([p, e, je], axis=-1)


def factor_isometry_from_frames(pA, vA, pB, vB, eps, reflect=False):
    """The isometry of M2(eps) sending the frame (pA, vA) to (pB, +-vB's frame)."""
    MA = _factor_frame_matrix(pA, vA, eps)
    MB = _factor_frame_matrix(pB, vB, eps, reflect=reflect)
    return MB @ np.linalg.inv(MA)


def _height_alignment(hA, hB):
    """Best s in {+1, -1} and offset c with hB ~ s hA + c."""
    best = None
    for s in (+1.0, -1.0):
        c = float(np.mean(hB - s * hA))
        d = float(np.max(np.abs(s * hA + c - hB)))
        if best is None or d < best[2]:
            best = (s, c, d)
    return best


@dataclass
class CongruenceVerdict:
    congruent: bool
    distance: float
    domain_map: str  # "id" or "conj"
    details: dict = field(default_factory=dict)


def weak_congruence_check(chartA, chartB, nx=41, ny=41, tol=1e-3):
    """Weak congruence of two charts into M2(eps) x R.

    Searches over the domain reflection z -> zbar composed with ambient
    isometries (factor isometry from frame matching, both orientations, and
    height direction/offset).  Returns the verdict with the smallest aligned
    max pointwise distance.
    """
    if chartA.target == TARGET_PRODUCT or chartB.target == TARGET_PRODUCT:
        raise DomainError("weak_congruence_check compares charts into M2(eps) x R")
    eps = chartA.eps
    XA, YA = chartA.grid(nx, ny, shrink=0.05)
    PA = chartA.evaluate(XA, YA)
    jA = sample_jet(chartA, XA, YA)
    y0A, y1A = chartA.domain[2], chartA.domain[3]

    best = None
    i0, j0 = nx // 2, ny // 2
    for domain_map in ("id", "conj"):
        XB = XA.copy()
        YB = YA if domain_map == "id" else (chartB.domain[2] + chartB.domain[3]) - YA
        try:
            PB = chartB.evaluate(XB, YB)
            jB = sample_jet(chartB, XB, YB)
        except DomainError:
            continue
        vA = jA.px[i0, j0, :3]
        vB = jB.px[i0, j0, :3]
        if inner3(vA, vA, eps) < 1e-12 or inner3(vB, vB, eps) < 1e-12:
            continue
        for reflect in (False, True):
            L = factor_isometry_from_frames(
                PA[i0, j0, :3], vA, PB[i0, j0, :3], vB, eps, reflect=reflect
            )
            mapped = np.einsum("ij,...j->...i", L, PA[..., :3])
            dist_factor = np.max(np.linalg.norm(mapped - PB[..., :3], axis=-1))
            s, c, dist_h = _height_alignment(PA[..., 3], PB[..., 3])
            dist = max(dist_factor, dist_h)
            if best is None or dist < best.distance:
                best = CongruenceVerdict(
                    congruent=bool(dist <= tol),
                    distance=float(dist),
                    domain_map=domain_map,
                    details={"reflect": reflect, "height_sign": s, "height_offset": c},
                )
    if best is None:
        return CongruenceVerdict(False, np.inf, "none")
    return best


def product_alignment_distance(chartA, chartB, nx=25, ny=25, shrink=0.05):
    """Aligned max distance between two product charts (per-factor frame matching)."""
    eps = chartA.eps
    X, Y = chartA.grid(nx, ny, shrink=shrink)
    PA = chartA.evaluate(X, Y)
    PB = chartB.evaluate(X, Y)
    jA = sample_jet(chartA, X, Y)
    jB = sample_jet(chartB, X, Y)
    i0, j0 = nx // 2, ny // 2
    best = None
    for r1 in (False, True):
        for r2 in (False, True):
            L1 = factor_isometry_from_frames(
                PA[i0, j0, :3], jA.px[i0, j0, :3], PB[i0, j0, :3], jB.px[i0, j0, :3], eps, reflect=r1
            )
            # the second factor of profile charts is a curve: use its x-velocity
            vA2 = jA.px[i0, j0, 3:]
            vB2 = jB.px[i0, j0, 3:]
            if inner3(vA2, vA2, eps) < 1e-10:
                vA2 = jA.py[i0, j0, 3:]
                vB2 = jB.py[i0, j0, 3:]
            L2 = factor_isometry_from_frames(PA[i0, j0, 3:], vA2, PB[i0, j0, 3:], vB2, eps, reflect=r2)
            mapped1 = np.einsum("ij,...j->...i", L1, PA[..., :3])
            mapped2 = np.einsum("ij,...j->...i", L2, PA[..., 3:])
            dist = max(
                np.max(np.linalg.norm(mapped1 - PB[..., :3], axis=-1)),
                np.max(np.linalg.norm(mapped2 - PB[..., 3:], axis=-1)),
            )
            if best is None or dist < best:
                best = float(dist)
    return best
