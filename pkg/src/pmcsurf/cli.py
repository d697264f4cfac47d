"""Command line front end: build families, verify invariants, run correspondences.

Subcommands
  generate    write OBJ meshes and a metadata side-car for a family chart
  verify      run the invariant suite, write a report, exit 0 only if all pass
  correspond  run the PMC -> (CMC, CMC) correspondence with reconstructions
  report      verify a standard battery of families into one combined report

Exit codes: 0 success, 1 verification failure, 2 infeasible parameters,
3 I/O error.  Outputs are deterministic: identical configuration gives
byte-identical files.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import families as fam
from .correspondence import (
    extract_pmc_data,
    integrate_cmc_frenet,
    pmc_to_cmc,
    weak_congruence_check,
)
from .diffgeo import (
    abresch_rosenberg,
    curvature_bound_excess,
    surface_invariants,
)
from .errors import DomainError, InfeasibleParameters, VerificationError
from .profile import ProfileParams, check_restrictions, closed_form, solve_profile

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3

FAMILIES = ("product", "T", "That", "Chat", "Ptilde", "prop4", "prop6",
            "example2", "example4", "example5", "phi0", "torus")


# ---------------------------------------------------------------------------
# chart construction from CLI parameters
# ---------------------------------------------------------------------------


def _profile_solution(params, x_span):
    """Closed-form h when the parameters sit in a known regime, RK4 otherwise."""
    eps, a, b, c = params.eps, params.a, params.b, params.c
    if c == 0.0 and eps == -1 and b == 1.0 and a <= -1.0:
        return closed_form("sinh_family", params, x_span=x_span)
    if c == 0.0 and eps == +1 and a > b:
        return closed_form("sn_family", params, x_span=x_span)
    if c == 0.0 and eps == -1 and a == -1.0 and b < 1.0:
        return closed_form("tan_family", params, x_span=x_span)
    return solve_profile(params, x_span=x_span)


def build_chart(args):
    """Construct the requested family chart, validating feasibility."""
    name = args.family
    dom = args.domain
    if name == "product":
        chart = fam.product_of_curves(args.eps, args.a, args.b, domain=dom)
    elif name == "T":
        chart = fam.example1_chart("T", a=args.a, ahat=args.b)
    elif name == "That":
        chart = fam.example1_chart("That", a=args.a, ahat=args.b)
    elif name == "Chat":
        chart = fam.example1_chart("Chat", a=args.a)
    elif name == "Ptilde":
        chart = fam.example1_chart("Ptilde")
    elif name in ("prop4", "prop6"):
        params = ProfileParams(args.eps, args.a, args.b, args.c)
        verdict = check_restrictions(params)
        if not verdict:
            raise InfeasibleParameters(
                f"parameters violate the restriction {verdict.clause}", verdict.clause
            )
        x_span = (dom[0], dom[1]) if dom else (-1.2, 1.2)
        y_span = (dom[2], dom[3]) if dom else (-1.0, 1.0)
        h = _profile_solution(params, x_span)
        if name == "prop4":
            chart = fam.pmc_profile_family(params, h, y_span=y_span)
        else:
            chart = fam.cmc_profile_family(params, h, y_span=y_span)
        chart.metadata["profile"] = h
    elif name == "example2":
        chart = fam.pmc_sinh_family(args.lam)
    elif name == "example4":
        chart = fam.cmc_sinh_chart(args.lam)
    elif name == "example5":
        chart = fam.cmc_leite_chart(args.hnorm)
    elif name == "phi0":
        chart = fam.pmc_phi0(args.hnorm)
    elif name == "torus":
        chart = fam.cmc_torus(args.a, args.b)
    else:
        raise DomainError(f"unknown family '{name}' (choose from {', '.join(FAMILIES)})")
    if args.lift:
        chart = fam.geodesic_inclusion(chart)
    if dom is not None and name not in ("prop4", "prop6"):
        chart.domain = tuple(dom)
    return chart


def _corrupt_chart(chart, factor):
    """Scale the second factor (or the height) of a chart: a negative control."""

    def evaluate(x, y):
        p = chart.evaluate(x, y).copy()
        if chart.target == fam.TARGET_PRODUCT:
            p[..., 3:] = factor * p[..., 3:]
        else:
            p[..., 3] = factor * p[..., 3]
        return p

    return fam.ImmersionChart(
        name=f"{chart.name}(corrupted x{factor})",
        eps=chart.eps,
        target=chart.target,
        domain=chart.domain,
        evaluate=evaluate,
        jet=None,
        metadata=dict(chart.metadata),
        circle_radius=chart.circle_radius,
        periods=chart.periods,
    )


# ---------------------------------------------------------------------------
# mesh and metadata output
# ---------------------------------------------------------------------------


def write_obj(path, vertices, nx, ny):
    """ASCII OBJ of a structured grid of vertices (nx*ny, 3), quads split in two."""
    lines = []
    for v in vertices:
        lines.append(f"v {v[0]:.12e} {v[1]:.12e} {v[2]:.12e}")
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j + 1
            b = (i + 1) * ny + j + 1
            c = (i + 1) * ny + j + 2
            d = i * ny + j + 2
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
    Path(path).write_text("\n".join(lines) + "\n")


def _disk_projection(pts3, eps, poincare):
    """2D picture of a factor point: Poincare disk / stereographic projection."""
    if not poincare:
        return pts3
    denom = 1.0 + pts3[..., 2:3]
    return np.concatenate([pts3[..., :2] / denom, np.zeros_like(denom)], axis=-1)


def write_metadata(path, entries):
    lines = [f"{key}={entries[key]}" for key in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_generate(args):
    chart = build_chart(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nx, ny = args.nx, args.ny
    X, Y = chart.grid(nx, ny)
    P = chart.evaluate(X, Y)
    meta = {
        "family": chart.name,
        "eps": chart.eps,
        "target": chart.target,
        "nx": nx,
        "ny": ny,
        "domain": ",".join(f"{v:.12g}" for v in chart.domain),
    }
    for key, val in chart.metadata.items():
        if isinstance(val, (int, float, complex, str)):
            meta[f"param_{key}"] = val
    stem = chart.name.replace("(", "_").replace(")", "")
    files = []
    if chart.target == fam.TARGET_PRODUCT:
        first = _disk_projection(P[..., :3], chart.eps, args.poincare and chart.eps == -1)
        second = _disk_projection(P[..., 3:], chart.eps, args.poincare and chart.eps == -1)
        for tag, pts in (("factor1", first), ("factor2", second)):
            path = out / f"{stem}_{tag}.obj"
            write_obj(path, pts.reshape(-1, 3), nx, ny)
            files.append(path)
    else:
        flat = _disk_projection(P[..., :3], chart.eps, True)
        mesh = np.concatenate([flat[..., :2], P[..., 3:4]], axis=-1)
        path = out / f"{stem}.obj"
        write_obj(path, mesh.reshape(-1, 3), nx, ny)
        files.append(path)
        if chart.target == fam.TARGET_CIRCLE:
            meta["circle_radius"] = f"{chart.circle_radius:.12g}"
            # the factor component closes over the fundamental domain seams
            path = out / f"{stem}_factor.obj"
            write_obj(path, P[..., :3].reshape(-1, 3), nx, ny)
            files.append(path)
    if chart.periods is not None:
        meta["period_x"] = f"{chart.periods[0]:.12g}"
        meta["period_y"] = f"{chart.periods[1]:.12g}"
    # a one-line invariant summary in the side-car
    try:
        if chart.target == fam.TARGET_PRODUCT:
            inv = surface_invariants(chart, nx=min(nx, 41), ny=min(ny, 41), resid_refine=2)
            meta["H_sq"] = f"{float(np.mean(inv.Hnorm**2)):.12g}"
            meta["max_conformal_defect"] = f"{float(np.max(inv.conformal_defect)):.3e}"
            meta["parallelism_residual"] = f"{inv.parallelism_residual:.3e}"
        else:
            ar = abresch_rosenberg(chart, nx=min(nx, 41), ny=min(ny, 41))
            meta["H"] = f"{float(np.mean(ar.H_scalar)):.12g}"
            meta["theta_ar_mean_re"] = f"{float(np.mean(ar.theta_ar.real)):.12g}"
            meta["theta_ar_mean_im"] = f"{float(np.mean(ar.theta_ar.imag)):.12g}"
    except (DomainError, VerificationError) as exc:
        meta["invariants_error"] = str(exc)
    profile = chart.metadata.get("profile")
    if profile is not None:
        profile_path = out / f"{stem}_profile.csv"
        profile.to_csv(profile_path)
        files.append(profile_path)
    meta_path = out / f"{stem}_metadata.txt"
    write_metadata(meta_path, meta)
    files.append(meta_path)
    for f in files:
        print(f)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def _verify_product(chart, args):
    checks = []
    inv = surface_invariants(
        chart,
        nx=args.nx,
        ny=args.ny,
        fd_step=args.fd_step,
        numeric=args.fd_step is not None or chart.jet is None,
    )
    checks.append(("conformal_defect", float(np.max(inv.conformal_defect)), 1e-6))
    checks.append(("parallelism", inv.parallelism_residual, 1e-5))
    for key in sorted(inv.identity_residuals):
        checks.append((key, inv.identity_residuals[key], args.tol))
    checks.append(("dzbar_theta1", inv.holomorphy["dzbar_theta1_scaled"], 1e-3))
    checks.append(("dzbar_theta2", inv.holomorphy["dzbar_theta2_scaled"], 1e-3))
    checks.append(("curvature_bound", max(curvature_bound_excess(inv), 0.0), 1e-6))
    expected = chart.metadata.get("hopf_expected")
    if expected is not None:
        # compare as an unordered pair: the labels are orientation-gauge
        d_keep = max(
            float(np.max(np.abs(inv.theta1 - expected[0]))),
            float(np.max(np.abs(inv.theta2 - expected[1]))),
        )
        d_swap = max(
            float(np.max(np.abs(inv.theta1 - expected[1]))),
            float(np.max(np.abs(inv.theta2 - expected[0]))),
        )
        tol = 1e-7 if expected[0] == 0 and expected[1] == 0 else 1e-5
        checks.append(("hopf_values", min(d_keep, d_swap), tol))
    return checks


def _verify_cmc(chart, args):
    ar = abresch_rosenberg(
        chart,
        nx=args.nx,
        ny=args.ny,
        fd_step=args.fd_step,
        numeric=args.fd_step is not None or chart.jet is None,
        h_const_tol=1e-2 if args.fd_step else 1e-6,
    )
    checks = [
        ("conformal_defect", ar.residuals["conformal_defect"], 1e-6),
        ("H_spread", ar.residuals["H_spread"], 1e-6),
        ("eta_z_law", ar.residuals["eta_z_law"], args.tol),
        ("dzbar_theta_ar", ar.residuals["dzbar_theta_ar_scaled"], 1e-3),
    ]
    expected = chart.metadata.get("theta_ar_expected")
    if expected is not None:
        checks.append(
            ("theta_ar_value", float(np.max(np.abs(ar.theta_ar - expected))), 1e-4)
        )
    return checks


def _config_slug(args):
    bits = [args.family]
    for key in ("eps", "a", "b", "c", "lam", "hnorm"):
        val = getattr(args, key, None)
        if val is not None:
            bits.append(f"{key}{val:g}")
    if args.lift:
        bits.append("lift")
    return "_".join(bits)


def cmd_verify(args):
    chart = build_chart(args)
    if args.corrupt_height != 1.0:
        chart = _corrupt_chart(chart, args.corrupt_height)
        if args.fd_step is None:
            args.fd_step = 1e-3
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"family={chart.name}", f"config={_config_slug(args)}", f"grid={args.nx}x{args.ny}"]
    try:
        if chart.target == fam.TARGET_PRODUCT:
            checks = _verify_product(chart, args)
        else:
            checks = _verify_cmc(chart, args)
    except (DomainError, VerificationError) as exc:
        lines.append(f"FAIL construction: {exc}")
        path = out / f"verify_{_config_slug(args)}.txt"
        path.write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
        return EXIT_VERIFICATION
    failed = []
    for name, value, tol in checks:
        status = "PASS" if value <= tol else "FAIL"
        if status == "FAIL":
            failed.append(name)
        lines.append(f"{name} = {value:.6e}  tol = {tol:.1e}  {status}")
    lines.append("verdict=" + ("PASS" if not failed else "FAIL: " + ", ".join(failed)))
    path = out / f"verify_{_config_slug(args)}.txt"
    path.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if not failed else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# correspondence
# ---------------------------------------------------------------------------


def cmd_correspond(args):
    chart = build_chart(args)
    if chart.target != fam.TARGET_PRODUCT:
        raise DomainError("correspond needs a PMC chart (product target); try --lift for CMC families")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = extract_pmc_data(chart, nx=args.nx, ny=args.ny)
    report = [f"source={chart.name}", f"Hnorm={data.Hnorm:.12g}"]
    for key in sorted(data.residuals):
        report.append(f"data_{key}={data.residuals[key]:.3e}")
    recs = []
    for j in (1, 2):
        dj = pmc_to_cmc(data, j)
        rec, rep = integrate_cmc_frenet(dj)
        recs.append(rec)
        dj.to_csv(out / f"cmc_data_j{j}.csv")
        ar = abresch_rosenberg(rec, nx=min(args.nx, 41), ny=min(args.ny, 41), shrink=0.04, h_const_tol=1e-3)
        X, Y = rec.grid(args.nx, args.ny, shrink=0.02)
        P = rec.evaluate(X, Y)
        flat = _disk_projection(P[..., :3], chart.eps, True)
        mesh = np.concatenate([flat[..., :2], P[..., 3:4]], axis=-1)
        write_obj(out / f"cmc_chart_j{j}.obj", mesh.reshape(-1, 3), args.nx, args.ny)
        report.append(f"reconstruction_{j}_H={float(np.mean(ar.H_scalar)):.12g}")
        report.append(f"reconstruction_{j}_loop_closure={rep['loop_closure']:.3e}")
        report.append(f"reconstruction_{j}_H_match={rep['H_match']:.3e}")
        report.append(f"reconstruction_{j}_theta_ar_match={rep['theta_ar_match']:.3e}")
        # 2 Theta_AR against the source Hopf coefficient
        F = data.fields(ar.x, ar.y)
        amp = 2.0 * np.sqrt(2.0) * data.Hnorm
        theta_j = amp * F[f"f{j}"] + 0.5 * chart.eps * F[f"gamma{j}"] ** 2
        mismatch = float(np.max(np.abs(2.0 * ar.theta_ar - theta_j)))
        report.append(f"two_theta_ar_vs_theta_{j}={mismatch:.3e}")
    verdict = weak_congruence_check(recs[0], recs[1], nx=min(args.nx, 21), ny=min(args.ny, 21))
    report.append(f"weak_congruence={verdict.congruent}")
    report.append(f"weak_congruence_distance={verdict.distance:.3e}")
    report.append(f"weak_congruence_domain_map={verdict.domain_map}")
    text = "\n".join(report)
    (out / "correspondence_report.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# battery report
# ---------------------------------------------------------------------------

BATTERY = [
    ["--family", "T", "--a", "0.6", "--b", "0.8"],
    ["--family", "Chat", "--a", "1.4142135623730951"],
    ["--family", "Ptilde"],
    ["--family", "prop4", "--eps", "-1", "--a", "-2", "--b", "1", "--c", "0"],
    ["--family", "prop4", "--eps", "1", "--a", "2", "--b", "1", "--c", "0", "--domain=-1.6,1.6,-1,1"],
    ["--family", "phi0", "--hnorm", "0.25"],
    ["--family", "prop6", "--eps", "-1", "--a", "-2", "--b", "1", "--c", "0"],
    ["--family", "example4", "--lambda", "1"],
    ["--family", "example5", "--hnorm", "0.25"],
    ["--family", "torus", "--a", "2", "--b", "1"],
    ["--family", "torus", "--a", "2", "--b", "1", "--lift"],
]


def cmd_report(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    parser = build_parser()
    statuses = []
    for extra in BATTERY:
        sub = parser.parse_args(["verify", *extra, "--out", str(out), "--nx", str(args.nx), "--ny", str(args.ny)])
        code = sub.func(sub)
        statuses.append((" ".join(extra), code))
    lines = [f"{'PASS' if code == 0 else 'FAIL'}  {name}" for name, code in statuses]
    (out / "battery_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all(code == 0 for _, code in statuses) else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--family", required=False, default="prop4", choices=FAMILIES)
    sub.add_argument("--eps", type=int, default=-1, choices=(-1, 1))
    sub.add_argument("--a", type=float, default=-2.0)
    sub.add_argument("--b", type=float, default=1.0)
    sub.add_argument("--c", type=float, default=0.0)
    sub.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sub.add_argument("--hnorm", type=float, default=0.25)
    sub.add_argument("--lift", action="store_true", help="compose with the totally geodesic inclusion")
    sub.add_argument("--nx", type=int, default=81)
    sub.add_argument("--ny", type=int, default=81)
    sub.add_argument(
        "--domain", type=_parse_domain, default=None, metavar="x0,x1,y0,y1",
        help="chart rectangle; use --domain=-1,1,-1,1 when values start with a minus sign",
    )
    sub.add_argument("--fd-step", dest="fd_step", type=float, default=None)
    sub.add_argument("--tol", type=float, default=1e-4)
    sub.add_argument("--poincare", action="store_true")
    sub.add_argument("--out", default="out")


def _parse_domain(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("domain needs four numbers x0,x1,y0,y1")
    return tuple(parts)


def build_parser():
    parser = argparse.ArgumentParser(prog="pmcsurf", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("generate", cmd_generate),
        ("verify", cmd_verify),
        ("correspond", cmd_correspond),
        ("report", cmd_report),
    ):
        sub = subs.add_parser(name)
        _add_common(sub)
        if name == "verify":
            sub.add_argument("--corrupt-height", dest="corrupt_height", type=float, default=1.0)
        sub.set_defaults(func=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleParameters as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, VerificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
