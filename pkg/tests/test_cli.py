import numpy as np

from pmcsurf.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_VERIFICATION, main


def read_obj_vertices(path):
    verts = []
    for line in path.read_text().splitlines():
        if line.startswith("v "):
            verts.append([float(t) for t in line.split()[1:]])
    return np.array(verts)


def test_generate_product_writes_two_factors(tmp_path):
    code = main([
        "generate", "--family", "prop4", "--eps", "-1", "--a", "-2", "--b", "1", "--c", "0",
        "--nx", "17", "--ny", "17", "--out", str(tmp_path),
    ])
    assert code == EXIT_OK
    f1 = tmp_path / "prop4_factor1.obj"
    f2 = tmp_path / "prop4_factor2.obj"
    meta = tmp_path / "prop4_metadata.txt"
    assert f1.exists() and f2.exists() and meta.exists()
    v1 = read_obj_vertices(f1)
    assert v1.shape == (17 * 17, 3)
    # first factor lies on the hyperboloid
    assert np.max(np.abs(v1[:, 0] ** 2 + v1[:, 1] ** 2 - v1[:, 2] ** 2 + 1.0)) < 1e-8
    text = meta.read_text()
    assert "family=prop4" in text
    assert "param_H_sq=0.25" in text
    profile = tmp_path / "prop4_profile.csv"
    assert profile.exists()
    assert profile.read_text().splitlines()[0] == "x,h,hprime"


def test_generate_torus_seam_closure(tmp_path):
    code = main(["generate", "--family", "torus", "--a", "2", "--b", "1",
                 "--nx", "25", "--ny", "25", "--out", str(tmp_path)])
    assert code == EXIT_OK
    v = read_obj_vertices(tmp_path / "torus_factor.obj").reshape(25, 25, 3)
    assert np.max(np.abs(v[0, :, :] - v[-1, :, :])) < 1e-8  # x seam
    assert np.max(np.abs(v[:, 0, :] - v[:, -1, :])) < 1e-8  # y seam
    cover = read_obj_vertices(tmp_path / "torus.obj").reshape(25, 25, 3)
    assert np.max(np.abs(cover[0, :, :] - cover[-1, :, :])) < 1e-8  # x seam closes with height
    meta = (tmp_path / "torus_metadata.txt").read_text()
    assert "circle_radius=1" in meta
    assert "param_kappa_sq=0.25" in meta


def test_generate_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        code = main(["generate", "--family", "example4", "--lambda", "1",
                     "--nx", "13", "--ny", "13", "--out", str(out)])
        assert code == EXIT_OK
    assert (a / "example4.obj").read_bytes() == (b / "example4.obj").read_bytes()
    assert (a / "example4_metadata.txt").read_bytes() == (b / "example4_metadata.txt").read_bytes()


def test_generate_poincare_projection(tmp_path):
    code = main(["generate", "--family", "Ptilde", "--poincare",
                 "--nx", "9", "--ny", "9", "--out", str(tmp_path)])
    assert code == EXIT_OK
    v = read_obj_vertices(tmp_path / "curves_product_factor1.obj")
    assert np.max(np.hypot(v[:, 0], v[:, 1])) < 1.0  # inside the unit disk
    assert np.max(np.abs(v[:, 2])) == 0.0


def test_verify_passes_on_valid_family(tmp_path):
    code = main(["verify", "--family", "prop6", "--eps", "-1", "--a", "-2", "--b", "1", "--c", "0",
                 "--nx", "33", "--ny", "33", "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = (tmp_path / "verify_prop6_eps-1_a-2_b1_c0_lam1_hnorm0.25.txt").read_text()
    assert "verdict=PASS" in report
    assert "theta_ar_value" in report


def test_verify_rejects_infeasible_parameters(tmp_path, capsys):
    code = main(["verify", "--family", "prop4", "--eps", "1", "--a", "1", "--b", "2", "--c", "0",
                 "--out", str(tmp_path)])
    assert code == EXIT_INFEASIBLE
    err = capsys.readouterr().err
    assert "(1+b)(a-b) >= b*c^2" in err


def test_generate_rejects_infeasible_parameters(tmp_path):
    code = main(["generate", "--family", "prop4", "--eps", "1", "--a", "1", "--b", "2", "--c", "0",
                 "--out", str(tmp_path)])
    assert code == EXIT_INFEASIBLE


def test_verify_corrupted_chart_fails_parallelism(tmp_path):
    code = main(["verify", "--family", "prop4", "--eps", "-1", "--a", "-2", "--b", "1", "--c", "0",
                 "--corrupt-height", "1.01", "--nx", "25", "--ny", "25", "--out", str(tmp_path)])
    assert code == EXIT_VERIFICATION
    report = next(tmp_path.glob("verify_*.txt")).read_text()
    line = [l for l in report.splitlines() if l.startswith("parallelism")][0]
    assert "FAIL" in line
    assert float(line.split("=")[1].split()[0]) >= 1e-2


def test_correspond_writes_bundles(tmp_path):
    code = main(["correspond", "--family", "prop4", "--eps", "-1", "--a", "-2", "--b", "1",
                 "--c", "0", "--nx", "33", "--ny", "33", "--out", str(tmp_path)])
    assert code == EXIT_OK
    for j in (1, 2):
        assert (tmp_path / f"cmc_data_j{j}.csv").exists()
        assert (tmp_path / f"cmc_chart_j{j}.obj").exists()
    report = (tmp_path / "correspondence_report.txt").read_text()
    assert "weak_congruence=True" in report
    assert "Hnorm=0.5" in report
    two = [l for l in report.splitlines() if l.startswith("two_theta_ar_vs_theta")]
    assert len(two) == 2
    for line in two:
        assert float(line.split("=")[1]) < 1e-4


def test_correspond_cylinder_case(tmp_path):
    # a product of constant-curvature curves maps to cylinders
    code = main(["correspond", "--family", "product", "--eps", "1", "--a", "1", "--b", "1",
                 "--nx", "25", "--ny", "25", "--domain=0,1.5,0,1.5", "--out", str(tmp_path)])
    assert code == EXIT_OK
    data = np.genfromtxt(tmp_path / "cmc_data_j1.csv", delimiter=",", names=True)
    assert np.max(np.abs(data["nu"])) < 1e-10  # nu = 0
    # eta is linear: second differences along the flattened grid vanish
    eta = data["eta"].reshape(25, 25)
    assert np.max(np.abs(np.diff(eta, n=2, axis=0))) < 1e-8
    assert np.max(np.abs(np.diff(eta, n=2, axis=1))) < 1e-8


def test_correspond_lifted_torus_factorizes(tmp_path):
    # the fundamental domain is large: the default 81x81 grid keeps the
    # data-consistency gates honest
    code = main(["correspond", "--family", "torus", "--a", "2", "--b", "1", "--lift",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = (tmp_path / "correspondence_report.txt").read_text()
    assert "weak_congruence=True" in report
    assert "weak_congruence_domain_map=id" in report  # the two charts coincide
    dist = [l for l in report.splitlines() if l.startswith("weak_congruence_distance")][0]
    assert float(dist.split("=")[1]) < 1e-8


def test_correspond_requires_product_chart(tmp_path):
    code = main(["correspond", "--family", "example4", "--lambda", "1", "--out", str(tmp_path)])
    assert code == EXIT_VERIFICATION


def test_report_battery(tmp_path):
    code = main(["report", "--out", str(tmp_path)])
    assert code == EXIT_OK
    lines = (tmp_path / "battery_report.txt").read_text().strip().splitlines()
    assert len(lines) == 11
    assert all(line.startswith("PASS") for line in lines)
