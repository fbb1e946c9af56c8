import csv
import json
import math

import numpy as np
import pytest

from lcfrisk.cli import dumps, main
from lcfrisk.failure_models import Weibull
from lcfrisk.service import EconomicParams, optimize_interval


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_life_patch_bar_closed_form(capsys, data_dir, material):
    from lcfrisk.material import ndet_from_elastic_stress

    code, out, _ = run(capsys, "life", "--config", data_dir / "patch_bar.toml")
    assert code == 0
    rec = json.loads(out)
    N = ndet_from_elastic_stress(300.0, material).cycles  # amplitude is half the 600 range
    assert rec["eta"] == pytest.approx(N * 18.0 ** (-1 / 2.0), rel=1e-8)
    assert rec["area"] == pytest.approx(18.0, rel=1e-13)


def test_json_round_trip_bit_exact(capsys, data_dir):
    _, out, _ = run(capsys, "life", "--config", data_dir / "notched_bar.toml")
    rec = json.loads(out)
    assert dumps(rec) == out


def test_outputs_deterministic(capsys, data_dir, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "schmid", "--config", data_dir / "schmid_uniaxial.toml", "--samples", 3000,
                   "--out", tmp_path / d)[0] == 0
    for name in ("result.json", "grains.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_schmid_kappa_report(capsys, data_dir):
    code, out, _ = run(capsys, "schmid", "--config", data_dir / "schmid_uniaxial.toml", "--samples", 500,
                       "--kappa-report")
    rec = json.loads(out)
    assert code == 0 and rec["kappa"] == 0.0
    assert rec["provenance"]["seed"] == 20240601
    assert sum(rec["histogram"]["counts"]) == 500


def test_schmid_derives_seed(capsys, data_dir):
    code, out, err = run(capsys, "schmid", "--config", data_dir / "schmid_uniaxial.toml", "--samples", 100,
                         "--set", "run={}")
    seed = json.loads(out)["provenance"]["seed"]
    assert code == 0 and f"derived seed {seed}" in err


def test_service_flags_match_library(capsys):
    code, out, _ = run(capsys, "service", "--eta", 2000, "--m", 2.4, "--income", 50, "--cm", 300,
                       "--cr", 500000, "--ieff", 0.003, "--w", 30)
    rec = json.loads(out)
    ref = optimize_interval(Weibull(2000.0, 2.4), EconomicParams(50.0, 300.0, 5e5, 0.003, 30.0))
    assert code == 0
    assert rec["delta_star"] == ref.delta_star and rec["epv_star"] == ref.epv_star


def test_service_csv_curve(capsys, data_dir, tmp_path):
    run(capsys, "service", "--config", data_dir / "service_golden.toml", "--out", tmp_path)
    rows = list(csv.reader(open(tmp_path / "epv_curve.csv")))
    assert rows[0] == ["delta", "epv"] and len(rows) == 65


def test_pof_csv_stdout(capsys, data_dir):
    code, out, _ = run(capsys, "pof", "--config", data_dir / "pof.toml", "--format", "csv")
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["t", "pof", "hazard"]
    t, F = float(rows[4][0]), float(rows[4][1])
    assert t == 2000.0 and F == pytest.approx(1 - math.exp(-1), rel=1e-14)


def test_sweep(capsys, data_dir):
    code, out, _ = run(capsys, "sweep", "--config", data_dir / "sweep.toml", "--format", "csv")
    header = out.splitlines()[0].split(",")
    assert code == 0 and header[0] == "delta" and len(header) == 4


def test_solve_writes_tables(capsys, data_dir, tmp_path):
    code, _, _ = run(capsys, "solve", "--config", data_dir / "patch_bar.toml", "--out", tmp_path)
    disp = np.loadtxt(tmp_path / "displacement.csv", delimiter=",", skiprows=1)
    assert code == 0
    np.testing.assert_allclose(disp[:, 4], 600.0 / 200e3 * disp[:, 1], atol=1e-12)


def test_gradcheck_command(capsys, data_dir, tmp_path):
    code, out, _ = run(capsys, "gradcheck", "--config", data_dir / "notched_bar.toml", "--out", tmp_path)
    rec = json.loads(out)
    assert code == 0
    normal = [c for c in rec["checks"] if "normal" in c["name"]]
    assert len(normal) == 3 and all(c["relative_gap"] < 1e-2 for c in normal)
    assert (tmp_path / "density.csv").exists()


def test_flag_overrides_mesh_and_traction(capsys, data_dir):
    code, out, _ = run(capsys, "life", "--config", data_dir / "patch_bar.toml", "--traction", "x1=300,0,0",
                       "--refine", 1)
    rec = json.loads(out)
    assert code == 0 and rec["mesh"]["elements"] == 32


def test_validate_command(capsys, data_dir):
    code, out, _ = run(capsys, "validate", "--config", data_dir / "notched_bar.toml", "--command", "gradcheck")
    assert code == 0 and json.loads(out)["valid"]
    code, out, _ = run(capsys, "validate", "--config", data_dir / "patch_bar.toml", "--set", "statistics.m_bar=0.5")
    assert code == 2 and "statistics.m_bar must be ≥ 1, got 0.5" in json.loads(out)["errors"]


def test_config_error_exit_2(capsys, data_dir):
    code, _, err = run(capsys, "life", "--config", data_dir / "patch_bar.toml", "--set", "statistics.m_bar=0.5")
    rec = json.loads(err)
    assert code == 2 and rec["error"] == "config"


def test_domain_error_exit_2(capsys):
    # a zero stress tensor has no life distribution
    code, _, err = run(capsys, "schmid", "--config", "/dev/null", "--set", "material.E=1.0",
                       "--set", "material.nu=0.3", "--set", "material.K=1.0", "--set", "material.n_prime=0.2",
                       "--set", "material.sigma_f_prime=1.0", "--set", "material.eps_f_prime=1.0",
                       "--set", "material.b=-0.1", "--set", "material.c=-0.5",
                       "--set", "microstructure.stress=[0.0, 0.0, 0.0]", "--seed", 1)
    assert code == 2 and json.loads(err)["error"] == "domain"


def test_step_size_error_exit_3(capsys, data_dir):
    code, _, err = run(capsys, "gradcheck", "--config", data_dir / "notched_bar.toml", "--set", "gradcheck.h=5.0")
    assert code == 3 and json.loads(err)["error"] == "step_size"


def test_mesh_error_exit_4(capsys, data_dir, tmp_path):
    bad = tmp_path / "bad.msh"
    bad.write_text("not a mesh\n")
    code, _, err = run(capsys, "life", "--config", data_dir / "patch_bar.toml", "--mesh", bad)
    assert code == 4 and json.loads(err)["error"] == "mesh"
