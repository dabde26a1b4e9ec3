"""Command-line surface: subcommands, config files, exit codes."""

import csv
import json

import numpy as np
import pytest

from elsq import cli, pipeline

EXIT_OK, EXIT_CAPACITY, EXIT_DATA, EXIT_KEYS = 0, 2, 3, 4


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "sim.csv"
    rc = cli.main(
        ["simulate", "--n", "20", "--p", "2", "--rho", "0.2", "--sigma", "0.5",
         "--seed", "11", "--out", str(path)]
    )
    assert rc == EXIT_OK
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


def test_simulate_writes_ingestable_csv(sim_csv):
    from elsq import data

    bundle = data.ingest_csv(sim_csv, response_column="y")
    assert bundle.N == 20 and bundle.P == 2
    assert bundle.columns == ["x1", "x2"]


def test_simulate_matches_library_output(sim_csv):
    from elsq import data

    bundle = data.simulate(data.SimulationSpec(N=20, P=2, rho=0.2, sigma=0.5, seed=11))
    ingested = data.ingest_csv(sim_csv, response_column="y")
    assert np.allclose(ingested.raw_X, bundle.raw_X, atol=1e-10)
    assert np.allclose(ingested.raw_y, bundle.raw_y, atol=1e-10)


def test_fit_decrypt_predict_roundtrip(sim_csv, tmp_path, capsys):
    art = tmp_path / "art"
    assert run(["fit", "--data", sim_csv, "--response", "y",
                "--algorithm", "GD", "--k", "2", "--out", art]) == EXIT_OK
    assert run(["decrypt", "--artifact", art]) == EXIT_OK
    out = capsys.readouterr().out
    assert "intercept" in out and "backend oracle" in out

    assert run(["predict", "--artifact", art, "--row", "0.5,-0.2"]) == EXIT_OK
    printed = float(capsys.readouterr().out.strip())
    expected = pipeline.predict_from_artifact(art, [0.5, -0.2])
    assert printed == pytest.approx(expected, abs=1e-6)


def test_decrypt_csv_export(sim_csv, tmp_path):
    art = tmp_path / "art"
    run(["fit", "--data", sim_csv, "--response", "y", "--k", "2", "--out", art])
    out_csv = tmp_path / "coef.csv"
    assert run(["decrypt", "--artifact", art, "--csv", out_csv]) == EXIT_OK
    rows = list(csv.reader(out_csv.open()))
    assert rows[0] == ["column", "standardized", "raw"]
    assert rows[-1][0] == "intercept"
    assert len(rows) == 4


def test_config_file_supplies_defaults_and_flags_win(sim_csv, tmp_path, capsys):
    cfg = tmp_path / "fit.cfg"
    cfg.write_text("# plan\nalgorithm=NAG\nk=2\nnu=4\nprecondition=true\n")
    art1 = tmp_path / "a1"
    assert run(["--config", cfg, "fit", "--data", sim_csv, "--response", "y",
                "--out", art1]) == EXIT_OK
    manifest = json.loads((art1 / pipeline.MANIFEST_NAME).read_text())
    assert manifest["plan"]["algorithm"] == "NAG"
    assert manifest["plan"]["preconditioned"] is True

    # an explicit flag overrides the config entry
    art2 = tmp_path / "a2"
    assert run(["--config", cfg, "fit", "--data", sim_csv, "--response", "y",
                "--algorithm", "GD", "--out", art2]) == EXIT_OK
    manifest2 = json.loads((art2 / pipeline.MANIFEST_NAME).read_text())
    assert manifest2["plan"]["algorithm"] == "GD"


def test_config_file_rejects_malformed_lines(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("algorithm GD\n")
    assert run(["--config", cfg, "params", "--n", "5", "--p", "2", "--nu", "4"]) == EXIT_DATA
    assert "KEY=VALUE" in capsys.readouterr().err


def test_params_reports_selection(capsys):
    assert run(["params", "--algorithm", "GD", "--k", "2", "--nu", "4",
                "--n", "12", "--p", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "multiplicative depth 4" in out
    assert "ring degree" in out


def test_capacity_exit_code(sim_csv, tmp_path, capsys):
    rc = run(["fit", "--data", sim_csv, "--response", "y", "--k", "900",
              "--nu", "4", "--out", tmp_path / "never"])
    assert rc == EXIT_CAPACITY
    assert "error:" in capsys.readouterr().err
    assert not (tmp_path / "never").exists()


def test_data_exit_codes(tmp_path, capsys):
    assert run(["fit", "--data", tmp_path / "missing.csv", "--response", "y",
                "--out", tmp_path / "x"]) == EXIT_DATA
    assert run(["params", "--n", "5", "--p", "2", "--nu", "0"]) == EXIT_DATA
    assert run(["params", "--n", "5", "--p", "2", "--nu", "auto"]) == EXIT_DATA
    assert run(["predict", "--artifact", tmp_path, "--row", "1,2"]) == EXIT_DATA
    capsys.readouterr()


def test_fit_requires_a_data_source(tmp_path, capsys):
    assert run(["fit", "--out", tmp_path / "x"]) == EXIT_DATA
    assert "--data" in capsys.readouterr().err


def test_bad_row_argument(sim_csv, tmp_path, capsys):
    art = tmp_path / "art"
    run(["fit", "--data", sim_csv, "--response", "y", "--k", "1", "--out", art])
    assert run(["predict", "--artifact", art, "--row", "1,banana"]) == EXIT_DATA
    assert "comma-separated" in capsys.readouterr().err


def test_bootstrap_subcommand(sim_csv, tmp_path, capsys):
    out_csv = tmp_path / "se.csv"
    assert run(["bootstrap", "--data", sim_csv, "--response", "y", "--k", "2",
                "--b", "6", "--seed", "1", "--csv", out_csv]) == EXIT_OK
    rows = list(csv.reader(out_csv.open()))
    assert rows[0] == ["column", "bootstrap_se"]
    assert len(rows) == 3
    assert all(float(r[1]) >= 0 for r in rows[1:])
    capsys.readouterr()


def test_benchmark_subcommand(sim_csv, tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    assert run(["benchmark", "--data", sim_csv, "--response", "y",
                "--mmd", "8", "--out", out_csv]) == EXIT_OK
    out = capsys.readouterr().out
    assert "GD+VWT" in out
    rows = list(csv.reader(out_csv.open()))
    assert len(rows) == 5  # header + one row per algorithm


def test_benchmark_rejects_unknown_algorithm(sim_csv, capsys):
    assert run(["benchmark", "--data", sim_csv, "--response", "y",
                "--algorithms", "GD,QR"]) == EXIT_DATA
    assert "QR" in capsys.readouterr().err


@pytest.fixture(scope="module")
def fv_setup(tmp_path_factory):
    """Keys plus a tiny dataset sized so the fv backend stays fast."""
    root = tmp_path_factory.mktemp("fv")
    keys = root / "keys.bin"
    tiny = root / "tiny.csv"
    plan_flags = ["--algorithm", "GD", "--k", "1", "--nu", "4", "--phi", "1"]
    assert cli.main(["keygen", *plan_flags, "--n", "6", "--p", "2",
                     "--out", str(keys)]) == EXIT_OK
    assert cli.main(["simulate", "--n", "6", "--p", "2", "--seed", "1",
                     "--out", str(tiny)]) == EXIT_OK
    return root, keys, tiny, plan_flags


def test_fv_fit_and_key_mismatch(fv_setup, tmp_path, capsys):
    root, keys, tiny, plan_flags = fv_setup
    art = tmp_path / "art_fv"
    assert run(["fit", "--data", tiny, "--response", "y", *plan_flags,
                "--backend", "fv", "--keys", keys, "--out", art]) == EXIT_OK
    assert run(["decrypt", "--artifact", art]) == EXIT_KEYS
    assert run(["decrypt", "--artifact", art, "--keys", keys]) == EXIT_OK
    capsys.readouterr()

    other = tmp_path / "other.bin"
    assert run(["keygen", *plan_flags, "--n", "6", "--p", "2", "--seed", "different",
                "--out", other]) == EXIT_OK
    assert run(["decrypt", "--artifact", art, "--keys", other]) == EXIT_KEYS
    assert "decrypt" in capsys.readouterr().err


def test_encrypt_then_fit_matches_direct_fit(fv_setup, tmp_path, capsys):
    root, keys, tiny, plan_flags = fv_setup
    enc = tmp_path / "encdata"
    assert run(["encrypt", "--data", tiny, "--response", "y", *plan_flags,
                "--keys", keys, "--out", enc]) == EXIT_OK
    assert (enc / "meta.json").exists()

    art_two_step = tmp_path / "art2"
    assert run(["fit", "--encrypted", enc, "--n", "6", "--p", "2", *plan_flags,
                "--keys", keys, "--out", art_two_step]) == EXIT_OK
    art_direct = tmp_path / "art1"
    assert run(["fit", "--data", tiny, "--response", "y", *plan_flags,
                "--backend", "fv", "--keys", keys, "--out", art_direct]) == EXIT_OK
    capsys.readouterr()

    direct = pipeline.decrypt_report(art_direct, keys_path=keys)
    two_step = pipeline.decrypt_report(art_two_step, keys_path=keys)
    assert direct["coefficients_standardized"] == two_step["coefficients_standardized"]


def test_fit_encrypted_needs_shape(fv_setup, tmp_path, capsys):
    root, keys, tiny, plan_flags = fv_setup
    assert run(["fit", "--encrypted", tmp_path / "nowhere", *plan_flags,
                "--keys", keys, "--out", tmp_path / "x"]) == EXIT_DATA
    assert "--n" in capsys.readouterr().err
