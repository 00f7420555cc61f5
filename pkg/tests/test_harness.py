import csv
import json

import numpy as np
import pytest

import optbias.spectra as spectra
from optbias import cli, harness
from optbias.errors import ConfigError, DegenerateCorrection
from optbias.harness import TABLES, ExperimentConfig, read_config_file, run_experiment, worker_count
from optbias.verify import verify_suite


def _small(tmp_path, **kw):
    kw.setdefault("p_list", (300, 600))
    kw.setdefault("trials", 4)
    return ExperimentConfig(output_dir=str(tmp_path), **kw)


def test_csv_bytes_are_deterministic(tmp_path):
    a = run_experiment(_small(tmp_path / "a", p_list=(500,), trials=1), workers=1, figures=False)
    b = run_experiment(_small(tmp_path / "b", p_list=(500,), trials=1), workers=1, figures=False)
    assert a.paths["trials"].read_bytes() == b.paths["trials"].read_bytes()
    for name in TABLES:
        assert a.paths[name].read_bytes() == b.paths[name].read_bytes()


def test_worker_count_does_not_change_output(tmp_path):
    a = run_experiment(_small(tmp_path / "a"), workers=1, figures=False)
    b = run_experiment(_small(tmp_path / "b"), workers=2, figures=False)
    assert a.paths["trials"].read_bytes() == b.paths["trials"].read_bytes()


def test_outputs_and_shapes(tmp_path):
    result = run_experiment(_small(tmp_path), workers=1)
    with open(result.paths["trials"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 3 * 4
    assert [(r["p"], r["estimator"], r["trial"]) for r in rows[:3]] == [("300", "pca", "0"), ("300", "pca", "1"),
                                                                        ("300", "pca", "2")]
    assert all(np.isfinite(float(v)) for r in rows for k, v in r.items() if k != "estimator")
    for name, columns in TABLES.items():
        with open(result.paths[name]) as fh:
            table = list(csv.DictReader(fh))
        assert [int(r["p"]) for r in table] == [300, 600]
        assert list(table[0]) == ["p"] + [c[0] for c in columns]
    for fig in ("fig_vol", "fig_discrep"):
        text = result.paths[fig].read_text()
        assert text.startswith("<?xml") and "<dc:date>" not in text
    manifest = json.loads(result.paths["run_manifest"].read_text())
    assert manifest["trials_skipped"] == 0 and manifest["config"]["p_list"] == [300, 600]
    assert (tmp_path / "population.json").exists()


def test_figures_are_byte_stable(tmp_path):
    a = run_experiment(_small(tmp_path / "a", trials=2), workers=1)
    b = run_experiment(_small(tmp_path / "b", trials=2), workers=1)
    assert a.paths["fig_vol"].read_bytes() == b.paths["fig_vol"].read_bytes()


def test_summary_statistics(tmp_path):
    result = run_experiment(_small(tmp_path), workers=1, figures=False)
    vals = [r["v_p"] for r in result.rows if r["p"] == 300 and r["estimator"] == "sharp"]
    mean, sd, se, count = result.summary[(300, "sharp")]["v_p"]
    assert count == 4 and mean == pytest.approx(np.mean(vals))
    assert sd == pytest.approx(np.std(vals, ddof=1)) and se == pytest.approx(sd / 2)


def test_estimator_subset(tmp_path):
    result = run_experiment(_small(tmp_path, estimators=("sharp",)), workers=1, figures=False)
    assert {r["estimator"] for r in result.rows} == {"sharp"}
    assert np.isnan(result.tables["table_vol"][0]["vol_pca"])


@pytest.mark.parametrize("bad", [
    dict(p_list=(600, 300)), dict(trials=0), dict(q=5), dict(kappa_mode="x"), dict(estimators=("pls",)),
    dict(c1=0.0), dict(p_list=(300, 600), p_max=400), dict(seed=-1),
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# study\np_list = 500, 2000\ntrials = 10  # short\ncentering = off\nkappa-mode = plain\n"
                    "estimators = pca sharp\nout = somewhere\n")
    cfg = ExperimentConfig.from_mapping(read_config_file(path))
    assert cfg.p_list == (500, 2000) and cfg.trials == 10 and not cfg.centering
    assert cfg.kappa_mode == "plain" and cfg.estimators == ("pca", "sharp") and cfg.output_dir == "somewhere"
    path.write_text("nonsense\n")
    with pytest.raises(ConfigError):
        read_config_file(path)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"colour": "red"})


def test_worker_env(monkeypatch):
    monkeypatch.setenv("OPTBIAS_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("OPTBIAS_WORKERS", "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_cli_run(tmp_path, capsys):
    code = cli.main(["run", "--p-list", "300", "--trials", "2", "--out", str(tmp_path), "--workers", "1",
                     "--no-figures"])
    assert code == 0
    assert (tmp_path / "table_vol.csv").exists() and "trials" in capsys.readouterr().out


def test_cli_config_flag_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"p_list = 300\ntrials = 50\nout = {tmp_path / 'x'}\n")
    assert cli.main(["run", "--config", str(cfg), "--trials", "2", "--workers", "1", "--no-figures"]) == 0
    manifest = json.loads((tmp_path / "x" / "run_manifest.json").read_text())
    assert manifest["trials_run"] == 2


@pytest.mark.parametrize("argv", [
    ["run", "--p-list", "600,300"], ["run", "--q", "3"], ["run", "--trials", "zero"], ["run", "--config", "/no/such"],
])
def test_cli_config_errors_exit_2(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_too_many_skips_exit_1(tmp_path, monkeypatch, capsys):
    def boom(ctx, trial):
        raise DegenerateCorrection("forced")

    monkeypatch.setattr(harness, "trial_rows", boom)
    code = cli.main(["run", "--p-list", "300", "--trials", "3", "--out", str(tmp_path), "--workers", "1",
                     "--no-figures"])
    assert code == 1
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["trials_skipped"] == 3


def test_verify_passes():
    results = verify_suite()
    assert all(r.passed for r in results), [r for r in results if not r.passed]
    assert cli.main(["verify"]) == 0


def test_verify_reports_asymmetric_truth(capsys):
    results = {r.name: r for r in verify_suite(inject_asymmetric_truth=True)}
    assert not results["discrepancy_identity"].passed
    assert "NotPositiveDefinite" in results["discrepancy_identity"].detail
    assert cli.main(["verify", "--inject-asymmetric-truth"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_catches_tampered_sign_rule(monkeypatch):
    original = spectra._select

    def flipped(*args, **kwargs):
        return -original(*args, **kwargs)

    monkeypatch.setattr(spectra, "_select", flipped)
    results = {r.name: r for r in verify_suite()}
    assert not results["selection_determinism"].passed
