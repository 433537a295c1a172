import hashlib
import json

import numpy as np
import pytest

from conftest import tiny_overrides
from ttedopa.config import load_config
from ttedopa.pipeline import StageError, _read_columns, _run_stage, run_pipeline, snapshot_steps, stage_backmap, stage_measure


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    return run_pipeline(load_config(overrides=tiny_overrides()), tmp_path_factory.mktemp("tiny"))


def test_outputs_present(tiny_run):
    names = {p.name for p in tiny_run.out.iterdir()}
    expected = {
        "config.json", "coeffs.csv", "spin.csv", "evolution_diagnostics.csv", "chain_occ.csv", "bonds.csv",
        "ext_spectrum.csv", "corr.csv", "physical_spectrum.csv", "analysis_report.json", "manifest.json",
        "grid.npz", "checkpoints",
    }
    assert expected <= names
    assert "FAILED" not in names


def test_manifest_hashes_every_file(tiny_run):
    manifest = json.loads((tiny_run.out / "manifest.json").read_text())
    files = {str(p.relative_to(tiny_run.out)) for p in tiny_run.out.rglob("*") if p.is_file()}
    assert set(manifest["files"]) == files - {"manifest.json"}
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tiny_run.out / name).read_bytes()).hexdigest() == digest
    assert manifest["config_digest"] == load_config(overrides=tiny_overrides()).digest()
    assert manifest["max_bond_dim"] <= 8


def test_csv_shapes(tiny_run):
    spin = _read_columns(tiny_run.out / "spin.csv")
    np.testing.assert_allclose(spin["t"], np.arange(21) * 0.1, atol=1e-12)
    assert spin["sz"][0] == pytest.approx(1.0)
    coeffs = _read_columns(tiny_run.out / "coeffs.csv")
    assert len(coeffs["omega_k"]) == 6
    ext = _read_columns(tiny_run.out / "ext_spectrum.csv")
    assert len(ext["omega"]) == 2 * 40
    occ = _read_columns(tiny_run.out / "chain_occ.csv")
    np.testing.assert_allclose(np.unique(occ["t"]), [0.0, 0.5, 1.0, 1.5, 2.0], atol=1e-12)
    corr = _read_columns(tiny_run.out / "corr.csv")
    assert len(corr["t"]) == 2 * 20 * 20
    with np.load(tiny_run.out / "corr_t00002p0000.npz") as data:
        assert data["star_corr"].shape == (40, 40)


def test_run_is_deterministic(tiny_run, tmp_path):
    again = run_pipeline(load_config(overrides=tiny_overrides()), tmp_path)
    first = json.loads((tiny_run.out / "manifest.json").read_text())["files"]
    second = json.loads((again.out / "manifest.json").read_text())["files"]
    assert first == second


def test_stages_rerun_from_disk(tiny_run):
    cfg = load_config(overrides=tiny_overrides())
    before = (tiny_run.out / "physical_spectrum.csv").read_bytes()
    _, spectra, _ = stage_measure(cfg, tiny_run.out)
    phys = stage_backmap(cfg, tiny_run.out, spectra)
    assert (tiny_run.out / "physical_spectrum.csv").read_bytes() == before
    np.testing.assert_array_equal(phys[2.0].occupations, tiny_run.physical[2.0].occupations)


def test_snapshot_steps():
    assert snapshot_steps([1.0, 2.0], 0.1) == {10: 1.0, 20: 2.0}


def test_zero_coupling_gives_free_precession(tmp_path):
    cfg = load_config(overrides=tiny_overrides(**{"debug.zero_coupling": True, "system.initial_state": "plus"}))
    result = run_pipeline(cfg, tmp_path)
    spin = _read_columns(tmp_path / "spin.csv")
    eps = cfg.system.epsilon
    np.testing.assert_allclose(spin["sx"], np.cos(eps * spin["t"]), atol=1e-10)
    np.testing.assert_allclose(np.abs(spin["sy"]), np.abs(np.sin(eps * spin["t"])), atol=1e-10)
    for spec in result.spectra.values():
        assert np.max(np.abs(spec.occupations)) < 1e-12
        assert np.max(np.abs(spec.corr)) < 1e-12
    for ps in result.physical.values():
        assert np.max(np.abs(ps.excess)) < 1e-10


def test_failed_marker_names_stage(tmp_path):
    cfg = load_config(overrides=tiny_overrides())
    run_pipeline(cfg, tmp_path)
    (tmp_path / "corr_t00001p0000.npz").write_bytes(b"not a numpy archive")
    with pytest.raises(StageError) as info:
        _run_stage("backmap", tmp_path, stage_backmap, cfg, tmp_path)
    assert info.value.stage == "backmap"
    assert (tmp_path / "FAILED").read_text().startswith("stage: backmap")


def test_measure_rejects_foreign_snapshots(tmp_path):
    run_pipeline(load_config(overrides=tiny_overrides()), tmp_path)
    other = load_config(overrides=tiny_overrides(**{"spectral.kappa": 4.0}))
    with pytest.raises(ValueError, match="different configuration"):
        stage_measure(other, tmp_path)
