import json

import numpy as np
import pytest

from afgame.cli import main
from afgame.experiments import ConfigError, ExperimentConfig, run_validate


SMALL = {
    "sim": {"n_steps": 40, "n_paths": 300, "seed": 123},
    "detect_reps": 300,
}


def _write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_default_config_resolves_reference_settings():
    cfg = ExperimentConfig.from_dict(None)
    assert cfg.raw["game"]["horizon"] == 1.0
    assert cfg.raw["game"]["m_a"] == 1.0 and cfg.raw["game"]["m_b"] == 1.0
    assert cfg.raw["af"]["eps"] == 1e-4 and cfg.raw["af"]["alpha"] == 0.05
    assert cfg.raw["sim"]["n_paths"] == 50_000 and cfg.raw["sim"]["n_steps"] == 100
    assert cfg.raw["af"]["z0"] == [0.0, 0.0]
    assert cfg.params().sigmaA == 0.1


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"games": {}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"game": {"qq": 1.0}})


def test_cli_exit_code_2_on_bad_config(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"nonsense": 1})
    code = main(["solve-riccati", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2


def test_cli_exit_code_3_on_numerical_failure(tmp_path):
    cfg = _write_cfg(tmp_path, {**SMALL, "af": {"info_weight": 2.0}})
    code = main(["af-optimize", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 3


def test_cli_solve_riccati_and_baseline(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL)
    assert main(["solve-riccati", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    body = (tmp_path / "riccati.csv").read_text().splitlines()
    assert body[0].startswith("# config_sha256=")
    assert "seed=123" in body[0]
    assert len(body) == 2 + 41
    assert main(["baseline", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "baseline.csv").exists()


def test_cli_af_optimize_and_detect(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL)
    assert main(["af-optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "af_history.csv").exists()
    assert (tmp_path / "af_gains.csv").exists()
    assert main(["detect", "--config", str(cfg), "--out", str(tmp_path),
                 "--dump-batch"]) == 0
    assert (tmp_path / "detect.csv").exists()
    assert (tmp_path / "detect_batch.bin").read_bytes()[:4] == b"AFG1"


def test_cli_experiment_reproducible_bytes(tmp_path):
    cfg = _write_cfg(tmp_path, {**SMALL,
                                "sweeps": {"mu_b": [1.0, 1.5]}})
    assert main(["experiment", "fig2", "--config", str(cfg),
                 "--out", str(tmp_path / "a")]) == 0
    assert main(["experiment", "fig2", "--config", str(cfg),
                 "--out", str(tmp_path / "b")]) == 0
    for name in ("fig2_variance.csv", "fig2_detect.csv", "fig2_trajectories.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_paths_and_seed_overrides(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL)
    assert main(["experiment", "fig2", "--config", str(cfg), "--seed", "9",
                 "--paths", "200", "--out", str(tmp_path / "c")]) == 0
    head = (tmp_path / "c" / "fig2_variance.csv").read_text().splitlines()[0]
    assert "seed=9" in head


def test_validate_passes_at_reduced_scale():
    results = run_validate(n_paths=2_000)
    for res in results:
        assert res.passed, res.line()


def test_validate_fault_injection(monkeypatch):
    import afgame.riccati as riccati

    def wrong_source(qB, mB):
        mB = np.asarray(mB, dtype=float)
        out = np.empty(mB.shape + (2, 2))
        out[..., 0, 0] = 2.0 * qB * mB
        out[..., 0, 1] = -qB
        out[..., 1, 0] = -qB
        out[..., 1, 1] = 5.0  # corrupted entry
        return out

    monkeypatch.setattr(riccati, "_dqb_dmb", wrong_source)
    results = run_validate(n_paths=500)
    by_name = {r.name: r for r in results}
    assert not by_name["sensitivity_fd"].passed


def test_cli_validate_exit_code_1_on_failure(monkeypatch):
    import afgame.riccati as riccati

    def wrong_source(qB, mB):
        mB = np.asarray(mB, dtype=float)
        out = np.empty(mB.shape + (2, 2))
        out[..., 0, 0] = 2.0 * qB * mB
        out[..., 0, 1] = -qB
        out[..., 1, 0] = -qB
        out[..., 1, 1] = 3.0  # corrupted entry
        return out

    monkeypatch.setattr(riccati, "_dqb_dmb", wrong_source)
    assert main(["validate", "--paths", "300"]) == 1
