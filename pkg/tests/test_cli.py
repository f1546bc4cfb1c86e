import json

import pytest

from rwg.cli import SCHEMA, load_config, main


def _config(tmp_path, **over):
    cfg = {"schema": SCHEMA, "geometry": {"epsilon": 0.35}, "numerics": {"h_max": 0.1}}
    cfg.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["constants", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_flag_prints_usage(capsys):
    assert main(["sweep", "--nope"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_schema(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema": "other"}))
    assert main(["mesh", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_invalid_geometry_exit_2(tmp_path):
    assert main(["mesh", "--config", _config(tmp_path, geometry={"epsilon": 0.9}), "--out", str(tmp_path)]) == 2


def test_bad_height_exit_2(tmp_path):
    assert main(["peak", "--h-list", "0.5,1.2", "--out", str(tmp_path)]) == 2


def test_config_round_trip(tmp_path):
    cfg = load_config(_config(tmp_path, heights=[0.3, 0.6]))
    assert cfg.geometry.epsilon == 0.35 and cfg.numerics.h_max == 0.1 and cfg.heights == [0.3, 0.6]
    p = tmp_path / "again.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(str(p)).to_dict() == cfg.to_dict()


def test_sweep_writes_csv_and_figure(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--config", _config(tmp_path), "--k2", "12:30:3", "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 4
    assert (out / "sweep.png").stat().st_size > 0


def test_sweep_threshold_exit_2(tmp_path):
    assert main(["sweep", "--config", _config(tmp_path), "--k2", "20,45", "--out", str(tmp_path)]) == 2


def test_scatter_outputs(tmp_path):
    assert main(["scatter", "--config", _config(tmp_path), "--k2", "14", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "scatter.json").read_text())
    assert d["R"] + d["T"] == pytest.approx(1.0, abs=1e-5)
    assert (tmp_path / "solution.csv").read_text().startswith("node_index,x,y,re,im\n")


def test_eigen_and_mesh(tmp_path):
    cfg = _config(tmp_path, constants={"h_max": 0.1})
    assert main(["eigen", "--config", cfg, "--n", "2", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "eigen.csv").read_text().splitlines()
    assert len(rows) == 3 and 14.0 < float(rows[1].split(",")[1]) < 14.3
    assert main(["mesh", "--config", cfg, "--out", str(tmp_path)]) == 0
    for name in ("waveguide", "resonator", "halfstrip", "omega"):
        assert (tmp_path / f"{name}.mesh").read_text().startswith("mesh2d v1")


def test_constants_deterministic(tmp_path):
    cfg = _config(tmp_path, constants={"h_max": 0.05, "omega_h_max": 0.2}, R_list=[4, 6])
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["constants", "--config", cfg, "--out", str(a)]) == 0
    assert main(["constants", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "constants.json").read_bytes() == (b / "constants.json").read_bytes()


def test_numerical_failure_exit_3(tmp_path):
    # a corner window far from the vertex is contaminated by higher-order terms
    cfg = _config(tmp_path, constants={"h_max": 0.05, "window": [0.9, 0.95]})
    assert main(["constants", "--config", cfg, "--out", str(tmp_path)]) == 3
