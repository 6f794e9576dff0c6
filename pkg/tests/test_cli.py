import csv
import json
import subprocess
import sys

import pytest

from afcpost.cli import ConfigError, build_config, load_config, main, mesh_info, plot_script


def write_config(path, **kw):
    path.write_text(json.dumps(kw))
    return str(path)


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "run"
    cfg = write_config(tmp_path / "c.json", problem="boundary_layer", max_dofs=300, output_dir=str(out))
    assert main(["run", cfg, "--limiter", "bjk"]) == 0
    rows = list(csv.DictReader((out / "run.csv").open()))
    assert [r["dofs"] for r in rows] == ["25", "81", "289"]
    saved = json.loads((out / "config.json").read_text())
    assert saved["limiter"] == "bjk" and saved["max_dofs"] == 300
    assert capsys.readouterr().out.strip().endswith("run.csv")


@pytest.mark.parametrize("bad", [{"limiter": "minmod"}, {"theta": 1.5}, {"colour": "red"}, {"max_dofs": "lots"},
                                 {"epsilon": -1}, {"gamma": "wide"}, {"timing": "perhaps"}])
def test_malformed_config_exits_2(tmp_path, bad):
    out = tmp_path / "run"
    cfg = write_config(tmp_path / "c.json", output_dir=str(out), **bad)
    assert main(["run", cfg]) == 2
    assert not (out / "run.csv").exists()


def test_unreadable_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(p))
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_overrides_are_coerced():
    cfg = build_config({"problem": "hmm86"}, {"max_dofs": "500", "theta": "0.3", "dump": "true", "gamma": "2"})
    assert cfg.max_dofs == 500 and cfg.theta == 0.3 and cfg.dump is True and cfg.gamma == 2.0
    assert cfg.eps == 1e-4
    assert build_config({}, {"epsilon": "0.01"}).eps == 0.01
    with pytest.raises(ConfigError):
        build_config({}, {"max_dofs": "2.5"})


def test_sweep(tmp_path, capsys):
    cfgs = [write_config(tmp_path / f"{k}.json", limiter=k, max_dofs=100, output_dir=str(tmp_path / k))
            for k in ("kuzmin", "bjk")]
    assert main(["sweep", *cfgs, "--workers", "2"]) == 0
    for k in ("kuzmin", "bjk"):
        assert (tmp_path / k / "run.csv").exists()
    assert capsys.readouterr().out.count("run.csv") == 2


def test_mesh_info(capsys):
    info = mesh_info(2)
    assert info["vertices"] == 25 and info["delaunay"]
    assert info["min_angle_deg"] == pytest.approx(45.0)
    assert info["C_edge_max_scaled"] == pytest.approx(164.02, abs=0.01)
    assert main(["mesh-info", "--level", "3"]) == 0
    assert "vertices: 81" in capsys.readouterr().out


def test_check_command(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 7 and all(line.startswith("PASS") for line in out)


def test_plot_script(tmp_path, capsys):
    script = plot_script([str(tmp_path / "a" / "run.csv")], "effectivity")
    assert "using 'dofs':'effectivity'" in script and "title 'a'" in script
    assert main(["plot-script", "x/run.csv"]) == 0
    assert "'error_energy'" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "afcpost", "mesh-info", "--level", "2"], capture_output=True,
                         text=True, check=True)
    assert "cells: 32" in res.stdout
