import json
import xml.etree.ElementTree as ET
from hashlib import sha256

import numpy as np
import pytest
import yaml

from dasa import cli, config
from dasa.exceptions import ComparisonError, ConfigurationError
from dasa.output import parse_csv


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def dasa2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("dasa2")
    assert cli.main(["run", "--preset", "dasa2-ref", "--out", str(out)]) == 0
    return out


def test_presets_list_and_show(capsys):
    code, out, _ = run(["presets", "list"], capsys)
    assert code == 0
    assert {line.split("\t")[0] for line in out.splitlines()} == set(config.PRESETS)
    code, out, _ = run(["presets", "show", "dasa3-ref"], capsys)
    assert code == 0 and json.loads(out)["protocol"]["middle_onsite"] == 15.0
    assert run(["presets", "show", "nope"], capsys)[0] == 1


def test_dasa2_trajectory_csv(dasa2_run):
    header, data = parse_csv((dasa2_run / "dasa2_trajectory.csv").read_text())
    assert header == ["t", "re_0", "im_0", "re_1", "im_1", "pop_0", "pop_1", "norm"]
    assert data[0, 0] == -15.0 and data[-1, 0] == -11.358
    np.testing.assert_array_equal(data[0, 1:5], [0, 0, 1, 0])
    assert data[-1, 5] == pytest.approx(0.99895283, abs=1e-6)
    np.testing.assert_allclose(data[:, 5] + data[:, 6], data[:, 7], rtol=0, atol=1e-12)
    amps = data[:, 1:5:2] ** 2 + data[:, 2:5:2] ** 2
    np.testing.assert_allclose(amps, data[:, 5:7], atol=1e-12)


def test_run_record_digests(dasa2_run):
    record = json.loads((dasa2_run / "dasa2_run.json").read_text())
    names = {f["path"] for f in record["files"]}
    assert names == {"dasa2_trajectory.csv", "dasa2_populations.svg", "dasa2_config.json"}
    for f in record["files"]:
        assert sha256((dasa2_run / f["path"]).read_bytes()).hexdigest() == f["sha256"]
    assert record["report"]["active_duration"] == pytest.approx(3.642)
    assert record["artifact_version"]


def test_config_snapshot_reproduces_run(dasa2_run, tmp_path, capsys):
    snap = dasa2_run / "dasa2_config.json"
    doc = json.loads(snap.read_text())
    doc["output"]["dir"] = str(tmp_path)
    cfg = tmp_path / "again.json"
    cfg.write_text(json.dumps(doc))
    assert run(["run", "--config", str(cfg)], capsys)[0] == 0
    for name in ("dasa2_trajectory.csv", "dasa2_populations.svg"):
        assert (tmp_path / name).read_bytes() == (dasa2_run / name).read_bytes()


def test_svg_is_valid_xml(dasa2_run):
    root = ET.parse(dasa2_run / "dasa2_populations.svg").getroot()
    assert root.tag.endswith("svg")


def test_unknown_key_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"schema_version": 1, "mode": "dasa2", "protocol": {"segments": [], "colour": 1}}))
    code, _, err = run(["run", "--config", str(cfg)], capsys)
    assert code == 1 and "invalid configuration" in err


def test_bad_inputs_raise_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        config.load(tmp_path / "missing.yaml")
    (tmp_path / "x.yaml").write_text("mode: [")
    with pytest.raises(ConfigurationError):
        config.load(tmp_path / "x.yaml")
    with pytest.raises(ConfigurationError):
        config.resolve({"schema_version": 1, "mode": "lz"})
    with pytest.raises(ConfigurationError):
        config.resolve({"schema_version": 1, "mode": "lz", "lz": {"epsilons": [1]}, "roots": {}})


def test_degenerate_sites_exit_2(tmp_path, capsys):
    seg = {"omega1": 0.0, "omega2": 0.0, "gamma2": -0.5, "gamma1": "decay", "t_end": -14.0}
    doc = {"schema_version": 1, "mode": "dasa2", "protocol": {"segments": [seg]}, "output": {"dir": str(tmp_path)}}
    cfg = tmp_path / "degenerate.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    code, _, err = run(["run", "--config", str(cfg)], capsys)
    assert code == 2 and "UnsupportedRegimeError" in err


def test_roots_csv(tmp_path, capsys):
    doc = {
        "schema_version": 1,
        "mode": "roots",
        "name": "r",
        "roots": {"delta_omegas": [10.0], "gamma2_start": -0.95, "gamma2_stop": -0.95, "gamma2_num": 1},
        "output": {"dir": str(tmp_path), "svg": False},
    }
    cfg = tmp_path / "roots.json"
    cfg.write_text(json.dumps(doc))
    assert run(["run", "--config", str(cfg)], capsys)[0] == 0
    header, data = parse_csv((tmp_path / "r_roots.csv").read_text())
    assert header[:4] == ["delta_omega", "gamma2", "branch", "gamma1_re"]
    assert data.shape == (3, 8)
    real = data[data[:, 5] == 1]
    assert len(real) == 1
    assert real[0, 3] == pytest.approx(0.0092344792398029228, rel=1e-12)


def test_roots_zero_detuning_rejected():
    doc = {"schema_version": 1, "mode": "roots", "roots": {"delta_omegas": [0.0]}}
    with pytest.raises(ConfigurationError):
        cli.execute(config.resolve(doc))


def test_lz_report():
    res = cli.execute(config.preset("lz-6unit"))
    (entry,) = res.report["sweeps"]
    assert entry["abs_difference"] < 0.02
    assert res.summary["active_duration"] == 6.0


def test_compare_dasa2_with_lz(capsys):
    code, out, _ = run(["compare", "dasa2-ref", "lz-6unit", "--json"], capsys)
    assert code == 0
    cols = json.loads(out)
    assert cols["a"]["active_duration"] < cols["b"]["active_duration"] == 6.0
    assert cols["b"]["max_abs_gamma"] == 0.0
    code, out, _ = run(["compare", "dasa2-ref", "lz-6unit"], capsys)
    assert "active_duration" in out


def test_compare_identical_configs():
    a = config.preset("dasa2-ref")
    cols = cli.compare(a, a)
    assert {k: v for k, v in cols["a"].items()} == cols["b"]


def test_compare_two_and_three_level():
    cols = cli.compare(config.preset("dasa2-ref"), config.preset("dasa3-ref"))
    assert (cols["a"]["dim"], cols["b"]["dim"]) == (2, 3)
    assert cols["a"]["max_abs_gamma"] == cols["b"]["max_abs_gamma"]
    assert cols["b"]["active_duration"] == pytest.approx(4.2626)


def test_compare_rejects_roots(capsys):
    with pytest.raises(ComparisonError):
        cli.compare(config.preset("dasa2-ref"), config.preset("roots-grid"))
    assert run(["compare", "dasa2-ref", "roots-grid"], capsys)[0] == 1


def test_parallel_sweep_matches_serial(tmp_path, capsys):
    base = config.preset("dasa2-ref")
    paths = []
    for i, dt in enumerate((1e-3, 2e-3)):
        doc = json.loads(json.dumps(base))
        doc["name"], doc["propagation"]["dt"] = f"s{i}", dt
        doc["output"] = {"dir": str(tmp_path / "par"), "csv": True, "svg": False}
        p = tmp_path / f"s{i}.json"
        p.write_text(json.dumps(doc))
        paths += ["--config", str(p)]
    assert run(["run", *paths, "--jobs", "2"], capsys)[0] == 0
    assert run(["run", *paths, "--out", str(tmp_path / "ser")], capsys)[0] == 0
    for i in range(2):
        name = f"s{i}_trajectory.csv"
        assert (tmp_path / "par" / name).read_bytes() == (tmp_path / "ser" / name).read_bytes()


def test_optimize_scenario_overrides(tmp_path):
    cfg = config.preset("optimize-ref")
    cfg["optimize"]["budget"] = 20
    cfg["output"]["dir"] = str(tmp_path)
    res = cli.run_scenario(cfg)
    assert res.report["evaluations"] == 20
    assert res.report["best_cost"] <= 3.9999715553263107
    header, rows = parse_csv((tmp_path / "optimize_history.csv").read_text())
    assert rows.shape == (20, len(header))


def test_run_needs_a_scenario(capsys):
    assert run(["run"], capsys)[0] == 1
