import json
import xml.etree.ElementTree as ET

import pytest

from vortexgas.cli import main, parse_value, read_config_file, resolve
from vortexgas.errors import ConfigInvalid, ManifestMissing
from vortexgas.reporting import report, svg_loglog


def test_parse_values():
    assert parse_value("8..64", [1]) == [8, 16, 32, 64]
    assert parse_value("0.5,1;2", [1.0]) == [0.5, 1.0, 2.0]
    assert parse_value("off", True) is False
    with pytest.raises(ConfigInvalid):
        parse_value("abc", 1)
    with pytest.raises(ConfigInvalid):
        parse_value("64..8", [1])


def test_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nsamples = 12\nproof-samples=5  # trailing\n")
    raw = read_config_file(p)
    assert resolve("inequalities", raw) == {"samples": 12, "proof_samples": 5}
    p.write_text("samples 12\n")
    with pytest.raises(ConfigInvalid):
        read_config_file(p)
    with pytest.raises(ConfigInvalid):
        read_config_file(tmp_path / "missing.cfg")


def test_unknown_key_exits_2(tmp_path, capsys):
    assert main(["kernels", "--bogus", "1", "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["kernels", "--grid-n"]) == 2


def test_kernels_run_and_report(tmp_path, capsys):
    out = tmp_path / "k"
    assert main(["kernels", "--out", str(out), "--grid-n", "64"]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["passed"] and m["config"]["kernels"]["grid_n"] == 64
    assert (out / "splitting.csv").read_bytes().startswith(b"m,grid_n,cutoff,max_abs_error\r\n")
    capsys.readouterr()
    assert main(["report", str(out / "manifest.json")]) == 0
    text = capsys.readouterr().out
    assert "splitting-identity" in text and "pass" in text.lower()


def test_report_mixed_and_missing(tmp_path):
    good = {"experiment": "a", "verdicts": [{"check": "jensen", "instances": 1, "violations": 0,
                                             "worst_margin": 0.1, "passed": True}]}
    bad = {"experiment": "b", "verdicts": [{"check": "rate", "instances": 4, "violations": 1,
                                            "worst_margin": -0.2, "passed": False}]}
    (tmp_path / "a.json").write_text(json.dumps(good))
    (tmp_path / "b.json").write_text(json.dumps(bad))
    text = report([tmp_path / "a.json", tmp_path / "b.json"])
    assert "jensen" in text and "rate" in text
    with pytest.raises(ManifestMissing):
        report([])
    with pytest.raises(ManifestMissing):
        report([tmp_path / "nope.json"])


def test_inequalities_deterministic(tmp_path):
    args = ["inequalities", "--samples", "40", "--proof-samples", "20", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("inequalities.csv", "proof_step.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_svg_is_valid_xml(tmp_path):
    p = svg_loglog(tmp_path / "p.svg", [(8, 1e-2, 1e-3), (16, 6e-3, 5e-4), (32, 4e-3, 4e-4)],
                   title="t <&>", ylabel="d", fit=(-0.6, -3.4))
    root = ET.parse(p).getroot()
    assert root.tag.endswith("svg")
