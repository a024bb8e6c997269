import filecmp
import json

import numpy as np
import pytest

from symplab import io
from symplab.acceptance import CONFIG_DIR
from symplab.cli import EXIT_FAILED, EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE, main
from symplab.config import TASKS, build_config, loads_config, parse_value
from symplab.errors import ConfigError

PERIODIC = CONFIG_DIR / "periodic_cat.toml"


def _write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config -----------------------------------------------------------------

def test_defaults_filled():
    cfg = loads_config('task = "grow"\nmap.family = "standard"\nmap.K = 1.2\ngrow.budget = 3.0\n')
    assert cfg.params["budget"] == 3.0
    assert set(cfg.params) == set(TASKS["grow"])


@pytest.mark.parametrize("text,where", [
    ("", "task"),
    ('task = "grow"\nmap.family = "standard"\ngrow.bogus = 1\n', "grow.bogus"),
    ('task = "grow"\nmap.family = "standard"\nmap.Q = 1\n', "map.Q"),
    ('task = "grow"\nmap.family = "nope"\n', "map.family"),
    ('task = "grow"\n', "map"),
    ('task = "fly"\nmap.family = "standard"\n', "task"),
    ('task = "grow"\nmap.family = "standard"\ngrow.budget = "far"\n', "grow.budget"),
    ('task = "grow"\nmap.family = "standard"\nextra = 1\n', "extra"),
    ('task = "grow"\nmap.family = "standard"\nseed = 1.5\n', "seed"),
    ('task = "ph-check"\nmap.family = "product"\nmap.fiber.family = "standard"\nmap.fiber.X = 2\n', "map.fiber.X"),
])
def test_config_errors_carry_key_path(text, where):
    with pytest.raises(ConfigError) as info:
        loads_config(text)
    assert info.value.key_path == where


def test_overrides_and_values():
    raw = {"task": "periodic-search", "map": {"family": "toral-automorphism"}}
    cfg = build_config(raw, overrides=["periodic-search.n=3", "map.matrix=[[3, 2], [1, 1]]"])
    assert cfg.params["n"] == 3 and cfg.map["matrix"] == [[3, 2], [1, 1]]
    assert raw == {"task": "periodic-search", "map": {"family": "toral-automorphism"}}
    assert parse_value("1e-3") == 1e-3 and parse_value("abc") == "abc"
    with pytest.raises(ConfigError):
        build_config(raw, overrides=["no-equals"])


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.stem)
def test_bundled_configs_parse(path):
    from symplab.config import load_config

    assert load_config(path).task in TASKS


# -- io -----------------------------------------------------------------------

def test_json_is_plain_and_sorted():
    obj = {"b": np.float64(0.1), "a": np.arange(3), "c": (np.int64(2), True), "d": float("nan"), "z": 1j}
    text = io.dumps(obj)
    assert text == '{"a":[0,1,2],"b":0.1,"c":[2,true],"d":"nan","z":[0.0,1.0]}'


def test_csv_round_trips_floats(tmp_path):
    x = 0.1 + 0.2
    p = io.write_csv(tmp_path / "a.csv", ["x"], [(x,)])
    assert float(p.read_text().splitlines()[1]) == x


def test_svg_wraps_and_splits():
    pts = np.array([[0.9, 0.5], [1.1, 0.5], [1.2, 0.6]])
    svg = io.svg_document([{"points": pts, "period": [1.0, 1.0]}])
    assert svg.count("<polyline") == 1
    assert "metadata" not in svg and "metadata" in io.svg_document([], timestamp=True)


def test_manifest_lists_hashes(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "b.txt").write_text("hi")
    (tmp_path / "a.txt").write_text("x")
    m = json.loads(io.write_manifest(tmp_path).read_text())
    assert [e["path"] for e in m["files"]] == ["a.txt", "sub/b.txt"]
    assert m["files"][1]["sha256"] == io.sha256(tmp_path / "sub" / "b.txt")


# -- cli ----------------------------------------------------------------------

def test_run_periodic(tmp_path, capsys):
    assert main(["run", str(PERIODIC), "--output", str(tmp_path)]) == EXIT_OK
    recs = io.read_jsonl(tmp_path / "periodic_cat" / "orbits.jsonl")
    assert sum(len(r["points"]) for r in recs) == 5
    assert (tmp_path / "periodic_cat" / io.MANIFEST).exists()


def test_run_override(tmp_path):
    assert main(["run", str(PERIODIC), "--output", str(tmp_path), "--override", "periodic-search.n=3"]) == EXIT_OK
    recs = io.read_jsonl(tmp_path / "periodic_cat" / "orbits.jsonl")
    assert sum(len(r["points"]) for r in recs) == 16


def test_run_homoclinic(tmp_path):
    assert main(["run", str(CONFIG_DIR / "homoclinic_standard.toml"), "--output", str(tmp_path)]) == EXIT_OK
    out = tmp_path / "homoclinic_standard"
    assert len(io.read_jsonl(out / "crossings.jsonl")) >= 1
    assert (out / "branches.svg").read_text().startswith("<?xml")


def test_run_twice_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["run", str(CONFIG_DIR / "gates_cat.toml"), "--output", str(tmp_path / name)]) == EXIT_OK
    a, b = tmp_path / "a" / "gates_cat", tmp_path / "b" / "gates_cat"
    assert filecmp.cmp(a / io.MANIFEST, b / io.MANIFEST, shallow=False)


def test_output_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SYMPLAB_OUTPUT", str(tmp_path / "env"))
    assert main(["run", str(PERIODIC)]) == EXIT_OK
    assert (tmp_path / "env" / "periodic_cat" / "orbits.jsonl").exists()


def test_usage_and_config_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == EXIT_USAGE
    assert main(["run", str(_write(tmp_path, ""))]) == EXIT_USAGE
    assert "at task" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_USAGE
    assert main(["--threads", "0", "families"]) == EXIT_USAGE
    assert main(["verify", "--only", "nothing"]) == EXIT_USAGE
    assert main(["verify", "--override", "tol_bogus=1"]) == EXIT_USAGE


def test_precondition_exit(tmp_path):
    cfg = _write(tmp_path, 'task = "gates"\nmap.family = "twist"\n')
    assert main(["run", str(cfg), "--output", str(tmp_path)]) == EXIT_PRECONDITION
    cfg = _write(tmp_path, 'task = "ph-check"\nmap.family = "standard"\n', "ph.toml")
    assert main(["run", str(cfg), "--output", str(tmp_path)]) == EXIT_PRECONDITION


def test_families(capsys):
    assert main(["families"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("standard", "toral-automorphism", "twist", "product", "skew-standard"):
        assert name in out


def test_verify_only_filters(tmp_path, capsys):
    assert main(["verify", "--only", "normal-form", "--output", str(tmp_path)]) == EXIT_OK
    recs = io.read_jsonl(tmp_path / "verify" / "results.jsonl")
    assert [r["criterion"] for r in recs] == [1, 2]
    assert "2/2 criteria passed" in capsys.readouterr().out


def test_verify_tampered_tolerance_fails(tmp_path, capsys):
    code = main(["verify", "--only", "periodic", "--override", "tol_hyp=10", "--output", str(tmp_path)])
    assert code == EXIT_FAILED
    assert "[FAIL]" in capsys.readouterr().out


def test_verify_threads_keep_order(tmp_path):
    assert main(["--threads", "2", "verify", "--only", "normal-form", "--only", "map-core",
                 "--output", str(tmp_path)]) == EXIT_OK
    assert [r["criterion"] for r in io.read_jsonl(tmp_path / "verify" / "results.jsonl")] == [1, 2, 9]
