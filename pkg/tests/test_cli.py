import csv
import io
import json
import math

import jsonschema
import pytest

from infent.cli import COMMANDS, ConfigError, load_schema, main, resolve

FAST_ARGS = {
    "schmidt": ["--state", "nopa", "--trunc", "16"],
    "entropy-divergence": [],
    "nogo-bound": ["--samples", "200"],
    "bell-seesaw": ["--restarts", "2"],
    "chain-expect": [],
    "modular": ["--samples", "5"],
    "doubles": ["--samples", "3"],
    "weyl-projector": [],
    "nopa-extract": [],
    "nopa-perm": ["--perm", "shift"],
    "epr-covariance": ["--r", "0,1", "--trunc", "128"],
    "char-fn": [],
    "grid-extract": ["--r", "1", "--L", "128"],
}


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_every_command_covered():
    assert set(FAST_ARGS) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(FAST_ARGS))
def test_json_output_validates(command, capsys):
    code, out, err = run_cli(capsys, command, "--format", "json", *FAST_ARGS[command])
    assert code == 0, err
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema())
    assert doc["data"] and doc["columns"] == list(doc["data"][0])
    assert doc["metadata"]["command"] == command


def test_entropy_divergence_example(capsys):
    code, out, _ = run_cli(capsys, "entropy-divergence", "--n", "100,1000,10000")
    assert code == 0
    values = [float(r["entropy_bits"]) for r in rows(out)]
    assert out.splitlines()[0].startswith("kind,N,entropy_bits")
    assert values[0] < values[1] < values[2]


def test_nogo_example(capsys):
    code, out, _ = run_cli(capsys, "nogo-bound", "--d", "2,3,4", "--samples", "1000", "--seed", "7")
    assert code == 0
    for r in rows(out):
        assert float(r["max_fidelity"]) <= 1 / int(r["d"]) + 1e-9


def test_bell_example(capsys):
    code, out, _ = run_cli(capsys, "bell-seesaw", "--state", "singlet", "--restarts", "8", "--seed", "1")
    assert code == 0
    assert abs(float(rows(out)[0]["beta"]) - 1.414214) <= 1e-6


def test_csv_sidecar(tmp_path, capsys):
    out = tmp_path / "res.csv"
    code, _, _ = run_cli(capsys, "weyl-projector", "--out", str(out), "--threads", "2")
    assert code == 0
    meta = json.loads((tmp_path / "res.csv.meta.json").read_text())
    assert meta["threads"] == 2 and meta["version"]
    assert set(meta["tolerances"]) >= {"structural", "spectral"}
    assert rows(out.read_text())[0]["d"] == "2"


@pytest.mark.parametrize("command", ["nogo-bound", "modular", "grid-extract", "nopa-perm"])
def test_deterministic_across_runs_and_threads(command, capsys):
    outs = []
    for threads in ("1", "1", "3"):
        code, out, _ = run_cli(capsys, command, "--seed", "11", "--threads", threads, *FAST_ARGS[command])
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1] == outs[2]


def test_json_data_section_is_stable(capsys):
    docs = []
    for _ in range(2):
        _, out, _ = run_cli(capsys, "doubles", "--format", "json", "--samples", "2", "--seed", "3")
        docs.append(json.loads(out))
    assert json.dumps(docs[0]["data"]) == json.dumps(docs[1]["data"])


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 7\n[nogo-bound]\nd = [2, 3]\nsamples = 50\n')
    code, out, _ = run_cli(capsys, "nogo-bound", "--config", str(cfg), "--samples", "20", "--format", "json")
    assert code == 0
    meta = json.loads(out)["metadata"]
    assert meta["seed"] == 7
    assert meta["params"] == {"d": [2, 3], "samples": 20, "refine": True}


def test_thread_env(monkeypatch, capsys):
    monkeypatch.setenv("INFENT_THREADS", "3")
    _, out, _ = run_cli(capsys, "weyl-projector", "--format", "json")
    assert json.loads(out)["metadata"]["threads"] == 3
    monkeypatch.setenv("INFENT_THREADS", "zero")
    code, _, err = run_cli(capsys, "weyl-projector")
    assert code == 2 and "INFENT_THREADS" in err


@pytest.mark.parametrize(
    "argv, code",
    [
        (["nopa-extract", "--lam", "0.5", "--r", "1"], 2),
        (["nopa-extract", "--lam", "1.5"], 2),
        (["nogo-bound", "--d", "two"], 2),
        (["grid-extract", "--L", "100"], 1),
        (["nopa-extract", "--lam", "0.5", "--trunc", "9"], 1),
        (["no-such-command"], 2),
    ],
)
def test_errors_are_machine_readable(argv, code, capsys):
    got, out, err = run_cli(capsys, *argv)
    assert got == code
    report = json.loads(err.strip().splitlines()[-1])
    jsonschema.validate(report, load_schema("error.schema.json"))


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("samples = 3\nbogus = 1\n")
    code, _, err = run_cli(capsys, "modular", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_resolve_lam_or_r():
    cfg = resolve("epr-covariance", {"lam": "0.5"}, {})
    assert cfg.params["lam"] == [0.5] and cfg.params["r"] is None
    cfg = resolve("epr-covariance", {}, {"r": [1, 2]})
    assert cfg.params["r"] == [1.0, 2.0]
    with pytest.raises(ConfigError):
        resolve("epr-covariance", {"lam": "0.5"}, {"r": 1})


def test_grid_rows(capsys):
    code, out, _ = run_cli(capsys, "grid-extract", "--r", "0,2", "--d", "2")
    r = rows(out)
    assert code == 0 and len(r) == 2
    assert r[0]["u_period_exact"] == "true" and r[0]["v_period_exact"] == "true"
    assert float(r[0]["X"]) == pytest.approx(16 * math.pi)
    assert float(r[1]["commutation_1"]) <= 1e-3
