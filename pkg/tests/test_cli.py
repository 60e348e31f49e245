import json

import pytest

from pelab.cli import main
from pelab.config import SCHEMA, parse_config_text, schema_help
from pelab.errors import ConfigurationError
from pelab.numerics import Rng
from pelab.worlds import make_bernoulli_uv_world, sample_batch


def run_cli(*argv):
    return main(list(argv))


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_config_defaults_and_overrides():
    cfg = parse_config_text("seed = 5\nworld.kind = bernoulli_uv\n")
    assert cfg["seed"] == 5
    assert cfg["world.kind"] == "bernoulli_uv"
    assert cfg["train.batch_size"] == SCHEMA["train.batch_size"][1]


def test_config_rejects_unknown_key_with_line_number():
    with pytest.raises(ConfigurationError, match=r":3: unknown key"):
        parse_config_text("# comment\nseed = 1\nnope.nope = 2\n")


def test_config_rejects_bad_value_with_line_number():
    with pytest.raises(ConfigurationError, match=r":1: bad int"):
        parse_config_text("seed = banana\n")


def test_config_hash_stable_under_formatting():
    a = parse_config_text("seed = 5\nworld.kind = rotation\n")
    b = parse_config_text("world.kind = rotation   # same\n\nseed = 5\n")
    assert a.config_hash() == b.config_hash()
    c = parse_config_text("seed = 6\nworld.kind = rotation\n")
    assert a.config_hash() != c.config_hash()


def test_schema_help_covers_every_key():
    text = schema_help()
    for key in SCHEMA:
        assert key in text


def test_bundled_configs_parse():
    for name in ("bernoulli_counterexample", "rotation_pel",
                 "orthogonality_rotation", "over_invariance_bernoulli",
                 "merged_orbits"):
        from pelab.cli import _resolve_config
        cfg = _resolve_config(name)
        assert cfg.config_hash()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def test_list_worlds_and_schema_exit_zero(capsys):
    assert run_cli("list-worlds") == 0
    out = capsys.readouterr().out
    assert "rotation" in out and "bernoulli_uv" in out and "six_nine" in out
    assert run_cli("print-config-schema") == 0
    assert "world.kind" in capsys.readouterr().out


def test_run_bernoulli_counterexample(tmp_path):
    out = tmp_path / "run"
    assert run_cli("run", "--config", "bernoulli_counterexample",
                   "--out", str(out), "--quiet") == 0
    doc = json.loads((out / "report.json").read_text())
    zo = doc["theory"]["risk_table"]["zero_one"]
    assert (zo["full"], zo["good"], zo["bad"]) == (0.0, 0.0, 0.5)
    assert doc["theory"]["risk_table_exact"]["passed"]
    assert (out / "config_echo.cfg").exists()


def test_run_determinism_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", "--config", "bernoulli_counterexample",
                   "--out", str(out1), "--quiet") == 0
    assert run_cli("run", "--config", "bernoulli_counterexample",
                   "--out", str(out2), "--quiet") == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_run_seed_override_changes_hash(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run_cli("run", "--config", "bernoulli_counterexample",
            "--out", str(out1), "--quiet")
    run_cli("run", "--config", "bernoulli_counterexample", "--seed", "99",
            "--out", str(out2), "--quiet")
    d1 = json.loads((out1 / "report.json").read_text())
    d2 = json.loads((out2 / "report.json").read_text())
    assert d1["seed"] == 3 and d2["seed"] == 99
    assert d1["config_hash"] != d2["config_hash"]


def test_run_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nnot.a.key = 2\n")
    assert run_cli("run", "--config", str(cfg), "--out", str(tmp_path)) == 2
    assert ":2: unknown key" in capsys.readouterr().err


def test_run_missing_config_exits_2(tmp_path):
    assert run_cli("run", "--config", "no_such_config",
                   "--out", str(tmp_path)) == 2


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------

def _write_embeddings(path, include_t=True, shuffle_v=False):
    world = make_bernoulli_uv_world()
    batch = sample_batch(world, 2000, Rng(5))
    v = batch.x[:, 1].copy()
    if shuffle_v:
        v = Rng(6).permutation(v)
    noise = Rng(7).normal(size=2000)
    header = ["z_0", "z_1", "x_0", "x_1", "v"] + (["t"] if include_t else []) + ["y"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(2000):
            row = [batch.x[i, 1], noise[i], batch.x[i, 0], batch.x[i, 1], v[i]]
            if include_t:
                row.append(batch.t[i])
            row.append(float(batch.y[i]))
            fh.write(",".join(repr(float(c)) for c in row) + "\n")


def test_certify_code_containing_nuisance(tmp_path):
    csv = tmp_path / "emb.csv"
    _write_embeddings(csv)
    out = tmp_path / "cert"
    assert run_cli("certify", str(csv), "--out", str(out), "--quiet") == 0
    m = json.loads((out / "report.json").read_text())["metrics"]
    assert m["normalized_mi"]["value"] >= 0.95
    assert m["leakage_probe_auc"]["value"] >= 0.99
    assert m["sufficiency_cmi_bits"]["status"] == "ok"


def test_certify_shuffled_nuisance(tmp_path):
    csv = tmp_path / "emb.csv"
    _write_embeddings(csv, shuffle_v=True)
    out = tmp_path / "cert"
    assert run_cli("certify", str(csv), "--out", str(out), "--quiet") == 0
    m = json.loads((out / "report.json").read_text())["metrics"]
    assert m["normalized_mi"]["value"] <= 0.05


def test_certify_missing_t_marks_not_applicable(tmp_path):
    csv = tmp_path / "emb.csv"
    _write_embeddings(csv, include_t=False)
    out = tmp_path / "cert"
    assert run_cli("certify", str(csv), "--out", str(out), "--quiet") == 0
    m = json.loads((out / "report.json").read_text())["metrics"]
    assert m["sufficiency_cmi_bits"]["status"] == "not_applicable"
    assert m["mmd2"]["status"] == "not_applicable"


def test_certify_malformed_csv_exits_2(tmp_path, capsys):
    csv = tmp_path / "bad.csv"
    csv.write_text("z_0,v\n1.0,0.0\n2.0\n")
    assert run_cli("certify", str(csv), "--out", str(tmp_path)) == 2
    assert "row 3" in capsys.readouterr().err


def test_certify_requires_code_columns(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("a,b\n1.0,2.0\n")
    assert run_cli("certify", str(csv), "--out", str(tmp_path)) == 2


# ---------------------------------------------------------------------------
# verify-theory
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("scenario", ["over_invariance_bernoulli",
                                      "merged_orbits"])
def test_verify_theory_violations_exit_zero(tmp_path, scenario):
    out = tmp_path / scenario
    assert run_cli("verify-theory", "--config", scenario,
                   "--out", str(out), "--quiet") == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["theory"][scenario]["expected"] == "fail"
    assert doc["theory"][scenario]["observed"] == "fail"
    assert doc["theory"][scenario]["matches_expectation"]


def test_verify_theory_requires_scenario(tmp_path):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("seed = 1\n")
    assert run_cli("verify-theory", "--config", str(cfg),
                   "--out", str(tmp_path)) == 2
