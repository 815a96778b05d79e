import csv
import io
import json
import math

import pytest

from msa_forge.cli import COMMANDS, main
from msa_forge.config import load_config, parse_config
from msa_forge.errors import ConfigError
from msa_forge.fixtures import config_names, config_path
from msa_forge.report import dumps

INDUCT_CSV_COLUMNS = ["L", "E", "m", "trials", "singular", "resonant", "p_hat", "ci_lo",
                      "ci_hi", "bound", "pass"]


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def test_every_bundled_config_parses():
    names = config_names()
    assert len(names) == 8
    for name in names:
        load_config(config_path(name)).validate()


def test_classify_single_site(cli):
    code, out, _ = cli.bundled("classify", "classify_single_site")
    assert code == 0
    body = json.loads(out)
    assert body["schema"] == 1 and body["command"] == "classify"
    assert body["classification"]["ns"] is False
    assert body["classification"]["boundary_max"] == 1.0


def test_mc_strong_disorder(cli):
    code, out, _ = cli.bundled("mc", "mc_strong_disorder", "--threads", "1")
    assert code == 0
    rep = json.loads(out)["report"]
    assert rep["L"] == 8 and rep["trials"] == 500
    assert rep["singular_count"] == 45 and rep["p_hat"] == 0.09


def test_wegner_single_site(cli):
    code, out, _ = cli.bundled("wegner", "wegner_single_site", "--threads", "1")
    assert code == 0
    body = json.loads(out)
    rep = body["report"]
    assert rep["exact"] == pytest.approx(0.2)
    assert rep["ci_lo"] <= 0.2 <= rep["ci_hi"]


def test_induct_json(cli):
    code, out, _ = cli.bundled("induct", "induct_strong_disorder", "--threads", "1")
    assert code == 0
    body = json.loads(out)
    assert [r["L"] for r in body["reports"]] == [8, 22]
    assert body["steps"][0]["status"] == "premise-unmet"


def test_induct_csv_has_two_scale_rows(cli):
    code, out, _ = cli.bundled("induct", "induct_strong_disorder", "--threads", "1",
                               "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2
    assert list(rows[0]) == INDUCT_CSV_COLUMNS
    assert [int(r["L"]) for r in rows] == [8, 22]
    assert rows[0]["pass"] in ("true", "false")


def test_mp_events(cli):
    code, out, _ = cli.bundled("mp-events", "mp_events")
    assert code == 0
    body = json.loads(out)
    assert sum(body["counts"].values()) == 40
    assert body["dichotomy_violations"] == 0
    assert len(body["trials"]) == 40


def test_mp_spectrum(cli):
    code, out, _ = cli.bundled("mp-spectrum", "mp_spectrum")
    assert code == 0
    check = json.loads(out)["check"]
    assert check["max_deviation"] <= 1e-9
    assert check["lemma_consistent"] is True


def test_verify_gri(cli):
    code, out, _ = cli.bundled("verify-gri", "verify_gri")
    assert code == 0
    assert json.loads(out)["result"]["pass"] is True


def test_verify_descent(cli):
    code, out, _ = cli.bundled("verify-descent", "verify_descent")
    assert code == 0
    assert json.loads(out)["result"]["violations"] == 0


def test_every_command_has_a_bundled_config():
    used = {"classify", "mc", "wegner", "induct", "mp-events", "mp-spectrum", "verify-gri",
            "verify-descent"}
    assert used == set(COMMANDS)


def test_unknown_field_exits_2(cli, tmp_path):
    path = _write(tmp_path, {"E": 0.0, "foo": 1})
    code, _, err = cli("mc", "--config", path, cached=False)
    assert code == 2
    assert "foo" in err


def test_nested_unknown_field(tmp_path):
    with pytest.raises(ConfigError, match="bar"):
        parse_config({"model": {"d": 1, "bar": 2}})


def test_bad_values_exit_2(cli, tmp_path):
    for bad in ({"trials": -1}, {"model": {"d": 0}}, {"m": "x"}):
        code, _, _ = cli("mc", "--config", _write(tmp_path, bad), cached=False)
        assert code == 2, bad
    assert cli("mc", "--threads", "0", cached=False)[0] == 2


def test_missing_config_file_exits_2(cli, tmp_path):
    assert cli("mc", "--config", tmp_path / "nope.json", cached=False)[0] == 2


def test_capacity_error_exits_3(cli, tmp_path):
    path = _write(tmp_path, {"model": {"d": 2}, "box": {"L": 40}, "trials": 1, "max_sites": 1000})
    code, _, err = cli("mc", "--config", path, cached=False)
    assert code == 3
    assert "capacity" in err


def test_verify_failure_exits_4(cli, tmp_path):
    path = _write(tmp_path, {"gri": {"instances": 5, "seed": 0, "tolerance": 0.0}})
    code, out, _ = cli("verify-gri", "--config", path, cached=False)
    assert code == 4
    assert json.loads(out)["result"]["pass"] is False


def test_flags_override_config(cli, tmp_path):
    out_file = tmp_path / "r.json"
    code, out, _ = cli.bundled("wegner", "wegner_single_site", "--seed", "9", "--threads", "1",
                               "--out", out_file)
    assert code == 0 and out == ""
    body = json.loads(out_file.read_text())
    assert body["base_seed"] == 9


def test_env_threads_fallback(monkeypatch):
    from msa_forge.harness import default_threads

    monkeypatch.setenv("MSA_FORGE_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.delenv("MSA_FORGE_THREADS")
    assert default_threads() >= 1


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_dumps_canonical_floats():
    text = dumps({"a": 0.1, "b": 1.0, "c": math.inf, "d": [math.nan, 2]})
    assert '"a": 0.10000000000000001' in text
    assert '"b": 1.0' in text
    assert '"c": null' in text and "NaN" not in text
    assert text.endswith("\n")
    assert json.loads(text)["d"] == [None, 2]
