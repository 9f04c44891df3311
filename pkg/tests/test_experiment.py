import json
import math

import numpy as np
import pytest

from afcs.errors import ParseError, RangeError
from afcs.experiment import (COLUMNS, PRESETS, ExperimentConfig, format_value, grid_points,
                             manifest_path, rows_to_csv, run_experiment, sub_seed,
                             validate_config)

SMALL = {"experiment": "fig6", "n": 120, "s": [0.1], "L": [8], "T": [1, 2],
         "betas": [0.2, 0.3], "trials": 4, "seed": 11}


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate_and_round_trip(name):
    cfg = validate_config(json.dumps({"experiment": name}))
    again = validate_config(cfg.dumps())
    assert again == cfg
    assert isinstance(grid_points(cfg), list)


def test_round_trip_keeps_infinity():
    cfg = validate_config(json.dumps({**SMALL, "snr_db": ["inf", 30]}))
    assert cfg.snr_db == (math.inf, 30.0)
    assert validate_config(cfg.dumps()) == cfg


def test_beta_range_expands():
    cfg = validate_config(json.dumps({**SMALL, "betas": {"start": 0.1, "stop": 0.2, "step": 0.05}}))
    np.testing.assert_allclose(cfg.betas, [0.1, 0.15, 0.2])


@pytest.mark.parametrize("text,needle", [
    ("{", "invalid JSON"),
    ("[1]", "JSON object"),
    ('{"experiment": "nope"}', "experiment"),
    ('{"experiment": "fig6", "bogus": 1}', "bogus"),
    ('{"experiment": "fig6", "n": "a"}', "n: expected int"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ParseError) as info:
        validate_config(text)
    assert any(needle in v for v in info.value.violations)


def test_range_errors_list_every_violation():
    with pytest.raises(RangeError) as info:
        validate_config(json.dumps({"experiment": "fig6", "L": [20], "T": [30], "s": [1.5]}))
    v = info.value.violations
    assert any(x.startswith("s:") for x in v) and any(x.startswith("T:") for x in v)


def test_empty_grid_gives_empty_table():
    cfg = validate_config(json.dumps({**SMALL, "betas": []}))
    rows = run_experiment(cfg)
    assert rows == []
    assert rows_to_csv(rows, COLUMNS["fig6"]).strip() == ",".join(COLUMNS["fig6"])


def test_sub_seed_is_pure():
    a = np.random.default_rng(sub_seed(3, 4, 5)).random(3)
    b = np.random.default_rng(sub_seed(3, 4, 5)).random(3)
    c = np.random.default_rng(sub_seed(3, 5, 4)).random(3)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_same_seed_gives_identical_csv(tmp_path, monkeypatch):
    outs = []
    for i, threads in enumerate(("1", "2")):
        monkeypatch.setenv("AFCS_THREADS", threads)
        out = tmp_path / f"run{i}.csv"
        run_experiment(ExperimentConfig(**{**validate_config(json.dumps(SMALL)).__dict__,
                                           "out": str(out)}))
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0] == ",".join(COLUMNS["fig6"]) and len(lines) == 1 + 4


def test_manifest_is_complete(tmp_path):
    out = tmp_path / "res.csv"
    cfg = validate_config(json.dumps({"experiment": "lopt", "s": [0.1], "T": [1],
                                      "out": str(out)}))
    rows = run_experiment(cfg)
    assert rows[0]["L_exact"] == 15 and rows[0]["L_approx"] == 15
    man = json.loads(open(manifest_path(str(out))).read())
    assert set(man) >= {"config", "afcs_version", "kernel_backend", "numpy_version",
                        "python_version", "seeding"}
    assert validate_config(json.dumps(man["config"])) == cfg


def test_de_experiment_rows():
    cfg = validate_config(json.dumps({"experiment": "de", "L": [25], "T": [1], "s": [0.1],
                                      "betas": [0.1, 0.2]}))
    rows = run_experiment(cfg)
    assert [r["beta"] for r in rows] == [0.1, 0.2]
    assert rows[0]["p_final"] < 1 <= rows[1]["p_final"] + 1e-12


@pytest.mark.parametrize("value,text", [
    (1.5e-4, "1.500000e-04"), (0.25, "0.25"), (3, "3"), (math.nan, ""), (None, ""),
    (math.inf, "inf"), (0.0, "0"), (True, "1"),
])
def test_format_value(value, text):
    assert format_value(value) == text
