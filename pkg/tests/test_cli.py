import copy
import math

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from mvruin.cli import EXIT_ASSUMPTION, EXIT_INVALID, EXIT_OK, main
from mvruin.config import ConfigError, parse_config
from mvruin.report import FLAGS, HEADER, ReportRow, from_csv, read_csv, to_csv

BASE = {
    "seed": 7,
    "model": {
        "claims": {"radial": {"law": "pareto", "alpha": 2, "scale": 1},
                   "spectral": {"atoms": [[1, 0], [0, 1]], "weights": [0.5, 0.5]}},
        "arrivals": {"law": "exponential", "rate": 1},
        "returns": {"kind": "deterministic", "rate": 0.03},
        "premiums": {"bounds": [0.01, 0.01]},
        "allocation": {"weights": [0.5, 0.5]},
    },
    "experiments": [{"id": "ent", "kind": "entrance", "x_grid": [20, 50], "t_grid": [5, 10], "n": 5000,
                     "set": {"kind": "halfspace", "weights": [0.5, 0.5]}}],
}


def cfg(**changes):
    c = copy.deepcopy(BASE)
    for path, value in changes.items():
        node = c
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[int(k)] if isinstance(node, list) else node[k]
        node[keys[-1]] = value
    return c


def write(tmp_path, data, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def violations(data):
    try:
        parse_config(data)
    except ConfigError as exc:
        return exc.violations
    return []


def test_minimal_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, BASE), "--out", str(out), "--threads", "1"]) == EXIT_OK
    text = (out / "ent.csv").read_bytes()
    assert b"\r" not in text
    assert text.decode().splitlines()[0] == ",".join(HEADER)
    rows = read_csv(out / "ent.csv")
    assert len(rows) == 4
    assert {(r.x, r.t) for r in rows} == {(20.0, 5.0), (20.0, 10.0), (50.0, 5.0), (50.0, 10.0)}
    assert all(r.n == 5000 and r.seed == 7 for r in rows)


def test_run_is_byte_identical(tmp_path):
    path = write(tmp_path, BASE)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", path, "--out", str(a), "--threads", "1"])
    main(["run", "--config", path, "--out", str(b), "--threads", "2"])
    assert (a / "ent.csv").read_bytes() == (b / "ent.csv").read_bytes()


def test_seed_override(tmp_path):
    path = write(tmp_path, BASE)
    main(["run", "--config", path, "--out", str(tmp_path / "a"), "--threads", "1"])
    main(["run", "--config", path, "--out", str(tmp_path / "b"), "--threads", "1", "--seed", "8"])
    a, b = read_csv(tmp_path / "a" / "ent.csv"), read_csv(tmp_path / "b" / "ent.csv")
    assert {r.seed for r in b} == {8}
    assert [r.mc for r in a] != [r.mc for r in b]


def test_bad_allocation_exits_2(tmp_path, capsys):
    data = cfg(model__allocation={"weights": [0.5, 0.4]})
    assert main(["run", "--config", write(tmp_path, data), "--out", str(tmp_path)]) == EXIT_INVALID
    assert "model.allocation" in capsys.readouterr().err


def test_strict_global_without_interest_exits_3(tmp_path):
    data = cfg(model__returns={"kind": "deterministic", "rate": 0.0})
    data["experiments"] = [{"id": "g", "kind": "global", "x_grid": [50], "t_grid": [math.inf], "n": 1000,
                            "set": {"kind": "or", "thresholds": [1, 1]}}]
    path = write(tmp_path, data)
    assert main(["run", "--config", path, "--strict", "--out", str(tmp_path / "o")]) == EXIT_ASSUMPTION
    assert not (tmp_path / "o").exists()
    assert main(["validate", "--config", path, "--strict"]) == EXIT_ASSUMPTION
    assert main(["validate", "--config", path]) == EXIT_OK


def test_validate_clean(tmp_path, capsys):
    assert violations(BASE) == []
    assert main(["validate", "--config", write(tmp_path, BASE)]) == EXIT_OK
    assert "no violations" in capsys.readouterr().out


def test_validate_nonpositive_threshold():
    data = cfg(experiments__0__set={"kind": "or", "thresholds": [0, 1]})
    v = violations(data)
    assert len(v) == 1 and "thresholds must be positive" in v[0]


def test_validate_non_pd_copula():
    data = cfg(model__claims={"kind": "margins",
                              "margins": [{"law": "pareto", "alpha": 2}] * 3,
                              "copula": {"kind": "gaussian",
                                         "correlation": [[1, 0.9, 0.9], [0.9, 1, -0.9], [0.9, -0.9, 1]]}})
    v = violations(data)
    assert any("correlation" in s for s in v)


@pytest.mark.parametrize("change,needle", [
    ({"seed": -1}, "seed"),
    ({"experiments__0__n": 10}, "n"),
    ({"experiments__0__kind": "nope"}, "kind"),
    ({"experiments__0__t_grid": [math.inf]}, "t_grid"),
    ({"model__arrivals": {"law": "degenerate", "value": 0.0}}, "model"),
])
def test_invalid_fields_named(change, needle):
    v = violations(cfg(**change))
    assert v and any(needle in s for s in v)


def test_duplicate_ids():
    data = copy.deepcopy(BASE)
    data["experiments"].append(copy.deepcopy(data["experiments"][0]))
    assert any("unique" in s for s in violations(data))


def test_missing_config_file(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == EXIT_INVALID


# CSV schema -----------------------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
opt = st.none() | finite


@settings(max_examples=200, deadline=None)
@given(opt, opt, opt, opt, opt, opt, opt, st.integers(1000, 10**9), st.integers(0, 2**64 - 1),
       st.lists(st.sampled_from([f for f in FLAGS if f != "ok"]), max_size=3, unique=True))
def test_csv_round_trip(x, t, mc, lo, hi, asym, ratio, n, seed, flags):
    row = ReportRow("e", x, t, mc, lo, hi, asym, ratio, n, seed, tuple(flags))
    assert from_csv(to_csv([row])) == [row]


def test_csv_special_values():
    row = ReportRow("e", 1.0, math.inf, 0.0, 0.0, 1e-3, None, math.nan, 1000, 0, ("zero-hits",))
    back = from_csv(to_csv([row]))[0]
    assert back.t == math.inf and back.asym is None and math.isnan(back.ratio)
    assert to_csv([row]).splitlines()[0] == ",".join(HEADER)
    with pytest.raises(ValueError):
        ReportRow("e", 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1000, 0, ("bogus",))
