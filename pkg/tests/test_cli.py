import csv
import io
import json

import numpy as np
import pytest

from dualifs.cli import (EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK, SpecError, dumps,
                         example_spec_path, load_spec, main, parse_spec, read_spec, spec_of)
from dualifs.interval import Interval


def _write(tmp_path, data, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def _run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_example_spec_loads():
    ifs = load_spec(example_spec_path())
    assert ifs.arity == 3
    assert ifs.c_max.contains(3 / 16)


def test_weights_default_uniform(tmp_path, capsys):
    path = _write(tmp_path, {"maps": ["x/3", "x/3 + 2/3"]})
    assert load_spec(path).weights is None
    code, out, _ = _run(capsys, "dimension", path, "--depth", "2", "--samples", "1000")
    assert code == EXIT_OK
    assert json.loads(out)["result"]["weights"] == [0.5, 0.5]


def test_schema_errors_carry_paths():
    with pytest.raises(SpecError) as e:
        parse_spec({"maps": ["x/3", 7]})
    assert e.value.path == "$.maps[1]"
    with pytest.raises(SpecError) as e:
        parse_spec({"maps": ["x/3"], "colour": "red"})
    assert e.value.path == "$"
    with pytest.raises(SpecError):
        parse_spec({"maps": []})


def test_malformed_expression_reports_position(tmp_path, capsys):
    code, _, err = _run(capsys, "validate", _write(tmp_path, {"maps": ["x/3", "x/3 + * 2"]}))
    assert code == EXIT_INPUT
    assert "maps[1]" in err and "position 6" in err


def test_missing_file(tmp_path, capsys):
    code, _, err = _run(capsys, "validate", str(tmp_path / "nope.json"))
    assert code == EXIT_INPUT and err


def test_expanding_map_rejected(tmp_path, capsys):
    code, _, err = _run(capsys, "sesc-certify", _write(tmp_path, {"maps": ["2*x", "x/3"]}))
    assert code == EXIT_INPUT
    assert "contract" in err


def test_bad_weights(tmp_path, capsys):
    code, _, err = _run(capsys, "validate", _write(tmp_path, {"maps": ["x/3", "x/3 + 2/3"], "weights": [0.7, 0.7]}))
    assert code == EXIT_INPUT and "weights" in err


def test_sesc_certify_example(capsys):
    code, out, _ = _run(capsys, "sesc-certify", "example", "--json")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["verdict"] == "ACCEPT"
    assert rep["result"]["margin"] >= 1 / 26 - 1e-6
    assert len(rep["input_sha256"]) == 64 and "runtime_seconds" not in rep["result"]


def test_sesc_certify_similarities_negative(tmp_path, capsys):
    code, out, _ = _run(capsys, "sesc-certify", _write(tmp_path, {"maps": ["x/3", "x/3 + 2/3"]}))
    assert code == EXIT_NEGATIVE and json.loads(out)["verdict"] == "REJECT_CRITERION"


@pytest.mark.parametrize("depth,code", [(0, EXIT_OK), (1, EXIT_OK), (2, EXIT_OK)])
def test_dual_ssc_depths(capsys, depth, code):
    assert _run(capsys, "dual-ssc", "example", "--depth", str(depth))[0] == code


def test_dual_ssc_similarities_fail(tmp_path, capsys):
    code, out, _ = _run(capsys, "dual-ssc", _write(tmp_path, {"maps": ["x/3", "x/3 + 2/3"]}), "--depth", "1")
    assert code == EXIT_NEGATIVE and json.loads(out)["verdict"] == "FAIL"


def test_separation_scan_csv(capsys):
    code, out, _ = _run(capsys, "separation-scan", "example", "--max-depth", "3", "--csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK
    assert list(rows[0]) == ["depth", "delta", "log_delta_over_n", "pairs_scanned", "witness_i", "witness_j"]
    assert [int(r["pairs_scanned"]) for r in rows] == [3, 36, 351]


def test_separation_scan_overlap(tmp_path, capsys):
    spec = {"maps": ["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32",
                     "(x/8 + x^2/32)/8 + (x/8 + x^2/32)^2/32"]}
    code, out, _ = _run(capsys, "separation-scan", _write(tmp_path, spec), "--max-depth", "2")
    assert code == EXIT_NEGATIVE and json.loads(out)["verdict"] == "EXACT_OVERLAP"


def test_dimension_csv_and_weights(capsys):
    code, out, _ = _run(capsys, "dimension", "example", "--csv", "--depth", "3", "--samples", "2000")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["t", "P"]
    code, out, _ = _run(capsys, "dimension", "example", "--weights", "0.5,0.25,0.25", "--depth", "3",
                        "--samples", "2000")
    assert code == EXIT_OK
    code, _, err = _run(capsys, "dimension", "example", "--weights", "0.5,0.5")
    assert code == EXIT_INPUT


def test_conjugacy_exit_codes(tmp_path, capsys):
    assert _run(capsys, "conjugacy", "example")[0] == EXIT_INCONCLUSIVE
    code, out, _ = _run(capsys, "conjugacy", _write(tmp_path, {"maps": ["x/3", "x/3 + 2/3"]}))
    assert code == EXIT_OK and json.loads(out)["verdict"] == "CONJUGATE"


def test_text_output(capsys):
    code, out, _ = _run(capsys, "validate", "example", "--text")
    assert code == EXIT_OK and "verdict" in out and not out.lstrip().startswith("{")


def test_byte_identical_json(capsys, tmp_path):
    outs = []
    for threads in ("1", "2", "1"):
        code, out, _ = _run(capsys, "report", "example", "--threads", threads, "--max-depth", "3")
        assert code == EXIT_OK
        outs.append(out)
    assert outs[0] == outs[1] == outs[2]
    target = tmp_path / "r.json"
    assert main(["report", "example", "--max-depth", "3", "-o", str(target)]) == EXIT_OK
    assert target.read_text() == outs[0]


def test_timing_flag(capsys):
    _, out, _ = _run(capsys, "sesc-certify", "example", "--timing")
    rep = json.loads(out)
    assert rep["wall_time_seconds"] >= 0 and "runtime_seconds" in rep["result"]


def test_spec_round_trip(tmp_path):
    ifs = load_spec(example_spec_path())
    path = _write(tmp_path, dumps(spec_of(ifs).to_dict()))
    back, digest = read_spec(path)
    ifs2 = back.build()
    xs = np.linspace(0, 1, 101)
    for a in range(1, 4):
        assert np.array_equal(ifs[a].vec(xs), ifs2[a].vec(xs))
    assert back.epsilon == 0.05 and len(digest) == 64


def test_perturb_writes_spec(tmp_path, capsys):
    target = tmp_path / "out.json"
    code, out, _ = _run(capsys, "perturb", "example", "--depth", "2", "--delta", "0.5", "--output", str(target))
    assert code == EXIT_OK
    ifs = load_spec(target)
    assert ifs.sources == load_spec(example_spec_path()).sources


def test_dumps_format():
    text = dumps({"a": 0.1, "b": [float("inf"), float("nan")], "c": Interval(1, 2).lo})
    assert json.loads(text) == {"a": 0.1, "b": ["inf", "nan"], "c": 1.0}
    assert "0.10000000000000001" in text
