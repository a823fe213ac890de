import csv
import json

import pytest

from greeklab import gaw
from greeklab.cli import main, parse_overrides
from greeklab.errors import ConfigError
from greeklab.experiments import resolve_params, verify_goldens


def _rows(path):
    with path.open(encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_table3(tmp_path):
    assert main(["table3", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "table3.csv")
    assert [r["N_o"] for r in rows] == ["1976", "4664", "4904"]
    assert [r["N_o_theory"] for r in rows] == ["570592", "712008", "833296"]
    assert list(rows[0])[:7] == ["k", "m", "l", "N_o", "m_theory", "l_theory", "N_o_theory"]
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["status"] == "ok" and meta["params"]["ks"] == [2, 3, 4]


def test_table4(tmp_path):
    assert main(["table4", "--out", str(tmp_path)]) == 0
    rows = {r["method"]: int(r["N_o"]) for r in _rows(tmp_path / "table4.csv")}
    assert len(rows) == 6
    assert rows["SFQG"] == 64 and rows["SQG"] == 256
    assert rows["GAW (numerical)"] == 1600 and rows["GAW (theoretical)"] == 201_528
    assert 16_000 <= rows["CFD-CRN"] <= 64_000 and 200_000 <= rows["CFD"] <= 800_000


def test_regeneration_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["greeks-classical", "--override", "preset=vanilla", "--seed", "3", "--out", str(a)]) == 0
    assert main(["greeks-classical", "--config", str(a / "metadata.json"), "--out", str(b)]) == 0
    assert (a / "greeks.csv").read_bytes() == (b / "greeks.csv").read_bytes()


@pytest.mark.parametrize("args", [
    ["greeks-gaw", "--override", "bogus=1"],
    ["greeks-gaw", "--override", "m=1.5"],
    ["greeks-gaw", "--override", "noequals"],
    ["greeks-gaw", "--override", "preset=swaption"],
    ["nonsense"],
])
def test_config_errors(tmp_path, args):
    assert main(args + ["--out", str(tmp_path)]) == 2


def test_experiment_error_record(tmp_path):
    # 2^36 entries without the large-tensor flag
    code = main(["greeks-gaw", "--override", "n=9", "--override", "k=4", "--out", str(tmp_path)])
    assert code == 1
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["status"] == "error" and meta["error"]["kind"] == "resource"


def test_memory_cap_flag(tmp_path):
    old = gaw.MEMORY_CAP_ENTRIES
    try:
        code = main(["multiobj", "--override", "preset=constants", "--memory-cap", "100",
                     "--out", str(tmp_path)])
        assert code == 1
    finally:
        gaw.MEMORY_CAP_ENTRIES = old


def test_resources_and_multiobj(tmp_path):
    assert main(["resources", "--out", str(tmp_path / "r")]) == 0
    vals = {r["quantity"]: float(r["value"]) for r in _rows(tmp_path / "r" / "resources.csv")}
    assert vals["N_o"] == 201_528 and vals["serial_rate_hz"] == 1.125e6
    assert main(["multiobj", "--override", "preset=constants", "--out", str(tmp_path / "m")]) == 0
    est = [float(r["estimate"]) for r in _rows(tmp_path / "m" / "objectives.csv")]
    assert est == pytest.approx([0.2, 0.7], abs=1 / 64)


def test_verify_and_fault_injection(tmp_path):
    assert main(["verify", "--override", "statistical=false", "--out", str(tmp_path / "ok")]) == 0
    code = main(["verify", "--override", "statistical=false", "--override", "corrupt=central_diff_coefficients",
                 "--out", str(tmp_path / "bad")])
    assert code == 1
    report = _rows(tmp_path / "bad" / "report.csv")
    failed = [r["name"] for r in report if r["passed"] == "False"]
    assert "central_diff_coefficients" in failed


def test_statistical_suite():
    rep = verify_goldens(statistical=True)
    assert all(r["passed"] for r in rep), [r for r in rep if not r["passed"]]


def test_precedence():
    p = resolve_params("greeks-gaw", {"m": 2, "l": 0.3}, {"m": 1})
    assert p["m"] == 1 and p["l"] == 0.3 and p["n"] == 6
    assert parse_overrides(["ks=[2,3]", "preset=basket"]) == {"ks": [2, 3], "preset": "basket"}
    with pytest.raises(ConfigError):
        resolve_params("table3", {"ks": 3})
