from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from gkp_lab.cli import main, parse_mu_up
from gkp_lab.gkp_stats import SQRT_PI


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text: str) -> list[dict[str, str]]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


@pytest.mark.parametrize(
    "text, expected",
    [
        ("0", 0.0),
        ("sqrt_pi/10", SQRT_PI / 10),
        ("3sqrt_pi/16", 3 * SQRT_PI / 16),
        ("0.25", 0.25),
    ],
)
def test_parse_mu_up(text, expected):
    assert parse_mu_up(text) == expected


@pytest.mark.parametrize("text", ["bogus", "sqrt_pi", "-0.1", "1.0", "nan", "sqrt_pi/0"])
def test_bad_mu_up_names_flag(text, capsys):
    code, _, err = run(["keyrate", "--mu-up", text, "--max-km", "2"], capsys)
    assert code == 2
    assert "--mu-up" in err


def test_keyrate_contract(capsys):
    argv = "keyrate --protocol 3 --mqr 100 --squeezing-db 15 --mu-up sqrt_pi/10 --max-km 400 --step-km 1".split()
    code, out, _ = run(argv, capsys)
    assert code == 0
    rows = csv_rows(out)
    assert len(rows) == 400
    assert list(rows[0]) == ["distance_km", "kappa", "e_ab_x", "e_ab_z", "p_suc_total"]
    kappa = [float(r["kappa"]) for r in rows]
    assert all(b <= a for a, b in zip(kappa, kappa[1:]))
    header = [line for line in out.splitlines() if line.startswith("#")]
    assert any("squeezing_db" in line and "mqr" in line for line in header)


def test_keyrate_protocol_ordering(capsys):
    common = "--mqr 100 --squeezing-db 15 --max-km 150 --deterministic".split()
    _, out1, _ = run(["keyrate", "--protocol", "1", *common], capsys)
    _, out3, _ = run(["keyrate", "--protocol", "3", *common], capsys)
    for r1, r3 in zip(csv_rows(out1), csv_rows(out3)):
        assert float(r3["kappa"]) >= float(r1["kappa"])


def test_keyrate_default_grid_spans_twice_waterfall(capsys):
    code, out, _ = run(["keyrate", "--deterministic"], capsys)
    assert code == 0
    rows = csv_rows(out)
    # the default grid spans twice the protocol I waterfall
    assert 50 <= len(rows) <= 170
    assert float(rows[-1]["kappa"]) == 0.0


def test_keyrate_full_precision(capsys):
    _, out, _ = run("keyrate --max-km 3 --deterministic".split(), capsys)
    value = csv_rows(out)[1]["kappa"]
    assert len(value.replace(".", "").lstrip("0")) >= 15


def test_keyrate_require_positive(capsys):
    code, _, _ = run("keyrate --squeezing-db 3 --max-km 5 --require-positive".split(), capsys)
    assert code == 3
    code, _, _ = run("keyrate --max-km 5 --require-positive".split(), capsys)
    assert code == 0


def test_keyrate_protocol_one_rejects_clip(capsys):
    code, _, err = run("keyrate --protocol 1 --mu-up sqrt_pi/10 --max-km 5".split(), capsys)
    assert code == 2 and "mu_up" in err


def test_waterfall_command(capsys):
    code, out, _ = run("waterfall --protocol 1 --mqr 100 --deterministic".split(), capsys)
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == 1
    assert 25 <= doc["waterfall_km"] <= 85
    code, _, _ = run("waterfall --squeezing-db -10".split(), capsys)
    assert code == 3


def test_cbsm_eval_pnrd_infeasible(capsys):
    code, _, err = run("cbsm eval --detector pnrd --eta0 0.7 --l0-km 22 --n 2 --m 2".split(), capsys)
    assert code == 3 and "no-cloning" in err


def test_cbsm_eval_requires_shape(capsys):
    code, _, err = run("cbsm eval --l0-km 1.8".split(), capsys)
    assert code == 2 and "--n" in err


def test_cbsm_eval_json_schema(capsys):
    code, out, _ = run("cbsm eval --n 15 --m 6 --j 1 --l0-km 1.8 --squeezing-db 12 --mu-up sqrt_pi/10".split(), capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["schema"] == 1
    assert doc["params"] == {"n": 15, "m": 6, "j": 1, "l0_km": 1.8}
    assert set(doc["meta"]) >= {"detector", "squeezing_db", "mu_up", "eta0", "total_km", "timestamp"}


def test_cbsm_optimize_deterministic_bytes(tmp_path, capsys):
    argv = "cbsm optimize --eta0 0.98 --total-km 1000 --squeezing-db 12 --mu-up sqrt_pi/10 --deterministic".split()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main([*argv, "--out", str(a)]) == 0
    assert main([*argv, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert "timestamp" not in doc["meta"]
    assert doc["best"]["performance"]["rc"] == pytest.approx(1.246e5, rel=0.5)
    assert doc["best"]["params"]["j"] in (0, 1, 2)


def test_cbsm_optimize_trace(capsys):
    argv = "cbsm optimize --j-set 0,1 --m-range 5,6 --n-range 15,16 --l0-range-km 1.7,1.8 --l0-step-km 0.05 --trace".split()
    code, out, _ = run(argv, capsys)
    doc = json.loads(out)
    assert code == 0
    assert len(doc["trace"]) == 2 * 2 * 2 * 3
    assert doc["meta"]["search"]["evaluated"] == 24


def test_cbsm_optimize_partial_ranges(capsys):
    code, _, err = run("cbsm optimize --j-set 0 --m-range 5,6".split(), capsys)
    assert code == 2


def test_cbsm_optimize_pnrd_empty(capsys):
    argv = "cbsm optimize --detector pnrd --eta0 0.7 --j-set 0 --m-range 2,3 --n-range 2,3 --l0-range-km 20,22".split()
    code, _, _ = run(argv, capsys)
    assert code == 3


def test_mc_validate_gec(capsys):
    code, out, _ = run("mc-validate --target gec --trials 1000000 --seed 7".split(), capsys)
    doc = json.loads(out)
    assert code == 0
    check = {c["quantity"]: c for c in doc["checks"]}
    assert abs(check["gec_residual_variance"]["z"]) <= 4


def test_mc_validate_clip_12db(capsys):
    code, out, _ = run("mc-validate --target clip --trials 1000000 --seed 3 --squeezing-db 12 --mu-up sqrt_pi/10".split(), capsys)
    doc = json.loads(out)
    assert code == 0
    assert all(abs(c["z"]) <= 4 for c in doc["checks"])


def test_mc_validate_bsm_and_link(capsys):
    code, _, _ = run("mc-validate --target bsm --trials 200000 --seed 3 --eta-prod 0.9 --mu-up sqrt_pi/10".split(), capsys)
    assert code == 0
    code, _, _ = run("mc-validate --target link --trials 200000 --seed 3 --eta-prod 0.9 --n 3 --m 2".split(), capsys)
    assert code == 0


def test_mc_validate_detects_mismatch(capsys):
    # a wrong variance override makes the 2 sigma^2 reference miss
    code, out, _ = run("mc-validate --target gec --trials 200000 --seed 1 --variance 0.3".split(), capsys)
    assert code == 4


@pytest.mark.parametrize(
    "argv",
    [
        "mc-validate --target clip --trials 0 --seed 1",
        "mc-validate --target link --trials 100 --seed 1",
        "mc-validate --trials 10 --seed 1",
        "mc-validate --target clip --trials 10 --seed -1",
    ],
)
def test_mc_validate_usage_errors(argv, capsys):
    code, _, _ = run(argv.split(), capsys)
    assert code == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"protocol": 3, "mu_up": "sqrt_pi/10", "max-km": 5, "mqr": 10}))
    code, out, _ = run(["keyrate", "--config", str(cfg), "--mqr", "20", "--deterministic"], capsys)
    assert code == 0
    inputs = json.loads(next(l for l in out.splitlines() if l.startswith("# inputs=")).split("=", 1)[1])
    assert inputs["protocol"] == 3 and inputs["mqr"] == 20 and inputs["max_km"] == 5.0
    assert inputs["mu_up"] == pytest.approx(SQRT_PI / 10)
    assert len(csv_rows(out)) == 5


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(["keyrate", "--config", str(cfg)], capsys)
    assert code == 2 and "bogus" in err


def test_thread_env_does_not_change_output(monkeypatch, capsys):
    argv = "mc-validate --target link --trials 50000 --seed 4 --eta-prod 0.85 --chunk-size 5000 --deterministic".split()
    monkeypatch.setenv("GKP_LAB_THREADS", "1")
    _, one, _ = run(argv, capsys)
    monkeypatch.setenv("GKP_LAB_THREADS", "0")
    _, auto, _ = run(argv, capsys)
    monkeypatch.setenv("GKP_LAB_THREADS", "3")
    _, three, _ = run(argv, capsys)
    # the echoed inputs are identical too, since the thread count is not an input
    assert one == auto == three


def test_console_script_entry():
    out = subprocess.run(
        [sys.executable, "-m", "gkp_lab.cli", "waterfall", "--deterministic"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert out.returncode == 0
    assert math.isfinite(json.loads(out.stdout)["waterfall_km"])
