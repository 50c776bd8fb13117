# tests/test_cli.py
import csv
import io
import json
from pathlib import Path

import jsonschema
import pytest

from src.cli import EXIT_CONFIG, EXIT_OK, main

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
SCHEMAS = ROOT / "schemas"


def _schema(name: str):
    return json.loads((SCHEMAS / name).read_text(encoding="utf-8"))


class TestEfficiency:
    """trudi efficiency"""

    def test_basic(self, capsys):
        assert main(["efficiency", "--strategy", "basic", "--n", "127"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["strategy"] == "basic(n=127)"
        assert out["eta_kt"]["exact"] == "127/128"
        assert out["period_frames"] == 127

    def test_dual_full_three_keys(self, capsys):
        assert main(["efficiency", "--strategy", "dual-full", "--N", "64", "--j-keys", "3"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["eta_kt"]["exact"] == "64/129"

    def test_invalid_strategy(self, capsys):
        assert main(["efficiency", "--strategy", "overlapped", "--n", "7", "--q", "9"]) == EXIT_CONFIG
        assert "trudi efficiency" in capsys.readouterr().err

    def test_missing_strategy(self):
        assert main(["efficiency"]) == EXIT_CONFIG


class TestMtbf:
    """trudi mtbf"""

    def test_128_bits(self, capsys):
        assert main(["mtbf", "--rate", "1e15", "--bits", "128"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["mtbf_years"]["decimal"] == pytest.approx(1.079e16, rel=1e-3)
        assert out["mtbf_seconds"]["exact"] == f"{2**113}/{5**15}"

    def test_bad_rate(self):
        assert main(["mtbf", "--rate", "fast", "--bits", "128"]) == EXIT_CONFIG
        assert main(["mtbf", "--rate", "0", "--bits", "128"]) == EXIT_CONFIG


class TestSimulate:
    """trudi simulate"""

    def test_output_matches_schema(self, tmp_path):
        out = tmp_path / "metrics.json"
        assert main(["simulate", str(SCENARIOS / "basic_small_key.yaml"), "--output", str(out)]) == EXIT_OK
        metrics = json.loads(out.read_text(encoding="utf-8"))
        jsonschema.validate(instance=metrics, schema=_schema("metrics.schema.json"))
        assert metrics["scenario"] == "basic-n7-k12"
        assert metrics["frames_sent"] == 700
        assert metrics["false_negatives"] == 0

    def test_seed_override_is_deterministic(self, capsys):
        main(["simulate", str(SCENARIOS / "basic_small_key.yaml"), "--seed", "9"])
        first = capsys.readouterr().out
        main(["simulate", str(SCENARIOS / "basic_small_key.yaml"), "--seed", "9"])
        assert capsys.readouterr().out == first

    def test_missing_file(self, tmp_path, capsys):
        assert main(["simulate", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG
        assert "not found" in capsys.readouterr().err

    def test_schema_error(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("strategy: {kind: basic, n: 0}\nframe_count: 10\n", encoding="utf-8")
        assert main(["simulate", str(bad)]) == EXIT_CONFIG

    def test_unknown_command(self):
        assert main(["teleport"]) == EXIT_CONFIG


class TestSweep:
    """trudi sweep"""

    def test_json_summary(self, capsys):
        assert main(["sweep", "--strategy", "basic", "--n", "7", "--workers", "1"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["max_tolerated_burst"] == 0
        assert out["sweep"] == {"worst_case": 0, "best_case": 6}
        assert len(out["rows"]) == 49

    def test_csv_rows(self, capsys):
        assert main(["sweep", "--strategy", "basic", "--n", "7", "--workers", "1", "--format", "csv"]) == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 49
        assert set(rows[0]) == {"start", "length", "survived"}

    def test_short_horizon(self):
        assert main(["sweep", "--strategy", "basic", "--n", "7", "--horizon", "10"]) == EXIT_CONFIG


class TestAttack:
    """trudi attack"""

    def test_brute_force_campaign(self, tmp_path):
        out = tmp_path / "attack.json"
        rc = main([
            "attack", str(SCENARIOS / "brute_force.yaml"), str(SCENARIOS / "basic_small_key.yaml"),
            "--output", str(out),
        ])
        assert rc == EXIT_OK
        stats = json.loads(out.read_text(encoding="utf-8"))
        jsonschema.validate(instance=stats, schema=_schema("attack_stats.schema.json"))
        assert stats["kind"] == "brute_force"
        assert stats["lifetimes"] == 300
        assert stats["successes"] > 0


class TestVectors:
    """trudi vectors"""

    def test_vectors_match_golden_file(self, capsys):
        assert main(["vectors"]) == EXIT_OK
        vectors = json.loads(capsys.readouterr().out)
        golden = json.loads((ROOT / "tests" / "data" / "golden_frames.json").read_text(encoding="utf-8"))
        names = {v["name"] for v in vectors}
        assert {"a_frame", "j_frame", "no_entries", "dual_three_key"} <= names
        assert all(v["sc_key"] == golden["sc_key"] for v in vectors)
        by_name = {v["name"]: v for v in vectors}
        for frozen in golden["vectors"]:
            assert by_name[frozen["name"]]["encoded"].startswith(frozen["body"])
