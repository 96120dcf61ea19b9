import json

import numpy as np
import pytest

from onlinefw.cli import (
    CSV_HEADER,
    RunConfig,
    execute_run,
    ingest_labeled_sparse,
    ingest_mc_triplets,
    main,
)
from onlinefw.exceptions import UnsupportedConstraintError


def minimal_config(**overrides):
    raw = {
        "workload": {"kind": "fixed_design_lasso", "n": 8, "m": 5, "sigma_w": 1.0, "seed": 3},
        "solver": {"kind": "ofw", "schedule": {"kind": "harmonic", "K": 2}},
        "horizon": 10,
    }
    raw.update(overrides)
    return raw


class TestRunConfig:
    def test_minimal_valid(self):
        cfg = RunConfig.from_dict(minimal_config())
        assert cfg.batch_size == 1 and cfg.cadence == "geometric"

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="unknown config fields"):
            RunConfig.from_dict(minimal_config(extra_knob=1))

    def test_missing_required_rejected(self):
        with pytest.raises(ValueError, match="missing required"):
            RunConfig.from_dict({"horizon": 5})

    def test_bad_solver_kind(self):
        with pytest.raises(ValueError, match="solver spec"):
            RunConfig.from_dict(minimal_config(solver={"kind": "sgd"}))

    def test_bad_workload_kind(self):
        with pytest.raises(ValueError, match="unknown workload kind"):
            RunConfig.from_dict(minimal_config(workload={"kind": "mystery"}))

    def test_digest_stable_and_sensitive(self):
        a = RunConfig.from_dict(minimal_config()).digest()
        b = RunConfig.from_dict(minimal_config()).digest()
        c = RunConfig.from_dict(minimal_config(horizon=11)).digest()
        assert a == b
        assert a != c


def strip_elapsed(csv_text):
    lines = csv_text.strip().split("\n")
    return [",".join(line.split(",")[:-1]) for line in lines]


class TestExecuteRun:
    def test_csv_schema_and_count(self, tmp_path):
        cfg = RunConfig.from_dict(minimal_config(inner_repeats=2, output_dir=str(tmp_path)))
        summary = execute_run(cfg)
        csv_text = (tmp_path / summary["csv"]).read_text()
        lines = csv_text.strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert len(lines) == 1 + 10 * 2
        assert summary["records"] == 20
        assert summary["digest"] == cfg.digest()

    def test_rerun_identical_modulo_timing(self, tmp_path):
        cfg = RunConfig.from_dict(minimal_config(output_dir=str(tmp_path)))
        first = execute_run(cfg, out_dir=tmp_path / "a")
        second = execute_run(cfg, out_dir=tmp_path / "b")
        text_a = (tmp_path / "a" / first["csv"]).read_text()
        text_b = (tmp_path / "b" / second["csv"]).read_text()
        assert strip_elapsed(text_a) == strip_elapsed(text_b)

    def test_oaw_on_trace_ball_fails_validation(self, tmp_path):
        raw = minimal_config(
            workload={"kind": "mc", "m1": 4, "m2": 5, "rank": 2, "seed": 0},
            solver={"kind": "oaw"},
            output_dir=str(tmp_path),
        )
        cfg = RunConfig.from_dict(raw)
        with pytest.raises(UnsupportedConstraintError):
            execute_run(cfg)

    def test_summary_has_slope_and_tail(self, tmp_path):
        cfg = RunConfig.from_dict(
            minimal_config(horizon=300, cadence="every", output_dir=str(tmp_path))
        )
        summary = execute_run(cfg)
        assert summary["min_gap_tail"]["gap"] == "fw"
        assert "final_h" in summary
        json_text = json.loads((tmp_path / summary["json"]).read_text())
        assert json_text["digest"] == cfg.digest()


class TestIngestMcTriplets:
    def test_basic_line(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("0,2,3.5\n")
        samples = list(ingest_mc_triplets(path))
        assert len(samples) == 1
        assert (samples[0].row, samples[0].col, samples[0].value) == (0, 2, 3.5)

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("k,l,y\n1,1,2.0\n")
        samples = list(ingest_mc_triplets(path))
        assert len(samples) == 1 and samples[0].row == 1

    def test_count_and_order(self, tmp_path):
        path = tmp_path / "obs.csv"
        rng = np.random.default_rng(0)
        rows = [(int(rng.integers(5)), int(rng.integers(6)), float(rng.standard_normal())) for _ in range(100)]
        path.write_text("\n".join(f"{k},{l},{y}" for k, l, y in rows) + "\n")
        samples = list(ingest_mc_triplets(path, shape=(5, 6)))
        assert len(samples) == 100
        assert [(s.row, s.col) for s in samples] == [(k, l) for k, l, _ in rows]

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("0,1,2.0\nnot-a-line\n")
        with pytest.raises(ValueError, match=":2"):
            list(ingest_mc_triplets(path))

    def test_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("7,0,1.0\n")
        with pytest.raises(ValueError, match="outside"):
            list(ingest_mc_triplets(path, shape=(5, 6)))


class TestIngestLabeledSparse:
    def test_basic_line(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("+1 3:0.5 7:-1\n")
        samples = ingest_labeled_sparse(path)
        assert samples[0].label == 1
        x = samples[0].features
        assert x[2] == 0.5 and x[6] == -1.0 and np.count_nonzero(x) == 2

    def test_zero_label_maps_to_negative(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("0 1:1\n")
        assert ingest_labeled_sparse(path)[0].label == -1

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        lines = []
        originals = []
        for _ in range(20):
            label = 1 if rng.random() < 0.5 else -1
            idx = sorted(rng.choice(12, size=3, replace=False) + 1)
            vals = np.round(rng.standard_normal(3), 6)
            lines.append(f"{label:+d} " + " ".join(f"{i}:{v}" for i, v in zip(idx, vals)))
            originals.append((label, list(zip(idx, vals))))
        path = tmp_path / "data.txt"
        path.write_text("\n".join(lines) + "\n")
        samples = ingest_labeled_sparse(path, dim=12)
        assert len(samples) == 20
        for sample, (label, entries) in zip(samples, originals):
            assert sample.label == label
            for i, v in entries:
                assert sample.features[i - 1] == pytest.approx(v)

    def test_bad_label(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("2 1:1\n")
        with pytest.raises(ValueError, match="label"):
            ingest_labeled_sparse(path)

    def test_malformed_pair(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("+1 3=0.5\n")
        with pytest.raises(ValueError, match="malformed pair"):
            ingest_labeled_sparse(path)

    def test_dimension_inferred(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("+1 9:1\n-1 4:2\n")
        samples = ingest_labeled_sparse(path)
        assert samples[0].features.shape == (9,)


class TestMainEntry:
    def test_run_subcommand(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(minimal_config(output_dir=str(tmp_path))))
        assert main(["run", str(cfg_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["records"] == 10

    def test_run_rejects_bad_config(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(minimal_config(bogus=True)))
        assert main(["run", str(cfg_path)]) == 2
        assert "unknown config fields" in capsys.readouterr().err

    def test_verify_unknown_suite(self, capsys):
        assert main(["verify", "nope"]) == 2
        assert "unknown suites" in capsys.readouterr().err

    def test_verify_reports_failures_with_exit_one(self, capsys, monkeypatch):
        from onlinefw import acceptance, cli

        def failing(ctx):
            return acceptance.CriterionResult("stub", False, "forced failure", {}, 0.0)

        monkeypatch.setitem(cli.SUITES, "stub", failing)
        assert main(["verify", "stub"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] stub" in out and "0/1 suites passed" in out

    def test_verify_passing_suite_exits_zero(self, capsys):
        assert main(["verify", "solver-equivalence"]) == 0
        assert "[PASS] solver-equivalence" in capsys.readouterr().out

    def test_lmo_check(self, capsys):
        assert main(["lmo-check", "5", "20"]) == 0
        assert "mismatches=0" in capsys.readouterr().out

    def test_classification_run_with_data_file(self, tmp_path, capsys):
        data = tmp_path / "train.txt"
        rng = np.random.default_rng(3)
        lines = []
        for _ in range(25):
            label = "+1" if rng.random() < 0.5 else "-1"
            pairs = " ".join(f"{i + 1}:{rng.standard_normal():.3f}" for i in rng.choice(9, 3, replace=False))
            lines.append(f"{label} {pairs}")
        data.write_text("\n".join(lines) + "\n")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "workload": {"kind": "classification", "m1": 3, "m2": 3, "rank": 1,
                                 "n_train": 25, "seed": 0, "radius": 1.0},
                    "solver": {"kind": "oaw", "schedule": {"kind": "power", "alpha": 0.75}},
                    "horizon": 25,
                    "data_file": str(data),
                    "output_dir": str(tmp_path),
                }
            )
        )
        assert main(["run", str(cfg_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["records"] == 25
        assert out["min_gap_tail"]["gap"] == "aw"

    def test_mc_run_with_data_file(self, tmp_path, capsys):
        data = tmp_path / "obs.csv"
        rng = np.random.default_rng(2)
        lines = [f"{int(rng.integers(4))},{int(rng.integers(5))},{rng.standard_normal():.4f}" for _ in range(30)]
        data.write_text("k,l,y\n" + "\n".join(lines) + "\n")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "workload": {"kind": "mc", "m1": 4, "m2": 5, "rank": 2, "seed": 0},
                    "solver": {"kind": "ofw"},
                    "horizon": 30,
                    "data_file": str(data),
                    "output_dir": str(tmp_path),
                }
            )
        )
        assert main(["run", str(cfg_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["records"] == 30 and not out["truncated"]
