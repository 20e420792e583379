import pytest
import yaml
from click.testing import CliRunner

from mamsim.__main__ import cli
from mamsim.common import load_config
from mamsim.config import ExperimentConfig, enumerate_pairs, parse_config, run_seed, validate_config
from mamsim.db import get_engine, load_rows
from mamsim.errors import ConfigurationError
from mamsim.redist.types import Method, Strategy
from mamsim.scripts.matrix import run_matrix

FAST = {"data": {"n_elements": 64}, "app": {"total_iterations": 4, "reconfig_iteration": 2}}


def fields(violations):
    return [v.field for v in violations]


class TestMatrix:
    def test_twelve_pairs(self):
        pairs = enumerate_pairs([2, 4, 8, 16])
        assert len(pairs) == 12
        assert all(ns != nd for ns, nd in pairs)
        assert len(enumerate_pairs([2, 4, 8, 16], allow_identity=True)) == 16

    def test_run_count(self):
        cfg = ExperimentConfig(methods=["col", "rma-lock"], strategies=["blocking"], repeats=1)
        assert len(cfg.runs()) == 24

    def test_ineligible_products_are_skipped(self):
        cfg = ExperimentConfig()
        assert (Method.RMA_LOCK, Strategy.NONBLOCKING) not in cfg.variants()
        assert len(cfg.variants()) == 10

    def test_variable_data_keeps_blocking_only(self):
        cfg = ExperimentConfig(data={"category": "variable"})
        assert {s for _, s in cfg.variants()} == {Strategy.BLOCKING}

    def test_seeds(self):
        cfg = ExperimentConfig(ranks=[2, 4], methods=["col"], strategies=["blocking"], repeats=3, seed=11)
        seeds = [spec.seed for spec in cfg.runs()]
        assert seeds == [run_seed(11, i) for i in range(6)]
        assert len(set(seeds)) == 6
        assert run_seed(11, 0) != run_seed(12, 0)

    def test_explicit_pairs(self):
        cfg = ExperimentConfig(pairs=[(2, 4), (4, 4)], allow_identity=True)
        assert cfg.matrix() == [(2, 4), (4, 4)]


class TestValidateConfig:
    def test_default_is_valid(self):
        assert validate_config({}) == []

    def test_rma_nonblocking(self):
        violations = validate_config({"methods": ["rma-lock"], "strategies": ["nonblocking"], "skip_ineligible": False})
        assert "strategies" in fields(violations)
        assert any("nonblocking" in v.rule and "rma-lock" in v.rule for v in violations)

    def test_nothing_eligible_even_when_skipping(self):
        violations = validate_config({"methods": ["rma-lockall"], "strategies": ["nonblocking"]})
        assert fields(violations) == ["strategies"]

    def test_empty_rank_set(self):
        assert "ranks" in fields(validate_config({"ranks": []}))

    def test_identity_pair_needs_flag(self):
        assert fields(validate_config({"pairs": [[4, 4]]})) == ["pairs"]
        assert validate_config({"pairs": [[4, 4]], "allow_identity": True}) == []

    def test_pydantic_errors_name_the_field(self):
        violations = validate_config({"cost": {"bandwidth": 0}, "repeats": 0})
        assert set(fields(violations)) == {"cost.bandwidth", "repeats"}

    def test_unknown_method(self):
        assert fields(validate_config({"methods": ["p2p"]})) == ["methods.0"]

    def test_variable_data_with_background(self):
        violations = validate_config(
            {"data": {"category": "variable"}, "strategies": ["blocking", "wait-drains"], "skip_ineligible": False}
        )
        assert "data.category" in fields(violations)

    def test_parse_raises(self):
        with pytest.raises(ConfigurationError, match="ranks"):
            parse_config({"ranks": []})


class TestLoadConfig:
    def test_relative_outputs_resolve_against_the_file(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump({"output": {"report": "out/report.csv", "db": "/abs/runs.sqlite"}}))
        cfg = load_config(str(path))
        assert cfg["output"]["report"] == str(tmp_path.resolve() / "out" / "report.csv")
        assert cfg["output"]["db"] == "/abs/runs.sqlite"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(str(tmp_path / "nope.yaml"))

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError):
            load_config(str(path))


class TestRunMatrix:
    def config(self, tmp_path, **extra):
        raw = dict(FAST, ranks=[2, 4], methods=["col", "rma-lockall"], strategies=["blocking", "wait-drains"])
        raw.update(extra)
        return parse_config(raw)

    def test_outputs(self, tmp_path):
        cfg = self.config(tmp_path, output={
            "report": str(tmp_path / "out" / "r.csv"),
            "jsonl": str(tmp_path / "out" / "r.jsonl"),
            "trace_dir": str(tmp_path / "traces"),
            "db": str(tmp_path / "runs.sqlite"),
        })
        result = run_matrix(cfg)
        assert len(result.records) == 8
        assert len(result.report) == 8
        assert (tmp_path / "out" / "r.csv").read_text().count("\n") == 9
        assert (tmp_path / "traces" / "2-4-rma-lockall-wait-drains-0.trace").exists()
        assert len(list((tmp_path / "traces").iterdir())) == 8
        rows = load_rows(get_engine(str(tmp_path / "runs.sqlite")))
        assert len(rows) == 8
        assert {r.method for r in rows} == {"col", "rma-lockall"}
        assert all(r.data_ok for r in rows)

    def test_deterministic_report(self, tmp_path):
        a = run_matrix(self.config(tmp_path, seed=5)).report.to_csv()
        b = run_matrix(self.config(tmp_path, seed=5)).report.to_csv()
        assert a == b

    def test_workers_give_the_same_report(self, tmp_path):
        serial = run_matrix(self.config(tmp_path))
        parallel = run_matrix(self.config(tmp_path, workers=2))
        assert [r.trace_hash for r in parallel.records] == [r.trace_hash for r in serial.records]
        assert parallel.report.to_csv() == serial.report.to_csv()


class TestCli:
    def test_single_run_with_zero_config(self):
        result = CliRunner().invoke(
            cli, ["run", "--ns", "2", "--nd", "4", "--method", "rma-lockall", "--strategy", "wait-drains", "--n", "1000"]
        )
        assert result.exit_code == 0, result.output
        assert "method,strategy,ns,nd,t_redis,omega,n_it,t_total_bl,t_total_bc" in result.output
        assert "rma-lockall,wait-drains,2,4," in result.output

    def test_ineligible_combination_exits_nonzero(self):
        result = CliRunner().invoke(cli, ["run", "--ns", "2", "--nd", "4", "--method", "rma-lock", "--strategy", "nonblocking"])
        assert result.exit_code == 2
        assert "nonblocking" in result.output

    def test_ns_without_nd(self):
        assert CliRunner().invoke(cli, ["run", "--ns", "2"]).exit_code == 2

    def test_same_config_same_bytes(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump(dict(FAST, ranks=[2, 4], methods=["col"], seed=9)))
        runner = CliRunner()
        for name in ("a.csv", "b.csv"):
            result = runner.invoke(cli, ["run", "--config", str(path), "--out", str(tmp_path / name)])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_validate(self, tmp_path):
        good, bad = tmp_path / "good.yaml", tmp_path / "bad.yaml"
        good.write_text(yaml.safe_dump({"ranks": [2, 4]}))
        bad.write_text(yaml.safe_dump({"ranks": [], "methods": ["rma-lock"], "strategies": ["nonblocking"]}))
        runner = CliRunner()
        assert runner.invoke(cli, ["validate", "--config", str(good)]).exit_code == 0
        result = runner.invoke(cli, ["validate", "--config", str(bad)])
        assert result.exit_code == 2
        assert "ranks" in result.output and "strategies" in result.output

    def test_baseline(self):
        result = CliRunner().invoke(cli, ["baseline", "--p", "2"])
        assert result.exit_code == 0
        assert float(result.output) == pytest.approx(20 * 0.125 + 4 * 1e-4)
