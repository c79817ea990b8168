import csv
import json
from pathlib import Path

import pytest

from fehmm.cli import dispatch
from fehmm.config import ConfigError, load_config, parse_config, resolve_rule
from fehmm.presets import PRESET_NAMES, preset_documents

from conftest import A0_EXAMPLE_1


def base_document(**overrides):
    doc = {
        "problem": {
            "omega": [0.0, 1.0],
            "T": 1.0,
            "epsilon": 1e-3,
            "coefficient": "1/(2 - cos(2*pi*y))",
            "lambda_min": 0.33,
            "lambda_max": 1.0,
            "rhs": "2*t*(x - x^2) + t^2",
            "initial": "0",
            "exact_solution": "t^2*(x - x^2)",
        },
        "macro": {"n_elems": 8, "n_steps": 5, "coefficient_mode": "hmm"},
        "micro": {
            "delta_rule": "eps^(1/3)",
            "sigma_rule": "eps^(2/3)",
            "h": 0.1 / 64,
            "n_cell": 5,
            "degree": 2,
        },
        "output": {"dir": "runs"},
    }
    for section, values in overrides.items():
        doc.setdefault(section, {}).update(values)
    return doc


class TestRules:
    def test_paper_parameter_rules(self):
        assert resolve_rule("eps^(1/3)", 1e-3) == pytest.approx(0.1, rel=1e-15)
        assert resolve_rule("eps^(2/3)", 1e-3) == pytest.approx(0.01, rel=1e-15)
        assert resolve_rule(0.25, 123.0) == 0.25

    def test_bad_rule(self):
        with pytest.raises(ValueError):
            resolve_rule("eps**2", 0.1)


class TestParseConfig:
    def test_resolves_rules_and_theta(self):
        cfg = parse_config(base_document())
        assert cfg.micro.delta == pytest.approx(0.1, rel=1e-15)
        assert cfg.micro.sigma == pytest.approx(0.01, rel=1e-15)
        assert cfg.micro.theta == pytest.approx(cfg.micro.sigma / 5, rel=1e-15)

    def test_H_and_tau_forms(self):
        doc = base_document()
        doc["macro"] = {"H": 0.125, "tau": 0.25, "coefficient_mode": "hmm"}
        cfg = parse_config(doc)
        assert cfg.n_elems == 8 and cfg.n_steps == 4

    def test_negative_epsilon_rejected(self):
        doc = base_document(problem={"epsilon": -1e-3})
        with pytest.raises(ConfigError, match="epsilon"):
            parse_config(doc)

    def test_all_errors_reported_at_once(self):
        doc = base_document(problem={"epsilon": -1.0, "T": "soon"})
        doc["macro"]["n_elems"] = 0
        doc["micro"]["bogus"] = 1
        with pytest.raises(ConfigError) as err:
            parse_config(doc)
        assert len(err.value.problems) >= 4

    def test_unknown_keys_rejected(self):
        doc = base_document()
        doc["problem"]["typo_key"] = 1
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(doc)
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config({**base_document(), "extra": {}})

    def test_fixed_mode_value(self):
        doc = base_document(macro={"coefficient_mode": {"fixed_a0": 0.5}})
        cfg = parse_config(doc)
        assert cfg.mode.kind == "fixed_a0" and cfg.mode.value == 0.5

    def test_run_id_content_hash(self):
        a = parse_config(base_document())
        b = parse_config(base_document())
        c = parse_config(base_document(macro={"n_steps": 6}))
        assert a.run_id == b.run_id and a.run_id != c.run_id

    def test_manifest_round_trips_through_parser(self):
        cfg = parse_config(base_document())
        again = parse_config(json.loads(cfg.manifest_json()))
        assert again.manifest_json() == cfg.manifest_json()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="nonexistent.json"):
            load_config(tmp_path / "nonexistent.json")


class TestPresets:
    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_presets_validate(self, name):
        for doc in preset_documents(name):
            cfg = parse_config(doc)
            assert cfg.run_id

    def test_example_presets_pin_paper_parameters(self):
        cfg = parse_config(preset_documents("paper-example-2")[0])
        assert cfg.epsilon == 1e-3
        assert cfg.n_steps == 15
        assert cfg.micro.theta == pytest.approx(cfg.micro.sigma / 15, rel=1e-15)
        assert str(A0_EXAMPLE_1) in preset_documents("paper-example-1")[0]["problem"]["rhs"]

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            preset_documents("paper-example-3")


class TestDispatch:
    def write_config(self, tmp_path, doc=None) -> str:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc or base_document()))
        return str(path)

    def test_missing_config_exit_1(self, tmp_path, capsys):
        code = dispatch(["homogenize", "--config", str(tmp_path / "absent.json")])
        assert code == 1
        assert "absent.json" in capsys.readouterr().err

    def test_usage_error_exit_1(self, capsys):
        assert dispatch(["homogenize"]) == 1
        assert dispatch(["preset", "nope", "--out", "x"]) == 1

    def test_homogenize_prints_value(self, tmp_path, capsys):
        code = dispatch(["homogenize", "--config", self.write_config(tmp_path)])
        assert code == 0
        assert abs(float(capsys.readouterr().out.strip()) - 0.5) < 1e-6

    def test_numerical_failure_exit_2(self, tmp_path, capsys):
        doc = base_document(
            problem={"coefficient": "3 + cos(2*pi*y) + cos(2*pi*s)^2", "lambda_min": 2.0,
                     "lambda_max": 5.0},
            oracle={"period_tol": 1e-300, "max_periods": 1},
        )
        code = dispatch(["homogenize", "--config", self.write_config(tmp_path, doc)])
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_solve_outputs(self, tmp_path):
        out = tmp_path / "out"
        code = dispatch(
            ["solve", "--config", self.write_config(tmp_path), "--out", str(out)]
        )
        assert code == 0
        rows = list(csv.reader((out / "trajectory.csv").open()))
        assert rows[0] == ["n", "t_n", "node_index", "x", "u"]
        assert len(rows) == 1 + 6 * 9  # (n_steps + 1) * (n_elems + 1)
        summary = json.loads((out / "summary.json").read_text())
        assert "final_errors" in summary
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["micro"]["delta_rule"] == pytest.approx(0.1, rel=1e-15)

    def test_cell_output(self, tmp_path):
        out = tmp_path / "cell"
        code = dispatch(["cell", "--config", self.write_config(tmp_path), "--out", str(out)])
        assert code == 0
        rows = list(csv.reader((out / "cell.csv").open()))
        assert rows[0] == ["k", "s_k", "dof_index", "x", "eta_value"]
        # 6 time levels x (2 * 64 + 1) dofs
        assert len(rows) == 1 + 6 * 129

    def test_trajectory_determinism(self, tmp_path):
        cfg = self.write_config(tmp_path)
        for out in ("d1", "d2"):
            assert dispatch(["solve", "--config", cfg, "--out", str(tmp_path / out)]) == 0
        a = (tmp_path / "d1" / "trajectory.csv").read_bytes()
        b = (tmp_path / "d2" / "trajectory.csv").read_bytes()
        assert a == b

    def test_convergence_and_manifest_round_trip(self, tmp_path):
        doc = base_document()
        doc["sweep"] = {"parameter": "H", "values": [0.25, 0.125, 0.0625]}
        cfg = self.write_config(tmp_path, doc)
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        assert dispatch(["convergence", "--config", cfg, "--out", str(out1)]) == 0
        assert (
            dispatch(
                ["convergence", "--config", str(out1 / "manifest.json"), "--out", str(out2)]
            )
            == 0
        )

        def strip_wall(path: Path):
            rows = list(csv.reader(path.open()))
            idx = rows[0].index("wall_ms")
            return [[c for i, c in enumerate(r) if i != idx] for r in rows]

        # byte-identical except the wall-clock column
        assert strip_wall(out1 / "convergence.csv") == strip_wall(out2 / "convergence.csv")
        report = json.loads((out1 / "report.json").read_text())
        assert "err_l2" in report["fits"]

    def test_fine_subcommand(self, tmp_path):
        doc = base_document(problem={"epsilon": 0.05}, macro={"n_elems": 16, "n_steps": 8})
        out = tmp_path / "fine"
        code = dispatch(["fine", "--config", self.write_config(tmp_path, doc), "--out", str(out)])
        assert code == 0
        assert (out / "trajectory.csv").exists()

    def test_ehmm_prints_value(self, tmp_path, capsys):
        doc = base_document(macro={"n_elems": 4, "n_steps": 2})
        code = dispatch(["ehmm", "--config", self.write_config(tmp_path, doc)])
        assert code == 0
        # delta/h = 64 leaves the cell under-resolved (h/eps = 1.56), so the
        # micro error is visibly large but still bounded by the coefficient range
        value = float(capsys.readouterr().out.strip())
        assert 0 <= value < 0.5
