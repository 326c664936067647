import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from fecampaign.campaign import CampaignMode
from fecampaign.cli import main
from fecampaign.config import CampaignConfig, SweepPlan, save_config
from fecampaign.engine import PilotConfig
from fecampaign.campaign import SweepRung
from fecampaign.protocols import AdaptiveConfig, ProtocolKind, ScheduleMode
from fecampaign.reports import validation_csv
from fecampaign.synth import ZERO_NOISE, GroundTruthCurve, NoiseModel, SyntheticSystem

QUIET = SyntheticSystem("Quiet Pair", GroundTruthCurve.linear(1.0, 2.0), ZERO_NOISE)
NOISY = SyntheticSystem("Noisy Pair", GroundTruthCurve.linear(1.0, 2.0), NoiseModel(sigma=1.0, ar1_phi=0.5))


def write_config(tmp_path, name="config.json", **overrides):
    defaults = dict(
        seed=5,
        mode=CampaignMode.NONADAPTIVE,
        output_dir=str(tmp_path / "out"),
        pilot=PilotConfig(total_cores=2_080),
        adaptive=AdaptiveConfig(error_threshold_epsilon=0.05, substage_timesteps=50_000),
        systems=(QUIET,),
        replicas_per_window=2,
        schedule_mode=ScheduleMode.SCALING,
    )
    defaults.update(overrides)
    path = tmp_path / name
    save_config(CampaignConfig(**defaults), path)
    return path


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_validate_writes_table_and_csv(tmp_path):
    out = tmp_path / "v"
    result = invoke("validate", "--out", out)
    assert result.exit_code == 0
    assert result.output.count("yes") == 3
    assert (out / "validation.csv").read_text() == validation_csv()


def test_run_nonadaptive_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    result = invoke("run", "--config", cfg_path)
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    payload = json.loads((out / "quiet-pair_nonadaptive.json").read_text())
    assert payload["system"] == "Quiet Pair"
    assert payload["mode"] == "NONADAPTIVE"
    assert payload["n_windows"] == 13
    assert payload["n_replica_members"] == 26
    assert payload["delta_g"] == pytest.approx(2.0, abs=1e-9)
    assert payload["terminated_ns"] is None
    assert (out / "quiet-pair_nonadaptive_timeline.csv").exists()
    header = (out / "overheads.csv").read_text().splitlines()[0]
    assert header.startswith("run_id,system,mode,n_protocols,total_cores,")
    assert "Quiet Pair: dG=2.0000" in result.output


def test_run_mode_override(tmp_path):
    cfg_path = write_config(tmp_path)
    result = invoke("run", "--config", cfg_path, "--mode", "ADAPTIVE_QUADRATURE")
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "out" / "quiet-pair_adaptive_quadrature.json").read_text())
    assert payload["windows"] == [0.0, 0.5, 1.0]
    assert payload["simulated_ns"] == pytest.approx(0.4)


def test_run_rejects_unknown_mode(tmp_path):
    cfg_path = write_config(tmp_path)
    result = invoke("run", "--config", cfg_path, "--mode", "SIDEWAYS")
    assert result.exit_code == 2


def test_run_seed_override_changes_noisy_estimate(tmp_path):
    cfg_path = write_config(tmp_path, systems=(NOISY,))
    a = invoke("run", "--config", cfg_path, "--out", tmp_path / "a")
    b = invoke("run", "--config", cfg_path, "--out", tmp_path / "b", "--seed", "9")
    assert a.exit_code == 0 and b.exit_code == 0
    dg_a = json.loads((tmp_path / "a" / "noisy-pair_nonadaptive.json").read_text())["delta_g"]
    dg_b = json.loads((tmp_path / "b" / "noisy-pair_nonadaptive.json").read_text())["delta_g"]
    assert dg_a != dg_b


def test_rerun_is_byte_identical(tmp_path):
    cfg_path = write_config(tmp_path, systems=(NOISY,))
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert invoke("run", "--config", cfg_path, "--out", first).exit_code == 0
    assert invoke("run", "--config", cfg_path, "--out", second).exit_code == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_missing_config_file_is_a_config_error(tmp_path):
    result = invoke("run", "--config", tmp_path / "absent.json")
    assert result.exit_code == 2
    assert "error:" in result.stderr


def test_invalid_config_field_is_named_on_stderr(tmp_path):
    cfg_path = write_config(tmp_path)
    obj = json.loads(cfg_path.read_text())
    obj["pilot"]["total_cores"] = 16
    cfg_path.write_text(json.dumps(obj))
    result = invoke("run", "--config", cfg_path)
    assert result.exit_code == 2
    assert "config.pilot" in result.stderr


def test_run_without_systems_is_a_config_error(tmp_path):
    cfg_path = write_config(tmp_path, systems=())
    result = invoke("run", "--config", cfg_path)
    assert result.exit_code == 2
    assert "config.systems" in result.stderr


def test_walltime_exhaustion_maps_to_exit_3(tmp_path):
    cfg_path = write_config(tmp_path, pilot=PilotConfig(total_cores=2_080, walltime_s=1.0))
    result = invoke("run", "--config", cfg_path)
    assert result.exit_code == 3
    assert "walltime" in result.stderr


def test_sweep_requires_plan(tmp_path):
    cfg_path = write_config(tmp_path)
    result = invoke("sweep", "--config", cfg_path)
    assert result.exit_code == 2
    assert "config.sweep" in result.stderr


def test_sweep_writes_ladder_csv(tmp_path):
    plan = SweepPlan(
        kind="WEAK", protocol_kind=ProtocolKind.TIES, physical_system="demo pair",
        rungs=(SweepRung(2, 4_160), SweepRung(4, 8_320)),
    )
    cfg_path = write_config(tmp_path, sweep=plan)
    result = invoke("sweep", "--config", cfg_path)
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "out" / "sweep_weak.csv").read_text().splitlines()
    assert lines[0] == "run_id,n_protocols,total_cores,ttx_s,framework_s,runtime_s,launch_s,ttc_s"
    assert len(lines) == 3
    assert lines[1].startswith("weak-0-P2-C4160,2,4160,")
    assert "run_id" in result.output


def test_term_report_outputs(tmp_path):
    constant = SyntheticSystem("Settled Pair", GroundTruthCurve.constant(2.0), ZERO_NOISE)
    cfg_path = write_config(tmp_path, systems=(constant,), adaptive=AdaptiveConfig())
    result = invoke("term-report", "--config", cfg_path)
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "out" / "termination.csv").read_text().splitlines()
    assert lines[0] == "system,nonadaptive_ns,adaptive_ns,decrease_pct"
    assert lines[1] == "Settled Pair,6.000,1.000,83.333"
    assert "Settled Pair" in result.output


def test_compare_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    result = invoke("compare", "--config", cfg_path)
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "out" / "comparison.csv").read_text().splitlines()
    assert lines[0].startswith("system,ref_ddg,")
    assert lines[1].startswith("Quiet Pair,")
    # a perfectly linear quiet system needs no refinement and reports the
    # degenerate-accuracy footnote
    assert lines[1].split(",")[6] == "3"
    assert lines[1].endswith("*")
    assert "cost model" in result.output
