import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fecampaign.campaign import CampaignMode, SweepRung
from fecampaign.config import (
    CampaignConfig,
    SweepPlan,
    config_from_dict,
    config_to_dict,
    curve_from_dict,
    load_config,
    protocol_from_dict,
    protocol_to_dict,
    save_config,
)
from fecampaign.engine import PilotConfig
from fecampaign.errors import ValidationError
from fecampaign.protocols import (
    AdaptiveConfig,
    LambdaSchedule,
    ProtocolKind,
    ScheduleMode,
    esmacs_protocol,
    ties_protocol,
)
from fecampaign.synth import GroundTruthCurve, NoiseModel, SyntheticSystem, named_systems

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def full_config():
    systems = tuple(
        SyntheticSystem(label, curve, NoiseModel(sigma=0.4, ar1_phi=0.5))
        for label, curve in [
            ("c", GroundTruthCurve.constant(2.0)),
            ("l", GroundTruthCurve.linear(1.0, -1.0)),
            ("q", GroundTruthCurve.quadratic()),
            ("g", GroundTruthCurve.gauss_bump(0.3, 0.05, 10.0, 1.0)),
            ("r", GroundTruthCurve.rational(0.7, 0.1, -5.0, 0.0)),
        ]
    )
    protocols = (
        ties_protocol(name="t", physical_system="pair"),
        ties_protocol(name="ta", physical_system="pair", adaptive=AdaptiveConfig()),
        esmacs_protocol(name="e", physical_system="pair"),
    )
    sweep = SweepPlan(
        kind="STRONG", protocol_kind=ProtocolKind.TIES, physical_system="pair",
        rungs=(SweepRung(8, 16_640), SweepRung(8, 8_320)), replicas=7,
    )
    return CampaignConfig(
        seed=9, mode=CampaignMode.ADAPTIVE_TERMINATION, output_dir="elsewhere",
        pilot=PilotConfig(total_cores=4_160, concurrency_cap=200),
        adaptive=AdaptiveConfig(error_threshold_epsilon=0.3),
        systems=systems, protocols=protocols, sweep=sweep,
        replicas_per_window=3, sample_interval_ps=2.0, discard_fraction=0.2,
        reproducibility_threshold=0.5, schedule_mode=ScheduleMode.SCALING,
    )


def test_round_trip_identity_default_config():
    cfg = CampaignConfig()
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_round_trip_identity_full_config():
    cfg = full_config()
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_round_trip_survives_json_text(tmp_path):
    cfg = full_config()
    path = tmp_path / "c.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_saved_config_is_byte_stable(tmp_path):
    cfg = full_config()
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    save_config(cfg, first)
    save_config(load_config(first), second)
    assert first.read_bytes() == second.read_bytes()


finite = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)

curve_st = st.one_of(
    st.builds(GroundTruthCurve.constant, finite),
    st.builds(GroundTruthCurve.linear, finite, finite),
    st.just(GroundTruthCurve.quadratic()),
    st.builds(
        GroundTruthCurve.gauss_bump,
        center=st.floats(0.0, 1.0), width=st.floats(0.01, 0.5),
        amplitude=finite, baseline_slope=finite,
    ),
    st.builds(
        GroundTruthCurve.rational,
        center=st.floats(0.0, 1.0), width=st.floats(0.01, 0.5),
        amplitude=finite, baseline_slope=finite,
    ),
)

system_st = st.builds(
    SyntheticSystem,
    label=st.text(min_size=1, max_size=20),
    curve=curve_st,
    noise=st.builds(
        NoiseModel,
        sigma=st.floats(0.0, 5.0),
        ar1_phi=st.floats(0.0, 0.99),
        drift_amplitude=st.floats(-5.0, 5.0),
        drift_timescale_ps=st.floats(1.0, 1000.0),
    ),
)

config_st = st.builds(
    CampaignConfig,
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    mode=st.sampled_from(CampaignMode),
    output_dir=st.just("out"),
    pilot=st.builds(
        PilotConfig,
        total_cores=st.integers(min_value=32, max_value=100_000),
        failure_probability_over_cap=st.floats(0.0, 1.0),
    ),
    adaptive=st.builds(
        AdaptiveConfig,
        error_threshold_epsilon=st.floats(min_value=1e-6, max_value=10.0),
        production_substages=st.integers(min_value=1, max_value=16),
    ),
    systems=st.lists(system_st, max_size=3, unique_by=lambda s: s.label).map(tuple),
    replicas_per_window=st.integers(min_value=1, max_value=25),
    sample_interval_ps=st.floats(min_value=0.1, max_value=10.0),
    discard_fraction=st.floats(min_value=0.0, max_value=0.9),
    schedule_mode=st.sampled_from(ScheduleMode),
)


@given(config_st)
def test_round_trip_identity_property(cfg):
    assert config_from_dict(config_to_dict(cfg)) == cfg


@pytest.mark.parametrize(
    "spec",
    [
        ties_protocol(name="t", physical_system="pair"),
        ties_protocol(name="ta", physical_system="pair", adaptive=AdaptiveConfig()),
        esmacs_protocol(name="e", physical_system="pair"),
    ],
    ids=["ties", "ties-adaptive", "esmacs"],
)
def test_protocol_round_trip(spec):
    assert protocol_from_dict(protocol_to_dict(spec)) == spec


def test_system_lookup_by_label():
    cfg = full_config()
    assert cfg.system("q").curve == GroundTruthCurve.quadratic()
    with pytest.raises(ValidationError):
        cfg.system("missing")


def test_sweep_plan_validation():
    with pytest.raises(ValidationError):
        SweepPlan("SIDEWAYS", ProtocolKind.TIES, "x", (SweepRung(1, 64),))
    with pytest.raises(ValidationError):
        SweepPlan("WEAK", ProtocolKind.TIES, "x", ())


def test_campaign_config_validation():
    with pytest.raises(ValidationError):
        CampaignConfig(discard_fraction=1.0)
    with pytest.raises(ValidationError):
        CampaignConfig(replicas_per_window=0)
    with pytest.raises(ValidationError):
        CampaignConfig(sample_interval_ps=0.0)


def test_load_config_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ValidationError, match="nope.json"):
        load_config(missing)


def test_load_config_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_config(path)


def test_load_config_top_level_must_be_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    with pytest.raises(ValidationError, match="JSON object"):
        load_config(path)


def test_unknown_top_level_key_is_named():
    with pytest.raises(ValidationError, match="bogus"):
        config_from_dict({"bogus": 1})


def test_bad_nested_field_is_located():
    obj = config_to_dict(CampaignConfig())
    obj["pilot"]["total_cores"] = 16
    with pytest.raises(ValidationError, match=r"config\.pilot"):
        config_from_dict(obj)


def test_bad_mode_value_is_located():
    with pytest.raises(ValidationError, match=r"config\.mode"):
        config_from_dict({"mode": "SIDEWAYS"})


def test_bad_initial_lambdas_are_located():
    obj = config_to_dict(CampaignConfig())
    obj["adaptive"]["initial_lambdas"] = [0.5]
    with pytest.raises(ValidationError, match=r"config\.adaptive"):
        config_from_dict(obj)


def test_curve_rejects_keys_foreign_to_preset():
    with pytest.raises(ValidationError, match="unknown keys"):
        curve_from_dict({"preset": "GAUSS_BUMP", "value": 3.0})
    with pytest.raises(ValidationError, match="preset"):
        curve_from_dict({"preset": "WIGGLE"})


def test_bad_system_entry_is_indexed():
    obj = config_to_dict(full_config())
    del obj["systems"][1]["label"]
    with pytest.raises(ValidationError, match=r"systems\[1\]"):
        config_from_dict(obj)


def test_bundled_configs_load():
    paths = sorted(CONFIG_DIR.glob("*.json"))
    assert paths, "bundled configs missing"
    for path in paths:
        cfg = load_config(path)
        assert isinstance(cfg, CampaignConfig)


def test_bundled_compare_config_carries_benchmark_systems():
    cfg = load_config(CONFIG_DIR / "compare.json")
    assert cfg.seed == 42
    assert {s.label: s for s in cfg.systems} == named_systems()


def test_bundled_sweep_configs_have_plans():
    weak = load_config(CONFIG_DIR / "sweep_weak_ties.json")
    assert weak.sweep is not None
    assert weak.sweep.kind == "WEAK"
    assert [(r.n_protocols, r.total_cores) for r in weak.sweep.rungs] == [
        (2, 4_160), (4, 8_320), (8, 16_640),
    ]
    strong = load_config(CONFIG_DIR / "sweep_strong_ties.json")
    assert strong.sweep is not None and strong.sweep.kind == "STRONG"


def test_bundled_configs_are_byte_stable(tmp_path):
    for path in sorted(CONFIG_DIR.glob("*.json")):
        out = tmp_path / path.name
        save_config(load_config(path), out)
        assert out.read_bytes() == path.read_bytes(), path.name
