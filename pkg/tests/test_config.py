import pytest
import yaml

from coexsim.config import (
    ConfigError,
    apply_overrides,
    build_coverage_spec,
    build_scenario,
    load_config,
)


class TestLoadConfig:
    def test_preset_by_name(self):
        cfg = load_config("figure4_coexistence")
        assert cfg["nodes"][0]["id"] == "ap1"

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/no/such/file.yaml")

    def test_path_load(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("seed: 3\nnodes: []\n")
        assert load_config(str(p))["seed"] == 3


class TestOverrides:
    def test_nested_override(self):
        cfg = {"simulate": {"duration_s": 1.0}}
        apply_overrides(cfg, ["simulate.duration_s=5.5"])
        assert cfg["simulate"]["duration_s"] == 5.5

    def test_values_parse_as_yaml(self):
        cfg = {}
        apply_overrides(cfg, ["a.flag=true", "a.items=[1,2]"])
        assert cfg["a"]["flag"] is True
        assert cfg["a"]["items"] == [1, 2]

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_overrides({}, ["oops"])


class TestStrictKeys:
    def test_unknown_top_level_key(self):
        cfg = load_config("figure3_collision")
        cfg["simulatr"] = {}
        with pytest.raises(ConfigError, match="simulatr"):
            build_scenario(cfg)

    def test_unknown_section_key_named_exactly(self):
        cfg = load_config("figure3_collision")
        cfg["lte_mac"]["burst_msec"] = 4
        with pytest.raises(ConfigError, match="lte_mac.burst_msec"):
            build_scenario(cfg)

    def test_unknown_coverage_key(self):
        cfg = load_config("table1_inh")
        cfg["coverage"]["sample_count"] = 10
        with pytest.raises(ConfigError, match="coverage.sample_count"):
            build_coverage_spec(cfg)


class TestScenarioAssembly:
    def test_presets_build(self):
        for preset in ("figure3_collision", "figure4_coexistence"):
            scenario = build_scenario(load_config(preset))
            assert scenario.nodes
            assert scenario.link_gains

    def test_generated_clients(self, tmp_path):
        cfg = {
            "seed": 5,
            "nodes": [
                {"id": "ap1", "kind": "wifi_ap", "position": [10.0, 10.0]},
                {"id": "enb1", "kind": "lte_enb", "position": [40.0, 100.0]},
            ],
            "clients": {"mode": "fixed", "per_base": 1},
        }
        scenario = build_scenario(cfg)
        assert len(scenario.nodes) == 4
        generated = [n for n in scenario.nodes if n.attach_to]
        assert {n.attach_to for n in generated} == {"ap1", "enb1"}

    def test_symmetric_link_gains(self):
        scenario = build_scenario(load_config("figure4_coexistence"))
        assert scenario.link_gains[("ap1", "enb1")] == -101.8
