from pathlib import Path

import pytest

from dppstream.config import (
    ConfigError,
    ExperimentSpec,
    parse_config,
    single_run_spec,
    spec_from_dict,
    spec_to_dict,
)

REPO_CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParse:
    def test_shipped_paper_config(self):
        spec = parse_config(REPO_CONFIGS / "paper_grid.ini")
        topo = spec.sim.topology
        assert topo.cells_per_side**2 == 25
        assert topo.cells_per_side**2 * topo.users_per_cell == 50
        assert len(spec.v_sweep) == 5
        assert spec.v_sweep == (2e12, 4e12, 6e12, 8e12, 1e13)
        assert spec.sim.slots == 1000

    def test_shipped_mobile_config(self):
        spec = parse_config(REPO_CONFIGS / "mobile.ini")
        assert spec.sim.mobility is not None
        assert spec.sim.mobility.waypoints[0] == (40.0, 40.0, 0.0)
        assert spec.sim.control.v == 1e13

    def test_empty_file_is_all_defaults(self, tmp_path):
        spec = parse_config(write(tmp_path, ""))
        assert spec == ExperimentSpec()

    def test_missing_file_names_path(self, tmp_path):
        missing = tmp_path / "nope.ini"
        with pytest.raises(ConfigError, match="nope.ini"):
            parse_config(missing)

    def test_override_slots(self, tmp_path):
        path = write(tmp_path, "[sim]\nslots = 1000\n")
        spec = parse_config(path, {"slots": "10"})
        assert spec.sim.slots == 10

    def test_override_v_and_out(self, tmp_path):
        path = write(tmp_path, "")
        spec = parse_config(path, {"v": "1e11,2e11", "out": "elsewhere", "trace": "on"})
        assert spec.v_sweep == (1e11, 2e11)
        assert spec.out_dir == "elsewhere"
        assert spec.slot_trace is True

    def test_unknown_key_and_section_both_reported(self, tmp_path):
        path = write(tmp_path, "[sim]\nwarp = 9\n\n[holodeck]\nenabled = on\n")
        with pytest.raises(ConfigError) as info:
            parse_config(path)
        text = "\n".join(info.value.errors)
        assert "warp" in text and "holodeck" in text

    def test_all_failures_listed_at_once(self, tmp_path):
        path = write(
            tmp_path,
            "[sim]\nslots = 0\n\n[topology]\narea_side_m = -1\n\n[control]\nv = -2\n",
        )
        with pytest.raises(ConfigError) as info:
            parse_config(path)
        assert len(info.value.errors) >= 3

    def test_bad_waypoints(self, tmp_path):
        path = write(tmp_path, "[mobility]\nuser = 0\nwaypoints = 40:40:10, 50:40:5\n")
        with pytest.raises(ConfigError, match="increasing"):
            parse_config(path)

    def test_mobility_needs_waypoints(self, tmp_path):
        path = write(tmp_path, "[mobility]\nuser = 0\n")
        with pytest.raises(ConfigError, match="waypoints"):
            parse_config(path)

    def test_trace_source_requires_existing_file(self, tmp_path):
        path = write(tmp_path, "[video]\nsource = trace\ntrace_path = gone.csv\n")
        with pytest.raises(ConfigError, match="gone.csv"):
            parse_config(path)

    def test_segments_must_sum(self, tmp_path):
        path = write(tmp_path, "[video]\nchunks = 10\nsegments = 4:2:100\n")
        with pytest.raises(ConfigError, match="sum"):
            parse_config(path)

    def test_bad_boolean(self, tmp_path):
        path = write(tmp_path, "[experiment]\nslot_trace = maybe\n")
        with pytest.raises(ConfigError, match="on/off"):
            parse_config(path)

    def test_empty_sweep_rejected(self, tmp_path):
        path = write(tmp_path, "")
        with pytest.raises(ConfigError, match="v"):
            parse_config(path, {"v": " "})

    def test_negative_sweep_value_rejected(self, tmp_path):
        path = write(tmp_path, "")
        with pytest.raises(ConfigError, match="positive"):
            parse_config(path, {"v": "1e12,-2e12"})


class TestRoundTrip:
    def test_spec_dict_roundtrip(self):
        spec = parse_config(REPO_CONFIGS / "mobile.ini")
        assert spec_from_dict(spec_to_dict(spec)) == spec

    def test_single_run_spec(self):
        spec = parse_config(REPO_CONFIGS / "paper_grid.ini")
        one = single_run_spec(spec, 4e12)
        assert one.v_sweep == (4e12,)
        assert one.sim.control.v == 4e12
