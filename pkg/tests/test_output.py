import csv
from dataclasses import replace
from pathlib import Path

from dppstream.config import (
    ChannelConfig,
    ExperimentSpec,
    SimConfig,
    TopologyConfig,
    VideoConfig,
    spec_from_manifest,
)
from dppstream.control import DppConfig
from dppstream.engine import MetricsLog
from dppstream.output import (
    ASSOCIATION_HEADER,
    CDF_HEADER,
    SLOT_TRACE_HEADER,
    USERS_HEADER,
    emit_quality_cdf,
    fmt,
    run_dir_name,
    run_experiment,
)


def small_spec(tmp_path, **kwargs):
    sim = SimConfig(
        topology=TopologyConfig(area_side=160, cells_per_side=2, users_per_cell=2),
        channel=ChannelConfig(capacity_samples=300),
        video=VideoConfig(chunks=40, segments=((40, 4, 150_000),)),
        control=DppConfig(v=1e12),
        slots=40,
        seed=9,
    )
    defaults = dict(
        sim=sim,
        v_sweep=(1e12,),
        out_dir=str(tmp_path / "out"),
        slot_trace=False,
        figures=False,
    )
    defaults.update(kwargs)
    return ExperimentSpec(**defaults)


def fake_log(avgs):
    """A MetricsLog where user u delivered one chunk of quality avgs[u]."""
    log = MetricsLog(
        num_helpers=1, num_users=len(avgs), slots=1, v=1.0, utility="log"
    )
    for u, q in enumerate(avgs):
        log.admitted_quality.append([q])
        log.delivered.append([(0, 0)] if q is not None else [])
    return log


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestFormatting:
    def test_fmt_rules(self):
        assert fmt(None) == ""
        assert fmt(12345) == "12345"
        assert fmt(0.925) == "0.925"
        assert fmt(0.12345678) == "0.123457"
        assert fmt(1.23e12) == "1.23e+12"

    def test_fmt_idempotent_roundtrip(self):
        for value in (0.88, 0.99817, 1 / 3, 2e12, 123.456789):
            text = fmt(value)
            assert fmt(float(text)) == text

    def test_run_dir_name(self):
        assert run_dir_name(0, 2e12) == "run00_v2e12"
        assert run_dir_name(3, 1e13) == "run03_v1e13"


class TestQualityCdf:
    def test_sorted_with_ranks(self):
        rows = emit_quality_cdf(fake_log([0.9, 0.8]))
        assert rows == [(1, 0.8), (2, 0.9)]

    def test_identical_users_one_value(self):
        rows = emit_quality_cdf(fake_log([0.9, 0.9, 0.9]))
        assert [q for _, q in rows] == [0.9, 0.9, 0.9]
        assert [r for r, _ in rows] == [1, 2, 3]

    def test_users_without_deliveries_excluded(self):
        rows = emit_quality_cdf(fake_log([0.9, None, 0.8]))
        assert len(rows) == 2


class TestRunExperiment:
    def test_single_trivial_run(self, tmp_path):
        sim = SimConfig(
            topology=TopologyConfig(area_side=80, cells_per_side=1, users_per_cell=1),
            channel=ChannelConfig(capacity_samples=100),
            video=VideoConfig(chunks=5, segments=((5, 2, 50_000),)),
            control=DppConfig(v=1e12),
            slots=1,
            seed=1,
        )
        spec = small_spec(tmp_path, sim=sim)
        bundle = run_experiment(spec)
        assert len(bundle.runs) == 1
        summary = read_csv(bundle.runs[0].files["users_summary"])
        assert summary[0] == list(USERS_HEADER)
        assert len(summary) == 2  # header + one user

    def test_sweep_makes_five_directories(self, tmp_path):
        spec = small_spec(tmp_path, v_sweep=(1e11, 2e11, 4e11, 8e11, 1.6e12))
        bundle = run_experiment(spec)
        assert len(bundle.runs) == 5
        for outputs in bundle.runs:
            assert (outputs.directory / "users_summary.csv").is_file()
            assert (outputs.directory / "quality_cdf.csv").is_file()
            assert not (outputs.directory / "INCOMPLETE").exists()

    def test_association_trace_lists_all_chunks(self, tmp_path):
        spec = small_spec(tmp_path)
        bundle = run_experiment(spec)
        rows = read_csv(bundle.runs[0].files["association_trace"])
        assert rows[0] == list(ASSOCIATION_HEADER)
        assert len(rows) - 1 == spec.sim.slots
        chunks = [int(r[0]) for r in rows[1:]]
        assert chunks == list(range(spec.sim.slots))
        assert all(int(r[1]) >= 0 for r in rows[1:])

    def test_slot_trace_emitted_when_enabled(self, tmp_path):
        spec = small_spec(tmp_path, slot_trace=True)
        bundle = run_experiment(spec)
        rows = read_csv(bundle.runs[0].files["slot_trace"])
        assert rows[0] == list(SLOT_TRACE_HEADER)
        assert len(rows) > 1
        # edge column matches helper and user columns
        for r in rows[1:5]:
            assert r[1] == f"{r[2]}-{r[3]}"

    def test_cdf_csv_parses_back(self, tmp_path):
        spec = small_spec(tmp_path)
        bundle = run_experiment(spec)
        rows = read_csv(bundle.runs[0].files["quality_cdf"])
        assert rows[0] == list(CDF_HEADER)
        qualities = [float(r[1]) for r in rows[1:]]
        assert qualities == sorted(qualities)


class TestReproducibility:
    def test_same_seed_byte_identical(self, tmp_path):
        spec_a = small_spec(tmp_path / "a")
        spec_b = small_spec(tmp_path / "b")
        run_experiment(spec_a)
        run_experiment(spec_b)
        for name in ("users_summary.csv", "quality_cdf.csv", "association_trace.csv"):
            a = (Path(spec_a.out_dir) / "run00_v1e12" / name).read_bytes()
            b = (Path(spec_b.out_dir) / "run00_v1e12" / name).read_bytes()
            assert a == b, name

    def test_manifest_regenerates_identical_csvs(self, tmp_path):
        spec = small_spec(tmp_path / "orig", slot_trace=True)
        bundle = run_experiment(spec)
        run_dir = bundle.runs[0].directory
        manifest = run_dir / "run_manifest.json"
        replay = spec_from_manifest(manifest)
        replay = replace(replay, out_dir=str(tmp_path / "replay"))
        run_experiment(replay)
        for name in (
            "users_summary.csv",
            "quality_cdf.csv",
            "association_trace.csv",
            "slot_trace.csv",
        ):
            a = (run_dir / name).read_bytes()
            b = (tmp_path / "replay" / "run00_v1e12" / name).read_bytes()
            assert a == b, name


class TestFigures:
    def test_figures_rendered_when_enabled(self, tmp_path):
        spec = small_spec(tmp_path, figures=True, v_sweep=(1e12, 2e12))
        bundle = run_experiment(spec)
        for outputs in bundle.runs:
            for key in ("quality_cdf_png", "backlog_png", "association_png", "playback_png"):
                path = outputs.files[key]
                assert path.is_file() and path.stat().st_size > 0
        sweep_png = Path(spec.out_dir) / "quality_cdf_sweep.png"
        assert sweep_png.is_file() and sweep_png.stat().st_size > 0
