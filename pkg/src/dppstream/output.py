"""CSV emission, run manifests, and sweep execution.

Qualities and other floats are written with 6 significant digits and bit
counts as plain integers, so re-parsing a CSV reproduces its values exactly
and repeated runs with the same seed produce byte-identical bundles.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import engine
from .config import ExperimentSpec, single_run_spec, spec_to_dict

USERS_HEADER = ("user", "avg_quality", "utility", "stall_slots", "skipped", "prebuffer_slots")
CDF_HEADER = ("user_rank", "avg_quality")
ASSOCIATION_HEADER = ("chunk", "helper")
SLOT_TRACE_HEADER = (
    "t", "edge", "helper", "user", "backlog_bits", "served_bits",
    "admitted_bits", "mode", "gamma", "theta",
)


def fmt(value) -> str:
    """Fixed CSV formatting: blank for absent, %d for ints, %.6g for floats."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


@dataclass
class RunOutputs:
    v: float
    directory: Path
    files: dict = field(default_factory=dict)


@dataclass
class OutputBundle:
    out_dir: Path
    runs: list = field(default_factory=list)


def emit_quality_cdf(log: engine.MetricsLog) -> list[tuple[int, float]]:
    """Empirical CDF rows (rank, avg_quality), ascending; rank/N is the CDF
    ordinate. Users with no delivered chunks are left out."""
    values = sorted(
        s.avg_quality for s in engine.summarize(log) if s.avg_quality is not None
    )
    return [(rank, q) for rank, q in enumerate(values, start=1)]


def write_users_summary(path, summaries) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(USERS_HEADER)
        for s in summaries:
            writer.writerow(
                [
                    s.user,
                    fmt(s.avg_quality),
                    fmt(s.utility),
                    s.stall_slots,
                    s.skipped,
                    s.prebuffer_slots,
                ]
            )


def write_quality_cdf(path, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CDF_HEADER)
        for rank, quality in rows:
            writer.writerow([rank, fmt(quality)])


def write_association(path, log: engine.MetricsLog, user: int) -> None:
    """Per-chunk serving helper for one user; -1 marks a deferred request."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(ASSOCIATION_HEADER)
        for chunk, helper in enumerate(log.admitted_helper[user]):
            writer.writerow([chunk, helper])


def write_slot_trace(path, log: engine.MetricsLog) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SLOT_TRACE_HEADER)
        for (t, h, u, backlog, served, admitted, mode, gamma, theta) in log.edge_rows:
            writer.writerow(
                [
                    t,
                    f"{h}-{u}",
                    h,
                    u,
                    backlog,
                    served,
                    admitted,
                    mode if mode else "",
                    fmt(gamma),
                    fmt(theta),
                ]
            )


def write_manifest(path, spec: ExperimentSpec) -> None:
    """Everything needed to regenerate the run's CSVs byte for byte."""
    try:
        version = metadata.version("dppstream")
    except metadata.PackageNotFoundError:
        version = "unpackaged"
    manifest = {
        "package": {"dppstream": version, "numpy": np.__version__},
        "spec": spec_to_dict(spec),
    }
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def pick_association_user(spec: ExperimentSpec) -> int | None:
    if spec.association_user is not None:
        return spec.association_user
    if spec.sim.mobility is not None:
        return spec.sim.mobility.user
    num_users = spec.sim.topology.cells_per_side ** 2 * spec.sim.topology.users_per_cell
    return 0 if num_users > 0 else None


def run_dir_name(index: int, v: float) -> str:
    return f"run{index:02d}_v{v:.3g}".replace("+", "")


def execute_run(spec: ExperimentSpec, run_dir: Path) -> tuple[engine.MetricsLog, RunOutputs]:
    """Run a single-V spec and emit its bundle under run_dir.

    Any I/O failure leaves an INCOMPLETE marker behind so partial outputs are
    never mistaken for a finished run.
    """
    run_dir.mkdir(parents=True, exist_ok=True)
    marker = run_dir / "INCOMPLETE"
    marker.write_text("run in progress\n")
    outputs = RunOutputs(v=spec.sim.control.v, directory=run_dir)
    log = engine.run(spec.sim)
    summaries = engine.summarize(log)

    paths = {
        "users_summary": run_dir / "users_summary.csv",
        "quality_cdf": run_dir / "quality_cdf.csv",
        "run_manifest": run_dir / "run_manifest.json",
    }
    write_users_summary(paths["users_summary"], summaries)
    write_quality_cdf(paths["quality_cdf"], emit_quality_cdf(log))
    assoc_user = pick_association_user(spec)
    if assoc_user is not None:
        paths["association_trace"] = run_dir / "association_trace.csv"
        write_association(paths["association_trace"], log, assoc_user)
    if spec.slot_trace:
        paths["slot_trace"] = run_dir / "slot_trace.csv"
        write_slot_trace(paths["slot_trace"], log)
    write_manifest(paths["run_manifest"], spec)

    if spec.figures:
        from . import report

        paths.update(report.render_run(run_dir, log, summaries, assoc_user))

    outputs.files = paths
    marker.unlink()
    return log, outputs


def run_experiment(spec: ExperimentSpec) -> OutputBundle:
    """One run per sweep value, each in its own subdirectory."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = OutputBundle(out_dir=out_dir)
    cdf_by_v = {}
    for index, v in enumerate(spec.v_sweep):
        run_spec = single_run_spec(spec, v)
        run_spec = _with_edge_trace(run_spec, spec.slot_trace)
        run_dir = out_dir / run_dir_name(index, v)
        log, outputs = execute_run(run_spec, run_dir)
        cdf_by_v[v] = emit_quality_cdf(log)
        bundle.runs.append(outputs)
    if spec.figures and len(spec.v_sweep) > 1:
        from . import report

        report.render_sweep_cdf(out_dir / "quality_cdf_sweep.png", cdf_by_v)
    return bundle


def _with_edge_trace(spec: ExperimentSpec, enabled: bool) -> ExperimentSpec:
    from dataclasses import replace

    return replace(spec, sim=replace(spec.sim, collect_edge_trace=enabled))
