"""Per-chunk quality-rate profiles: trace ingest, synthetic VBR, cyclic serving.

Chunk sizes are stored directly in bits (trace files carry kbits and are
converted at ingest). Quality scores are SSIM-like values in (0, 1].
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

TRACE_HEADER = ("chunk", "mode", "size_kbits", "ssim")


class TraceError(ValueError):
    """Malformed trace file; message names the offending line."""


@dataclass(frozen=True)
class QualityMode:
    size_bits: int
    quality: float

    def __post_init__(self):
        if self.size_bits <= 0:
            raise ValueError("mode size must be positive")
        if not 0.0 < self.quality <= 1.0:
            raise ValueError("quality must lie in (0, 1]")


@dataclass(frozen=True)
class ChunkProfile:
    """Modes sorted by size; sizes strictly increasing, qualities
    non-decreasing. Dominated modes (bigger but worse) are rejected because
    they can never win the admission score."""

    modes: tuple[QualityMode, ...]

    def __post_init__(self):
        if not self.modes:
            raise ValueError("a chunk needs at least one quality mode")
        for lo, hi in zip(self.modes, self.modes[1:]):
            if hi.size_bits <= lo.size_bits:
                raise ValueError("mode sizes must be strictly increasing")
            if hi.quality < lo.quality:
                raise ValueError("dominated mode: larger size with lower quality")


@dataclass(frozen=True)
class VideoProfile:
    file_id: int
    chunks: tuple[ChunkProfile, ...]
    cyclic: bool = True

    def __post_init__(self):
        if not self.chunks:
            raise ValueError("a video needs at least one chunk")


@dataclass(frozen=True)
class QualityBounds:
    d_min: float
    d_max: float

    def __post_init__(self):
        if not 0.0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")


def load_trace(path, file_id: int = 0) -> VideoProfile:
    """Read a chunk/mode/size_kbits/ssim CSV into a validated VideoProfile.

    Chunk indices must be 0-based and contiguous, modes 1-based and contiguous
    per chunk. Any malformed row raises TraceError naming the line number.
    """
    rows: dict[int, dict[int, tuple[int, float, int]]] = {}
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise TraceError(f"cannot open trace {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(f.strip() for f in header) != TRACE_HEADER:
            raise TraceError(
                f"{path}:1: expected header {','.join(TRACE_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                chunk = int(row[0])
                mode = int(row[1])
                size_kbits = float(row[2])
                ssim = float(row[3])
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from exc
            if chunk < 0:
                raise TraceError(f"{path}:{lineno}: chunk index must be >= 0")
            if mode < 1:
                raise TraceError(f"{path}:{lineno}: modes are 1-based")
            size_bits = round(size_kbits * 1000)
            if size_bits <= 0:
                raise TraceError(f"{path}:{lineno}: non-positive chunk size")
            if not 0.0 < ssim <= 1.0:
                raise TraceError(f"{path}:{lineno}: ssim {ssim} outside (0, 1]")
            per_chunk = rows.setdefault(chunk, {})
            if mode in per_chunk:
                raise TraceError(f"{path}:{lineno}: duplicate (chunk {chunk}, mode {mode})")
            per_chunk[mode] = (size_bits, ssim, lineno)

    if not rows:
        raise TraceError(f"{path}: trace has no chunk rows")
    if sorted(rows) != list(range(len(rows))):
        raise TraceError(f"{path}: chunk indices must be contiguous from 0")

    chunks = []
    for chunk in range(len(rows)):
        per_chunk = rows[chunk]
        if sorted(per_chunk) != list(range(1, len(per_chunk) + 1)):
            raise TraceError(f"{path}: chunk {chunk} modes must be contiguous from 1")
        modes = []
        prev = None
        for mode in range(1, len(per_chunk) + 1):
            size_bits, ssim, lineno = per_chunk[mode]
            if prev is not None:
                if size_bits <= prev[0]:
                    raise TraceError(
                        f"{path}:{lineno}: mode sizes must increase strictly"
                    )
                if ssim < prev[1]:
                    raise TraceError(
                        f"{path}:{lineno}: dominated mode (larger size, lower quality)"
                    )
            modes.append(QualityMode(size_bits=size_bits, quality=ssim))
            prev = (size_bits, ssim)
        chunks.append(ChunkProfile(modes=tuple(modes)))
    return VideoProfile(file_id=file_id, chunks=tuple(chunks))


def dump_trace(profile: VideoProfile, path) -> None:
    """Inverse of load_trace; sizes written back as kbits."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_HEADER)
        for chunk, cp in enumerate(profile.chunks):
            for mode, qm in enumerate(cp.modes, start=1):
                writer.writerow([chunk, mode, qm.size_bits / 1000.0, qm.quality])


def synth_vbr(num_chunks: int, segments, seed: int, file_id: int = 0) -> VideoProfile:
    """Synthetic VBR profile: segments of (length, mode_count, base_size_bits).

    Mode sizes double per mode around the segment base, scaled by one uniform
    +/-20% jitter draw per chunk (shared across that chunk's modes, so size
    monotonicity is preserved). Quality saturates as
    1 - 0.12 * 0.55^(m-1). Deterministic for a given seed.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("synth_vbr needs at least one segment")
    if sum(length for length, _, _ in segments) != num_chunks:
        raise ValueError("segment lengths must sum to num_chunks")
    # stream tag 2 separates video jitter from other consumers of the seed
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 2)))
    chunks = []
    for length, mode_count, base_size_bits in segments:
        if length <= 0 or mode_count < 1 or base_size_bits <= 0:
            raise ValueError("segment fields must be positive")
        for _ in range(length):
            jitter = 1.0 + rng.uniform(-0.2, 0.2)
            modes = []
            for m in range(1, mode_count + 1):
                size = max(1, round(base_size_bits * 2 ** (m - 1) * jitter))
                quality = min(1.0, 1.0 - 0.12 * 0.55 ** (m - 1))
                modes.append(QualityMode(size_bits=size, quality=quality))
            chunks.append(ChunkProfile(modes=tuple(modes)))
    return VideoProfile(file_id=file_id, chunks=tuple(chunks))


def chunk_profile(profile: VideoProfile, offset: int, t: int) -> ChunkProfile:
    """Chunk requested at slot t by a session starting at offset.

    Cyclic profiles wrap modulo the sequence length; non-cyclic ones hold the
    final chunk.
    """
    index = offset + t
    if profile.cyclic:
        index %= len(profile.chunks)
    else:
        index = min(index, len(profile.chunks) - 1)
    return profile.chunks[index]


def quality_bounds(profile: VideoProfile) -> QualityBounds:
    """Uniform bounds over the sequence: lowest bottom-mode quality and
    highest top-mode quality."""
    d_min = min(cp.modes[0].quality for cp in profile.chunks)
    d_max = max(cp.modes[-1].quality for cp in profile.chunks)
    return QualityBounds(d_min=d_min, d_max=d_max)
