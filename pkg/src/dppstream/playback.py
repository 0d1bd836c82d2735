"""Client playback model: pre-buffering, stalls with re-buffering, and skips.

Playback consumes one chunk per slot once started. Chunks that go through
congested queues can arrive out of order; when the next chunk is missing but
skipping a short gap would open a contiguous run of playable chunks, the
player jumps the gap instead of stalling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

PREBUFFERING = "prebuffering"
PLAYING = "playing"
REBUFFERING = "rebuffering"


@dataclass(frozen=True)
class PlaybackPolicy:
    """Threshold policy: start after prebuffer_target contiguous chunks,
    resume a stall after rebuffer_target, and skip a gap of up to skip_window
    chunks when doing so opens a run of at least skip_gain.

    The defaults absorb handover effects: a user leaving a helper's radius
    strands that helper's queued chunks, punching a block of holes roughly as
    wide as the handover overlap, so the prebuffer must cover the block's
    repair time and the skip window must reach past what never arrives.
    """

    prebuffer_target: int = 64
    rebuffer_target: int = 4
    skip_window: int = 32
    skip_gain: int = 4

    def __post_init__(self):
        for name in ("prebuffer_target", "rebuffer_target", "skip_window", "skip_gain"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass(frozen=True)
class PlaybackEvent:
    kind: str
    chunk: int | None = None
    jump: int | None = None


@dataclass(frozen=True)
class PlaybackMetrics:
    stall_slots: int
    skipped_chunks: int
    prebuffer_slots: int
    played_chunks: int
    late_drops: int


@dataclass
class PlaybackBuffer:
    """Per-user buffer state. playhead is the next chunk number to play and
    never decreases; played or skipped chunks are never replayed."""

    received: set = field(default_factory=set)
    playhead: int = 0
    state: str = PREBUFFERING
    start_slot: int | None = None
    played_chunks: int = 0
    skipped_chunks: int = 0
    stall_slots: int = 0
    prebuffer_slots: int = 0
    late_drops: int = 0

    def contiguous_run(self, start: int | None = None) -> int:
        """Length of the received run beginning at start (default playhead)."""
        c = self.playhead if start is None else start
        run = 0
        while c in self.received:
            run += 1
            c += 1
        return run


def on_delivery(buf: PlaybackBuffer, chunk: int) -> PlaybackBuffer:
    """Record a delivered chunk. Chunks behind the playhead arrive too late
    for real-time playout and are dropped."""
    if chunk < buf.playhead:
        buf.late_drops += 1
        return buf
    buf.received.add(chunk)
    return buf


def _play(buf: PlaybackBuffer) -> PlaybackEvent:
    chunk = buf.playhead
    buf.playhead += 1
    buf.played_chunks += 1
    return PlaybackEvent(kind="played", chunk=chunk)


def _skip_gap(buf: PlaybackBuffer, policy: PlaybackPolicy) -> PlaybackEvent | None:
    for gap in range(1, policy.skip_window + 1):
        run = buf.contiguous_run(buf.playhead + gap)
        if run >= policy.skip_gain:
            first = buf.playhead
            buf.playhead += gap
            buf.skipped_chunks += gap
            return PlaybackEvent(kind="skipped", chunk=first, jump=run)
    return None


def step(buf: PlaybackBuffer, policy: PlaybackPolicy, t: int) -> PlaybackEvent:
    """Advance playback by one slot; call once per slot after deliveries.

    Pre-buffering ends (and the first chunk plays) the slot the contiguous
    run reaches prebuffer_target; that slot is recorded as the playback start.
    While playing, a missing playhead chunk is either skipped, when a gap of
    at most skip_window hides a run of at least skip_gain chunks, or stalls
    playback into re-buffering until the run reaches rebuffer_target.
    """
    if buf.state == PREBUFFERING:
        if buf.contiguous_run() >= policy.prebuffer_target:
            buf.state = PLAYING
            buf.start_slot = t
            return _play(buf)
        buf.prebuffer_slots += 1
        return PlaybackEvent(kind=PREBUFFERING)

    if buf.state == REBUFFERING:
        if buf.contiguous_run() >= policy.rebuffer_target:
            buf.state = PLAYING
            return _play(buf)
        # a chunk stranded at a departed helper would pin the run at zero
        # forever, so the skip rule applies while re-buffering too
        skipped = _skip_gap(buf, policy)
        if skipped is not None:
            buf.state = PLAYING
            return skipped
        buf.stall_slots += 1
        return PlaybackEvent(kind=REBUFFERING)

    if buf.playhead in buf.received:
        return _play(buf)
    skipped = _skip_gap(buf, policy)
    if skipped is not None:
        return skipped
    buf.stall_slots += 1
    buf.state = REBUFFERING
    return PlaybackEvent(kind="stalled")


def metrics(buf: PlaybackBuffer) -> PlaybackMetrics:
    """Counters snapshot; skip fraction = skipped / (played + skipped)."""
    return PlaybackMetrics(
        stall_slots=buf.stall_slots,
        skipped_chunks=buf.skipped_chunks,
        prebuffer_slots=buf.prebuffer_slots,
        played_chunks=buf.played_chunks,
        late_drops=buf.late_drops,
    )
