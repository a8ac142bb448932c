"""Deterministic tick engine: the program logic of a re-enacted installation.

Each tick advances a pure state value and synthesizes a TickFrame: one media
state per surface, a gain per speaker for the current user pose, and the menu
state. The frame sequence is a pure function of (manifest, capsule, config,
input sequence), which is what makes transcripts replayable and lets two
processes agree byte for byte.

Internally the clock is kept as an exact rational (ticks over tick_rate), so
a delay offset of k/tick_rate seconds shifts a channel by exactly k ticks
rather than by k ticks plus a rounding error. All frame arithmetic uses
euclidean mod, keeping indexes in range for times before an offset epoch.

Channel delay emulation is off by default: the half-second lag between the
broadcast paths feeding the original circuits was a side effect of the venue,
not of the artwork, so re-creating it is a curatorial choice. When enabled and
the manifest itself declares no offsets, the configured offset lands on every
channel after the first, reproducing the one-leg-behind arrangement.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from fractions import Fraction

from .content_capsule import Capsule, MediaItem, Playlist, resolve_playlist
from .geometry import Pose
from .scene_model import (
    CapsuleQuery,
    CityOption,
    LiteralPlaylist,
    SceneManifest,
    Speaker,
    VideoChannel,
    validate_manifest,
)

BLANK_MEDIA_ID = "(blank)"
GAIN_EPSILON = 1e-6


class EngineError(ValueError):
    """Raised for unsatisfiable engine configuration or inputs."""


@dataclass(frozen=True, slots=True)
class EngineConfig:
    tick_rate: float = 30.0
    delay_emulation: bool = False
    delay_offset: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tick_rate) and self.tick_rate > 0):
            raise ValueError("tick_rate must be positive")
        if not (math.isfinite(self.delay_offset) and self.delay_offset >= 0):
            raise ValueError("delay_offset must be >= 0")
        if not (0 <= self.rng_seed < 2**64):
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, slots=True)
class SurfaceState:
    surface_id: str
    media_id: str
    frame_index: int


@dataclass(frozen=True, slots=True)
class MenuState:
    options: tuple[CityOption, ...]
    selected_city: str | None


@dataclass(frozen=True, slots=True)
class TickFrame:
    t_ticks: int
    time: float
    surfaces: tuple[SurfaceState, ...]
    speaker_gains: dict[str, float]
    menu: MenuState | None
    user_virtual_pose: Pose


@dataclass(frozen=True, slots=True)
class SelectCity:
    city_id: str


@dataclass(frozen=True, slots=True)
class SetPose:
    pose: Pose


EngineInput = SelectCity | SetPose


def euclid_mod(a: int | Fraction, m: int | Fraction) -> int | Fraction:
    """a mod m with the result always in [0, m); m must be positive."""
    return a % m


def frame_index(item: MediaItem, t: float | Fraction, delay_offset: float | Fraction = 0) -> int:
    """Looped frame index of a single item at time t under a channel offset."""
    local = (Fraction(t) - Fraction(delay_offset)) * Fraction(item.fps)
    return int(euclid_mod(math.floor(local), item.frame_count))


@dataclass(frozen=True, slots=True)
class _Program:
    """A playlist compiled for exact scheduling: item start times over one loop."""

    items: tuple[MediaItem, ...]
    starts: tuple[Fraction, ...]
    total: Fraction

    @classmethod
    def compile(cls, playlist: Playlist) -> "_Program":
        starts = []
        acc = Fraction(0)
        for item in playlist.items:
            starts.append(acc)
            acc += Fraction(item.duration)
        return cls(items=playlist.items, starts=tuple(starts), total=acc)

    def state_at(self, t: Fraction, loop: bool) -> tuple[str, int]:
        if not loop:
            if t < 0:
                return self.items[0].media_id, 0
            if t >= self.total:
                last = self.items[-1]
                return last.media_id, last.frame_count - 1
            position = t
        else:
            position = euclid_mod(t, self.total)
        j = bisect_right(self.starts, position) - 1
        item = self.items[j]
        local = (position - self.starts[j]) * Fraction(item.fps)
        return item.media_id, int(euclid_mod(math.floor(local), item.frame_count))


@dataclass(frozen=True, slots=True)
class _ChannelClock:
    """A channel's compiled playlist plus its effective delay offset.

    program is None for capsule-backed channels awaiting a city selection; they
    are rebound (with a fresh epoch) when the menu fires.
    """

    channel: VideoChannel
    offset: Fraction
    program: _Program | None
    epoch: Fraction = Fraction(0)

    def state_at(self, t: Fraction) -> tuple[str, int]:
        if self.program is None:
            return BLANK_MEDIA_ID, 0
        return self.program.state_at(t - self.epoch - self.offset, self.channel.loop)


@dataclass(frozen=True, slots=True)
class _SlotClock:
    program: _Program
    epoch: Fraction


@dataclass(frozen=True, slots=True)
class EngineState:
    manifest: SceneManifest
    capsule: Capsule | None
    config: EngineConfig
    t_ticks: int
    selected_city: str | None
    user_virtual_pose: Pose
    channel_clocks: dict[str, _ChannelClock]
    slot_clocks: dict[str, _SlotClock]

    @property
    def time(self) -> Fraction:
        return Fraction(self.t_ticks) / Fraction(self.config.tick_rate)

    def slot_bindings(self) -> dict[str, Playlist]:
        return {slot: Playlist(items=clock.program.items) for slot, clock in self.slot_clocks.items()}


def _effective_offsets(manifest: SceneManifest, config: EngineConfig) -> dict[str, Fraction]:
    if not config.delay_emulation:
        return {c.channel_id: Fraction(0) for c in manifest.channels}
    if any(c.delay_offset != 0 for c in manifest.channels):
        return {c.channel_id: Fraction(c.delay_offset) for c in manifest.channels}
    # Manifest is silent: the configured lag goes to every circuit after the first.
    return {
        c.channel_id: Fraction(0) if i == 0 else Fraction(config.delay_offset)
        for i, c in enumerate(manifest.channels)
    }


def _capsule_cities(manifest: SceneManifest) -> set[str]:
    return {opt.city_id for widget in manifest.widgets for opt in widget.options}


def init_engine(manifest: SceneManifest, capsule: Capsule | None, config: EngineConfig) -> EngineState:
    """Build the initial state at tick 0, verifying every capsule key up front."""
    violations = validate_manifest(manifest)
    if violations:
        raise EngineError(f"manifest invalid: {violations[0].path}: {violations[0].message}")

    needs_capsule: list[tuple[str, str]] = []
    for widget in manifest.widgets:
        for opt in widget.options:
            for slot in widget.driven_slots:
                needs_capsule.append((opt.city_id, slot))
    for channel in manifest.channels:
        if isinstance(channel.playlist, CapsuleQuery):
            if channel.playlist.city_id is not None:
                needs_capsule.append((channel.playlist.city_id, channel.playlist.slot))
            else:
                for city in sorted(_capsule_cities(manifest)):
                    needs_capsule.append((city, channel.playlist.slot))
    if needs_capsule and capsule is None:
        raise EngineError("capsule required: manifest requests capsule-backed content")
    if capsule is not None:
        for city, slot in needs_capsule:
            if (city, slot) not in capsule.index:
                raise EngineError(f"capsule has no entries for city {city!r}, slot {slot!r}")

    offsets = _effective_offsets(manifest, config)
    channel_clocks: dict[str, _ChannelClock] = {}
    for channel in manifest.channels:
        if isinstance(channel.playlist, LiteralPlaylist):
            program = _Program.compile(Playlist(items=channel.playlist.items))
        elif channel.playlist.city_id is not None:
            assert capsule is not None
            program = _Program.compile(
                resolve_playlist(capsule, channel.playlist.city_id, channel.playlist.slot, config.rng_seed)
            )
        else:
            program = None
        channel_clocks[channel.channel_id] = _ChannelClock(channel=channel, offset=offsets[channel.channel_id], program=program)

    return EngineState(
        manifest=manifest,
        capsule=capsule,
        config=config,
        t_ticks=0,
        selected_city=None,
        user_virtual_pose=Pose.at(0.0, 0.0),
        channel_clocks=channel_clocks,
        slot_clocks={},
    )


def speaker_gain(user: Pose, speaker: Speaker) -> float:
    """Inverse-distance gain, clamped so approaching a speaker never exceeds its reference."""
    d = user.position.distance_to(speaker.position)
    return speaker.reference_gain * min(1.0, speaker.reference_distance / max(d, GAIN_EPSILON))


def _surface_states(state: EngineState, t: Fraction) -> tuple[SurfaceState, ...]:
    slots_by_projector = {p.projector_id: p.slot for p in state.manifest.projectors}
    out = []
    for node in state.manifest.media_surfaces():
        binding = node.binding
        assert binding is not None
        if binding.channel_id is not None:
            media_id, frame = state.channel_clocks[binding.channel_id].state_at(t)
        else:
            slot = slots_by_projector[binding.projector_id]
            clock = state.slot_clocks.get(slot)
            if clock is None:
                media_id, frame = BLANK_MEDIA_ID, 0
            else:
                media_id, frame = clock.program.state_at(t - clock.epoch, True)
        out.append(SurfaceState(surface_id=node.node_id, media_id=media_id, frame_index=frame))
    return tuple(out)


def _menu_state(state: EngineState) -> MenuState | None:
    if not state.manifest.widgets:
        return None
    return MenuState(options=state.manifest.widgets[0].options, selected_city=state.selected_city)


def build_frame(state: EngineState) -> TickFrame:
    """The sensory synthesis for the state's current tick."""
    t = state.time
    return TickFrame(
        t_ticks=state.t_ticks,
        time=state.t_ticks / state.config.tick_rate,
        surfaces=_surface_states(state, t),
        speaker_gains={s.speaker_id: speaker_gain(state.user_virtual_pose, s) for s in state.manifest.speakers},
        menu=_menu_state(state),
        user_virtual_pose=state.user_virtual_pose,
    )


def tick(state: EngineState) -> tuple[EngineState, TickFrame]:
    """Advance one tick and synthesize its frame."""
    advanced = replace(state, t_ticks=state.t_ticks + 1)
    return advanced, build_frame(advanced)


def handle_input(state: EngineState, event: EngineInput) -> EngineState:
    """Apply one input between ticks; returns the successor state."""
    if isinstance(event, SetPose):
        return replace(state, user_virtual_pose=event.pose)
    if isinstance(event, SelectCity):
        if not state.manifest.widgets:
            raise EngineError("no menu widget in this scene")
        widget = state.manifest.widgets[0]
        if event.city_id not in {o.city_id for o in widget.options}:
            known = sorted(o.city_id for o in widget.options)
            raise EngineError(f"unknown city {event.city_id!r}; options: {known}")
        if event.city_id == state.selected_city:
            return state
        assert state.capsule is not None  # init_engine guarantees this for menu scenes
        epoch = state.time
        slot_clocks = dict(state.slot_clocks)
        for slot in widget.driven_slots:
            playlist = resolve_playlist(state.capsule, event.city_id, slot, state.config.rng_seed)
            slot_clocks[slot] = _SlotClock(program=_Program.compile(playlist), epoch=epoch)
        channel_clocks = dict(state.channel_clocks)
        for channel in state.manifest.channels:
            ref = channel.playlist
            if isinstance(ref, CapsuleQuery) and ref.city_id is None:
                playlist = resolve_playlist(state.capsule, event.city_id, ref.slot, state.config.rng_seed)
                channel_clocks[channel.channel_id] = replace(
                    channel_clocks[channel.channel_id], program=_Program.compile(playlist), epoch=epoch
                )
        return replace(
            state,
            selected_city=event.city_id,
            slot_clocks=slot_clocks,
            channel_clocks=channel_clocks,
        )
    raise EngineError(f"unknown input {event!r}")


def run_ticks(state: EngineState, count: int) -> tuple[EngineState, list[TickFrame]]:
    """Convenience: advance count ticks, collecting frames."""
    frames = []
    for _ in range(count):
        state, frame = tick(state)
        frames.append(frame)
    return state, frames
