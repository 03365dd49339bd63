"""Synthetic labelled flows and an emulated satellite/terrestrial channel.

Two open-loop source models stand in for captured traffic:

* progressive streaming: on/off chunk downloads.  Every ``chunk_period`` a
  chunk is pushed back-to-back at ``line_rate`` in ``packet_size`` packets,
  with one small client acknowledgement per ``ack_every`` data packets;
* video conference: frames at ``frame_rate`` in both directions, each frame
  split into packets whose sizes are uniform around ``size_mean``.

The channel is a single FIFO bottleneck per flow followed by a propagation
delay and uniform jitter, with per-flow ordering preserved.

Seeding: every flow in a dataset draws from
``SeedSequence(entropy=seed, spawn_key=(profile_index, flow_index, stage))``
where stage 0 drives the source and stage 1 the channel.  The mixing is part
of the reproducibility contract and must not change.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, InvalidProfile
from .flowcore import Direction, Flow, TrafficClass

C2S = int(Direction.C2S)
S2C = int(Direction.S2C)


# A profile parameter is either a number or a (lo, hi) pair; pairs are drawn
# uniformly once per flow, which spreads nuisance properties across flows.
Param = Union[float, int, tuple]


def _ends(value) -> tuple:
    if isinstance(value, (tuple, list)):
        if len(value) != 2 or value[0] > value[1]:
            raise InvalidProfile(f"range {value!r} must be (lo, hi) with lo <= hi")
        return float(value[0]), float(value[1])
    return float(value), float(value)


def _mid(value) -> float:
    lo, hi = _ends(value)
    return (lo + hi) / 2


class _RangedProfile:
    _int_fields: tuple = ()

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                object.__setattr__(self, f.name, tuple(v))

    def resolve(self, rng):
        """Concrete profile with every range replaced by a per-flow draw."""
        drawn = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                lo, hi = _ends(v)
                if f.name in self._int_fields:
                    drawn[f.name] = int(rng.integers(int(round(lo)), int(round(hi)) + 1))
                else:
                    drawn[f.name] = float(rng.uniform(lo, hi))
        return replace(self, **drawn) if drawn else self

    def _check(self, name, ok, message):
        lo, hi = _ends(getattr(self, name))
        if not (ok(lo) and ok(hi)):
            raise InvalidProfile(f"{name}: {message}")


@dataclass(frozen=True)
class StreamingProfile(_RangedProfile):
    mean_bitrate: Param = 1.2e6
    chunk_size: Param = 600_000
    chunk_period: Param = 4.0
    packet_size: Param = 1350
    line_rate: Param = 10e6
    ack_every: Param = 10
    ack_size: Param = 80
    # relative spread of each chunk's size and of each inter-chunk gap, uniform +/-
    chunk_jitter: Param = 0.1
    # sender pacing inside a chunk in bits/s; 0 sends back-to-back at line_rate
    pacing_rate: Param = 0.0
    # steady client control packets per second (requests, telemetry), 0 = none
    control_rate: Param = 0.0
    control_size: Param = 100

    traffic_class = TrafficClass.STREAMING
    _int_fields = ("chunk_size", "packet_size", "ack_every", "ack_size", "control_size")

    def validate(self) -> None:
        pos = lambda v: v > 0
        for name in ("mean_bitrate", "chunk_size", "chunk_period", "packet_size", "line_rate"):
            self._check(name, pos, "must be positive")
        self._check("ack_every", lambda v: v >= 1, "must be >= 1")
        self._check("ack_size", lambda v: v >= 0, "must be >= 0")
        self._check("chunk_jitter", lambda v: 0 <= v < 1, "must lie in [0, 1)")
        for name in ("pacing_rate", "control_rate", "control_size"):
            self._check(name, lambda v: v >= 0, "must be >= 0")
        implied = _mid(self.chunk_size) * 8 / _mid(self.chunk_period)
        target = _mid(self.mean_bitrate)
        if abs(implied - target) > 0.1 * target:
            raise InvalidProfile(
                f"chunk_size*8/chunk_period = {implied:.0f} b/s is not within 10% "
                f"of mean_bitrate {target:.0f}"
            )


@dataclass(frozen=True)
class ConferenceProfile(_RangedProfile):
    mean_bitrate: Param = 1.2e6
    frame_rate: Param = 30.0
    size_mean: Param = 500.0
    size_jitter: Param = 200.0
    line_rate: Param = 10e6
    # sender pacing of a frame's packets in bits/s; 0 sends at line_rate
    pacing_rate: Param = 0.0
    # upstream bitrate as a fraction of downstream (1.0 = symmetric call)
    upstream_ratio: Param = 1.0
    # > 0: send each frame as whole packets of exactly this size, instead of
    # uniform size_mean +/- size_jitter packets
    fragment_size: Param = 0
    # relative per-frame size variation (fragment mode), uniform +/-
    frame_jitter: Param = 0.0
    # optional audio sub-stream in each active direction
    audio_rate: Param = 0.0
    audio_size: Param = 120
    audio_jitter: Param = 0

    traffic_class = TrafficClass.CONFERENCE
    _int_fields = ("fragment_size", "audio_size", "audio_jitter")

    @property
    def packets_per_frame(self) -> int:
        return max(1, round(_mid(self.mean_bitrate) / 8 / _mid(self.frame_rate) / _mid(self.size_mean)))

    def validate(self) -> None:
        pos = lambda v: v > 0
        for name in ("mean_bitrate", "frame_rate", "size_mean", "line_rate"):
            self._check(name, pos, "must be positive")
        if not 0 <= _ends(self.size_jitter)[1] < _ends(self.size_mean)[0]:
            raise InvalidProfile("size_jitter must lie in [0, size_mean)")
        nonneg = lambda v: v >= 0
        for name in ("pacing_rate", "upstream_ratio", "fragment_size", "audio_rate", "audio_size"):
            self._check(name, nonneg, "must be >= 0")
        self._check("frame_jitter", lambda v: 0 <= v < 1, "must lie in [0, 1)")
        if not 0 <= _ends(self.audio_jitter)[1] <= _ends(self.audio_size)[0]:
            raise InvalidProfile("audio_jitter must lie in [0, audio_size]")


ClassProfile = Union[StreamingProfile, ConferenceProfile]

PROFILE_TYPES = {
    TrafficClass.STREAMING: StreamingProfile,
    TrafficClass.CONFERENCE: ConferenceProfile,
}


def default_profiles() -> list[ClassProfile]:
    return [StreamingProfile(), ConferenceProfile()]


def overlapping_profiles() -> list[ClassProfile]:
    """Profiles whose packet sizes and rates overlap across classes.

    Both classes carry near-MTU data plus small control or audio packets and
    share a wide bitrate range, so size and rate statistics are only weakly
    informative.  The direction split stays distinctive: streaming sends one
    acknowledgement per 2 to 5 data packets, while a call sends a comparable
    number of packets each way.
    """
    return [
        StreamingProfile(
            mean_bitrate=(0.8e6, 2.4e6), chunk_size=(100_000, 400_000), chunk_period=(0.5, 2.0),
            packet_size=(1200, 1450), ack_every=(2, 5), ack_size=(60, 140), chunk_jitter=0.3,
            pacing_rate=(2e6, 4.5e6), control_rate=(10.0, 20.0), control_size=(60, 160),
        ),
        ConferenceProfile(
            mean_bitrate=(0.6e6, 2.4e6), frame_rate=(15.0, 30.0), upstream_ratio=(0.6, 1.0),
            fragment_size=(1200, 1450), frame_jitter=0.5, audio_rate=(15.0, 40.0),
            audio_size=(80, 160), audio_jitter=40, pacing_rate=(2e6, 4.5e6),
        ),
    ]


PROFILE_SETS = {"default": default_profiles, "overlapping": overlapping_profiles}


def profile_set(name: str) -> list[ClassProfile]:
    try:
        return PROFILE_SETS[name]()
    except KeyError:
        raise ConfigError(f"unknown profile set {name!r}; known: {sorted(PROFILE_SETS)}") from None


@dataclass(frozen=True)
class ChannelModel:
    propagation_delay: float = 0.0
    jitter_bound: float = 0.0
    capacity: float = 0.0
    queue_limit: int = 256_000

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    channel: ChannelModel = field(default_factory=ChannelModel)
    flows_per_class: int = 15
    flow_duration: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.flows_per_class < 0 or self.flow_duration < 1:
            raise ValueError("flows_per_class must be >= 0 and flow_duration >= 1 s")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


# deep buffer so a whole chunk fits in the bottleneck queue without loss
_SAT_QUEUE = 1_000_000

PRESETS = {
    "terrestrial": ScenarioConfig("terrestrial", ChannelModel(0.0, 0.0, 5e6, _SAT_QUEUE)),
    "geo": ScenarioConfig("geo", ChannelModel(0.25, 0.0, 5e6, _SAT_QUEUE)),
    "leo": ScenarioConfig("leo", ChannelModel(0.05, 0.05, 5e6, _SAT_QUEUE)),
    "geo-2mbps": ScenarioConfig("geo-2mbps", ChannelModel(0.25, 0.0, 2e6, _SAT_QUEUE)),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario preset {name!r}; known: {sorted(PRESETS)}") from None
    return replace(base, **overrides)


# ------------------------------------------------------------------ sources

def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _streaming(profile: StreamingProfile, duration: float, rng) -> tuple:
    rate = profile.pacing_rate or profile.line_rate
    gap = profile.packet_size * 8 / rate
    times, lengths, dirs = [], [], []
    t = rng.uniform(0, profile.chunk_period)
    while t < duration:
        size = profile.chunk_size
        if profile.chunk_jitter:
            size *= 1 + rng.uniform(-profile.chunk_jitter, profile.chunk_jitter)
        size = int(round(size))
        n_full, rest = divmod(size, profile.packet_size)
        sizes = np.full(n_full + (rest > 0), profile.packet_size, dtype=np.int64)
        if rest:
            sizes[-1] = rest
        # each packet leaves when the previous one finished at the sending rate
        start = np.concatenate(([0.0], np.cumsum(sizes[:-1] * 8 / rate))) + t
        keep = start < duration
        start, sizes = start[keep], sizes[keep]
        times.append(start)
        lengths.append(sizes)
        dirs.append(np.full(start.size, S2C, dtype=np.int8))
        acks = start[profile.ack_every - 1::profile.ack_every] + gap / 2
        acks = acks[acks < duration]
        times.append(acks)
        lengths.append(np.full(acks.size, profile.ack_size, dtype=np.int64))
        dirs.append(np.full(acks.size, C2S, dtype=np.int8))
        period = profile.chunk_period
        if profile.chunk_jitter:
            period *= 1 + rng.uniform(-profile.chunk_jitter, profile.chunk_jitter)
        t += period
    if profile.control_rate:
        ctl = _periodic(profile.control_rate, duration, rng)
        times.append(ctl)
        lengths.append(np.full(ctl.size, profile.control_size, dtype=np.int64))
        dirs.append(np.full(ctl.size, C2S, dtype=np.int8))
    if not times:
        return np.empty(0), np.empty(0, np.int64), np.empty(0, np.int8)
    return np.concatenate(times), np.concatenate(lengths), np.concatenate(dirs)


def _periodic(rate: float, duration: float, rng) -> np.ndarray:
    phase = rng.uniform(0, 1 / rate)
    t = phase + np.arange(int(duration * rate) + 1) / rate
    return t[t < duration]


def _frame_sizes(profile: ConferenceProfile, n_frames: int, frame_bytes: float, rng) -> list:
    if not profile.fragment_size:
        per_frame = max(1, round(frame_bytes / profile.size_mean))
        lo = int(round(profile.size_mean - profile.size_jitter))
        hi = int(round(profile.size_mean + profile.size_jitter))
        return list(rng.integers(lo, hi + 1, size=(n_frames, per_frame)))
    out = []
    scale = 1 + rng.uniform(-profile.frame_jitter, profile.frame_jitter, size=n_frames) \
        if profile.frame_jitter else np.ones(n_frames)
    for k in range(n_frames):
        # frames are padded or trimmed to whole fragments
        count = max(1, int(round(frame_bytes * scale[k] / profile.fragment_size)))
        out.append(np.full(count, profile.fragment_size, dtype=np.int64))
    return out


def _conference_direction(profile: ConferenceProfile, duration, rate_scale, phase, direction, rng):
    frame_bytes = profile.mean_bitrate * rate_scale / 8 / profile.frame_rate
    n_frames = int(math.ceil((duration - phase) * profile.frame_rate - 1e-9))
    epochs = phase + np.arange(max(n_frames, 0)) / profile.frame_rate
    epochs = epochs[epochs < duration]
    times, sizes = [], []
    for epoch, frame in zip(epochs, _frame_sizes(profile, epochs.size, frame_bytes, rng)):
        frame = np.asarray(frame, dtype=np.int64)
        tx = frame * 8 / (profile.pacing_rate or profile.line_rate)
        times.append(epoch + np.cumsum(tx) - tx)
        sizes.append(frame)
    if profile.audio_rate:
        a_times = _periodic(profile.audio_rate, duration, rng)
        j = profile.audio_jitter
        a_sizes = rng.integers(profile.audio_size - j, profile.audio_size + j + 1, size=a_times.size)
        times.append(a_times)
        sizes.append(a_sizes.astype(np.int64))
    if not times:
        return np.empty(0), np.empty(0, np.int64), np.empty(0, np.int8)
    t = np.concatenate(times)
    n = np.concatenate(sizes)
    keep = t < duration
    return t[keep], n[keep], np.full(int(keep.sum()), direction, np.int8)


def _conference(profile: ConferenceProfile, duration: float, rng) -> tuple:
    parts = [_conference_direction(profile, duration, 1.0, 0.0, S2C, rng)]
    if profile.upstream_ratio > 0:
        phase = rng.uniform(0, 1 / profile.frame_rate)
        parts.append(_conference_direction(
            profile, duration, profile.upstream_ratio, phase, C2S, rng))
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def generate_flow(profile: ClassProfile, duration: float, seed, key: str = "flow-0") -> Flow:
    """Generate one labelled flow at the sender, timestamps starting near 0."""
    if duration < 1:
        raise InvalidProfile("duration must be at least 1 s")
    profile.validate()
    rng = _rng(seed)
    profile = profile.resolve(rng)
    if isinstance(profile, StreamingProfile):
        t, n, d = _streaming(profile, duration, rng)
    else:
        t, n, d = _conference(profile, duration, rng)
    order = np.argsort(t, kind="stable")
    return Flow(key, t[order], n[order], d[order], profile.traffic_class)


# ------------------------------------------------------------------ channel

def _fifo_departures(arrive: np.ndarray, service: np.ndarray) -> np.ndarray:
    # depart_i = max(arrive_i, depart_{i-1}) + service_i, in closed form
    csum = np.cumsum(service)
    prev = np.concatenate(([0.0], csum[:-1]))
    return csum + np.maximum.accumulate(arrive - prev)


def _fifo_with_drops(arrive, lengths, service, limit):
    depart = np.empty_like(arrive)
    kept = np.zeros(arrive.size, dtype=bool)
    queue: deque = deque()
    backlog = 0
    last = -math.inf
    for i in range(arrive.size):
        a = arrive[i]
        while queue and queue[0][0] <= a:
            backlog -= queue.popleft()[1]
        if backlog + lengths[i] > limit:
            continue
        last = max(a, last) + service[i]
        depart[i] = last
        kept[i] = True
        queue.append((last, lengths[i]))
        backlog += lengths[i]
    return depart, kept


def bottleneck_departures(flow: Flow, channel: ChannelModel) -> tuple[np.ndarray, np.ndarray]:
    """Departure time of every packet from the bottleneck and a mask of the
    packets that were not dropped (departures of dropped packets are
    meaningless)."""
    arrive = flow.timestamps.astype(float)
    lengths = flow.lengths
    if channel.capacity <= 0:
        return arrive.copy(), np.ones(arrive.size, dtype=bool)
    service = lengths * 8.0 / channel.capacity
    depart = _fifo_departures(arrive, service)
    csum = np.concatenate(([0], np.cumsum(lengths)))
    # bytes still in the system when packet i arrives (departures are monotone)
    first_waiting = np.searchsorted(depart, arrive, side="right")
    backlog = csum[:-1] - csum[np.minimum(first_waiting, np.arange(arrive.size))]
    if np.any(backlog + lengths > channel.queue_limit):
        return _fifo_with_drops(arrive, lengths, service, channel.queue_limit)
    return depart, np.ones(arrive.size, dtype=bool)


def apply_channel(flow: Flow, channel: ChannelModel, seed) -> Flow:
    """Push a flow through the bottleneck, delay and jitter stages.

    Returns the delivered packets stamped with their delivery times.  Packets
    that do not fit in the queue on arrival are dropped.
    """
    rng = _rng(seed)
    n = len(flow)
    jitter = rng.uniform(0.0, channel.jitter_bound, size=n) if channel.jitter_bound else 0.0
    depart, kept = bottleneck_departures(flow, channel)
    delivery = (depart + channel.propagation_delay + jitter)[kept]
    # departures are monotone, so the running maximum stays within the jitter bound
    delivery = np.maximum.accumulate(delivery) if delivery.size else delivery
    return Flow(flow.key, delivery, flow.lengths[kept], flow.directions[kept], flow.label)


# ------------------------------------------------------------------ dataset

def flow_seeds(seed: int, profile_index: int, flow_index: int) -> tuple:
    return tuple(
        np.random.SeedSequence(seed, spawn_key=(profile_index, flow_index, stage))
        for stage in (0, 1)
    )


def generate_dataset(config: ScenarioConfig, profiles: Sequence[ClassProfile]) -> list[Flow]:
    if not profiles:
        raise InvalidProfile("at least one class profile is required")
    flows = []
    for p_idx, profile in enumerate(profiles):
        for i in range(config.flows_per_class):
            src_seed, ch_seed = flow_seeds(config.seed, p_idx, i)
            key = f"{config.name}-{profile.traffic_class.value}-{i:04d}"
            raw = generate_flow(profile, config.flow_duration, src_seed, key=key)
            flows.append(apply_channel(raw, config.channel, ch_seed))
    return flows


# ------------------------------------------------------------------- config

def profile_from_dict(cls_name: str, values: dict) -> ClassProfile:
    try:
        tc = TrafficClass.parse(cls_name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    kind = PROFILE_TYPES[tc]
    known = {f.name for f in fields(kind)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {tc.value} profile keys: {sorted(unknown)}")
    profile = kind(**values)
    try:
        profile.validate()
    except InvalidProfile as exc:
        raise ConfigError(str(exc)) from None
    return profile


def scenario_from_dict(doc: dict) -> tuple[ScenarioConfig, list[ClassProfile]]:
    """Build a scenario and its class profiles from a parsed config document.

    Schema (TOML)::

        name = "geo"              # or preset = "geo" to start from a preset
        seed = 7
        flows_per_class = 15
        flow_duration = 60.0
        [channel]
        propagation_delay = 0.25
        jitter_bound = 0.0
        capacity = 5e6            # bits/s, 0 = unlimited
        queue_limit = 1000000     # bytes
        [profiles.streaming]      # optional overrides of StreamingProfile fields
        [profiles.conference]     # optional overrides of ConferenceProfile fields
    """
    doc = dict(doc)
    base_name = doc.pop("preset", None)
    base = preset(base_name) if base_name else None
    channel_doc = doc.pop("channel", {})
    profiles_doc = doc.pop("profiles", None)
    top = {f.name for f in fields(ScenarioConfig)} - {"channel"}
    unknown = set(doc) - top
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        channel = replace(base.channel if base else ChannelModel(), **channel_doc)
        if base is None and "name" not in doc:
            raise ConfigError("scenario needs a name or a preset")
        config = replace(base, channel=channel, **doc) if base else ScenarioConfig(channel=channel, **doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    if profiles_doc is None:
        profiles = default_profiles()
    else:
        profiles = [profile_from_dict(k, v) for k, v in profiles_doc.items()]
    return config, profiles


def scenario_to_dict(config: ScenarioConfig, profiles: Optional[Sequence[ClassProfile]] = None) -> dict:
    doc = {
        "name": config.name,
        "seed": config.seed,
        "flows_per_class": config.flows_per_class,
        "flow_duration": config.flow_duration,
        "channel": asdict(config.channel),
    }
    if profiles is not None:
        doc["profiles"] = {p.traffic_class.value: asdict(p) for p in profiles}
    return doc


def load_scenario(path) -> tuple[ScenarioConfig, list[ClassProfile]]:
    import tomli

    path = Path(path)
    try:
        doc = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)
