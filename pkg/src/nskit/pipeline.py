"""Virtual starter kit: Input-to-Spike unit -> wire -> neuroprocessor -> wire -> Spike-to-Output unit.

Wires carry one frame per engine tick. A binary wire sends one level per line;
a PWM wire sends one duty cycle per line, quantized to ``pwm_slots`` steps, and
so can also carry spike charge. Wall-clock time is modeled from the configured
rates rather than measured: the three units stream tick by tick, so one window
of ``T`` ticks takes ``T / min(input_wire_hz, neuroprocessor_hz, output_wire_hz)``
seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Protocol, Sequence

from nskit.coding import DecoderSpec, EncoderSpec, decode, encode
from nskit.snn import Engine, Network, OutputRecord, SpikeEvent

WIRE_MODES = ("binary", "pwm")
DEFAULT_PWM_SLOTS = 256
_LEVELS = frozenset((0, 1))


class PipelineError(ValueError):
    pass


class WireError(PipelineError):
    """Frames do not match the wire they are sent over."""


class SignalError(WireError):
    """A level or duty cycle the wire cannot represent."""


class ConfigError(PipelineError):
    pass


@dataclass(frozen=True)
class WireConfig:
    mode: str
    wire_hz: float
    lines: int
    pwm_slots: int = DEFAULT_PWM_SLOTS

    def __post_init__(self):
        if self.mode not in WIRE_MODES:
            raise ConfigError(f"wire mode {self.mode!r} not in {WIRE_MODES}")
        if not (math.isfinite(self.wire_hz) and self.wire_hz > 0):
            raise ConfigError(f"wire_hz must be positive, got {self.wire_hz!r}")
        if not isinstance(self.lines, int) or self.lines < 1:
            raise ConfigError(f"lines must be a positive integer, got {self.lines!r}")
        if self.mode == "pwm" and (not isinstance(self.pwm_slots, int) or self.pwm_slots < 2):
            raise ConfigError(f"pwm_slots must be an integer >= 2, got {self.pwm_slots!r}")

    @property
    def frame_ms(self) -> float:
        return 1000.0 / self.wire_hz


@dataclass(frozen=True)
class WireFrame:
    index: int
    payload: tuple


def quantize_duty(duty: float, slots: int) -> float:
    if not (math.isfinite(duty) and 0.0 <= duty <= 1.0):
        raise SignalError(f"duty cycle {duty!r} outside [0, 1]")
    # Exact arithmetic: a float product can land on a tie the true duty does not reach.
    return math.floor(Fraction(duty) * slots + Fraction(1, 2)) / slots


def wire_transmit(cfg: WireConfig, ticks: Sequence[Sequence[float]]) -> list[WireFrame]:
    """Turn per-tick line values (levels or duties) into frames."""
    frames = []
    for idx, values in enumerate(ticks):
        if len(values) != cfg.lines:
            raise WireError(f"tick {idx} has {len(values)} lines, wire has {cfg.lines}")
        if cfg.mode == "binary":
            if not _LEVELS.issuperset(values):
                bad = next(v for v in values if v not in _LEVELS)
                raise SignalError(f"binary level {bad!r} at tick {idx} is not 0 or 1")
            payload = tuple(map(int, values))
        else:
            payload = tuple(quantize_duty(float(v), cfg.pwm_slots) for v in values)
        frames.append(WireFrame(idx, payload))
    return frames


def wire_receive(cfg: WireConfig, frames: Sequence[WireFrame]) -> list[tuple]:
    out = []
    for fr in frames:
        if len(fr.payload) != cfg.lines:
            raise WireError(f"frame {fr.index} has {len(fr.payload)} lines, wire has {cfg.lines}")
        out.append(fr.payload)
    return out


def spikes_to_ticks(spikes: Sequence[SpikeEvent], neurons: Sequence[int], window: int,
                    mode: str) -> list[list[float]]:
    line_of = {nid: i for i, nid in enumerate(neurons)}
    ticks: list[list[float]] = [[0] * len(neurons) for _ in range(window)]
    for ev in spikes:
        row = ticks[ev.time]
        i = line_of[ev.neuron]
        if mode == "binary":
            row[i] = 1
        else:
            row[i] += ev.charge
    return ticks


def ticks_to_spikes(ticks: Sequence[Sequence[float]], neurons: Sequence[int]) -> list[SpikeEvent]:
    """Nonzero line values become spikes whose charge is the value."""
    return [
        SpikeEvent(t, neurons[i], float(v))
        for t, row in enumerate(ticks)
        for i, v in enumerate(row)
        if v
    ]


@dataclass
class PipelineConfig:
    encoder: EncoderSpec
    network: Network
    decoder: DecoderSpec
    input_wire: WireConfig
    output_wire: WireConfig
    neuroprocessor_hz: float

    def problems(self) -> list[str]:
        out = []
        missing = [n for n in self.encoder.neurons if n not in self.network.inputs]
        if missing:
            out.append(f"encoder neurons {missing} are not network inputs")
        missing = [n for n in self.decoder.neurons if n not in self.network.outputs]
        if missing:
            out.append(f"decoder neurons {missing} are not network outputs")
        if self.input_wire.lines != len(self.encoder.neurons):
            out.append(f"input wire has {self.input_wire.lines} lines but the encoder binds "
                       f"{len(self.encoder.neurons)} neurons")
        if self.output_wire.lines != len(self.decoder.neurons):
            out.append(f"output wire has {self.output_wire.lines} lines but the decoder binds "
                       f"{len(self.decoder.neurons)} neurons")
        if self.encoder.window != self.decoder.window:
            out.append(f"encoder window {self.encoder.window} != decoder window {self.decoder.window}")
        if not (math.isfinite(self.neuroprocessor_hz) and self.neuroprocessor_hz > 0):
            out.append("neuroprocessor_hz must be positive")
        return out

    def check(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def window(self) -> int:
        return self.encoder.window


@dataclass(frozen=True)
class TimingReport:
    window: int
    windows: int
    input_wire_hz: float
    neuroprocessor_hz: float
    output_wire_hz: float
    input_mode: str = "binary"
    output_mode: str = "binary"

    @property
    def input_frame_ms(self) -> float:
        return 1000.0 / self.input_wire_hz

    @property
    def tick_ms(self) -> float:
        return 1000.0 / self.neuroprocessor_hz

    @property
    def output_frame_ms(self) -> float:
        return 1000.0 / self.output_wire_hz

    @property
    def window_ms(self) -> float:
        return self.window * 1000.0 / min(self.input_wire_hz, self.neuroprocessor_hz, self.output_wire_hz)

    @property
    def total_ms(self) -> float:
        return self.windows * self.window_ms

    def items(self) -> list[tuple[str, object]]:
        return [
            ("window_ticks", self.window),
            ("windows", self.windows),
            ("input_wire_mode", self.input_mode),
            ("input_frame_ms", self.input_frame_ms),
            ("input_stage_ms", self.window * 1000.0 / self.input_wire_hz),
            ("neuroprocessor_tick_ms", self.tick_ms),
            ("neuroprocessor_stage_ms", self.window * 1000.0 / self.neuroprocessor_hz),
            ("output_wire_mode", self.output_mode),
            ("output_frame_ms", self.output_frame_ms),
            ("output_stage_ms", self.window * 1000.0 / self.output_wire_hz),
            ("window_ms", self.window_ms),
            ("total_ms", self.total_ms),
        ]

    def format(self) -> str:
        def fmt(v):
            return f"{v:.9g}" if isinstance(v, float) else str(v)
        return "".join(f"{k}={fmt(v)}\n" for k, v in self.items())


def timing_report(cfg: PipelineConfig, windows: int) -> TimingReport:
    return TimingReport(cfg.window, windows, cfg.input_wire.wire_hz, cfg.neuroprocessor_hz,
                        cfg.output_wire.wire_hz, cfg.input_wire.mode, cfg.output_wire.mode)


@dataclass
class WindowResult:
    index: int
    value: float
    decoded: float
    counts: tuple[int, ...]
    wall_time: Optional[float] = None


class Kit:
    """The three units wired together around one engine instance."""

    def __init__(self, cfg: PipelineConfig):
        cfg.check()
        self.cfg = cfg
        self.engine = Engine(cfg.network)

    def window(self, value: float) -> tuple[float, OutputRecord, list[SpikeEvent]]:
        """One control period: returns (decoded value, received output record, engine fires)."""
        cfg = self.cfg
        T = cfg.window
        enc, dec = cfg.encoder, cfg.decoder
        # Input-to-Spike unit -> input wire
        spikes = encode(enc, value)
        frames = wire_transmit(cfg.input_wire, spikes_to_ticks(spikes, enc.neurons, T, cfg.input_wire.mode))
        arriving = ticks_to_spikes(wire_receive(cfg.input_wire, frames), enc.neurons)
        # Neuroprocessor
        raw = self.engine.run(arriving, T)
        fires = list(self.engine.fire_log)
        # output wire -> Spike-to-Output unit
        out_spikes = [SpikeEvent(t, nid, 1.0) for nid in dec.neurons for t in raw.fires[nid]]
        frames = wire_transmit(cfg.output_wire, spikes_to_ticks(out_spikes, dec.neurons, T, cfg.output_wire.mode))
        received = ticks_to_spikes(wire_receive(cfg.output_wire, frames), dec.neurons)
        record = OutputRecord({nid: [] for nid in dec.neurons})
        for ev in received:
            record.fires[ev.neuron].append(ev.time)
        return decode(dec, record), record, fires


@dataclass
class OpenLoopResult:
    windows: list[WindowResult]
    trace: list[SpikeEvent]
    timing: TimingReport


def run_pipeline_open(cfg: PipelineConfig, values: Sequence[tuple[float, float]]) -> OpenLoopResult:
    """Run one window per ``(wall_time, value)`` sample.

    Trace times are global: window ``w`` tick ``t`` is logged at ``w * T + t``.
    """
    times = [wt for wt, _ in values]
    if any(b < a for a, b in zip(times, times[1:])):
        raise PipelineError("input values must be sorted by wall time")
    kit = Kit(cfg)
    T = cfg.window
    windows, trace = [], []
    for w, (wall, v) in enumerate(values):
        decoded, record, fires = kit.window(v)
        windows.append(WindowResult(w, v, decoded, tuple(record.count(n) for n in cfg.decoder.neurons), wall))
        trace.extend(SpikeEvent(w * T + ev.time, ev.neuron, ev.charge) for ev in fires)
    return OpenLoopResult(windows, trace, timing_report(cfg, len(values)))


class Application(Protocol):
    """What a closed-loop application must provide."""

    sensor_range: tuple[float, float]
    action_range: tuple[float, float]

    def reset(self, seed: int) -> None: ...
    def read_sensor(self) -> float: ...
    def apply_action(self, action: float) -> None: ...
    def score(self) -> float: ...


@dataclass
class LoopStep:
    step: int
    reading: float
    action: float
    counts: tuple[int, ...]
    state: dict = field(default_factory=dict)


@dataclass
class Episode:
    seed: int
    score: float
    steps: list[LoopStep]
    trace: list[SpikeEvent]


def check_ranges(cfg: PipelineConfig, app: Application) -> None:
    lo, hi = app.sensor_range
    if (lo, hi) != (cfg.encoder.v_min, cfg.encoder.v_max):
        raise ConfigError(f"application sensor range [{lo}, {hi}] does not match encoder range "
                          f"[{cfg.encoder.v_min}, {cfg.encoder.v_max}]")
    a_lo, a_hi = app.action_range
    d_lo, d_hi = cfg.decoder.output_range()
    if d_lo < a_lo or d_hi > a_hi:
        raise ConfigError(f"decoder output range [{d_lo}, {d_hi}] exceeds application action range "
                          f"[{a_lo}, {a_hi}]")


def run_pipeline_closed(cfg: PipelineConfig, app: Application, episodes: int = 1, seed: int = 0,
                        steps: int = 100, keep_trace: bool = True) -> list[Episode]:
    """Sensor -> encode -> engine -> decode -> action, once per window.

    Episode ``i`` is seeded with ``seed + i``. Weights are restored at the start
    of every episode; STDP changes persist across the windows of one episode.
    """
    check_ranges(cfg, app)
    kit = Kit(cfg)
    T = cfg.window
    observe = getattr(app, "observe", None)
    results = []
    for e in range(episodes):
        ep_seed = seed + e
        app.reset(ep_seed)
        kit.engine.reset(reset_weights=True)
        log, trace = [], []
        for k in range(steps):
            reading = app.read_sensor()
            action, record, fires = kit.window(reading)
            counts = tuple(record.count(n) for n in cfg.decoder.neurons)
            state = observe() if observe else {}
            app.apply_action(action)
            log.append(LoopStep(k, reading, action, counts, state))
            if keep_trace:
                trace.extend(SpikeEvent(k * T + ev.time, ev.neuron, ev.charge) for ev in fires)
        results.append(Episode(ep_seed, app.score(), log, trace))
    return results
