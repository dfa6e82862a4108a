import math
from fractions import Fraction
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nskit.coding import DecoderSpec, EncoderSpec
from nskit.pipeline import (
    ConfigError,
    PipelineConfig,
    SignalError,
    WireConfig,
    WireError,
    WireFrame,
    quantize_duty,
    run_pipeline_closed,
    run_pipeline_open,
    timing_report,
    wire_receive,
    wire_transmit,
)
from nskit.snn import Network, Neuron


def relay_cfg(mode="binary", hz=5000.0, window=50, enc_kind="rate", scale=1.0):
    net = Network([Neuron(0)], [], [0], [0])
    return PipelineConfig(
        encoder=EncoderSpec(enc_kind, 0.0, 1.0, window, (0,)),
        network=net,
        decoder=DecoderSpec("count", window, (0,), scale=scale),
        input_wire=WireConfig(mode, hz, 1),
        output_wire=WireConfig(mode, hz, 1),
        neuroprocessor_hz=hz,
    )


class ConstantApp:
    """Sensor fixed at one value; records the actions it is given."""

    def __init__(self, reading, sensor_range=(0.0, 1.0), action_range=(-1.0, 1.0)):
        self.reading = reading
        self.sensor_range = sensor_range
        self.action_range = action_range
        self.actions = []

    def reset(self, seed):
        self.actions = []

    def read_sensor(self):
        return self.reading

    def apply_action(self, action):
        self.actions.append(action)

    def score(self):
        return sum(abs(a) for a in self.actions)


# -- wires -----------------------------------------------------------------------

def test_binary_levels():
    frames = wire_transmit(WireConfig("binary", 5000.0, 1), [[1], [0], [1], [0]])
    assert [f.payload for f in frames] == [(1,), (0,), (1,), (0,)]
    assert [f.index for f in frames] == [0, 1, 2, 3]


def test_pwm_quantization_examples():
    cfg = WireConfig("pwm", 10.0, 1, pwm_slots=8)
    assert wire_transmit(cfg, [[0.5]])[0].payload == (4 / 8,)
    assert wire_transmit(cfg, [[1.0]])[0].payload == (8 / 8,)
    assert quantize_duty(1 / 16, 8) == 1 / 8  # tie goes up


def test_pwm_out_of_range():
    cfg = WireConfig("pwm", 10.0, 1, pwm_slots=8)
    for d in (-0.01, 1.01, math.nan):
        with pytest.raises(SignalError):
            wire_transmit(cfg, [[d]])


def test_binary_rejects_non_levels():
    with pytest.raises(SignalError):
        wire_transmit(WireConfig("binary", 5000.0, 1), [[0.5]])


def test_receive_line_mismatch():
    with pytest.raises(WireError, match="3 lines"):
        wire_receive(WireConfig("binary", 5000.0, 2), [WireFrame(0, (0, 1, 0))])


@pytest.mark.parametrize("kwargs", [
    dict(mode="serial", wire_hz=10.0, lines=1),
    dict(mode="binary", wire_hz=0.0, lines=1),
    dict(mode="binary", wire_hz=10.0, lines=0),
    dict(mode="pwm", wire_hz=10.0, lines=1, pwm_slots=1),
])
def test_bad_wire_configs(kwargs):
    with pytest.raises(ConfigError):
        WireConfig(**kwargs)


def test_default_pwm_slots():
    assert WireConfig("pwm", 10.0, 1).pwm_slots == 256


@settings(max_examples=100)
@given(st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), max_size=60)))
def test_prop_binary_lossless(pattern):
    lines = len(pattern[0]) if pattern else 1
    cfg = WireConfig("binary", 5000.0, lines)
    assert [list(p) for p in wire_receive(cfg, wire_transmit(cfg, pattern))] == pattern


@settings(max_examples=200)
@given(st.floats(0.0, 1.0), st.integers(2, 4096))
def test_prop_pwm_bound(duty, slots):
    cfg = WireConfig("pwm", 10.0, 1, pwm_slots=slots)
    (got,) = wire_receive(cfg, wire_transmit(cfg, [[duty]]))[0]
    # Compare in exact rationals; float subtraction overshoots the bound at exact ties.
    level = round(got * slots)
    assert got == level / slots
    assert abs(Fraction(level, slots) - Fraction(duty)) <= Fraction(1, 2 * slots)


# -- config checks ---------------------------------------------------------------

def test_config_line_count_mismatch():
    cfg = replace(relay_cfg(), input_wire=WireConfig("binary", 5000.0, 3))
    with pytest.raises(ConfigError, match="lines"):
        cfg.check()


def test_config_binding_outside_network():
    cfg = replace(relay_cfg(), decoder=DecoderSpec("count", 50, (9,)))
    assert any("9" in p for p in cfg.problems())


def test_config_window_mismatch():
    cfg = replace(relay_cfg(), decoder=DecoderSpec("count", 40, (0,)))
    with pytest.raises(ConfigError):
        cfg.check()


# -- open loop -------------------------------------------------------------------

def test_relay_vmax_decodes_to_scale():
    res = run_pipeline_open(relay_cfg(scale=2.5), [(0.0, 1.0)])
    assert res.windows[0].decoded == 2.5


def test_timing_anchor_5khz():
    t = timing_report(relay_cfg("binary", 5000.0, 50), 1)
    assert t.window_ms == 10.0
    assert t.tick_ms == 0.2


def test_timing_anchor_10hz():
    t = timing_report(relay_cfg("pwm", 10.0, 50), 1)
    assert t.input_frame_ms == 100.0
    assert t.output_frame_ms == 100.0


def test_timing_uses_slowest_stage():
    cfg = replace(relay_cfg("binary", 5000.0, 50), output_wire=WireConfig("pwm", 10.0, 1))
    t = timing_report(cfg, 3)
    assert t.window_ms == 5000.0
    assert t.total_ms == 15000.0


def test_timing_report_format():
    text = timing_report(relay_cfg(), 2).format()
    lines = dict(line.split("=") for line in text.splitlines())
    assert lines["window_ms"] == "10"
    assert lines["total_ms"] == "20"
    assert lines["input_wire_mode"] == "binary"


@settings(max_examples=100)
@given(st.floats(1.0, 1e5), st.floats(1.0, 1e5), st.integers(1, 200), st.integers(1, 20))
def test_prop_slower_wire_never_faster(hz, lower, window, windows):
    slow = min(hz, lower)
    a = timing_report(relay_cfg("binary", hz, window), windows)
    b = timing_report(replace(relay_cfg("binary", hz, window), input_wire=WireConfig("binary", slow, 1)), windows)
    assert b.total_ms >= a.total_ms


def test_open_loop_trace_is_global():
    res = run_pipeline_open(relay_cfg(window=4), [(0.0, 0.5), (1.0, 1.0)])
    assert [(e.time, e.neuron) for e in res.trace] == [(0, 0), (1, 0), (4, 0), (5, 0), (6, 0), (7, 0)]
    assert [w.counts for w in res.windows] == [(2,), (4,)]


def test_open_loop_pwm_carries_charge():
    cfg = relay_cfg("pwm", 10.0, window=5, enc_kind="charge")
    cfg = replace(cfg, network=Network([Neuron(0, 0.5)], [], [0], [0]))
    res = run_pipeline_open(cfg, [(0.0, 0.75), (1.0, 0.25)])
    assert [w.counts for w in res.windows] == [(1,), (0,)]


def test_open_loop_rejects_unsorted_values():
    with pytest.raises(Exception):
        run_pipeline_open(relay_cfg(), [(1.0, 0.5), (0.0, 0.5)])


def test_open_loop_deterministic():
    values = [(float(i), i / 7) for i in range(8)]
    a = run_pipeline_open(relay_cfg(), values)
    b = run_pipeline_open(relay_cfg(), values)
    assert a.windows == b.windows and a.trace == b.trace


# -- closed loop -----------------------------------------------------------------

def silent_cfg():
    net = Network([Neuron(0, 5.0), Neuron(1, 5.0), Neuron(2), Neuron(3)], [], [0, 1], [2, 3])
    return PipelineConfig(
        encoder=EncoderSpec("flipflop", 0.0, 1.0, 20, (0, 1)),
        network=net,
        decoder=DecoderSpec("diff", 20, (2, 3)),
        input_wire=WireConfig("binary", 5000.0, 2),
        output_wire=WireConfig("binary", 5000.0, 2),
        neuroprocessor_hz=5000.0,
    )


def test_closed_loop_quiescence():
    app = ConstantApp(0.5)
    (ep,) = run_pipeline_closed(silent_cfg(), app, steps=25)
    assert app.actions == [0.0] * 25
    assert all(s.counts == (0, 0) for s in ep.steps)


def test_closed_loop_deterministic():
    cfg = relay_cfg(scale=1.0)
    runs = [run_pipeline_closed(cfg, ConstantApp(0.3, action_range=(0.0, 1.0)), episodes=2, seed=4, steps=10)
            for _ in range(2)]
    assert runs[0] == runs[1]
    assert [e.seed for e in runs[0]] == [4, 5]


def test_closed_loop_range_mismatch():
    with pytest.raises(ConfigError, match="sensor range"):
        run_pipeline_closed(silent_cfg(), ConstantApp(0.5, sensor_range=(0.0, 2.0)))
    with pytest.raises(ConfigError, match="action range"):
        run_pipeline_closed(silent_cfg(), ConstantApp(0.5, action_range=(0.0, 1.0)))
