"""Spike encoders and decoders.

Encoders map a scalar onto spikes inside a window of ``T`` timesteps; decoders
map the output record of one window back to a scalar. Every encoder works on
the normalized value ``f = clamp((v - v_min) / (v_max - v_min), 0, 1)`` and
all of them round half up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from nskit.snn import OutputRecord, SpikeEvent

ENCODER_KINDS = ("rate", "population", "temporal", "charge", "flipflop")
DECODER_KINDS = ("count", "diff", "wta", "ttfs")


class CodingError(ValueError):
    """Bad coder specification or unusable input value."""


class BindingError(CodingError):
    """The output record lacks a neuron the decoder is bound to."""


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _arity_ok(kind: str, n: int) -> bool:
    if kind in ("population", "wta"):
        return n >= 2
    if kind in ("flipflop", "diff"):
        return n == 2
    return n == 1


def _arity_text(kind: str) -> str:
    if kind in ("population", "wta"):
        return "at least 2 neurons"
    if kind in ("flipflop", "diff"):
        return "exactly 2 neurons"
    return "exactly 1 neuron"


def _check_common(kind: str, kinds: tuple, window, neurons) -> None:
    if kind not in kinds:
        raise CodingError(f"unknown kind {kind!r}; expected one of {kinds}")
    if not isinstance(window, int) or isinstance(window, bool) or window < 1:
        raise CodingError(f"window must be a positive integer, got {window!r}")
    if kind in ("temporal", "ttfs") and window < 2:
        raise CodingError(f"{kind} coding needs window >= 2")
    if not _arity_ok(kind, len(neurons)):
        raise CodingError(f"{kind} needs {_arity_text(kind)}, got {len(neurons)}")
    if len(set(neurons)) != len(neurons):
        raise CodingError(f"duplicate neuron bindings {list(neurons)}")


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    v_min: float
    v_max: float
    window: int
    neurons: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        _check_common(self.kind, ENCODER_KINDS, self.window, self.neurons)
        if not (math.isfinite(self.v_min) and math.isfinite(self.v_max)):
            raise CodingError("v_min and v_max must be finite")
        if not self.v_min < self.v_max:
            raise CodingError(f"need v_min < v_max, got [{self.v_min}, {self.v_max}]")

    def normalize(self, v: float) -> float:
        if not math.isfinite(v):
            raise CodingError(f"input value {v!r} is not finite")
        f = (v - self.v_min) / (self.v_max - self.v_min)
        return min(1.0, max(0.0, f))


@dataclass(frozen=True)
class DecoderSpec:
    """``scale`` and ``offset`` map the decoded fraction onto output units.

    ``wta`` ignores both and returns the winning binding index.
    """

    kind: str
    window: int
    neurons: tuple[int, ...]
    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        _check_common(self.kind, DECODER_KINDS, self.window, self.neurons)
        if not (math.isfinite(self.scale) and math.isfinite(self.offset)):
            raise CodingError("scale and offset must be finite")

    def output_range(self) -> tuple[float, float]:
        if self.kind == "wta":
            return (0.0, float(len(self.neurons) - 1))
        lo = -1.0 if self.kind == "diff" else 0.0
        a, b = self.offset + lo * self.scale, self.offset + self.scale
        return (min(a, b), max(a, b))


CoderSpec = Union[EncoderSpec, DecoderSpec]


def _require(spec: EncoderSpec, kind: str) -> None:
    if spec.kind != kind:
        raise CodingError(f"expected a {kind} spec, got {spec.kind}")


def encode_rate(spec: EncoderSpec, v: float) -> list[SpikeEvent]:
    _require(spec, "rate")
    k = round_half_up(spec.normalize(v) * spec.window)
    nid = spec.neurons[0]
    return [SpikeEvent(t, nid, 1.0) for t in range(k)]


def encode_population(spec: EncoderSpec, v: float) -> list[SpikeEvent]:
    _require(spec, "population")
    n = len(spec.neurons)
    # Half-open bins; the last bin is closed so f == 1 stays in range.
    i = min(math.floor(spec.normalize(v) * n), n - 1)
    return [SpikeEvent(0, spec.neurons[i], 1.0)]


def encode_temporal(spec: EncoderSpec, v: float) -> list[SpikeEvent]:
    _require(spec, "temporal")
    t = round_half_up((1.0 - spec.normalize(v)) * (spec.window - 1))
    return [SpikeEvent(t, spec.neurons[0], 1.0)]


def encode_charge(spec: EncoderSpec, v: float) -> list[SpikeEvent]:
    _require(spec, "charge")
    return [SpikeEvent(0, spec.neurons[0], spec.normalize(v))]


def encode_flipflop(spec: EncoderSpec, v: float) -> list[SpikeEvent]:
    _require(spec, "flipflop")
    k = round_half_up(spec.normalize(v) * spec.window)
    a, b = spec.neurons
    return [SpikeEvent(t, a if t % 2 == 0 else b, 1.0) for t in range(k)]


_ENCODERS = {
    "rate": encode_rate,
    "population": encode_population,
    "temporal": encode_temporal,
    "charge": encode_charge,
    "flipflop": encode_flipflop,
}


def encode(spec: EncoderSpec, v: float) -> list[SpikeEvent]:
    return _ENCODERS[spec.kind](spec, v)


def _fires(record: OutputRecord, nid: int) -> list[int]:
    try:
        return record.fires[nid]
    except KeyError:
        raise BindingError(f"output record has no neuron {nid}") from None


def decode_count(spec: DecoderSpec, record: OutputRecord) -> float:
    if spec.kind != "count":
        raise CodingError(f"expected a count spec, got {spec.kind}")
    n = len(_fires(record, spec.neurons[0]))
    return n / spec.window * spec.scale + spec.offset


def decode_diff(spec: DecoderSpec, record: OutputRecord) -> float:
    """Positive results favor the first bound neuron."""
    if spec.kind != "diff":
        raise CodingError(f"expected a diff spec, got {spec.kind}")
    p, n = spec.neurons
    d = len(_fires(record, p)) - len(_fires(record, n))
    return d / spec.window * spec.scale + spec.offset


def decode_wta(spec: DecoderSpec, record: OutputRecord) -> int:
    if spec.kind != "wta":
        raise CodingError(f"expected a wta spec, got {spec.kind}")
    counts = [len(_fires(record, nid)) for nid in spec.neurons]
    return counts.index(max(counts))


def decode_ttfs(spec: DecoderSpec, record: OutputRecord) -> float:
    if spec.kind != "ttfs":
        raise CodingError(f"expected a ttfs spec, got {spec.kind}")
    times = _fires(record, spec.neurons[0])
    if not times:
        frac = 0.0
    else:
        frac = 1.0 - min(times) / (spec.window - 1)
    return frac * spec.scale + spec.offset


_DECODERS = {
    "count": decode_count,
    "diff": decode_diff,
    "wta": decode_wta,
    "ttfs": decode_ttfs,
}


def decode(spec: DecoderSpec, record: OutputRecord) -> float:
    return float(_DECODERS[spec.kind](spec, record))
