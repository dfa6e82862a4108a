"""Strict, versioned file formats.

* ``network.json`` -- a network document::

      {"format_version": 1,
       "network": {"neurons": [{"id", "threshold", "leak", "refractory_period"}, ...],
                   "synapses": [{"from", "to", "weight", "delay", "plastic"}, ...],
                   "inputs": [...], "outputs": [...],
                   "stdp": null | {"a_plus", "a_minus", "window", "w_min", "w_max"}},
       "metadata": {str: str}}

* ``coder.json`` -- one encoder or decoder::

      {"format_version": 1, "role": "encoder", "kind", "v_min", "v_max", "window", "neurons"}
      {"format_version": 1, "role": "decoder", "kind", "window", "neurons", "scale", "offset"}

* ``pipeline.json`` -- encoder, network and decoder (file paths relative to
  the config, or inline documents), two wire configs, the neuroprocessor rate
  and an optional ``car`` section.

* ``ga.json`` -- GA hyperparameters, bounds and fitness settings.

* ``.spikes`` -- text, one ``<time> <neuron> <charge>`` event per line.

Saves are canonical: keys are written in the order listed above, neurons are
sorted by id and synapses by (from, to), so equal objects give equal bytes.
Loading rejects unknown keys anywhere in a document.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Optional, Union

from nskit.car import CarParams, MotorModel, SensorModel
from nskit.coding import CoderSpec, CodingError, DecoderSpec, EncoderSpec
from nskit.evolve import Bounds, GAConfig, GAError
from nskit.pipeline import DEFAULT_PWM_SLOTS, PipelineConfig, PipelineError, WireConfig
from nskit.snn import (
    Network,
    Neuron,
    SpikeEvent,
    StdpRule,
    Synapse,
    validate_network,
)

FORMAT_VERSION = 1

Source = Union[str, os.PathLike, IO[str]]


class NetioError(Exception):
    """Base class for load/save failures."""


class ParseError(NetioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class SchemaError(NetioError):
    """Wrong keys, wrong types or values outside their domain."""


class VersionError(NetioError):
    pass


class NetworkValidationError(NetioError):
    def __init__(self, report):
        super().__init__("network failed validation:\n" + "\n".join(f"  {v}" for v in report))
        self.report = list(report)


# -- low-level helpers ---------------------------------------------------------

def _read_text(src: Source) -> str:
    if hasattr(src, "read"):
        return src.read()
    return Path(src).read_text(encoding="utf-8")


def _write_text(text: str, dst: Source) -> None:
    if hasattr(dst, "write"):
        dst.write(text)
    else:
        Path(dst).write_text(text, encoding="utf-8")


def _parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from None


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _obj(x: Any, where: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(x, dict):
        raise SchemaError(f"{where}: expected an object")
    required, optional = list(required), list(optional)
    unknown = sorted(set(x) - set(required) - set(optional))
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in x]
    if missing:
        raise SchemaError(f"{where}: missing key(s) {', '.join(missing)}")
    return x


def _int(x: Any, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise SchemaError(f"{where}: expected an integer, got {x!r}")
    return x


def _num(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise SchemaError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _bool(x: Any, where: str) -> bool:
    if not isinstance(x, bool):
        raise SchemaError(f"{where}: expected true/false, got {x!r}")
    return x


def _str(x: Any, where: str) -> str:
    if not isinstance(x, str):
        raise SchemaError(f"{where}: expected a string, got {x!r}")
    return x


def _int_list(x: Any, where: str) -> list[int]:
    if not isinstance(x, list):
        raise SchemaError(f"{where}: expected a list")
    return [_int(v, f"{where}[{i}]") for i, v in enumerate(x)]


def _version(doc: dict, where: str) -> None:
    v = _int(doc["format_version"], f"{where}.format_version")
    if v != FORMAT_VERSION:
        raise VersionError(f"{where}: unsupported format_version {v} (expected {FORMAT_VERSION})")


# -- networks ------------------------------------------------------------------

@dataclass
class NetworkDocument:
    network: Network
    metadata: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def network_from_dict(d: Any, where: str = "network") -> Network:
    d = _obj(d, where, ["neurons", "synapses", "inputs", "outputs"], ["stdp"])
    if not isinstance(d["neurons"], list) or not isinstance(d["synapses"], list):
        raise SchemaError(f"{where}: neurons and synapses must be lists")
    neurons = []
    for i, n in enumerate(d["neurons"]):
        w = f"{where}.neurons[{i}]"
        n = _obj(n, w, ["id", "threshold", "leak", "refractory_period"])
        neurons.append(Neuron(
            id=_int(n["id"], w + ".id"),
            threshold=_num(n["threshold"], w + ".threshold"),
            leak=_str(n["leak"], w + ".leak"),
            refractory_period=_int(n["refractory_period"], w + ".refractory_period"),
        ))
    synapses = []
    for i, s in enumerate(d["synapses"]):
        w = f"{where}.synapses[{i}]"
        s = _obj(s, w, ["from", "to", "weight", "delay", "plastic"])
        synapses.append(Synapse(
            pre=_int(s["from"], w + ".from"),
            post=_int(s["to"], w + ".to"),
            weight=_num(s["weight"], w + ".weight"),
            delay=_int(s["delay"], w + ".delay"),
            plastic=_bool(s["plastic"], w + ".plastic"),
        ))
    stdp = None
    if d.get("stdp") is not None:
        w = where + ".stdp"
        r = _obj(d["stdp"], w, ["a_plus", "a_minus", "window", "w_min", "w_max"])
        stdp = StdpRule(
            a_plus=_num(r["a_plus"], w + ".a_plus"),
            a_minus=_num(r["a_minus"], w + ".a_minus"),
            window=_int(r["window"], w + ".window"),
            w_min=_num(r["w_min"], w + ".w_min"),
            w_max=_num(r["w_max"], w + ".w_max"),
        )
    return Network(neurons, synapses, _int_list(d["inputs"], where + ".inputs"),
                   _int_list(d["outputs"], where + ".outputs"), stdp)


def network_to_dict(net: Network) -> dict:
    net = net.canonical()
    return {
        "neurons": [
            {"id": n.id, "threshold": float(n.threshold), "leak": n.leak,
             "refractory_period": n.refractory_period}
            for n in net.neurons
        ],
        "synapses": [
            {"from": s.pre, "to": s.post, "weight": float(s.weight), "delay": s.delay,
             "plastic": s.plastic}
            for s in net.synapses
        ],
        "inputs": list(net.inputs),
        "outputs": list(net.outputs),
        "stdp": None if net.stdp is None else {
            "a_plus": float(net.stdp.a_plus),
            "a_minus": float(net.stdp.a_minus),
            "window": net.stdp.window,
            "w_min": float(net.stdp.w_min),
            "w_max": float(net.stdp.w_max),
        },
    }


def load_network_document(src: Source) -> NetworkDocument:
    doc = _obj(_parse_json(_read_text(src)), "document", ["format_version", "network"], ["metadata"])
    _version(doc, "document")
    net = network_from_dict(doc["network"])
    report = validate_network(net)
    if report:
        raise NetworkValidationError(report)
    meta = doc.get("metadata", {})
    if not isinstance(meta, dict):
        raise SchemaError("document.metadata: expected an object")
    meta = {k: _str(v, f"document.metadata.{k}") for k, v in meta.items()}
    return NetworkDocument(net, meta)


def load_network(src: Source) -> Network:
    return load_network_document(src).network


def dumps_network(net: Network, metadata: dict[str, str] | None = None) -> str:
    report = validate_network(net)
    if report:
        raise NetworkValidationError(report)
    return _dumps({
        "format_version": FORMAT_VERSION,
        "network": network_to_dict(net),
        "metadata": dict(sorted((metadata or {}).items())),
    })


def save_network(net: Network, dst: Source, metadata: dict[str, str] | None = None) -> None:
    _write_text(dumps_network(net, metadata), dst)


# -- coder specs ---------------------------------------------------------------

def coder_from_dict(d: Any, where: str = "coder") -> CoderSpec:
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    role = d.get("role")
    try:
        if role == "encoder":
            d = _obj(d, where, ["format_version", "role", "kind", "v_min", "v_max", "window", "neurons"])
            _version(d, where)
            return EncoderSpec(
                kind=_str(d["kind"], where + ".kind"),
                v_min=_num(d["v_min"], where + ".v_min"),
                v_max=_num(d["v_max"], where + ".v_max"),
                window=_int(d["window"], where + ".window"),
                neurons=tuple(_int_list(d["neurons"], where + ".neurons")),
            )
        if role == "decoder":
            d = _obj(d, where, ["format_version", "role", "kind", "window", "neurons"], ["scale", "offset"])
            _version(d, where)
            return DecoderSpec(
                kind=_str(d["kind"], where + ".kind"),
                window=_int(d["window"], where + ".window"),
                neurons=tuple(_int_list(d["neurons"], where + ".neurons")),
                scale=_num(d.get("scale", 1.0), where + ".scale"),
                offset=_num(d.get("offset", 0.0), where + ".offset"),
            )
    except CodingError as e:
        raise SchemaError(f"{where}: {e}") from None
    raise SchemaError(f"{where}.role: expected 'encoder' or 'decoder', got {role!r}")


def coder_to_dict(spec: CoderSpec) -> dict:
    if isinstance(spec, EncoderSpec):
        return {
            "format_version": FORMAT_VERSION, "role": "encoder", "kind": spec.kind,
            "v_min": float(spec.v_min), "v_max": float(spec.v_max),
            "window": spec.window, "neurons": list(spec.neurons),
        }
    return {
        "format_version": FORMAT_VERSION, "role": "decoder", "kind": spec.kind,
        "window": spec.window, "neurons": list(spec.neurons),
        "scale": float(spec.scale), "offset": float(spec.offset),
    }


def load_coder_spec(src: Source) -> CoderSpec:
    return coder_from_dict(_parse_json(_read_text(src)))


def dumps_coder_spec(spec: CoderSpec) -> str:
    return _dumps(coder_to_dict(spec))


def save_coder_spec(spec: CoderSpec, dst: Source) -> None:
    _write_text(dumps_coder_spec(spec), dst)


# -- pipeline configs ----------------------------------------------------------

@dataclass
class PipelineDocument:
    """A parsed ``pipeline.json``; ``car`` is present when the file has a ``car`` section."""

    config: PipelineConfig
    car: Optional[CarParams] = None


_CAR_KEYS = ["target_distance", "leader_step_cm", "track_length", "start_car_pos",
             "sensor_min", "sensor_max", "max_step_cm"]


def _wire_from_dict(d: Any, where: str) -> WireConfig:
    d = _obj(d, where, ["mode", "wire_hz", "lines"], ["pwm_slots"])
    try:
        return WireConfig(
            mode=_str(d["mode"], where + ".mode"),
            wire_hz=_num(d["wire_hz"], where + ".wire_hz"),
            lines=_int(d["lines"], where + ".lines"),
            pwm_slots=_int(d.get("pwm_slots", DEFAULT_PWM_SLOTS), where + ".pwm_slots"),
        )
    except PipelineError as e:
        raise SchemaError(f"{where}: {e}") from None


def _wire_to_dict(w: WireConfig) -> dict:
    return {"mode": w.mode, "wire_hz": float(w.wire_hz), "lines": w.lines, "pwm_slots": w.pwm_slots}


def _car_from_dict(d: Any, where: str) -> CarParams:
    d = _obj(d, where, [], _CAR_KEYS)
    base = CarParams()
    vals = {k: _num(d[k], f"{where}.{k}") for k in d}
    try:
        return CarParams(
            target_distance=vals.get("target_distance", base.target_distance),
            leader_step_cm=vals.get("leader_step_cm", base.leader_step_cm),
            track_length=vals.get("track_length", base.track_length),
            start_car_pos=vals.get("start_car_pos", base.start_car_pos),
            sensor=SensorModel(vals.get("sensor_min", base.sensor.r_min),
                               vals.get("sensor_max", base.sensor.r_max)),
            motor=MotorModel(vals.get("max_step_cm", base.motor.max_step_cm)),
        )
    except ValueError as e:
        raise SchemaError(f"{where}: {e}") from None


def _car_to_dict(c: CarParams) -> dict:
    return {
        "target_distance": float(c.target_distance),
        "leader_step_cm": float(c.leader_step_cm),
        "track_length": float(c.track_length),
        "start_car_pos": float(c.start_car_pos),
        "sensor_min": float(c.sensor.r_min),
        "sensor_max": float(c.sensor.r_max),
        "max_step_cm": float(c.motor.max_step_cm),
    }


def _ref(x: Any, where: str, base: Optional[Path], loader, from_dict):
    """A component given either as a relative file path or inline."""
    if isinstance(x, str):
        path = Path(x) if base is None else base / x
        try:
            return loader(path)
        except OSError as e:
            raise NetioError(f"{where}: cannot read {path}: {e}") from None
    return from_dict(x)


def _inline_network(x: Any) -> Network:
    doc = _obj(x, "pipeline.network", ["format_version", "network"], ["metadata"])
    _version(doc, "pipeline.network")
    net = network_from_dict(doc["network"], "pipeline.network.network")
    report = validate_network(net)
    if report:
        raise NetworkValidationError(report)
    return net


def pipeline_from_dict(doc: Any, base: Optional[Path] = None) -> PipelineDocument:
    doc = _obj(doc, "pipeline", ["format_version", "encoder", "network", "decoder", "input_wire",
                                 "output_wire", "neuroprocessor_hz"], ["car"])
    _version(doc, "pipeline")
    enc = _ref(doc["encoder"], "pipeline.encoder", base, load_coder_spec,
               lambda x: coder_from_dict(x, "pipeline.encoder"))
    dec = _ref(doc["decoder"], "pipeline.decoder", base, load_coder_spec,
               lambda x: coder_from_dict(x, "pipeline.decoder"))
    if not isinstance(enc, EncoderSpec):
        raise SchemaError("pipeline.encoder: expected an encoder")
    if not isinstance(dec, DecoderSpec):
        raise SchemaError("pipeline.decoder: expected a decoder")
    net = _ref(doc["network"], "pipeline.network", base, load_network, _inline_network)
    cfg = PipelineConfig(
        encoder=enc,
        network=net,
        decoder=dec,
        input_wire=_wire_from_dict(doc["input_wire"], "pipeline.input_wire"),
        output_wire=_wire_from_dict(doc["output_wire"], "pipeline.output_wire"),
        neuroprocessor_hz=_num(doc["neuroprocessor_hz"], "pipeline.neuroprocessor_hz"),
    )
    car = None if doc.get("car") is None else _car_from_dict(doc["car"], "pipeline.car")
    return PipelineDocument(cfg, car)


def load_pipeline(src: Source) -> PipelineDocument:
    """Load ``pipeline.json``. File references resolve relative to the file's directory.

    Configuration problems across components (bindings, line counts) are left
    to :meth:`PipelineConfig.check` so callers can report them as such.
    """
    base = None if hasattr(src, "read") else Path(src).parent
    return pipeline_from_dict(_parse_json(_read_text(src)), base)


def dumps_pipeline(doc: PipelineDocument) -> str:
    """Canonical, fully inlined form."""
    cfg = doc.config
    out = {
        "format_version": FORMAT_VERSION,
        "encoder": coder_to_dict(cfg.encoder),
        "network": {"format_version": FORMAT_VERSION, "network": network_to_dict(cfg.network),
                    "metadata": {}},
        "decoder": coder_to_dict(cfg.decoder),
        "input_wire": _wire_to_dict(cfg.input_wire),
        "output_wire": _wire_to_dict(cfg.output_wire),
        "neuroprocessor_hz": float(cfg.neuroprocessor_hz),
        "car": None if doc.car is None else _car_to_dict(doc.car),
    }
    return _dumps(out)


def save_pipeline(doc: PipelineDocument, dst: Source) -> None:
    _write_text(dumps_pipeline(doc), dst)


# -- GA configs ----------------------------------------------------------------

_GA_KEYS = ["population", "generations", "tournament_k", "mutation_rate", "crossover_rate",
            "elitism", "seed", "bounds", "max_neurons", "max_synapses"]


@dataclass
class GADocument:
    config: GAConfig
    fitness_seeds: tuple[int, ...] = (0, 1, 2)
    fitness_steps: int = 100
    workers: int = 1


def ga_from_dict(doc: Any) -> GADocument:
    doc = _obj(doc, "ga", ["format_version"], _GA_KEYS + ["fitness", "workers"])
    _version(doc, "ga")
    kw: dict[str, Any] = {}
    for k in ("population", "generations", "tournament_k", "elitism", "seed", "max_neurons",
              "max_synapses"):
        if k in doc:
            kw[k] = _int(doc[k], f"ga.{k}")
    for k in ("mutation_rate", "crossover_rate"):
        if k in doc:
            kw[k] = _num(doc[k], f"ga.{k}")
    try:
        if "bounds" in doc:
            b = _obj(doc["bounds"], "ga.bounds", [], ["weight", "delay", "threshold"])
            bk: dict[str, Any] = {}
            for name, conv in (("weight", _num), ("delay", _int), ("threshold", _num)):
                if name in b:
                    pair = b[name]
                    if not isinstance(pair, list) or len(pair) != 2:
                        raise SchemaError(f"ga.bounds.{name}: expected [lo, hi]")
                    bk[name] = (conv(pair[0], f"ga.bounds.{name}[0]"), conv(pair[1], f"ga.bounds.{name}[1]"))
            kw["bounds"] = Bounds(**bk)
        cfg = GAConfig(**kw)
    except GAError as e:
        raise SchemaError(f"ga: {e}") from None
    out = GADocument(cfg, workers=_int(doc.get("workers", 1), "ga.workers"))
    if "fitness" in doc:
        f = _obj(doc["fitness"], "ga.fitness", [], ["seeds", "steps"])
        if "seeds" in f:
            out.fitness_seeds = tuple(_int_list(f["seeds"], "ga.fitness.seeds"))
        if "steps" in f:
            out.fitness_steps = _int(f["steps"], "ga.fitness.steps")
    return out


def load_ga_config(src: Source) -> GADocument:
    return ga_from_dict(_parse_json(_read_text(src)))


def dumps_ga_config(doc: GADocument) -> str:
    c = doc.config
    return _dumps({
        "format_version": FORMAT_VERSION,
        "population": c.population,
        "generations": c.generations,
        "tournament_k": c.tournament_k,
        "mutation_rate": float(c.mutation_rate),
        "crossover_rate": float(c.crossover_rate),
        "elitism": c.elitism,
        "seed": c.seed,
        "bounds": {
            "weight": [float(c.bounds.weight[0]), float(c.bounds.weight[1])],
            "delay": [c.bounds.delay[0], c.bounds.delay[1]],
            "threshold": [float(c.bounds.threshold[0]), float(c.bounds.threshold[1])],
        },
        "max_neurons": c.max_neurons,
        "max_synapses": c.max_synapses,
        "fitness": {"seeds": list(doc.fitness_seeds), "steps": doc.fitness_steps},
        "workers": doc.workers,
    })


# -- spike traces --------------------------------------------------------------

def parse_spike_trace(text: str) -> list[SpikeEvent]:
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected '<time> <neuron> <charge>', got {raw!r}", lineno)
        try:
            t, n, c = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"malformed event {raw!r}", lineno) from None
        if t < 0 or n < 0 or not math.isfinite(c):
            raise ParseError(f"event out of domain {raw!r}", lineno)
        events.append(SpikeEvent(t, n, c))
    events.sort(key=SpikeEvent.sort_key)
    return events


def load_spike_trace(src: Source) -> list[SpikeEvent]:
    return parse_spike_trace(_read_text(src))


def format_charge(c: float) -> str:
    return f"{c:.9g}"


def dumps_spike_trace(events: Iterable[SpikeEvent]) -> str:
    buf = io.StringIO()
    for ev in sorted(events, key=SpikeEvent.sort_key):
        buf.write(f"{ev.time} {ev.neuron} {format_charge(ev.charge)}\n")
    return buf.getvalue()


def save_spike_trace(events: Iterable[SpikeEvent], dst: Source) -> None:
    _write_text(dumps_spike_trace(events), dst)


__all__ = [
    "GADocument",
    "PipelineDocument",
    "dumps_ga_config",
    "dumps_pipeline",
    "load_ga_config",
    "load_pipeline",
    "save_pipeline",
    "NetworkDocument",
    "NetioError",
    "NetworkValidationError",
    "ParseError",
    "SchemaError",
    "VersionError",
    "dumps_coder_spec",
    "dumps_network",
    "dumps_spike_trace",
    "load_coder_spec",
    "load_network",
    "load_network_document",
    "load_spike_trace",
    "save_coder_spec",
    "save_network",
    "save_spike_trace",
]
