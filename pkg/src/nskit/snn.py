"""Clocked integrate-and-fire engine.

Neurons integrate charge delivered by synapses with integer delays, fire when
their potential reaches threshold, and either keep (``leak="none"``) or clear
(``leak="all"``) sub-threshold charge between timesteps. Optional refractory
periods and a pair-based additive STDP rule are available per neuron and per synapse.

A timestep ``t`` is processed in two phases: every charge arriving at ``t`` is
integrated first, then every neuron is checked against its threshold. Charges
produced by fires at ``t`` arrive no earlier than ``t + 1``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

LEAK_MODES = ("none", "all")


class EngineError(Exception):
    """Raised for illegal engine operations."""


class NotAnInputError(EngineError):
    def __init__(self, neuron: int):
        super().__init__(f"neuron {neuron} is not an input neuron")
        self.neuron = neuron


class TemporalOrderError(EngineError):
    def __init__(self, at: int, now: int):
        super().__init__(f"cannot apply a spike at t={at}: engine is already at t={now}")
        self.at = at
        self.now = now


@dataclass(frozen=True)
class Neuron:
    id: int
    threshold: float = 1.0
    leak: str = "none"
    refractory_period: int = 0


@dataclass(frozen=True)
class Synapse:
    pre: int
    post: int
    weight: float = 1.0
    delay: int = 1
    plastic: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.pre, self.post)


@dataclass(frozen=True)
class StdpRule:
    a_plus: float
    a_minus: float
    window: int
    w_min: float
    w_max: float


@dataclass(frozen=True)
class SpikeEvent:
    time: int
    neuron: int
    charge: float = 1.0

    def sort_key(self) -> tuple[int, int, float]:
        return (self.time, self.neuron, self.charge)


@dataclass
class Network:
    neurons: list[Neuron]
    synapses: list[Synapse]
    inputs: list[int]
    outputs: list[int]
    stdp: Optional[StdpRule] = None

    def neuron(self, nid: int) -> Neuron:
        for n in self.neurons:
            if n.id == nid:
                return n
        raise KeyError(nid)

    def copy(self) -> "Network":
        return Network(list(self.neurons), list(self.synapses), list(self.inputs),
                       list(self.outputs), self.stdp)

    def canonical(self) -> "Network":
        """Same network with neurons sorted by id and synapses by (pre, post)."""
        return Network(
            sorted(self.neurons, key=lambda n: n.id),
            sorted(self.synapses, key=lambda s: s.key),
            list(self.inputs),
            list(self.outputs),
            self.stdp,
        )


@dataclass(frozen=True)
class Violation:
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.element}: {self.message}"


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_network(net: Network) -> list[Violation]:
    """Check every structural invariant; an empty list means the network is valid."""
    report: list[Violation] = []
    ids: set[int] = set()
    for i, n in enumerate(net.neurons):
        where = f"neuron[{i}] (id {n.id})"
        if not _is_int(n.id) or n.id < 0:
            report.append(Violation(where, "id must be a non-negative integer"))
        elif n.id in ids:
            report.append(Violation(where, f"duplicate neuron id {n.id}"))
        else:
            ids.add(n.id)
        if not _is_finite(n.threshold):
            report.append(Violation(where, f"threshold {n.threshold!r} is not finite"))
        if n.leak not in LEAK_MODES:
            report.append(Violation(where, f"leak {n.leak!r} not in {LEAK_MODES}"))
        if not _is_int(n.refractory_period) or n.refractory_period < 0:
            report.append(Violation(where, f"refractory_period {n.refractory_period!r} must be an integer >= 0"))

    pairs: set[tuple[int, int]] = set()
    for i, s in enumerate(net.synapses):
        where = f"synapse[{i}] ({s.pre}->{s.post})"
        if s.pre not in ids:
            report.append(Violation(where, f"source neuron {s.pre} does not exist"))
        if s.post not in ids:
            report.append(Violation(where, f"target neuron {s.post} does not exist"))
        if not _is_finite(s.weight):
            report.append(Violation(where, f"weight {s.weight!r} is not finite"))
        if not _is_int(s.delay) or s.delay < 1:
            report.append(Violation(where, f"delay {s.delay!r} must be an integer >= 1"))
        if not isinstance(s.plastic, bool):
            report.append(Violation(where, "plastic must be a boolean"))
        if s.key in pairs:
            report.append(Violation(where, f"duplicate synapse {s.pre}->{s.post}"))
        pairs.add(s.key)

    for label, group in (("inputs", net.inputs), ("outputs", net.outputs)):
        if not group:
            report.append(Violation(label, "must not be empty"))
        seen: set = set()
        for nid in group:
            if nid in seen:
                report.append(Violation(label, f"duplicate neuron id {nid}"))
            seen.add(nid)
            if nid not in ids:
                report.append(Violation(label, f"neuron {nid} does not exist"))

    rule = net.stdp
    if rule is not None:
        if not (_is_finite(rule.a_plus) and rule.a_plus >= 0):
            report.append(Violation("stdp", "a_plus must be finite and >= 0"))
        if not (_is_finite(rule.a_minus) and rule.a_minus >= 0):
            report.append(Violation("stdp", "a_minus must be finite and >= 0"))
        if not _is_int(rule.window) or rule.window < 1:
            report.append(Violation("stdp", "window must be an integer >= 1"))
        if not (_is_finite(rule.w_min) and _is_finite(rule.w_max) and rule.w_min <= rule.w_max):
            report.append(Violation("stdp", "need finite w_min <= w_max"))
    return report


class InvalidNetworkError(EngineError):
    def __init__(self, report: Sequence[Violation]):
        super().__init__("invalid network:\n" + "\n".join(f"  {v}" for v in report))
        self.report = list(report)


@dataclass
class OutputRecord:
    """Fire times of each output neuron over one run."""

    fires: dict[int, list[int]] = field(default_factory=dict)

    def count(self, nid: int) -> int:
        return len(self.fires[nid])

    @property
    def counts(self) -> dict[int, int]:
        return {nid: len(ts) for nid, ts in self.fires.items()}


class Engine:
    """Mutable runtime state for one network.

    Neuron ids are mapped onto dense indices internally; all public methods
    speak neuron ids. ``log_fires=False`` skips the fire log for long
    benchmark runs; :meth:`step` still returns each step's fires.
    """

    def __init__(self, network: Network, log_fires: bool = True):
        report = validate_network(network)
        if report:
            raise InvalidNetworkError(report)
        self.network = network
        self.log_fires = log_fires
        # Dense indices follow id order so that sorted indices are sorted ids.
        neurons = sorted(network.neurons, key=lambda n: n.id)
        self._ids = [n.id for n in neurons]
        self._index = {nid: i for i, nid in enumerate(self._ids)}
        self._threshold = [float(n.threshold) for n in neurons]
        self._leak_all = [n.leak == "all" for n in neurons]
        self._refractory = [n.refractory_period for n in neurons]
        # Neurons that can fire with zero potential must be checked every step.
        self._spontaneous = [i for i, th in enumerate(self._threshold) if th <= 0.0]
        self._inputs = frozenset(network.inputs)
        self._syn_index = {s.key: k for k, s in enumerate(network.synapses)}
        self._initial_weights = [float(s.weight) for s in network.synapses]
        self.weights = list(self._initial_weights)
        # outgoing[i] -> list of (synapse index, target index, delay)
        self._outgoing: list[list[tuple[int, int, int]]] = [[] for _ in self._ids]
        self._plastic_in: list[list[tuple[int, int]]] = [[] for _ in self._ids]
        self._plastic_out: list[list[tuple[int, int]]] = [[] for _ in self._ids]
        for k, s in enumerate(network.synapses):
            pre, post = self._index[s.pre], self._index[s.post]
            self._outgoing[pre].append((k, post, s.delay))
            if s.plastic:
                self._plastic_in[post].append((k, pre))
                self._plastic_out[pre].append((k, post))
        self.reset()

    # -- state -----------------------------------------------------------------

    def reset(self, reset_weights: bool = False) -> "Engine":
        """Clear all transient state. Weights persist unless ``reset_weights``."""
        n = len(self._ids)
        self.now = 0
        self.potentials = [0.0] * n
        self._pending: dict[int, dict[int, float]] = defaultdict(dict)
        self.refractory_until = [-1] * n
        self.last_fire: list[Optional[int]] = [None] * n
        self.fire_log: list[SpikeEvent] = []
        if reset_weights:
            self.weights = list(self._initial_weights)
        return self

    def potential(self, nid: int) -> float:
        return self.potentials[self._index[nid]]

    def weight(self, pre: int, post: int) -> float:
        return self.weights[self._syn_index[(pre, post)]]

    @property
    def pending(self) -> list[tuple[int, int, float]]:
        """Queued (arrival time, neuron id, charge) entries, sorted."""
        out = []
        for t, targets in self._pending.items():
            for i, c in targets.items():
                out.append((t, self._ids[i], c))
        return sorted(out)

    def current_network(self) -> Network:
        """The loaded network with its current (possibly STDP-modified) weights."""
        syns = [replace(s, weight=w) for s, w in zip(self.network.synapses, self.weights)]
        return replace(self.network.copy(), synapses=syns)

    # -- operations ------------------------------------------------------------

    def apply_input_spike(self, neuron: int, charge: float = 1.0, at: Optional[int] = None) -> None:
        if neuron not in self._inputs:
            raise NotAnInputError(neuron)
        if at is None:
            at = self.now
        if at < self.now:
            raise TemporalOrderError(at, self.now)
        slot = self._pending[at]
        i = self._index[neuron]
        slot[i] = slot.get(i, 0.0) + charge

    def step(self) -> list[SpikeEvent]:
        t = self.now
        pot = self.potentials
        ref_until = self.refractory_until
        touched = set()
        arrivals = self._pending.pop(t, None)
        if arrivals:
            for i, c in arrivals.items():
                if ref_until[i] >= t:
                    continue
                pot[i] += c
                touched.add(i)
        candidates = touched.union(self._spontaneous) if self._spontaneous else touched
        threshold = self._threshold
        fired = sorted(
            i for i in candidates if ref_until[i] < t and pot[i] >= threshold[i]
        )
        events = []
        if fired:
            pending = self._pending
            weights = self.weights
            ids = self._ids
            for i in fired:
                pot[i] = 0.0
                ref_until[i] = t + self._refractory[i]
                for k, j, d in self._outgoing[i]:
                    slot = pending[t + d]
                    slot[j] = slot.get(j, 0.0) + weights[k]
                events.append(SpikeEvent(t, ids[i], 1.0))
            if self.log_fires:
                self.fire_log.extend(events)
        leak_all = self._leak_all
        for i in touched:
            if leak_all[i]:
                pot[i] = 0.0
        if fired and self.network.stdp is not None:
            self._stdp(t, fired)
        last = self.last_fire
        for i in fired:
            last[i] = t
        self.now = t + 1
        return events

    def stdp_update(self, fired: Iterable[int], t: Optional[int] = None) -> None:
        """Apply the STDP rule for neuron ids that fired at ``t`` (default: the last step)."""
        if self.network.stdp is None:
            raise EngineError("network has no STDP rule configured")
        if t is None:
            t = self.now - 1
        self._stdp(t, sorted(self._index[n] for n in fired))

    def _stdp(self, t: int, fired: list[int]) -> None:
        # last_fire still holds fire times strictly before t here.
        rule = self.network.stdp
        fired_set = set(fired)
        last = self.last_fire
        delta: dict[int, float] = {}
        for post in fired:
            for k, pre in self._plastic_in[post]:
                tp = last[pre]
                if tp is not None and 1 <= t - tp <= rule.window:
                    delta[k] = delta.get(k, 0.0) + rule.a_plus
        for pre in fired:
            for k, post in self._plastic_out[pre]:
                tq = t if post in fired_set else last[post]
                if tq is not None and 0 <= t - tq <= rule.window:
                    delta[k] = delta.get(k, 0.0) - rule.a_minus
        w = self.weights
        for k in sorted(delta):
            w[k] = min(rule.w_max, max(rule.w_min, w[k] + delta[k]))

    def run(self, input_spikes: Iterable[SpikeEvent], horizon: int) -> OutputRecord:
        """Reset transient state, queue ``input_spikes`` and step ``horizon`` times."""
        if horizon < 1:
            raise EngineError("horizon must be a positive integer")
        self.reset()
        for ev in input_spikes:
            if ev.time >= horizon:
                raise EngineError(f"input spike at t={ev.time} is beyond horizon {horizon}")
            self.apply_input_spike(ev.neuron, ev.charge, ev.time)
        for _ in range(horizon):
            self.step()
        return self.output_record()

    def output_record(self) -> OutputRecord:
        rec = OutputRecord({nid: [] for nid in self.network.outputs})
        for ev in self.fire_log:
            if ev.neuron in rec.fires:
                rec.fires[ev.neuron].append(ev.time)
        return rec


def run(network: Network, input_spikes: Iterable[SpikeEvent], horizon: int) -> OutputRecord:
    return Engine(network).run(input_spikes, horizon)
