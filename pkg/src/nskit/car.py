"""One-dimensional car-following demo.

A leader object random-walks along a track; the follower car reads the gap
with an infrared-style distance sensor and tries to hold ``target_distance``.
Positions are in centimeters. The sensor is a linear clamp to its range, the
motor moves the car by ``clamp(action, -1, 1) * max_step_cm`` per control step.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

from nskit.coding import DecoderSpec, EncoderSpec
from nskit.pipeline import Episode, PipelineConfig, WireConfig, run_pipeline_closed
from nskit.snn import Network, Neuron, Synapse

# Reference network layout.
IN_A, IN_B, BIAS, FORWARD, BACKWARD, ONESHOT = 0, 1, 2, 3, 4, 5
REFERENCE_WINDOW = 20


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, x))


@dataclass(frozen=True)
class SensorModel:
    r_min: float = 10.0
    r_max: float = 80.0

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ValueError(f"sensor needs r_min < r_max, got [{self.r_min}, {self.r_max}]")

    def reading(self, distance: float) -> float:
        return _clamp(distance, self.r_min, self.r_max)

    @property
    def range(self) -> tuple[float, float]:
        return (self.r_min, self.r_max)


@dataclass(frozen=True)
class MotorModel:
    max_step_cm: float = 2.0

    def __post_init__(self):
        if not self.max_step_cm > 0:
            raise ValueError("max_step_cm must be positive")

    def displacement(self, action: float) -> float:
        return _clamp(action, -1.0, 1.0) * self.max_step_cm


@dataclass(frozen=True)
class CarParams:
    """Everything needed to build a fresh world."""

    target_distance: float = 45.0
    leader_step_cm: float = 1.0
    track_length: float = 1000.0
    start_car_pos: float = 100.0
    sensor: SensorModel = field(default_factory=SensorModel)
    motor: MotorModel = field(default_factory=MotorModel)

    def __post_init__(self):
        lo, hi = self.sensor.range
        if not lo <= self.target_distance <= hi:
            raise ValueError(f"target distance {self.target_distance} outside sensor range [{lo}, {hi}]")
        if self.leader_step_cm < 0:
            raise ValueError("leader_step_cm must be >= 0")


@dataclass
class CarWorld:
    car_pos: float
    leader_pos: float
    target_distance: float
    leader_step_cm: float
    track_length: float
    sensor: SensorModel
    motor: MotorModel
    rng: random.Random

    @classmethod
    def create(cls, params: CarParams, seed: int, displacement: float = 0.0) -> "CarWorld":
        """Car at ``start_car_pos``, leader ``target_distance + displacement`` ahead."""
        car = params.start_car_pos
        leader = car + params.target_distance + displacement
        if not (0.0 <= car < leader <= params.track_length):
            raise ValueError("initial positions must satisfy 0 <= car < leader <= track_length")
        return cls(car, leader, params.target_distance, params.leader_step_cm, params.track_length,
                   params.sensor, params.motor, random.Random(seed))

    @property
    def distance(self) -> float:
        return self.leader_pos - self.car_pos

    def sensor_read(self) -> float:
        return self.sensor.reading(self.distance)

    def step(self, action: float) -> "CarWorld":
        # One coin per step even when the leader is frozen keeps seeds aligned.
        direction = 1.0 if self.rng.random() < 0.5 else -1.0
        self.leader_pos = _clamp(self.leader_pos + direction * self.leader_step_cm,
                                 self.car_pos, self.track_length)
        self.car_pos = _clamp(self.car_pos + self.motor.displacement(action), 0.0, self.leader_pos)
        return self


def world_step(world: CarWorld, action: float) -> CarWorld:
    return world.step(action)


def sensor_read(world: CarWorld) -> float:
    return world.sensor_read()


class CarApp:
    """Closed-loop binding of a car world for :func:`run_pipeline_closed`."""

    action_range = (-1.0, 1.0)

    def __init__(self, params: CarParams = CarParams(), displacement: float = 0.0):
        self.params = params
        self.displacement = displacement
        self.sensor_range = params.sensor.range
        self.world: Optional[CarWorld] = None
        self.distances: list[float] = []

    def reset(self, seed: int) -> None:
        self.world = CarWorld.create(self.params, seed, self.displacement)
        self.distances = []

    def read_sensor(self) -> float:
        return self.world.sensor_read()

    def apply_action(self, action: float) -> None:
        self.world.step(action)
        self.distances.append(self.world.distance)

    def observe(self) -> dict:
        return {"distance": self.world.distance}

    def score(self) -> float:
        return tracking_score(self.distances, self.params.target_distance)


def tracking_score(distances: Sequence[float], target: float) -> float:
    """Mean absolute gap error over the second half of an episode."""
    tail = distances[len(distances) // 2:]
    if not tail:
        return 0.0
    return sum(abs(d - target) for d in tail) / len(tail)


def build_reference_network() -> Network:
    """Hand-designed controller used to (re)generate the committed fixture.

    A bias neuron with zero threshold fires every tick. FORWARD fires one tick
    after each input spike; BACKWARD fires one tick after each bias spike that
    was not accompanied by an input spike. A one-shot neuron (zero threshold,
    self-inhibiting, no leak) fires only at t=0 and cancels FORWARD's first
    count, so for ``k >= 1`` flip-flop spikes the count difference is exactly
    ``2k - T``: zero at mid-range, positive above it, negative below it.
    """
    neurons = [
        Neuron(IN_A, 1.0, "all"),
        Neuron(IN_B, 1.0, "all"),
        Neuron(BIAS, 0.0, "all"),
        Neuron(FORWARD, 1.0, "all"),
        Neuron(BACKWARD, 1.0, "all"),
        Neuron(ONESHOT, 0.0, "none"),
    ]
    synapses = [
        Synapse(IN_A, FORWARD, 1.0, 1),
        Synapse(IN_B, FORWARD, 1.0, 1),
        Synapse(IN_A, BACKWARD, -1.0, 1),
        Synapse(IN_B, BACKWARD, -1.0, 1),
        Synapse(BIAS, BACKWARD, 1.0, 1),
        Synapse(ONESHOT, FORWARD, -1.0, 1),
        Synapse(ONESHOT, ONESHOT, -1.0, 1),
    ]
    return Network(neurons, synapses, [IN_A, IN_B], [FORWARD, BACKWARD])


def reference_network() -> Network:
    from nskit.netio import load_network

    with resources.files("nskit.data").joinpath("reference_car.json").open("r", encoding="utf-8") as fh:
        return load_network(fh)


def reference_pipeline(params: CarParams = CarParams(), network: Optional[Network] = None,
                       window: int = REFERENCE_WINDOW, wire_hz: float = 5000.0) -> PipelineConfig:
    lo, hi = params.sensor.range
    return PipelineConfig(
        encoder=EncoderSpec("flipflop", lo, hi, window, (IN_A, IN_B)),
        network=network if network is not None else reference_network(),
        decoder=DecoderSpec("diff", window, (FORWARD, BACKWARD), scale=1.0),
        input_wire=WireConfig("binary", wire_hz, 2),
        output_wire=WireConfig("binary", wire_hz, 2),
        neuroprocessor_hz=wire_hz,
    )


@dataclass
class CarEpisode:
    seed: int
    score: float
    rows: list[tuple[int, float, float, float, int, int]]
    episode: Episode

    def tsv(self) -> str:
        lines = ["step\tdistance\treading\taction\tfwd_count\tbwd_count\n"]
        for step, dist, reading, action, fwd, bwd in self.rows:
            lines.append(f"{step}\t{dist:.9g}\t{reading:.9g}\t{action:.9g}\t{fwd}\t{bwd}\n")
        return "".join(lines)


def episode_run(params: CarParams, cfg: PipelineConfig, steps: int, seed: int,
                displacement: float = 0.0, keep_trace: bool = False) -> CarEpisode:
    """Run one seeded episode. ``rows`` hold the state seen at each control step."""
    app = CarApp(params, displacement)
    ep = run_pipeline_closed(cfg, app, episodes=1, seed=seed, steps=steps, keep_trace=keep_trace)[0]
    rows = [
        (s.step, s.state["distance"], s.reading, s.action, s.counts[0], s.counts[1])
        for s in ep.steps
    ]
    return CarEpisode(seed, ep.score, rows, ep)


def baseline_score(params: CarParams, steps: int, seed: int, displacement: float = 0.0) -> float:
    """Score of a car that never moves, under the same leader walk."""
    world = CarWorld.create(params, seed, displacement)
    distances = []
    for _ in range(steps):
        world.step(0.0)
        distances.append(world.distance)
    return tracking_score(distances, params.target_distance)
