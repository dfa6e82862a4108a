"""Throughput benchmark on a fixed synthetic workload.

Workload: ``N`` neurons (threshold 1, leak all) joined in a ring of weight-0.5
synapses, topped up with random extra synapses to ``S`` in total (weights in
[-0.5, 1.0], delays 1-4). Every tick, ``N // 10`` input drives (drawn with
replacement) of charge 1.0 hit random neurons. Input generation is excluded
from the timed region.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from nskit.snn import Engine, Network, Neuron, Synapse


@dataclass(frozen=True)
class BenchReport:
    neurons: int
    synapses: int
    horizon: int
    host_seconds: float
    spikes_processed: int
    seed: int = 0

    @property
    def timesteps_per_second(self) -> float:
        return self.horizon / self.host_seconds

    def format(self) -> str:
        return (
            f"neurons={self.neurons}\n"
            f"synapses={self.synapses}\n"
            f"horizon={self.horizon}\n"
            f"seed={self.seed}\n"
            f"host_seconds={self.host_seconds:.9g}\n"
            f"timesteps_per_second={self.timesteps_per_second:.9g}\n"
            f"spikes_processed={self.spikes_processed}\n"
        )


def bench_network(n: int, s: int, seed: int) -> Network:
    if n < 1 or s < 1:
        raise ValueError("need at least one neuron and one synapse")
    if s > n * n:
        raise ValueError(f"{s} synapses do not fit among {n} neurons")
    rng = np.random.default_rng(seed)
    neurons = [Neuron(i, 1.0, "all") for i in range(n)]
    synapses = [Synapse(i, (i + 1) % n, 0.5, 1) for i in range(min(n, s))]
    taken = {sy.key for sy in synapses}
    while len(synapses) < s:
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if (a, b) in taken:
            continue
        taken.add((a, b))
        synapses.append(Synapse(a, b, float(rng.uniform(-0.5, 1.0)), int(rng.integers(1, 5))))
    ids = list(range(n))
    return Network(neurons, synapses, ids, ids)


def run_bench(neurons: int = 512, synapses: int = 512, horizon: int = 50000, seed: int = 0) -> BenchReport:
    if horizon < 1:
        raise ValueError("horizon must be positive")
    net = bench_network(neurons, synapses, seed)
    rng = np.random.default_rng(seed + 1)
    drive = rng.integers(0, neurons, size=(horizon, max(1, neurons // 10))).tolist()
    engine = Engine(net, log_fires=False)
    apply, step = engine.apply_input_spike, engine.step
    fired = 0
    start = time.perf_counter()
    for t in range(horizon):
        for nid in drive[t]:
            apply(nid, 1.0, t)
        fired += len(step())
    elapsed = time.perf_counter() - start
    return BenchReport(neurons, synapses, horizon, elapsed, fired, seed)
