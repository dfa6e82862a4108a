"""Genetic-algorithm trainer for fixed-I/O networks.

A genome is a :class:`~nskit.snn.Network`. Evolution touches synapse weights
and delays, neuron thresholds and leak modes, and adds or removes synapses
within the ``max_synapses`` budget. Neuron ids and the input/output bindings
never change. Fitness is maximized.
"""

from __future__ import annotations

import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from nskit.snn import LEAK_MODES, Network, Neuron, Synapse, validate_network

Genome = Network
Fitness = Callable[[Genome], float]


class GAError(ValueError):
    pass


class BoundsError(GAError):
    pass


class IncompatibleGenomes(GAError):
    pass


@dataclass(frozen=True)
class Bounds:
    weight: tuple[float, float] = (-2.0, 2.0)
    delay: tuple[int, int] = (1, 4)
    threshold: tuple[float, float] = (-0.5, 3.0)

    def __post_init__(self):
        if not self.weight[0] < self.weight[1]:
            raise GAError(f"degenerate weight bounds {self.weight}")
        if not (1 <= self.delay[0] <= self.delay[1]) or not all(isinstance(d, int) for d in self.delay):
            raise GAError(f"delay bounds must be integers with 1 <= lo <= hi, got {self.delay}")
        if not self.threshold[0] < self.threshold[1]:
            raise GAError(f"degenerate threshold bounds {self.threshold}")


@dataclass(frozen=True)
class GAConfig:
    population: int = 32
    generations: int = 30
    tournament_k: int = 3
    mutation_rate: float = 0.1
    crossover_rate: float = 0.5
    elitism: int = 1
    seed: int = 0
    bounds: Bounds = field(default_factory=Bounds)
    max_neurons: int = 16
    max_synapses: int = 32

    def __post_init__(self):
        if self.population < 2:
            raise GAError("population must be at least 2")
        if self.generations < 0:
            raise GAError("generations must be >= 0")
        if not 1 <= self.tournament_k <= self.population:
            raise GAError("tournament_k must be in [1, population]")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise GAError(f"{name} must be in [0, 1]")
        if not 0 <= self.elitism < self.population:
            raise GAError("elitism must be in [0, population)")
        if self.max_neurons < 1 or self.max_synapses < 0:
            raise GAError("budgets must be positive")


def check_genome(cfg: GAConfig, g: Genome) -> None:
    """Raise unless ``g`` is a valid network inside the configured bounds and budgets."""
    report = validate_network(g)
    if report:
        raise BoundsError("; ".join(str(v) for v in report))
    b = cfg.bounds
    if len(g.neurons) > cfg.max_neurons:
        raise BoundsError(f"{len(g.neurons)} neurons exceed max_neurons={cfg.max_neurons}")
    if len(g.synapses) > cfg.max_synapses:
        raise BoundsError(f"{len(g.synapses)} synapses exceed max_synapses={cfg.max_synapses}")
    for n in g.neurons:
        if not b.threshold[0] <= n.threshold <= b.threshold[1]:
            raise BoundsError(f"neuron {n.id} threshold {n.threshold} outside {b.threshold}")
    for s in g.synapses:
        if not b.weight[0] <= s.weight <= b.weight[1]:
            raise BoundsError(f"synapse {s.pre}->{s.post} weight {s.weight} outside {b.weight}")
        if not b.delay[0] <= s.delay <= b.delay[1]:
            raise BoundsError(f"synapse {s.pre}->{s.post} delay {s.delay} outside {b.delay}")


def _new_synapse(cfg: GAConfig, g: Genome, rng: random.Random) -> Optional[Synapse]:
    taken = {s.key for s in g.synapses}
    ids = sorted(n.id for n in g.neurons)
    free = [(a, b) for a in ids for b in ids if (a, b) not in taken]
    if not free:
        return None
    a, b = rng.choice(free)
    return Synapse(a, b, rng.uniform(*cfg.bounds.weight), rng.randint(*cfg.bounds.delay))


def mutate(cfg: GAConfig, g: Genome, rng: random.Random, rate: Optional[float] = None) -> Genome:
    """Redraw each evolvable scalar with probability ``rate``; add/remove a synapse at ``rate / 4``."""
    if rate is None:
        rate = cfg.mutation_rate
    b = cfg.bounds
    g = g.canonical()
    neurons = []
    for n in g.neurons:
        th, leak = n.threshold, n.leak
        if rng.random() < rate:
            th = rng.uniform(*b.threshold)
        if rng.random() < rate:
            leak = rng.choice(LEAK_MODES)
        neurons.append(replace(n, threshold=th, leak=leak))
    synapses = []
    for s in g.synapses:
        w, d = s.weight, s.delay
        if rng.random() < rate:
            w = rng.uniform(*b.weight)
        if rng.random() < rate:
            d = rng.randint(*b.delay)
        synapses.append(replace(s, weight=w, delay=d))
    out = Network(neurons, synapses, list(g.inputs), list(g.outputs), g.stdp)
    if rng.random() < rate / 4 and len(out.synapses) < cfg.max_synapses:
        s = _new_synapse(cfg, out, rng)
        if s is not None:
            out.synapses.append(s)
    if rng.random() < rate / 4 and out.synapses:
        out.synapses.pop(rng.randrange(len(out.synapses)))
    return out.canonical()


def _compatible(a: Genome, b: Genome) -> None:
    if a.inputs != b.inputs or a.outputs != b.outputs:
        raise IncompatibleGenomes("parents have different input/output bindings")
    if sorted(n.id for n in a.neurons) != sorted(n.id for n in b.neurons):
        raise IncompatibleGenomes("parents have different neuron sets")


def crossover(cfg: GAConfig, a: Genome, b: Genome, rng: random.Random) -> Genome:
    _compatible(a, b)
    a, b = a.canonical(), b.canonical()
    neurons = [na if rng.random() < 0.5 else nb for na, nb in zip(a.neurons, b.neurons)]
    sa = {s.key: s for s in a.synapses}
    sb = {s.key: s for s in b.synapses}
    synapses = []
    for key in sorted(set(sa) | set(sb)):
        if key in sa and key in sb:
            synapses.append(sa[key] if rng.random() < 0.5 else sb[key])
        elif rng.random() < 0.5:
            synapses.append(sa.get(key) or sb[key])
    while len(synapses) > cfg.max_synapses:
        synapses.pop(rng.randrange(len(synapses)))
    return Network(neurons, synapses, list(a.inputs), list(a.outputs), a.stdp)


def init_population(cfg: GAConfig, template: Genome, rng: Optional[random.Random] = None) -> list[Genome]:
    """The template plus ``population - 1`` random perturbations of it.

    A perturbation redraws every scalar and then adds up to ``max_synapses // 2``
    random synapses.
    """
    check_genome(cfg, template)
    if rng is None:
        rng = random.Random(cfg.seed)
    pop = [template.canonical()]
    while len(pop) < cfg.population:
        g = mutate(cfg, template, rng, rate=1.0)
        for _ in range(rng.randint(0, cfg.max_synapses // 2)):
            if len(g.synapses) >= cfg.max_synapses:
                break
            s = _new_synapse(cfg, g, rng)
            if s is None:
                break
            g.synapses.append(s)
        pop.append(g.canonical())
    return pop


def genome_key(g: Genome) -> tuple:
    g = g.canonical()
    return (tuple(g.neurons), tuple(g.synapses), tuple(g.inputs), tuple(g.outputs), g.stdp)


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float
    median: float
    best_ever: float


@dataclass
class EvolveResult:
    best: Genome
    best_fitness: float
    stats: list[GenerationStats]

    def stats_tsv(self) -> str:
        rows = ["generation\tbest\tmedian\tbest_ever\n"]
        rows += [f"{s.generation}\t{s.best:.9g}\t{s.median:.9g}\t{s.best_ever:.9g}\n" for s in self.stats]
        return "".join(rows)


def _rank(fit: Sequence[float]) -> list[int]:
    # Ties go to the lower index so that selection is reproducible.
    return sorted(range(len(fit)), key=lambda i: (-fit[i], i))


def tournament(fit: Sequence[float], k: int, rng: random.Random) -> int:
    entrants = rng.sample(range(len(fit)), k)
    return min(entrants, key=lambda i: (-fit[i], i))


class _Evaluator:
    def __init__(self, fitness: Fitness, workers: int):
        self.fitness = fitness
        self.cache: dict[tuple, float] = {}
        self.pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def __call__(self, pop: Sequence[Genome]) -> list[float]:
        keys = [genome_key(g) for g in pop]
        todo: dict[tuple, Genome] = {}
        for k, g in zip(keys, pop):
            if k not in self.cache and k not in todo:
                todo[k] = g
        if self.pool is not None:
            values = list(self.pool.map(self.fitness, todo.values()))
        else:
            values = [self.fitness(g) for g in todo.values()]
        for k, v in zip(todo, values):
            self.cache[k] = float(v)
        return [self.cache[k] for k in keys]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def evolve_loop(cfg: GAConfig, fitness: Fitness, template: Genome, workers: int = 1,
                on_generation: Optional[Callable[[GenerationStats], None]] = None) -> EvolveResult:
    """Tournament selection with elitism.

    Generation 0 is the initial population; ``cfg.generations`` bred
    generations follow. Fitness values are cached per genome and, with
    ``workers > 1``, computed in worker processes; results are gathered in
    population order, so the run is identical to a sequential one.
    """
    rng = random.Random(cfg.seed)
    pop = init_population(cfg, template, rng)
    evaluate = _Evaluator(fitness, workers)
    stats: list[GenerationStats] = []
    best, best_fit = pop[0], float("-inf")
    try:
        for gen in range(cfg.generations + 1):
            fit = evaluate(pop)
            order = _rank(fit)
            if fit[order[0]] > best_fit:
                best, best_fit = pop[order[0]], fit[order[0]]
            st = GenerationStats(gen, fit[order[0]], statistics.median(fit), best_fit)
            stats.append(st)
            if on_generation is not None:
                on_generation(st)
            if gen == cfg.generations:
                break
            children = [pop[i] for i in order[:cfg.elitism]]
            while len(children) < cfg.population:
                a = pop[tournament(fit, cfg.tournament_k, rng)]
                if rng.random() < cfg.crossover_rate:
                    b = pop[tournament(fit, cfg.tournament_k, rng)]
                    child = crossover(cfg, a, b, rng)
                else:
                    child = a
                children.append(mutate(cfg, child, rng))
            pop = children
    finally:
        evaluate.close()
    return EvolveResult(best, best_fit, stats)


def car_template() -> Genome:
    """Blank controller with the reference layout's I/O: inputs 0, 1; outputs 3, 4; hidden 2, 5."""
    neurons = [Neuron(i, 1.0, "all") for i in range(6)]
    return Network(neurons, [], [0, 1], [3, 4])


class CarFitness:
    """Negative tracking score averaged over fixed seeds; picklable for worker pools."""

    def __init__(self, params=None, seeds: Sequence[int] = (0, 1, 2), steps: int = 100,
                 pipeline=None):
        from nskit.car import CarParams

        self.params = params if params is not None else CarParams()
        self.seeds = tuple(seeds)
        self.steps = steps
        self.pipeline = pipeline

    def __call__(self, genome: Genome) -> float:
        from nskit.car import episode_run, reference_pipeline

        if self.pipeline is None:
            cfg = reference_pipeline(self.params, network=genome)
        else:
            cfg = replace(self.pipeline, network=genome)
        scores = [episode_run(self.params, cfg, self.steps, s).score for s in self.seeds]
        return -sum(scores) / len(scores)
