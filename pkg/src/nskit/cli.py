"""``nskit`` command line.

Exit status: 0 on success, 1 for domain errors (invalid network, bad pipeline
wiring), 2 for usage and parse errors.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path
from typing import Optional, Sequence

from nskit import netio
from nskit.bench import run_bench
from nskit.car import CarParams, baseline_score, episode_run
from nskit.coding import CodingError
from nskit.evolve import CarFitness, GAError, evolve_loop
from nskit.pipeline import PipelineError, run_pipeline_open
from nskit.snn import Engine, EngineError, Network, SpikeEvent

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def _err(msg: str) -> None:
    print(f"nskit: {msg}", file=sys.stderr)


def _seeds(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def load_values(path: Path) -> list[tuple[float, float]]:
    """``<wall_time> <value>`` per line; blank lines and ``#`` comments ignored."""
    out = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) != 2:
                raise ValueError
            out.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise netio.ParseError(f"expected '<wall_time> <value>', got {raw!r}", lineno) from None
    return out


def cmd_validate(args) -> int:
    try:
        netio.load_network(args.network)
    except netio.NetworkValidationError as e:
        print("INVALID")
        for v in e.report:
            print(v)
        return EXIT_DOMAIN
    print("OK")
    return EXIT_OK


def cmd_run(args) -> int:
    net = netio.load_network(args.network)
    spikes = netio.load_spike_trace(args.spikes)
    engine = Engine(net)
    record = engine.run(spikes, args.horizon)
    out = [SpikeEvent(t, nid, 1.0) for nid, ts in record.fires.items() for t in ts]
    text = netio.dumps_spike_trace(out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    report = run_bench(args.neurons, args.synapses, args.horizon, args.seed)
    sys.stdout.write(report.format())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    doc = netio.load_pipeline(args.config)
    doc.config.check()
    result = run_pipeline_open(doc.config, load_values(Path(args.values)))
    print("window\twall_time\tvalue\tdecoded\tcounts")
    for w in result.windows:
        counts = ",".join(str(c) for c in w.counts)
        print(f"{w.index}\t{w.wall_time:.9g}\t{w.value:.9g}\t{w.decoded:.9g}\t{counts}")
    sys.stdout.write(result.timing.format())
    if args.out:
        netio.save_spike_trace(result.trace, args.out)
    return EXIT_OK


def cmd_car(args) -> int:
    doc = netio.load_pipeline(args.config)
    doc.config.check()
    params = doc.car or CarParams()
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    print("seed\tscore\tbaseline")
    scores, baselines = [], []
    for seed in args.seeds:
        ep = episode_run(params, doc.config, args.steps, seed)
        base = baseline_score(params, args.steps, seed)
        scores.append(ep.score)
        baselines.append(base)
        print(f"{seed}\t{ep.score:.9g}\t{base:.9g}")
        if out_dir is not None:
            (out_dir / f"car_seed{seed}.tsv").write_text(ep.tsv(), encoding="utf-8")
    print(f"median\t{statistics.median(scores):.9g}\t{statistics.median(baselines):.9g}")
    return EXIT_OK


def cmd_train(args) -> int:
    ga = netio.load_ga_config(args.config)
    pdoc = netio.load_pipeline(args.pipeline)
    pdoc.config.check()
    params = pdoc.car or CarParams()
    net = pdoc.config.network
    if args.keep_synapses:
        template = net
    else:
        template = Network(list(net.neurons), [], list(net.inputs), list(net.outputs), net.stdp)
    fitness = CarFitness(params, ga.fitness_seeds, ga.fitness_steps, pipeline=pdoc.config)
    workers = args.workers if args.workers is not None else ga.workers

    def progress(st):
        print(f"{st.generation}\t{st.best:.9g}\t{st.median:.9g}\t{st.best_ever:.9g}", flush=True)

    print("generation\tbest\tmedian\tbest_ever")
    result = evolve_loop(ga.config, fitness, template, workers=workers, on_generation=progress)
    netio.save_network(result.best, args.out, {"best_fitness": f"{result.best_fitness:.9g}",
                                               "trainer": "nskit train"})
    if args.stats:
        Path(args.stats).write_text(result.stats_tsv(), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nskit", description="Software neuromorphic starter kit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a network.json file")
    s.add_argument("--network", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("run", help="run a network on a spike trace")
    s.add_argument("--network", required=True)
    s.add_argument("--spikes", required=True)
    s.add_argument("--horizon", type=_positive, required=True)
    s.add_argument("--out", help="output trace path (default: stdout)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("bench", help="engine throughput on a synthetic workload")
    s.add_argument("--neurons", type=_positive, default=512)
    s.add_argument("--synapses", type=_positive, default=512)
    s.add_argument("--horizon", type=_positive, default=50000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("pipeline", help="open-loop run of a pipeline.json over a values file")
    s.add_argument("--config", required=True)
    s.add_argument("--values", required=True, help="lines of '<wall_time> <value>'")
    s.add_argument("--out", help="write the engine spike trace here")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("car", help="closed-loop car-following episodes")
    s.add_argument("--config", required=True)
    s.add_argument("--steps", type=_positive, default=500)
    s.add_argument("--seeds", type=_seeds, default=[0])
    s.add_argument("--out", help="directory for per-seed trace TSV files")
    s.set_defaults(func=cmd_car)

    s = sub.add_parser("train", help="evolve a car controller")
    s.add_argument("--config", required=True, help="ga.json")
    s.add_argument("--pipeline", required=True, help="pipeline.json giving bindings and the car world")
    s.add_argument("--out", required=True, help="where to write the best network")
    s.add_argument("--stats", help="write per-generation stats TSV here")
    s.add_argument("--workers", type=_positive)
    s.add_argument("--keep-synapses", action="store_true",
                   help="start from the pipeline network instead of a synapse-free copy")
    s.set_defaults(func=cmd_train)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (netio.ParseError, netio.SchemaError, netio.VersionError) as e:
        _err(str(e))
        return EXIT_USAGE
    except OSError as e:
        _err(str(e))
        return EXIT_USAGE
    except netio.NetworkValidationError as e:
        _err(str(e))
        return EXIT_DOMAIN
    except (netio.NetioError, EngineError, CodingError, PipelineError, GAError, ValueError) as e:
        _err(str(e))
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
