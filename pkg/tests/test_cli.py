import json
from pathlib import Path

import pytest

from nskit import netio
from nskit.cli import main

FIX = Path(__file__).parent / "fixtures"
ROOT = Path(__file__).parents[1]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- validate --------------------------------------------------------------------

def test_validate_ok(capsys):
    assert run(capsys, "validate", "--network", FIX / "relay.json")[:2] == (0, "OK\n")


def test_validate_delay0(capsys):
    code, out, _ = run(capsys, "validate", "--network", FIX / "delay0.json")
    assert code == 1
    assert out.startswith("INVALID") and "0->1" in out


def test_validate_malformed(capsys):
    code, _, err = run(capsys, "validate", "--network", FIX / "malformed.json")
    assert code == 2 and "line 4" in err


def test_validate_missing_file(capsys, tmp_path):
    assert run(capsys, "validate", "--network", tmp_path / "nope.json")[0] == 2


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--network", str(FIX / "relay.json")])
    assert info.value.code == 2


# -- run -------------------------------------------------------------------------

def test_run_relay_echoes_input(capsys):
    code, out, _ = run(capsys, "run", "--network", FIX / "relay.json", "--spikes", FIX / "relay3.spikes",
                       "--horizon", 10)
    assert code == 0
    assert netio.parse_spike_trace(out) == netio.load_spike_trace(FIX / "relay3.spikes")


def test_run_empty_trace(capsys):
    code, out, _ = run(capsys, "run", "--network", FIX / "relay.json", "--spikes", FIX / "empty.spikes",
                       "--horizon", 10)
    assert (code, out) == (0, "")


def test_run_matches_oracle_golden(capsys, tmp_path):
    horizon = (FIX / "random_small.horizon").read_text().strip()
    out_path = tmp_path / "out.spikes"
    code, _, _ = run(capsys, "run", "--network", FIX / "random_small.json", "--spikes",
                     FIX / "random_small.spikes", "--horizon", horizon, "--out", out_path)
    assert code == 0
    assert out_path.read_text() == (FIX / "random_small.golden.spikes").read_text()


def test_run_spike_past_horizon(capsys):
    code, _, err = run(capsys, "run", "--network", FIX / "relay.json", "--spikes", FIX / "relay3.spikes",
                       "--horizon", 5)
    assert code == 1 and err


def test_run_bad_trace(capsys, tmp_path):
    bad = tmp_path / "bad.spikes"
    bad.write_text("0 0 1\nx 0 1\n")
    code, _, err = run(capsys, "run", "--network", FIX / "relay.json", "--spikes", bad, "--horizon", 5)
    assert code == 2 and "line 2" in err


# -- bench -----------------------------------------------------------------------

def test_bench_report(capsys):
    code, out, _ = run(capsys, "bench", "--neurons", 32, "--synapses", 40, "--horizon", 200)
    fields = dict(line.split("=") for line in out.splitlines())
    assert code == 0
    assert set(fields) == {"neurons", "synapses", "horizon", "seed", "host_seconds",
                           "timesteps_per_second", "spikes_processed"}


# -- pipeline --------------------------------------------------------------------

def test_pipeline_golden(capsys, tmp_path):
    trace = tmp_path / "trace.spikes"
    code, out, _ = run(capsys, "pipeline", "--config", FIX / "relay_pipeline.json",
                       "--values", FIX / "relay_values.txt", "--out", trace)
    assert code == 0
    assert out == (FIX / "relay_pipeline.golden.txt").read_text()
    assert len(netio.load_spike_trace(trace)) == 0 + 13 + 25 + 40 + 50 + 50


def test_pipeline_pwm_frame_time(capsys):
    code, out, _ = run(capsys, "pipeline", "--config", FIX / "relay_pwm10.json",
                       "--values", FIX / "relay_values.txt")
    assert code == 0
    assert "input_frame_ms=100\n" in out and "output_frame_ms=100\n" in out


def test_pipeline_line_mismatch(capsys):
    code, _, err = run(capsys, "pipeline", "--config", FIX / "relay_badlines.json",
                       "--values", FIX / "relay_values.txt")
    assert code == 1 and "lines" in err


def test_shipped_relay_configs(capsys):
    for name in ("binary_5khz.json", "pwm_10hz.json"):
        code, _, _ = run(capsys, "pipeline", "--config", ROOT / "configs" / "relay" / name,
                         "--values", ROOT / "configs" / "relay" / "values.txt")
        assert code == 0


# -- car and train ---------------------------------------------------------------

def test_car_command(capsys, tmp_path):
    code, out, _ = run(capsys, "car", "--config", ROOT / "configs" / "car" / "pipeline.json",
                       "--steps", 60, "--seeds", "0,1", "--out", tmp_path)
    assert code == 0
    rows = [line.split("\t") for line in out.splitlines()]
    assert rows[0] == ["seed", "score", "baseline"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "median"]
    tsv = (tmp_path / "car_seed1.tsv").read_text().splitlines()
    assert len(tsv) == 61


def test_train_command(capsys, tmp_path):
    ga = json.loads((ROOT / "configs" / "car" / "ga.json").read_text())
    ga.update(population=4, generations=2, fitness={"seeds": [0], "steps": 20})
    ga_path = tmp_path / "ga.json"
    ga_path.write_text(json.dumps(ga))
    best, stats = tmp_path / "best.json", tmp_path / "stats.tsv"
    code, out, _ = run(capsys, "train", "--config", ga_path,
                       "--pipeline", ROOT / "configs" / "car" / "pipeline.json",
                       "--out", best, "--stats", stats)
    assert code == 0
    doc = netio.load_network_document(best)
    assert doc.network.inputs == [0, 1] and doc.network.outputs == [3, 4]
    assert "best_fitness" in doc.metadata
    assert len(stats.read_text().splitlines()) == 4
    assert out.splitlines()[0] == "generation\tbest\tmedian\tbest_ever"


def test_train_bad_ga_config(capsys, tmp_path):
    ga_path = tmp_path / "ga.json"
    ga_path.write_text('{"format_version": 1, "populaton": 8}')
    code, _, err = run(capsys, "train", "--config", ga_path,
                       "--pipeline", ROOT / "configs" / "car" / "pipeline.json", "--out", tmp_path / "b.json")
    assert code == 2 and "populaton" in err
