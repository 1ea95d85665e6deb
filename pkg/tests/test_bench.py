"""Tests for the benchmark harness."""

from src.bench import CSV_HEADER, BenchMode, enumeration_delays, run_bench, split_preprocess
from src.engine import Engine
from src.query_model import UpdateCommand
from src.query_parser import parse_query
from src.workload import Probe, ProbeKind, gen_scaling_workload

JOIN = parse_query("Q(x,y) :- E(x,y), T(y).")


def test_csv_layout():
    report = run_bench(JOIN, [(50, gen_scaling_workload(JOIN, 50, seed=3, updates=40, probes=6))])
    lines = report.to_csv().splitlines()
    assert lines[0] == CSV_HEADER
    for line in lines[1:]:
        phase, size, metric, value = line.split(",")
        assert size == "50"
        float(value)
    assert report.value("size", 50, "facts") > 0


def test_empty_stream_has_no_update_samples():
    report = run_bench(JOIN, [(10, [])])
    assert report.value("update", 10, "samples") == 0
    assert report.value("update", 10, "median_us") is None
    assert report.value("preprocess", 10, "steps") == 0


def test_split_preprocess():
    stream = [
        UpdateCommand.insert("E", "1", "2"),
        UpdateCommand.insert("T", "2"),
        Probe(kind=ProbeKind.COUNT),
        UpdateCommand.insert("T", "3"),
    ]
    preprocess, rest = split_preprocess(stream)
    assert len(preprocess) == 2
    assert rest[0] == Probe(kind=ProbeKind.COUNT)


def test_enumeration_delays_cover_every_tuple(example_query, example_db):
    engine = Engine.create(example_query)
    engine.load(example_db)
    produced, deltas = enumeration_delays(engine)
    assert produced == 23
    assert len(deltas) == 24
    assert max(deltas) <= 10


def test_step_metrics_do_not_grow_with_size():
    workloads = [(size, gen_scaling_workload(JOIN, size, seed=5)) for size in (100, 1000)]
    report = run_bench(JOIN, workloads)
    assert report.value("update", 100, "max_steps") == report.value("update", 1000, "max_steps") == 2
    assert report.value("enum", 100, "max_delay_steps") == report.value("enum", 1000, "max_delay_steps") == 4
    assert report.value("preprocess", 1000, "steps") > report.value("preprocess", 100, "steps")


def test_oracle_mode_reports_wall_time_only():
    stream = gen_scaling_workload(JOIN, 30, seed=1, updates=20, probes=4)
    report = run_bench(JOIN, [(30, stream)], mode=BenchMode.ORACLE)
    assert report.value("update", 30, "samples") > 0
    assert report.value("update", 30, "max_steps") is None
    assert report.value("preprocess", 30, "steps") is None
