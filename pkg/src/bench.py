"""
Benchmark harness for the engine and the recompute-from-scratch baseline.

Each workload is replayed on a fresh evaluator. The leading block of
inserts is the preprocessing phase; the remaining updates are timed one
by one and the probes are timed per kind. In engine mode every phase
also records instrumented steps, which are deterministic for a given
query and stream.
"""

import logging
import statistics
import time
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from .engine import END_OF_ENUMERATION, Engine
from .oracle import OracleRecompute
from .query_model import Query, UpdateCommand, UpdateKind
from .workload import Probe, ProbeKind, StreamCommand

logger = logging.getLogger(__name__)

CSV_HEADER = "phase,size,metric,value"


class BenchMode(str, Enum):
    ENGINE = "engine"
    ORACLE = "oracle"


class BenchRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    phase: str
    size: int
    metric: str
    value: Union[int, float]

    def to_csv(self) -> str:
        value = f"{self.value:.3f}" if isinstance(self.value, float) else str(self.value)
        return f"{self.phase},{self.size},{self.metric},{value}"


class BenchReport(BaseModel):
    mode: BenchMode
    rows: List[BenchRow] = Field(default_factory=list)

    def add(self, phase: str, size: int, metric: str, value: Union[int, float]) -> None:
        self.rows.append(BenchRow(phase=phase, size=size, metric=metric, value=value))

    def value(self, phase: str, size: int, metric: str) -> Optional[Union[int, float]]:
        for row in self.rows:
            if (row.phase, row.size, row.metric) == (phase, size, metric):
                return row.value
        return None

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [row.to_csv() for row in self.rows]) + "\n"


def split_preprocess(stream: Sequence[StreamCommand]) -> Tuple[List[UpdateCommand], List[StreamCommand]]:
    """The leading insert block and the rest of the stream."""
    position = 0
    while position < len(stream):
        command = stream[position]
        if not isinstance(command, UpdateCommand) or command.kind is not UpdateKind.INSERT:
            break
        position += 1
    return list(stream[:position]), list(stream[position:])  # type: ignore[arg-type]


def enumeration_delays(engine: Engine) -> Tuple[int, List[int]]:
    """
    Run one full enumeration and collect the step deltas between yields.

    The first delta is measured from opening the cursor, the last one up
    to the end-of-enumeration answer. Returns ``(tuples, deltas)``.
    """
    before = engine.step_counter
    cursor = engine.open_cursor()
    deltas: List[int] = []
    produced = 0
    while True:
        result = cursor.next()
        now = engine.step_counter
        deltas.append(now - before)
        before = now
        if result is END_OF_ENUMERATION:
            return produced, deltas
        produced += 1


def _micros(seconds: Iterable[float]) -> List[float]:
    return [value * 1e6 for value in seconds]


def _summarise(report: BenchReport, phase: str, size: int, samples: List[float], steps: Optional[List[int]]) -> None:
    report.add(phase, size, "samples", len(samples))
    if samples:
        micros = _micros(samples)
        report.add(phase, size, "median_us", statistics.median(micros))
        report.add(phase, size, "max_us", max(micros))
    if steps:
        report.add(phase, size, "median_steps", statistics.median(steps))
        report.add(phase, size, "max_steps", max(steps))


def _bench_engine(q: Query, size: int, stream: Sequence[StreamCommand], report: BenchReport, warmup_fraction: float) -> None:
    engine = Engine.create(q)
    preprocess, rest = split_preprocess(stream)

    started = time.perf_counter()
    for command in preprocess:
        engine.apply(command)
    report.add("preprocess", size, "wall_ms", (time.perf_counter() - started) * 1e3)
    report.add("preprocess", size, "steps", engine.step_counter)
    report.add("size", size, "adom", engine.facts.adom_size)
    report.add("size", size, "facts", len(engine.facts))

    update_times: List[float] = []
    update_steps: List[int] = []
    probe_times = {kind: [] for kind in ProbeKind}  # type: dict
    delays: List[int] = []
    for command in rest:
        if isinstance(command, Probe):
            started = time.perf_counter()
            if command.kind is ProbeKind.COUNT:
                engine.count()
            elif command.kind is ProbeKind.ANSWER:
                engine.answer()
            else:
                _, deltas = enumeration_delays(engine)
                delays.extend(deltas)
            probe_times[command.kind].append(time.perf_counter() - started)
            continue
        before = engine.step_counter
        started = time.perf_counter()
        engine.apply(command)
        update_times.append(time.perf_counter() - started)
        update_steps.append(engine.step_counter - before)

    skip = int(len(update_times) * warmup_fraction)
    _summarise(report, "update", size, update_times[skip:], update_steps[skip:])
    _summarise(report, "count", size, probe_times[ProbeKind.COUNT], None)
    _summarise(report, "answer", size, probe_times[ProbeKind.ANSWER], None)
    report.add("enum", size, "samples", len(probe_times[ProbeKind.ENUM]))
    if delays:
        report.add("enum", size, "median_delay_steps", statistics.median(delays))
        report.add("enum", size, "max_delay_steps", max(delays))
        enum_wall = sum(probe_times[ProbeKind.ENUM])
        report.add("enum", size, "mean_delay_us", enum_wall * 1e6 / len(delays))


def _bench_oracle(q: Query, size: int, stream: Sequence[StreamCommand], report: BenchReport, warmup_fraction: float) -> None:
    oracle = OracleRecompute(q)
    preprocess, rest = split_preprocess(stream)

    started = time.perf_counter()
    for command in preprocess:
        oracle.apply(command)
    report.add("preprocess", size, "wall_ms", (time.perf_counter() - started) * 1e3)
    report.add("size", size, "adom", oracle.facts.adom_size)
    report.add("size", size, "facts", len(oracle.facts))

    update_times: List[float] = []
    probe_times = {kind: [] for kind in ProbeKind}  # type: dict
    for command in rest:
        started = time.perf_counter()
        if isinstance(command, Probe):
            if command.kind is ProbeKind.COUNT:
                oracle.count()
            elif command.kind is ProbeKind.ANSWER:
                oracle.answer()
            else:
                oracle.enumerate()
            probe_times[command.kind].append(time.perf_counter() - started)
            continue
        oracle.apply(command)
        update_times.append(time.perf_counter() - started)

    skip = int(len(update_times) * warmup_fraction)
    _summarise(report, "update", size, update_times[skip:], None)
    _summarise(report, "count", size, probe_times[ProbeKind.COUNT], None)
    _summarise(report, "answer", size, probe_times[ProbeKind.ANSWER], None)
    _summarise(report, "enum", size, probe_times[ProbeKind.ENUM], None)


def run_bench(
    q: Query,
    workloads: Sequence[Tuple[int, Sequence[StreamCommand]]],
    mode: BenchMode = BenchMode.ENGINE,
    warmup_fraction: float = 0.1,
) -> BenchReport:
    """
    Replay every ``(size, stream)`` workload and collect per-phase metrics.

    Raises:
        CoreNotQHierarchical: In engine mode, if the query is not admissible.
    """
    report = BenchReport(mode=mode)
    bench = _bench_engine if mode is BenchMode.ENGINE else _bench_oracle
    for size, stream in workloads:
        logger.info("bench %s size=%d: %d commands", mode.value, size, len(stream))
        bench(q, size, stream, report, warmup_fraction)
    return report
