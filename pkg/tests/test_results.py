import threading

import orjson
import pytest

from common.utils.experiments import configHash, provenanceFor, tablePath, timestamp
from common.wqed.errors import OutputError
from simulation import ResultTable, formatCell
from simulation.events import EventType, PointEventData, SweepFinishedData, SweepStartedData, TableWrittenData
from simulation.observers import EventManager
from simulation.sim import SweepObserver


@pytest.fixture
def table() -> ResultTable:
    return ResultTable.fromSeries("amplitudes", {
        "port": ([1, 2], "index"),
        "chi": ([0.1 + 1j, None], "1"),
        "reliable": ([True, False], "flag"),
    }, provenance={"config_sha256": "abc", "experiment": "scatter"})


def test_format_cell():
    assert formatCell(0.1) == "0.10000000000000001"
    assert formatCell(float("nan")) == "nan"
    assert formatCell(None) == "nan"
    assert formatCell(True) == "1"
    assert formatCell(3) == "3"
    assert formatCell("port1") == "port1"


def test_complex_columns_are_split(table):
    assert table.columns == ["port", "chi_re", "chi_im", "reliable"]
    assert table.units == ["index", "1", "1", "flag"]
    assert table.column("chi_im") == [1.0, None]


def test_mismatched_columns_raise():
    with pytest.raises(ValueError):
        ResultTable.fromSeries("bad", {"a": ([1, 2], "1"), "b": ([1], "1")})


def test_csv_layout(table):
    lines = table.toCSV().splitlines()
    assert lines[:4] == ["# config_sha256: abc", "# experiment: scatter", "# table: amplitudes",
                         "# units: index,1,1,flag"]
    assert lines[4] == "port,chi_re,chi_im,reliable"
    assert lines[5] == "1,0.10000000000000001,1,1"
    assert lines[6] == "2,nan,nan,0"


def test_json_layout(table):
    document = orjson.loads(table.toJSON())
    assert document["provenance"]["table"] == "amplitudes"
    assert document["rows"][1] == [2, None, None, False]


def test_save_writes_atomically(tmp_path, table):
    path = table.save(tmp_path / "nested" / "run_amplitudes.csv")
    assert path.read_text().startswith("# config_sha256: abc")
    assert not (tmp_path / "nested" / "run_amplitudes.csv.tmp").exists()


def test_save_under_a_file_raises(tmp_path, table):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(OutputError) as info:
        table.save(blocker / "run_amplitudes.csv")
    assert info.value.path.endswith("run_amplitudes.csv")


def test_config_hash_ignores_key_order():
    assert configHash({"a": 1, "b": {"c": 2, "d": 3}}) == configHash({"b": {"d": 3, "c": 2}, "a": 1})
    assert configHash({"a": 1}) != configHash({"a": 2})


def test_timestamp_is_pinned(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert timestamp() == "1970-01-01T00:00:00+00:00"
    provenance = provenanceFor({"a": 1}, "sweep")
    assert provenance.timestamp == "1970-01-01T00:00:00+00:00"
    assert provenance.asObject()["experiment"] == "sweep"


@pytest.mark.parametrize("base, expected", [
    ("results/sweep", "results/sweep_s_forward.csv"),
    ("results/sweep.csv", "results/sweep_s_forward.csv"),
    ("out/run.v2", "out/run.v2_s_forward.csv"),
])
def test_table_path(base, expected):
    assert tablePath(base, "s_forward", "csv").as_posix() == expected


def test_event_manager_subscribe_and_unsubscribe():
    manager = EventManager()
    seen = []
    manager.subscribe(EventType.SWEEP_FINISHED, seen.append)
    manager.notify(EventType.SWEEP_FINISHED, SweepFinishedData("sweep"))
    manager.notify(EventType.SWEEP_STARTED, SweepStartedData("sweep", 3))
    manager.unsubscribe(seen.append)
    manager.notify(EventType.SWEEP_FINISHED, SweepFinishedData("sweep"))
    assert seen == [SweepFinishedData("sweep")]


def test_sweep_observer_counts_points():
    manager = EventManager()
    observer = SweepObserver(manager, quiet=True)
    manager.notify(EventType.SWEEP_STARTED, SweepStartedData("sweep", 3))
    manager.notify(EventType.POINT_COMPLETED, PointEventData(0, 100.0))
    manager.notify(EventType.POINT_NUDGED, PointEventData(1, 100.0, solved_omega=100.00000001))
    manager.notify(EventType.POINT_COMPLETED, PointEventData(1, 100.0))
    manager.notify(EventType.POINT_FAILED, PointEventData(2, 101.0, error="PoleError", message="singular"))
    manager.notify(EventType.SWEEP_FINISHED, SweepFinishedData("sweep"))
    manager.notify(EventType.TABLE_WRITTEN, TableWrittenData("s_forward", "results/sweep_s_forward.csv", 3))
    assert (observer.completed, observer.failed, observer.nudged) == (2, 1, 1)
    assert observer.progress is None
    assert observer.written == ["results/sweep_s_forward.csv"]


def test_handlers_may_notify_and_subscribe_from_inside_a_notification():
    manager = EventManager()
    seen = []

    def relay(data):
        manager.subscribe(EventType.SWEEP_FINISHED, seen.append)
        manager.notify(EventType.SWEEP_FINISHED, SweepFinishedData(data.experiment))

    manager.subscribe(EventType.SWEEP_STARTED, relay)
    worker = threading.Thread(target=manager.notify,
                              args=(EventType.SWEEP_STARTED, SweepStartedData("sweep", 1)), daemon=True)
    worker.start()
    worker.join(timeout=5)
    assert not worker.is_alive()
    assert seen == [SweepFinishedData("sweep")]
