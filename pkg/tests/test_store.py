import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from chaintrace.errors import OutOfOrder
from chaintrace.events import LogEvent
from chaintrace.simulate import SimConfig, simulate
from chaintrace.store import EventStore


def _mk(i, ts, etype="logon", host="h0", actor="a0"):
    return LogEvent(i, ts, host, etype, actor, {"session_id": f"S{i}"})


@pytest.fixture
def sample_events():
    events, _ = simulate(SimConfig(seed=3, users=10, duration=600, attack=False))
    return events


def test_append_empty(tmp_path):
    store = EventStore(str(tmp_path / "s"))
    assert store.append([]) == 0
    assert store.count() == 0


def test_append_query_identity(tmp_path, sample_events):
    store = EventStore(str(tmp_path / "s"))
    assert store.append(sample_events) == len(sample_events)
    out = list(store.query_all())
    assert out == sample_events


def test_append_out_of_order_ts(tmp_path):
    store = EventStore(str(tmp_path / "s"))
    store.append([_mk(1, 100), _mk(2, 200)])
    with pytest.raises(OutOfOrder):
        store.append([_mk(3, 150)])


def test_append_id_regression(tmp_path):
    store = EventStore(str(tmp_path / "s"))
    store.append([_mk(5, 100)])
    with pytest.raises(OutOfOrder):
        store.append([_mk(4, 200)])


def test_query_empty_store(tmp_path):
    store = EventStore(str(tmp_path / "s"))
    assert list(store.query(1, 10)) == []


def test_query_point_window(tmp_path):
    store = EventStore(str(tmp_path / "s"))
    store.append([_mk(1, 100), _mk(2, 200), _mk(3, 300)])
    out = list(store.query(200, 201))
    assert [e.id for e in out] == [2]


def test_query_requires_valid_range(tmp_path):
    store = EventStore(str(tmp_path / "s"))
    with pytest.raises(ValueError):
        list(store.query(10, 10))


def test_segment_rollover(tmp_path, sample_events):
    store = EventStore(str(tmp_path / "s"), segment_events=100)
    store.append(sample_events)
    assert len(store.segments) > 1
    assert all(seg.sealed for seg in store.segments[:-1])
    assert list(store.query_all()) == sample_events


def test_split_point_concatenation(tmp_path, sample_events):
    store = EventStore(str(tmp_path / "s"))
    store.append(sample_events)
    t0 = sample_events[0].ts
    t2 = sample_events[-1].ts + 1
    whole = list(store.query(t0, t2))
    for frac in (0.25, 0.5, 0.9):
        t1 = t0 + int((t2 - t0) * frac)
        left = list(store.query(t0, t1))
        right = list(store.query(t1, t2))
        assert left + right == whole


@given(
    etypes=st.sets(st.sampled_from(["logon", "logoff", "fw_conn", "http_request"])),
    hosts=st.sets(st.sampled_from(["ws000", "ws001", "proxy"])),
)
@settings(
    max_examples=20,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
def test_filter_equals_postfilter(tmp_path_factory, sample_events, etypes, hosts):
    # the store and fixture are read-only here, so reuse across examples is fine
    root = tmp_path_factory.mktemp("s")
    store = EventStore(str(root))
    store.append(sample_events)
    t0, t1 = sample_events[0].ts, sample_events[-1].ts + 1
    filtered = list(store.query(
        t0, t1,
        event_types=etypes or None,
        source_hosts=hosts or None,
    ))
    expected = [
        e for e in store.query(t0, t1)
        if (not etypes or e.event_type in etypes)
        and (not hosts or e.source_host in hosts)
    ]
    assert filtered == expected


def test_actor_filter(tmp_path, sample_events):
    store = EventStore(str(tmp_path / "s"))
    store.append(sample_events)
    out = list(store.query_all(actors={"u003"}))
    assert out and all(e.actor == "u003" for e in out)


def test_reopen_durability(tmp_path, sample_events):
    root = str(tmp_path / "s")
    store = EventStore(root, segment_events=200)
    store.append(sample_events)
    store.close()
    again = EventStore(root, segment_events=200)
    assert list(again.query_all()) == sample_events
    # appending continues after reopen
    last = sample_events[-1]
    again.append([_mk(last.id + 1, last.ts + 10)])
    assert again.count() == len(sample_events) + 1


def test_reopen_without_close(tmp_path, sample_events):
    # index is rewritten on every append, so a plain process exit is safe
    root = str(tmp_path / "s")
    store = EventStore(root)
    store.append(sample_events)
    del store
    again = EventStore(root)
    assert again.count() == len(sample_events)
