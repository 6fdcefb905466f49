import json
from datetime import datetime

import numpy as np
import pytest

from src.Hawkes.utils.config import EventFileSpec
from src.Hawkes.utils.errors import ChainFormatError, EventParseError, HawkesError
from src.Hawkes.utils.io_tools import (
    deduplicate,
    exclude_holidays,
    read_chain,
    read_events,
    write_chain,
    write_events,
    write_excitation_table,
)
from src.Hawkes.utils.pydantic_schemas import (
    AdaptationRecord,
    Chain,
    EventSet,
    PosteriorExcitation,
    PriorSpec,
    SamplerConfig,
)

SECOND = 1.0 / 86400.0


def _write(tmp_path, text, name="events.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _chain(rng, s=30):
    return Chain(
        chain_index=1,
        seed=99,
        config=SamplerConfig(iterations=s, burn_in=5, seed=3),
        priors=PriorSpec(),
        n_events=12,
        initial_theta=(1.0, 0.1, 1.0, 1.0),
        draws=rng.uniform(0.1, 3.0, (s, 4)),
        log_post=rng.normal(-100.0, 5.0, s),
        scanned=rng.integers(0, 4, s),
        accepted=rng.uniform(size=s) < 0.4,
        final_proposal_sd=(0.3, 0.05, 0.7, 2.0),
        adaptations=[
            AdaptationRecord(iteration=4, coordinate=2, bound_before=5.0, bound_after=5.0 ** 1.1, ratio=0.5, proposal_sd=0.5)
        ],
    )


class TestReadEvents:

    def test_converts_meters_and_seconds(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n1000,2000,86400\n0,0,0\n500,500,43200\n")
        spec = EventFileSpec(path=str(path), distance_unit="m", time_unit="s")
        events = read_events(path, spec)
        np.testing.assert_array_equal(events.t, [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(events.x, [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(events.y, [0.0, 0.5, 2.0])
        np.testing.assert_array_equal(events.ids, [1, 2, 0])
        assert events.window_end == 1.0

    def test_stable_sort_keeps_file_order_for_ties(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n1,0,5\n2,0,5\n3,0,1\n4,0,5\n")
        events = read_events(path)
        np.testing.assert_array_equal(events.x, [3.0, 1.0, 2.0, 4.0])

    def test_window_start_shift(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,12\n0,0,15\n")
        events = read_events(path, EventFileSpec(path=str(path), window_start=10.0, window_end_days=8.0))
        np.testing.assert_array_equal(events.t, [2.0, 5.0])
        assert events.time_offset == 10.0
        assert events.window_end == 8.0

    def test_nan_reports_line(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,0\nnan,0,1\n")
        with pytest.raises(EventParseError) as excinfo:
            read_events(path)
        assert excinfo.value.line == 3
        assert f"{path}:3:" in str(excinfo.value)

    def test_non_numeric_reports_line_after_header(self, tmp_path):
        path = _write(tmp_path, "# distance=km time=d\nx,y,t\n0,0,0\n1,abc,2\n")
        with pytest.raises(EventParseError) as excinfo:
            read_events(path)
        assert excinfo.value.line == 4

    def test_missing_column(self, tmp_path):
        path = _write(tmp_path, "x,t\n0,0\n")
        with pytest.raises(EventParseError, match="'y'"):
            read_events(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EventParseError):
            read_events(_write(tmp_path, "x,y,t\n"))

    def test_event_after_window_end(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,0\n0,0,3\n")
        with pytest.raises(EventParseError) as excinfo:
            read_events(path, EventFileSpec(path=str(path), window_end_days=2.0))
        assert excinfo.value.line == 3

    def test_event_before_window_start(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,4\n0,0,1\n")
        with pytest.raises(EventParseError) as excinfo:
            read_events(path, EventFileSpec(path=str(path), window_start=2.0))
        assert excinfo.value.line == 3

    def test_header_units_apply(self, tmp_path):
        path = _write(tmp_path, "# distance=m time=h\nx,y,t\n0,0,0\n2000,0,12\n")
        events = read_events(path)
        np.testing.assert_array_equal(events.x, [0.0, 2.0])
        np.testing.assert_array_equal(events.t, [0.0, 0.5])

    def test_conflicting_units_rejected(self, tmp_path):
        path = _write(tmp_path, "# distance=m time=s\nx,y,t\n0,0,0\n")
        with pytest.raises(EventParseError) as excinfo:
            read_events(path, EventFileSpec(path=str(path), distance_unit="km"))
        assert excinfo.value.line == 1

    def test_unknown_header_entry(self, tmp_path):
        path = _write(tmp_path, "# speed=fast\nx,y,t\n0,0,0\n")
        with pytest.raises(EventParseError):
            read_events(path)

    def test_iso_timestamps(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,2021-03-01T12:00:00\n1,1,2021-03-01T00:00:00\n")
        events = read_events(path, EventFileSpec(path=str(path), time_format="iso8601"))
        np.testing.assert_array_equal(events.t, [0.0, 0.5])
        assert events.origin == datetime(2021, 3, 1)

    def test_bad_timestamp(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,yesterday\n")
        with pytest.raises(EventParseError):
            read_events(path, EventFileSpec(path=str(path), time_format="iso8601"))

    def test_semicolon_delimiter_and_renamed_columns(self, tmp_path):
        path = _write(tmp_path, "lon;lat;when\n1.5;2.5;0\n")
        spec = EventFileSpec(path=str(path), delimiter=";", columns={"x": "lon", "y": "lat", "t": "when"})
        events = read_events(path, spec)
        assert events[0].x == 1.5 and events[0].y == 2.5


class TestWriteEvents:

    def test_write_read_is_idempotent(self, tmp_path, rng):
        t = np.sort(rng.uniform(0.0, 10.0, 25))
        original = EventSet(
            x=rng.normal(size=25), y=rng.normal(size=25), t=t, window_end=11.0, time_offset=3.25,
            parent=np.zeros(25, dtype=np.int64),
        )
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        write_events(original, first)
        loaded = read_events(first)
        write_events(loaded, second)

        assert first.read_bytes() == second.read_bytes()
        np.testing.assert_array_equal(loaded.x, original.x)
        np.testing.assert_array_equal(loaded.t, original.t)
        np.testing.assert_array_equal(loaded.parent, original.parent)
        assert loaded.window_end == 11.0
        assert loaded.time_offset == 3.25

    def test_origin_survives(self, tmp_path):
        events = EventSet(x=[0.0], y=[0.0], t=[0.25], window_end=1.0, origin=datetime(2020, 12, 29))
        write_events(events, tmp_path / "e.csv")
        assert read_events(tmp_path / "e.csv").origin == datetime(2020, 12, 29)


class TestDeduplicate:

    def test_compares_against_retained_events_only(self):
        # B duplicates A; C is close to B but not to A
        events = EventSet(x=[0.0, 0.08, 0.16], y=[0.0, 0.0, 0.0], t=[0.0, 30 * SECOND, 45 * SECOND])
        kept = deduplicate(events, 0.1, 60 * SECOND)
        np.testing.assert_array_equal(kept.x, [0.0, 0.16])

    def test_boundaries_are_strict(self):
        events = EventSet(x=[0.0, 0.1, 0.0], y=[0.0, 0.0, 0.0], t=[0.0, 10 * SECOND, 60 * SECOND])
        kept = deduplicate(events, 0.1, 60 * SECOND)
        assert len(kept) == 3

    def test_zero_radius_is_identity(self, small_events):
        assert deduplicate(small_events, 0.0, 1.0) is small_events

    def test_drops_parent_column(self):
        events = EventSet(x=[0.0, 0.0], y=[0.0, 0.0], t=[0.0, SECOND], parent=[0, 1])
        kept = deduplicate(events, 0.1, 60 * SECOND)
        assert len(kept) == 1 and kept.parent is None

    def test_applied_while_reading(self, tmp_path):
        path = _write(tmp_path, "x,y,t\n0,0,0\n50,0,30\n500,0,40\n")
        spec = EventFileSpec(
            path=str(path), distance_unit="m", time_unit="s", dedup_radius_m=100.0, dedup_window_s=60.0
        )
        events = read_events(path, spec)
        np.testing.assert_array_equal(events.ids, [0, 2])


class TestExcludeHolidays:

    def test_new_year_margin(self):
        origin = datetime(2020, 12, 29)
        events = EventSet(x=np.zeros(6), y=np.zeros(6), t=np.arange(6) + 0.5, window_end=6.0, origin=origin)
        kept = exclude_holidays(events, margin_days=1)
        # Dec 29 and Jan 3 survive
        np.testing.assert_array_equal(kept.t, [0.5, 5.5])

    def test_july_fourth_without_margin(self):
        events = EventSet(x=np.zeros(3), y=np.zeros(3), t=[0.5, 1.5, 2.5], origin=datetime(2021, 7, 3))
        np.testing.assert_array_equal(exclude_holidays(events, margin_days=0).t, [0.5, 2.5])

    def test_needs_calendar_origin(self, small_events):
        with pytest.raises(HawkesError):
            exclude_holidays(small_events)


class TestChainFiles:

    def test_round_trip_is_exact(self, tmp_path, rng):
        chain = _chain(rng)
        write_chain(chain, tmp_path / "c.json")
        loaded = read_chain(tmp_path / "c.json")
        np.testing.assert_array_equal(loaded.draws, chain.draws)
        np.testing.assert_array_equal(loaded.log_post, chain.log_post)
        np.testing.assert_array_equal(loaded.scanned, chain.scanned)
        np.testing.assert_array_equal(loaded.accepted, chain.accepted)
        assert loaded.final_proposal_sd == chain.final_proposal_sd
        assert loaded.adaptations == chain.adaptations
        assert loaded.config == chain.config
        assert (loaded.seed, loaded.n_events, loaded.chain_index) == (99, 12, 1)

    def test_truncated_file(self, tmp_path, rng):
        path = tmp_path / "c.json"
        write_chain(_chain(rng), path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ChainFormatError):
            read_chain(path)

    def test_draw_count_mismatch(self, tmp_path, rng):
        path = tmp_path / "c.json"
        write_chain(_chain(rng), path)
        document = json.loads(path.read_text())
        document["draws"] = document["draws"][:-1]
        path.write_text(json.dumps(document))
        with pytest.raises(ChainFormatError):
            read_chain(path)

    def test_version_mismatch(self, tmp_path, rng):
        path = tmp_path / "c.json"
        write_chain(_chain(rng), path)
        document = json.loads(path.read_text())
        document["version"] = 2
        path.write_text(json.dumps(document))
        with pytest.raises(ChainFormatError, match="version 2"):
            read_chain(path)

    def test_empty_chain_refused(self, tmp_path):
        empty = Chain(
            seed=0,
            config=SamplerConfig(iterations=1, burn_in=0),
            priors=PriorSpec(),
            n_events=1,
            initial_theta=(1.0, 0.1, 1.0, 1.0),
            draws=np.empty((0, 4)),
            log_post=np.empty(0),
            scanned=np.empty(0, dtype=np.int64),
            accepted=np.empty(0, dtype=bool),
            final_proposal_sd=(1.0, 1.0, 1.0, 1.0),
        )
        with pytest.raises(ChainFormatError):
            write_chain(empty, tmp_path / "c.json")
        assert not (tmp_path / "c.json").exists()


def test_excitation_table(tmp_path):
    events = EventSet(x=[0.0, 1.0], y=[0.0, 1.0], t=[0.0, 1.0])
    posterior = PosteriorExcitation(
        mean_pi=np.array([0.0, 0.25]),
        lower=np.array([0.0, 0.125]),
        upper=np.array([0.0, 0.5]),
        draw_indices=np.arange(3),
    )
    write_excitation_table(tmp_path / "pi.csv", events, posterior)
    lines = (tmp_path / "pi.csv").read_text().splitlines()
    assert lines[0] == "id,x,y,t,mean_pi,pi_q2.5,pi_q97.5"
    assert lines[2] == "1,1.0,1.0,1.0,0.25,0.125,0.5"
