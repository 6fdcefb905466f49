# src/Hawkes/utils/io_tools.py

import csv
import json
import math
import os
import tempfile
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from loguru import logger

from src.Hawkes.utils.config import EventFileSpec
from src.Hawkes.utils.errors import ChainFormatError, EventParseError, HawkesError
from src.Hawkes.utils.pydantic_schemas import (
    AdaptationRecord,
    Chain,
    EventSet,
    PosteriorExcitation,
    PriorSpec,
    SamplerConfig,
    SmoothedCurve,
    Summary,
)
from src.Hawkes.utils.units import DISTANCE_TO_KM, METERS_PER_KM, SECONDS_PER_DAY, TIME_TO_DAYS

CHAIN_FORMAT = "sthawkes-chain"
CHAIN_FORMAT_VERSION = 1
HEADER_KEYS = ("distance", "time", "window_start", "window_end", "time_offset", "origin")


# ======================================================================
# EVENT FILES
# ======================================================================
def _parse_header(path, line: str) -> Dict[str, str]:
    """'# key=value key=value' metadata line at the top of an event file."""
    declared = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if not sep or key not in HEADER_KEYS:
            raise EventParseError(path, 1, f"unrecognised header entry {token!r}")
        declared[key] = value
    return declared


def _resolve_units(path, spec: EventFileSpec, declared: Dict[str, str]):
    """File header units win over defaults; an explicitly configured unit must agree."""
    units = {}
    for key, field, table in (("distance", "distance_unit", DISTANCE_TO_KM), ("time", "time_unit", TIME_TO_DAYS)):
        chosen = getattr(spec, field)
        if key in declared:
            if declared[key] not in table:
                raise EventParseError(path, 1, f"unknown {key} unit {declared[key]!r}")
            if field in spec.model_fields_set and declared[key] != chosen:
                raise EventParseError(
                    path, 1, f"file declares {key} unit {declared[key]!r} but the run expects {chosen!r}"
                )
            chosen = declared[key]
        units[key] = chosen
    return units["distance"], units["time"]


def _parse_float(path, line: int, column: str, raw: Optional[str]) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise EventParseError(path, line, f"column '{column}' is not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise EventParseError(path, line, f"column '{column}' is not finite: {raw!r}")
    return value


def _parse_timestamp(path, line: int, column: str, raw: Optional[str]) -> datetime:
    try:
        return datetime.fromisoformat((raw or "").strip())
    except ValueError:
        raise EventParseError(path, line, f"column '{column}' is not an ISO-8601 timestamp: {raw!r}") from None


def read_events(path, spec: Optional[EventFileSpec] = None) -> EventSet:
    """
    Parse a delimited event file into a sorted EventSet in km and days.

    Times are shifted so the window starts at 0; the shift is kept in
    ``time_offset`` (numeric times) or ``origin`` (ISO-8601 times).
    """
    path = Path(path)
    spec = spec or EventFileSpec(path=str(path))
    columns = spec.columns
    logger.info(f"Reading events from {path}")

    with open(path, "r", encoding="utf-8", newline="") as f:
        first = f.readline()
        declared: Dict[str, str] = {}
        line_offset = 0
        if first.startswith("#"):
            declared = _parse_header(path, first)
            line_offset = 1
        else:
            f.seek(0)

        reader = csv.DictReader(f, delimiter=spec.delimiter)
        header = reader.fieldnames or []
        for required in (columns.x, columns.y, columns.t):
            if required not in header:
                raise EventParseError(path, line_offset + 1, f"missing required column '{required}'")
        has_parent = columns.parent is not None and columns.parent in header
        has_ids = "id" in header

        xs, ys, raw_times, lines, parents, ids = [], [], [], [], [], []
        for row in reader:
            line = line_offset + reader.line_num
            xs.append(_parse_float(path, line, columns.x, row.get(columns.x)))
            ys.append(_parse_float(path, line, columns.y, row.get(columns.y)))
            if spec.time_format == "iso8601":
                raw_times.append(_parse_timestamp(path, line, columns.t, row.get(columns.t)))
            else:
                raw_times.append(_parse_float(path, line, columns.t, row.get(columns.t)))
            if has_parent:
                parents.append(int(_parse_float(path, line, columns.parent, row.get(columns.parent))))
            if has_ids:
                ids.append(int(_parse_float(path, line, "id", row.get("id"))))
            lines.append(line)

    if not xs:
        raise EventParseError(path, line_offset + 1, "file contains no events")

    distance_unit, time_unit = _resolve_units(path, spec, declared)
    origin = datetime.fromisoformat(declared["origin"]) if "origin" in declared else None
    time_offset = float.fromhex(declared["time_offset"]) if "time_offset" in declared else 0.0

    if spec.time_format == "iso8601":
        if spec.window_origin is not None:
            origin = datetime.fromisoformat(spec.window_origin)
        else:
            try:
                origin = min(raw_times)
            except TypeError as e:
                raise EventParseError(path, lines[0], f"mixed timezone-aware and naive timestamps: {e}") from e
        try:
            t_days = [(stamp - origin).total_seconds() / SECONDS_PER_DAY for stamp in raw_times]
        except TypeError as e:
            raise EventParseError(path, lines[0], f"mixed timezone-aware and naive timestamps: {e}") from e
    else:
        factor = TIME_TO_DAYS[time_unit]
        if spec.window_start is not None:
            start = spec.window_start
        elif "window_start" in declared:
            start = float.fromhex(declared["window_start"])
        else:
            start = min(raw_times)
        time_offset += start * factor
        t_days = [(value - start) * factor for value in raw_times]

    for value, line in zip(t_days, lines):
        if value < 0:
            raise EventParseError(path, line, "event precedes the window start")

    t = np.array(t_days)
    distance_factor = DISTANCE_TO_KM[distance_unit]
    x = np.array(xs) * distance_factor
    y = np.array(ys) * distance_factor
    order = np.argsort(t, kind="stable")

    if spec.window_end_days is not None:
        window_end = spec.window_end_days
    elif "window_end" in declared:
        window_end = float.fromhex(declared["window_end"])
    else:
        window_end = float(t.max())
    if window_end < t.max():
        raise EventParseError(path, lines[int(np.argmax(t))], f"event falls after window end {window_end}")

    events = EventSet(
        x=x[order],
        y=y[order],
        t=t[order],
        window_end=window_end,
        origin=origin,
        time_offset=time_offset,
        ids=np.array(ids)[order] if has_ids else order,
        parent=np.array(parents)[order] if has_parent else None,
    )

    if spec.dedup_radius_m > 0 or spec.dedup_window_s > 0:
        events = deduplicate(
            events,
            spec.dedup_radius_m / METERS_PER_KM,
            spec.dedup_window_s / SECONDS_PER_DAY,
        )
    if spec.exclude_holidays:
        events = exclude_holidays(events, spec.holiday_margin_days)

    logger.success(f"Loaded {len(events)} events spanning {events.window_end:.3f} days")
    return events


def write_events(events: EventSet, path) -> None:
    """Canonical-unit event file that read_events reproduces exactly."""
    header = [
        "distance=km",
        "time=d",
        f"window_start={(0.0).hex()}",
        f"window_end={float(events.window_end).hex()}",
        f"time_offset={float(events.time_offset).hex()}",
    ]
    if events.origin is not None:
        header.append(f"origin={events.origin.isoformat()}")

    fieldnames = ["id", "x", "y", "t"] + (["parent"] if events.parent is not None else [])
    ids = events.ids if events.ids is not None else np.arange(len(events))

    def rows():
        for n in range(len(events)):
            row = {"id": int(ids[n]), "x": repr(float(events.x[n])), "y": repr(float(events.y[n])), "t": repr(float(events.t[n]))}
            if events.parent is not None:
                row["parent"] = int(events.parent[n])
            yield row

    def write(f):
        f.write("# " + " ".join(header) + "\n")
        write_rows(f, fieldnames, rows())

    _atomic_write(path, write)
    logger.info(f"Wrote {len(events)} events to {path}")


# ======================================================================
# FILTERS
# ======================================================================
def deduplicate(events: EventSet, radius: float, window: float) -> EventSet:
    """
    Forward greedy thinning: drop an event when an earlier *retained* event is
    closer than ``radius`` (km) and ``window`` (days).  Both comparisons are strict.
    """
    if radius < 0 or window < 0:
        raise ValueError("radius and window must be >= 0")
    if radius == 0 or window == 0:
        return events

    n_events = len(events)
    keep = np.zeros(n_events, dtype=bool)
    x, y, t = events.x, events.y, events.t
    radius2 = radius * radius
    retained: List[int] = []
    first_live = 0
    for n in range(n_events):
        while first_live < len(retained) and not t[n] - t[retained[first_live]] < window:
            first_live += 1
        duplicate = False
        for r in retained[first_live:]:
            if (x[n] - x[r]) ** 2 + (y[n] - y[r]) ** 2 < radius2:
                duplicate = True
                break
        if not duplicate:
            retained.append(n)
            keep[n] = True

    dropped = n_events - int(keep.sum())
    logger.info(f"Deduplication removed {dropped} of {n_events} events ({dropped / n_events:.1%})")
    return events.subset(keep).model_copy(update={"parent": None})


def _holidays_near(day: date) -> List[date]:
    y = day.year
    return [date(y - 1, 12, 31), date(y, 1, 1), date(y, 7, 4), date(y, 12, 31), date(y + 1, 1, 1)]


def exclude_holidays(events: EventSet, margin_days: int = 1) -> EventSet:
    """Drop events within margin_days of New Year's Eve, New Year's Day or July 4."""
    if events.origin is None:
        raise HawkesError("holiday exclusion needs calendar timestamps (time_format = 'iso8601')")
    if margin_days < 0:
        raise ValueError("margin_days must be >= 0")

    keep = np.ones(len(events), dtype=bool)
    for n, t in enumerate(events.t):
        day = (events.origin + timedelta(days=float(t))).date()
        if any(abs((day - holiday).days) <= margin_days for holiday in _holidays_near(day)):
            keep[n] = False

    logger.info(f"Holiday exclusion removed {int((~keep).sum())} of {len(events)} events")
    if not keep.any():
        raise HawkesError("holiday exclusion removed every event")
    return events.subset(keep).model_copy(update={"parent": None})


# ======================================================================
# CHAIN FILES
# ======================================================================
def _hex_list(values: Iterable[float]) -> List[str]:
    return [float(v).hex() for v in values]


def _from_hex(values: Sequence[str]) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values], dtype=np.float64)


def _atomic_write(path, write_fn) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            write_fn(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_chain(chain: Chain, path) -> None:
    if chain.draws.shape[0] == 0:
        raise ChainFormatError("refusing to write an empty chain")

    document = {
        "format": CHAIN_FORMAT,
        "version": CHAIN_FORMAT_VERSION,
        "chain_index": chain.chain_index,
        "seed": chain.seed,
        "n_events": chain.n_events,
        "n_draws": int(chain.draws.shape[0]),
        "config": chain.config.model_dump(mode="json"),
        "priors": chain.priors.model_dump(mode="json"),
        "initial_theta": _hex_list(chain.initial_theta),
        "final_proposal_sd": _hex_list(chain.final_proposal_sd),
        "draws": [_hex_list(row) for row in chain.draws],
        "log_post": _hex_list(chain.log_post),
        "scanned": [int(d) for d in chain.scanned],
        "accepted": [int(a) for a in chain.accepted],
        "adaptations": [
            {
                "iteration": r.iteration,
                "coordinate": r.coordinate,
                "bound_before": r.bound_before.hex(),
                "bound_after": r.bound_after.hex(),
                "ratio": r.ratio.hex(),
                "proposal_sd": r.proposal_sd.hex(),
            }
            for r in chain.adaptations
        ],
    }
    _atomic_write(path, lambda f: json.dump(document, f))
    logger.info(f"Wrote chain {chain.chain_index} ({chain.draws.shape[0]} draws) to {path}")


def read_chain(path) -> Chain:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ChainFormatError(f"{path}: truncated or corrupt chain file ({e})") from e

    if not isinstance(document, dict) or document.get("format") != CHAIN_FORMAT:
        raise ChainFormatError(f"{path}: not a chain file")
    if document.get("version") != CHAIN_FORMAT_VERSION:
        raise ChainFormatError(
            f"{path}: chain format version {document.get('version')} is not supported "
            f"(expected {CHAIN_FORMAT_VERSION})"
        )

    try:
        draws = np.array([_from_hex(row) for row in document["draws"]], dtype=np.float64)
        n_draws = document["n_draws"]
        if n_draws == 0 or draws.shape[0] != n_draws:
            raise ChainFormatError(f"{path}: expected {n_draws} draws, found {draws.shape[0]}")
        chain = Chain(
            chain_index=document["chain_index"],
            seed=document["seed"],
            config=SamplerConfig.model_validate(document["config"]),
            priors=PriorSpec.model_validate(document["priors"]),
            n_events=document["n_events"],
            initial_theta=tuple(_from_hex(document["initial_theta"])),
            draws=draws.reshape(n_draws, -1),
            log_post=_from_hex(document["log_post"]),
            scanned=np.array(document["scanned"], dtype=np.int64),
            accepted=np.array(document["accepted"], dtype=bool),
            final_proposal_sd=tuple(_from_hex(document["final_proposal_sd"])),
            adaptations=[
                AdaptationRecord(
                    iteration=r["iteration"],
                    coordinate=r["coordinate"],
                    bound_before=float.fromhex(r["bound_before"]),
                    bound_after=float.fromhex(r["bound_after"]),
                    ratio=float.fromhex(r["ratio"]),
                    proposal_sd=float.fromhex(r["proposal_sd"]),
                )
                for r in document["adaptations"]
            ],
        )
    except ChainFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ChainFormatError(f"{path}: malformed chain file ({e})") from e
    return chain


# ======================================================================
# TABLES
# ======================================================================
def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_rows(f, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> None:
    writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(value) for key, value in row.items()})


def write_table(path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> None:
    _atomic_write(path, lambda f: write_rows(f, fieldnames, rows))


def write_excitation_table(path, events: EventSet, posterior: PosteriorExcitation) -> None:
    lo_q, hi_q = posterior.quantiles
    lo_name, hi_name = f"pi_q{lo_q * 100:g}", f"pi_q{hi_q * 100:g}"
    ids = events.ids if events.ids is not None else np.arange(len(events))
    rows = (
        {
            "id": ids[n],
            "x": events.x[n],
            "y": events.y[n],
            "t": events.t[n],
            "mean_pi": posterior.mean_pi[n],
            lo_name: posterior.lower[n],
            hi_name: posterior.upper[n],
        }
        for n in range(len(events))
    )
    write_table(path, ["id", "x", "y", "t", "mean_pi", lo_name, hi_name], rows)
    logger.info(f"Wrote per-event excitation table to {path}")


def write_curve(path, curve: SmoothedCurve) -> None:
    rows = ({"t": g, "pi": v} for g, v in zip(curve.grid, curve.values))
    write_table(path, ["t", "pi"], rows)


def write_summary_table(path, summary: Summary) -> None:
    fields = ["name", "unit", "mean", "sd", "hpd_lo", "hpd_hi", "ess", "degenerate"]
    write_table(path, fields, (row.model_dump() for row in summary.rows))
