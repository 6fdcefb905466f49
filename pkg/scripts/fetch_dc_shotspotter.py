"""
Download a ShotSpotter CSV extract from an open-data portal and convert it to
an sthawkes event file (x, y in km on a local plane, t as ISO-8601).

The portal URL is passed explicitly; extracts differ in column names, so
those are flags too.  Read the result with time_format = "iso8601".

    python scripts/fetch_dc_shotspotter.py --url <csv export url> --output data/dc.csv
"""
import argparse
import csv
import io
import math
import sys
from datetime import datetime

import requests
from loguru import logger

EARTH_RADIUS_KM = 6371.0088


def project(lat: float, lon: float, lat0: float, lon0: float):
    """Equirectangular projection around (lat0, lon0), in km."""
    x = math.radians(lon - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_KM
    y = math.radians(lat - lat0) * EARTH_RADIUS_KM
    return x, y


def parse_time(raw: str, time_format: str) -> datetime:
    raw = raw.strip()
    if time_format:
        return datetime.strptime(raw, time_format)
    return datetime.fromisoformat(raw.replace("Z", "+00:00"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--url", required=True, help="CSV download URL of the extract")
    parser.add_argument("--output", required=True, help="event file to write")
    parser.add_argument("--lat-column", default="LATITUDE", help="latitude column name")
    parser.add_argument("--lon-column", default="LONGITUDE", help="longitude column name")
    parser.add_argument("--time-column", default="DATETIME", help="timestamp column name")
    parser.add_argument("--time-format", default="", help="strptime format; empty means ISO-8601")
    parser.add_argument("--timeout", type=float, default=120.0, help="HTTP timeout in seconds")
    args = parser.parse_args(argv)

    logger.info(f"Step 1: Downloading {args.url}...")
    try:
        response = requests.get(args.url, timeout=args.timeout)
        response.raise_for_status()
    except requests.RequestException as e:
        logger.error(f"Download failed: {e}")
        return 1

    logger.info("Step 2: Projecting coordinates...")
    records = []
    skipped = 0
    for row in csv.DictReader(io.StringIO(response.text)):
        try:
            lat = float(row[args.lat_column])
            lon = float(row[args.lon_column])
            stamp = parse_time(row[args.time_column], args.time_format)
        except (KeyError, ValueError):
            skipped += 1
            continue
        if math.isfinite(lat) and math.isfinite(lon):
            records.append((lat, lon, stamp))
        else:
            skipped += 1

    if not records:
        logger.error("No usable rows; check the column flags")
        return 1

    lat0 = sum(r[0] for r in records) / len(records)
    lon0 = sum(r[1] for r in records) / len(records)
    with open(args.output, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["x", "y", "t"])
        for lat, lon, stamp in records:
            x, y = project(lat, lon, lat0, lon0)
            writer.writerow([repr(x), repr(y), stamp.isoformat()])

    logger.success(f"Wrote {len(records)} events to {args.output} ({skipped} rows skipped)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
