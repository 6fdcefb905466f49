# src/Hawkes/utils/units.py
# Canonical units are kilometers and days.

METERS_PER_KM = 1000.0
SECONDS_PER_DAY = 86400.0
MINUTES_PER_DAY = 1440.0

DISTANCE_TO_KM = {
    "m": 1.0 / METERS_PER_KM,
    "km": 1.0,
}

TIME_TO_DAYS = {
    "s": 1.0 / SECONDS_PER_DAY,
    "min": 1.0 / MINUTES_PER_DAY,
    "h": 1.0 / 24.0,
    "d": 1.0,
}


def km_to_m(value):
    return value * METERS_PER_KM


def m_to_km(value):
    return value / METERS_PER_KM


def days_to_minutes(value):
    return value * MINUTES_PER_DAY
