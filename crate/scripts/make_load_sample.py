"""Write the bundled hourly load sample (data/hourly_load_sample.csv).

The file mimics the shape of a four-year hourly EMS load archive (daily
double hump, summer evening peak, winter morning/evening peaks, weekday
effect, year-over-year growth) but is expressed relative to the IEEE 118-bus
system's base total load (4242 MW) so that it can drive the bundled network
directly. Levels sit at roughly twice the case-file loading: at nominal
loading the classical-model network rides through every contingency, and the
heavier level puts summer peak hours near the security boundary. Fully
deterministic.
"""
import csv
import datetime as dt
import math
import os
import random

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUT = os.path.join(ROOT, "crates", "core", "data", "hourly_load_sample.csv")
BASE = 4242.0
STRESS = 2.0


def shape(month, hour):
    # seasonal level relative to base load
    level = {12: 0.80, 1: 0.80, 2: 0.78, 3: 0.74, 4: 0.72, 5: 0.76,
             6: 0.93, 7: 1.00, 8: 1.01, 9: 0.93, 10: 0.77, 11: 0.76}[month]
    if month in (6, 7, 8, 9):
        daily = 0.80 + 0.22 * math.exp(-((hour - 17.0) / 4.0) ** 2) + 0.05 * math.exp(-((hour - 11.0) / 3.0) ** 2)
    elif month in (12, 1, 2):
        daily = 0.82 + 0.12 * math.exp(-((hour - 8.0) / 2.0) ** 2) + 0.18 * math.exp(-((hour - 18.5) / 2.5) ** 2)
    else:
        daily = 0.82 + 0.08 * math.exp(-((hour - 9.0) / 2.5) ** 2) + 0.16 * math.exp(-((hour - 19.0) / 2.5) ** 2)
    if hour < 5:
        daily -= 0.04 * (5 - hour) / 5
    return level * daily


def main():
    rng = random.Random(20140101)
    day = dt.date(2014, 1, 1)
    end = dt.date(2017, 12, 31)
    with open(OUT, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "hour", "load_mw"])
        while day <= end:
            growth = 1.0 + 0.01 * (day.year - 2014)
            weekday = 1.0 if day.weekday() < 5 else 0.93
            weather = 1.0 + rng.gauss(0.0, 0.03)
            for hour in range(24):
                mw = BASE * STRESS * shape(day.month, hour) * growth * weekday * weather
                mw *= 1.0 + rng.gauss(0.0, 0.005)
                w.writerow([day.isoformat(), hour, f"{mw:.1f}"])
            day += dt.timedelta(days=1)


if __name__ == "__main__":
    main()
