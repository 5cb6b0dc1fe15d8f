"""Shared, cached fixtures for the test modules (plain functions so the
acceptance script can also run standalone)."""

from functools import lru_cache

from tankdiag.detection import NORMAL, VIOLATED, AlarmState, CONSTRAINTS
from tankdiag.plant import SENSORS
from tankdiag.workbench import Config, Workbench


@lru_cache(maxsize=None)
def bench(fraction: float = 0.2) -> Workbench:
    return Workbench(Config(magnitude_fraction=fraction))


@lru_cache(maxsize=None)
def table1(fraction: float = 0.2):
    return bench(fraction).run_table1()


def alarms_from(values, violated=(), threshold=0.05, local_values=None):
    """Hand-made AlarmState: ``values`` maps sensors to steady deviations."""
    glob = {v: float(values.get(v, 0.0)) for v in SENSORS}
    alarm = {v: ("high" if x > threshold else "low" if x < -threshold else NORMAL) for v, x in glob.items()}
    local = {c: (VIOLATED if c in violated else NORMAL) for c in CONSTRAINTS}
    lv = {c: (local_values or {}).get(c, 1.0 if c in violated else 0.0) for c in CONSTRAINTS}
    thr = {n: threshold for n in list(SENSORS) + list(CONSTRAINTS)}
    return AlarmState(alarm, local, 99.0, glob, lv, thr)
