"""Shared, lazily evaluated TDSE runs (each pulse run takes minutes)."""

import math

import pytest

from qsdecay.params import BarrierSpec, Envelope, FieldSpec
from qsdecay.tdse.workflow import run_field_free, run_pulse

A_WELL = math.pi / 2
OMEGA_TDSE = 0.057


def tdse_barrier(thickness):
    return BarrierSpec(3.0, A_WELL, A_WELL + thickness)


def tdse_pulse(amplitude):
    return FieldSpec(amplitude, OMEGA_TDSE, Envelope.SIN_SQUARED, 6)


class _Runs:
    def __init__(self):
        self._cache = {}

    def field_free(self, thickness, **kw):
        key = ("ff", thickness, tuple(sorted(kw.items())))
        if key not in self._cache:
            self._cache[key] = run_field_free(tdse_barrier(thickness), **kw)
        return self._cache[key]

    def pulse(self, thickness, amplitude, infinite=False):
        key = ("pulse", thickness, amplitude, infinite)
        if key not in self._cache:
            self._cache[key] = run_pulse(tdse_barrier(thickness), tdse_pulse(amplitude), infinite=infinite)
        return self._cache[key]


@pytest.fixture(scope="session")
def tdse_runs():
    return _Runs()


ACCEPTANCE_LINES = []


def record_acceptance(tag, passed, detail):
    """Print and remember one acceptance line; returns ``passed`` for the assert."""
    line = f"{tag} {'PASS' if passed else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[0].split("-")[1]), s)):
            terminalreporter.write_line(line)
