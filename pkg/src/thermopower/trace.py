"""Trace data types, the on-disk CSV format, and a synthetic trace generator.

A trace file is UTF-8 text with LF line endings::

    #processor=A15
    #freq_ghz=1.2
    #cores=4
    time_s,temp_c,power_w
    0.0,25.4,2.113
    ...

``#key=value`` comment lines are only allowed before the column header.
Numbers use ``.`` as the decimal separator and are written in the shortest
decimal form that parses back to the identical float, so write/parse is a
bit-exact round trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyTrace,
    InvalidParams,
    InvalidSample,
    MalformedRow,
    MissingMeta,
    NonMonotonicTime,
)

HEADER = "time_s,temp_c,power_w"


@dataclass(frozen=True)
class TraceSample:
    time_s: float
    temp_c: float
    power_w: float

    def __post_init__(self):
        for name in ("time_s", "temp_c", "power_w"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidSample(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.time_s < 0:
            raise InvalidSample(f"time_s must be non-negative, got {self.time_s!r}")
        if self.power_w <= 0:
            raise InvalidSample(f"power_w must be positive, got {self.power_w!r}")


@dataclass(frozen=True)
class TraceMeta:
    processor: str
    freq_ghz: float
    cores: int

    def __post_init__(self):
        if not (math.isfinite(self.freq_ghz) and self.freq_ghz > 0):
            raise InvalidParams(f"freq_ghz must be positive, got {self.freq_ghz!r}")
        if not isinstance(self.cores, int) or not 1 <= self.cores <= 4:
            raise InvalidParams(f"cores must be an integer in 1..4, got {self.cores!r}")


@dataclass(frozen=True)
class Trace:
    meta: TraceMeta
    samples: tuple[TraceSample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if len(self.samples) < 3:
            raise EmptyTrace(f"a trace needs at least 3 samples, got {len(self.samples)}")
        for prev, cur in zip(self.samples, self.samples[1:]):
            if cur.time_s <= prev.time_s:
                raise NonMonotonicTime(
                    f"time must strictly increase ({prev.time_s!r} then {cur.time_s!r})"
                )

    def times(self) -> list[float]:
        return [s.time_s for s in self.samples]

    def temps(self) -> list[float]:
        return [s.temp_c for s in self.samples]

    def powers(self) -> list[float]:
        return [s.power_w for s in self.samples]

    def __len__(self) -> int:
        return len(self.samples)


def _parse_number(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedRow(line_no, f"not a number: {token!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(line_no, f"not a finite decimal: {token!r}")
    return value


def parse_table(text: str | bytes) -> tuple[dict[str, str], list[str], list[list[float]], int]:
    """Parse the comment/header/rows skeleton shared by all CSV outputs.

    Returns (meta dict, column names, float rows, header line number).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    meta: dict[str, str] = {}
    columns: list[str] | None = None
    rows: list[list[float]] = []
    header_line = 0
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if columns is not None:
                raise MalformedRow(line_no, "comment lines must precede the column header")
            key, sep, value = line[1:].partition("=")
            if not sep or not key:
                raise MalformedRow(line_no, f"bad metadata comment: {line!r}")
            meta[key.strip()] = value.strip()
            continue
        if columns is None:
            columns = [c.strip() for c in line.split(",")]
            header_line = line_no
            continue
        tokens = line.split(",")
        if len(tokens) != len(columns):
            raise MalformedRow(
                line_no, f"expected {len(columns)} columns, got {len(tokens)}"
            )
        rows.append([_parse_number(tok, line_no) for tok in tokens])
    if columns is None:
        raise EmptyTrace("no column header found")
    return meta, columns, rows, header_line


def parse_trace(text: str | bytes) -> Trace:
    """Parse trace CSV text into a validated Trace.

    A missing ``#processor`` defaults to "unknown"; missing ``#freq_ghz``
    or ``#cores`` raises MissingMeta.
    """
    meta_raw, columns, rows, header_line = parse_table(text)
    if columns != HEADER.split(","):
        raise MalformedRow(header_line, f"expected header {HEADER!r}")
    if "freq_ghz" not in meta_raw:
        raise MissingMeta("missing #freq_ghz header")
    if "cores" not in meta_raw:
        raise MissingMeta("missing #cores header")
    try:
        freq = float(meta_raw["freq_ghz"])
    except ValueError:
        raise MissingMeta(f"bad #freq_ghz value: {meta_raw['freq_ghz']!r}") from None
    try:
        cores = int(meta_raw["cores"])
    except ValueError:
        raise MissingMeta(f"bad #cores value: {meta_raw['cores']!r}") from None
    meta = TraceMeta(meta_raw.get("processor", "unknown"), freq, cores)
    if len(rows) < 3:
        raise EmptyTrace(f"a trace needs at least 3 samples, got {len(rows)}")
    samples = tuple(TraceSample(t, temp, power) for t, temp, power in rows)
    return Trace(meta, samples)


def _fmt(value: float) -> str:
    # repr() is the shortest decimal that round-trips to the same float
    return repr(float(value))


def write_trace(trace: Trace) -> str:
    """Serialize a Trace to CSV text; parse_trace(write_trace(t)) == t."""
    lines = [
        f"#processor={trace.meta.processor}",
        f"#freq_ghz={_fmt(trace.meta.freq_ghz)}",
        f"#cores={trace.meta.cores}",
        HEADER,
    ]
    for s in trace.samples:
        lines.append(f"{_fmt(s.time_s)},{_fmt(s.temp_c)},{_fmt(s.power_w)}")
    return "\n".join(lines) + "\n"


def generate_synthetic_trace(
    meta: TraceMeta,
    params: tuple[float, float, float],
    sweep: tuple[float, float, int],
    noise: float = 0.0,
    quantum: float = 0.0,
    seed: int = 0,
) -> Trace:
    """Generate a ground-truth trace from the exponential curve.

    ``params`` is (a0, a1, a2) of power = exp((T - a1)/a2) + a0.  Temperatures
    sweep linearly over ``sweep`` = (temp_lo, temp_hi, count); samples are
    taken at 5 Hz starting at t=0.  Gaussian noise (std-dev ``noise`` watts)
    is added, then each power is rounded to the nearest multiple of
    ``quantum`` when quantum > 0 to mimic sensor granularity.  Output is
    deterministic for a fixed seed.
    """
    a0, a1, a2 = params
    temp_lo, temp_hi, count = sweep
    if a2 == 0:
        raise InvalidParams("a2 must be nonzero")
    if count < 3:
        raise InvalidParams(f"sample count must be >= 3, got {count}")
    if noise < 0:
        raise InvalidParams(f"noise must be >= 0, got {noise!r}")
    if quantum < 0:
        raise InvalidParams(f"quantum must be >= 0, got {quantum!r}")
    temps = np.linspace(temp_lo, temp_hi, count)
    powers = np.exp((temps - a1) / a2) + a0
    if noise > 0:
        rng = np.random.default_rng(seed)
        powers = powers + rng.normal(0.0, noise, count)
    if quantum > 0:
        powers = np.round(powers / quantum) * quantum
    samples = tuple(
        TraceSample(0.2 * i, float(temps[i]), float(powers[i])) for i in range(count)
    )
    return Trace(meta, samples)
