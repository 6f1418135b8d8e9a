"""Event streams: the canonical record of a multivariate point process.

A stream is a sorted sequence of jump times with an integer component mark
per jump, observed on (0, horizon]. Components never jump together, so
times must be strictly increasing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EventStream",
    "TimeWindow",
    "ValidationReport",
    "EventDataError",
    "validate",
    "read_events",
    "write_events",
    "restrict",
]

# De-tie step: k-th member of a tie group is shifted by k times this.
_DETIE_STEP = 2.0 ** -30


class EventDataError(ValueError):
    """Raised when event data fails validation or cannot be parsed."""


@dataclass(frozen=True)
class TimeWindow:
    """Half-open-on-the-left observation window (start, end]."""

    start: float
    end: float

    def __post_init__(self):
        if not (0.0 <= self.start < self.end):
            raise ValueError(f"need 0 <= start < end, got ({self.start}, {self.end})")

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class EventStream:
    """Immutable record of jump times and component marks on (0, horizon].

    Construction only coerces array types; use :func:`validate` to check the
    stream invariants, or :func:`read_events` which validates on load.
    """

    times: np.ndarray
    marks: np.ndarray
    d: int
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        marks = np.asarray(self.marks, dtype=np.int64)
        if times.ndim != 1 or marks.ndim != 1:
            raise ValueError("times and marks must be one-dimensional")
        if times.shape != marks.shape:
            raise ValueError(
                f"times and marks disagree in length: {times.size} vs {marks.size}"
            )
        times.flags.writeable = False
        marks.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def n(self) -> int:
        """Total number of events."""
        return self.times.size

    def count(self, mark: int | None = None) -> int:
        """Number of events, optionally restricted to one component."""
        if mark is None:
            return self.times.size
        return int(np.count_nonzero(self.marks == mark))

    def counts(self) -> np.ndarray:
        """Per-component event counts as a d-vector."""
        return np.bincount(self.marks, minlength=self.d).astype(np.int64)

    def component_times(self, mark: int) -> np.ndarray:
        return self.times[self.marks == mark]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = field(default=())


def validate(stream: EventStream) -> ValidationReport:
    """Check stream invariants and report every violation found."""
    v: list[str] = []
    t, m = stream.times, stream.marks
    if stream.d < 1:
        v.append(f"component count must be >= 1, got {stream.d}")
    if not stream.horizon > 0.0:
        v.append(f"horizon must be > 0, got {stream.horizon}")
    if t.size:
        diffs = np.diff(t)
        for i in np.flatnonzero(diffs == 0.0):
            v.append(f"tie at index {i + 1} (time {t[i + 1]!r})")
        for i in np.flatnonzero(diffs < 0.0):
            v.append(f"non-monotone times at index {i + 1} ({t[i + 1]!r} after {t[i]!r})")
        if t[0] <= 0.0:
            v.append(f"time at index 0 not in (0, horizon]: {t[0]!r}")
        beyond = np.flatnonzero(t > stream.horizon)
        for i in beyond:
            v.append(f"time beyond horizon at index {i} ({t[i]!r} > {stream.horizon!r})")
        bad_marks = np.flatnonzero((m < 0) | (m >= stream.d))
        for i in bad_marks:
            v.append(f"mark out of range at index {i} ({m[i]} not in [0, {stream.d}))")
    return ValidationReport(ok=not v, violations=tuple(v))


def _detie(times: np.ndarray) -> np.ndarray:
    """Shift the k-th member of each tie group by k * 2^-30 seconds."""
    out = times.copy()
    i = 0
    while i < out.size:
        j = i
        while j + 1 < out.size and times[j + 1] == times[i]:
            j += 1
        for k in range(1, j - i + 1):
            out[i + k] = times[i] + k * _DETIE_STEP
        i = j + 1
    return out


def read_events(
    path,
    horizon: float,
    d: int | None = None,
    detie: bool = False,
) -> EventStream:
    """Parse the CSV event format and return a validated stream.

    The file must start with the exact header ``time,component`` and hold one
    event per row, sorted ascending. The horizon is supplied out of band.
    When ``d`` is omitted it is inferred as 1 + max(mark). ``detie=True``
    spreads tied timestamps deterministically instead of rejecting them.
    """
    times: list[float] = []
    marks: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EventDataError(f"{path}: empty file, expected header 'time,component'")
        if header != ["time", "component"]:
            raise EventDataError(
                f"{path}: bad header {','.join(header)!r}, expected 'time,component'"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise EventDataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t = float(row[0])
                k = int(row[1])
            except ValueError as exc:
                raise EventDataError(f"{path}:{lineno}: {exc}") from None
            if times and t < times[-1]:
                raise EventDataError(
                    f"{path}:{lineno}: time {t!r} out of order (previous {times[-1]!r})"
                )
            times.append(t)
            marks.append(k)

    t = np.asarray(times, dtype=np.float64)
    m = np.asarray(marks, dtype=np.int64)
    if detie and t.size:
        t = _detie(t)
    if d is None:
        d = int(m.max()) + 1 if m.size else 1
    stream = EventStream(times=t, marks=m, d=d, horizon=horizon)
    report = validate(stream)
    if not report.ok:
        raise EventDataError(f"{path}: " + "; ".join(report.violations))
    return stream


def write_events(stream: EventStream, path) -> None:
    """Write the CSV event format; floats use shortest round-trip decimals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "component"])
        for t, m in zip(stream.times, stream.marks):
            writer.writerow([repr(float(t)), int(m)])


def restrict(stream: EventStream, window: TimeWindow) -> EventStream:
    """Events in (start, end], times shifted by -start, horizon end-start."""
    if window.end > stream.horizon:
        raise ValueError(
            f"window ({window.start}, {window.end}] exceeds horizon {stream.horizon}"
        )
    keep = (stream.times > window.start) & (stream.times <= window.end)
    return EventStream(
        times=stream.times[keep] - window.start,
        marks=stream.marks[keep],
        d=stream.d,
        horizon=window.length,
    )
