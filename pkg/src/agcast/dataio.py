"""CSV ingestion, calendar alignment, panel merging, and synthetic data.

Index snapshots arrive as daily closes, commodity snapshots as monthly
production values dated on the 1st. Everything downstream works on a
MonthlyPanel whose columns share one strictly increasing month axis.
"""

from __future__ import annotations

import calendar
import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateDateError,
    EmptyAfterCleaningError,
    EmptyMonthError,
    InvalidSpecError,
    MissingColumnError,
    NoOverlapError,
    NonFiniteValueError,
    UnparseableDateError,
)

logger = logging.getLogger(__name__)


# --- month arithmetic -------------------------------------------------------

def month_start(d: dt.date) -> dt.date:
    return d.replace(day=1)


def add_months(d: dt.date, k: int) -> dt.date:
    """Shift a first-of-month date by k months."""
    total = d.year * 12 + (d.month - 1) + k
    year, month = divmod(total, 12)
    return dt.date(year, month + 1, 1)


def months_between(first: dt.date, last: dt.date) -> int:
    """Number of month steps from `first` to `last` (0 when equal)."""
    return (last.year - first.year) * 12 + (last.month - first.month)


def month_range(first: dt.date, n: int) -> list[dt.date]:
    start = month_start(first)
    return [add_months(start, i) for i in range(n)]


# --- core types -------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeries:
    """A dated sequence of scalar observations for one index or commodity.

    Dates must be strictly increasing and all values finite. `provenance`
    records how the series was produced (e.g. "csv", "month_start").
    """

    name: str
    dates: tuple[dt.date, ...]
    values: np.ndarray
    units: str = ""
    provenance: str = "raw"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)  # copy; frozen below
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != len(values):
            raise ValueError(
                f"series {self.name!r}: {len(self.dates)} dates but {len(values)} values"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"series {self.name!r} contains non-finite values")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur == prev:
                raise DuplicateDateError(f"series {self.name!r}: duplicate date {cur}")
            if cur < prev:
                raise ValueError(f"series {self.name!r}: dates not increasing at {cur}")

    def __len__(self) -> int:
        return len(self.dates)

    def is_monthly(self) -> bool:
        """True when every date is a first-of-month and months are contiguous."""
        if not all(d.day == 1 for d in self.dates):
            return False
        return all(
            months_between(a, b) == 1 for a, b in zip(self.dates, self.dates[1:])
        )


@dataclass(frozen=True)
class MonthlyPanel:
    """Month-aligned columns for several series over one shared month axis."""

    months: tuple[dt.date, ...]
    columns: dict[str, np.ndarray]
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        months = tuple(self.months)
        object.__setattr__(self, "months", months)
        object.__setattr__(self, "columns", dict(self.columns))
        object.__setattr__(self, "provenance", dict(self.provenance))
        for a, b in zip(months, months[1:]):
            if b <= a:
                raise ValueError("panel months must be strictly increasing")
        for name, col in self.columns.items():
            col = np.array(col, dtype=np.float64)  # copy; frozen below
            col.setflags(write=False)
            self.columns[name] = col
            if len(col) != len(months):
                raise ValueError(
                    f"column {name!r} has {len(col)} rows for {len(months)} months"
                )

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __len__(self) -> int:
        return len(self.months)

    def matrix(self, names: list[str] | None = None) -> np.ndarray:
        """Stack the requested columns (default: all) into a (T, F) matrix."""
        names = self.names if names is None else names
        return np.column_stack([self.columns[n] for n in names])

    def series(self, name: str) -> TimeSeries:
        return TimeSeries(
            name=name,
            dates=self.months,
            values=self.columns[name],
            provenance=self.provenance.get(name, "panel"),
        )

    def with_columns(self, extra: dict[str, np.ndarray], rule: str) -> "MonthlyPanel":
        """Return a new panel with additional columns appended."""
        columns = dict(self.columns)
        provenance = dict(self.provenance)
        for name, col in extra.items():
            columns[name] = np.asarray(col, dtype=np.float64)
            provenance[name] = rule
        return MonthlyPanel(months=self.months, columns=columns, provenance=provenance)


# --- CSV ingestion ----------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    date_column: str = "date"
    value_column: str = "value"
    date_format: str = "%Y-%m-%d"


def load_csv(path, schema: CsvSchema = CsvSchema(), name: str | None = None,
             units: str = "") -> TimeSeries:
    """Load one series from a comma-delimited CSV with a header row.

    Rows with an empty value cell are dropped (and counted in the log);
    unparseable dates, non-finite values, and duplicate dates are errors.
    The result is sorted by date.
    """
    path = str(path)
    if name is None:
        name = Path(path).stem
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (schema.date_column, schema.value_column):
            if col not in header:
                raise MissingColumnError(f"{path}: missing column {col!r} (header {header})")
        rows: list[tuple[dt.date, float]] = []
        dropped = 0
        for i, rec in enumerate(reader, start=2):  # header is line 1
            raw_value = (rec[schema.value_column] or "").strip()
            if raw_value == "":
                dropped += 1
                continue
            raw_date = (rec[schema.date_column] or "").strip()
            try:
                day = dt.datetime.strptime(raw_date, schema.date_format).date()
            except ValueError:
                raise UnparseableDateError(i, raw_date) from None
            try:
                value = float(raw_value)
            except ValueError:
                raise NonFiniteValueError(i, raw_value) from None
            if not math.isfinite(value):
                raise NonFiniteValueError(i, raw_value)
            rows.append((day, value))
    if dropped:
        logger.info("%s: dropped %d rows with empty values", path, dropped)
    if not rows:
        raise EmptyAfterCleaningError(f"{path}: no usable rows after cleaning")
    rows.sort(key=lambda r: r[0])
    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise DuplicateDateError(f"{path}: duplicate date {d1.isoformat()}")
    dates, values = zip(*rows)
    return TimeSeries(name=name, dates=dates, values=np.array(values),
                      units=units, provenance="csv")


# --- calendar alignment -----------------------------------------------------

def align_to_month_start(daily: TimeSeries, lookback_days: int = 7,
                         skip_leading_empty: bool = False) -> TimeSeries:
    """Collapse a daily series to one value per month, dated on the 1st.

    If the 1st has an observation it is used as-is; otherwise the most
    recent prior observation within `lookback_days` stands in (weekends and
    holidays both simply lack data). A month whose 1st cannot be served
    raises EmptyMonthError, unless it leads the series and
    `skip_leading_empty` is set, in which case it is dropped.
    """
    by_date = dict(zip(daily.dates, daily.values))
    first = month_start(daily.dates[0])
    months = month_range(first, months_between(first, daily.dates[-1]) + 1)
    out_dates: list[dt.date] = []
    out_values: list[float] = []
    for m in months:
        value = None
        for back in range(lookback_days + 1):
            probe = m - dt.timedelta(days=back)
            if probe in by_date:
                value = by_date[probe]
                break
        if value is None:
            if skip_leading_empty and not out_dates:
                continue
            raise EmptyMonthError(m)
        out_dates.append(m)
        out_values.append(value)
    if not out_dates:
        raise EmptyMonthError(months[0])
    return TimeSeries(name=daily.name, dates=out_dates, values=np.array(out_values),
                      units=daily.units, provenance="month_start")


def merge_panel(series: list[TimeSeries]) -> MonthlyPanel:
    """Merge monthly series into a panel over the intersection of their spans.

    Every input must already be monthly and contiguous; column order follows
    the input order.
    """
    if not series:
        raise NoOverlapError("no series to merge")
    for s in series:
        if not s.is_monthly():
            raise ValueError(f"series {s.name!r} is not contiguous monthly data")
    start = max(s.dates[0] for s in series)
    end = min(s.dates[-1] for s in series)
    if end < start:
        raise NoOverlapError(
            f"month ranges do not overlap ({start.isoformat()} > {end.isoformat()})"
        )
    n = months_between(start, end) + 1
    months = tuple(month_range(start, n))
    columns: dict[str, np.ndarray] = {}
    provenance: dict[str, str] = {}
    for s in series:
        offset = months_between(s.dates[0], start)
        columns[s.name] = np.asarray(s.values[offset:offset + n])
        provenance[s.name] = s.provenance
    return MonthlyPanel(months=months, columns=columns, provenance=provenance)


# --- panel CSV round trip ---------------------------------------------------

def write_panel_csv(panel: MonthlyPanel, path) -> None:
    """Write `month` plus one column per series; floats use repr precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month"] + panel.names)
        for i, m in enumerate(panel.months):
            writer.writerow([m.isoformat()] + [repr(float(panel.columns[n][i]))
                                               for n in panel.names])


def read_panel_csv(path) -> MonthlyPanel:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "month":
            raise MissingColumnError(f"{path}: first column must be 'month'")
        names = header[1:]
        months: list[dt.date] = []
        data: list[list[float]] = [[] for _ in names]
        for row in reader:
            months.append(dt.date.fromisoformat(row[0]))
            for j, cell in enumerate(row[1:]):
                data[j].append(float(cell))
    columns = {n: np.array(vals) for n, vals in zip(names, data)}
    return MonthlyPanel(months=tuple(months), columns=columns,
                        provenance={n: "csv" for n in names})


# --- synthetic data ---------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic monthly series.

    value[t] = start + trend*t + seasonal_amplitude*sin(2*pi*t/period)
               + N(0, noise_std) + shock_magnitude at each shock month.
    """

    n_months: int
    seed: int
    trend: float = 0.0
    seasonal_amplitude: float = 0.0
    noise_std: float = 0.0
    shock_months: tuple[int, ...] = ()
    shock_magnitude: float = 0.0
    start: float = 0.0
    period: int = 12
    first_month: dt.date = dt.date(2000, 1, 1)
    name: str = "synthetic"

    def __post_init__(self):
        if self.n_months < 24:
            raise InvalidSpecError("n_months must be >= 24")
        if self.seed is None:
            raise InvalidSpecError("seed is required")
        if self.noise_std < 0:
            raise InvalidSpecError("noise_std must be >= 0")
        if self.period < 1:
            raise InvalidSpecError("period must be >= 1")
        if any(m < 0 or m >= self.n_months for m in self.shock_months):
            raise InvalidSpecError("shock months must lie inside [0, n_months)")


def generate_synthetic(spec: SyntheticSpec) -> TimeSeries:
    """Deterministic trend + seasonality + noise + additive shocks."""
    t = np.arange(spec.n_months, dtype=np.float64)
    values = spec.start + spec.trend * t
    values += spec.seasonal_amplitude * np.sin(2.0 * np.pi * t / spec.period)
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        values += rng.normal(0.0, spec.noise_std, size=spec.n_months)
    for m in spec.shock_months:
        values[m] += spec.shock_magnitude
    return TimeSeries(name=spec.name,
                      dates=month_range(spec.first_month, spec.n_months),
                      values=values, provenance="synthetic")


@dataclass(frozen=True)
class LinkedPanelTruth:
    """Ground truth of a generated universe, for recall and effect tests."""

    shock_months: dict[str, tuple[int, ...]]
    driver_of: dict[str, str]
    response_lag: int
    response_months: int


def generate_linked_panel(n_months: int, n_indices: int, n_commodities: int,
                          seed: int, shocks_per_index: int = 4,
                          shock_sigma: float = 9.0, response_lag: int = 1,
                          response_months: int = 3,
                          response_scale: float = 6.0,
                          first_month: dt.date = dt.date(2000, 1, 1),
                          ) -> tuple[MonthlyPanel, LinkedPanelTruth]:
    """Build a synthetic universe where commodity production reacts to index shocks.

    Each index carries sparse large shocks; each commodity follows its own
    trend and seasonality plus a lagged, decaying response to the shocks of
    one driver index. Fully deterministic under `seed`.
    """
    master = np.random.default_rng(seed)
    series: list[TimeSeries] = []
    shock_months: dict[str, tuple[int, ...]] = {}
    driver_of: dict[str, str] = {}

    index_names = [f"index_{i + 1}" for i in range(n_indices)]
    margin = 12
    for name in index_names:
        noise = float(master.uniform(0.5, 1.5))
        candidates = np.arange(margin, n_months - margin)
        picks = np.sort(master.choice(candidates, size=shocks_per_index, replace=False))
        # keep shocks at least 4 months apart so their signatures do not overlap
        kept: list[int] = []
        for p in picks:
            if not kept or p - kept[-1] >= 4:
                kept.append(int(p))
        spec = SyntheticSpec(
            n_months=n_months,
            seed=int(master.integers(0, 2**31)),
            trend=float(master.uniform(0.02, 0.2)),
            seasonal_amplitude=float(master.uniform(0.0, 2.0)),
            noise_std=noise,
            shock_months=tuple(kept),
            shock_magnitude=shock_sigma * noise * float(master.choice([-1.0, 1.0])),
            start=float(master.uniform(20.0, 100.0)),
            first_month=first_month,
            name=name,
        )
        series.append(generate_synthetic(spec))
        shock_months[name] = tuple(kept)

    decay = 0.5 ** np.arange(response_months)
    for j in range(n_commodities):
        name = f"commodity_{j + 1:02d}"
        driver = index_names[j % n_indices]
        driver_of[name] = driver
        noise = float(master.uniform(0.3, 1.0))
        spec = SyntheticSpec(
            n_months=n_months,
            seed=int(master.integers(0, 2**31)),
            trend=float(master.uniform(0.05, 0.3)),
            seasonal_amplitude=float(master.uniform(0.5, 3.0)),
            noise_std=noise,
            start=float(master.uniform(50.0, 500.0)),
            first_month=first_month,
            name=name,
        )
        base = generate_synthetic(spec)
        values = np.array(base.values)
        impulse = np.zeros(n_months)
        for m in shock_months[driver]:
            impulse[m] = 1.0
        response = np.convolve(impulse, decay)[:n_months]
        shifted = np.zeros(n_months)
        shifted[response_lag:] = response[:n_months - response_lag]
        values += response_scale * noise * shifted
        series.append(replace(base, values=values))

    panel = merge_panel(series)
    truth = LinkedPanelTruth(shock_months=shock_months, driver_of=driver_of,
                             response_lag=response_lag,
                             response_months=response_months)
    return panel, truth


def business_daily_dates(first: dt.date, last: dt.date) -> list[dt.date]:
    """All weekdays in [first, last], a stand-in trading calendar."""
    days = []
    cur = first
    while cur <= last:
        if cur.weekday() < 5:
            days.append(cur)
        cur += dt.timedelta(days=1)
    return days


def monthly_to_business_daily(monthly: TimeSeries, seed: int,
                              intra_noise: float = 0.0) -> TimeSeries:
    """Expand a monthly series to weekday observations for snapshot fixtures.

    Each month's value is held through the month with optional jitter; the
    last month covers through its final weekday.
    """
    rng = np.random.default_rng(seed)
    last_month = monthly.dates[-1]
    last_day = dt.date(last_month.year, last_month.month,
                       calendar.monthrange(last_month.year, last_month.month)[1])
    # start a few days early so the first month's 1st has a prior weekday
    days = business_daily_dates(monthly.dates[0] - dt.timedelta(days=4), last_day)
    month_of = {m: v for m, v in zip(monthly.dates, monthly.values)}
    values = []
    for d in days:
        v = month_of.get(month_start(d), monthly.values[0])
        if intra_noise > 0:
            v += rng.normal(0.0, intra_noise)
        values.append(v)
    return TimeSeries(name=monthly.name, dates=days, values=np.array(values),
                      units=monthly.units, provenance="daily_fixture")


def write_series_csv(ts: TimeSeries, path) -> None:
    """Write a series in the documented input format (date, value)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "value"])
        for d, v in zip(ts.dates, ts.values):
            writer.writerow([d.isoformat(), repr(float(v))])
