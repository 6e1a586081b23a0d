"""Event CSV parsing, sliding windows, chronological splits, and train-fitted vocabularies.

Canonical file format: one event per row with columns ``id,date,labels,amounts``.
``labels`` and ``amounts`` are semicolon-separated lists of equal length; dates
are ISO ``YYYY-MM-DD`` unless an alternate ``date_format`` is given.
"""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

HEADER = ("id", "date", "labels", "amounts")
DATE_FORMATS = {"iso": "%Y-%m-%d", "dd-mm-yyyy": "%d-%m-%Y"}
SPLIT_FRACTIONS = (0.70, 0.17, 0.13)


@dataclass(frozen=True)
class EventRecord:
    """One timestamped event: the labels observed on that date and their amounts."""

    sequence_id: str
    date: dt.date
    labels: tuple[str, ...]
    amounts: tuple[float, ...]


@dataclass(frozen=True)
class WindowSample:
    """`tau` consecutive events plus the label set of the following event.

    ``dts[j]`` is the day gap between window event j and its predecessor in the
    full sequence; None marks the first event of a sequence (no predecessor).
    """

    sequence_id: str
    window: tuple[EventRecord, ...]
    dts: tuple[int | None, ...]
    target_labels: tuple[str, ...]
    target_amounts: tuple[float, ...]
    target_date: dt.date


@dataclass
class SplitDataset:
    train: list[WindowSample]
    valid: list[WindowSample]
    test: list[WindowSample]


def _parse_date(text: str, date_format: str, row: int) -> dt.date:
    fmt = DATE_FORMATS.get(date_format, date_format)
    try:
        return dt.datetime.strptime(text.strip(), fmt).date()
    except ValueError as exc:
        raise DataError(f"row {row}: bad date {text!r}: {exc}") from exc


def parse_csv(path, date_format: str = "iso") -> list[EventRecord]:
    """Read a canonical event CSV; rows come back grouped by ID, dated ascending."""
    events: list[EventRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: missing header") from None
        if tuple(h.strip() for h in header) != HEADER:
            raise DataError(f"expected header {','.join(HEADER)}, got {','.join(header)}")
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"row {row_num}: expected 4 fields, got {len(row)}")
            seq_id, date_text, label_cell, amount_cell = row
            labels = tuple(s.strip() for s in label_cell.split(";") if s.strip())
            if not labels:
                raise DataError(f"row {row_num}: event has no labels")
            if len(set(labels)) != len(labels):
                raise DataError(f"row {row_num}: duplicate labels in one event")
            try:
                amounts = tuple(float(s) for s in amount_cell.split(";"))
            except ValueError as exc:
                raise DataError(f"row {row_num}: bad amount: {exc}") from exc
            if len(amounts) != len(labels):
                raise DataError(
                    f"row {row_num}: {len(labels)} labels but {len(amounts)} amounts"
                )
            events.append(
                EventRecord(seq_id.strip(), _parse_date(date_text, date_format, row_num), labels, amounts)
            )
    events.sort(key=lambda e: (e.sequence_id, e.date))
    return events


def write_csv(events: Iterable[EventRecord], path) -> None:
    """Serialize events in canonical form (grouped by ID, sorted by date)."""
    rows = sorted(events, key=lambda e: (e.sequence_id, e.date))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for e in rows:
            writer.writerow(
                [e.sequence_id, e.date.isoformat(), ";".join(e.labels), ";".join(repr(a) for a in e.amounts)]
            )


def group_events(events: Iterable[EventRecord]) -> dict[str, list[EventRecord]]:
    by_id: dict[str, list[EventRecord]] = {}
    for e in events:
        by_id.setdefault(e.sequence_id, []).append(e)
    for seq in by_id.values():
        seq.sort(key=lambda e: e.date)
    return by_id


def validate_events(events: Sequence[EventRecord]) -> None:
    """Estimator-facing input check for event lists built in code."""
    for i, e in enumerate(events):
        if not isinstance(e, EventRecord):
            raise DataError(f"item {i}: expected EventRecord, got {type(e).__name__}")
        if not e.labels:
            raise DataError(f"item {i}: event has no labels")
        if len(set(e.labels)) != len(e.labels):
            raise DataError(f"item {i}: duplicate labels in one event")
        if len(e.labels) != len(e.amounts):
            raise DataError(f"item {i}: {len(e.labels)} labels but {len(e.amounts)} amounts")
        if not isinstance(e.date, dt.date):
            raise DataError(f"item {i}: date must be a datetime.date")


def make_windows(
    events_by_id: Mapping[str, Sequence[EventRecord]], tau: int
) -> list[WindowSample]:
    """Slide a length-`tau` window with stride 1; the next event supplies the target."""
    if tau < 1:
        raise ConfigError(f"window length must be >= 1, got {tau}")
    samples: list[WindowSample] = []
    for seq_id in sorted(events_by_id):
        seq = list(events_by_id[seq_id])
        for a, b in zip(seq, seq[1:]):
            if b.date <= a.date:
                raise DataError(
                    f"sequence {seq_id}: dates must strictly increase "
                    f"({a.date} then {b.date})"
                )
        for start in range(len(seq) - tau):
            window = tuple(seq[start : start + tau])
            target = seq[start + tau]
            dts = tuple(
                None if start + j == 0 else (seq[start + j].date - seq[start + j - 1].date).days
                for j in range(tau)
            )
            samples.append(
                WindowSample(
                    seq_id, window, dts, tuple(target.labels), tuple(target.amounts), target.date
                )
            )
    return samples


def split_chronological(
    samples: Sequence[WindowSample], fractions: tuple[float, float, float] = SPLIT_FRACTIONS
) -> SplitDataset:
    """Per-ID chronological split: earliest to train, then valid, then test.

    Valid/test sizes are floored; the remainder goes to train.  IDs with fewer
    than 3 samples contribute everything to train (with a warning).
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be 3 non-negatives summing to 1, got {fractions}")
    by_id: dict[str, list[WindowSample]] = {}
    for s in samples:
        by_id.setdefault(s.sequence_id, []).append(s)
    out = SplitDataset([], [], [])
    for seq_id in sorted(by_id):
        chunk = sorted(by_id[seq_id], key=lambda s: s.target_date)
        n = len(chunk)
        if n < 3:
            warnings.warn(
                f"sequence {seq_id}: only {n} sample(s); all assigned to train", stacklevel=2
            )
            out.train.extend(chunk)
            continue
        n_valid = int(n * fractions[1])
        n_test = int(n * fractions[2])
        n_train = n - n_valid - n_test
        out.train.extend(chunk[:n_train])
        out.valid.extend(chunk[n_train : n_train + n_valid])
        out.test.extend(chunk[n_train + n_valid :])
    return out


@dataclass
class Vocabularies:
    """Lookup tables fitted on training data only.

    Index 0 of the dt table marks "no predecessor" (and gaps below everything
    seen in training); index 0 of the ID table marks unknown IDs.
    """

    labels: tuple[str, ...]
    ids: tuple[str, ...]
    dt_values: tuple[int, ...]  # sorted observed day gaps; value i maps to index i+1
    amount_edges: np.ndarray  # interior bin edges (len = n_bins - 1)
    n_amount_bins: int
    label_to_index: dict[str, int] = field(init=False, repr=False)
    id_to_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.label_to_index = {lab: i for i, lab in enumerate(self.labels)}
        self.id_to_index = {sid: i + 1 for i, sid in enumerate(self.ids)}

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def label_index(self, label: str) -> int | None:
        return self.label_to_index.get(label)

    def id_index(self, sequence_id: str) -> int:
        return self.id_to_index.get(sequence_id, 0)

    def dt_index(self, gap: int | None) -> int:
        """Exact match, else the largest observed gap below it, else index 0."""
        if gap is None:
            return 0
        pos = bisect.bisect_right(self.dt_values, gap)
        return pos  # dt_values[pos-1] <= gap; pos == 0 means below everything seen

    def amount_bin(self, amount: float) -> int:
        return int(np.searchsorted(self.amount_edges, amount, side="right"))

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "ids": list(self.ids),
            "dt_values": list(self.dt_values),
            "amount_edges": [float(e) for e in self.amount_edges],
            "n_amount_bins": self.n_amount_bins,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabularies":
        return cls(
            labels=tuple(d["labels"]),
            ids=tuple(d["ids"]),
            dt_values=tuple(int(v) for v in d["dt_values"]),
            amount_edges=np.asarray(d["amount_edges"], dtype=np.float64),
            n_amount_bins=int(d["n_amount_bins"]),
        )


def fit_vocabularies(train_events: Sequence[EventRecord], n_amount_bins: int = 100) -> Vocabularies:
    """Collect label/ID/day-gap vocabularies and amount-quantile bin edges."""
    if n_amount_bins < 1:
        raise ConfigError(f"need at least 1 amount bin, got {n_amount_bins}")
    if not train_events:
        raise DataError("cannot fit vocabularies on an empty training set")
    by_id = group_events(train_events)
    labels = sorted({lab for e in train_events for lab in e.labels})
    gaps: set[int] = set()
    for seq in by_id.values():
        for a, b in zip(seq, seq[1:]):
            gaps.add((b.date - a.date).days)
    amounts = np.array([a for e in train_events for a in e.amounts], dtype=np.float64)
    if n_amount_bins > 1:
        qs = np.arange(1, n_amount_bins) / n_amount_bins
        edges = np.unique(np.quantile(amounts, qs))
        # an edge at either extreme would delimit a bin no training amount occupies
        edges = edges[(edges > amounts.min()) & (edges < amounts.max())]
    else:
        edges = np.empty(0)
    return Vocabularies(
        labels=tuple(labels),
        ids=tuple(sorted(by_id)),
        dt_values=tuple(sorted(gaps)),
        amount_edges=edges,
        n_amount_bins=len(edges) + 1,
    )


def events_in_samples(samples: Iterable[WindowSample]) -> list[EventRecord]:
    """Deduplicated events referenced by the given samples (windows and targets).

    This is what vocabularies may legally see when fitting on a train split.
    """
    by_key: dict[tuple[str, dt.date], EventRecord] = {}
    for s in samples:
        for e in s.window:
            by_key[(e.sequence_id, e.date)] = e
        key = (s.sequence_id, s.target_date)
        if key not in by_key:
            by_key[key] = EventRecord(
                s.sequence_id, s.target_date, s.target_labels, s.target_amounts
            )
    return sorted(by_key.values(), key=lambda e: (e.sequence_id, e.date))


def target_matrix(samples: Sequence[WindowSample], vocab: Vocabularies) -> np.ndarray:
    """Binary (n_samples, K) matrix over the train-fitted label universe."""
    y = np.zeros((len(samples), vocab.n_labels))
    for i, s in enumerate(samples):
        for lab in s.target_labels:
            k = vocab.label_index(lab)
            if k is not None:
                y[i, k] = 1.0
    return y


def dataset_stats(events: Sequence[EventRecord]) -> dict[str, float]:
    """Summary table: event count, set sizes, label universe, frequency spread."""
    if not events:
        raise DataError("no events")
    sizes = np.array([len(e.labels) for e in events])
    label_counts: dict[str, int] = {}
    for e in events:
        for lab in e.labels:
            label_counts[lab] = label_counts.get(lab, 0) + 1
    freqs = np.array(sorted(label_counts.values()), dtype=np.float64) / len(events)
    return {
        "events": int(len(events)),
        "sequences": int(len({e.sequence_id for e in events})),
        "median_set_size": float(np.median(sizes)),
        "max_set_size": int(sizes.max()),
        "unique_labels": int(len(label_counts)),
        "diff": float(np.quantile(freqs, 0.95) - np.quantile(freqs, 0.05)),
    }
