"""Recording containers, CSV ingestion and the synthetic alert/fatigue generator."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ALERT = 0
FATIGUE = 1


class RecordingError(ValueError):
    """A recording file or array violates the recording contract."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Recording:
    """M channels x N samples, values in microvolts."""

    channel_names: tuple[str, ...]
    samples: np.ndarray
    sample_rate_hz: float
    source: str = ""

    def __post_init__(self):
        names = tuple(str(n) for n in self.channel_names)
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise RecordingError(f"samples must be a 2-D channels x time matrix, got shape {samples.shape}")
        m, n = samples.shape
        if m < 1:
            raise RecordingError("a recording needs at least one channel")
        if n < 2:
            raise RecordingError(f"a recording needs at least 2 samples, got {n}")
        if len(names) != m:
            raise RecordingError(f"{len(names)} channel names for {m} channels")
        dupes = sorted({c for c in names if names.count(c) > 1})
        if dupes:
            raise RecordingError(f"duplicate channel names: {', '.join(dupes)}")
        if not np.all(np.isfinite(samples)):
            ch, t = np.argwhere(~np.isfinite(samples))[0]
            raise RecordingError(f"non-finite sample at channel {names[ch]}, index {t}")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise RecordingError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "samples", _freeze(samples))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class ChannelView:
    name: str
    data: np.ndarray
    sample_rate_hz: float

    def __len__(self):
        return self.data.shape[0]


def channel(rec: Recording, name: str) -> ChannelView:
    try:
        idx = rec.channel_names.index(name)
    except ValueError:
        available = ", ".join(rec.channel_names)
        where = f" in {rec.source}" if rec.source else ""
        raise RecordingError(f"unknown channel {name!r}{where}; available: {available}") from None
    return ChannelView(name=name, data=rec.samples[idx], sample_rate_hz=rec.sample_rate_hz)


# ---------------------------------------------------------------------------
# CSV


def _scan_csv(path: str, rate: float) -> Recording:
    """Slow, cell-by-cell parse used to produce precise diagnostics."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not any(h.strip() for h in header):
            raise RecordingError(f"{path}: missing header row of channel names")
        names = [h.strip() for h in header]
        seen = set()
        for col, nm in enumerate(names, start=1):
            if not nm:
                raise RecordingError(f"{path}: header column {col} has an empty channel name")
            if nm in seen:
                raise RecordingError(f"{path}: duplicate channel name {nm!r} in header column {col}")
            seen.add(nm)
        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise RecordingError(
                    f"{path}: ragged row {row_no} (line {reader.line_num}) has {len(row)} "
                    f"values, header has {len(names)} channels"
                )
            vals = []
            for name, cell in zip(names, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise RecordingError(
                        f"{path}: non-numeric value {cell.strip()!r} at row {row_no}, column {name}"
                    ) from None
                if not math.isfinite(v):
                    raise RecordingError(f"{path}: non-finite value at row {row_no}, column {name}")
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise RecordingError(f"{path}: need at least 2 data rows, found {len(rows)}")
    return Recording(tuple(names), np.array(rows, dtype=np.float64).T, rate, source=path)


def load_recording_csv(path: str | os.PathLike, sample_rate_hz: float) -> Recording:
    """Read a samples-as-rows, channels-as-columns CSV with a header row."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise RecordingError(f"{path}: no such file")
    if not (sample_rate_hz > 0):
        raise RecordingError(f"sample rate must be positive, got {sample_rate_hz}")
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise RecordingError(f"{path}: missing header row of channel names")
    names = [h.strip() for h in header]
    if len(set(names)) != len(names) or not all(names):
        return _scan_csv(path, sample_rate_hz)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2,
                          comments=None, encoding="utf-8")
    except ValueError:
        return _scan_csv(path, sample_rate_hz)
    if data.size == 0 or data.shape[1] != len(names) or data.shape[0] < 2 or not np.all(np.isfinite(data)):
        return _scan_csv(path, sample_rate_hz)
    return Recording(tuple(names), data.T, sample_rate_hz, source=path)


def write_recording_csv(rec: Recording, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(rec.channel_names) + "\n")
        np.savetxt(fh, rec.samples.T, delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic corpus.

    Alert recordings are Gaussian noise; fatigue recordings have a larger
    spread plus impulsive spikes of +-10 fatigue standard deviations.
    """

    n_subjects: int = 12
    duration_s: float = 300.0
    sample_rate_hz: float = 1000.0
    alert_std_uv: float = 10.0
    fatigue_std_uv: float = 40.0
    fatigue_outlier_rate: float = 0.01
    seed: int = 42
    channel_name: str = "TP7"

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be positive")
        if not (self.duration_s > 0 and self.sample_rate_hz > 0):
            raise ValueError("duration and sample rate must be positive")
        if not 0 < self.alert_std_uv < self.fatigue_std_uv:
            raise ValueError("need 0 < alert_std_uv < fatigue_std_uv")
        if not 0.0 <= self.fatigue_outlier_rate < 1.0:
            raise ValueError("fatigue_outlier_rate must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_samples < 2:
            raise ValueError("duration_s * sample_rate_hz must give at least 2 samples")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


def generate_synthetic(spec: SynthSpec = SynthSpec()) -> list[tuple[Recording, int]]:
    """Return alert/fatigue pairs per subject, in subject order.

    Every recording draws from its own stream keyed by (seed, recording index).
    """
    n = spec.n_samples
    out = []
    for subject in range(spec.n_subjects):
        for label in (ALERT, FATIGUE):
            stream = 2 * subject + label
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, stream]))
            if label == ALERT:
                x = rng.normal(0.0, spec.alert_std_uv, n)
            else:
                x = rng.normal(0.0, spec.fatigue_std_uv, n)
                n_spikes = int(round(spec.fatigue_outlier_rate * n))
                if n_spikes:
                    where = rng.choice(n, size=n_spikes, replace=False)
                    signs = rng.choice(np.array([-1.0, 1.0]), size=n_spikes)
                    x[where] = signs * 10.0 * spec.fatigue_std_uv
            tag = "alert" if label == ALERT else "fatigue"
            rec = Recording((spec.channel_name,), x[None, :], spec.sample_rate_hz,
                            source=f"S{subject + 1:02d}_{tag}")
            out.append((rec, label))
    return out


# ---------------------------------------------------------------------------
# labels manifest


def read_labels_csv(path: str | os.PathLike) -> list[tuple[str, int]]:
    """Read a ``recording,label`` manifest; paths resolve against its directory."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise RecordingError(f"{path}: labels file not found")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:2]] != ["recording", "label"]:
            raise RecordingError(f"{path}: header must be 'recording,label'")
        for row_no, row in enumerate(reader, start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise RecordingError(f"{path}: row {row_no} must have 2 fields, got {len(row)}")
            rec_path, lab = row[0].strip(), row[1].strip()
            if lab not in ("0", "1"):
                raise RecordingError(f"{path}: row {row_no}, column label: expected 0 or 1, got {lab!r}")
            entries.append((os.path.normpath(os.path.join(base, rec_path)), int(lab)))
    if not entries:
        raise RecordingError(f"{path}: no recordings listed")
    return entries


def write_labels_csv(path: str | os.PathLike, entries: Sequence[tuple[str, int]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("recording,label\n")
        for rec_path, lab in entries:
            fh.write(f"{rec_path},{int(lab)}\n")
