"""Channel selection, sliding windows and the four per-window features.

Each window yields ``[robust_scale, robust_location, variance, autocovariance]``:
the consistency-scaled MCD scatter and its location, the ``1/(N-1)`` variance
and the ``1/N`` zero-lag autocovariance.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .mcd import MCDConfig, robust_estimate
from .signal_io import ChannelView, Recording, RecordingError, channel

FEATURE_NAMES = ("robust_scale", "robust_location", "variance", "autocovariance")
N_FEATURES = len(FEATURE_NAMES)
CSV_HEADER = ("window_start_s",) + FEATURE_NAMES + ("label", "recording_id")


@dataclass(frozen=True)
class WindowingConfig:
    window_s: float = 2.0
    step_s: float = 0.5

    def __post_init__(self):
        if not (self.window_s > 0 and self.step_s > 0):
            raise ValueError("window_s and step_s must be positive")

    def lengths(self, sample_rate_hz: float) -> tuple[int, int]:
        w = int(round(self.window_s * sample_rate_hz))
        s = int(round(self.step_s * sample_rate_hz))
        if w < 2:
            raise ValueError(f"window of {self.window_s} s at {sample_rate_hz} Hz has fewer than 2 samples")
        if s < 1:
            raise ValueError(f"step of {self.step_s} s at {sample_rate_hz} Hz is below one sample")
        return w, s


@dataclass(frozen=True)
class FeatureVector:
    robust_scale: float
    robust_location: float
    variance: float
    autocovariance: float
    window_start_s: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.robust_scale, self.robust_location, self.variance, self.autocovariance])


def _sample_variances(samples: np.ndarray) -> np.ndarray:
    dev = samples - samples.mean(axis=1, keepdims=True)
    return np.einsum("ij,ij->i", dev, dev) / (samples.shape[1] - 1)


def select_max_variance_channel(rec: Recording) -> tuple[int, str, float]:
    """Channel with the largest sample variance; ties go to the lowest index."""
    if rec.n_samples < 2:
        raise ValueError("channel selection needs at least 2 samples")
    var = _sample_variances(rec.samples)
    idx = int(np.argmax(var))
    return idx, rec.channel_names[idx], float(var[idx])


def select_channel_across(recordings: Sequence[Recording]) -> tuple[str, dict[str, float]]:
    """Vote over several recordings by mean variance rank (1 = largest).

    Only channels present in every recording take part; ties on mean rank go
    to the channel listed first in the first recording.
    """
    if not recordings:
        raise ValueError("no recordings to select a channel from")
    common = [c for c in recordings[0].channel_names
              if all(c in r.channel_names for r in recordings[1:])]
    if not common:
        raise RecordingError("recordings share no channel name")
    ranks = np.zeros(len(common))
    for rec in recordings:
        rows = [rec.channel_names.index(c) for c in common]
        var = _sample_variances(rec.samples[rows])
        # stable sort on -var keeps lower index first among equal variances
        order = np.argsort(-var, kind="stable")
        r = np.empty(len(common))
        r[order] = np.arange(1, len(common) + 1)
        ranks += r
    ranks /= len(recordings)
    best = int(np.argmin(ranks))
    return common[best], dict(zip(common, ranks.tolist()))


def segment_windows(ch: ChannelView, cfg: WindowingConfig = WindowingConfig()) -> list[tuple[int, int]]:
    w, s = cfg.lengths(ch.sample_rate_hz)
    n = len(ch)
    if n < w:
        raise ValueError(f"channel {ch.name!r} has {n} samples, shorter than one {w}-sample window")
    count = (n - w) // s + 1
    return [(k * s, k * s + w) for k in range(count)]


def window_features(segment: np.ndarray, mcd_cfg: MCDConfig = MCDConfig()) -> np.ndarray:
    """Feature row ``[robust_scale, robust_location, variance, autocovariance]``."""
    x = np.asarray(segment, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("a window needs at least 2 samples")
    est = robust_estimate(x, mcd_cfg)
    dev = x - x.sum() / n
    ss = float(np.dot(dev, dev))
    return np.array([est.scaled_scale, est.location, ss / (n - 1), ss / n])


def extract_window_features(
    ch: ChannelView,
    windows: Iterable[tuple[int, int]],
    cfg: MCDConfig = MCDConfig(),
) -> list[FeatureVector]:
    out = []
    for start, end in windows:
        row = window_features(ch.data[start:end], cfg)
        out.append(FeatureVector(*row.tolist(), window_start_s=start / ch.sample_rate_hz))
    return out


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature min/max mapping onto [-1, 1], frozen after fitting."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64).copy()
        hi = np.asarray(self.maximum, dtype=np.float64).copy()
        if lo.shape != (N_FEATURES,) or hi.shape != (N_FEATURES,):
            raise ValueError(f"normalizer needs {N_FEATURES} minima and maxima")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("normalizer bounds must be finite")
        if np.any(hi < lo):
            raise ValueError("normalizer maximum below minimum")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    def __eq__(self, other):
        return (isinstance(other, Normalizer)
                and np.array_equal(self.minimum, other.minimum)
                and np.array_equal(self.maximum, other.maximum))


def fit_normalizer(train) -> Normalizer:
    """Pooled per-feature min/max over every training row (both classes)."""
    x = train.features if isinstance(train, LabeledDataset) else np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    return Normalizer(x.min(axis=0), x.max(axis=0))


def apply_normalizer(nz: Normalizer, rows) -> np.ndarray:
    x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    span = nz.maximum - nz.minimum
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = 2.0 * (x - nz.minimum) / safe - 1.0
    out[:, degenerate] = 0.0
    return np.clip(out, -1.0, 1.0)


# ---------------------------------------------------------------------------
# labeled datasets


@dataclass(eq=False)
class LabeledDataset:
    """Feature rows with binary labels and per-row provenance."""

    features: np.ndarray
    labels: np.ndarray
    recording_ids: np.ndarray
    window_start_s: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, N_FEATURES)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.recording_ids = np.asarray(self.recording_ids, dtype=object)
        self.window_start_s = np.asarray(self.window_start_s, dtype=np.float64)
        n = self.features.shape[0]
        if not (self.labels.shape == (n,) and self.recording_ids.shape == (n,)
                and self.window_start_s.shape == (n,)):
            raise ValueError("features, labels, recording ids and window starts differ in length")
        if n and not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be 0 (alert) or 1 (fatigue)")

    def __len__(self):
        return self.features.shape[0]

    @property
    def rows(self) -> list[FeatureVector]:
        return [FeatureVector(*f.tolist(), window_start_s=float(t))
                for f, t in zip(self.features, self.window_start_s)]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.features[idx], self.labels[idx],
                              self.recording_ids[idx], self.window_start_s[idx])

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.features, labels, self.recording_ids, self.window_start_s)

    @classmethod
    def concat(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        if not parts:
            return cls(np.empty((0, N_FEATURES)), [], [], [])
        return cls(
            np.vstack([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.recording_ids for p in parts]),
            np.concatenate([p.window_start_s for p in parts]),
        )


def recording_features(
    ch: ChannelView,
    label: int,
    recording_id: str,
    windowing: WindowingConfig = WindowingConfig(),
    mcd_cfg: MCDConfig = MCDConfig(),
) -> LabeledDataset:
    windows = segment_windows(ch, windowing)
    feats = np.array([window_features(ch.data[a:b], mcd_cfg) for a, b in windows])
    starts = np.array([a / ch.sample_rate_hz for a, _ in windows])
    n = len(windows)
    return LabeledDataset(feats, np.full(n, label), np.full(n, recording_id, dtype=object), starts)


def build_labeled_dataset(
    recordings: Sequence[tuple[Recording, int]],
    channel_name: str,
    windowing: WindowingConfig = WindowingConfig(),
    mcd_cfg: MCDConfig = MCDConfig(),
) -> LabeledDataset:
    """Window features of ``channel_name`` for every recording, in input order."""
    parts = []
    for i, (rec, label) in enumerate(recordings):
        if label not in (0, 1):
            raise ValueError(f"recording {rec.source or i}: label must be 0 or 1, got {label}")
        rid = rec.source or f"rec{i:03d}"
        parts.append(recording_features(channel(rec, channel_name), label, rid, windowing, mcd_cfg))
    return LabeledDataset.concat(parts)


def write_features_csv(ds: LabeledDataset, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for f, lab, rid, t in zip(ds.features, ds.labels, ds.recording_ids, ds.window_start_s):
            vals = ",".join(f"{v:.17g}" for v in (t, *f))
            fh.write(f"{vals},{int(lab)},{rid}\n")


def read_features_csv(path: str | os.PathLike) -> LabeledDataset:
    feats, labels, rids, starts = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: header must be {','.join(CSV_HEADER)}")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}: row {row_no} has {len(row)} fields, expected {len(CSV_HEADER)}")
            try:
                nums = [float(v) for v in row[:5]]
                lab = int(row[5])
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_no}: {exc}") from None
            if not all(math.isfinite(v) for v in nums):
                raise ValueError(f"{path}: row {row_no} has non-finite values")
            starts.append(nums[0])
            feats.append(nums[1:])
            labels.append(lab)
            rids.append(row[6])
    return LabeledDataset(np.array(feats).reshape(-1, N_FEATURES), labels,
                          np.array(rids, dtype=object), starts)
