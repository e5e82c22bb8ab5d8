"""Window-by-window replay of a recording through a trained model."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ensemble import BaggedModel, majority_vote, tree_votes
from .features import window_features
from .signal_io import Recording, RecordingError


@dataclass(frozen=True)
class StreamDecision:
    window_end_time_s: float
    label: int
    vote_fraction: float
    processing_wall_time_s: float


@dataclass
class StreamReport:
    decisions: list
    window_s: float
    step_s: float

    @property
    def mean_processing_s(self) -> float:
        return float(np.mean([d.processing_wall_time_s for d in self.decisions])) if self.decisions else 0.0

    @property
    def max_processing_s(self) -> float:
        return float(np.max([d.processing_wall_time_s for d in self.decisions])) if self.decisions else 0.0

    @property
    def detection_delay_s(self) -> float:
        # the 2 s of signal a decision needs plus the time spent computing it
        return self.window_s + self.mean_processing_s

    @property
    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.decisions], dtype=np.int64)

    def summary(self) -> dict:
        labels = self.labels
        return {
            "n_decisions": len(self.decisions),
            "n_fatigue": int(labels.sum()),
            "majority_label": int(2 * labels.sum() > labels.size) if labels.size else None,
            "window_s": self.window_s,
            "step_s": self.step_s,
            "mean_processing_s": self.mean_processing_s,
            "max_processing_s": self.max_processing_s,
            "detection_delay_s": self.detection_delay_s,
        }


def stream_recording(
    rec: Recording,
    model: BaggedModel,
    realtime: bool = False,
    on_decision: Optional[Callable[[StreamDecision], None]] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> StreamReport:
    """Emit one decision each time a full window of new samples is available.

    With ``realtime`` the replay sleeps so that decisions are released no
    earlier than the moment their last sample would have arrived.
    """
    if model.channel_name not in rec.channel_names:
        raise RecordingError(
            f"channel mismatch: model expects {model.channel_name!r}, recording "
            f"{rec.source or ''} has {', '.join(rec.channel_names)}"
        )
    data = rec.samples[rec.channel_names.index(model.channel_name)]
    fs = rec.sample_rate_hz
    w, s = model.windowing.lengths(fs)
    if data.size < w:
        raise RecordingError(f"recording has {data.size} samples, shorter than one {w}-sample window")
    decisions = []
    t_start = clock()
    for end in range(w, data.size + 1, s):
        if realtime:
            due = t_start + end / fs
            delay = due - clock()
            if delay > 0:
                time.sleep(delay)
        t0 = clock()
        row = window_features(data[end - w : end], model.mcd)
        labels, frac = majority_vote(tree_votes(model, row[None, :]), model.tie)
        elapsed = clock() - t0
        d = StreamDecision(end / fs, int(labels[0]), float(frac[0]), max(0.0, elapsed))
        decisions.append(d)
        if on_decision is not None:
            on_decision(d)
    return StreamReport(decisions, model.windowing.window_s, model.windowing.step_s)
