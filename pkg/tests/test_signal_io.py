import numpy as np
import pytest
from hypothesis import given, settings, HealthCheck
from hypothesis import strategies as st

from fatigue_eeg.signal_io import (
    Recording,
    RecordingError,
    SynthSpec,
    channel,
    generate_synthetic,
    load_recording_csv,
    read_labels_csv,
    write_labels_csv,
    write_recording_csv,
)


def write(tmp_path, text, name="rec.csv"):
    p = tmp_path / name
    p.write_bytes(text.encode("utf-8"))
    return p


def test_load_two_channels(tmp_path):
    rec = load_recording_csv(write(tmp_path, "A,B\n1,2\n3,4\n"), 1000)
    assert rec.channel_names == ("A", "B")
    np.testing.assert_array_equal(rec.samples, [[1, 3], [2, 4]])
    assert rec.sample_rate_hz == 1000.0


def test_load_single_channel_zeros_crlf(tmp_path):
    rec = load_recording_csv(write(tmp_path, "A\r\n0\r\n0\r\n0\r\n"), 250)
    assert rec.samples.shape == (1, 3)
    assert not rec.samples.any()


@pytest.mark.parametrize(
    "text, fragments",
    [
        ("A,B\n1,x\n", ["row 1", "column B", "non-numeric"]),
        ("A,B\n1,2\n3\n", ["ragged row 2"]),
        ("A,A\n1,2\n3,4\n", ["duplicate channel name 'A'"]),
        ("A\n1\n", ["at least 2 data rows"]),
        ("A,B\n1,2\nnan,4\n", ["non-finite", "row 2", "column A"]),
    ],
)
def test_load_diagnostics(tmp_path, text, fragments):
    with pytest.raises(RecordingError) as err:
        load_recording_csv(write(tmp_path, text), 1000)
    for frag in fragments:
        assert frag in str(err.value)


def test_missing_file(tmp_path):
    with pytest.raises(RecordingError, match="no such file"):
        load_recording_csv(tmp_path / "nope.csv", 1000)


@settings(max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    st.integers(1, 4).flatmap(
        lambda m: st.lists(
            st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=m, max_size=m),
            min_size=2,
            max_size=20,
        )
    )
)
def test_csv_round_trip(tmp_path, rows):
    arr = np.array(rows).T
    rec = Recording(tuple(f"C{i}" for i in range(arr.shape[0])), arr, 512.0)
    path = tmp_path / "rt.csv"
    write_recording_csv(rec, path)
    back = load_recording_csv(path, 512.0)
    assert back.channel_names == rec.channel_names
    np.testing.assert_array_equal(back.samples, rec.samples)


def test_recording_is_immutable():
    rec = Recording(("A",), [[1.0, 2.0]], 100)
    with pytest.raises(ValueError):
        rec.samples[0, 0] = 5.0


def test_channel_selection():
    rec = Recording(("A", "B"), [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], 100)
    view = channel(rec, "B")
    np.testing.assert_array_equal(view.data, [4, 5, 6])
    assert len(view) == rec.n_samples and view.sample_rate_hz == rec.sample_rate_hz
    only = Recording(("A",), [[1.0, 2.0]], 100)
    np.testing.assert_array_equal(channel(only, "A").data, [1, 2])
    with pytest.raises(RecordingError, match="available: A"):
        channel(only, "TP7")


def test_synthetic_counts_and_labels():
    out = generate_synthetic(SynthSpec(n_subjects=1, duration_s=3.0))
    assert [lab for _, lab in out] == [0, 1]
    assert all(rec.n_samples == 3000 for rec, _ in out)


def test_synthetic_determinism():
    a = generate_synthetic(SynthSpec(n_subjects=2, duration_s=2.0, seed=5))
    b = generate_synthetic(SynthSpec(n_subjects=2, duration_s=2.0, seed=5))
    c = generate_synthetic(SynthSpec(n_subjects=2, duration_s=2.0, seed=6))
    for (ra, _), (rb, _), (rc, _) in zip(a, b, c):
        assert ra.samples.tobytes() == rb.samples.tobytes()
        assert not np.array_equal(ra.samples, rc.samples)


def test_synthetic_alert_std_law_of_large_numbers():
    rec, label = generate_synthetic(SynthSpec(n_subjects=1))[0]
    assert label == 0
    assert 9.5 <= rec.samples.std(ddof=1) <= 10.5


def test_synthetic_spikes():
    spec = SynthSpec(n_subjects=1, duration_s=10.0, fatigue_outlier_rate=0.02)
    rec, label = generate_synthetic(spec)[1]
    assert label == 1
    spikes = np.abs(rec.samples[0]) == 400.0
    assert spikes.sum() == 200


@pytest.mark.parametrize(
    "kwargs",
    [dict(alert_std_uv=40.0, fatigue_std_uv=10.0), dict(fatigue_outlier_rate=1.0), dict(n_subjects=0)],
)
def test_synth_spec_invariants(kwargs):
    with pytest.raises(ValueError):
        SynthSpec(**kwargs)


def test_labels_manifest_round_trip(tmp_path):
    write_labels_csv(tmp_path / "labels.csv", [("a.csv", 0), ("sub/b.csv", 1)])
    entries = read_labels_csv(tmp_path / "labels.csv")
    assert entries == [(str(tmp_path / "a.csv"), 0), (str(tmp_path / "sub" / "b.csv"), 1)]


def test_labels_manifest_bad_label(tmp_path):
    (tmp_path / "labels.csv").write_text("recording,label\na.csv,2\n")
    with pytest.raises(RecordingError, match="row 1, column label"):
        read_labels_csv(tmp_path / "labels.csv")
