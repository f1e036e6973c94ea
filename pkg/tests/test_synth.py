import csv

import numpy as np
import pytest

from clstm_bearing.errors import BadConfigError, BadPositionError, NonPositiveRpmError
from clstm_bearing.labels import CLASS_NAMES, FaultLabel
from clstm_bearing.synth import (
    RATE_MULTIPLIERS, Split, SynthConfig, assign_splits, build_dataset, dataset_from_clips,
    default_class_rates, gen_clip, load_dataset, read_manifest, split_counts, write_corpus,
)
from clstm_bearing.audio_io import AudioClip

from conftest import DESK


def count_envelope_peaks(x, sr, min_gap_s):
    """Rising crossings of half the peak envelope, separated by at least ``min_gap_s``."""
    w = max(1, int(sr * 1e-3))
    env = np.convolve(np.abs(x), np.ones(w) / w, mode="same")
    above = env > 0.5 * env.max()
    onsets = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    count, last = 0, -np.inf
    for i in onsets:
        if (i - last) / sr >= min_gap_s:
            count += 1
            last = i
    return count


def test_labels():
    assert [int(l) for l in FaultLabel] == [0, 1, 2, 3, 4]
    assert CLASS_NAMES == ("Normal", "DriveInnerSpall", "NonDriveInnerSpall",
                           "DriveOuterSpall", "NonDriveOuterSpall")
    for name in CLASS_NAMES:
        assert FaultLabel.from_name(name).display == name


def test_default_rates():
    rates = default_class_rates(2000)
    assert rates[FaultLabel.NORMAL] == 0.0
    assert rates[FaultLabel.DRIVE_INNER_SPALL] == pytest.approx(180.0, abs=1e-9)
    assert rates[FaultLabel.NON_DRIVE_OUTER_SPALL] == pytest.approx(3.1 * 2000 / 60)
    assert RATE_MULTIPLIERS[FaultLabel.NON_DRIVE_INNER_SPALL] == 4.9
    for rpm in (1.0, 733.3, 2000.0, 12000.0):
        assert len(set(default_class_rates(rpm).values())) == 5
    with pytest.raises(NonPositiveRpmError):
        default_class_rates(0)


def test_config_invariants():
    with pytest.raises(NonPositiveRpmError):
        SynthConfig(rpm=-1)
    with pytest.raises(BadConfigError):
        SynthConfig(clip_seconds=0)
    with pytest.raises(BadConfigError):
        SynthConfig(noise_rms=-0.1)
    with pytest.raises(BadConfigError):
        SynthConfig(impulse_rate_hz={FaultLabel.NORMAL: 5.0})
    cfg = SynthConfig()
    assert cfg.distances_m == pytest.approx((0.5, 0.75, 1.0, 1.25, 1.5))
    assert cfg.n_samples == 1_920_000


def test_normal_is_noise_only():
    cfg = SynthConfig(clip_seconds=1.0)
    x = gen_clip(FaultLabel.NORMAL, 0, cfg).samples
    assert np.max(np.abs(x)) == pytest.approx(0.9)
    # Gaussian noise: kurtosis near 3, no impulsive structure
    z = x / x.std()
    assert abs(np.mean(z ** 4) - 3.0) < 0.2
    assert abs(np.mean(x)) < 0.01


def test_faulty_clip_is_impulsive():
    x = gen_clip(FaultLabel.DRIVE_OUTER_SPALL, 0, SynthConfig(clip_seconds=1.0)).samples
    z = x / x.std()
    assert np.mean(z ** 4) > 4.0


def test_deterministic():
    cfg = SynthConfig(clip_seconds=0.5)
    a = gen_clip(FaultLabel.DRIVE_INNER_SPALL, 2, cfg).samples
    b = gen_clip(FaultLabel.DRIVE_INNER_SPALL, 2, cfg).samples
    assert np.array_equal(a, b)
    c = gen_clip(FaultLabel.DRIVE_INNER_SPALL, 2, SynthConfig(clip_seconds=0.5, rng_seed=1)).samples
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("label", [l for l in FaultLabel if l != FaultLabel.NORMAL])
@pytest.mark.parametrize("pos", [0, 4])
def test_envelope_peak_rate(label, pos):
    cfg = SynthConfig(clip_seconds=2.0)
    x = gen_clip(label, pos, cfg).samples
    rate = cfg.impulse_rate_hz[label]
    peaks = count_envelope_peaks(x, cfg.sample_rate_hz, 0.6 / rate)
    assert abs(peaks / cfg.clip_seconds - rate) <= 0.05 * rate


def test_bad_position():
    with pytest.raises(BadPositionError):
        gen_clip(FaultLabel.NORMAL, 5, SynthConfig(clip_seconds=0.1))


@pytest.mark.parametrize("n, expected", [(400, (320, 40, 40)), (10, (8, 1, 1)), (80, (64, 8, 8)),
                                         (5, (4, 1, 0)), (1, (1, 0, 0)), (0, (0, 0, 0))])
def test_split_counts(n, expected):
    assert split_counts(n) == expected


def test_split_assignment_stable_and_seeded():
    a = assign_splits("Normal_0", 400, 3)
    assert np.array_equal(a, assign_splits("Normal_0", 400, 3))
    assert not np.array_equal(a, assign_splits("Normal_0", 400, 4))
    assert not np.array_equal(a, assign_splits("Normal_1", 400, 3))
    assert [int(np.sum(a == s)) for s in Split] == [320, 40, 40]


def test_dataset_structure(desk_data, desk_cfg):
    d = desk_data
    frames = int(desk_cfg.clip_seconds * 10)
    assert len(d) == 10 * frames
    assert d.x.shape == (len(d), 1, 2, 480)
    assert d.clip_count == 10
    tr, va, te = split_counts(frames)
    assert d.counts() == {"train": 10 * tr, "val": 10 * va, "test": 10 * te}
    for src in set(d.source_ids):
        mask = np.array([s == src for s in d.source_ids])
        codes = d.split[mask]
        assert [int(np.sum(codes == s)) for s in Split] == [tr, va, te]
        assert sorted(d.frame_index[mask]) == list(range(frames))
    for s in Split:
        assert set(d.labels[d.split == s]) == set(range(5))


def test_stats_from_train_only(desk_cfg):
    from clstm_bearing.synth import iter_clips
    from clstm_bearing.features import compute_standardization
    from clstm_bearing.audio_io import frame_array

    d = build_dataset(desk_cfg, frame_len=480, split_seed=0)
    rows = []
    for clip in iter_clips(desk_cfg):
        codes = assign_splits(clip.source_id, int(desk_cfg.clip_seconds * 10), 0)
        rows.append(frame_array(clip.samples, 480)[codes == Split.TRAIN])
    ref = compute_standardization(np.concatenate(rows))
    for got, want in zip(d.stats.as_array(), ref.as_array()):
        assert got == pytest.approx(want, rel=1e-12)
    train_time = d.x[d.split == Split.TRAIN][:, 0, 0]
    assert abs(train_time.mean()) < 1e-12
    assert train_time.std() == pytest.approx(1.0, rel=1e-9)


def test_sequence_units(desk_cfg):
    d = build_dataset(desk_cfg, frame_len=480, split_seed=0, seq_len=4)
    assert d.x.shape[1:] == (4, 2, 480)
    assert len(d) == 10 * (20 // 4)
    assert set(d.frame_index) == {0, 4, 8, 12, 16}


def test_class_spectral_separability(desk_data):
    d = desk_data
    means = [d.x[d.labels == c][:, 0, 1].mean(axis=0) for c in range(5)]
    for i in range(5):
        for j in range(i + 1, 5):
            assert np.linalg.norm(means[i] - means[j]) > 0.1


def test_unlabeled_clip_rejected():
    with pytest.raises(BadConfigError):
        dataset_from_clips([AudioClip(np.zeros(960), 4800, "u")], 480, 0)


def test_corpus_round_trip(tmp_path):
    cfg = SynthConfig(clip_seconds=0.5, positions=2, **DESK)
    path = write_corpus(cfg, tmp_path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["filename", "label_code", "position_index", "distance_m"]
    assert len(rows) == 11
    assert rows[1][0] == "Normal_0.wav"
    assert sorted(p.name for p in tmp_path.glob("*.wav")) == sorted(r[0] for r in rows[1:])
    man = read_manifest(tmp_path)
    assert man[3]["label"] is FaultLabel.DRIVE_INNER_SPALL
    assert man[3]["distance_m"] == 1.5
    on_disk = load_dataset(tmp_path, 480, 0)
    in_mem = build_dataset(cfg, 480, 0)
    # WAV quantization moves features by at most a few LSBs
    assert np.max(np.abs(on_disk.x - in_mem.x)) < 1e-2
    assert np.array_equal(on_disk.split, in_mem.split)
