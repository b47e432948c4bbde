import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _support import tree_digest, write_rgb_manifest
from lowlight_eqa.color_space import decode_srgb_to_linear
from lowlight_eqa.degradation import (
    LEVELS,
    SynthesisOptions,
    expected_image_count,
    level_to_ev,
    load_manifest,
    pair_seed,
    parse_levels,
    process_dataset,
    synthesize_pair,
    variant_path,
)
from lowlight_eqa.errors import ConfigError, StructuralError
from lowlight_eqa.raw_noise import load_profile

OPTIONS = SynthesisOptions(profile=load_profile())


def image(seed=0, shape=(24, 32, 3)):
    return np.random.default_rng(seed).integers(10, 250, shape, dtype=np.uint8)


@pytest.mark.parametrize("level,ev", [("L0", 0.0), ("L1", 2.0), ("L2", 4.0), ("L3", 6.0), ("L4", 7.5), ("L5", 9.0)])
def test_level_mapping(level, ev):
    assert level_to_ev(level) == ev


def test_parse_levels():
    assert parse_levels("L1,L5") == ["L1", "L5"]
    assert parse_levels("L1..L5") == ["L1", "L2", "L3", "L4", "L5"]
    assert parse_levels("L1-L3") == ["L1", "L2", "L3"]
    assert parse_levels([5, "l2"]) == ["L2", "L5"]
    with pytest.raises(ConfigError):
        parse_levels("L6")
    with pytest.raises(ConfigError):
        parse_levels("L4..L2")


def test_seed_depends_on_every_part():
    base = pair_seed(7, "s", "f", "L3")
    assert base == pair_seed(7, "s", "f", 3)
    assert len({base, pair_seed(8, "s", "f", "L3"), pair_seed(7, "t", "f", "L3"), pair_seed(7, "s", "g", "L3"), pair_seed(7, "s", "f", "L4")}) == 5


def test_l0_returns_copies():
    img = image()
    pair = synthesize_pair(img, "L0", 1, "s/f", OPTIONS)
    assert np.array_equal(pair.noise_free, img) and np.array_equal(pair.noisy, img)
    assert pair.noise_free is not img


@pytest.mark.parametrize("level", LEVELS[1:])
def test_noise_free_mean_scales(level):
    img = image(1)
    pair = synthesize_pair(img, level, 3, ("s", "f"), OPTIONS)
    ratio = decode_srgb_to_linear(pair.noise_free).mean() / decode_srgb_to_linear(img).mean()
    assert ratio == pytest.approx(2.0 ** -level_to_ev(level), rel=0.01)
    assert pair.noisy.dtype == np.uint8 and pair.noisy.shape == img.shape
    assert pair.provenance["delta_ev"] == level_to_ev(level)


def test_pair_is_deterministic():
    a = synthesize_pair(image(2), "L3", 11, "s/f", OPTIONS)
    b = synthesize_pair(image(2), "L3", 11, "s/f", OPTIONS)
    assert a.noisy.tobytes() == b.noisy.tobytes()
    assert a.provenance == b.provenance
    c = synthesize_pair(image(2), "L3", 12, "s/f", OPTIONS)
    assert c.noisy.tobytes() != a.noisy.tobytes()


def test_noisy_is_darker_at_deeper_levels():
    img = image(3)
    means = [synthesize_pair(img, lv, 0, "s/f", OPTIONS).noisy.astype(float).mean() for lv in LEVELS[1:]]
    assert means[0] > means[-1]


@given(arrays(np.uint8, (4, 4, 3), elements=st.integers(0, 255)).filter(lambda a: a.any()))
def test_ladder_monotone(img):
    means = [decode_srgb_to_linear(synthesize_pair(img, lv, 0, "s/f", OPTIONS).noise_free).mean() for lv in LEVELS[1:]]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_full_scale_count():
    assert expected_image_count(3911, LEVELS[1:]) == 39_110


def test_process_dataset_counts_and_layout(tmp_path):
    manifest = load_manifest(write_rgb_manifest(tmp_path, scenes=2, frames=3))
    report = process_dataset(manifest, ["L1", "L5"], tmp_path / "out", 7, OPTIONS)
    assert report.images_written == 24 == expected_image_count(6, ["L1", "L5"])
    assert report.failures == []
    png = variant_path(tmp_path / "out", "scene1", "0002", "L5", "noisy")
    sidecar = json.loads(png.with_suffix(".json").read_text())
    assert png.exists() and sidecar["level"] == "L5" and sidecar["variant"] == "noisy"
    assert sidecar["seed"] == pair_seed(7, "scene1", "0002", "L5")
    assert len(list((tmp_path / "out").rglob("*.png"))) == 24


def test_process_dataset_reproducible_across_jobs(tmp_path):
    manifest = load_manifest(write_rgb_manifest(tmp_path, scenes=2, frames=2))
    process_dataset(manifest, ["L2", "L4"], tmp_path / "a", 5, OPTIONS, jobs=1)
    process_dataset(manifest, ["L2", "L4"], tmp_path / "b", 5, OPTIONS, jobs=1)
    process_dataset(manifest, ["L2", "L4"], tmp_path / "c", 5, OPTIONS, jobs=3)
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b") == tree_digest(tmp_path / "c")


def test_bad_frame_recorded_and_run_continues(tmp_path):
    path = write_rgb_manifest(tmp_path, scenes=1, frames=2)
    manifest = load_manifest(path)
    manifest.frames[0].rgb.write_bytes(b"not a png")
    report = process_dataset(manifest, ["L1"], tmp_path / "out", 0, OPTIONS)
    assert len(report.failures) == 1 and report.failures[0]["frame"] == "0000"
    assert report.images_written == 2


def test_unwritable_out_dir_aborts(tmp_path):
    manifest = load_manifest(write_rgb_manifest(tmp_path, scenes=1, frames=1))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        process_dataset(manifest, ["L1"], blocker / "out", 0, OPTIONS)


def test_manifest_validation(tmp_path):
    (tmp_path / "a.png").write_bytes(b"")
    m = tmp_path / "m.jsonl"
    m.write_text('{"scene": "s", "frame": "1", "rgb": "a.png"}\n{"scene": "s", "frame": "1", "rgb": "a.png"}\n')
    with pytest.raises(StructuralError, match="duplicate"):
        load_manifest(m)
    m.write_text('{"scene": "s", "frame": "1", "rgb": "missing.png"}\n')
    with pytest.raises(StructuralError, match="not found"):
        load_manifest(m)
    m.write_text('{"scene": "s", "frame": "1", "rgb": "a.png"}\n')
    with pytest.raises(StructuralError, match="depth"):
        load_manifest(m, require=("rgb", "depth"))
    manifest = load_manifest(m)
    assert manifest.frames[0].rgb == tmp_path / "a.png" and manifest.scenes == ["s"]
