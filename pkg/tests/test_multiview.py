import numpy as np
import pytest
from scipy import ndimage

from app.core.error_handlers import InvalidParameterError
from app.schemas.training import SynthConfig
from app.services.pipeline.alignment import align_plate
from app.services.pipeline.multiview import ViewStrategy, fuse_views, rank_views, view_pairs
from app.services.synthgen import Layout, make_dataset


@pytest.fixture
def clean_and_blurred(single_row_plate):
    clean = align_plate(single_row_plate.image, Layout.SINGLE_ROW).image
    return clean, ndimage.gaussian_filter(clean, sigma=1.5)


def test_identical_views_fuse_to_themselves(clean_and_blurred):
    clean, _ = clean_and_blurred
    np.testing.assert_allclose(fuse_views([clean, clean.copy()]), clean)


def test_sharper_view_dominates(clean_and_blurred):
    clean, blurred = clean_and_blurred
    assert rank_views([blurred, clean])[0][0] == 1
    fused = fuse_views([blurred, clean])
    assert np.linalg.norm(fused - clean) < np.linalg.norm(fused - blurred)


def test_strategies(clean_and_blurred):
    clean, blurred = clean_and_blurred
    np.testing.assert_array_equal(fuse_views([blurred, clean], strategy=ViewStrategy.BEST_VIEW), clean)
    np.testing.assert_array_equal(fuse_views([blurred, clean], strategy="first_view"), blurred)
    np.testing.assert_array_equal(fuse_views([blurred]), blurred)


def test_three_views_are_deterministic(clean_and_blurred, rng):
    clean, blurred = clean_and_blurred
    noisy = np.clip(clean + rng.normal(0.0, 0.05, clean.shape), 0.0, 1.0)
    first = fuse_views([blurred, noisy, clean])
    second = fuse_views([blurred, noisy, clean])
    np.testing.assert_array_equal(first, second)
    assert first.shape == clean.shape
    assert first.min() >= 0.0 and first.max() <= 1.0


def test_mismatched_sizes_keep_the_primary_extent(clean_and_blurred):
    clean, blurred = clean_and_blurred
    fused = fuse_views([blurred[:, :80], clean])
    assert fused.shape == clean.shape
    np.testing.assert_array_equal(fused[:, 80:], clean[:, 80:])


def test_no_views():
    with pytest.raises(InvalidParameterError):
        fuse_views([])


def test_view_pairs():
    records = make_dataset(SynthConfig(num_scenes=3, views_per_scene=3), seed=0).records
    pairs = view_pairs(records)
    assert len(pairs) == 3
    assert all(a.shape == b.shape == (32, 96) for a, b in pairs)
    single = make_dataset(SynthConfig(num_scenes=2, views_per_scene=1), seed=0).records
    assert view_pairs(single) == []
