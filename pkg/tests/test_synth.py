import pytest

from weedspray.geometry import WEED, BoundingBox, ImageRecord
from weedspray.spray import NozzleConfig
from weedspray.synth import FieldParams, NoiseParams, generate_field, perturb_detections, raster_oracle


def test_generate_deterministic():
    p = FieldParams(image_count=20, seed=42)
    assert generate_field(p) == generate_field(p)
    assert generate_field(p) != generate_field(FieldParams(image_count=20, seed=43))


def test_generate_empty_fields():
    d = generate_field(FieldParams(image_count=5, weeds_per_image=0, crops_per_image=0))
    assert len(d) == 5
    assert all(im.ground_truth == () for im in d.images)


def test_generate_integer_corners_in_bounds():
    d = generate_field(FieldParams(image_count=30, width=120, height=60, box_size_range=(5, 60), seed=7))
    for im in d.images:
        for b in im.ground_truth:
            assert all(v == int(v) for v in b.corners)
            assert 0 <= b.x_min < b.x_max <= 120 and 0 <= b.y_min < b.y_max <= 60
            assert 5 <= b.width <= 60 and 5 <= b.height <= 60


@pytest.mark.parametrize("seed", range(10))
def test_generate_weed_count_near_mean(seed):
    d = generate_field(FieldParams(image_count=100, weeds_per_image=5, seed=seed))
    weeds = sum(g.class_id == WEED for im in d.images for g in im.ground_truth)
    assert 350 <= weeds <= 650


def test_generate_rejects_oversized_boxes():
    with pytest.raises(ValueError):
        FieldParams(width=50, height=20, box_size_range=(5, 30))


def test_identity_noise():
    d = generate_field(FieldParams(image_count=10, seed=1))
    out = perturb_detections(d, NoiseParams())
    for im in out.images:
        assert [b.corners for b in im.detections] == [b.corners for b in im.ground_truth]
        assert [b.class_id for b in im.detections] == [b.class_id for b in im.ground_truth]
        assert all(b.confidence == 1.0 for b in im.detections)


def test_total_miss():
    d = perturb_detections(generate_field(FieldParams(image_count=10, seed=1)), NoiseParams(miss_rate=1.0))
    assert all(im.detections == () for im in d.images)


@pytest.mark.parametrize("seed", range(5))
def test_miss_rate_concentration(seed):
    d = generate_field(FieldParams(image_count=200, weeds_per_image=5, crops_per_image=0, seed=seed))
    n_weeds = sum(len(im.ground_truth) for im in d.images)
    assert n_weeds >= 900
    out = perturb_detections(d, NoiseParams(miss_rate=0.5, seed=seed))
    dropped = n_weeds - sum(len(im.detections) for im in out.images)
    # +-5 standard deviations of Binomial(n, 0.5)
    assert abs(dropped - n_weeds / 2) <= 5 * (n_weeds * 0.25) ** 0.5


def test_perturb_deterministic_and_bounded():
    d = generate_field(FieldParams(image_count=10, seed=5))
    noise = NoiseParams(0.2, 2.0, 4, "uniform", seed=9)
    a, b = perturb_detections(d, noise), perturb_detections(d, noise)
    assert a == b
    for im in a.images:
        for det in im.detections:
            assert 0 <= det.confidence <= 1
            assert all(v == int(v) for v in det.corners)


def test_jitter_bounded():
    d = generate_field(FieldParams(image_count=10, seed=5, box_size_range=(20, 40)))
    out = perturb_detections(d, NoiseParams(jitter=3, seed=2))
    for src, im in zip(d.images, out.images):
        assert len(im.detections) == len(src.ground_truth)
        for g, det in zip(src.ground_truth, im.detections):
            assert max(abs(a - b) for a, b in zip(g.corners, det.corners)) <= 3


def test_raster_empty():
    im = ImageRecord("a", 40, 20, (BoundingBox(0, 0, 5, 5, WEED),))
    assert raster_oracle(im, NozzleConfig(2)) == (0, [False])


def test_raster_full_image():
    im = ImageRecord("a", 40, 20, (), (BoundingBox(0, 0, 40, 20, WEED, 0.9),))
    assert raster_oracle(im, NozzleConfig(1))[0] == 800


def test_raster_reference_fixture():
    im = ImageRecord("a", 100, 100, (), (BoundingBox(10, 5, 50, 15, WEED, 0.9),))
    assert raster_oracle(im, NozzleConfig(4))[0] == 1000


def test_raster_domain_restrictions():
    im = ImageRecord("a", 100, 100, (), (BoundingBox(10.5, 5, 50, 15, WEED, 0.9),))
    with pytest.raises(ValueError):
        raster_oracle(im, NozzleConfig(4))
    with pytest.raises(ValueError):
        raster_oracle(ImageRecord("a", 100, 100), NozzleConfig(3))
    with pytest.raises(ValueError):
        raster_oracle(ImageRecord("a", 100, 100), NozzleConfig(2, margin=0.5))
