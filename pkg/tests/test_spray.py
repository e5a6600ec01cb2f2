import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weedspray.geometry import CROP, WEED, BoundingBox, ImageRecord, Interval, union_length
from weedspray.spray import (
    NozzleConfig,
    SprayPlan,
    area_sprayed,
    build_spray_plan,
    is_sprayed,
    make_stripes,
    spray_sweep,
    weed_coverage_rate,
)
from weedspray.synth import FieldParams, NoiseParams, generate_field, perturb_detections, raster_oracle, with_perfect_detections


def weed(x0, y0, x1, y1, conf=None):
    return BoundingBox(x0, y0, x1, y1, WEED, conf)


def image(gts=(), dets=(), w=100, h=100, image_id="a"):
    return ImageRecord(image_id, w, h, tuple(gts), tuple(dets))


def test_make_stripes():
    assert [(s.y_lo, s.y_hi) for s in make_stripes(180, 3)] == [(0, 60), (60, 120), (120, 180)]
    assert [(s.y_lo, s.y_hi) for s in make_stripes(100, 1)] == [(0, 100)]
    bounds = make_stripes(100, 3)
    assert bounds[0].y_hi == pytest.approx(100 / 3)
    assert bounds[1].y_hi == pytest.approx(200 / 3)
    assert bounds[2].y_hi == 100
    with pytest.raises(ValueError):
        make_stripes(100, 0)


def test_plan_without_weeds():
    plan = build_spray_plan(image(dets=[BoundingBox(0, 0, 50, 50, CROP, 0.9)]), NozzleConfig(4))
    assert plan.sprayed_area == 0
    assert all(ivs == () for ivs in plan.intervals)


def test_plan_single_stripe():
    im = image(dets=[weed(10, 5, 50, 15, 0.9)])
    cfg = NozzleConfig(4, 0)
    plan = build_spray_plan(im, cfg)
    assert plan.intervals[0] == (Interval(10, 50),)
    assert plan.intervals[1:] == ((), (), ())
    assert plan.sprayed_area == 1000
    assert raster_oracle(im, cfg)[0] == 1000


def test_plan_box_straddling_boundary_sprays_two_stripes():
    im = image(dets=[weed(60, 45, 80, 55, 0.9)])
    plan = build_spray_plan(im, NozzleConfig(4))
    assert [len(ivs) for ivs in plan.intervals] == [0, 1, 1, 0]
    assert plan.sprayed_area == 2 * 25 * 20


def test_touching_stripe_boundary_does_not_trigger():
    im = image(dets=[weed(10, 25, 20, 40, 0.9)])
    plan = build_spray_plan(im, NozzleConfig(4))
    assert [len(ivs) for ivs in plan.intervals] == [0, 1, 0, 0]


def test_margin_clipped_to_image():
    plan = build_spray_plan(image(dets=[weed(2, 0, 95, 10, 0.9)]), NozzleConfig(1, margin=10))
    assert plan.intervals[0] == (Interval(0, 100),)


def test_overlapping_sprays_not_double_counted():
    im = image(dets=[weed(0, 0, 30, 10, 0.9), weed(20, 0, 50, 10, 0.8)])
    plan = build_spray_plan(im, NozzleConfig(2))
    assert plan.intervals[0] == (Interval(0, 50),)
    assert plan.sprayed_area == 50 * 50


def test_plan_area_invariant():
    im = perturb_detections(generate_field(FieldParams(image_count=1, seed=4)), NoiseParams(jitter=3, seed=1)).images[0]
    plan = build_spray_plan(im, NozzleConfig(3, 5))
    expected = sum(s.height * union_length(ivs) for s, ivs in zip(plan.stripes, plan.intervals))
    assert plan.sprayed_area == pytest.approx(expected)
    assert all(0 <= iv.lo and iv.hi <= im.width for ivs in plan.intervals for iv in ivs)


def test_is_sprayed_self():
    b = weed(10, 5, 50, 15)
    plan = build_spray_plan(image([b], [weed(10, 5, 50, 15, 0.9)]), NozzleConfig(4))
    assert is_sprayed(b, plan)


def test_is_sprayed_fails_in_empty_stripe():
    g = weed(10, 20, 50, 30)  # reaches into stripe 1 ([25, 50])
    im = image([g], [weed(10, 5, 50, 20, 0.9)])
    cfg = NozzleConfig(4)
    assert not is_sprayed(g, build_spray_plan(im, cfg))
    assert raster_oracle(im, cfg)[1] == [False]


def test_is_sprayed_empty_plan():
    plan = build_spray_plan(image(), NozzleConfig(2))
    assert not is_sprayed(weed(0, 0, 10, 10), plan)


def test_is_sprayed_across_merged_intervals():
    g = weed(10, 0, 40, 10)
    im = image([g], [weed(0, 0, 25, 10, 0.9), weed(25, 0, 45, 10, 0.9)])
    assert is_sprayed(g, build_spray_plan(im, NozzleConfig(1)))


def test_undetected_weed_hit_by_neighbour_spray():
    # a missed weed inside another detection's stripe and x-span is still sprayed
    missed = weed(30, 60, 40, 70)
    im = image([weed(20, 10, 50, 20), missed], [weed(20, 10, 50, 20, 0.9)])
    assert is_sprayed(missed, build_spray_plan(im, NozzleConfig(1)))
    assert not is_sprayed(missed, build_spray_plan(im, NozzleConfig(2)))


def test_wcr_examples():
    gts = [weed(0, 0, 10, 10), weed(40, 40, 50, 50), weed(80, 0, 90, 10), weed(0, 80, 10, 90)]
    dets = [weed(*g.corners, 0.9) for g in gts[:2]]
    im = image(gts, dets)
    # the undetected pair sits outside every sprayed x-span / stripe
    plans = [build_spray_plan(im, NozzleConfig(4))]
    assert weed_coverage_rate([im], plans) == 50.0
    perfect = image(gts, [weed(*g.corners, 0.9) for g in gts])
    assert weed_coverage_rate([perfect], [build_spray_plan(perfect, NozzleConfig(3, 7))]) == 100.0
    none = image(gts)
    assert weed_coverage_rate([none], [build_spray_plan(none, NozzleConfig(1))]) == 0.0


def test_wcr_undefined_without_weeds():
    im = image([BoundingBox(0, 0, 5, 5, CROP)])
    with pytest.raises(ValueError):
        weed_coverage_rate([im], [build_spray_plan(im, NozzleConfig(1))])


def test_area_sprayed_examples():
    empty = image([weed(0, 0, 5, 5)])
    assert area_sprayed([build_spray_plan(empty, NozzleConfig(1))], [empty]) == 0.0
    full = image(dets=[weed(0, 0, 100, 100, 0.9)])
    assert area_sprayed([build_spray_plan(full, NozzleConfig(1))], [full]) == 100.0
    half = image(dets=[weed(20, 0, 60, 50, 0.9)])
    cfg = NozzleConfig(2)
    assert raster_oracle(half, cfg)[0] == 2000
    assert area_sprayed([build_spray_plan(half, cfg)], [half]) == 20.0


def test_area_sprayed_pools_images():
    a = image(dets=[weed(0, 0, 100, 100, 0.9)], image_id="a")
    b = image(image_id="b")
    plans = [build_spray_plan(im, NozzleConfig(1)) for im in (a, b)]
    assert area_sprayed(plans, [a, b]) == 50.0


def test_mismatched_plans_rejected():
    a, b = image(image_id="a"), image(image_id="b")
    with pytest.raises(ValueError):
        area_sprayed([build_spray_plan(b, NozzleConfig(1))], [a])


def test_sweep_perfect_and_empty():
    d = generate_field(FieldParams(image_count=5, seed=9))
    rows = spray_sweep(list(with_perfect_detections(d, 0.8).images), [4, 1, 3, 2])
    assert [r.nozzle_count for r in rows] == [1, 2, 3, 4]
    assert all(r.weed_coverage_rate == 100.0 for r in rows)
    rows = spray_sweep(list(d.images), [1, 2, 3, 4])
    assert all((r.weed_coverage_rate, r.area_sprayed, r.herbicide_saving) == (0.0, 0.0, 100.0) for r in rows)


def test_sweep_refinement_example():
    d = perturb_detections(generate_field(FieldParams(image_count=8, seed=2)), NoiseParams(0.1, 0.5, 3, seed=3))
    rows = {r.nozzle_count: r for r in spray_sweep(list(d.images), [1, 2])}
    assert rows[2].area_sprayed <= rows[1].area_sprayed
    for r in rows.values():
        assert r.herbicide_saving == 100.0 - r.area_sprayed
        assert 0.0 <= r.weed_coverage_rate <= 100.0


def test_sweep_requires_counts():
    with pytest.raises(ValueError):
        spray_sweep([], [])


def test_nozzle_config_validation():
    with pytest.raises(ValueError):
        NozzleConfig(0)
    with pytest.raises(ValueError):
        NozzleConfig(1, margin=-1)


def test_containment_tolerates_rescale_roundoff():
    g = weed(9.9999999999999, 0, 20.0000000000001, 10)
    plan = SprayPlan("a", tuple(make_stripes(100, 1)), ((Interval(10, 20),),), 1000.0)
    assert is_sprayed(g, plan)


# -- properties on synthetic fields ----------------------------------------------------

fields = st.builds(
    lambda seed, noise_seed, miss, jitter: perturb_detections(
        generate_field(FieldParams(image_count=3, width=96, height=48, box_size_range=(4, 30), seed=seed)),
        NoiseParams(miss, 0.5, jitter, "uniform", noise_seed),
    ),
    st.integers(0, 10_000),
    st.integers(0, 10_000),
    st.sampled_from([0.0, 0.2, 0.5]),
    st.integers(0, 5),
)


@settings(max_examples=40, deadline=None)
@given(fields, st.sampled_from([1, 2, 3, 4, 6, 8]), st.integers(0, 10))
def test_analytic_equals_raster(d, n, margin):
    cfg = NozzleConfig(n, margin)
    for im in d.images:
        plan = build_spray_plan(im, cfg)
        area, flags = raster_oracle(im, cfg)
        assert plan.sprayed_area == area
        assert [is_sprayed(g, plan) for g in im.ground_truth if g.class_id == WEED] == flags


@settings(max_examples=30, deadline=None)
@given(fields, st.sampled_from([1, 2, 3, 4, 6]), st.integers(0, 8), st.integers(1, 8))
def test_margin_monotonicity(d, n, margin, extra):
    for im in d.images:
        small = build_spray_plan(im, NozzleConfig(n, margin))
        large = build_spray_plan(im, NozzleConfig(n, margin + extra))
        assert large.sprayed_area >= small.sprayed_area
        for g in im.ground_truth:
            if g.class_id == WEED and is_sprayed(g, small):
                assert is_sprayed(g, large)


@settings(max_examples=30, deadline=None)
@given(fields, st.sampled_from([1, 2, 3, 6]), st.integers(0, 8))
def test_doubling_nozzles_never_adds_area(d, n, margin):
    for im in d.images:
        coarse = build_spray_plan(im, NozzleConfig(n, margin))
        fine = build_spray_plan(im, NozzleConfig(2 * n, margin))
        assert fine.sprayed_area <= coarse.sprayed_area


def test_n_to_n_plus_one_is_not_monotone():
    # y in [15, 25]: one 30-row stripe for n=2, two 20-row stripes for n=3
    im = image(dets=[weed(0, 15, 10, 25, 0.9)], h=60)
    two = build_spray_plan(im, NozzleConfig(2))
    three = build_spray_plan(im, NozzleConfig(3))
    assert three.sprayed_area > two.sprayed_area


@settings(max_examples=30, deadline=None)
@given(fields, st.sampled_from([1, 2, 4]), st.integers(0, 10))
def test_perfect_detection_totality(d, n, margin):
    d = with_perfect_detections(d, 0.5)
    cfg = NozzleConfig(n, margin)
    for im in d.images:
        plan = build_spray_plan(im, cfg)
        assert all(is_sprayed(g, plan) for g in im.ground_truth if g.class_id == WEED)
