import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import core_gauge as cg
from core_gauge.errors import UsageError
from core_gauge.geometry import max_consecutive_gap


# -- independent per-point reference implementation ---------------------------


def brute_stats(points, delta):
    """Direct region-membership scan, one point at a time."""
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    delta_pair = min(delta, 0.5)

    def gap(values, lo, hi):
        vals = sorted(values)
        if not vals:
            return hi - lo
        best = max(vals[0] - lo, hi - vals[-1])
        for a, b in zip(vals, vals[1:]):
            best = max(best, b - a)
        return best

    dominant = {k: [] for k in range(d)}
    slab = {k: [] for k in range(d)}
    pair = {(k1, k2): [] for k1 in range(d) for k2 in range(d) if k1 != k2}
    relaxed = {key: 0 for key in pair}
    for x in points:
        for k in range(d):
            if all(x[k] >= x[k3] for k3 in range(d) if k3 != k):
                dominant[k].append(x[k])
            if all(x[k3] <= delta for k3 in range(d) if k3 != k):
                slab[k].append(x[k])
        for k1, k2 in pair:
            rest_ok = all(x[k1] >= x[k3] for k3 in range(d) if k3 not in (k1, k2))
            if rest_ok and x[k1] >= delta_pair:
                pair[(k1, k2)].append(x[k1] - x[k2])
            if rest_ok and x[k1] >= x[k2] - delta:
                relaxed[(k1, k2)] += 1

    return (
        {k: gap(dominant[k], 0.0, 1.0) for k in range(d)},
        {key: gap(vals, -1.0 + delta_pair, 1.0) for key, vals in pair.items()},
        {k: gap(slab[k], 0.0, 1.0) for k in range(d)},
        relaxed,
    )


def assert_matches_brute(points, delta):
    cloud = cg.PointCloud(points)
    stats = cg.region_statistics(cloud, delta)
    dom, pair, slab, relaxed = brute_stats(points, delta)
    for k in range(cloud.dim):
        assert stats.dominant_gap[k] == dom[k]
        assert stats.slab_gap[k] == slab[k]
    for (k1, k2), value in pair.items():
        assert stats.pair_diff_gap[k1, k2] == value
        assert stats.relaxed_dominant_count[k1, k2] == relaxed[(k1, k2)]


# -- pinned examples -----------------------------------------------------------


def test_one_dimensional_gap_example():
    stats = cg.region_statistics(cg.PointCloud(np.array([[0.3], [0.4], [0.8]])), 0.5)
    assert stats.dominant_gap[0] == pytest.approx(0.4, abs=1e-15)


def test_empty_cloud_convention():
    stats = cg.region_statistics(cg.PointCloud(np.zeros((0, 2))), 0.25)
    assert np.all(stats.dominant_gap == 1.0)
    assert np.all(stats.slab_gap == 1.0)
    assert stats.pair_diff_gap[0, 1] == 2.0 - 0.25
    assert np.all(stats.relaxed_dominant_count[~np.eye(2, dtype=bool)] == 0)


def test_two_point_dominant_region_example():
    pts = np.array([[0.9, 0.2], [0.5, 0.7]])
    stats = cg.region_statistics(cg.PointCloud(pts), 0.1)
    # Only (0.9, 0.2) has its first coordinate on top, so the projected
    # values are {0.9} and the largest gap is 0.9.
    assert stats.dominant_gap[0] == pytest.approx(0.9, abs=1e-15)
    assert stats.dominant_gap[1] == pytest.approx(0.7, abs=1e-15)
    assert_matches_brute(pts, 0.1)


def test_boundary_points_are_included():
    pts = np.array([[0.5, 0.5], [0.25, 0.1]])
    stats = cg.region_statistics(cg.PointCloud(pts), 0.25)
    # The tied point belongs to both dominant regions, and a point with
    # coordinate exactly delta stays in the pair region.
    assert stats.dominant_gap[0] == 0.5
    assert stats.dominant_gap[1] == 0.5
    assert stats.pair_diff_gap[0, 1] == pytest.approx(1.0 - 0.15, abs=1e-15)


def test_slab_at_full_width_sees_every_point(rng):
    pts = rng.random((40, 3))
    stats = cg.region_statistics(cg.PointCloud(pts), 1.0)
    for k in range(3):
        assert stats.slab_gap[k] == max_consecutive_gap(pts[:, k], 0.0, 1.0)


def test_delta_domain():
    cloud = cg.PointCloud(np.array([[0.5]]))
    with pytest.raises(UsageError):
        cg.region_statistics(cloud, 0.0)
    with pytest.raises(UsageError):
        cg.region_statistics(cloud, 1.5)


def test_cloud_rejects_points_outside_cube():
    with pytest.raises(UsageError):
        cg.PointCloud(np.array([[1.2, 0.0]]))


# -- randomized equivalence and properties --------------------------------------


def test_brute_force_equivalence_random(rng):
    for _ in range(120):
        n = int(rng.integers(0, 51))
        d = int(rng.integers(1, 4))
        delta = float(rng.uniform(0.02, 1.0))
        assert_matches_brute(rng.random((n, d)), delta)


@settings(max_examples=120, deadline=None)
@given(
    data=st.data(),
    n=st.integers(min_value=0, max_value=24),
    d=st.integers(min_value=1, max_value=3),
)
def test_brute_force_equivalence_hypothesis(data, n, d):
    coords = data.draw(
        st.lists(
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
            min_size=n * d,
            max_size=n * d,
        )
    )
    delta = data.draw(st.floats(min_value=0.01, max_value=1.0, allow_nan=False))
    assert_matches_brute(np.array(coords).reshape(n, d), delta)


@settings(max_examples=80, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    n=st.integers(min_value=1, max_value=40),
    d=st.integers(min_value=1, max_value=3),
    delta=st.floats(min_value=0.05, max_value=1.0),
)
def test_adding_a_point_never_widens_gaps(seed, n, d, delta):
    gen = np.random.default_rng(seed)
    pts = gen.random((n, d))
    before = cg.region_statistics(cg.PointCloud(pts[:-1]), delta)
    after = cg.region_statistics(cg.PointCloud(pts), delta)
    assert np.all(after.dominant_gap <= before.dominant_gap + 1e-15)
    assert np.all(after.slab_gap <= before.slab_gap + 1e-15)
    off = ~np.eye(d, dtype=bool)
    if d > 1:
        assert np.all(after.pair_diff_gap[off] <= before.pair_diff_gap[off] + 1e-15)
        assert np.all(
            after.relaxed_dominant_count[off] >= before.relaxed_dominant_count[off]
        )


def test_csv_row_serialization(rng):
    stats = cg.region_statistics(cg.PointCloud(rng.random((20, 2))), 0.25)
    row = stats.csv_row()
    assert row["delta"] == 0.25
    assert row["dominant_gap_0"] == stats.dominant_gap[0]
    assert row["pair_diff_gap_0_1"] == stats.pair_diff_gap[0, 1]
    assert row["relaxed_count_1_0"] == stats.relaxed_dominant_count[1, 0]
    assert "pair_diff_gap_0_0" not in row


def test_stat_ranges(rng):
    delta = 0.3
    stats = cg.region_statistics(cg.PointCloud(rng.random((60, 3))), delta)
    assert np.all((stats.dominant_gap >= 0) & (stats.dominant_gap <= 1))
    assert np.all((stats.slab_gap >= 0) & (stats.slab_gap <= 1))
    off = ~np.eye(3, dtype=bool)
    assert np.all(stats.pair_diff_gap[off] <= 2 - delta)
    assert np.all(stats.relaxed_dominant_count[off] <= 60)


# -- event indicators ------------------------------------------------------------


def test_empty_cloud_fails_gap_event():
    # The bound constants only dip below the trivial gap of 1 once n is
    # moderately large; there an empty cloud always fails the event.
    stats = cg.region_statistics(cg.PointCloud(np.zeros((0, 2))), 0.1)
    events = cg.event_indicators(stats, 10_000, 2, 0.1)
    assert events.b1_threshold < 1.0
    assert not events.b1


def test_event_thresholds():
    n, d, delta = 10_000, 2, 0.01
    stats = cg.region_statistics(cg.PointCloud(np.random.default_rng(0).random((n, d))), delta)
    events = cg.event_indicators(stats, n, d, delta)
    assert events.b1_threshold == pytest.approx(
        3.0 * (12.0 * np.log(n) / n) ** 0.5, rel=1e-12
    )
    assert events.b2_threshold == pytest.approx(6.0 * np.log(n) / n / delta, rel=1e-12)
    assert events.b3_threshold == pytest.approx(1 + n / 2, rel=1e-12)


def test_one_dimensional_events():
    n = 1000
    pts = np.random.default_rng(1).random((n, 1))
    stats = cg.region_statistics(cg.PointCloud(pts), 0.5)
    events = cg.event_indicators(stats, n, 1, 0.5)
    assert events.b3  # no coordinate pairs to count
    assert events.b1_threshold == pytest.approx(36.0 * np.log(n) / n, rel=1e-12)


def test_event_indicators_need_two_points():
    stats = cg.region_statistics(cg.PointCloud(np.array([[0.5, 0.5]])), 0.5)
    with pytest.raises(UsageError):
        cg.event_indicators(stats, 1, 2, 0.5)


def test_gap_events_usually_hold_at_scale():
    hold = 0
    trials = 25
    n = 10_000
    for s in range(trials):
        pts = np.random.default_rng(s).random((n, 2))
        delta = n**-0.5
        stats = cg.region_statistics(cg.PointCloud(pts), delta)
        events = cg.event_indicators(stats, n, 2, delta)
        hold += events.b1
    assert hold == trials
