import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fons._edt import squared_distance
from fons.grid import PeriodicGrid
from fons.scaling import ScalingRangeError, dyadic_ladder, fit_exponent
from fons.sets import (EmptySetError, ResolutionError, SingularSet, SingularSetFamily,
                       cantor_mask, make_cantor, make_empty, make_full, make_hyperplane,
                       make_point_cloud, make_product, minkowski_dimension,
                       neighborhood_volume, set_from_descriptor, uniform_minkowski_dimension)

LOG23 = math.log(2) / math.log(3)


def brute_squared(mask):
    """O(N^2) periodic squared distance in node units."""
    n = mask.shape[0]
    d = mask.ndim
    pts = np.argwhere(mask)
    out = np.full(mask.shape, np.inf)
    for idx in itertools.product(range(n), repeat=d):
        diff = np.abs(pts - np.array(idx))
        diff = np.minimum(diff, n - diff)
        out[idx] = np.min(np.sum(diff**2, axis=1))
    return out


@pytest.mark.parametrize("d,n", [(1, 16), (2, 16), (3, 8)])
def test_edt_matches_brute_force(d, n):
    rng = np.random.default_rng(d * 100 + n)
    for density in (0.01, 0.1, 0.5):
        mask = rng.random((n,) * d) < density
        if not mask.any():
            mask.flat[0] = True
        assert np.array_equal(squared_distance(mask), brute_squared(mask))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=6))
def test_edt_property(points):
    mask = np.zeros((16, 16), dtype=bool)
    for p in points:
        mask[p] = True
    assert np.array_equal(squared_distance(mask), brute_squared(mask))


def test_edt_empty_is_inf():
    assert np.all(np.isinf(squared_distance(np.zeros((8, 8), dtype=bool))))


def test_cantor_mask_counts():
    # depth-k middle-thirds set on 3^k-aligned resolution: 2^k blocks
    n = 2**12
    m = cantor_mask(n, 1 / 3, 4)
    runs = np.flatnonzero(np.diff(np.concatenate([[0], m.astype(int), [0]])) == 1)
    assert runs.size == 16
    with pytest.raises(ResolutionError, match="resolution exhausted"):
        cantor_mask(64, 1 / 3, 6)


def test_box_counting_oracle_agrees():
    # independent oracle: count occupied boxes of side 2^-j
    g = PeriodicGrid(1, 2**16)
    s = make_cantor(g, 1 / 3, 8)
    occ = s.occupancy
    sizes, counts = [], []
    for j in range(6, 12):
        box = g.n >> j
        counts.append(occ.reshape(-1, box).any(axis=1).sum())
        sizes.append(2.0**-j)
    box_dim = -fit_exponent(sizes, counts).exponent
    mink = minkowski_dimension(s).dimension
    assert box_dim == pytest.approx(LOG23, abs=0.05)
    assert mink == pytest.approx(box_dim, abs=0.05)


def test_dimension_point_and_hyperplane():
    g = PeriodicGrid(2, 1024)
    assert minkowski_dimension(make_point_cloud(g, 1, seed=3)).dimension == pytest.approx(0, abs=0.1)
    assert minkowski_dimension(make_hyperplane(g, 1)).dimension == pytest.approx(1, abs=0.05)
    assert minkowski_dimension(make_full(g)).dimension == pytest.approx(2, abs=1e-12)


def test_neighborhood_volume_point_exact():
    # closed disc volume on the lattice equals the lattice point count
    g = PeriodicGrid(2, 64)
    s = make_product(g, ["point", "point"])
    r = 5
    expected = sum(1 for i in range(-r, r + 1) for j in range(-r, r + 1) if i * i + j * j <= r * r)
    assert neighborhood_volume(s, r / 64) == pytest.approx(expected / 64**2)


def test_neighborhood_volume_errors_and_empty():
    g = PeriodicGrid(1, 64)
    with pytest.raises(ResolutionError, match="sub-resolution epsilon"):
        neighborhood_volume(make_point_cloud(g), 0.001)
    assert neighborhood_volume(make_empty(g), 0.25) == 0.0


def test_empty_set_distance():
    g = PeriodicGrid(2, 16)
    e = make_empty(g)
    with pytest.raises(EmptySetError):
        e.distance
    assert np.all(e.distance_or_unit().values == 1.0)


def test_uniform_family_takes_max_member():
    g = PeriodicGrid(2, 1024)
    fam = SingularSetFamily([(0, make_point_cloud(g, 2, seed=1)), (1, make_hyperplane(g)),
                             (2, make_point_cloud(g, 3, seed=2))])
    members = [minkowski_dimension(s).dimension for s in fam.sets()]
    uni = uniform_minkowski_dimension(fam).dimension
    assert uni == pytest.approx(max(members), abs=0.1)


def test_family_validation():
    g = PeriodicGrid(1, 16)
    h = PeriodicGrid(1, 32)
    with pytest.raises(ValueError):
        SingularSetFamily([(0, make_point_cloud(g)), (0, make_point_cloud(g))])
    with pytest.raises(ValueError, match="mixed grids"):
        SingularSetFamily([(0, make_point_cloud(g)), (1, make_point_cloud(h))])


def test_degenerate_ladder():
    g = PeriodicGrid(1, 1024)
    with pytest.raises(ValueError, match="degenerate ladder"):
        minkowski_dimension(make_point_cloud(g), [0.1, 0.1, 0.05])


def test_descriptor_roundtrip():
    g = PeriodicGrid(2, 256)
    s = make_product(g, [("cantor", 1 / 3, 3), "full"])
    again = set_from_descriptor(g, s.tag)
    assert np.array_equal(again.occupancy, s.occupancy)
    assert s.analytic_dim == pytest.approx(1 + LOG23)


def test_point_cloud_seeded():
    g = PeriodicGrid(2, 32)
    a = make_point_cloud(g, 5, seed=7)
    b = make_point_cloud(g, 5, seed=7)
    assert np.array_equal(a.occupancy, b.occupancy) and a.occupancy.sum() == 5


def test_empty_occupancy_needs_empty_kind():
    g = PeriodicGrid(1, 8)
    with pytest.raises(ValueError):
        SingularSet(g, np.zeros(8, bool), {"kind": "cantor"})


def test_fit_exponent_exact_power_law():
    x = dyadic_ladder(2**-10, 2**-2)
    f = fit_exponent(x, 3 * x**1.7)
    assert f.exponent == pytest.approx(1.7, abs=1e-12)
    assert f.residual < 1e-12 and not f.nonlinear
    with pytest.raises(ScalingRangeError, match="insufficient scaling range"):
        fit_exponent(x[:3], x[:3])
    f = fit_exponent(x, np.where(np.arange(x.size) == 0, 0.0, x))
    assert f.excluded == 1
