import numpy as np
import pytest

from glauberlab.geometry import BlockLayout, TorusGeometry, linf_block_distance


def test_index_coords_roundtrip():
    g = TorusGeometry.cube(3, 4, wrap=True)
    for v in range(0, g.n_vertices, 7):
        assert g.index(tuple(g.coords(v))) == v
    assert np.array_equal(g.coord_table[13], g.coords(13))


def test_wrapped_degrees_are_2d():
    for d in (1, 2, 3, 4):
        g = TorusGeometry.cube(d, 4, wrap=True)
        assert np.all(g.degrees == 2 * d)


def test_free_box_corner_degrees():
    g = TorusGeometry.cube(2, 5, wrap=False)
    corner = g.index((0, 0))
    center = g.index((2, 2))
    assert g.degrees[corner] == 2
    assert g.degrees[center] == 4


def test_side_two_wrap_is_a_multigraph():
    # both directions along an axis reach the same vertex; the duplicate
    # column must be kept so neighbour counts reflect multiplicity
    g = TorusGeometry.cube(2, 2, wrap=True)
    nbrs = g.neighbor_table[0]
    assert sorted(nbrs.tolist()) == [1, 1, 2, 2]


def test_wrapped_distance_folds_each_axis():
    g = TorusGeometry.cube(2, 6, wrap=True)
    a = g.index((0, 0))
    assert g.distance(a, g.index((5, 0))) == 1
    assert g.distance(a, g.index((3, 3))) == 6
    dists = g.distances_from(a)
    assert dists[a] == 0
    assert dists.max() == 6


def test_ball_and_sphere_sizes_match_l1_formula():
    g = TorusGeometry.cube(2, 41, wrap=True)
    x = g.index((20, 20))
    for rad in (0, 1, 2, 5):
        # |B_r| in Z^2 under L1 is 2r^2 + 2r + 1
        assert g.ball(x, rad).size == 2 * rad * rad + 2 * rad + 1
    assert g.sphere(x, 3).size == 12
    assert x in g.ball(x, 0)


def test_partition_into_blocks_tiles_exactly():
    g = TorusGeometry.cube(2, 12, wrap=True)
    labels, dims = g.partition_into_blocks(3)
    assert tuple(dims) == (4, 4)
    counts = np.bincount(labels)
    assert counts.size == 16 and np.all(counts == 9)


def test_partition_requires_divisibility():
    g = TorusGeometry.cube(2, 10, wrap=True)
    with pytest.raises(ValueError):
        g.partition_into_blocks(3)


def test_block_layout_masks():
    lay = BlockLayout(2, 9, 15)
    assert lay.margin == 3
    assert not lay.degenerate
    assert int(lay.inner_mask_outer.sum()) == 81
    assert lay.outer_box.n_vertices == 225
    assert lay.collar_box.n_vertices == 17 * 17
    assert int(lay.collar_ring_mask.sum()) == 17 * 17 - 225
    assert int(lay.inner_mask_collar.sum()) == 81
    # outer-box vertices embed one step in from the collar edge
    assert np.array_equal(
        np.sort(lay.outer_to_collar),
        np.flatnonzero(~lay.collar_ring_mask),
    )
    assert lay.min_breach_path_len == 5


def test_block_layout_default_sides():
    lay = BlockLayout.default(2)
    assert (lay.inner_side, lay.outer_side) == (12, 20)
    lay = BlockLayout.default(2, 9)
    assert (lay.inner_side, lay.outer_side) == (9, 15)


def test_degenerate_layout_flagged():
    lay = BlockLayout(2, 9, 9)
    assert lay.degenerate


def test_linf_block_distance_wraps():
    dims = (5, 5)
    assert linf_block_distance((0, 0), (4, 0), dims, wrap=True) == 1
    assert linf_block_distance((0, 0), (2, 2), dims, wrap=True) == 2
    assert linf_block_distance((0, 0), (4, 0), dims, wrap=False) == 4
