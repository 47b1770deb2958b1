"""Grid construction, node classification, and ellipsoidal regions."""

import numpy as np
import pytest

from capgraph import (BadDimension, CapillaryAngle, EllipsoidRegion,
                      EmptyRegion, NodeClass, NonconformingExtent, RegionKind,
                      build_grid, in_region, inner_node_set)


def test_build_grid_1d_counts_and_classes():
    grid = build_grid(1, 0.5, 2.0)
    assert grid.n_nodes == 5
    assert np.allclose(grid.nodes.ravel(), [0.0, 0.5, 1.0, 1.5, 2.0])
    assert grid.classes[0] == NodeClass.CAPILLARY_BOUNDARY
    assert grid.classes[-1] == NodeClass.DIRICHLET_BOUNDARY
    assert np.count_nonzero(grid.classes == NodeClass.INTERIOR) == 3


def test_build_grid_2d_corner_rule():
    grid = build_grid(2, 1.0, 2.0, 2.0)
    assert grid.n_nodes == 15
    cap = grid.nodes[grid.capillary_indices]
    assert cap.shape[0] == 3
    assert np.all(cap[:, 0] == 0.0)
    assert np.all(np.abs(cap[:, 1]) < 2.0)
    # corners (0, +-2) are Dirichlet: Dirichlet wins
    for corner in ([0.0, 2.0], [0.0, -2.0]):
        k = np.flatnonzero(np.all(grid.nodes == corner, axis=1))[0]
        assert grid.classes[k] == NodeClass.DIRICHLET_BOUNDARY


def test_build_grid_node_count_formula():
    grid = build_grid(2, 0.25, 1.0, 1.5)
    assert grid.n_nodes == (int(1.0 / 0.25) + 1) * (2 * int(1.5 / 0.25) + 1)


def test_build_grid_nonconforming_and_bad_dim():
    with pytest.raises(NonconformingExtent):
        build_grid(2, 0.3, 1.0, 1.0)
    with pytest.raises(NonconformingExtent):
        build_grid(1, 0.5, 1.7)
    with pytest.raises(BadDimension):
        build_grid(3, 0.5, 1.0, 1.0)
    with pytest.raises(NonconformingExtent):
        build_grid(2, 0.5, 1.0)   # missing Lp


def test_classification_partitions_nodes():
    grid = build_grid(2, 0.2, 1.0, 0.8)
    counts = (grid.interior_indices.size + grid.capillary_indices.size
              + grid.dirichlet_indices.size)
    assert counts == grid.n_nodes


def test_in_region_center_true_for_every_angle():
    for theta_val in (0.3, np.pi / 3, np.pi / 2, 2.5):
        theta = CapillaryAngle(theta_val)
        for r in (0.5, 1.0, 7.0):
            region = EllipsoidRegion(r, theta, RegionKind.OUTER)
            center = np.array([abs(theta.cos_t) * r] + [0.0])
            assert in_region(center, region)


def test_in_region_inner_free_boundary_values():
    theta = CapillaryAngle(np.pi / 2)
    region = EllipsoidRegion(1.0, theta, RegionKind.INNER)
    assert in_region(np.array([0.4, 0.0]), region)        # 0.16 < 0.25
    assert not in_region(np.array([0.6, 0.0]), region)    # 0.36 > 0.25


def test_inner_node_set_1d_closure_tolerance():
    grid = build_grid(1, 0.5, 2.0)
    theta = CapillaryAngle(np.pi / 2)
    region = EllipsoidRegion(1.0, theta, RegionKind.OUTER)
    idx = inner_node_set(grid, region)
    # region is (0, 1); nodes 0.0, 0.5, 1.0 lie in it or within h/2 of it
    assert np.allclose(grid.nodes[idx].ravel(), [0.0, 0.5, 1.0])


def test_inner_node_set_empty_region():
    grid = build_grid(2, 0.5, 2.0, 2.0)
    theta = CapillaryAngle(np.pi / 3)
    far = EllipsoidRegion(0.5, theta, RegionKind.OUTER, center=(50.0,))
    with pytest.raises(EmptyRegion):
        inner_node_set(grid, far)


def test_inner_subset_of_outer_on_grid():
    grid = build_grid(2, 0.25, 2.0, 2.0)
    theta = CapillaryAngle(2.0)
    inner = set(inner_node_set(grid, EllipsoidRegion(1.5, theta, RegionKind.INNER)))
    outer = set(inner_node_set(grid, EllipsoidRegion(1.5, theta, RegionKind.OUTER)))
    assert inner <= outer


def test_region_inclusion_sampled():
    rng = np.random.default_rng(12)
    for theta_val, r in ((0.4, 0.7), (np.pi / 2, 2.0), (2.8, 5.0)):
        theta = CapillaryAngle(theta_val)
        pts = rng.uniform(-3.0 * r, 3.0 * r, (100_000, 2))
        pts[:, 0] = np.abs(pts[:, 0])
        inner = in_region(pts, EllipsoidRegion(r, theta, RegionKind.INNER))
        outer = in_region(pts, EllipsoidRegion(r, theta, RegionKind.OUTER))
        assert not np.any(inner & ~outer)


def test_regions_absorb_bounded_sets_as_r_grows():
    rng = np.random.default_rng(3)
    query = rng.uniform(0.01, 5.0, (200, 2))
    query[:, 1] -= 2.5
    for theta_val in (0.6, np.pi / 2, 2.6):
        theta = CapillaryAngle(theta_val)
        r = 1.0
        absorbed = False
        for _ in range(6):
            r *= 2.0
            inside = in_region(query, EllipsoidRegion(r, theta, RegionKind.INNER))
            if np.all(inside):
                absorbed = True
        assert absorbed


def test_grid_arrays_are_immutable():
    grid = build_grid(2, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        grid.nodes[0, 0] = 5.0
    with pytest.raises(ValueError):
        grid.classes[0] = 0
