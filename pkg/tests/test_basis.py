"""Distance, spanning-tree, and eigenvector basis construction tests.

The spanning-tree checks use two independent oracles: exhaustive
enumeration of all labeled trees through Prufer sequences for a tiny
instance, and a from-scratch Prim implementation for a larger one.
"""

import itertools

import numpy as np
import pytest

from stvc.basis import (
    SPATIAL,
    TEMPORAL_CYCLIC,
    TEMPORAL_LINEAR,
    MoranBasis,
    PointSet,
    build_basis,
    cross_distance,
    expand_to_observations,
    extend_to_points,
    extract_basis,
    kernel_matrix,
    mst_longest_edge,
    pairwise_distance,
)
from stvc.errors import DegenerateAxisError, ParameterError


def spatial_points(values):
    values = np.asarray(values, dtype=float)
    return PointSet(values, np.arange(len(values)), SPATIAL)


def time_points(values, kind=TEMPORAL_LINEAR, period=None):
    values = np.asarray(values, dtype=float)[:, None]
    return PointSet(values, np.arange(len(values)), kind, period=period)


def tree_from_prufer(seq, n):
    """Edge list of the labeled tree encoded by a Prufer sequence."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    seq = list(seq)
    for v in seq:
        for leaf in range(n):
            if degree[leaf] == 1:
                edges.append((leaf, v))
                degree[leaf] -= 1
                degree[v] -= 1
                break
    last = [v for v in range(n) if degree[v] == 1]
    edges.append((last[0], last[1]))
    return edges


def exhaustive_mst_longest_edge(dist):
    """Longest edge over minimum spanning trees by full tree enumeration."""
    n = dist.shape[0]
    best_weight = np.inf
    longest = None
    for seq in itertools.product(range(n), repeat=n - 2):
        edges = tree_from_prufer(seq, n)
        weight = sum(dist[a, b] for a, b in edges)
        if weight < best_weight - 1e-12:
            best_weight = weight
            longest = max(dist[a, b] for a, b in edges)
        elif abs(weight - best_weight) <= 1e-12:
            assert abs(max(dist[a, b] for a, b in edges) - longest) < 1e-12
    return longest


def prim_longest_edge(dist):
    """Independent Prim implementation tracking the heaviest chosen edge."""
    n = dist.shape[0]
    in_tree = [0]
    best = 0.0
    while len(in_tree) < n:
        candidates = [
            (dist[i, j], j)
            for i in in_tree for j in range(n) if j not in in_tree
        ]
        weight, j = min(candidates)
        best = max(best, weight)
        in_tree.append(j)
    return best


class TestDistances:
    def test_cyclic_wraparound_period_24(self):
        pts = time_points([23.0, 1.0], TEMPORAL_CYCLIC, period=24.0)
        dist = pairwise_distance(pts)
        assert dist[0, 1] == pytest.approx(2.0)

    def test_cyclic_wraparound_period_10(self):
        pts = time_points([1.0, 9.0], TEMPORAL_CYCLIC, period=10.0)
        assert pairwise_distance(pts)[0, 1] == pytest.approx(2.0)

    def test_spatial_3_4_5(self):
        pts = spatial_points([[0.0, 0.0], [3.0, 4.0]])
        assert pairwise_distance(pts)[0, 1] == pytest.approx(5.0)

    def test_linear_absolute_difference(self):
        pts = time_points([2.0, 7.5, 3.0])
        dist = pairwise_distance(pts)
        assert dist[0, 1] == pytest.approx(5.5)
        assert dist[1, 2] == pytest.approx(4.5)

    def test_cyclic_metric_properties(self):
        rng = np.random.default_rng(7)
        period = 24.0
        values = rng.uniform(0, period, size=15)
        dist = cross_distance(values[:, None], values[:, None],
                              TEMPORAL_CYCLIC, period)
        assert np.allclose(dist, dist.T)
        assert np.allclose(np.diag(dist), 0.0)
        assert dist.max() <= period / 2 + 1e-12

    def test_single_point_degenerate(self):
        with pytest.raises(DegenerateAxisError):
            pairwise_distance(time_points([4.0]))


class TestMst:
    def test_two_points_single_edge(self):
        dist = np.array([[0.0, 3.0], [3.0, 0.0]])
        assert mst_longest_edge(dist) == pytest.approx(3.0)

    def test_collinear_chain(self):
        pts = time_points([0.0, 1.0, 2.0])
        assert mst_longest_edge(pairwise_distance(pts)) == pytest.approx(1.0)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(11)
        pts = spatial_points(rng.uniform(size=(7, 2)))
        dist = pairwise_distance(pts)
        assert mst_longest_edge(dist) == pytest.approx(
            exhaustive_mst_longest_edge(dist), rel=1e-12
        )

    def test_matches_independent_prim(self):
        rng = np.random.default_rng(23)
        pts = spatial_points(rng.uniform(size=(10, 2)))
        dist = pairwise_distance(pts)
        assert mst_longest_edge(dist) == pytest.approx(
            prim_longest_edge(dist), rel=1e-12
        )

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        coords = rng.uniform(size=(12, 2))
        perm = rng.permutation(12)
        d1 = pairwise_distance(spatial_points(coords))
        d2 = pairwise_distance(spatial_points(coords[perm]))
        assert mst_longest_edge(d1) == pytest.approx(
            mst_longest_edge(d2), rel=1e-12
        )


class TestKernel:
    def test_unit_argument(self):
        dist = np.array([[0.0, 2.0], [2.0, 0.0]])
        k = kernel_matrix(dist, 2.0)
        assert k[0, 1] == pytest.approx(np.exp(-1.0))

    def test_zero_diagonal(self):
        rng = np.random.default_rng(1)
        pts = spatial_points(rng.uniform(size=(6, 2)))
        k = kernel_matrix(pairwise_distance(pts), 0.37)
        assert np.all(np.diag(k) == 0.0)

    def test_decay_to_zero(self):
        dist = np.array([[0.0, 1e9], [1e9, 0.0]])
        assert kernel_matrix(dist, 1.0)[0, 1] == pytest.approx(0.0, abs=1e-300)

    def test_nonpositive_range_rejected(self):
        dist = np.zeros((2, 2))
        with pytest.raises(ParameterError):
            kernel_matrix(dist, 0.0)
        with pytest.raises(ParameterError):
            kernel_matrix(dist, -1.0)


class TestExtractBasis:
    def test_two_equidistant_sites_empty(self):
        pts = spatial_points([[0.0, 0.0], [1.0, 0.0]])
        basis = build_basis(pts)
        assert basis.is_empty

    def test_columns_mean_zero_orthonormal(self):
        rng = np.random.default_rng(5)
        basis = build_basis(spatial_points(rng.uniform(size=(50, 2))))
        assert basis.n_components > 0
        assert np.abs(basis.eigvecs.mean(axis=0)).max() < 1e-10
        gram = basis.eigvecs.T @ basis.eigvecs
        assert np.abs(gram - np.eye(basis.n_components)).max() < 1e-8

    def test_matches_dense_reference(self):
        rng = np.random.default_rng(17)
        coords = rng.uniform(size=(50, 2))
        pts = spatial_points(coords)
        dist = pairwise_distance(pts)
        rng_range = mst_longest_edge(dist)
        kernel = np.exp(-dist / rng_range)
        np.fill_diagonal(kernel, 0.0)
        center = np.eye(50) - np.full((50, 50), 1.0 / 50)
        mc = center @ kernel @ center
        ref_vals, ref_vecs = np.linalg.eigh((mc + mc.T) / 2)
        order = np.argsort(ref_vals)[::-1]
        ref_vals, ref_vecs = ref_vals[order], ref_vecs[:, order]
        keep = ref_vals > 1e-8 * ref_vals[0]
        ref_vals, ref_vecs = ref_vals[keep], ref_vecs[:, keep]

        basis = build_basis(pts)
        assert basis.n_components == keep.sum()
        assert np.allclose(basis.eigvals, ref_vals / ref_vals[0], atol=1e-8)
        assert basis.eigval_scale == pytest.approx(ref_vals[0], rel=1e-10)
        for l in range(basis.n_components):
            col = basis.eigvecs[:, l]
            ref = ref_vecs[:, l]
            sign = np.sign(col @ ref)
            assert np.abs(col - sign * ref).max() < 1e-8

    def test_translation_invariance(self):
        rng = np.random.default_rng(29)
        coords = rng.uniform(size=(30, 2))
        b1 = build_basis(spatial_points(coords))
        b2 = build_basis(spatial_points(coords + np.array([100.0, -40.0])))
        assert np.allclose(b1.eigvals, b2.eigvals, atol=1e-9)
        for l in range(b1.n_components):
            sign = np.sign(b1.eigvecs[:, l] @ b2.eigvecs[:, l])
            assert np.allclose(b1.eigvecs[:, l], sign * b2.eigvecs[:, l],
                               atol=1e-7)

    def test_eigvals_normalized_descending(self):
        rng = np.random.default_rng(9)
        basis = build_basis(spatial_points(rng.uniform(size=(40, 2))))
        assert basis.eigvals[0] == pytest.approx(1.0)
        assert np.all(np.diff(basis.eigvals) <= 1e-15)
        assert np.all(basis.eigvals > 0)
        assert basis.n_components <= 39

    def test_component_cap(self):
        rng = np.random.default_rng(13)
        pts = spatial_points(rng.uniform(size=(40, 2)))
        capped = build_basis(pts, max_components=3)
        full = build_basis(pts)
        assert capped.n_components == 3
        assert np.allclose(capped.eigvals, full.eigvals[:3])

    def test_extract_symmetrizes_input(self):
        rng = np.random.default_rng(19)
        pts = spatial_points(rng.uniform(size=(10, 2)))
        kernel = kernel_matrix(pairwise_distance(pts), 0.5)
        jitter = kernel + rng.normal(scale=1e-13, size=kernel.shape)
        b1 = extract_basis(kernel, 10)
        b2 = extract_basis(jitter, 10)
        assert np.allclose(b1.eigvals, b2.eigvals, atol=1e-10)


class TestExpansion:
    def test_identity_mapping(self):
        rng = np.random.default_rng(2)
        basis = build_basis(spatial_points(rng.uniform(size=(12, 2))))
        rows = expand_to_observations(basis, np.arange(12))
        assert np.array_equal(rows, basis.eigvecs)

    def test_shared_site_rows_equal(self):
        rng = np.random.default_rng(4)
        basis = build_basis(spatial_points(rng.uniform(size=(8, 2))))
        rows = expand_to_observations(basis, np.array([3, 3, 5]))
        assert np.array_equal(rows[0], rows[1])
        assert not np.array_equal(rows[0], rows[2])

    def test_panel_repetition(self):
        rng = np.random.default_rng(21)
        coords = rng.uniform(size=(200, 2))
        obs = np.repeat(np.arange(200), 40)
        pts = PointSet.from_coords(coords[obs], SPATIAL)
        assert pts.n_unique == 200
        basis = build_basis(pts)
        rows = expand_to_observations(basis, pts.obs_index)
        assert rows.shape[0] == 8000
        assert np.unique(rows, axis=0).shape[0] == 200
        assert np.array_equal(rows[:40], np.tile(rows[0], (40, 1)))

    def test_cyclic_dedup(self):
        values = np.tile(np.arange(1.0, 41.0), 5)
        pts = PointSet.from_coords(values, TEMPORAL_CYCLIC, period=10.0)
        assert pts.n_unique == 10


class TestExtension:
    def test_reproduces_training_rows(self):
        rng = np.random.default_rng(31)
        coords = rng.uniform(size=(30, 2))
        basis = build_basis(spatial_points(coords))
        ext = extend_to_points(basis, coords)
        assert np.abs(ext - basis.eigvecs).max() < 1e-12

    def test_cyclic_wrap_reproduces_rows(self):
        values = np.arange(1.0, 21.0)
        pts = PointSet.from_coords(values, TEMPORAL_CYCLIC, period=20.0)
        basis = build_basis(pts)
        assert not basis.is_empty
        shifted = extend_to_points(basis, values + 20.0)
        base = extend_to_points(basis, values)
        assert np.abs(shifted - base).max() < 1e-12

    def test_offgrid_matches_projection_formula(self):
        rng = np.random.default_rng(37)
        coords = rng.uniform(size=(25, 2))
        basis = build_basis(spatial_points(coords))
        new = rng.uniform(size=(6, 2))
        ext = extend_to_points(basis, new)
        for i in range(6):
            d = np.sqrt(((new[i] - basis.points) ** 2).sum(axis=1))
            cross = np.exp(-d / basis.kernel_range) - basis.kernel_colmeans
            expected = [
                cross @ basis.eigvecs[:, l]
                / (basis.eigvals[l] * basis.eigval_scale)
                for l in range(basis.n_components)
            ]
            assert np.allclose(ext[i], expected, atol=1e-10)

    def test_offgrid_values_finite(self):
        rng = np.random.default_rng(41)
        coords = rng.uniform(size=(40, 2))
        basis = build_basis(spatial_points(coords))
        inside = rng.uniform(0.2, 0.8, size=(50, 2))
        ext = extend_to_points(basis, inside)
        assert np.isfinite(ext).all()
        # The leading component varies smoothly, so interior extension
        # values stay on the scale of the training eigenvector.
        lead = np.abs(basis.eigvecs[:, 0]).max()
        assert np.abs(ext[:, 0]).max() < 5 * lead
