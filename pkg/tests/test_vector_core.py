import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.vector_core import (
    BoxSet,
    ComposedMap,
    DenseMap,
    SparseMap,
    as_map,
    as_vector,
    load_dense_csv,
    load_sparse_csv,
    spectral_norm_reference,
)


class TestBoxSet:
    def test_cube_radius_and_projection(self):
        box = BoxSet.cube(2, 1.0)
        assert box.is_bounded
        assert box.radius_from(np.zeros(2)) == pytest.approx(np.sqrt(2.0))
        assert_array_equal(box.project(np.array([3.0, -0.5])), [1.0, -0.5])
        assert box.contains(np.array([1.0, -1.0]))
        assert not box.contains(np.array([1.0 + 1e-6, 0.0]))

    def test_free_box_is_unbounded(self):
        box = BoxSet.free(3)
        assert box.is_free
        assert box.diameter() == float("inf")
        assert box.radius_from(np.zeros(3)) == float("inf")

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValueError):
            BoxSet(np.array([1.0]), np.array([0.0]))

    def test_scaled_box(self):
        box = BoxSet.cube(2, 2.0).scaled(4.0)
        assert_allclose(box.upper, [0.5, 0.5])
        with pytest.raises(ValueError):
            box.scaled(0.0)


class TestLinearMaps:
    def test_adjoint_identity(self, rng):
        M = rng.standard_normal((4, 3))
        A = DenseMap(M)
        x, y = rng.standard_normal(3), rng.standard_normal(4)
        assert float(A.forward(x) @ y) == pytest.approx(float(x @ A.adjoint(y)))

    def test_shape_mismatch(self):
        A = DenseMap(np.ones((2, 3)))
        with pytest.raises(ValueError):
            A.forward(np.ones(2))
        with pytest.raises(ValueError):
            A.adjoint(np.ones(3))

    def test_sparse_duplicates_sum(self):
        A = SparseMap.from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)])
        assert_array_equal(A.to_dense(), [[3.0, 0.0], [-1.0, 0.0]])
        assert_array_equal(A.adjoint(np.array([1.0, 1.0])), [2.0, 0.0])

    def test_scaled_composition(self, rng):
        M = rng.standard_normal((3, 3))
        scaled = DenseMap(M).scaled(2.5)
        assert isinstance(scaled, ComposedMap)
        assert_allclose(scaled.to_dense(), 2.5 * M)

    def test_diagonal_detection(self):
        assert_array_equal(DenseMap(np.diag([1.0, 2.0])).diagonal(), [1.0, 2.0])
        assert DenseMap(np.array([[1.0, 1.0], [0.0, 1.0]])).diagonal() is None
        assert DenseMap(np.ones((2, 3))).diagonal() is None

    def test_spectral_norm_reference(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        M = Q @ np.diag([3.0, 1.0, 0.5])
        assert spectral_norm_reference(DenseMap(M)) == pytest.approx(3.0, rel=1e-10)
        assert spectral_norm_reference(DenseMap(np.zeros((2, 2)))) == 0.0

    def test_as_map_wraps_arrays(self):
        A = as_map([[1.0, 2.0]])
        assert A.shape == (1, 2)
        assert as_map(A) is A


def test_as_vector_rejects_non_finite():
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], dim=3)


def test_csv_loaders(tmp_path):
    dense = tmp_path / "A.csv"
    dense.write_text("1,2\n3,4\n")
    assert_array_equal(load_dense_csv(str(dense)).to_dense(), [[1.0, 2.0], [3.0, 4.0]])

    triplets = tmp_path / "S.csv"
    triplets.write_text("0,1,2.5\n2,0,-1\n")
    S = load_sparse_csv(str(triplets))
    assert S.shape == (3, 2)
    assert S.to_dense()[0, 1] == 2.5
