"""Sparse system matrix against dense brute-force references."""

import io

import numpy as np
import pytest
import scipy.io

import ctiskit as ck
from ctiskit.sysmat import build_h, estimate_nnz, load_h, matvec, rmatvec, save_h

from conftest import dense_h, random_instance


def test_unblurred_unit_columns_have_nine_entries():
    geom = ck.GeometryParams(6, 6, 3, 2, 0, 1)
    h = build_h(geom, ck.OpticalParams.unit(3))
    csc = h.matrix
    for j in range(h.cols):
        col = csc.data[csc.indptr[j]:csc.indptr[j + 1]]
        assert col.size == 9
        np.testing.assert_array_equal(col, np.ones(9))


def test_without_skew_orders_five_entries_per_column():
    geom = ck.GeometryParams(6, 6, 3, 2, 0, 1, all_orders=False)
    h = build_h(geom, ck.OpticalParams.unit(3, all_orders=False))
    counts = np.diff(h.matrix.indptr)
    np.testing.assert_array_equal(counts, np.full(h.cols, 5))


def test_interior_column_sums_are_total_sensitivity(rng):
    geom = ck.GeometryParams(8, 8, 3, 6, 6, 1)  # b1,b2 big: nothing clips
    sens = rng.uniform(0.2, 1.5, (9, 3))
    illum = rng.uniform(0.2, 1.5, 3)
    optics = ck.OpticalParams(sens, illum, sigma_psf=1.1)
    h = build_h(geom, optics)
    dense = dense_h(geom, optics)
    np.testing.assert_allclose(h.matrix.toarray(), dense, rtol=0, atol=1e-14)
    # center voxel of each channel: every stencil fits, mass is conserved
    for k in range(3):
        voxel = (4 * 8 + 4) * 3 + k
        expected = float((sens[:, k] * illum[k]).sum())
        assert abs(h.col_sums[voxel] - expected) / expected < 1e-6


def test_matvec_zero():
    geom = ck.GeometryParams(4, 4, 2, 1, 0, 1)
    h = build_h(geom, ck.OpticalParams.unit(2))
    assert not matvec(h, np.zeros(h.cols)).any()


def test_matvec_matches_dense_product(rng):
    geom = ck.GeometryParams(4, 4, 2, 1, 1, 1)
    optics = ck.OpticalParams(rng.uniform(0.1, 1, (9, 2)),
                              rng.uniform(0.1, 1, 2), sigma_psf=0.8)
    h = build_h(geom, optics)
    dense = dense_h(geom, optics)
    for _ in range(5):
        f = rng.uniform(0, 3, h.cols)
        np.testing.assert_allclose(matvec(h, f), dense @ f,
                                   rtol=1e-9, atol=1e-12)


def test_matvec_of_ones_equals_projection_of_white_cube():
    geom = ck.GeometryParams(6, 6, 3, 2, 0, 1)
    optics = ck.OpticalParams.unit(3)
    h = build_h(geom, optics)
    got = matvec(h, np.ones(h.cols))
    want = ck.project(ck.HyperCube(np.ones(geom.cube_shape)), geom,
                      optics).ravel()
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=0)


def test_adjoint_identity(rng):
    geom = ck.GeometryParams(4, 4, 2, 1, 0, 1)
    optics = ck.OpticalParams(rng.uniform(0.1, 1, (9, 2)),
                              rng.uniform(0.1, 1, 2), sigma_psf=0.6)
    h = build_h(geom, optics)
    for _ in range(20):
        f = rng.uniform(0, 2, h.cols)
        v = rng.uniform(0, 2, h.rows)
        lhs = float(matvec(h, f) @ v)
        rhs = float(f @ rmatvec(h, v))
        assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), abs(rhs))


def test_rmatvec_of_ones_is_col_sums():
    geom = ck.GeometryParams(5, 5, 2, 2, 0, 1)
    h = build_h(geom, ck.OpticalParams.unit(2, sigma_psf=0.9))
    np.testing.assert_allclose(rmatvec(h, np.ones(h.rows)), h.col_sums,
                               rtol=1e-12, atol=0)


def test_rmatvec_one_hot_selects_matrix_row(rng):
    geom = ck.GeometryParams(4, 4, 2, 1, 0, 1)
    optics = ck.OpticalParams(rng.uniform(0.2, 1, (9, 2)),
                              rng.uniform(0.2, 1, 2), sigma_psf=0.5)
    h = build_h(geom, optics)
    dense = dense_h(geom, optics)
    for pixel in rng.integers(0, h.rows, 5):
        v = np.zeros(h.rows)
        v[pixel] = 1.0
        np.testing.assert_allclose(rmatvec(h, v), dense[pixel],
                                   rtol=1e-12, atol=1e-15)


def test_col_sums_cache_is_consistent():
    geom = ck.GeometryParams(5, 5, 3, 1, 0, 1)
    h = build_h(geom, ck.OpticalParams.unit(3, sigma_psf=1.2))
    direct = np.asarray(h.matrix.sum(axis=0)).ravel()
    np.testing.assert_allclose(h.col_sums, direct, rtol=1e-9)
    assert (h.matrix.data > 0).all()  # no explicit zeros, no negatives


def test_col_sums_positive_for_positive_sensitivity():
    geom = ck.GeometryParams(4, 4, 3, 1, 0, 1)
    sens = np.ones((9, 3))
    sens[:, 1] = 0.0  # channel 1 is dead
    optics = ck.OpticalParams(sens, np.ones(3))
    h = build_h(geom, optics)
    per_channel = h.col_sums.reshape(4, 4, 3)
    assert (per_channel[:, :, [0, 2]] > 0).all()
    assert not per_channel[:, :, 1].any()


def test_nnz_formula_when_nothing_clips():
    geom = ck.GeometryParams(4, 4, 2, 6, 6, 1)
    optics = ck.OpticalParams.unit(2, sigma_psf=1.0)  # radius 4 < b1, b2
    h = build_h(geom, optics)
    kernel_width = 2 * 4 + 1
    assert h.nnz == h.cols * 9 * kernel_width * kernel_width
    assert estimate_nnz(geom, optics) == h.nnz


def test_memory_guard_refuses_oversized_build():
    geom = ck.GeometryParams(100, 100, 25, 27, 0, 2)
    optics = ck.OpticalParams.unit(25, sigma_psf=1.04)
    with pytest.raises(MemoryError, match="predicted nnz"):
        build_h(geom, optics, nnz_cap=1_000_000)


def test_matrix_market_export_smallest_geometry():
    geom = ck.GeometryParams(1, 1, 1, 0, 0, 1)
    h = build_h(geom, ck.OpticalParams.unit(1))
    buf = io.StringIO()
    ck.export_matrix_market(h, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "%%MatrixMarket matrix coordinate real general"
    assert lines[1] == "9 1 9"
    assert len(lines) == 2 + 9


def test_matrix_market_round_trip_through_scipy(tmp_path, rng):
    geom = ck.GeometryParams(3, 3, 2, 1, 0, 1)
    optics = ck.OpticalParams(rng.uniform(0.1, 1, (9, 2)),
                              rng.uniform(0.1, 1, 2), sigma_psf=0.7)
    h = build_h(geom, optics)
    path = tmp_path / "h.mtx"
    ck.export_matrix_market(h, path)
    back = scipy.io.mmread(path).tocsc()
    assert back.shape == (h.rows, h.cols)
    assert back.nnz == h.nnz
    np.testing.assert_allclose(back.toarray(), h.matrix.toarray(),
                               rtol=0, atol=0)


def test_cache_round_trip(tmp_path, rng):
    from ctiskit.sysmat import cache_key

    geom, optics = random_instance(rng, max_x=5, max_z=3)
    h = build_h(geom, optics)
    path = tmp_path / "h.npz"
    key = cache_key(geom, optics)
    save_h(h, path, key=key)
    back = load_h(path, expected_key=key)
    assert back.side == h.side and back.cube_shape == h.cube_shape
    np.testing.assert_array_equal(back.matrix.toarray(), h.matrix.toarray())
    with pytest.raises(ValueError, match="different parameters"):
        load_h(path, expected_key="deadbeef")


def test_oracle_equivalence_simulator_vs_matrix(rng):
    for _ in range(8):
        geom, optics = random_instance(rng)
        cube = ck.HyperCube(rng.uniform(0, 5, geom.cube_shape))
        sim = ck.simulate(cube, geom, optics, seed=0).ravel()
        via_h = matvec(build_h(geom, optics), cube.ravel())
        scale = np.maximum(np.maximum(np.abs(sim), np.abs(via_h)), 1e-12)
        assert (np.abs(sim - via_h) / scale < 1e-5).all()
