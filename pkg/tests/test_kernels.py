import numpy as np
import pytest

import titeica as tz
from titeica import _kernels


def setup_transport(n=24):
    dom = tz.Domain.torus(1j, n, n)
    rng = np.random.default_rng(4)
    x, y = dom.z.real, dom.z.imag
    A = (rng.normal(size=(3, 3)) * np.sin(2 * np.pi * x)[..., None, None]
         + 0.2j * rng.normal(size=(3, 3)))
    B = (rng.normal(size=(3, 3)) * np.cos(2 * np.pi * y)[..., None, None]).astype(complex)
    t = np.linspace(0.0, 1.0, 4 * n + 1)
    pts = np.stack([n * t, n * t ** 2], axis=-1)   # a curved lattice path
    F0 = np.eye(3, dtype=complex)
    return dom, A.astype(complex), B, pts, F0


def test_backends_agree_exactly():
    if not _kernels.HAS_NUMBA:
        pytest.skip("numba disabled in this session")
    dom, A, B, pts, F0 = setup_transport()
    rec_np = _kernels.transport_polyline(A, B, dom.step1, dom.step2, pts, F0,
                                         row=True, periodic=True,
                                         max_step=dom.hmin / 2,
                                         backend="numpy")
    rec_nb = _kernels.transport_polyline(A, B, dom.step1, dom.step2, pts, F0,
                                         row=True, periodic=True,
                                         max_step=dom.hmin / 2,
                                         backend="numba")
    assert np.array_equal(rec_np, rec_nb)


def test_transport_records_every_vertex():
    dom, A, B, pts, F0 = setup_transport()
    rec = _kernels.transport_polyline(A, B, dom.step1, dom.step2, pts, F0,
                                      row=True, periodic=True,
                                      max_step=dom.hmin / 2)
    assert rec.shape == (pts.shape[0], 3, 3)
    assert np.array_equal(rec[0], F0)
    assert np.isfinite(rec).all()


def test_transport_row_vs_column_transpose():
    dom, A, B, pts, F0 = setup_transport()
    row = _kernels.transport_polyline(A, B, dom.step1, dom.step2, pts, F0,
                                      row=True, periodic=True,
                                      max_step=dom.hmin / 2)
    col = _kernels.transport_polyline(np.swapaxes(A, -1, -2).copy(),
                                      np.swapaxes(B, -1, -2).copy(),
                                      dom.step1, dom.step2, pts, F0,
                                      row=False, periodic=True,
                                      max_step=dom.hmin / 2)
    assert np.abs(row - np.swapaxes(col, -1, -2)).max() < 1e-12


def test_rectangular_state_supported():
    # immersion systems carry (rows x vector-dim) states, e.g. 4x3
    dom, A, B, pts, F0 = setup_transport()
    A4 = np.zeros(dom.shape + (4, 4), dtype=complex)
    A4[..., :3, :3] = A
    B4 = np.zeros_like(A4)
    B4[..., :3, :3] = B
    F0 = np.zeros((4, 3), dtype=complex)
    F0[:3, :3] = np.eye(3)
    rec = _kernels.transport_polyline(A4, B4, dom.step1, dom.step2, pts, F0,
                                      row=True, periodic=True,
                                      max_step=dom.hmin / 2)
    assert rec.shape == (pts.shape[0], 4, 3)
    assert np.isfinite(rec).all()


def test_backend_flag_exported():
    assert _kernels.BACKEND in ("numba", "numpy")
    assert isinstance(_kernels.HAS_NUMBA, bool)
