import numpy as np
import pytest

import titeica as tz
from titeica.errors import DegenerateVertexError
from tests.conftest import hyperboloid_mesh

HYP = tz.SignCase(1, -1)


# -- develop_rp2 --------------------------------------------------------------

def test_develop_point_examples():
    assert np.allclose(tz.normalize_rp2(np.array([0.0, 0.0, 1.0])), [0, 0, 1])
    # sign convention: first nonzero coordinate positive
    assert np.allclose(tz.normalize_rp2(np.array([0.0, -2.0, 1.0])),
                       [0, 2 / np.sqrt(5), -1 / np.sqrt(5)])
    with pytest.raises(DegenerateVertexError):
        tz.normalize_rp2(np.zeros(3))


def test_develop_hyperboloid_inside_disk():
    mesh, _ = hyperboloid_mesh(24, radius=0.5)
    pts = tz.develop_rp2(mesh)
    chart = pts[..., :2] / pts[..., 2:3]
    r = np.linalg.norm(chart, axis=-1)
    # the Klein-model image of the |z| <= 0.5 patch reaches 2r/(1+r^2) = 0.8
    assert r.max() <= 0.8 + 1e-9
    assert r.max() > 0.5


def test_develop_titeica_inside_triangle(torus_mesh):
    dev = tz.develop_rp2(torus_mesh)
    w = np.exp(2j * np.pi / 3)
    V = np.array([[w ** (i * k) for k in range(3)] for i in range(3)])
    f0, xi0, a = torus_mesh.meta["init"]
    R = (np.diag(V[2]) @ np.linalg.inv(V) @ np.stack([a, np.conj(a), xi0])).real
    coords = np.einsum("ij,nmj->nmi", np.linalg.inv(R.T), dev)
    sgn = np.sign(coords[..., :1])
    assert ((coords * sgn) > 0).all()   # inside the cone cross-section


def test_develop_equivariance(torus32, torus_mesh):
    # dev(hol . f) = hol . dev(f) as projective points
    p, sol = torus32
    al = tz.build_connection(sol.psi, p.Q, HYP, p.domain, zeta=1.0)
    H = tz.holonomy(al, tz.torus_generator(p.domain, 0)).real
    moved = np.einsum("ij,nmj->nmi", H, torus_mesh.vertices)
    lhs = tz.normalize_rp2(moved)
    rhs = tz.normalize_rp2(np.einsum("ij,nmj->nmi", H,
                                     tz.develop_rp2(torus_mesh)))
    assert np.abs(lhs - rhs).max() < 1e-10


# -- quadric fitting -----------------------------------------------------------

def test_quadric_fit_exact_hyperboloid():
    rng = np.random.default_rng(2)
    t = rng.uniform(-1, 1, size=(60, 2))
    pts = np.stack([np.sinh(t[:, 0]) * np.cos(3 * t[:, 1]),
                    np.sinh(t[:, 0]) * np.sin(3 * t[:, 1]),
                    np.cosh(t[:, 0])], axis=-1)
    fit = tz.quadric_fit(pts)
    assert fit.residual <= 1e-12
    assert fit.signature == (2, 1)


def test_quadric_fit_separates_cubic_surface(disk_q0, torus_mesh):
    p, sol = disk_q0
    mesh0 = tz.affine_sphere_immersion(sol, p.Q, lam=-1)
    r0 = tz.quadric_fit(mesh0.vertices.reshape(-1, 3)).residual
    r1 = tz.quadric_fit(torus_mesh.vertices.reshape(-1, 3)).residual
    assert r1 >= 100.0 * r0


def test_quadric_fit_needs_nine_points():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        tz.quadric_fit(rng.normal(size=(8, 3)))
    with pytest.raises(DegenerateVertexError):
        # coplanar points do not pin down a quadric
        pts = np.zeros((20, 3))
        pts[:, 0] = rng.normal(size=20)
        pts[:, 1] = rng.normal(size=20)
        tz.quadric_fit(pts)


def test_quadric_fit_unimodular_invariance():
    rng = np.random.default_rng(2)
    t = rng.uniform(-1, 1, size=(80, 2))
    pts = np.stack([np.sinh(t[:, 0]) * np.cos(3 * t[:, 1]),
                    np.sinh(t[:, 0]) * np.sin(3 * t[:, 1]),
                    np.cosh(t[:, 0])], axis=-1)
    pts += 1e-4 * rng.normal(size=pts.shape)   # off-quadric noise
    L = np.array([[1.0, 0.2, 0.0], [0.0, 1.0, -0.1], [0.1, 0.0, 1.0]])
    L /= np.linalg.det(L) ** (1 / 3)
    r0 = tz.quadric_fit(pts).residual
    r1 = tz.quadric_fit(pts @ L.T).residual
    assert r1 / r0 < 10.0 and r0 / r1 < 10.0


# -- holonomy report ----------------------------------------------------------

def test_holonomy_report_trivial_loop(torus32):
    p, sol = torus32
    al = tz.build_connection(sol.psi, p.Q, HYP, p.domain, zeta=1.0)
    rep = tz.holonomy_report(al, [tz.cell_loop(p.domain, 2, 2)])
    ev = rep["loops"][0]["eigenvalues"]
    assert np.abs(ev - 1.0).max() <= 1e-3
    assert rep["loops"][0]["det_drift"] <= 1e-9


def test_holonomy_report_generators(torus32):
    p, sol = torus32
    al = tz.build_connection(sol.psi, p.Q, HYP, p.domain, zeta=1.0)
    rep = tz.holonomy_report(al, [tz.torus_generator(p.domain, 0),
                                  tz.torus_generator(p.domain, 1)])
    assert rep["commutators"].max() <= 1e-8
    for entry in rep["loops"]:
        assert entry["det_drift"] <= 1e-8
        assert entry["eigenvalue_product_drift"] <= 1e-8
        ev = entry["eigenvalues"]
        assert np.abs(ev[0]) >= np.abs(ev[1]) - 1e-9
        assert np.abs(ev[1]) >= np.abs(ev[2]) - 1e-9


def test_holonomy_report_unipotent_model():
    # a constant nilpotent dz-part realizes the unipotent x -> [[1,1],[0,1]] x
    # model around a torus generator: reported with all eigenvalues 1
    dom = tz.Domain.torus(1j, 16, 16)
    N = np.zeros((3, 3), dtype=complex)
    N[0, 1] = 1.0
    A = np.broadcast_to(N, dom.shape + (3, 3)).copy()
    B = np.zeros_like(A)
    al = tz.ConnectionForm(A, B, "row_frame", dom)
    rep = tz.holonomy_report(al, [tz.torus_generator(dom, 0)])
    H = rep["loops"][0]["matrix"]
    assert np.abs(H - (np.eye(3) + N)).max() < 1e-12
    assert np.abs(rep["loops"][0]["eigenvalues"] - 1.0).max() < 1e-6


# -- semi-flat development -------------------------------------------------------

def parabolic_mesh(n=24):
    dom = tz.Domain.rectangle(0.8, 0.8, n, n)
    mu = tz.BackgroundMetric("flat")
    sol = tz.MetricSolution(np.full(dom.shape, np.log(2.0)), dom, mu)
    return tz.affine_sphere_immersion(sol, tz.CubicDifferential.constant(0.0),
                                      lam=0)


def test_semiflat_paraboloid_self_dual():
    mesh = parabolic_mesh()
    sf = tz.semiflat_develop(mesh)
    # f = (x, |x|^2/2) up to scaling: phi* = |y|^2/2, self-dual
    assert np.abs(sf.ma_residual[1:-1, 1:-1]).max() < 1e-10
    x2 = 0.5 * np.sum(sf.x ** 2, axis=-1)
    y2 = 0.5 * np.sum(sf.y ** 2, axis=-1)
    inner = (slice(1, -1), slice(1, -1))
    assert np.abs(sf.phi - x2)[inner].max() < 1e-10
    assert np.abs(sf.phi_star - y2)[inner].max() < 1e-9
    # Legendre pairing invariants
    dot = np.sum(sf.x * sf.y, axis=-1)
    assert np.abs(sf.phi + sf.phi_star - dot)[inner].max() < 1e-9
    assert tz.semiflat_dual_roundtrip(sf) < 1e-9


def test_semiflat_from_weierstrass():
    pair = tz.HoloPair.from_coeffs([0.0, 0.0, 0.15], [0.0, 1.0, 0.0, 0.04])
    vals = {}
    for n in (24, 48):
        dom = tz.Domain.rectangle(1.0, 1.0, n, n)
        mesh = tz.parabolic_from_holomorphic(pair, dom)
        sf = tz.semiflat_develop(mesh)
        vals[n] = np.abs(sf.ma_residual[2:-2, 2:-2]).max()
        assert vals[n] <= 40.0 * dom.hmax ** 2
        assert tz.semiflat_dual_roundtrip(sf) <= 200.0 * dom.hmax ** 2
    assert vals[24] / vals[48] > 2.5


def test_semiflat_rejects_proper(torus_mesh):
    with pytest.raises(Exception):
        tz.semiflat_develop(torus_mesh)
