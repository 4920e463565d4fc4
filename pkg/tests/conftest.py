import numpy as np
import pytest

import titeica as tz


@pytest.fixture(scope="session")
def torus32():
    """Flat 32x32 torus, |c| = 1, hyperbolic affine case, solved by Newton."""
    dom = tz.Domain.torus(1j, 32, 32)
    mu = tz.BackgroundMetric("flat")
    Q = tz.CubicDifferential.constant(1.0)
    case = tz.SignCase(1, -1)
    p = tz.PdeProblem(dom, mu, Q, case)
    rep = tz.solve_newton(p)
    assert rep.converged
    return p, rep.solution


@pytest.fixture(scope="session")
def torus_mesh(torus32):
    p, sol = torus32
    return tz.affine_sphere_immersion(sol, p.Q, lam=-1)


@pytest.fixture(scope="session")
def disk_q0():
    """Poincare disk patch, Q = 0: the solution is u = 0 (hyperboloid data)."""
    dom = tz.Domain.disk_patch(0.7, 32, 32)
    mu = tz.BackgroundMetric("poincare_disk")
    Q = tz.CubicDifferential.constant(0.0)
    p = tz.PdeProblem(dom, mu, Q, tz.SignCase(1, -1))
    rep = tz.solve_newton(p)
    assert rep.converged
    return p, rep.solution


def hyperboloid_mesh(n=24, radius=0.5):
    """Analytic hyperbolic affine sphere x1^2 + x2^2 - x3^2 = -1 over a
    Poincare patch (disk-model parametrization); Blaschke weight psi is the
    Poincare weight (u = 0)."""
    dom = tz.Domain.disk_patch(radius, n, n)
    z = dom.z
    d = 1.0 - np.abs(z) ** 2
    f = np.stack([2 * z.real / d, 2 * z.imag / d, (1 + np.abs(z) ** 2) / d],
                 axis=-1)
    frame = np.stack([dom.dz(f), dom.dzbar(f), f.astype(complex)], axis=-2)
    mesh = tz.ImmersionMesh(dom, f, frame, "affine_sphere", lam=-1)
    mu = tz.BackgroundMetric("poincare_disk")
    sol = tz.MetricSolution(np.zeros(dom.shape), dom, mu)
    mesh.psi = sol.psi
    return mesh, sol
