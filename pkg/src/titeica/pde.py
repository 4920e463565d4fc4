"""Residual assembly and solvers for the six sign cases of

    Delta_mu u + 16 eps ||Q||^2 e^{-2u} + 2 lam e^u - 2 kappa = 0,

the global form of the Tzitzeica-type equation, together with its local
form 2 psi_{z zbar} + eps |Q|^2 e^{-4 psi} + lam e^{2 psi} = 0 and the
complex Toda form they both embed into.

Discretization: centered second differences on the index lattice
(5-point stencil on orthogonal grids, plus a centered cross term on
oblique tori), periodic on tori, Dirichlet on planar domains.  Newton
iterations are damped by a halving line search on the sup norm of the
residual; linear solves are symmetric (after multiplying the equation by
sigma/4) with diagonal preconditioning.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import cg, minres, spsolve

from .errors import InvalidSignCase, NoConstantSolution, SingularInputError
from .geometry import (BackgroundMetric, CubicDifferential, Domain,
                       MetricSolution, SignCase, cubic_norm_sq)

NEWTON_TOL = 1e-10
MONOTONE_TOL = 1e-8
LINEAR_RTOL = 1e-12


@dataclass
class PdeProblem:
    domain: Domain
    mu: BackgroundMetric
    Q: CubicDifferential
    case: SignCase
    boundary: object = 0.0  # Dirichlet data: scalar, or full-grid array (trace used)

    def __post_init__(self):
        if self.domain.periodic:
            if self.Q.kind != "constant":
                raise ValueError("only constant cubic differentials live on a torus")
            if self.mu.curvature_kind != "flat":
                raise ValueError("torus problems use a flat background metric")

    @property
    def boundary_field(self):
        return np.broadcast_to(np.asarray(self.boundary, dtype=float),
                               self.domain.shape)

    @property
    def sigma(self):
        return self.mu.sigma(self.domain.z)

    @property
    def kappa(self):
        return self.mu.curvature(self.domain.z)

    @property
    def qnorm2(self):
        return cubic_norm_sq(self.Q, self.mu, self.domain.z)


def _nonlinear(p, u):
    # overflow on wildly diverging iterates yields inf residuals, which the
    # line search rejects; keep that path silent
    with np.errstate(over="ignore"):
        return (16.0 * p.case.epsilon * p.qnorm2 * np.exp(-2.0 * u)
                + 2.0 * p.case.lam * np.exp(u) - 2.0 * p.kappa)


def _nonlinear_deriv(p, u):
    return (-32.0 * p.case.epsilon * p.qnorm2 * np.exp(-2.0 * u)
            + 2.0 * p.case.lam * np.exp(u))


def residual_global(u, p):
    """Nodewise residual of the global equation, Delta_mu = (4/sigma) d2/dz dzbar."""
    lap = 4.0 / p.sigma * p.domain.dzzbar(u)
    return lap + _nonlinear(p, u)


def residual_local(psi, Q, case, domain):
    """Nodewise residual of 2 psi_{z zbar} + eps |Q|^2 e^{-4 psi} + lam e^{2 psi}."""
    q = Q(domain.z)
    return (2.0 * domain.dzzbar(psi)
            + case.epsilon * np.abs(q) ** 2 * np.exp(-4.0 * psi)
            + case.lam * np.exp(2.0 * psi))


def toda_residual_complex(a, Qf, Rf, lam, domain):
    """Residual of d^2/dz dw log(a^2) + lam a^2 + Q R a^{-4} with w = zbar.

    With a = e^psi and R = +/- conj(Q) this reduces to residual_local for
    the four lam = +/-1 cases.
    """
    a = np.asarray(a, dtype=complex)
    if np.any(a == 0):
        raise SingularInputError("Toda variable a vanishes at a node")
    la = domain.dzzbar(np.log(a ** 2))
    return la + lam * a ** 2 + np.asarray(Qf) * np.asarray(Rf) * a ** (-4.0)


def constant_solution(c, case):
    """u = (1/3) log(8 |c|^2) on the flat torus; only solvable for eps*lam = -1."""
    c = complex(c)
    if case.epsilon * case.lam != -1 or c == 0:
        raise NoConstantSolution(
            f"no constant solution for case {case.geometry_tag} with c={c}")
    return np.log(8.0 * abs(c) ** 2) / 3.0


def cubic_supersolution_root(max8q2):
    """Positive root m of x^3 - x^2 - M = 0, M = max 8||Q||^2;  m >= 1."""
    M = float(max8q2)
    if M < 0:
        raise ValueError("M must be nonnegative")
    if M == 0.0:
        return 1.0
    hi = 1.0 + M ** (1.0 / 3.0) + 1e-9
    return brentq(lambda x: x ** 3 - x ** 2 - M, 1.0, hi, xtol=1e-15, rtol=1e-15)


def supersolution_bound(p):
    """log m for the sub/supersolution bracket [0, log m] of the hyperbolic
    affine sphere equation on a kappa = -1 background."""
    if (p.case.epsilon, p.case.lam) != (1, -1):
        raise InvalidSignCase("supersolution bound requires (eps, lam) = (1, -1)")
    if p.mu.curvature_kind != "poincare_disk":
        raise InvalidSignCase("supersolution bound assumes a kappa = -1 background")
    m = cubic_supersolution_root(np.max(8.0 * p.qnorm2))
    return np.log(m)


def scaling_shift(u, delta):
    """v = u - log(delta), delta > 0."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return np.asarray(u) - np.log(delta)


def residual_scaled(v, p, delta):
    """Residual of the delta-scaled equation
    Delta v + 16 eps ||Q||^2 delta^{-2} e^{-2v} + 2 lam delta e^v - 2 kappa,
    which v = u - log(delta) satisfies exactly when u solves the original."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    lap = 4.0 / p.sigma * p.domain.dzzbar(v)
    return (lap + 16.0 * p.case.epsilon * p.qnorm2 * delta ** -2 * np.exp(-2.0 * v)
            + 2.0 * p.case.lam * delta * np.exp(v) - 2.0 * p.kappa)


# -- discrete operators ----------------------------------------------------

def _second_diff_matrix(n, periodic):
    D = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="lil")
    if periodic:
        D[0, n - 1] = 1.0
        D[n - 1, 0] = 1.0
    return D.tocsr()

def _centered_diff_matrix(n, periodic):
    C = sp.diags([-0.5, 0.5], [-1, 1], shape=(n, n), format="lil")
    if periodic:
        C[0, n - 1] = -0.5
        C[n - 1, 0] = 0.5
    return C.tocsr()


def dzzbar_matrix(domain):
    """Sparse matrix of the d^2/dz dzbar stencil on the flattened grid.
    Edge rows of planar grids are not meaningful (they are sliced away by
    the Dirichlet restriction)."""
    n, m = domain.shape
    s1, s2 = domain.step1, domain.step2
    den = 4.0 * ((s1 * np.conj(s2)).imag) ** 2
    D1 = _second_diff_matrix(n, domain.periodic)
    D2 = _second_diff_matrix(m, domain.periodic)
    In, Im = sp.identity(n), sp.identity(m)
    L = (abs(s2) ** 2 * sp.kron(D1, Im) + abs(s1) ** 2 * sp.kron(In, D2))
    cross = (s1 * np.conj(s2)).real
    if abs(cross) > 0:
        C1 = _centered_diff_matrix(n, domain.periodic)
        C2 = _centered_diff_matrix(m, domain.periodic)
        L = L - 2.0 * cross * sp.kron(C1, C2)
    return (L / den).tocsr()


def _sym_solve(J, rhs, spd=False):
    d = J.diagonal()
    M = sp.diags(1.0 / np.maximum(np.abs(d), 1e-300))
    if spd:
        x, info = cg(J, rhs, M=M, rtol=LINEAR_RTOL, atol=0.0,
                     maxiter=20 * rhs.size)
    else:
        x, info = minres(J, rhs, M=M, rtol=LINEAR_RTOL,
                         maxiter=20 * rhs.size)
    if info != 0:
        x = spsolve(J.tocsc(), rhs)
    return x


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_inf: float
    solution: MetricSolution
    info: dict = field(default_factory=dict)


class _System:
    """Shared sparse pieces for a problem: stencil matrix and interior index."""

    def __init__(self, p):
        self.p = p
        self.L = dzzbar_matrix(p.domain)
        n, m = p.domain.shape
        self.interior = np.flatnonzero(p.domain.interior_mask.ravel())
        self.L_int = self.L[np.ix_(self.interior, self.interior)].tocsr()
        self.w = (p.sigma / 4.0).ravel()[self.interior]  # symmetrizing weight

    def rinf(self, F):
        return float(np.max(np.abs(F.ravel()[self.interior])))


def _apply_boundary(p, u):
    if not p.domain.periodic:
        u = u.copy()
        mask = p.domain.boundary_mask
        u[mask] = p.boundary_field[mask]
    return u


def solve_newton(p, u0=None, tol=NEWTON_TOL, max_iter=100):
    """Damped Newton for the global equation.  Returns the best iterate with
    converged=False after max_iter or a stalled line search."""
    n, m = p.domain.shape
    u = np.zeros((n, m)) if u0 is None else np.broadcast_to(
        np.asarray(u0, dtype=float), (n, m)).copy()
    u = _apply_boundary(p, u)
    sys_ = _System(p)
    F = residual_global(u, p)
    rinf = sys_.rinf(F)
    it = 0
    converged = rinf <= tol
    while not converged and it < max_iter:
        gp = _nonlinear_deriv(p, u).ravel()[sys_.interior]
        shift = sys_.w * gp
        J = (sys_.L_int + sp.diags(shift)).tocsr()
        rhs = -(sys_.w * F.ravel()[sys_.interior])
        spd_neg = np.all(shift < 0)
        if spd_neg:
            delta = _sym_solve((-J).tocsr(), -rhs, spd=True)
        else:
            delta = _sym_solve(J, rhs, spd=False)
        t = 1.0
        accepted = False
        for _ in range(40):
            u_try = u.copy()
            u_try.ravel()[sys_.interior] += t * delta
            F_try = residual_global(u_try, p)
            r_try = sys_.rinf(F_try)
            if r_try < rinf:
                u, F, rinf = u_try, F_try, r_try
                accepted = True
                break
            t *= 0.5
        it += 1
        if not accepted:
            break
        converged = rinf <= tol
    sol = MetricSolution(u, p.domain, p.mu)
    return SolveReport(bool(converged), it, rinf, sol, {"tol": tol})


def solve_monotone(p, tol=MONOTONE_TOL, max_iter=400):
    """Monotone (sub/supersolution) iteration for the hyperbolic affine
    sphere case.  Iterates increase from the subsolution and stay below the
    supersolution; the shift constant is sup |dG/du| + 1 on the current
    bracket."""
    if (p.case.epsilon, p.case.lam) != (1, -1):
        raise InvalidSignCase("monotone iteration requires (eps, lam) = (1, -1)")
    n, m = p.domain.shape
    if p.domain.periodic:
        uc = constant_solution(p.Q.c, p.case)
        sub, super_ = uc - 1.0, uc + 1.0
    else:
        if p.mu.curvature_kind != "poincare_disk":
            raise InvalidSignCase("planar monotone iteration assumes kappa = -1")
        if np.any(p.boundary_field != 0.0):
            raise InvalidSignCase("monotone bracket [0, log m] needs boundary 0")
        sub, super_ = 0.0, supersolution_bound(p)
    u = np.full((n, m), sub)
    u = _apply_boundary(p, u)
    sys_ = _System(p)
    super_field = np.full((n, m), super_)
    history = {"min_step": [], "max_u": [], "min_u": []}
    F = residual_global(u, p)
    rinf = sys_.rinf(F)
    it = 0
    converged = rinf <= tol
    while not converged and it < max_iter:
        gmag = np.maximum(np.abs(_nonlinear_deriv(p, u)),
                          np.abs(_nonlinear_deriv(p, super_field)))
        shift = float(np.max(gmag)) + 1.0
        A = (sp.diags(sys_.w * shift) - sys_.L_int).tocsr()
        rhs = sys_.w * F.ravel()[sys_.interior]
        delta = _sym_solve(A, rhs, spd=True)
        u.ravel()[sys_.interior] += delta
        history["min_step"].append(float(delta.min()))
        history["max_u"].append(float(u.max()))
        history["min_u"].append(float(u.min()))
        F = residual_global(u, p)
        rinf = sys_.rinf(F)
        it += 1
        converged = rinf <= tol
    sol = MetricSolution(u, p.domain, p.mu)
    info = {"tol": tol, "bracket": (float(sub), float(super_)),
            "history": history}
    return SolveReport(bool(converged), it, rinf, sol, info)


def ch2_continuation_bound(Q0, mu, domain):
    """Lower bound (3 sqrt(6) sup ||Q0||_mu)^{-1} on the continuation range
    of the CH2 equation."""
    sup = float(np.max(np.sqrt(cubic_norm_sq(Q0, mu, domain.z))))
    if sup == 0:
        return np.inf
    return 1.0 / (3.0 * np.sqrt(6.0) * sup)


@dataclass
class ContinuationResult:
    t_grid: list
    reports: list
    failure_index: int | None

    @property
    def converged_all(self):
        return self.failure_index is None


def continuation_family(p0, Q0, t_grid, tol=NEWTON_TOL, max_iter=100):
    """Solve along Q = t Q0 for increasing t, seeding each Newton solve with
    the previous solution.  Stops at the first failure (failure is data,
    not an exception)."""
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])) or t_grid[0] < 0:
        raise ValueError("t_grid must be increasing and start at t >= 0")
    reports = []
    seed = None
    failure = None
    for i, t in enumerate(t_grid):
        pt = PdeProblem(p0.domain, p0.mu, Q0.scaled(t), p0.case, p0.boundary)
        rep = solve_newton(pt, seed, tol=tol, max_iter=max_iter)
        reports.append(rep)
        if not rep.converged:
            failure = i
            break
        seed = rep.solution.u
    return ContinuationResult(t_grid[:len(reports)], reports, failure)
