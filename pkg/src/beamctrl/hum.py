"""Control synthesis by minimizing the weighted quadratic functional.

The trajectory is split as beta = theta1 * q + g with a smooth time cutoff
theta1 (one near t = 0, zero near t = T): q evolves freely from the data, and
g starts from rest, is forced by the cutoff commutator source f, and must be
steered to zero.  The control comes from minimizing

    J(psi) = 1/2 int |L psi|^2 e^{-2 s phi}
           + (s^7 lam^8 / 2) int chi_omega xi^7 |psi|^2 e^{-2 s phi}
           - int f psi,
    L = dtt + dtxx + dxxxx + a   (adjoint damping sign),

over space-time fields psi.  Discretely, L is spectral in x and a 4th-order
stencil in t (one-sided closures at the grid edges); the normal operator uses
the exact stencil transpose, so the discrete system is symmetric positive
definite up to the Tikhonov term and is solved by conjugate gradients.  The
minimizer yields the weighted residual g_tilde = e^{-2 s phi} L psi_min and
the control v = -s^7 lam^8 xi^7 chi_omega psi_min e^{-2 s phi}, which is then
validated by forward simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg
from scipy.interpolate import CubicSpline

from ._bumps import smoothstep
from .dynamics import BeamTrajectory, Potential, solve_forward
from .torus import SpatialGrid, TimeGrid
from .weights import CarlemanParams, DomainSpec, EtaProfile, ThetaProfile, \
    WeightField


class CGConvergenceError(RuntimeError):
    """Conjugate gradients missed the tolerance; carries the residual trail."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


# time cutoff ----------------------------------------------------------------

@dataclass(frozen=True)
class Theta1Cutoff:
    """C-infinity cutoff: 1 on [0, r0 T], 0 on [r1 T, T], smoothstep between."""

    T: float
    r0: float
    r1: float

    @property
    def band(self) -> tuple[float, float]:
        return (self.r0 * self.T, self.r1 * self.T)

    def eval(self, t: np.ndarray, order: int = 0) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.band
        u = (t - a) / (b - a)
        vals = -smoothstep(u, order) / (b - a) ** order
        if order == 0:
            vals = 1.0 + vals
        return vals


def build_theta1(T: float, r0: float = 0.3, r1: float = 0.7) -> Theta1Cutoff:
    if not 0.0 < r0 < r1 < 1.0:
        raise ValueError("plateau fractions must satisfy 0 < r0 < r1 < 1")
    return Theta1Cutoff(T=T, r0=r0, r1=r1)


# free evolution and commutator source ---------------------------------------

def solve_free_q(grid: SpatialGrid, beta0: np.ndarray, beta1: np.ndarray,
                 times: np.ndarray, a: Potential | None = None
                 ) -> BeamTrajectory:
    """Uncontrolled, unforced forward evolution of the data."""
    return solve_forward(grid, beta0, beta1, times, a=a)


@dataclass(frozen=True)
class HumSource:
    """Cutoff commutator source f = -theta1'' q - 2 theta1' q_t + theta1' q_xx.

    Identically zero outside the cutoff transition band, since every term
    carries a theta1 derivative.
    """

    values: np.ndarray
    t_nodes: np.ndarray
    band: tuple[float, float]


def assemble_source(theta1: Theta1Cutoff, q: BeamTrajectory) -> HumSource:
    th1 = theta1.eval(q.times, 1)[:, None]
    th2 = theta1.eval(q.times, 2)[:, None]
    q_xx = q.grid.deriv(q.beta, 2)
    vals = -th2 * q.beta - 2.0 * th1 * q.beta_t + th1 * q_xx
    return HumSource(values=vals, t_nodes=np.array(q.times), band=theta1.band)


# time stencils ---------------------------------------------------------------

def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for derivatives 0..m at z from nodes x."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def time_stencil(n: int, dt: float, order: int) -> sparse.csr_matrix:
    """4th-order derivative matrix in time on a uniform interior grid.

    Centered 5-point stencils inside; one-sided stencils of the same order at
    the edges (5 nodes for the first derivative, 6 for the second).
    """
    if order not in (1, 2):
        raise ValueError("only first and second time derivatives are used")
    width = 5 if order == 1 else 6
    if n < width + 2:
        raise ValueError(f"need at least {width + 2} time nodes")
    D = sparse.lil_matrix((n, n))
    centered = fd_weights(0.0, dt * np.arange(-2, 3), order)[:, order]
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = centered
    for i in (0, 1):
        D[i, :width] = fd_weights(i * dt, dt * np.arange(width), order)[:, order]
    for i in (n - 2, n - 1):
        offs = n - width
        D[i, offs:] = fd_weights(
            (i - offs) * dt, dt * np.arange(width), order)[:, order]
    return D.tocsr()


# quadratic system ------------------------------------------------------------

@dataclass
class QuadraticSystem:
    """Matrix-free normal operator of the functional and its right-hand side.

    apply(psi) computes  L^T M W1 L psi + M W2 psi + eps psi  with M the
    space-time quadrature weights; the transpose of L uses exact stencil
    transposes, so apply is symmetric to machine precision.
    """

    grid: SpatialGrid
    t_grid: TimeGrid
    weights: WeightField
    Dt: sparse.csr_matrix
    Dtt: sparse.csr_matrix
    a_vals: np.ndarray | None
    W1: np.ndarray
    W2: np.ndarray
    M: np.ndarray
    eps: float
    rhs: np.ndarray
    source: HumSource
    norm_estimate: float

    def apply_L(self, psi: np.ndarray) -> np.ndarray:
        out = self.Dtt @ psi + self.Dt @ self.grid.deriv(psi, 2) \
            + self.grid.deriv(psi, 4)
        if self.a_vals is not None:
            out = out + self.a_vals * psi
        return out

    def apply_Lt(self, u: np.ndarray) -> np.ndarray:
        out = self.Dtt.T @ u + self.grid.deriv(self.Dt.T @ u, 2) \
            + self.grid.deriv(u, 4)
        if self.a_vals is not None:
            out = out + self.a_vals * u
        return out

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.apply_Lt(self.M * self.W1 * self.apply_L(psi))
        out += self.M * self.W2 * psi
        out += self.eps * psi
        return out

    def quadratic_value(self, psi: np.ndarray) -> float:
        """The functional J at psi, without the Tikhonov term."""
        lp = self.apply_L(psi)
        quad = 0.5 * np.sum(self.M * (self.W1 * lp**2 + self.W2 * psi**2))
        return float(quad - np.sum(self.rhs * psi))

    def control_from(self, psi: np.ndarray) -> np.ndarray:
        return -self.W2 * psi

    def residual_field_from(self, psi: np.ndarray) -> np.ndarray:
        return self.W1 * self.apply_L(psi)


def _operator_norm_estimate(apply, shape, seed: int = 1234,
                            iters: int = 12) -> float:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.sqrt(np.sum(x * x))
    est = 1.0
    for _ in range(iters):
        y = apply(x)
        est = float(np.sqrt(np.sum(y * y)))
        if est == 0.0:
            return 1.0
        x = y / est
    return est


def assemble_hum_system(grid: SpatialGrid, t_grid: TimeGrid, w: WeightField,
                        f: HumSource, a_vals: np.ndarray | None = None,
                        eps_scale: float = 1e-14) -> QuadraticSystem:
    """Build the discrete normal equations of the functional.

    The right-hand side is the plain quadrature pairing of the commutator
    source against psi (no exponential weight).  The Tikhonov level is
    eps_scale times a power-iteration estimate of the operator norm; it must
    stay tiny because the terminal residual of the verified control scales
    linearly with it (measured: eps_scale 1e-10 already caps the suppression
    ratio near 3e-2).
    """
    if eps_scale < 0:
        raise ValueError("eps_scale must be nonnegative")
    n_t = t_grid.n
    dt = float(t_grid.nodes[1] - t_grid.nodes[0])
    Dt = time_stencil(n_t, dt, 1)
    Dtt = time_stencil(n_t, dt, 2)

    W1 = w.kernel(0.0)
    chi = w.domain.in_omega(w.x_nodes).astype(float)
    W2 = (w.params.s**7 * w.params.lam**8) * chi[None, :] * w.kernel(7.0)
    M = w.quad_weights()
    if f.values.shape != (n_t, grid.n):
        raise ValueError("source not sampled on the system grid")

    sys = QuadraticSystem(
        grid=grid, t_grid=t_grid, weights=w, Dt=Dt, Dtt=Dtt, a_vals=a_vals,
        W1=W1, W2=W2, M=M, eps=0.0, rhs=M * f.values, source=f,
        norm_estimate=0.0,
    )
    est = _operator_norm_estimate(sys.apply, (n_t, grid.n))
    sys.norm_estimate = est
    sys.eps = eps_scale * est
    return sys


class FdSurrogatePreconditioner:
    """Direct factorization of a finite-difference surrogate of the operator.

    The surrogate keeps the exact weights, quadrature, potential, indicator
    and time stencils, and only replaces the spectral x-derivatives by
    4th-order periodic differences (with the bilaplacian as the square of the
    FD laplacian).  The two operators are spectrally equivalent with a
    modest constant, so PCG converges in a few dozen iterations.  The sparse
    space-time matrix is factorized once; being a preconditioner, it affects
    iteration counts only, never the solution.
    """

    def __init__(self, sys: QuadraticSystem):
        grid, n_t = sys.grid, sys.t_grid.n
        nx, h = grid.n, grid.h
        data, rows, cols = [], [], []
        for off, val in ((0, -2.5), (1, 4.0 / 3), (-1, 4.0 / 3),
                         (2, -1.0 / 12), (-2, -1.0 / 12)):
            rows.extend(range(nx))
            cols.extend((np.arange(nx) + off) % nx)
            data.extend([val / h**2] * nx)
        Dxx = sparse.csr_matrix((data, (rows, cols)), shape=(nx, nx))
        Dx4 = (Dxx @ Dxx).tocsr()

        L = sparse.kron(sys.Dtt, sparse.identity(nx, format="csr")) \
            + sparse.kron(sys.Dt, Dxx) \
            + sparse.kron(sparse.identity(n_t, format="csr"), Dx4)
        if sys.a_vals is not None:
            L = L + sparse.diags(sys.a_vals.ravel())
        W = sparse.diags((sys.M * sys.W1).ravel())
        A = (L.T @ W @ L) + sparse.diags((sys.M * sys.W2).ravel()) \
            + sys.eps * sparse.identity(n_t * nx)
        self._lu = sparse.linalg.splu(A.tocsc())
        self._shape = (n_t, nx)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self._lu.solve(r.ravel()).reshape(self._shape)


@dataclass(frozen=True)
class HumSolution:
    """Minimizer, derived fields, and solver diagnostics."""

    psi_min: np.ndarray
    g_tilde: np.ndarray
    v: np.ndarray
    J_value: float
    residual_history: list[float]
    iterations: int
    relative_residual: float
    eps: float


def minimize_J(sys: QuadraticSystem, tol: float = 1e-10,
               max_iter: int = 5000, precondition: bool = True
               ) -> HumSolution:
    """Conjugate-gradient solve of the normal equations to relative tol.

    Raises CGConvergenceError (with the residual history attached) when the
    tolerance is not reached; that signals ill-conditioning and the remedy is
    a larger eps or smaller s.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = sys.rhs
    b_norm = float(np.sqrt(np.sum(b * b)))
    if b_norm == 0.0:
        zero = np.zeros_like(b)
        return HumSolution(psi_min=zero, g_tilde=zero, v=zero, J_value=0.0,
                           residual_history=[0.0], iterations=0,
                           relative_residual=0.0, eps=sys.eps)

    pre = FdSurrogatePreconditioner(sys) if precondition else None
    x = np.zeros_like(b)
    r = b.copy()
    z = pre.apply(r) if pre else r
    p = z.copy()
    rz = float(np.sum(r * z))
    history = [1.0]
    for it in range(1, max_iter + 1):
        Ap = sys.apply(p)
        alpha = rz / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        rel = float(np.sqrt(np.sum(r * r))) / b_norm
        history.append(rel)
        if rel <= tol:
            break
        z = pre.apply(r) if pre else r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise CGConvergenceError(
            f"CG did not reach tol {tol:g} in {max_iter} iterations "
            f"(residual {history[-1]:.3e})", history)

    return HumSolution(
        psi_min=x,
        g_tilde=sys.residual_field_from(x),
        v=sys.control_from(x),
        J_value=sys.quadratic_value(x),
        residual_history=history,
        iterations=len(history) - 1,
        relative_residual=history[-1],
        eps=sys.eps,
    )


# a-posteriori verification ---------------------------------------------------

def control_weight_factor(eta: EtaProfile, theta: ThetaProfile,
                          params: CarlemanParams, x_nodes: np.ndarray,
                          t_interior: np.ndarray) -> np.ndarray:
    """s^7 lam^8 chi_omega xi^7 e^{-2 s phi} at arbitrary interior times."""
    ed = eta.derivs(x_nodes, max_order=0)[:, 0]
    m = eta.eta_max
    lam, s = params.lam, params.s
    th = theta.eval(t_interior, 0)[:, None]
    log_xi = np.log(th) + lam * (ed + 4.0 * m)[None, :]
    phi = th * (np.exp(6.0 * lam * m) - np.exp(lam * (ed + 4.0 * m))[None, :])
    return (s**7 * lam**8) * np.exp(7.0 * log_xi - 2.0 * s * phi)


def control_on_times(sol: HumSolution, sys: QuadraticSystem,
                     eta: EtaProfile, theta: ThetaProfile,
                     times: np.ndarray) -> np.ndarray:
    """Sample the control on a trajectory time grid.

    The minimizer is interpolated in time by a cubic spline; the exponential
    weight factor is evaluated analytically.  Rows at t = 0 and t = T are
    exactly zero (the weight vanishes there), as are all nodes outside omega.
    """
    times = np.asarray(times, dtype=float)
    T = sys.t_grid.T
    spline = CubicSpline(sys.t_grid.nodes, sol.psi_min, axis=0)
    interior = (times > 0.0) & (times < T)
    out = np.zeros((times.size, sys.grid.n))
    factor = control_weight_factor(eta, theta, sys.weights.params,
                                   sys.grid.nodes, times[interior])
    chi = sys.weights.domain.in_omega(sys.grid.nodes).astype(float)
    out[interior] = -factor * spline(times[interior]) * chi[None, :]
    return out


@dataclass(frozen=True)
class TerminalReport:
    """Forward-verification summary for one synthesized control."""

    controlled_terminal: float
    uncontrolled_terminal: float
    suppression_ratio: float
    control_l2: float
    data_norm: float
    bound_ratio: float
    g_terminal: float
    superposition_defect: float
    cutoff_consistency_defect: float
    support_ok: bool

    def rows(self):
        yield ("controlled_terminal_norm", self.controlled_terminal)
        yield ("uncontrolled_terminal_norm", self.uncontrolled_terminal)
        yield ("suppression_ratio", self.suppression_ratio)
        yield ("control_l2_norm", self.control_l2)
        yield ("data_norm_h3_h1", self.data_norm)
        yield ("control_bound_ratio", self.bound_ratio)
        yield ("g_terminal_norm", self.g_terminal)
        yield ("superposition_defect", self.superposition_defect)
        yield ("cutoff_consistency_defect", self.cutoff_consistency_defect)
        yield ("control_support_in_omega", int(self.support_ok))


def _pair_sup_norm(grid: SpatialGrid, beta: np.ndarray, beta_t: np.ndarray
                   ) -> float:
    return float(np.max(np.sqrt(grid.l2_sq(beta) + grid.l2_sq(beta_t))))


def verify_null_control(grid: SpatialGrid, domain: DomainSpec,
                        beta0: np.ndarray, beta1: np.ndarray,
                        theta1: Theta1Cutoff, sol: HumSolution,
                        sys: QuadraticSystem, eta: EtaProfile,
                        theta: ThetaProfile,
                        a_sampler=None, n_steps: int = 2048
                        ) -> tuple[TerminalReport, dict[str, BeamTrajectory]]:
    """Forward-simulate the control and audit the decomposition.

    Four runs share one integrator and one set of source samples: the
    controlled and uncontrolled beam, the cutoff subsystem (driven by -f),
    and the g system (zero data, driven by v + f).  Discrete linearity makes
    `controlled = cutoff_run + g_run` an exact identity; the reported
    superposition defect only measures floating-point noise.  The pointwise
    product theta1(t) q(t) differs from the cutoff run by the time-stepper's
    product-rule error and is reported separately as a consistency
    diagnostic.
    """
    if domain.T != sys.t_grid.T:
        raise ValueError("domain and system horizons disagree")
    times = np.linspace(0.0, domain.T, n_steps + 1)
    a = None
    if a_sampler is not None:
        a_vals = a_sampler(times)
        a = Potential.from_values(a_vals)

    v_vals = control_on_times(sol, sys, eta, theta, times)
    chi = domain.in_omega(grid.nodes)
    support_ok = bool(np.all(v_vals[:, ~chi] == 0.0))

    q_run = solve_free_q(grid, beta0, beta1, times, a=a)
    f_vals = assemble_source(theta1, q_run).values

    controlled = solve_forward(grid, beta0, beta1, times, a=a, forcing=v_vals)
    cutoff_run = solve_forward(grid, beta0, beta1, times, a=a, forcing=-f_vals)
    g_run = solve_forward(grid, np.zeros(grid.n), np.zeros(grid.n), times,
                          a=a, forcing=v_vals + f_vals)

    scale = max(_pair_sup_norm(grid, controlled.beta, controlled.beta_t),
                1e-300)
    superpos = _pair_sup_norm(
        grid,
        controlled.beta - cutoff_run.beta - g_run.beta,
        controlled.beta_t - cutoff_run.beta_t - g_run.beta_t,
    ) / scale

    th = theta1.eval(times, 0)[:, None]
    th1 = theta1.eval(times, 1)[:, None]
    cutoff_defect = _pair_sup_norm(
        grid,
        cutoff_run.beta - th * q_run.beta,
        cutoff_run.beta_t - (th1 * q_run.beta + th * q_run.beta_t),
    ) / scale

    controlled_T = controlled.terminal_norm()
    uncontrolled_T = q_run.terminal_norm()
    suppression = controlled_T / uncontrolled_T if uncontrolled_T > 0 else 1.0

    dt = times[1] - times[0]
    trap = np.full(times.size, dt)
    trap[0] = trap[-1] = 0.5 * dt
    control_l2 = float(np.sqrt(np.sum(trap * grid.l2_sq(v_vals))))
    data_norm = float(np.sqrt(grid.sobolev_sq(beta0, 3)
                              + grid.sobolev_sq(beta1, 1)))

    report = TerminalReport(
        controlled_terminal=controlled_T,
        uncontrolled_terminal=uncontrolled_T,
        suppression_ratio=suppression,
        control_l2=control_l2,
        data_norm=data_norm,
        bound_ratio=control_l2 / data_norm if data_norm > 0 else 0.0,
        g_terminal=g_run.terminal_norm(),
        superposition_defect=superpos,
        cutoff_consistency_defect=cutoff_defect,
        support_ok=support_ok,
    )
    runs = {"controlled": controlled, "uncontrolled": q_run,
            "cutoff": cutoff_run, "g": g_run}
    return report, runs
