"""Construction and auditing of the exponential space-time weights.

The weights live on the torus (-L, d+L] with the two-interval observation
collar omega = (-L, 0) u (d, d+L).  A positive spatial profile `eta` with no
critical point outside omega and a temporal profile `theta` blowing up like
1/t^2 and 1/(T-t)^2 at the ends combine into

    phi = theta * (exp(6*lam*M) - exp(lam*(eta + 4*M))),
    xi  = theta * exp(lam*(eta + 4*M)),          M = sup |eta|,

whose derivative fields obey a ledger of pointwise bounds of the form
|d phi| <= C lam^i xi^p.  `audit_derivative_bounds` measures the empirical
constants of that ledger on a grid and the positivity floor of the spatial
xi-derivatives on [0, d].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import BPoly

from ._bumps import corner_blend

ETA_SCAN_SIZE = 8192
POSITIVITY_OFFSET_FRACTION = 0.05


class ConstructionError(ValueError):
    """A weight profile failed one of its certified construction checks."""


@dataclass(frozen=True)
class DomainSpec:
    """Beam interior span d, collar half-width L, and horizon T.

    The torus is (-L, d+L] with circumference d + 2L; the observation region
    is the open union (-L, 0) u (d, d+L).
    """

    d: float
    L: float
    T: float

    def __post_init__(self):
        if self.d <= 0 or self.L <= 0 or self.T <= 0:
            raise ValueError("d, L and T must all be positive")

    @property
    def circumference(self) -> float:
        return self.d + 2.0 * self.L

    @property
    def omega(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((-self.L, 0.0), (self.d, self.d + self.L))

    def in_omega(self, x: np.ndarray) -> np.ndarray:
        """Strict indicator of the open observation region."""
        x = self.wrap(x)
        (a1, b1), (a2, b2) = self.omega
        return ((x > a1) & (x < b1)) | ((x > a2) & (x < b2))

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map positions into the fundamental domain (-L, d+L]."""
        M = self.circumference
        return -self.L + np.mod(np.asarray(x, dtype=float) + self.L, M)

    def omega_cell_weights(self, x_nodes: np.ndarray, h: float) -> np.ndarray:
        """Quadrature weights for integrals over omega.

        Each node owns the cell [x - h/2, x + h/2); the weight is the measure
        of the cell's intersection with omega, so cells are split exactly at
        the omega endpoints.
        """
        M = self.circumference
        endpoints = [(-self.L, 0.0), (self.d, self.d + self.L)]
        w = np.zeros_like(np.asarray(x_nodes, dtype=float))
        for a, b in endpoints:
            lo = self.wrap(x_nodes) - 0.5 * h
            hi = lo + h
            for shift in (-M, 0.0, M):
                w += np.clip(np.minimum(hi, b + shift) - np.maximum(lo, a + shift),
                             0.0, None)
        return w


@dataclass(frozen=True)
class CarlemanParams:
    """Large parameter s, sharpness lam, junction times, and the free
    absorption parameter zeta (kept exact as a rational)."""

    s: float
    lam: float
    T0: float
    T1: float
    zeta: Fraction = Fraction(1)

    def __post_init__(self):
        if self.s < 1.0 or self.lam < 1.0:
            raise ValueError("s and lam must both be >= 1")
        if not (0.0 < self.T0 < 1.0) or not (0.0 < self.T1 < 1.0):
            raise ValueError(
                "T0 and T1 must lie in (0, 1) so the blow-up pieces exceed the "
                "plateau value 1"
            )

    def validate_horizon(self, T: float) -> None:
        if not 2.0 * self.T0 + 2.0 * self.T1 < T:
            raise ValueError("junction times must satisfy 2*T0 + 2*T1 < T")


@dataclass(frozen=True)
class EtaProfile:
    """Mollified two-extremum spatial profile with analytic derivatives.

    The profile rises linearly from a minimum at -L/2 to a maximum at d + L/2
    and falls linearly across the seam; both corners are rounded by a
    compactly supported mollifier whose radius keeps the rounding strictly
    inside omega.  Off omega the profile is exactly linear, so the slope
    floor there is a certificate, not an accident.
    """

    domain: DomainSpec
    eta_scale: float
    mollify_radius: float
    scale: float
    offset: float
    eta_max: float
    slope_floor: float
    min_value: float
    samples: np.ndarray = field(repr=False)

    @property
    def corners(self) -> tuple[float, float]:
        return (-0.5 * self.domain.L, self.domain.d + 0.5 * self.domain.L)

    def derivs(self, x: np.ndarray, max_order: int = 6) -> np.ndarray:
        """Stack eta, eta', ..., eta^(max_order) at x; shape (len(x), order+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dom = self.domain
        M = dom.circumference
        rise = dom.d + dom.L
        s_up = 1.0 / rise
        s_dn = 1.0 / dom.L
        c0, c1 = self.corners
        p = np.mod(x - c0, M)
        rising = p <= rise
        out = np.zeros((x.size, max_order + 1))

        tent = np.where(rising, s_up * p, 1.0 - s_dn * (p - rise))
        tent_d1 = np.where(rising, s_up, -s_dn)
        jump = s_up + s_dn
        z0 = _wrap_sym(x - c0, M)
        z1 = _wrap_sym(x - c1, M)
        r = self.mollify_radius
        out[:, 0] = tent + jump * (corner_blend(z0, r) - corner_blend(z1, r))
        if max_order >= 1:
            out[:, 1] = tent_d1 + jump * (
                corner_blend(z0, r, 1) - corner_blend(z1, r, 1)
            )
        for j in range(2, max_order + 1):
            out[:, j] = jump * (corner_blend(z0, r, j) - corner_blend(z1, r, j))

        out *= self.scale
        out[:, 0] += self.offset - self.scale * self.min_value
        return out


def _wrap_sym(z: np.ndarray, period: float) -> np.ndarray:
    """Wrap displacements into (-period/2, period/2]."""
    return z - period * np.round(np.asarray(z, dtype=float) / period)


def build_eta(domain: DomainSpec, eta_scale: float = 0.1,
              mollify_radius: float | None = None) -> EtaProfile:
    """Construct the spatial profile and certify its slope and positivity.

    Raises ConstructionError if the dense scan finds a nonpositive value, a
    vanishing slope off omega, or a critical point outside omega.
    """
    if eta_scale <= 0:
        raise ValueError("eta_scale must be positive")
    if mollify_radius is None:
        mollify_radius = domain.L / 8.0
    if not 0.0 < mollify_radius < domain.L / 4.0:
        raise ValueError("mollify_radius must lie in (0, L/4)")

    offset = POSITIVITY_OFFSET_FRACTION * eta_scale
    proto = EtaProfile(
        domain=domain, eta_scale=eta_scale, mollify_radius=mollify_radius,
        scale=1.0, offset=0.0, eta_max=0.0, slope_floor=0.0, min_value=0.0,
        samples=np.empty(0),
    )
    M = domain.circumference
    x_scan = -domain.L + M * np.arange(ETA_SCAN_SIZE) / ETA_SCAN_SIZE
    raw = proto.derivs(x_scan, max_order=1)
    mn, mx = float(raw[:, 0].min()), float(raw[:, 0].max())
    scale = eta_scale / (mx - mn)

    profile = EtaProfile(
        domain=domain, eta_scale=eta_scale, mollify_radius=mollify_radius,
        scale=scale, offset=offset, eta_max=eta_scale + offset,
        slope_floor=0.0, min_value=mn, samples=np.empty(0),
    )
    scan = profile.derivs(x_scan, max_order=6)
    eta_vals, eta_slope = scan[:, 0], scan[:, 1]

    if eta_vals.min() <= 0.0:
        raise ConstructionError("profile is not strictly positive")
    off_omega = ~domain.in_omega(x_scan)
    slope_floor = float(np.abs(eta_slope[off_omega]).min())
    if slope_floor <= 0.0:
        raise ConstructionError(
            "slope floor off omega is not positive; mollification bled outside"
        )
    sign_change = np.flatnonzero(eta_slope[:-1] * eta_slope[1:] <= 0.0)
    crit_x = x_scan[sign_change]
    if crit_x.size and not np.all(domain.in_omega(crit_x)):
        raise ConstructionError("found a critical point outside omega")

    object.__setattr__(profile, "slope_floor", slope_floor)
    object.__setattr__(profile, "eta_max", float(eta_vals.max()))
    object.__setattr__(profile, "samples", scan)
    return profile


@dataclass(frozen=True)
class ThetaProfile:
    """Five-piece temporal profile with C4 junctions.

    1/t^2 on (0, T0], a strictly decreasing degree-9 Hermite blend to the
    plateau value 1 on [T0, 2*T0], the plateau, a strictly increasing blend on
    [T - 2*T1, T - T1], and 1/(T-t)^2 on [T - T1, T).
    """

    T: float
    T0: float
    T1: float
    _blend_down: BPoly = field(repr=False)
    _blend_up: BPoly = field(repr=False)

    @property
    def junctions(self) -> tuple[float, float, float, float]:
        return (self.T0, 2 * self.T0, self.T - 2 * self.T1, self.T - self.T1)

    def eval(self, t: np.ndarray, order: int = 0) -> np.ndarray:
        if order > 4:
            raise ValueError("theta derivatives available up to order 4")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= 0.0) or np.any(t >= self.T):
            raise ValueError("theta is evaluated strictly inside (0, T)")
        j1, j2, j3, j4 = self.junctions
        out = np.empty_like(t)

        m = t <= j1
        out[m] = _inv_sq(t[m], order)
        m = (t > j1) & (t < j2)
        out[m] = self._blend_down.derivative(order)(t[m]) if order else \
            self._blend_down(t[m])
        m = (t >= j2) & (t <= j3)
        out[m] = 1.0 if order == 0 else 0.0
        m = (t > j3) & (t < j4)
        out[m] = self._blend_up.derivative(order)(t[m]) if order else \
            self._blend_up(t[m])
        m = t >= j4
        out[m] = _inv_sq_mirror(self.T, t[m], order)
        return out


def _inv_sq(t: np.ndarray, order: int) -> np.ndarray:
    """order-th derivative of 1/t^2."""
    sign = (-1.0) ** order
    return sign * math.factorial(order + 1) / t ** (order + 2)


def _inv_sq_mirror(T: float, t: np.ndarray, order: int) -> np.ndarray:
    """order-th derivative of 1/(T-t)^2 (all derivatives positive)."""
    return math.factorial(order + 1) / (T - t) ** (order + 2)


def build_theta(params: CarlemanParams, T: float) -> ThetaProfile:
    """Build theta and certify blend monotonicity by a derivative sign scan."""
    params.validate_horizon(T)
    T0, T1 = params.T0, params.T1

    left_vals = [_inv_sq(np.array([T0]), j)[0] for j in range(5)]
    blend_down = BPoly.from_derivatives(
        [T0, 2 * T0], [left_vals, [1.0, 0.0, 0.0, 0.0, 0.0]]
    )
    right_vals = [_inv_sq_mirror(T, np.array([T - T1]), j)[0] for j in range(5)]
    blend_up = BPoly.from_derivatives(
        [T - 2 * T1, T - T1], [[1.0, 0.0, 0.0, 0.0, 0.0], right_vals]
    )

    for blend, (a, b), sign, name in (
        (blend_down, (T0, 2 * T0), -1.0, "decreasing"),
        (blend_up, (T - 2 * T1, T - T1), +1.0, "increasing"),
    ):
        ts = np.linspace(a, b, 2049)[1:-1]
        d1 = blend.derivative(1)(ts)
        if np.any(sign * d1 <= 0.0):
            raise ConstructionError(
                f"theta blend on [{a}, {b}] failed its {name} certification"
            )
        if np.any(blend(ts) < 1.0):
            raise ConstructionError("theta blend dips below the plateau value 1")

    return ThetaProfile(T=T, T0=T0, T1=T1,
                        _blend_down=blend_down, _blend_up=blend_up)


# weight-field assembly ------------------------------------------------------

def weights_from_values(eta_val, eta_max: float, theta_val, lam: float):
    """Pointwise weight formulas (phi, xi) from profile values.

    Exposed separately so the algebra can be spot-checked against hand
    evaluations; `eval_weights` uses the same expressions on full grids.
    """
    big = np.exp(6.0 * lam * eta_max)
    xi = theta_val * np.exp(lam * (np.asarray(eta_val) + 4.0 * eta_max))
    phi = theta_val * big - xi
    return phi, xi


@dataclass(frozen=True)
class WeightField:
    """Sampled weights and every derivative the bound ledger references.

    Arrays are time-major with shape (n_t, n_x).  Exponentials of phi are
    carried in the log domain: `neg2s_phi` stores -2*s*phi and `log_xi`
    stores log(xi), so weighted kernels assemble as exp(p*log_xi - 2*s*phi)
    without overflow near the horizon ends.
    """

    domain: DomainSpec
    params: CarlemanParams
    eta_max: float
    x_nodes: np.ndarray
    t_nodes: np.ndarray
    t_weights: np.ndarray
    h: float
    phi: np.ndarray
    xi: np.ndarray
    phi_x: dict[int, np.ndarray]
    xi_x: dict[int, np.ndarray]
    phi_t: np.ndarray
    phi_tt: np.ndarray
    phi_tx: np.ndarray
    phi_txx: np.ndarray
    phi_txxx: np.ndarray
    phi_ttx: np.ndarray
    phi_ttxx: np.ndarray
    xi_t: np.ndarray
    xi_tt: np.ndarray
    xi_tx: np.ndarray
    xi_txx: np.ndarray
    xi_txxx: np.ndarray
    xi_ttx: np.ndarray
    xi_ttxx: np.ndarray
    log_xi: np.ndarray
    neg2s_phi: np.ndarray

    def kernel(self, xi_power: float) -> np.ndarray:
        """exp(xi_power * log(xi) - 2 s phi), assembled in the log domain."""
        return np.exp(xi_power * self.log_xi + self.neg2s_phi)

    def quad_weights(self) -> np.ndarray:
        """Space-time quadrature weights, shape (n_t, n_x)."""
        return self.t_weights[:, None] * self.h


def eval_weights(eta: EtaProfile, theta: ThetaProfile, params: CarlemanParams,
                 x_nodes: np.ndarray, t_grid) -> WeightField:
    """Sample phi, xi and their derivative ledger on a space-time grid.

    All derivatives come from the chain-rule formulas in eta', .., eta'''' and
    theta', theta''; nothing is differenced numerically.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    if x_nodes.size < 2:
        raise ValueError("need at least two spatial nodes")
    h = float(x_nodes[1] - x_nodes[0])
    lam, s = params.lam, params.s
    m = eta.eta_max
    if 6.0 * lam * m > 500.0:
        raise ValueError("lam * eta_max too large for direct exponentials")

    ed = eta.derivs(x_nodes, max_order=4)
    e1, e2, e3, e4 = ed[:, 1], ed[:, 2], ed[:, 3], ed[:, 4]
    # Faa di Bruno polynomials for d^i/dx^i exp(lam * eta)
    P = {
        1: lam * e1,
        2: lam * e2 + lam**2 * e1**2,
        3: lam * e3 + 3 * lam**2 * e1 * e2 + lam**3 * e1**3,
        4: (lam * e4 + 4 * lam**2 * e1 * e3 + 3 * lam**2 * e2**2
            + 6 * lam**3 * e1**2 * e2 + lam**4 * e1**4),
    }
    G = np.exp(lam * (ed[:, 0] + 4.0 * m))
    big = math.exp(6.0 * lam * m)

    th = theta.eval(t_grid.nodes, 0)[:, None]
    th1 = theta.eval(t_grid.nodes, 1)[:, None]
    th2 = theta.eval(t_grid.nodes, 2)[:, None]

    xi = th * G
    phi = th * (big - G)
    xi_x = {i: th * (P[i] * G) for i in (1, 2, 3, 4)}
    phi_x = {i: -xi_x[i] for i in (1, 2, 3, 4)}

    field_ = WeightField(
        domain=eta.domain, params=params, eta_max=m,
        x_nodes=x_nodes, t_nodes=t_grid.nodes, t_weights=t_grid.weights, h=h,
        phi=phi, xi=xi, phi_x=phi_x, xi_x=xi_x,
        phi_t=th1 * (big - G), phi_tt=th2 * (big - G),
        phi_tx=-th1 * (P[1] * G), phi_txx=-th1 * (P[2] * G),
        phi_txxx=-th1 * (P[3] * G),
        phi_ttx=-th2 * (P[1] * G), phi_ttxx=-th2 * (P[2] * G),
        xi_t=th1 * G, xi_tt=th2 * G,
        xi_tx=th1 * (P[1] * G), xi_txx=th1 * (P[2] * G),
        xi_txxx=th1 * (P[3] * G),
        xi_ttx=th2 * (P[1] * G), xi_ttxx=th2 * (P[2] * G),
        log_xi=np.log(th) + lam * (ed[:, 0] + 4.0 * m),
        neg2s_phi=-2.0 * s * phi,
    )
    return field_


# bound auditing -------------------------------------------------------------

@dataclass(frozen=True)
class BoundRecord:
    inequality: str
    constant: float
    passed: bool
    x_at: float
    t_at: float


@dataclass(frozen=True)
class PositivityRecord:
    order: int
    floor: float
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    """Empirical constants for the derivative-bound ledger at one (s, lam)."""

    s: float
    lam: float
    records: list[BoundRecord]
    positivity: list[PositivityRecord]
    identity_defect: float  # max |d^i phi + d^i xi| over i = 1..4

    def by_name(self) -> dict[str, float]:
        return {r.inequality: r.constant for r in self.records}

    def all_passed(self) -> bool:
        return (all(r.passed for r in self.records)
                and all(p.passed for p in self.positivity))

    def rows(self):
        for r in self.records:
            yield (r.inequality, r.constant, int(r.passed), r.x_at, r.t_at)
        for p in self.positivity:
            yield (f"xi_x{p.order}_positivity_floor", p.floor, int(p.passed),
                   float("nan"), float("nan"))


def audit_derivative_bounds(w: WeightField) -> BoundReport:
    """Measure max |LHS| / majorant for every inequality in the ledger.

    The phi and xi families share the same majorants; positivity of the
    spatial xi-derivatives is scanned on the beam interior [0, d] only, where
    the profile construction guarantees a strictly positive floor.
    """
    lam = w.params.lam
    xi32 = w.xi**1.5
    xi2 = w.xi**2

    entries = [
        ("phi_t", w.phi_t, xi32), ("phi_tt", w.phi_tt, xi2),
        ("phi_tx", w.phi_tx, lam * xi32), ("phi_txx", w.phi_txx, lam**2 * xi32),
        ("phi_txxx", w.phi_txxx, lam**3 * xi32),
        ("phi_ttx", w.phi_ttx, lam * xi2), ("phi_ttxx", w.phi_ttxx, lam**2 * xi2),
        ("xi_t", w.xi_t, xi32), ("xi_tt", w.xi_tt, xi2),
        ("xi_tx", w.xi_tx, lam * xi32), ("xi_txx", w.xi_txx, lam**2 * xi32),
        ("xi_txxx", w.xi_txxx, lam**3 * xi32),
        ("xi_ttx", w.xi_ttx, lam * xi2), ("xi_ttxx", w.xi_ttxx, lam**2 * xi2),
    ]
    for i in (1, 2, 3, 4):
        entries.insert(i - 1, (f"phi_x{i}", w.phi_x[i], lam**i * w.xi))
        entries.append((f"xi_x{i}", w.xi_x[i], lam**i * w.xi))

    records = []
    for name, lhs, majorant in entries:
        ratio = np.abs(lhs) / majorant
        idx = np.unravel_index(np.argmax(ratio), ratio.shape)
        c = float(ratio[idx])
        records.append(BoundRecord(
            inequality=name, constant=c, passed=bool(np.isfinite(c)),
            x_at=float(w.x_nodes[idx[1]]), t_at=float(w.t_nodes[idx[0]]),
        ))

    interior = (w.x_nodes >= 0.0) & (w.x_nodes <= w.domain.d)
    positivity = []
    for i in (1, 2, 3, 4):
        floor = float(np.min(w.xi_x[i][:, interior]
                             / (lam**i * w.xi[:, interior])))
        positivity.append(PositivityRecord(order=i, floor=floor,
                                           passed=floor > 0.0))

    defect = max(
        float(np.max(np.abs(w.phi_x[i] + w.xi_x[i]))) for i in (1, 2, 3, 4)
    )
    return BoundReport(s=w.params.s, lam=lam, records=records,
                       positivity=positivity, identity_defect=defect)


@dataclass(frozen=True)
class LambdaSweep:
    """Bound audits across a lam sweep, with per-inequality growth factors."""

    lams: list[float]
    reports: list[BoundReport]
    growth: dict[str, float]          # max over adjacent lam pairs of C_hi/C_lo
    positivity_threshold: float | None  # smallest lam with all floors positive

    def stable(self, factor: float = 2.0) -> bool:
        return all(g < factor for g in self.growth.values())


def sweep_lambda_bounds(eta: EtaProfile, theta: ThetaProfile, s: float,
                        lams, T0: float, T1: float,
                        x_nodes: np.ndarray, t_grid) -> LambdaSweep:
    """Audit the bound ledger for each lam and flag any growing constant.

    A constant growing without bound along the sweep signals a defect in the
    eta/theta construction; the reported growth factor is the largest
    adjacent-step increase.
    """
    lams = sorted(float(l) for l in lams)
    reports = []
    for lam in lams:
        params = CarlemanParams(s=s, lam=lam, T0=T0, T1=T1)
        w = eval_weights(eta, theta, params, x_nodes, t_grid)
        reports.append(audit_derivative_bounds(w))

    growth: dict[str, float] = {}
    for name in reports[0].by_name():
        consts = [r.by_name()[name] for r in reports]
        growth[name] = max(
            (hi / lo if lo > 0 else float("inf"))
            for lo, hi in zip(consts[:-1], consts[1:])
        ) if len(consts) > 1 else 1.0

    threshold = None
    for lam, rep in zip(lams, reports):
        if all(p.passed for p in rep.positivity):
            threshold = lam
            break
    return LambdaSweep(lams=lams, reports=reports, growth=growth,
                       positivity_threshold=threshold)
