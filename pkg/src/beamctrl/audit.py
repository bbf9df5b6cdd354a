"""Numerical stress tests of the weighted observability inequality.

Both sides of the estimate are evaluated on families of smooth test
functions: the left side is the seven-term ladder of weighted derivative
integrals; the right side is the weighted residual of the adjoint operator
(dtt + dtxx + dxxxx, plus the potential in the corollary variant) plus the
localized observation term.  Samples are sums of separable terms,
trigonometric polynomial x envelope, so every derivative is analytic; no
numerical differentiation enters.

The audit is a falsification harness: it calibrates an empirical constant on
one family and checks held-out families and parameter sweeps against it,
reporting rather than hiding violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._bumps import bump
from .torus import TimeGrid
from .weights import CarlemanParams, EtaProfile, ThetaProfile, \
    WeightField, eval_weights

DERIV_KEYS = ("00", "10", "20", "30", "40", "01", "11", "21", "02")
# key "ij": i x-derivatives, j t-derivatives


@dataclass(frozen=True)
class SeparableTerm:
    """One product term p(x) * mu(t) with closed-form derivatives."""

    x_coeffs_cos: np.ndarray     # (max_mode + 1,)
    x_coeffs_sin: np.ndarray
    circumference: float
    gamma: float                 # envelope sharpness
    t_poly: np.ndarray           # low-degree modulation in t/T
    T: float
    x_bump: tuple[float, float] | None = None   # (center, halfwidth) variant

    def x_derivs(self, x: np.ndarray, max_order: int = 4) -> np.ndarray:
        out = np.zeros((max_order + 1, x.size))
        if self.x_bump is not None:
            c, w = self.x_bump
            for j in range(max_order + 1):
                out[j] = bump((x - c) / w, j) / w**j
            return out
        k = np.arange(self.x_coeffs_cos.size)
        kap = 2.0 * np.pi * k / self.circumference
        phase = kap[:, None] * x[None, :]
        cos, sin = np.cos(phase), np.sin(phase)
        for j in range(max_order + 1):
            amp = kap**j
            if j % 4 == 0:
                cj, sj = cos, sin
            elif j % 4 == 1:
                cj, sj = -sin, cos
            elif j % 4 == 2:
                cj, sj = -cos, -sin
            else:
                cj, sj = sin, -cos
            out[j] = (amp * self.x_coeffs_cos) @ cj + (amp * self.x_coeffs_sin) @ sj
        return out

    def t_derivs(self, t: np.ndarray) -> np.ndarray:
        """Envelope times polynomial, with first and second derivatives.

        The envelope exp(-gamma T / t - gamma T / (T - t)) vanishes to all
        orders at both horizon ends.
        """
        T, g = self.T, self.gamma
        env = np.exp(-g * T / t - g * T / (T - t))
        w1 = g * T / t**2 - g * T / (T - t) ** 2
        w2 = -2 * g * T / t**3 - 2 * g * T / (T - t) ** 3
        env1 = env * w1
        env2 = env * (w1**2 + w2)

        tau = t / T
        p = np.polyval(self.t_poly[::-1], tau)
        dp = np.polyval(np.polyder(self.t_poly[::-1]), tau) / T
        ddp = np.polyval(np.polyder(self.t_poly[::-1], 2), tau) / T**2

        out = np.empty((3, t.size))
        out[0] = env * p
        out[1] = env1 * p + env * dp
        out[2] = env2 * p + 2 * env1 * dp + env * ddp
        return out


@dataclass(frozen=True)
class SpaceTimeSample:
    """Sum of separable terms; derivatives are assembled lazily per grid."""

    terms: tuple[SeparableTerm, ...]
    label: str = ""

    def derivs(self, x: np.ndarray, t: np.ndarray) -> dict[str, np.ndarray]:
        fields = {key: 0.0 for key in DERIV_KEYS}
        for term in self.terms:
            xd = term.x_derivs(x)
            td = term.t_derivs(t)
            for key in DERIV_KEYS:
                i, j = int(key[0]), int(key[1])
                fields[key] = fields[key] + td[j][:, None] * xd[i][None, :]
        return fields


@dataclass(frozen=True)
class TestFunctionFamily:
    """Seeded generator of smooth samples on the closed cylinder."""

    __test__ = False  # bare name confuses pytest collection otherwise

    family_id: str
    seed: int
    n_samples: int
    max_mode: int
    T: float
    circumference: float
    gamma_range: tuple[float, float] = (0.02, 0.08)
    n_terms: tuple[int, int] = (1, 3)
    kind: str = "trig"            # "trig" | "omega_bump"
    omega_interval: tuple[float, float] | None = None

    def generate(self) -> list[SpaceTimeSample]:
        rng = np.random.default_rng(self.seed)
        samples = []
        for idx in range(self.n_samples):
            n_terms = rng.integers(self.n_terms[0], self.n_terms[1] + 1)
            terms = []
            for _ in range(n_terms):
                gamma = rng.uniform(*self.gamma_range)
                t_poly = rng.standard_normal(3)
                if self.kind == "omega_bump":
                    a, b = self.omega_interval
                    margin = 0.15 * (b - a)
                    center = rng.uniform(a + 2 * margin, b - 2 * margin)
                    halfw = rng.uniform(margin, min(center - a, b - center) * 0.9)
                    term = SeparableTerm(
                        x_coeffs_cos=np.zeros(1), x_coeffs_sin=np.zeros(1),
                        circumference=self.circumference, gamma=gamma,
                        t_poly=t_poly, T=self.T, x_bump=(center, halfw),
                    )
                else:
                    decay = 1.0 / (1.0 + np.arange(self.max_mode + 1)) ** 1.5
                    term = SeparableTerm(
                        x_coeffs_cos=rng.standard_normal(self.max_mode + 1) * decay,
                        x_coeffs_sin=rng.standard_normal(self.max_mode + 1) * decay,
                        circumference=self.circumference, gamma=gamma,
                        t_poly=t_poly, T=self.T,
                    )
                terms.append(term)
            samples.append(SpaceTimeSample(
                terms=tuple(terms), label=f"{self.family_id}[{idx}]"))
        return samples


@dataclass(frozen=True)
class LhsBreakdown:
    """The weighted integral ladder of the estimate's left side."""

    psi_sq: float            # s^7 lam^8  int xi^7 |psi|^2
    psi_x_sq: float          # s^5 lam^6  int xi^5 |psi_x|^2
    psi_xx_t_sq: float       # s^3 lam^4  int xi^3 (|psi_xx|^2 + |psi_t|^2)
    psi_tx_xxx_sq: float     # s   lam^2  int xi   (|psi_tx|^2 + |psi_xxx|^2)
    psi_high_sq: float       # s^-1       int 1/xi (|psi_tt|^2 + |psi_txx|^2 + |psi_xxxx|^2)
    individual: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return (self.psi_sq + self.psi_x_sq + self.psi_xx_t_sq
                + self.psi_tx_xxx_sq + self.psi_high_sq)


@dataclass(frozen=True)
class RhsBreakdown:
    residual: float          # int |(dtt + dtxx + dxxxx [+ a]) psi|^2 e^{-2 s phi}
    observation: float       # s^7 lam^8 int_omega xi^7 |psi|^2 e^{-2 s phi}

    @property
    def total(self) -> float:
        return self.residual + self.observation


def _weighted_integral(w: WeightField, xi_power: float,
                       density: np.ndarray,
                       x_weights: np.ndarray | None = None) -> float:
    kernel = w.kernel(xi_power) * density
    xw = w.h if x_weights is None else x_weights
    return float(np.sum(w.t_weights[:, None] * xw * kernel))


def lhs_terms(psi: dict[str, np.ndarray], w: WeightField) -> LhsBreakdown:
    """Evaluate the seven-term weighted ladder for one sample.

    `psi` maps derivative keys "ij" (i x-derivatives, j t-derivatives) to
    sampled arrays on the weight grid.
    """
    s, lam = w.params.s, w.params.lam
    ind = {
        "psi": s**7 * lam**8 * _weighted_integral(w, 7, psi["00"] ** 2),
        "psi_x": s**5 * lam**6 * _weighted_integral(w, 5, psi["10"] ** 2),
        "psi_xx": s**3 * lam**4 * _weighted_integral(w, 3, psi["20"] ** 2),
        "psi_t": s**3 * lam**4 * _weighted_integral(w, 3, psi["01"] ** 2),
        "psi_tx": s * lam**2 * _weighted_integral(w, 1, psi["11"] ** 2),
        "psi_xxx": s * lam**2 * _weighted_integral(w, 1, psi["30"] ** 2),
        "psi_tt": _weighted_integral(w, -1, psi["02"] ** 2) / s,
        "psi_txx": _weighted_integral(w, -1, psi["21"] ** 2) / s,
        "psi_xxxx": _weighted_integral(w, -1, psi["40"] ** 2) / s,
    }
    return LhsBreakdown(
        psi_sq=ind["psi"],
        psi_x_sq=ind["psi_x"],
        psi_xx_t_sq=ind["psi_xx"] + ind["psi_t"],
        psi_tx_xxx_sq=ind["psi_tx"] + ind["psi_xxx"],
        psi_high_sq=ind["psi_tt"] + ind["psi_txx"] + ind["psi_xxxx"],
        individual=ind,
    )


def adjoint_residual(psi: dict[str, np.ndarray],
                     a: np.ndarray | None = None) -> np.ndarray:
    """(dtt + dtxx + dxxxx) psi, plus a * psi when a potential is given.

    The damping term enters with the adjoint (+) sign; the forward beam
    operator carries the opposite one.
    """
    res = psi["02"] + psi["21"] + psi["40"]
    if a is not None:
        res = res + a * psi["00"]
    return res


def rhs_terms(psi: dict[str, np.ndarray], w: WeightField,
              a: np.ndarray | None = None) -> RhsBreakdown:
    """Weighted residual plus omega-localized observation.

    The observation integral splits the quadrature cells exactly at the
    omega endpoints.
    """
    s, lam = w.params.s, w.params.lam
    res = adjoint_residual(psi, a)
    residual = _weighted_integral(w, 0, res**2)
    xw = w.domain.omega_cell_weights(w.x_nodes, w.h)
    observation = s**7 * lam**8 * _weighted_integral(
        w, 7, psi["00"] ** 2, x_weights=xw[None, :])
    return RhsBreakdown(residual=residual, observation=observation)


@dataclass(frozen=True)
class RatioRow:
    family: str
    sample: str
    s: float
    lam: float
    lhs: float
    residual: float
    observation: float

    @property
    def ratio(self) -> float:
        return self.lhs / (self.residual + self.observation)


@dataclass(frozen=True)
class RatioReport:
    """Per-sample ratios plus family maxima over the (s, lam) grid."""

    rows: list[RatioRow]
    calibration_max: dict[tuple[float, float], float]
    heldout_max: dict[tuple[float, float], float]
    s_grid: list[float]
    lam_grid: list[float]

    def heldout_within(self, factor: float = 10.0) -> bool:
        return all(
            self.heldout_max[key] <= factor * self.calibration_max[key]
            for key in self.calibration_max
        )

    def s_growth_factors(self, lam: float) -> list[float]:
        """Ratio-max growth between consecutive s values at fixed lam."""
        maxima = [max(self.calibration_max[(s, lam)],
                      self.heldout_max[(s, lam)]) for s in self.s_grid]
        return [b / a for a, b in zip(maxima[:-1], maxima[1:])]


def audit_inequality(calibration: TestFunctionFamily,
                     heldout: TestFunctionFamily,
                     eta: EtaProfile, theta: ThetaProfile,
                     s_grid, lam_grid, T0: float, T1: float,
                     x_nodes: np.ndarray, t_grid: TimeGrid,
                     a: np.ndarray | None = None) -> RatioReport:
    """Measure LHS/RHS ratios for both families over the parameter grid.

    Sample derivative arrays are evaluated once per family and reused across
    (s, lam); weight fields are rebuilt per parameter point.  Ratios are
    deterministic given the family seeds and are aggregated in fixed order.
    """
    s_grid = [float(s) for s in s_grid]
    lam_grid = [float(l) for l in lam_grid]
    fams = [("calibration", calibration.generate()),
            ("heldout", heldout.generate())]
    cached = [
        (role, [(smp.label, smp.derivs(x_nodes, t_grid.nodes)) for smp in lst])
        for role, lst in fams
    ]

    rows: list[RatioRow] = []
    calib_max: dict[tuple[float, float], float] = {}
    held_max: dict[tuple[float, float], float] = {}
    for s in s_grid:
        for lam in lam_grid:
            params = CarlemanParams(s=s, lam=lam, T0=T0, T1=T1)
            w = eval_weights(eta, theta, params, x_nodes, t_grid)
            for role, entries in cached:
                worst = 0.0
                for label, derivs in entries:
                    lhs = lhs_terms(derivs, w)
                    rhs = rhs_terms(derivs, w, a)
                    row = RatioRow(family=role, sample=label, s=s, lam=lam,
                                   lhs=lhs.total, residual=rhs.residual,
                                   observation=rhs.observation)
                    rows.append(row)
                    worst = max(worst, row.ratio)
                if role == "calibration":
                    calib_max[(s, lam)] = worst
                else:
                    held_max[(s, lam)] = worst
    return RatioReport(rows=rows, calibration_max=calib_max,
                       heldout_max=held_max, s_grid=s_grid, lam_grid=lam_grid)
