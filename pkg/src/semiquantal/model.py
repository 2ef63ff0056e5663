"""Lipkin model parameters, Gaussian kinematics and phase-space Hamiltonians.

Conventions used throughout the package:

* mean-field coordinates are scaled so that <a> = sqrt(N) (q_a + i p_a) / sqrt(2),
  hence |<a>|^2 = N n_a with n_a = (q_a^2 + p_a^2) / 2 and the classical
  constraint reads n_a + n_b = 1;
* chi = V N;
* reported energies are ``E_fig = 2 H / eps``, which puts the separatrices at
  +-1 and the extreme energies at +-(1 + chi^2) / (2 chi);
* width coordinates (Q, P) are unscaled, Q^2 = <dq^2>, and the minimal
  uncertainty packet is Q = sqrt(1/2), P = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Level = Literal["classical", "semiclassical"]
Source = Literal["derived", "printed"]

Q_MIN = math.sqrt(0.5)

__all__ = [
    "ModelParams", "MeanPoint", "WidthPoint", "SemiState", "BogoliubovParams",
    "GaussianMoments", "ObservableSet", "AmplitudePair", "make_params",
    "gaussian_moments", "variances", "uncertainty_product",
    "bogoliubov_from_canonical", "canonical_from_bogoliubov",
    "moments_from_bogoliubov", "mean_amplitudes", "h_classical",
    "h_correction1", "h_correction2", "h_semiclassical", "energy_fig",
    "scaled_particle_number", "observables", "extreme_energies",
    "fixed_points", "complete_on_section", "minimal_widths", "Q_MIN",
]


class DomainError(ValueError):
    """Raised when a width coordinate leaves the centrifugal barrier Q > 0."""


def _check_width(Q: float) -> None:
    if not Q > 0.0:
        raise DomainError(f"width coordinate must be positive, got Q={Q!r}")


def _check_nu(nu: float) -> None:
    if not nu >= 0.0:
        raise ValueError(f"fluctuation occupation must be >= 0, got nu={nu!r}")


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    chi: float
    j: float
    nu_a: float = 0.0
    nu_b: float = 0.0
    mu0: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        two_j = 2.0 * self.j
        if not (two_j >= 1.0 and abs(two_j - round(two_j)) < 1e-12):
            raise ValueError(f"j must be a positive half-integer, got {self.j!r}")
        _check_nu(self.nu_a)
        _check_nu(self.nu_b)
        if not math.isfinite(self.chi):
            raise ValueError(f"chi must be finite, got {self.chi!r}")

    @property
    def n_particles(self) -> int:
        return int(round(2 * self.j))

    @property
    def v(self) -> float:
        return self.chi / self.n_particles

    @property
    def w_a(self) -> float:
        return (1.0 + 2.0 * self.nu_a) ** 2

    @property
    def w_b(self) -> float:
        return (1.0 + 2.0 * self.nu_b) ** 2


def make_params(epsilon: float = 1.0, chi: float = 0.0, j: float = 1.0,
                nu_a: float = 0.0, nu_b: float = 0.0) -> ModelParams:
    return ModelParams(float(epsilon), float(chi), float(j), float(nu_a), float(nu_b))


@dataclass(frozen=True)
class MeanPoint:
    q_a: float
    p_a: float
    q_b: float
    p_b: float

    @property
    def n_a(self) -> float:
        return 0.5 * (self.q_a ** 2 + self.p_a ** 2)

    @property
    def n_b(self) -> float:
        return 0.5 * (self.q_b ** 2 + self.p_b ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.q_a, self.p_a, self.q_b, self.p_b], dtype=float)


@dataclass(frozen=True)
class WidthPoint:
    Q_a: float = Q_MIN
    P_a: float = 0.0
    Q_b: float = Q_MIN
    P_b: float = 0.0

    def __post_init__(self):
        _check_width(self.Q_a)
        _check_width(self.Q_b)

    def as_array(self) -> np.ndarray:
        return np.array([self.Q_a, self.P_a, self.Q_b, self.P_b], dtype=float)


def minimal_widths(nu_a: float = 0.0, nu_b: float = 0.0) -> WidthPoint:
    """Minimum-uncertainty widths, Q = sqrt((1+2nu)/2), P = 0."""
    return WidthPoint(math.sqrt((1 + 2 * nu_a) / 2), 0.0, math.sqrt((1 + 2 * nu_b) / 2), 0.0)


@dataclass(frozen=True)
class SemiState:
    mean: MeanPoint
    width: WidthPoint = WidthPoint()

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.mean.as_array(), self.width.as_array()])

    @classmethod
    def from_array(cls, y) -> "SemiState":
        y = [float(v) for v in y]
        if len(y) == 4:
            return cls(MeanPoint(*y))
        if len(y) != 8:
            raise ValueError(f"expected 4 or 8 coordinates, got {len(y)}")
        return cls(MeanPoint(*y[:4]), WidthPoint(*y[4:]))


@dataclass(frozen=True)
class BogoliubovParams:
    sigma: float
    tau: float
    x: complex
    y: complex


@dataclass(frozen=True)
class GaussianMoments:
    n_f: float
    c: complex


@dataclass(frozen=True)
class ObservableSet:
    jz_over_j: float
    jx_over_j: float
    jy_over_j: float
    energy_fig: float
    n_scaled: float


@dataclass(frozen=True)
class AmplitudePair:
    alpha: complex
    beta: complex


# -- Gaussian kinematics ------------------------------------------------------

def variances(Q: float, P: float, nu: float = 0.0) -> tuple[float, float]:
    """Quadrature variances (dq^2, dp^2) of a Gaussian with widths (Q, P)."""
    _check_width(Q)
    return Q * Q, P * P + (1 + 2 * nu) ** 2 / (4 * Q * Q)


def uncertainty_product(Q: float, P: float, nu: float = 0.0) -> float:
    _check_width(Q)
    return math.sqrt((1 + 2 * nu) ** 2 / 4 + (P * Q) ** 2)


def gaussian_moments(Q: float, P: float, nu: float = 0.0) -> GaussianMoments:
    """Fluctuation occupation <a~+ a~> and pair correlation <a~ a~>.

    The pair correlation carries Re c = (dq^2 - dp^2)/2 and
    Im c = <{dq, dp}>/2 = Q P, the covariance for which (Q, P) is a
    canonical pair.
    """
    dq2, dp2 = variances(Q, P, nu)
    n_f = 0.5 * (dq2 + dp2 - 1.0)
    return GaussianMoments(n_f, complex(0.5 * (dq2 - dp2), Q * P))


def bogoliubov_from_canonical(Q: float, P: float, nu: float = 0.0) -> BogoliubovParams:
    _check_width(Q)
    _check_nu(nu)
    scale = math.sqrt(2.0 / (1 + 2 * nu))
    sigma = -math.log(Q * scale)
    tau = P * scale
    x = complex(math.cosh(sigma), tau / 2)
    y = complex(math.sinh(sigma), tau / 2)
    return BogoliubovParams(sigma, tau, x, y)


def canonical_from_bogoliubov(b: BogoliubovParams, nu: float = 0.0) -> tuple[float, float]:
    scale = math.sqrt((1 + 2 * nu) / 2)
    return scale * math.exp(-b.sigma), scale * b.tau


def moments_from_bogoliubov(b: BogoliubovParams, nu: float = 0.0) -> GaussianMoments:
    """Moments of the thermal quasiparticle state eta~ = x* a~ + y* a~+.

    Inverting gives a~ = x eta~ - y* eta~+, so <a~+ a~> = nu + (1+2nu)|y|^2
    and <a~ a~> = -x y* (1+2nu).
    """
    g = 1 + 2 * nu
    return GaussianMoments(nu + g * abs(b.y) ** 2, -b.x * b.y.conjugate() * g)


# -- Hamiltonians -------------------------------------------------------------

def mean_amplitudes(mean: MeanPoint, params: ModelParams) -> AmplitudePair:
    s = math.sqrt(params.n_particles / 2.0)
    return AmplitudePair(s * complex(mean.q_a, mean.p_a), s * complex(mean.q_b, mean.p_b))


def h_classical(mean: MeanPoint, params: ModelParams) -> float:
    qa, pa, qb, pb = mean.q_a, mean.p_a, mean.q_b, mean.p_b
    return (0.5 * params.epsilon * (0.5 * (qb * qb + pb * pb) - 0.5 * (qa * qa + pa * pa))
            + params.chi * (0.25 * (qa * qa - pa * pa) * (qb * qb - pb * pb) + qa * pa * qb * pb))


def h_correction1(state: SemiState, params: ModelParams, coupling_sign: float = 1.0) -> float:
    """First-order width correction H1.

    With ``coupling_sign=+1`` the width-mean coupling enters as
    +chi (q_b p_b Q_a P_a + q_a p_a Q_b P_b), the sign whose gradient gives the
    printed equations of motion and the covariance <{dq, dp}>/2 = +Q P.
    ``coupling_sign=-1`` evaluates the printed expression for H1 literally.
    """
    m, w = state.mean, state.width
    _check_width(w.Q_a)
    _check_width(w.Q_b)
    eps, chi = params.epsilon, params.chi
    ka = params.w_a / (8 * w.Q_a ** 2)
    kb = params.w_b / (8 * w.Q_b ** 2)
    return (0.5 * eps * (0.5 * (w.Q_b ** 2 + w.P_b ** 2) - 0.5 * (w.Q_a ** 2 + w.P_a ** 2) + kb - ka)
            - chi * (0.5 * (m.q_b ** 2 - m.p_b ** 2) * (ka - 0.5 * (w.Q_a ** 2 - w.P_a ** 2))
                     - coupling_sign * m.q_b * m.p_b * w.Q_a * w.P_a)
            - chi * (0.5 * (m.q_a ** 2 - m.p_a ** 2) * (kb - 0.5 * (w.Q_b ** 2 - w.P_b ** 2))
                     - coupling_sign * m.q_a * m.p_a * w.Q_b * w.P_b))


def h_correction2(state: SemiState, params: ModelParams) -> float:
    w = state.width
    _check_width(w.Q_a)
    _check_width(w.Q_b)
    ka = params.w_a / (8 * w.Q_a ** 2)
    kb = params.w_b / (8 * w.Q_b ** 2)
    return params.chi * ((kb - 0.5 * (w.Q_b ** 2 - w.P_b ** 2)) * (ka - 0.5 * (w.Q_a ** 2 - w.P_a ** 2))
                         + w.Q_b * w.P_b * w.Q_a * w.P_a)


def _h_derived(state: SemiState, params: ModelParams) -> float:
    """<H> / N over the product Gaussian state, via Wick factorization."""
    n = params.n_particles
    amp = mean_amplitudes(state.mean, params)
    ga = gaussian_moments(state.width.Q_a, state.width.P_a, params.nu_a)
    gb = gaussian_moments(state.width.Q_b, state.width.P_b, params.nu_b)
    occ_a = abs(amp.alpha) ** 2 + ga.n_f
    occ_b = abs(amp.beta) ** 2 + gb.n_f
    # <b+ b+ a a> = <b+ b+><a a> for the product state
    pair = (amp.beta.conjugate() ** 2 + gb.c.conjugate()) * (amp.alpha ** 2 + ga.c)
    h = 0.5 * params.epsilon * (occ_b - occ_a) + params.v * pair.real
    return h / n


def h_semiclassical(state: SemiState, params: ModelParams, source: Source = "printed") -> float:
    """Semiclassical energy per particle.

    ``printed`` returns H_cl + H1/J + H2/J^2, the energy generating the
    reference eight-equation system of motion. ``derived`` evaluates
    Tr(F0 H)/N from the Gaussian moments, which works out to H_cl + H1/N + H2/N^2: the same
    function with J replaced by 2J.
    """
    if source == "derived":
        return _h_derived(state, params)
    if source == "printed":
        j = params.j
        return (h_classical(state.mean, params) + h_correction1(state, params) / j
                + h_correction2(state, params) / j ** 2)
    raise ValueError(f"unknown Hamiltonian source {source!r}")


def energy_fig(h: float, params: ModelParams) -> float:
    return 2.0 * h / params.epsilon


def scaled_particle_number(state: SemiState, params: ModelParams) -> float:
    ga = gaussian_moments(state.width.Q_a, state.width.P_a, params.nu_a)
    gb = gaussian_moments(state.width.Q_b, state.width.P_b, params.nu_b)
    return state.mean.n_a + state.mean.n_b + (ga.n_f + gb.n_f) / params.n_particles


def observables(state: SemiState, params: ModelParams, level: Level = "semiclassical",
                source: Source = "printed") -> ObservableSet:
    """Quasispin expectations per J.

    With |<a>|^2 = N n_a, <J_+>/J = conj(beta) alpha / J gives
    <J_x>/J = q_a q_b + p_a p_b and <J_y>/J = q_b p_a - q_a p_b.
    """
    m = state.mean
    n = params.n_particles
    if level == "classical":
        jz = m.n_b - m.n_a
        h = h_classical(m, params)
        n_scaled = m.n_a + m.n_b
    else:
        ga = gaussian_moments(state.width.Q_a, state.width.P_a, params.nu_a)
        gb = gaussian_moments(state.width.Q_b, state.width.P_b, params.nu_b)
        jz = m.n_b - m.n_a + (gb.n_f - ga.n_f) / n
        h = h_semiclassical(state, params, source)
        n_scaled = m.n_a + m.n_b + (ga.n_f + gb.n_f) / n
    return ObservableSet(
        jz_over_j=jz,
        jx_over_j=m.q_a * m.q_b + m.p_a * m.p_b,
        jy_over_j=m.q_b * m.p_a - m.q_a * m.p_b,
        energy_fig=energy_fig(h, params),
        n_scaled=n_scaled,
    )


# -- phase portrait geometry --------------------------------------------------

def extreme_energies(chi: float) -> tuple[float, float] | None:
    """(E_min, E_max) on the E_fig scale, or None below the critical coupling."""
    if abs(chi) <= 1.0:
        return None
    e = abs((1 + chi * chi) / (2 * chi))
    return -e, e


def fixed_points(params: ModelParams) -> dict[str, list[MeanPoint]]:
    """Poincare-map fixed points of the deformed families, keyed by 'min' and 'max'.

    For chi < 0 the minimum sits at q = 0, p_a = +-sqrt(1 - 1/chi),
    p_b = sqrt(1 + 1/chi); the maximum at p_a = 0, q_a = +-sqrt(1 + 1/chi),
    p_b = sqrt(1 - 1/chi). For chi > 0 the two families swap. Only the
    section representatives (q_b = 0, p_b > 0) are returned.
    """
    chi = params.chi
    if abs(chi) <= 1.0:
        return {"min": [], "max": []}
    s_minus = math.sqrt(1 - 1 / chi)
    s_plus = math.sqrt(1 + 1 / chi)
    momentum = [MeanPoint(0.0, sgn * s_minus, 0.0, s_plus) for sgn in (-1.0, 1.0)]
    position = [MeanPoint(sgn * s_plus, 0.0, 0.0, s_minus) for sgn in (-1.0, 1.0)]
    if chi < 0:
        return {"min": momentum, "max": position}
    return {"min": position, "max": momentum}


def complete_on_section(q_a: float, p_a: float, params: ModelParams,
                        widths: WidthPoint | None = None) -> SemiState:
    """Place (q_a, p_a) on the section q_b = 0, p_b > 0 with n_a + n_b = 1."""
    n_a = 0.5 * (q_a * q_a + p_a * p_a)
    if n_a > 1.0 + 1e-12:
        raise ValueError(f"section point has n_a={n_a:.6g} > 1; no real p_b")
    if widths is None:
        widths = minimal_widths(params.nu_a, params.nu_b)
    p_b = math.sqrt(max(0.0, 2.0 * (1.0 - n_a)))
    return SemiState(MeanPoint(float(q_a), float(p_a), 0.0, p_b), widths)
