"""Hamiltonian flows, adaptive integration and Poincare section crossings."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import (
    Level,
    ModelParams,
    ObservableSet,
    SemiState,
    Source,
    minimal_widths,
)

log = logging.getLogger(__name__)

__all__ = [
    "IntegratorConfig", "Trajectory", "SectionPoint", "SectionRun",
    "IntegrationError", "pack_coupling", "vector_field", "hamiltonian_value",
    "integrate", "section_crossings", "conservation_report", "ConservationReport",
]

_STATUS_TEXT = {
    _kernels.STATUS_OK: "ok",
    _kernels.STATUS_BUDGET: "time budget exhausted",
    _kernels.STATUS_UNDERFLOW: "step size underflow",
    _kernels.STATUS_BARRIER: "width left the barrier",
    _kernels.STATUS_NONFINITE: "non-finite state",
}


class IntegrationError(RuntimeError):
    """Integration aborted; ``last_state`` holds the last accepted state."""

    def __init__(self, message, last_t, last_state):
        super().__init__(message)
        self.last_t = last_t
        self.last_state = last_state


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float = 0.5
    sample_dt: float = 0.05
    min_step: float = 1e-14

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "sample_dt", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def pack_coupling(params: ModelParams, level: Level, source: Source = "printed",
                  direction: float = 1.0) -> np.ndarray:
    """Flatten parameters into the layout read by the compiled kernels.

    ``printed`` is H_cl + H1/J + H2/J^2, ``derived`` is H_cl + H1/N + H2/N^2;
    both use the +QP coupling sign. All eight coordinates are paired under
    the unit Poisson bracket.
    """
    if level not in ("classical", "semiclassical"):
        raise ValueError(f"unknown level {level!r}")
    if level == "classical":
        k1 = k2 = 0.0
        sign = 1.0
        semi = 0.0
    elif source == "derived":
        n = params.n_particles
        k1, k2, sign, semi = 1.0 / n, 1.0 / n ** 2, 1.0, 1.0
    elif source == "printed":
        k1, k2, sign, semi = 1.0 / params.j, 1.0 / params.j ** 2, 1.0, 1.0
    else:
        raise ValueError(f"unknown Hamiltonian source {source!r}")
    return np.array([params.epsilon, params.chi, k1, k2, sign, params.w_a, params.w_b,
                     1.0, semi, direction], dtype=float)


def _as_vector(state) -> np.ndarray:
    if isinstance(state, SemiState):
        return state.as_array()
    y = np.asarray(state, dtype=float)
    if y.shape != (8,):
        raise ValueError(f"expected 8 phase-space coordinates, got shape {y.shape}")
    return y.copy()


def _check_barrier(y: np.ndarray, level: Level) -> None:
    if level == "semiclassical" and not (y[4] > 0 and y[6] > 0):
        raise ValueError(f"width coordinates must be positive, got Q_a={y[4]}, Q_b={y[6]}")


def vector_field(state, params: ModelParams, level: Level = "semiclassical",
                 source: Source = "printed") -> np.ndarray:
    """Time derivative of (q_a, p_a, q_b, p_b, Q_a, P_a, Q_b, P_b)."""
    y = _as_vector(state)
    _check_barrier(y, level)
    out = np.empty(8)
    _kernels.rhs(y, pack_coupling(params, level, source), out)
    return out


def hamiltonian_value(state, params: ModelParams, level: Level = "semiclassical",
                      source: Source = "printed") -> float:
    y = _as_vector(state)
    _check_barrier(y, level)
    return float(_kernels.hamiltonian(y, pack_coupling(params, level, source)))


def hamiltonian_gradient(state, params: ModelParams, level: Level = "semiclassical",
                         source: Source = "printed") -> np.ndarray:
    y = _as_vector(state)
    _check_barrier(y, level)
    g = np.empty(8)
    _kernels.gradient(y, pack_coupling(params, level, source), g)
    return g


def _observable_columns(y: np.ndarray, params: ModelParams, level: Level,
                        source: Source) -> dict[str, np.ndarray]:
    qa, pa, qb, pb, Qa, Pa, Qb, Pb = y.T
    n = params.n_particles
    na = 0.5 * (qa ** 2 + pa ** 2)
    nb = 0.5 * (qb ** 2 + pb ** 2)
    coupling = pack_coupling(params, level, source)
    h = np.array([_kernels.hamiltonian(row, coupling) for row in y])
    if level == "classical":
        nfa = nfb = np.zeros_like(qa)
    else:
        nfa = 0.5 * (Qa ** 2 + Pa ** 2 + params.w_a / (4 * Qa ** 2) - 1)
        nfb = 0.5 * (Qb ** 2 + Pb ** 2 + params.w_b / (4 * Qb ** 2) - 1)
    return {
        "e_fig": 2.0 * h / params.epsilon,
        "n_scaled": na + nb + (nfa + nfb) / n,
        "jz_over_j": nb - na + (nfb - nfa) / n,
        "jx_over_j": qa * qb + pa * pb,
        "jy_over_j": qb * pa - qa * pb,
    }


@dataclass
class Trajectory:
    """Sampled phase-space evolution with derived observable columns."""

    times: np.ndarray
    states: np.ndarray
    level: Level
    params: ModelParams
    source: Source = "printed"
    columns: dict = field(default_factory=dict)
    status: str = "ok"

    def __post_init__(self):
        if not self.columns:
            self.columns = _observable_columns(self.states, self.params, self.level, self.source)

    def __len__(self):
        return self.times.size

    @property
    def jz_over_j(self) -> np.ndarray:
        return self.columns["jz_over_j"]

    @property
    def e_fig(self) -> np.ndarray:
        return self.columns["e_fig"]

    @property
    def n_scaled(self) -> np.ndarray:
        return self.columns["n_scaled"]

    def state(self, k: int) -> SemiState:
        return SemiState.from_array(self.states[k])

    def observables(self) -> list[ObservableSet]:
        c = self.columns
        return [ObservableSet(float(c["jz_over_j"][k]), float(c["jx_over_j"][k]),
                              float(c["jy_over_j"][k]), float(c["e_fig"][k]),
                              float(c["n_scaled"][k])) for k in range(len(self))]


def _initial_vector(state0, params: ModelParams, level: Level) -> np.ndarray:
    y = _as_vector(state0)
    if level == "classical":
        # classical runs carry the frozen minimal packet for bookkeeping
        y[4:] = minimal_widths(params.nu_a, params.nu_b).as_array()
    _check_barrier(y, level)
    return y


def integrate(state0, params: ModelParams, level: Level, t_max: float,
              config: IntegratorConfig = IntegratorConfig(), source: Source = "printed",
              backward: bool = False) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) run sampled every ``config.sample_dt``.

    Sample k sits at time k*sample_dt (negated when ``backward``). Raises
    :class:`IntegrationError` if the step size underflows or the state leaves
    the admissible domain.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    y0 = _initial_vector(state0, params, level)
    c = pack_coupling(params, level, source, -1.0 if backward else 1.0)
    out, filled, status, last_t, last_y = _kernels.integrate_sampled(
        y0, c, float(t_max), config.sample_dt, config.rel_tol, config.abs_tol,
        config.max_step, config.min_step)
    if status != _kernels.STATUS_OK:
        raise IntegrationError(f"integration failed at t={last_t:.6g}: {_STATUS_TEXT[status]}",
                               last_t, SemiState.from_array(last_y))
    times = np.arange(filled) * config.sample_dt
    if backward:
        times = -times
    return Trajectory(times, out[:filled], level, params, source)


@dataclass(frozen=True)
class SectionPoint:
    index: int
    t: float
    q_a: float
    p_a: float


@dataclass
class SectionRun:
    """Crossings of one run; ``complete`` is False if the budget ran out."""

    points: list[SectionPoint]
    states: np.ndarray
    complete: bool
    status: str

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def p_a(self) -> np.ndarray:
        return np.array([p.p_a for p in self.points])

    @property
    def q_a(self) -> np.ndarray:
        return np.array([p.q_a for p in self.points])


def section_crossings(state0, params: ModelParams, level: Level, n_crossings: int,
                      config: IntegratorConfig = IntegratorConfig(),
                      source: Source = "printed", t_budget: float | None = None,
                      z_tol: float = 1e-11) -> SectionRun:
    """Collect up to ``n_crossings`` passages through q_b = 0 with p_b > 0.

    The default time budget allows 200 time units per requested crossing.
    Step-size underflow is reported through ``status`` rather than raised so
    that long sweeps keep their partial data.
    """
    if n_crossings < 1:
        raise ValueError("n_crossings must be >= 1")
    y0 = _initial_vector(state0, params, level)
    if t_budget is None:
        t_budget = 200.0 * n_crossings
    c = pack_coupling(params, level, source)
    times, states, found, status, last_t, _ = _kernels.integrate_sections(
        y0, c, int(n_crossings), float(t_budget), config.rel_tol, config.abs_tol,
        config.max_step, config.min_step, z_tol)
    points = [SectionPoint(k, float(times[k]), float(states[k, 0]), float(states[k, 1]))
              for k in range(found)]
    if status != _kernels.STATUS_OK:
        log.warning("section run stopped after %d crossings: %s", found, _STATUS_TEXT[status])
    return SectionRun(points, states[:found].copy(), found == n_crossings, _STATUS_TEXT[status])


@dataclass(frozen=True)
class ConservationReport:
    max_energy_drift: float
    max_number_drift: float
    rel_energy_drift: float


def conservation_report(traj: Trajectory, params: ModelParams | None = None) -> ConservationReport:
    """Largest deviation of the generating energy and of the scaled particle number."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    e = traj.e_fig * traj.params.epsilon / 2.0
    n = traj.n_scaled
    de = float(np.max(np.abs(e - e[0])))
    return ConservationReport(de, float(np.max(np.abs(n - n[0]))), de / max(1.0, abs(e[0])))
