"""Section portraits, confinement statistics and approximation-error metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.optimize import brentq

from . import _kernels
from .dynamics import (
    _STATUS_TEXT,
    IntegratorConfig,
    SectionRun,
    hamiltonian_value,
    integrate,
    pack_coupling,
    section_crossings,
)
from .model import (
    Level,
    ModelParams,
    SemiState,
    Source,
    complete_on_section,
    minimal_widths,
)
from .quantum import build_hamiltonian, diagonalize, evolve_exact, spin_coherent

log = logging.getLogger(__name__)

__all__ = [
    "AnalysisMetrics", "PortraitEntry", "ComparisonSeries", "SweepRow", "BreakdownRow",
    "poincare_portrait", "energy_section_state", "confinement_stats", "delta_approx",
    "windowed_delta", "breakdown_time", "compare_levels", "convergence_sweep",
    "breakdown_sweep",
]


@dataclass(frozen=True)
class AnalysisMetrics:
    t_c_mean: float | None = None
    t_p_mean: float | None = None
    ratio: float | None = None
    n_transitions_observed: int = 0
    n_crossings: int = 0
    delta_approx: float | None = None
    t_b: float | None = None
    status: str = "ok"


# -- portraits ----------------------------------------------------------------

@dataclass
class PortraitEntry:
    ic_index: int
    q_a: float
    p_a: float
    e_fig: float
    run: SectionRun | None
    status: str

    @property
    def ok(self) -> bool:
        return self.run is not None and self.run.complete


def poincare_portrait(ic_set, params: ModelParams, level: Level, n_crossings: int,
                      config: IntegratorConfig = IntegratorConfig(),
                      source: Source = "printed") -> list[PortraitEntry]:
    """Section crossings for each (q_a, p_a) seed; failures are recorded, not raised."""
    entries = []
    for k, (qa, pa) in enumerate(ic_set):
        try:
            state = complete_on_section(qa, pa, params)
        except ValueError as exc:
            entries.append(PortraitEntry(k, qa, pa, math.nan, None, f"infeasible: {exc}"))
            continue
        e = 2.0 * hamiltonian_value(state, params, level, source) / params.epsilon
        run = section_crossings(state, params, level, n_crossings, config, source)
        status = "ok" if run.complete else run.status
        entries.append(PortraitEntry(k, float(qa), float(pa), e, run, status))
    return entries


# -- confinement --------------------------------------------------------------

def energy_section_state(params: ModelParams, e_fig: float) -> SemiState:
    """Section point with q_a = 0, p_a < 0 and classical energy ``e_fig``.

    Along q_a = 0 the energy reads E(s) = 1 - s + (chi/eps) s (2 - s) / 2 with
    s = p_a^2; the root is taken between the pole s = 0 and the fixed point.
    """
    g = params.chi / params.epsilon
    if g >= -1.0:
        raise ValueError("deformed band exists only for chi/epsilon < -1")
    s_fix = 1.0 - 1.0 / g
    e_min = 1.0 - s_fix + g * s_fix * (2.0 - s_fix) / 2.0
    if not e_min < e_fig < 1.0:
        raise ValueError(f"e_fig={e_fig} outside the accessible range ({e_min:.6g}, 1)")
    if e_fig >= -1.0:
        log.warning("e_fig=%g is outside the deformed band", e_fig)
    s = brentq(lambda s: 1.0 - s + g * s * (2.0 - s) / 2.0 - e_fig, 0.0, s_fix, xtol=1e-15)
    return complete_on_section(0.0, -math.sqrt(s), params)


def confinement_stats(params: ModelParams, e_fig: float, level: Level = "semiclassical",
                      max_transitions: int = 1000, budget: int = 10_000,
                      config: IntegratorConfig = IntegratorConfig(),
                      source: Source = "printed", chunk: int = 2000) -> AnalysisMetrics:
    """Confinement time statistics from sign changes of p_a at section crossings.

    The run starts at t = 0 inside the p_a < 0 island, so every confinement
    interval, including the first, ends at a transition. Statistics use the
    crossings up to the ``max_transitions``-th transition; ``budget`` caps
    the total number of crossings.
    """
    if max_transitions < 1 or budget < 1:
        raise ValueError("max_transitions and budget must be >= 1")
    y = energy_section_state(params, e_fig).as_array()
    if level == "classical":
        y[4:] = minimal_widths(params.nu_a, params.nu_b).as_array()
    c = pack_coupling(params, level, source)
    t0 = 0.0
    times, signs = [], []
    n_tr = 0
    status = _kernels.STATUS_OK
    prev = -1.0
    while len(times) < budget and n_tr < max_transitions:
        want = min(chunk, budget - len(times))
        ts, st, found, status, t_end, y = _kernels.integrate_sections(
            y, c, want, 200.0 * want, config.rel_tol, config.abs_tol, config.max_step,
            config.min_step, 1e-11)
        for k in range(found):
            sgn = math.copysign(1.0, st[k, 1])
            times.append(t0 + ts[k])
            signs.append(sgn)
            if sgn != prev:
                n_tr += 1
                if n_tr == max_transitions:
                    break
            prev = sgn
        t0 += t_end
        if status != _kernels.STATUS_OK or found < want:
            break
    text = _STATUS_TEXT[int(status)]
    n_cross = len(times)
    if n_tr == 0:
        t_p = float(times[-1] / n_cross) if n_cross else None
        return AnalysisMetrics(None, t_p, None, 0, n_cross, status=text)
    sgn = np.asarray(signs)
    idx = np.flatnonzero(np.diff(np.concatenate([[-1.0], sgn])) != 0)[:max_transitions]
    last = idx[-1]
    t_last = times[last]
    t_c = t_last / idx.size
    t_p = t_last / (last + 1)
    return AnalysisMetrics(float(t_c), float(t_p), float(t_c / t_p), int(idx.size), n_cross,
                          status=text)


# -- error functional ---------------------------------------------------------

def _pair(exact, approx) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(exact, dtype=float)
    a = np.asarray(approx, dtype=float)
    if e.shape != a.shape or e.ndim != 1:
        raise ValueError(f"series shapes differ or are not 1-d: {e.shape} vs {a.shape}")
    if e.size < 2:
        raise ValueError("need at least two samples")
    return e, a


def delta_approx(exact, approx, dt: float) -> float:
    """Relative L1 distance, int |exact - approx| dt / int |exact| dt (trapezoid)."""
    e, a = _pair(exact, approx)
    den = trapezoid(np.abs(e), dx=dt)
    if den == 0.0:
        raise ValueError("reference series vanishes identically")
    return float(trapezoid(np.abs(e - a), dx=dt) / den)


def windowed_delta(exact, approx, dt: float) -> np.ndarray:
    """Delta on [0, t_k] for every grid index k >= 1 (NaN where undefined)."""
    e, a = _pair(exact, approx)
    num = cumulative_trapezoid(np.abs(e - a), dx=dt)
    den = cumulative_trapezoid(np.abs(e), dx=dt)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.nan)


def breakdown_time(exact, approx, dt: float, delta_max: float = 0.12) -> float | None:
    """First grid time whose window [0, t] has Delta above ``delta_max``."""
    if not delta_max > 0:
        raise ValueError("delta_max must be positive")
    w = windowed_delta(exact, approx, dt)
    hit = np.flatnonzero(w > delta_max)
    if hit.size == 0:
        return None
    return float((hit[0] + 1) * dt)


# -- level comparison ---------------------------------------------------------

@dataclass
class ComparisonSeries:
    times: np.ndarray
    exact: np.ndarray
    classical: np.ndarray
    semiclassical: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def compare_levels(q_a: float, p_a: float, params: ModelParams, t_max: float,
                   config: IntegratorConfig = IntegratorConfig(),
                   source: Source = "printed") -> ComparisonSeries:
    """<J_z>/J from the exact, classical and semiclassical runs on one grid."""
    state = complete_on_section(q_a, p_a, params)
    cl = integrate(state, params, "classical", t_max, config)
    sc = integrate(state, params, "semiclassical", t_max, config, source)
    n = min(len(cl), len(sc))
    times = cl.times[:n]
    decomp = diagonalize(build_hamiltonian(params))
    ex = evolve_exact(spin_coherent(state.mean, params.j), decomp, times, params.j)
    return ComparisonSeries(times, ex.jz_over_j, cl.jz_over_j[:n], sc.jz_over_j[:n])


@dataclass(frozen=True)
class SweepRow:
    inv_j: float
    delta_classical: float
    delta_semiclassical: float


@dataclass(frozen=True)
class BreakdownRow:
    inv_j: float
    t_b_classical: float | None
    t_b_semiclassical: float | None


def _with_j(params: ModelParams, j: float) -> ModelParams:
    return ModelParams(params.epsilon, params.chi, float(j), params.nu_a, params.nu_b)


def convergence_sweep(j_list, params: ModelParams, t_window: float, ic=(0.8, 0.0),
                      config: IntegratorConfig = IntegratorConfig(),
                      source: Source = "printed") -> list[SweepRow]:
    """Delta for both approximations over [0, t_window], one row per J."""
    if len(j_list) == 0:
        raise ValueError("j_list is empty")
    rows = []
    for j in j_list:
        s = compare_levels(ic[0], ic[1], _with_j(params, j), t_window, config, source)
        rows.append(SweepRow(1.0 / j, delta_approx(s.exact, s.classical, s.dt),
                             delta_approx(s.exact, s.semiclassical, s.dt)))
    return rows


def breakdown_sweep(j_list, params: ModelParams, t_max: float, delta_max: float = 0.12,
                    ic=(0.8, 0.0), config: IntegratorConfig = IntegratorConfig(),
                    source: Source = "printed") -> list[BreakdownRow]:
    """Breakdown times of both approximations per J; None if not reached by ``t_max``."""
    if len(j_list) == 0:
        raise ValueError("j_list is empty")
    rows = []
    for j in j_list:
        s = compare_levels(ic[0], ic[1], _with_j(params, j), t_max, config, source)
        rows.append(BreakdownRow(1.0 / j, breakdown_time(s.exact, s.classical, s.dt, delta_max),
                                 breakdown_time(s.exact, s.semiclassical, s.dt, delta_max)))
    return rows
