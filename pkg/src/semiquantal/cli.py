"""Command-line driver writing CSV datasets and JSON run manifests."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    breakdown_sweep,
    compare_levels,
    confinement_stats,
    convergence_sweep,
    delta_approx,
    energy_section_state,
    poincare_portrait,
)
from .dynamics import IntegrationError, IntegratorConfig, conservation_report, integrate
from .model import MeanPoint, ModelParams, SemiState, complete_on_section, minimal_widths
from .quantum import build_hamiltonian, diagonalize, evolve_exact, spin_coherent

log = logging.getLogger(__name__)

COMMANDS = ("evolve", "poincare", "tunneling", "compare", "breakdown", "sweep")

EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2

HEADERS = {
    "evolve": ["t", "q_a", "p_a", "q_b", "p_b", "Q_a", "P_a", "Q_b", "P_b",
               "e_fig", "n_scaled", "jz_over_j", "jx_over_j"],
    "evolve_exact": ["t", "jz_over_j", "jx_over_j", "norm"],
    "poincare": ["ic_index", "crossing_index", "t", "q_a", "p_a", "status"],
    "tunneling": ["j", "e_fig", "t_c_mean", "t_p_mean", "ratio", "n_transitions", "status"],
    "compare": ["t", "jz_exact", "jz_classical", "jz_semiclassical"],
    "sweep": ["inv_j", "delta_classical", "delta_semiclassical"],
    "breakdown": ["inv_j", "t_b_classical", "t_b_semiclassical"],
}


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------

@dataclass
class RunConfig:
    command: str = ""
    epsilon: float = 1.0
    chi: float | None = None
    j: float | None = None
    nu_a: float = 0.0
    nu_b: float = 0.0
    level: str = "semiclassical"
    e_fig: float | None = None
    ic: str | None = None
    ic_grid: int = 8
    t_max: float = 20.0
    sample_dt: float = 0.05
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float = 0.5
    crossings: int = 500
    delta_max: float = 0.12
    hsc_source: str = "printed"
    j_list: str | None = None
    e_fig_list: str | None = None
    max_transitions: int = 1000
    budget: int = 10000
    out: str | None = None

    def params(self, j: float | None = None) -> ModelParams:
        return ModelParams(self.epsilon, self.chi, float(self.j if j is None else j),
                           self.nu_a, self.nu_b)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.rel_tol, self.abs_tol, self.max_step, self.sample_dt)

    def js(self) -> list[float]:
        if self.j_list:
            return _float_list(self.j_list, "j_list")
        return [self.j]

    def energies(self) -> list[float]:
        if self.e_fig_list:
            return _float_list(self.e_fig_list, "e_fig_list")
        return [self.e_fig]

    def output_path(self) -> Path:
        return Path(self.out if self.out else f"{self.command}.csv")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CHOICES = {
    "level": ("classical", "semiclassical", "exact"),
    "hsc_source": ("printed", "derived"),
}


def _float_list(text: str, key: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise ConfigError(f"{key} is empty")
    return vals


def _coerce(key: str, raw):
    kind = _FIELD_TYPES[key]
    if raw is None:
        return None
    try:
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("int"):
            if isinstance(raw, str) and not raw.strip().lstrip("+-").isdigit():
                raise ValueError
            return int(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot convert {raw!r} to {kind.split()[0]}") from exc
    return str(raw).strip()


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES or key == "command":
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        values[key] = value
    return values


def load_config(path, overrides: dict | None = None, command: str = "evolve") -> RunConfig:
    """Merge a flat ``key = value`` file with flag overrides and validate."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_config_text(p.read_text()))
    for key, value in (overrides or {}).items():
        if key not in _FIELD_TYPES or key == "command":
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = value
    cfg = RunConfig(command=command, **{k: _coerce(k, v) for k, v in values.items()})
    validate(cfg)
    return cfg


def _require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        if getattr(cfg, key) is None:
            raise ConfigError(f"missing required key {key!r} for {cfg.command}")


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {getattr(cfg, key)!r}")
    _require(cfg, "chi")
    if cfg.command in ("sweep", "breakdown"):
        _require(cfg, "j_list")
    elif cfg.command == "tunneling":
        if cfg.j is None and cfg.j_list is None:
            raise ConfigError("missing required key 'j' (or 'j_list') for tunneling")
        if cfg.e_fig is None and cfg.e_fig_list is None:
            raise ConfigError("missing required key 'e_fig' (or 'e_fig_list') for tunneling")
    else:
        _require(cfg, "j")
    if cfg.level == "exact" and cfg.command != "evolve":
        raise ConfigError("level 'exact' is only available for evolve")
    try:
        for j in cfg.js():
            cfg.params(j)
        cfg.integrator()
        if cfg.command == "evolve":
            _initial_state(cfg, cfg.params(cfg.js()[0]))
        if cfg.command == "poincare":
            _ic_set(cfg)
        if cfg.command == "tunneling":
            for e in cfg.energies():
                energy_section_state(cfg.params(cfg.js()[0]), e)
        if cfg.command in ("compare", "sweep", "breakdown"):
            _section_ic(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for key in ("t_max", "delta_max"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive")
    for key in ("crossings", "max_transitions", "budget", "ic_grid"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be >= 1")


def _parse_points(text: str) -> list[tuple[float, ...]]:
    pts = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        try:
            vals = tuple(float(x) for x in chunk.split(","))
        except ValueError as exc:
            raise ConfigError(f"ic: cannot parse {chunk!r}") from exc
        if len(vals) not in (2, 4):
            raise ConfigError(f"ic: expected 'qa,pa' or 'qa,pa,qb,pb', got {chunk!r}")
        pts.append(vals)
    if not pts:
        raise ConfigError("ic is empty")
    return pts


def _section_ic(cfg: RunConfig) -> tuple[float, float]:
    if cfg.ic is None:
        return 0.8, 0.0
    pts = _parse_points(cfg.ic)
    if len(pts) != 1 or len(pts[0]) != 2:
        raise ConfigError("this command takes a single section point 'qa,pa'")
    complete_on_section(*pts[0], cfg.params(cfg.js()[0]))
    return pts[0]


def _initial_state(cfg: RunConfig, params: ModelParams) -> SemiState:
    if cfg.ic is not None:
        pts = _parse_points(cfg.ic)
        if len(pts) != 1:
            raise ConfigError("evolve takes a single initial condition")
        if len(pts[0]) == 2:
            return complete_on_section(*pts[0], params)
        return SemiState(MeanPoint(*pts[0]), minimal_widths(params.nu_a, params.nu_b))
    if cfg.e_fig is not None:
        return energy_section_state(params, cfg.e_fig)
    raise ConfigError("an initial condition needs 'ic' or 'e_fig'")


def _ic_set(cfg: RunConfig) -> list[tuple[float, float]]:
    if cfg.ic is not None:
        pts = _parse_points(cfg.ic)
        if any(len(p) != 2 for p in pts):
            raise ConfigError("poincare seeds are section points 'qa,pa'")
        return [tuple(p) for p in pts]
    # seeds along both section axes reach every available energy
    r = math.sqrt(2.0) * (1 - 1e-3)
    s = np.linspace(-r, r, cfg.ic_grid + 2)[1:-1]
    return [(0.0, float(v)) for v in s] + [(float(v), 0.0) for v in s]


# -- output -------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".manifest.json")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_manifest(path: Path, cfg: RunConfig | dict, status: str, exit_code: int,
                   conservation, metrics, outputs, duration: float, error: str | None) -> None:
    doc = {
        "tool": "semiquantal",
        "version": __version__,
        "command": cfg["command"] if isinstance(cfg, dict) else cfg.command,
        "status": status,
        "exit_code": exit_code,
        "config": cfg if isinstance(cfg, dict) else asdict(cfg),
        "conservation": conservation,
        "metrics": metrics,
        "outputs": outputs,
        "duration_s": duration,
        "error": error,
    }
    _atomic_write(path, json.dumps(_jsonable(doc), indent=2) + "\n")


# -- commands -----------------------------------------------------------------
# each returns (rows, header, conservation, metrics, ok)

def cmd_evolve(cfg: RunConfig):
    params = cfg.params()
    state = _initial_state(cfg, params)
    if cfg.level == "exact":
        times = np.arange(int(math.floor(cfg.t_max / cfg.sample_dt + 1e-9)) + 1) * cfg.sample_dt
        series = evolve_exact(spin_coherent(state.mean, params.j),
                              diagonalize(build_hamiltonian(params)), times, params.j)
        rows = zip(series.times, series.jz_over_j, series.jx_over_j, series.norm)
        drift = float(np.max(np.abs(series.norm - 1.0)))
        return list(rows), HEADERS["evolve_exact"], {"max_norm_drift": drift}, {}, True
    traj = integrate(state, params, cfg.level, cfg.t_max, cfg.integrator(), cfg.hsc_source)
    rep = conservation_report(traj)
    c = traj.columns
    rows = [(t, *s, c["e_fig"][k], c["n_scaled"][k], c["jz_over_j"][k], c["jx_over_j"][k])
            for k, (t, s) in enumerate(zip(traj.times, traj.states))]
    metrics = {"e_fig_initial": float(c["e_fig"][0]), "n_samples": len(traj)}
    return rows, HEADERS["evolve"], asdict(rep), metrics, True


def cmd_poincare(cfg: RunConfig):
    params = cfg.params()
    if cfg.level == "exact":
        raise ConfigError("poincare needs level classical or semiclassical")
    entries = poincare_portrait(_ic_set(cfg), params, cfg.level, cfg.crossings,
                                cfg.integrator(), cfg.hsc_source)
    rows = []
    for e in entries:
        pts = e.run.points if e.run is not None else []
        if not pts:
            rows.append((e.ic_index, None, None, None, None, e.status))
        for p in pts:
            rows.append((e.ic_index, p.index, p.t, p.q_a, p.p_a, e.status))
    metrics = {
        "n_ics": len(entries),
        "n_failed": sum(not e.ok for e in entries),
        "ic_energies": [e.e_fig for e in entries],
    }
    return rows, HEADERS["poincare"], None, metrics, all(e.ok for e in entries)


def cmd_tunneling(cfg: RunConfig):
    rows, ok = [], True
    for j in cfg.js():
        for e in cfg.energies():
            m = confinement_stats(cfg.params(j), e, cfg.level, cfg.max_transitions, cfg.budget,
                                  cfg.integrator(), cfg.hsc_source)
            ok &= m.status == "ok"
            rows.append((j, e, m.t_c_mean, m.t_p_mean, m.ratio, m.n_transitions_observed,
                         m.status))
    metrics = {"total_transitions": sum(r[5] for r in rows)}
    return rows, HEADERS["tunneling"], None, metrics, ok


def cmd_compare(cfg: RunConfig):
    params = cfg.params()
    qa, pa = _section_ic(cfg)
    s = compare_levels(qa, pa, params, cfg.t_max, cfg.integrator(), cfg.hsc_source)
    metrics = {
        "delta_classical": delta_approx(s.exact, s.classical, s.dt),
        "delta_semiclassical": delta_approx(s.exact, s.semiclassical, s.dt),
    }
    rows = zip(s.times, s.exact, s.classical, s.semiclassical)
    return list(rows), HEADERS["compare"], None, metrics, True


def cmd_sweep(cfg: RunConfig):
    rows = convergence_sweep(cfg.js(), cfg.params(cfg.js()[0]), cfg.t_max, _section_ic(cfg),
                             cfg.integrator(), cfg.hsc_source)
    data = [(r.inv_j, r.delta_classical, r.delta_semiclassical) for r in rows]
    metrics = {"semiclassical_better": [r[2] < r[1] for r in data]}
    return data, HEADERS["sweep"], None, metrics, True


def cmd_breakdown(cfg: RunConfig):
    rows = breakdown_sweep(cfg.js(), cfg.params(cfg.js()[0]), cfg.t_max, cfg.delta_max,
                           _section_ic(cfg), cfg.integrator(), cfg.hsc_source)
    data = [(r.inv_j, r.t_b_classical, r.t_b_semiclassical) for r in rows]
    return data, HEADERS["breakdown"], None, {"delta_max": cfg.delta_max}, True


DISPATCH = {
    "evolve": cmd_evolve,
    "poincare": cmd_poincare,
    "tunneling": cmd_tunneling,
    "compare": cmd_compare,
    "breakdown": cmd_breakdown,
    "sweep": cmd_sweep,
}


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    sup = argparse.SUPPRESS
    shared.add_argument("--config", default=None, help="flat 'key = value' file")
    for flag, kind in [
        ("--epsilon", float), ("--chi", float), ("--j", float), ("--nu-a", float),
        ("--nu-b", float), ("--level", str), ("--e-fig", float), ("--ic", str),
        ("--ic-grid", int), ("--t-max", float), ("--sample-dt", float), ("--rel-tol", float),
        ("--abs-tol", float), ("--max-step", float), ("--crossings", int),
        ("--delta-max", float), ("--hsc-source", str), ("--j-list", str),
        ("--e-fig-list", str), ("--max-transitions", int), ("--budget", int), ("--out", str),
    ]:
        shared.add_argument(flag, type=kind, default=sup)
    shared.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="semiquantal", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[shared])
    return parser


def run(cfg: RunConfig) -> int:
    out = cfg.output_path()
    t0 = time.perf_counter()
    try:
        rows, header, cons, metrics, ok = DISPATCH[cfg.command](cfg)
    except IntegrationError as exc:
        log.error("%s", exc)
        write_manifest(manifest_path(out), cfg, "failed", EXIT_RUN_FAILED, None,
                       {"last_t": exc.last_t}, [], time.perf_counter() - t0, str(exc))
        return EXIT_RUN_FAILED
    write_csv(out, header, rows)
    code = EXIT_OK if ok else EXIT_RUN_FAILED
    write_manifest(manifest_path(out), cfg, "ok" if ok else "partial", code, cons, metrics,
                   [str(out)], time.perf_counter() - t0, None)
    return code


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.pop("command")
    path = args.pop("config")
    try:
        cfg = load_config(path, args, command)
    except ConfigError as exc:
        print(f"semiquantal {command}: configuration error: {exc}", file=sys.stderr)
        out = args.get("out") or f"{command}.csv"
        write_manifest(manifest_path(Path(out)), {"command": command, **args}, "invalid",
                       EXIT_CONFIG, None, None, [], 0.0, str(exc))
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
