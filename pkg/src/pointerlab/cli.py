"""Command-line runner: reproducible experiment presets with CSV/JSON output.

Usage::

    pointerlab <subcommand> [--config cfg.json] [--seed N] [--out DIR]
                            [--format csv|json] [--threads N]
    pointerlab rerun manifest.json [--out DIR]

Every run writes its artifacts plus ``manifest.json`` (config, config hash,
seed, library versions and artifact hashes) into the output directory.  A
manifest is itself a valid ``--config``; re-running it reproduces every
artifact byte for byte.

Exit codes: 0 success, 2 invalid configuration, 3 numerical guard tripped.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .gaussian import (AlphaParam, PhasePoint, cat_state, equilibrium_width,
                       fiducial_alpha, fit_gaussian, make_pointer_state)
from .master import ModelParams, entropy_rate_initial, evolve_master, max_stable_dt
from .numerics import Grid, NumericalGuardError, hs_distance, linear_entropy
from .phasespace import (GaussianWeight, QuadratureError, diffusion_matrix,
                         evolve_weight, gmatrix, langevin_ensemble, reconstruct_rho)
from .qsd import NoiseSpec, localization_half_time, max_qsd_dt, run_ensemble
from .robustness import (det_condition, drift_rhs, evolve_drift, hs_speed,
                         proportionality_check, sieve_search)

SUBCOMMANDS = ("evolve-master", "evolve-drift", "qsd", "fokker-planck", "reconstruct",
               "sieve", "robustness", "units")
EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3
HBAR_CGS = 1.0546e-27


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# -- configuration ------------------------------------------------------------------

def _positive(section, name, value, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value) \
            or value <= 0:
        raise ConfigError(f"{section}.{name}: must be a positive number, got {value!r}")


def _integer(section, name, value, minimum, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{name}: must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{section}.{name}: {name} must be ≥ {minimum}")


def _finite(section, name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(f"{section}.{name}: must be a finite number, got {value!r}")


@dataclass(frozen=True)
class ModelSection:
    m: float = 1.0
    D: float = 1.0

    def validate(self):
        _positive("model", "m", self.m)
        _positive("model", "D", self.D)


@dataclass(frozen=True)
class GridSection:
    n_points: int = 256
    length: float | None = None  # default: 20 fiducial widths

    def validate(self):
        _integer("grid", "n_points", self.n_points, 8)
        _positive("grid", "length", self.length, allow_none=True)


@dataclass(frozen=True)
class TimeSection:
    dt: float | None = None  # default: the integrator's stability limit
    t_final: float = 1.0
    record_stride: int | None = None

    def validate(self):
        _positive("time", "dt", self.dt, allow_none=True)
        _positive("time", "t_final", self.t_final)
        _integer("time", "record_stride", self.record_stride, 1, allow_none=True)


@dataclass(frozen=True)
class AlphaSection:
    kind: str = "fiducial"
    re: float | None = None
    im: float | None = None

    def validate(self):
        if self.kind not in ("fiducial", "sieve", "explicit"):
            raise ConfigError(f"alpha_mode.kind: must be fiducial, sieve or explicit, got {self.kind!r}")
        if self.kind == "explicit":
            if self.re is None or self.im is None:
                raise ConfigError("alpha_mode: explicit mode needs re and im")
            _finite("alpha_mode", "im", self.im)
            if isinstance(self.re, bool) or not isinstance(self.re, (int, float)) or not self.re > 0:
                raise ConfigError(f"alpha_mode.re: must be > 0, got {self.re!r}")


@dataclass(frozen=True)
class NoiseSection:
    mode: str = "standard"
    seed: int = 0

    def validate(self):
        if self.mode not in ("standard", "alpha_general"):
            raise ConfigError(f"noise.mode: must be standard or alpha_general, got {self.mode!r}")
        _integer("noise", "seed", self.seed, 0)


@dataclass(frozen=True)
class EnsembleSection:
    n_traj: int = 100
    master_seed: int = 0
    batch_size: int = 64
    recenter: bool = False

    def validate(self):
        _integer("ensemble", "n_traj", self.n_traj, 1)
        _integer("ensemble", "master_seed", self.master_seed, 0)
        if self.master_seed >= 2 ** 64:
            raise ConfigError("ensemble.master_seed: must fit in 64 bits")
        _integer("ensemble", "batch_size", self.batch_size, 1)
        if not isinstance(self.recenter, bool):
            raise ConfigError("ensemble.recenter: must be true or false")


@dataclass(frozen=True)
class OutputSection:
    directory: str | None = None
    formats: tuple = ("csv",)

    def validate(self):
        if not self.formats or any(f not in ("csv", "json") for f in self.formats):
            raise ConfigError(f"outputs.formats: entries must be csv or json, got {list(self.formats)}")


@dataclass(frozen=True)
class InitialSection:
    kind: str = "pointer"
    x_bar: float = 0.0
    p_bar: float = 0.0
    separation: float = 10.0  # cat separation in units of the pointer width
    alpha_scale: float = 1.0

    def validate(self):
        if self.kind not in ("pointer", "cat"):
            raise ConfigError(f"initial.kind: must be pointer or cat, got {self.kind!r}")
        _finite("initial", "x_bar", self.x_bar)
        _finite("initial", "p_bar", self.p_bar)
        _positive("initial", "separation", self.separation)
        _positive("initial", "alpha_scale", self.alpha_scale)


@dataclass(frozen=True)
class UnitsSection:
    hbar: float = HBAR_CGS
    mass_cgs: float = 1e-14
    D_cgs: float = 1e32

    def validate(self):
        for name in ("hbar", "mass_cgs", "D_cgs"):
            _positive("units", name, getattr(self, name))


@dataclass(frozen=True)
class ReconstructSection:
    node_counts: tuple = (16, 24, 32, 48, 64, 96)

    def validate(self):
        if not self.node_counts:
            raise ConfigError("reconstruct.node_counts: must not be empty")
        for n in self.node_counts:
            _integer("reconstruct", "node_counts", n, 2)


_SECTIONS = {
    "model": ModelSection, "grid": GridSection, "time": TimeSection,
    "alpha_mode": AlphaSection, "noise": NoiseSection, "ensemble": EnsembleSection,
    "outputs": OutputSection, "initial": InitialSection, "units": UnitsSection,
    "reconstruct": ReconstructSection,
}
_TUPLE_FIELDS = {("outputs", "formats"), ("reconstruct", "node_counts")}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    alpha_mode: AlphaSection = field(default_factory=AlphaSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    outputs: OutputSection = field(default_factory=OutputSection)
    initial: InitialSection = field(default_factory=InitialSection)
    units: UnitsSection = field(default_factory=UnitsSection)
    reconstruct: ReconstructSection = field(default_factory=ReconstructSection)

    def __post_init__(self):
        for name in _SECTIONS:
            getattr(self, name).validate()

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be a JSON object")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"config: unknown section(s) {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            raw = data.get(name, {})
            if name == "alpha_mode" and isinstance(raw, str):
                raw = {"kind": raw}
            if not isinstance(raw, dict):
                raise ConfigError(f"{name}: must be an object")
            allowed = {f.name for f in dataclasses.fields(section_cls)}
            extra = set(raw) - allowed
            if extra:
                raise ConfigError(f"{name}.{sorted(extra)[0]}: unknown field")
            raw = {k: tuple(v) if (name, k) in _TUPLE_FIELDS and isinstance(v, list) else v
                   for k, v in raw.items()}
            kwargs[name] = section_cls(**raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for sec, key in _TUPLE_FIELDS:
            out[sec][key] = list(out[sec][key])
        return out

    def replace(self, section: str, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})


def load_config(path) -> tuple[RunConfig, str | None]:
    """Read a config or manifest file; returns the config and, for a manifest,
    its subcommand."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc.msg}, line {exc.lineno})") from None
    if isinstance(data, dict) and "subcommand" in data and "config" in data:
        return RunConfig.from_dict(data["config"]), data["subcommand"]
    return RunConfig.from_dict(data), None


# -- units ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitContext:
    """CGS constants for restoring ``hbar`` (erg s, g, cm**-2 s**-1)."""

    hbar: float = HBAR_CGS
    mass_cgs: float = 1e-14
    D_cgs: float = 1e32

    def __post_init__(self):
        for name in ("hbar", "mass_cgs", "D_cgs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def convert_units(ctx: UnitContext) -> dict:
    """Pointer width and decoherence time in CGS.

    ``sigma0 = (D m / hbar)**(-1/4)`` in cm and ``t_D = sqrt(m / (hbar D))``
    in s, with ``hbar`` restored by dimensional analysis.
    """
    sigma0 = (ctx.D_cgs * ctx.mass_cgs / ctx.hbar) ** -0.25
    t_D = np.sqrt(ctx.mass_cgs / (ctx.hbar * ctx.D_cgs))
    return {"sigma0_cm": float(sigma0), "t_D_s": float(t_D)}


# -- artifact writing ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _json_bytes(obj) -> bytes:
    return (json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


class ArtifactWriter:
    """Single writer for all artifacts of a run; records content hashes."""

    def __init__(self, directory: Path, formats):
        self.directory = Path(directory)
        self.formats = tuple(formats)
        self.hashes: dict[str, str] = {}

    def _write(self, name: str, data: bytes):
        path = self.directory / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.hashes[name] = hashlib.sha256(data).hexdigest()

    def table(self, stem: str, columns, rows):
        """Write a table; ``columns`` are ``name[unit]`` headers."""
        rows = [list(r) for r in rows]
        if "csv" in self.formats:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
            self._write(stem + ".csv", buf.getvalue().encode())
        if "json" in self.formats:
            self._write(stem + ".json", _json_bytes({"columns": list(columns), "rows": rows}))

    def summary(self, name: str, obj):
        self._write(name, _json_bytes(obj))


def _versions() -> dict:
    return {"pointerlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def config_hash(config: RunConfig) -> str:
    d = config.to_dict()
    d["outputs"]["directory"] = None
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# -- shared setup --------------------------------------------------------------------

def _params(cfg: RunConfig) -> ModelParams:
    return ModelParams(m=cfg.model.m, D=cfg.model.D)


def _grid(cfg: RunConfig) -> Grid:
    length = cfg.grid.length
    if length is None:
        length = 20 * equilibrium_width(cfg.model.D, cfg.model.m)
    return Grid(cfg.grid.n_points, float(length))


def _alpha(cfg: RunConfig) -> AlphaParam:
    a = cfg.alpha_mode
    if a.kind == "fiducial":
        return fiducial_alpha(cfg.model.D, cfg.model.m)
    if a.kind == "sieve":
        return sieve_search(_params(cfg)).alpha
    return AlphaParam(a.re, a.im)


def _initial_state(cfg: RunConfig, grid: Grid, alpha: AlphaParam):
    ini = cfg.initial
    alpha0 = alpha.scaled(ini.alpha_scale)
    if ini.kind == "cat":
        return cat_state(grid, alpha0, ini.separation * alpha0.re ** -0.5)
    return make_pointer_state(grid, alpha0, PhasePoint(ini.x_bar, ini.p_bar))


def _dt(cfg: RunConfig, limit: float) -> float:
    return limit if cfg.time.dt is None else cfg.time.dt


def _alpha_json(alpha: AlphaParam) -> dict:
    return {"re": alpha.re, "im": alpha.im}


# -- subcommands -----------------------------------------------------------------------

def cmd_evolve_master(cfg, out: ArtifactWriter, threads: int):
    params, grid = _params(cfg), _grid(cfg)
    alpha = _alpha(cfg)
    psi = _initial_state(cfg, grid, alpha)
    dt = _dt(cfg, max_stable_dt(grid, params))
    run = evolve_master(psi.projector(), params, cfg.time.t_final, dt, cfg.time.record_stride)
    obs = run.observables()
    rows = zip(obs["t"], obs["purity"], 1 - obs["purity"], obs["mean_x"], obs["mean_p"],
               obs["var_x"], obs["var_p"])
    out.table("evolve_master",
              ["t[time]", "purity[1]", "linear_entropy[1]", "mean_x[length]",
               "mean_p[momentum]", "var_x[length^2]", "var_p[momentum^2]"], rows)
    summary = {"initial_entropy_rate": entropy_rate_initial(psi, params),
               "final_purity": float(obs["purity"][-1]),
               "n_records": len(run.times), "positivity_warnings": run.warnings}
    out.summary("evolve_master_summary.json", summary)
    print(f"final purity {summary['final_purity']:.6f} at t={cfg.time.t_final:g}")


def cmd_evolve_drift(cfg, out, threads):
    params, grid = _params(cfg), _grid(cfg)
    alpha = _alpha(cfg)
    psi = _initial_state(cfg, grid, alpha)
    dt = _dt(cfg, max_stable_dt(grid, params))
    run = evolve_drift(psi, params, cfg.time.t_final, dt, cfg.time.record_stride)
    rows = []
    for t, s in zip(run.times, run.states):
        fit = fit_gaussian(s)
        rows.append([t, fit.gamma.x_bar, fit.gamma.p_bar, 1 / fit.alpha.re,
                     fit.alpha.re, fit.alpha.im, fit.fidelity])
    out.table("evolve_drift",
              ["t[time]", "mean_x[length]", "mean_p[momentum]", "var_x[length^2]",
               "alpha_re[length^-2]", "alpha_im[length^-2]", "gaussian_fidelity[1]"], rows)
    fid = fiducial_alpha(params.D, params.m)
    final = fit_gaussian(run.final).alpha
    err = abs(final.value - fid.value) / abs(fid.value)
    out.summary("evolve_drift_summary.json",
                {"final_alpha": _alpha_json(final), "fiducial_alpha": _alpha_json(fid),
                 "relative_error": err})
    print(f"final alpha {final.re:.7f}{final.im:+.7f}i, relative error to fiducial {err:.3e}")


def cmd_qsd(cfg, out, threads):
    params, grid = _params(cfg), _grid(cfg)
    alpha = _alpha(cfg)
    psi = _initial_state(cfg, grid, alpha)
    dt = _dt(cfg, max_qsd_dt(grid, params))
    spec = NoiseSpec.for_model(params, cfg.noise.mode,
                               alpha if cfg.noise.mode == "alpha_general" else None,
                               cfg.noise.seed)
    ens = run_ensemble(psi, params, spec, cfg.time.t_final, dt, cfg.ensemble.n_traj,
                       cfg.ensemble.master_seed, cfg.time.record_stride,
                       batch_size=cfg.ensemble.batch_size, threads=threads,
                       recenter=cfg.ensemble.recenter)
    cols = ["t[time]", "mean_x[length]", "mean_p[momentum]", "var_x[length^2]",
            "gaussian_fidelity[1]"]
    for i, rec in enumerate(ens.records):
        out.table(f"qsd_trajectories/traj_{i:05d}",
                  cols, zip(rec.times, rec.centers[:, 0], rec.centers[:, 1], rec.variances,
                            rec.gaussian_fidelity))
    fid = ens.stack("gaussian_fidelity")
    var = ens.stack("variances")
    xs = ens.stack("x")
    summary = {
        "n_traj": cfg.ensemble.n_traj, "mode": cfg.noise.mode, "dt": dt,
        "alpha": _alpha_json(alpha), "seeds": ens.seeds,
        "median_final_fidelity": float(np.median(fid[:, -1])),
        "median_final_var_x": float(np.median(var[:, -1])),
        "pointer_var_x": 1 / alpha.re,
        "localization_half_time": localization_half_time(ens.times, fid),
    }
    if cfg.initial.kind == "cat":
        branch = []
        for f_row, x_row in zip(fid, xs):
            hit = np.nonzero(f_row >= 0.99)[0]
            branch.append(int(np.sign(x_row[hit[0]])) if hit.size else 0)
        branch = np.array(branch)
        summary["branch_fraction_positive"] = float(np.mean(branch > 0))
        summary["branch_fraction_negative"] = float(np.mean(branch < 0))
        summary["unlocalized_fraction"] = float(np.mean(branch == 0))
    out.summary("qsd_summary.json", summary)
    print(f"{cfg.ensemble.n_traj} trajectories; median final fidelity "
          f"{summary['median_final_fidelity']:.6f}")


def cmd_fokker_planck(cfg, out, threads):
    params = _params(cfg)
    alpha = _alpha(cfg)
    dmat = diffusion_matrix(alpha, params)
    t_final = cfg.time.t_final
    dt = cfg.time.dt if cfg.time.dt is not None else t_final / 100
    n_steps = max(1, int(np.ceil(t_final / dt - 1e-9)))
    h = t_final / n_steps
    stride = cfg.time.record_stride or max(1, n_steps // 10)
    w0 = GaussianWeight.point_mass(PhasePoint(cfg.initial.x_bar, cfg.initial.p_bar))
    rng = np.random.default_rng(cfg.ensemble.master_seed)
    g = np.tile(w0.mean.as_array(), (cfg.ensemble.n_traj, 1))
    rows = []
    step = 0
    while True:
        t = step * h
        w = evolve_weight(w0, dmat, params.m, t)
        mc_mean = g.mean(axis=0)
        mc_cov = np.cov(g.T) if g.shape[0] > 1 else np.zeros((2, 2))
        rows.append([t, w.mean.x_bar, w.mean.p_bar, w.cov.xx, w.cov.xp, w.cov.pp,
                     mc_mean[0], mc_mean[1], mc_cov[0, 0], mc_cov[0, 1], mc_cov[1, 1]])
        if step >= n_steps:
            break
        k = min(stride, n_steps - step)
        g = langevin_ensemble(g, dmat, params.m, h, k, rng)
        step += k
    out.table("fokker_planck",
              ["t[time]", "mean_x[length]", "mean_p[momentum]", "cov_xx[length^2]",
               "cov_xp[length*momentum]", "cov_pp[momentum^2]", "mc_mean_x[length]",
               "mc_mean_p[momentum]", "mc_cov_xx[length^2]", "mc_cov_xp[length*momentum]",
               "mc_cov_pp[momentum^2]"], rows)
    closed = evolve_weight(w0, dmat, params.m, t_final).cov.as_array()
    ode = evolve_weight(w0, dmat, params.m, t_final, method="ode").cov.as_array()
    G = gmatrix(t_final, dmat, params.m)
    out.summary("fokker_planck_summary.json", {
        "alpha": _alpha_json(alpha), "admissible": dmat.admissible,
        "diffusion_matrix": dmat.as_array(), "G_final": G.as_array(),
        "closed_vs_ode_max_abs": float(np.max(np.abs(closed - ode))),
        "n_samples": cfg.ensemble.n_traj, "dt": h})
    print(f"diffusion matrix det {dmat.det:.3e}; covariance at t={t_final:g}: "
          f"{closed[0, 0]:.6g} {closed[0, 1]:.6g} {closed[1, 1]:.6g}")


def cmd_reconstruct(cfg, out, threads):
    params, grid = _params(cfg), _grid(cfg)
    alpha = _alpha(cfg)
    gamma = PhasePoint(cfg.initial.x_bar, cfg.initial.p_bar)
    psi = make_pointer_state(grid, alpha, gamma)
    dt = _dt(cfg, max_stable_dt(grid, params))
    rho_t = evolve_master(psi.projector(), params, cfg.time.t_final, dt,
                          monitor_positivity=False).final
    weight = evolve_weight(GaussianWeight.point_mass(gamma), diffusion_matrix(alpha, params),
                           params.m, cfg.time.t_final)
    rows = []
    for n in cfg.reconstruct.node_counts:
        try:
            rec = reconstruct_rho(weight, alpha, grid, n_nodes=n)
            rows.append([n, hs_distance(rec, rho_t), "ok"])
        except QuadratureError:
            rows.append([n, float("nan"), "under-resolved"])
    out.table("reconstruct", ["n_nodes[1]", "hs_distance[1]", "status[-]"], rows)
    ok = [r[1] for r in rows if r[2] == "ok"]
    out.summary("reconstruct_summary.json", {
        "t": cfg.time.t_final, "alpha": _alpha_json(alpha),
        "best_hs_distance": min(ok) if ok else None,
        "master_linear_entropy": linear_entropy(rho_t)})
    for n, d, status in rows:
        print(f"n_nodes={n:4d}  hs_distance={d:.3e}  {status}")


def cmd_sieve(cfg, out, threads):
    params = _params(cfg)
    opt = sieve_search(params)
    a = opt.alpha
    print(f"alpha_s = {a.re:.7f} {'-' if a.im < 0 else '+'} {abs(a.im):.7f}i")
    print(f"constraint residual = {opt.constraint_residual:.3e}")
    print(f"det D = {opt.det_D:.3e}")
    out.summary("sieve.json", {"alpha_s": _alpha_json(a), "phi": opt.phi, "R": opt.R,
                               "constraint_residual": opt.constraint_residual,
                               "det_D": opt.det_D,
                               "diffusion_matrix": diffusion_matrix(a, params).as_array()})


def cmd_robustness(cfg, out, threads):
    params, grid = _params(cfg), _grid(cfg)
    candidates = {"fiducial": fiducial_alpha(params.D, params.m),
                  "sieve": sieve_search(params).alpha}
    if cfg.alpha_mode.kind == "explicit":
        candidates["explicit"] = _alpha(cfg)
    rows = []
    for label, alpha in candidates.items():
        psi = make_pointer_state(grid, alpha)
        v = hs_speed(psi, drift_rhs(psi, params), params)
        prop = proportionality_check(alpha, params)
        dmat = diffusion_matrix(alpha, params)
        rows.append([label, alpha.re, alpha.im, v, dmat.det, det_condition(alpha, params),
                     prop.residual, prop.constant])
        print(f"{label:9s} alpha={alpha.re:.6f}{alpha.im:+.6f}i  v={v:.6e}  det D={dmat.det:.3e}"
              f"  proportionality residual={prop.residual:.2e}")
    out.table("robustness", ["state[-]", "alpha_re[length^-2]", "alpha_im[length^-2]",
                             "hs_speed[time^-1]", "det_D[1]", "q[1]",
                             "proportionality_residual[1]", "proportionality_constant[1]"],
              rows)


def cmd_units(cfg, out, threads):
    u = cfg.units
    res = convert_units(UnitContext(u.hbar, u.mass_cgs, u.D_cgs))
    print(f"sigma0 = {res['sigma0_cm']:.3e} cm")
    print(f"t_D = {res['t_D_s']:.3e} s")
    out.summary("units.json", {"inputs": {"hbar_erg_s": u.hbar, "mass_g": u.mass_cgs,
                                          "D_cm^-2_s^-1": u.D_cgs}, **res})


COMMANDS = {
    "evolve-master": cmd_evolve_master, "evolve-drift": cmd_evolve_drift, "qsd": cmd_qsd,
    "fokker-planck": cmd_fokker_planck, "reconstruct": cmd_reconstruct, "sieve": cmd_sieve,
    "robustness": cmd_robustness, "units": cmd_units,
}


def run(subcommand: str, config: RunConfig, out_dir=None, threads: int = 1) -> int:
    """Run one subcommand and write its artifacts and manifest; returns the exit code."""
    if subcommand not in COMMANDS:
        print(f"config error: unknown subcommand {subcommand!r}", file=sys.stderr)
        return EXIT_CONFIG
    directory = Path(out_dir or config.outputs.directory or "out")
    writer = ArtifactWriter(directory, config.outputs.formats)
    try:
        COMMANDS[subcommand](config, writer, threads)
    except NumericalGuardError as exc:
        print(f"numerical guard: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest_cfg = config.to_dict()
    manifest_cfg["outputs"]["directory"] = None
    manifest = {"subcommand": subcommand, "config": manifest_cfg,
                "config_sha256": config_hash(config),
                "seed": config.ensemble.master_seed, "versions": _versions(),
                "artifacts": dict(sorted(writer.hashes.items()))}
    (directory / "manifest.json").write_bytes(_json_bytes(manifest))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointerlab",
                                     description="Pointer-state experiments for a decohered free particle")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config or manifest")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("--threads", type=int, default=1, help="trajectory worker threads")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    rr = sub.add_parser("rerun", parents=[common], help="re-run a manifest")
    rr.add_argument("manifest", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        subcommand = args.subcommand
        cfg, from_manifest = RunConfig(), None
        path = args.manifest if subcommand == "rerun" else args.config
        if path is not None:
            cfg, from_manifest = load_config(path)
        if subcommand == "rerun":
            if from_manifest is None:
                raise ConfigError(f"rerun: {path} is not a manifest")
            subcommand = from_manifest
        elif from_manifest is not None and from_manifest != subcommand:
            raise ConfigError(f"config: manifest is for {from_manifest!r}, not {subcommand!r}")
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg = cfg.replace("ensemble", master_seed=args.seed).replace("noise", seed=args.seed)
        if args.format is not None:
            cfg = cfg.replace("outputs", formats=(args.format,))
        if args.threads < 1:
            raise ConfigError("--threads: must be ≥ 1")
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(subcommand, cfg, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
