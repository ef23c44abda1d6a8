"""Command-line front end.

Each subcommand resolves a config, runs one protocol and writes CSV/JSON
(and optionally SVG) outputs plus a manifest into the output directory.
Exit codes: 0 success, 2 configuration or usage error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.special import jv

from . import __version__
from .analysis import (
    asymmetry_metric,
    band_from_wavefunction,
    bloch_period_estimate,
    center_of_mass,
    lorentzian_fit,
    ridge_asymmetry,
    spread,
)
from .config import build_experiment, config_digest, load_toml, resolve, with_override
from .errors import ConfigError, NumericalError, ProtocolError, SynthLatError
from .model import build_lab_hamiltonian, dispersion_analytic, effective_flux
from .evolution import StaticPropagator
from .output import (
    write_band_csv,
    write_chevron_csv,
    write_heatmap_svg,
    write_json,
    write_population_csv,
)
from .protocols import (
    DoubleTone,
    ExperimentConfig,
    Reversal,
    SingleSitePrep,
    SingleTone,
    WavePacketPrep,
    measure_quadratures,
    prepare_single_site,
    readout_mode,
    run_experiment,
    swap_duration,
)

COMMANDS = ("rabi", "walk", "bloch", "band", "flux", "unidir", "sweep")
OUT_ENV = "SYNTHLAT_OUT"
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EDGE_TOL = 1e-3


class Outputs:
    """Collects files written for the manifest."""

    def __init__(self, out_dir: Path, svg: bool):
        self.dir = out_dir
        self.svg = svg
        self.items: list[dict] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def add(self, kind: str, path: Path):
        self.items.append({"kind": kind, "path": path.relative_to(self.dir).as_posix()})

    def populations(self, pop, title: str):
        self.add("populations", write_population_csv(self.dir / "populations.csv", pop))
        if self.svg:
            path = write_heatmap_svg(self.dir / "populations.svg", pop.p.T,
                                     "mode", "time (us)", title)
            self.add("svg", path)

    def band(self, band, title: str):
        self.add("band", write_band_csv(self.dir / "band.csv", band))
        if self.svg:
            cols = np.nonzero(band.intensity.max(axis=0) > 1e-3)[0]
            lo = max(int(cols.min()) - 4, 0) if cols.size else 0
            hi = min(int(cols.max()) + 5, band.omega_grid.size) if cols.size else band.omega_grid.size
            path = write_heatmap_svg(self.dir / "band.svg", band.intensity[:, lo:hi].T,
                                     "k (rad/site)", "omega (MHz)", title)
            self.add("svg", path)

    def fit(self, data: dict):
        self.add("fit", write_json(self.dir / "fit.json", data))


# -- subcommands -------------------------------------------------------------

def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def run_rabi(cfg: ExperimentConfig, out: Outputs) -> dict:
    """Vacuum-Rabi oscillations with the qubit parked on each readout mode."""
    lattice = cfg.lattice
    if cfg.coupler.kappa <= 0:
        raise ProtocolError("JC coupling is zero: no vacuum-Rabi oscillation")
    n_t = int(math.floor(cfg.total_time / cfg.readout.dt + 1e-9)) + 1
    times = np.arange(n_t) * cfg.readout.dt
    modes = np.array(cfg.readout_modes)
    p_mode = np.empty((modes.size, n_t))
    p1 = np.empty((modes.size, n_t))
    start = np.zeros(lattice.n_modes + 1, dtype=complex)
    start[0] = 1.0
    for i, m in enumerate(modes):
        coupler = cfg.coupler.tuned_to(lattice, int(m))
        vecs = StaticPropagator(build_lab_hamiltonian(lattice, (), coupler)).apply_many(start, times)
        p1[i] = np.abs(vecs[:, 0]) ** 2
        p_mode[i] = np.abs(vecs[:, 1 + lattice.position(int(m))]) ** 2
    out.add("chevron", write_chevron_csv(out.dir / "chevron.csv", times, modes, p1, p_mode))
    if out.svg:
        out.add("svg", write_heatmap_svg(out.dir / "chevron.svg", p1.T, "mode", "time (us)",
                                         "vacuum Rabi P1"))
    m0 = cfg.prep.m if isinstance(cfg.prep, SingleSitePrep) else 0
    duration = swap_duration(lattice, cfg.coupler.tuned_to(lattice, m0), m0)
    prep_cfg = ExperimentConfig(lattice=lattice, coupler=cfg.coupler, prep=SingleSitePrep(m0),
                                total_time=cfg.total_time)
    prep = prepare_single_site(prep_cfg)
    analytic = 1.0 / (4.0 * cfg.coupler.kappa)
    summary = {
        "kappa_MHz": cfg.coupler.kappa,
        "mode": m0,
        "swap_duration_us": duration,
        "analytic_swap_us": analytic,
        "relative_deviation": duration / analytic - 1.0,
        "swap_population": float(prep.state.populations[lattice.position(m0)]),
        "round_trip": readout_mode(prep_cfg, prep.state, m0),
    }
    out.fit(summary)
    return summary


def _light_cone_check(cfg: ExperimentConfig, result) -> dict | None:
    drive = cfg.drive
    if not (isinstance(drive, SingleTone) and drive.order == 1 and drive.detuning == 0
            and isinstance(cfg.prep, SingleSitePrep)):
        return None
    pop = result.populations
    m = pop.modes - cfg.prep.m
    edge = result.amplitudes[[0, -1]]
    ok = np.max(np.abs(edge) ** 2, axis=0) < 1e-6
    if not ok.any():
        return None
    arg = 2.0 * np.pi * 2.0 * drive.strength * pop.times[ok]
    bessel = jv(m[:, None], arg[None, :]) ** 2
    return {"bessel_max_deviation": float(np.max(np.abs(pop.p[:, ok] - bessel))),
            "bessel_window_us": float(pop.times[ok].max())}


def run_walk(cfg: ExperimentConfig, out: Outputs) -> dict:
    _require(not isinstance(cfg.drive, Reversal), "walk needs a static drive program")
    result = run_experiment(cfg)
    out.populations(result.populations, "quantum walk")
    p_final = result.populations.p[:, -1]
    summary = {
        "final_center_of_mass": center_of_mass(p_final, result.populations.modes),
        "final_spread": spread(p_final, result.populations.modes),
        "max_edge_population": float(np.max(np.abs(result.amplitudes[[0, -1]]) ** 2)),
        "swap_residual_p1": result.preparation.residual_p1,
    }
    cone = _light_cone_check(cfg, result)
    if cone:
        summary.update(cone)
    out.fit(summary)
    return summary


def bloch_series(result) -> tuple[str, np.ndarray]:
    """Center of mass for wave packets, spread for single-site states."""
    pop = result.populations
    if isinstance(result.config.prep, WavePacketPrep):
        return "center_of_mass", np.array([center_of_mass(pop.p[:, j], pop.modes)
                                           for j in range(pop.times.size)])
    return "spread", np.array([spread(pop.p[:, j], pop.modes) for j in range(pop.times.size)])


def clean_window(result, edge_tol: float = EDGE_TOL) -> int:
    """Number of leading samples before either end mode exceeds ``edge_tol``."""
    edge = np.max(np.abs(result.amplitudes[[0, -1]]) ** 2, axis=0)
    hit = np.nonzero(edge > edge_tol)[0]
    return int(hit[0]) if hit.size else edge.size


def run_bloch(cfg: ExperimentConfig, out: Outputs) -> dict:
    _require(not isinstance(cfg.drive, Reversal), "bloch needs a static drive program")
    result = run_experiment(cfg)
    out.populations(result.populations, "Bloch oscillation")
    order = cfg.drive.order if isinstance(cfg.drive, SingleTone) else 1
    detuning = cfg.drive.detuning
    summary = {"detuning_MHz": detuning,
               "theory_period_us": (1.0 / (order * abs(detuning)) if detuning else None),
               "divergent": detuning == 0}
    kind, series = bloch_series(result)
    # reflections off the lattice ends mimic an oscillation; stop before them
    n_ok = clean_window(result)
    summary["series"] = kind
    summary["window_us"] = float(result.populations.times[n_ok - 1])
    try:
        summary["period_us"] = bloch_period_estimate(result.populations.times[:n_ok],
                                                     series[:n_ok])
        summary["estimation_error"] = None
    except NumericalError as exc:
        summary["period_us"] = None
        summary["estimation_error"] = str(exc)
    if isinstance(cfg.prep, WavePacketPrep):
        summary["initial_fit"] = _packet_fit(cfg, result)
    out.fit(summary)
    return summary


def _packet_fit(cfg, result) -> dict:
    fit = lorentzian_fit(result.preparation.state.populations, cfg.lattice.indices,
                         cfg.lattice.fsr)
    return fit.as_dict() | {"emission_time_us": result.preparation.duration,
                            "residual_p1": result.preparation.residual_p1}


def run_band(cfg: ExperimentConfig, out: Outputs) -> dict:
    _require(not isinstance(cfg.drive, Reversal), "band needs a static drive program")
    _require(cfg.drive.detuning == 0, "band needs drive.detuning = 0 (untilted lattice)")
    _require(cfg.prep.vacuum_superposition,
             "band needs prep.vacuum_superposition = true for the quadrature readout")
    result = run_experiment(cfg)
    out.populations(result.populations, "band measurement populations")
    # <X> + i<Y> of each mode, halved, is conj(C_vac) * C_m
    psi = np.array([[0.5 * complex(*measure_quadratures(state, pos))
                     for _, state in result.trajectory]
                    for pos in range(cfg.lattice.n_modes)])
    band = band_from_wavefunction(psi, cfg.readout.dt, result.populations.times)
    out.band(band, "band structure")
    tones = cfg.drive.tones(cfg.lattice.fsr)
    err = band.ridge[:, 1] - dispersion_analytic(tones, band.ridge[:, 0])
    summary = {
        "ridge_rms_error_MHz": float(np.sqrt(np.mean(err**2))),
        "omega_cell_MHz": band.omega_step,
        "ridge_asymmetry_MHz": ridge_asymmetry(band),
        "ridge": band.ridge,
    }
    out.fit(summary)
    return summary


def run_flux(cfg: ExperimentConfig, out: Outputs) -> dict:
    _require(isinstance(cfg.drive, DoubleTone), "flux needs drive.program = 'double_tone'")
    result = run_experiment(cfg)
    out.populations(result.populations, "gauge flux dynamics")
    d = cfg.drive
    k = np.linspace(-np.pi, np.pi, 721)
    tones = d.tones(cfg.lattice.fsr, 0.0)
    e = dispersion_analytic(tones, k)
    summary = {
        "flux_rad": effective_flux(d.phi1, d.phi2),
        "flux_canonical_rad": effective_flux(d.phi1, d.phi2, canonical=True),
        "asymmetry": asymmetry_metric(result.populations.p, result.populations.modes),
        "analytic_band_asymmetry_MHz": float(np.max(np.abs(e - e[::-1]))),
    }
    out.fit(summary)
    return summary


def boundary_centers(result, half_period: float):
    pop = result.populations
    boundaries = np.arange(0.0, pop.times[-1] + 1e-9, half_period)
    out = []
    for tb in boundaries:
        j = int(np.argmin(np.abs(pop.times - tb)))
        out.append((float(pop.times[j]), center_of_mass(pop.p[:, j], pop.modes)))
    return out


def run_unidir(cfg: ExperimentConfig, out: Outputs) -> dict:
    _require(isinstance(cfg.drive, Reversal), "unidir needs drive.program = 'reversal'")
    result = run_experiment(cfg)
    out.populations(result.populations, "unidirectional transport")
    centers = boundary_centers(result, cfg.drive.half_period)
    xs = np.array([c for _, c in centers])
    steps = np.diff(xs)
    summary = {
        "boundary_centers": centers,
        "drift_sites": float(xs[-1] - xs[0]),
        "monotone": bool(np.all(steps > 0) or np.all(steps < 0)),
        "initial_fit": _packet_fit(cfg, result) if isinstance(cfg.prep, WavePacketPrep) else None,
    }
    out.fit(summary)
    return summary


RUNNERS = {"rabi": run_rabi, "walk": run_walk, "bloch": run_bloch, "band": run_band,
           "flux": run_flux, "unidir": run_unidir}


def cmd_run(command: str, resolved: dict, defaults: list, out_dir: Path, seed: int = 0,
            shots: int | None = None, svg: bool | None = None) -> dict:
    """Run one protocol and write its manifest; returns the manifest."""
    if command not in RUNNERS:
        raise ConfigError(f"unknown subcommand {command!r}")
    cfg = build_experiment(resolved, seed, shots)
    use_svg = resolved["output"]["svg"] if svg is None else svg
    out = Outputs(Path(out_dir), use_svg)
    summary = RUNNERS[command](cfg, out)
    manifest = {
        "command": command,
        "config_digest": config_digest(resolved),
        "seed": seed,
        "shots": cfg.shots,
        "tool_version": __version__,
        "resolved_config": resolved,
        "defaults_applied": defaults,
        "outputs": out.items + [{"kind": "manifest", "path": "manifest.json"}],
        "summary_keys": sorted(summary),
    }
    write_json(out.dir / "manifest.json", manifest)
    return manifest


def _sweep_values(resolved: dict) -> list[float]:
    s = resolved["sweep"]
    if s["values"] is not None:
        return list(s["values"])
    if None in (s["start"], s["stop"], s["step"]) or s["step"] <= 0:
        raise ConfigError("sweep needs sweep.values or sweep.start/stop/step with step > 0")
    n = int(math.floor((s["stop"] - s["start"]) / s["step"] + 1e-9)) + 1
    return [round(s["start"] + i * s["step"], 12) for i in range(n)]


def _sweep_point(args):
    command, resolved, defaults, out_dir, seed, shots, svg = args
    try:
        manifest = cmd_run(command, resolved, defaults, out_dir, seed, shots, svg)
        return {"status": "ok", "manifest": manifest}
    except (NumericalError, ProtocolError) as exc:
        return {"status": "numerical_error", "error": str(exc)}


def cmd_sweep(resolved: dict, defaults: list, out_dir: Path, seed: int = 0,
              shots: int | None = None, svg: bool | None = None, jobs: int = 1) -> dict:
    """Run the configured command once per sweep value, each in its own directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    command = resolved["sweep"]["command"]
    parameter = resolved["sweep"]["parameter"]
    values = _sweep_values(resolved)
    tasks = []
    for i, v in enumerate(values):
        point = with_override(resolved, parameter, v)
        build_experiment(point, seed, shots)  # fail fast on invalid points
        tasks.append((command, point, defaults, out_dir / f"point_{i:03d}", seed, shots, svg))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    points = []
    outputs = []
    for i, (v, res) in enumerate(zip(values, results)):
        entry = {"index": i, "value": v, "status": res["status"], "dir": f"point_{i:03d}"}
        if res["status"] == "ok":
            fit_path = out_dir / entry["dir"] / "fit.json"
            entry["result"] = json.loads(fit_path.read_text())
            for item in res["manifest"]["outputs"]:
                outputs.append({"kind": item["kind"], "path": f"{entry['dir']}/{item['path']}"})
        else:
            entry["error"] = res["error"]
        points.append(entry)
    summary_path = write_json(out_dir / "sweep.json",
                              {"command": command, "parameter": parameter, "points": points})
    outputs.append({"kind": "sweep", "path": summary_path.name})
    manifest = {
        "command": "sweep",
        "config_digest": config_digest(resolved),
        "seed": seed,
        "tool_version": __version__,
        "resolved_config": resolved,
        "defaults_applied": defaults,
        "outputs": outputs + [{"kind": "manifest", "path": "manifest.json"}],
        "points": len(points),
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthlat",
        description="Single-photon dynamics in a synthetic frequency lattice.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="TOML config file")
        p.add_argument("--out", type=Path, default=None,
                       help=f"output directory (default ${OUT_ENV} or ./synthlat-out/<command>)")
        p.add_argument("--svg", action="store_true", default=None, help="also write SVG heatmaps")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
        p.add_argument("--seed", type=int, default=0, help="seed for shot sampling")
        p.add_argument("--shots", type=int, default=None,
                       help="readout shots per point (0 = amplitude mode)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out
    if out_dir is None:
        out_dir = Path(os.environ.get(OUT_ENV, "synthlat-out")) / args.command
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.shots is not None and args.shots < 0:
            raise ConfigError("--shots must be >= 0")
        raw = load_toml(args.config) if args.config is not None else {}
        resolved, defaults = resolve(raw, args.command)
        if args.command == "sweep":
            manifest = cmd_sweep(resolved, defaults, out_dir, args.seed, args.shots,
                                 args.svg, args.jobs)
        else:
            manifest = cmd_run(args.command, resolved, defaults, out_dir, args.seed,
                               args.shots, args.svg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ProtocolError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SynthLatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(manifest['outputs'])} files to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
