"""End-to-end runs: coefficients, evolution, measurements, back-map, analysis, manifest.

Every stage reads what it needs from the run directory, so stages can also be
invoked one at a time. Numeric CSV fields use ``%.17g`` and no stage draws
random numbers, so an identical configuration reproduces identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FitError,
    adiabatic_potential,
    find_peaks,
    fit_curve,
    polaron_similarity,
    thermal_cycle_report,
)
from .chainmap import ChainCoefficients, StarGrid, build_star_grid, compute_chain_coefficients
from .config import RunConfig
from .observables import (
    CorrelationSet,
    ExtendedSpectrum,
    extended_spectrum,
    measure_chain_occupations,
    measure_correlation_set,
    measure_spin,
    top_fock_populations,
)
from .spectral import SystemModel
from .tensornet import EvolutionConfig, MpsState, TdvpIntegrator, build_chain_mpo, init_state
from .tensornet.checkpoint import load_checkpoint, save_checkpoint
from .thermofield import PhysicalSpectrum, physical_spectrum

log = logging.getLogger(__name__)

FMT = "%.17g"
STAGES = ("coeffs", "evolve", "measure", "backmap", "analyze")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, error: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error


# --- evolution driver ------------------------------------------------------------


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    sz: list = field(default_factory=list)
    sx: list = field(default_factory=list)
    sy: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    bonds: list = field(default_factory=list)
    occ_times: list = field(default_factory=list)
    occupations: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    max_projection_error: float = 0.0
    capped: bool = False

    def record(self, state: MpsState, energy: float) -> None:
        sz, sx, sy, _ = measure_spin(state)
        self.times.append(state.time)
        self.sz.append(sz)
        self.sx.append(sx)
        self.sy.append(sy)
        self.norm.append(state.norm())
        self.energy.append(energy)
        self.bonds.append(list(state.bond_dims))

    @property
    def max_bond_dim(self) -> int:
        return max((max(b) for b in self.bonds if b), default=1)


def snapshot_steps(times, dt: float) -> dict[int, float]:
    out = {}
    for t in times:
        n = t / dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"snapshot time {t} is not a multiple of dt = {dt}")
        out[int(round(n))] = float(t)
    return out


def run_evolution(
    coeffs: ChainCoefficients,
    system: SystemModel,
    evo: EvolutionConfig,
    snapshot_times=(),
    occ_every: int = 10,
    progress=None,
) -> tuple[MpsState, Trajectory]:
    """Evolve ``|psi_S> (x) |vac>`` to ``evo.t_final`` recording spin, bonds and snapshots.

    ``progress(step, n_steps, state)`` is called after every step if given.
    """
    mpo = build_chain_mpo(coeffs, system, evo.d)
    state = init_state(system, coeffs.n_sites, evo.d)
    integ = TdvpIntegrator(mpo, evo)
    traj = Trajectory()
    snaps = snapshot_steps(snapshot_times, evo.dt)
    n_steps = evo.n_steps

    def observe(step):
        if step % occ_every == 0 or step == n_steps:
            traj.occ_times.append(state.time)
            traj.occupations.append(measure_chain_occupations(state))
        if step in snaps:
            snap = state.copy()
            snap.time = snaps[step]
            traj.snapshots[snaps[step]] = snap

    traj.record(state, integ.energy(state))
    observe(0)
    for step in range(1, n_steps + 1):
        integ.step(state)
        # accumulate time from the step count to keep snapshot labels exact
        state.time = step * evo.dt
        traj.record(state, integ.energy(state))
        observe(step)
        if progress is not None:
            progress(step, n_steps, state)
    traj.max_projection_error = state.max_projection_error
    traj.capped = state.capped
    return state, traj


# --- file helpers ---------------------------------------------------------------


def _write_csv(path: Path, header: str, rows) -> None:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(0, len(header.split(","))) if arr.size == 0 else arr[None, :]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, arr, fmt=FMT, delimiter=",")


def _snap_name(t: float) -> str:
    return f"t{t:010.4f}".replace(".", "p")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --- stages -----------------------------------------------------------------------


def chain_coefficients(config: RunConfig) -> ChainCoefficients:
    coeffs = compute_chain_coefficients(config.thermal_model(), config.chain.n_sites, config.chain.n_quad)
    if config.debug.zero_coupling:
        coeffs = coeffs.with_g0(0.0)
    return coeffs


def stage_coeffs(config: RunConfig, out: Path) -> ChainCoefficients:
    coeffs = chain_coefficients(config)
    sp = config.spectral
    g = np.concatenate(([coeffs.g0], coeffs.couplings))
    header = (
        f"# s={sp.s!r} alpha_prime={sp.alpha_prime!r} alpha={config.alpha!r} beta={config.beta!r} "
        f"N={coeffs.n_sites} n_quad={coeffs.n_quad}; g_0 couples the system, g_k (k>=1) links modes k-1 and k\n"
        "k,omega_k,g_k"
    )
    _write_csv(out / "coeffs.csv", header, np.column_stack([np.arange(coeffs.n_sites), coeffs.omegas, g]))
    return coeffs


def stage_evolve(config: RunConfig, out: Path, coeffs: ChainCoefficients, progress=None) -> Trajectory:
    evo = config.evolution_config()
    state, traj = run_evolution(
        coeffs, config.system_model(), evo, config.snapshots, config.output.occ_every, progress
    )
    _write_csv(out / "spin.csv", "t,sz,sx,sy", np.column_stack([traj.times, traj.sz, traj.sx, traj.sy]))
    _write_csv(
        out / "evolution_diagnostics.csv",
        "t,norm,energy,max_chi",
        np.column_stack([traj.times, traj.norm, traj.energy, [max(b) if b else 1 for b in traj.bonds]]),
    )
    occ_rows = [(t, k, n) for t, occ in zip(traj.occ_times, traj.occupations) for k, n in enumerate(occ)]
    _write_csv(out / "chain_occ.csv", "t,site,n", occ_rows)
    bond_rows = [(step, b, chi) for step, dims in enumerate(traj.bonds) for b, chi in enumerate(dims)]
    _write_csv(out / "bonds.csv", "step,bond,chi", bond_rows)
    digest = config.digest()
    ckpt = out / "checkpoints"
    save_checkpoint(state, ckpt / "final", {"config_digest": digest})
    for t, snap in traj.snapshots.items():
        save_checkpoint(snap, ckpt / f"snap_{_snap_name(t)}", {"config_digest": digest})
    return traj


def _load_snapshots(config: RunConfig, out: Path) -> dict[float, MpsState]:
    snaps = {}
    for t in config.snapshots:
        state, meta = load_checkpoint(out / "checkpoints" / f"snap_{_snap_name(t)}")
        if meta.get("config_digest") != config.digest():
            raise ValueError(f"snapshot at t={t} was produced by a different configuration")
        snaps[float(t)] = state
    return snaps


def star_grid(config: RunConfig, out: Path, coeffs: ChainCoefficients | None = None) -> StarGrid:
    """Zero-padded star grid, cached as ``grid.npz`` in the run directory."""
    path = out / "grid.npz"
    if path.exists():
        with np.load(path) as data:
            if str(data["config_digest"]) == config.digest():
                return StarGrid(data["frequencies"], data["transform"], data["widths"])
    coeffs = coeffs if coeffs is not None else chain_coefficients(config)
    grid = build_star_grid(coeffs, config.chain.m_pad)
    with open(path, "wb") as fh:
        np.savez(fh, frequencies=grid.frequencies, transform=grid.transform, widths=grid.widths,
                 config_digest=np.array(config.digest()))
    return grid


def stage_measure(config: RunConfig, out: Path, snapshots=None, grid: StarGrid | None = None):
    """Correlation sets and extended spectra at every snapshot."""
    snapshots = snapshots if snapshots is not None else _load_snapshots(config, out)
    grid = grid if grid is not None else star_grid(config, out)
    corrs, spectra, top_fock = {}, {}, {}
    ext_rows, corr_rows = [], []
    k = config.output.corr_stride
    sel = np.arange(0, grid.m_pad, k)
    for t in sorted(snapshots):
        state = snapshots[t]
        cs = measure_correlation_set(state)
        spec = extended_spectrum(cs, grid)
        corrs[t], spectra[t] = cs, spec
        top_fock[t] = top_fock_populations(state)
        with open(out / f"corr_{_snap_name(t)}.npz", "wb") as fh:
            np.savez(fh, normal=cs.normal, anomalous=cs.anomalous, singles=cs.singles, time=t,
                     star_corr=spec.corr, star_pairs=spec.pairs)
        w = grid.frequencies
        ext_rows.extend(zip(np.full(len(w), t), w, spec.occupations, spec.density))
        c = spec.corr[np.ix_(sel, sel)]
        ww, wp = np.meshgrid(w[sel], w[sel], indexing="ij")
        corr_rows.append(np.column_stack([np.full(c.size, t), ww.ravel(), wp.ravel(), c.real.ravel(), c.imag.ravel()]))
    _write_csv(out / "ext_spectrum.csv", "t,omega,n,density", ext_rows)
    _write_csv(out / "corr.csv", "t,omega,omega_prime,re_C,im_C",
               np.concatenate(corr_rows) if corr_rows else np.zeros((0, 5)))
    return corrs, spectra, top_fock


def _load_spectra(config: RunConfig, out: Path) -> dict[float, ExtendedSpectrum]:
    grid = star_grid(config, out)
    spectra = {}
    for t in config.snapshots:
        with np.load(out / f"corr_{_snap_name(t)}.npz") as data:
            cs = CorrelationSet(data["normal"], data["anomalous"], data["singles"], float(data["time"]))
        spectra[float(t)] = extended_spectrum(cs, grid)
    return spectra


def stage_backmap(config: RunConfig, out: Path, spectra=None) -> dict[float, PhysicalSpectrum]:
    spectra = spectra if spectra is not None else _load_spectra(config, out)
    phys, rows = {}, []
    for t in sorted(spectra):
        ps = physical_spectrum(spectra[t], config.beta)
        phys[t] = ps
        rows.extend(zip(np.full(len(ps.frequencies), t), ps.frequencies, ps.occupations, ps.baseline, ps.excess))
    _write_csv(out / "physical_spectrum.csv", "t,omega,n,baseline,excess", rows)
    return phys


def _read_columns(path: Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    names = lines[0].strip().split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.zeros((0, len(names)))
    return {n: data[:, i] for i, n in enumerate(names)}


def _fit_report(t, y, kind, guess, t_min, t_max):
    sel = (t >= t_min) & (t <= (t_max if t_max is not None else np.inf))
    try:
        res = fit_curve(t[sel], y[sel], kind, guess)
        return {"parameters": res.parameters, "residual_rms": res.residual_rms, "converged": True}
    except FitError as exc:
        return {"parameters": exc.best.parameters, "residual_rms": exc.best.residual_rms, "converged": False}
    except ValueError as exc:
        return {"error": str(exc)}


def _dominant_frequency(t, y):
    if len(t) < 8:
        return 0.1
    dt = t[1] - t[0]
    spec = np.abs(np.fft.rfft(y - y.mean(), n=8 * len(y)))
    freqs = 2 * np.pi * np.fft.rfftfreq(8 * len(y), dt)
    return float(freqs[np.argmax(spec[1:]) + 1])


def stage_analyze(config: RunConfig, out: Path, spectra=None, phys=None, coeffs=None) -> dict:
    spectra = spectra if spectra is not None else _load_spectra(config, out)
    phys = phys if phys is not None else stage_backmap(config, out, spectra)
    coeffs = coeffs if coeffs is not None else chain_coefficients(config)
    an = config.analysis
    eps = config.system.epsilon
    spin = _read_columns(out / "spin.csv")
    t = spin["t"]
    report: dict = {"config_digest": config.digest(), "beta": config.beta, "kappa": config.beta * eps}

    lo, hi = an.peak_window[0] * eps, an.peak_window[1] * eps
    peaks = {}
    for ts, spec in sorted(spectra.items()):
        w = spec.frequencies
        entry = {"positive": [asdict(p) for p in find_peaks(spec, (lo, hi))]}
        entry["negative"] = [asdict(p) for p in find_peaks(spec, (-hi, -lo))] if w[0] <= -hi else []
        peaks[f"{ts:g}"] = entry
    report["peaks"] = peaks

    times = sorted(spectra)
    if len(times) >= 2:
        cyc = thermal_cycle_report(spectra[times[-2]], spectra[times[-1]], config.beta, eps, an.delta, (lo, hi))
        report["thermal_cycle"] = cyc.to_dict()

    report["fits"] = {
        "sx_damped_cosine": _fit_report(
            t, spin["sx"], "damped_cosine",
            {"a": spin["sx"][0] or 1.0, "omega": _dominant_frequency(t, spin["sx"]), "gamma": 0.01},
            an.fit_t_min, an.fit_t_max,
        ),
        "sz_shifted_exponential": _fit_report(
            t, spin["sz"], "shifted_exponential",
            {"a": spin["sz"][0] - spin["sz"][-1], "gamma": 0.05, "c": spin["sz"][-1]},
            an.fit_t_min, an.fit_t_max,
        ),
    }

    if coeffs.omegas[0] > 0:
        g = 0.5 * coeffs.g0  # the chain vertex is (g0/2) sx (c0 + c0^dag)
        q = np.linspace(-3.0, 3.0, 601) * max(g / coeffs.omegas[0], 1e-3)
        dw = adiabatic_potential(eps, g, coeffs.omegas[0], q)
        report["double_well"] = {"omega0": coeffs.omegas[0], "coupling": g, "minima": list(dw.minima),
                                 "min_energy": dw.min_energy, "barrier": dw.barrier}

    report["polaron_similarity"] = {
        f"{ts:g}": polaron_similarity(spec, config.spectral_model(), an.polaron_band) for ts, spec in spectra.items()
    }
    report["physical"] = {
        f"{ts:g}": {
            "total_excess": ps.total_excess,
            "excess_peak_omega": float(ps.frequencies[np.argmax(ps.excess)]) if len(ps.excess) else None,
        }
        for ts, ps in phys.items()
    }
    with open(out / "analysis_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
    return report


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# --- full run ---------------------------------------------------------------------


@dataclass
class RunResult:
    out: Path
    coeffs: ChainCoefficients
    trajectory: Trajectory
    correlations: dict
    spectra: dict
    physical: dict
    report: dict
    manifest: dict


def write_manifest(config: RunConfig, out: Path, started: float, extra: dict | None = None) -> dict:
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name not in ("manifest.json", "FAILED"))
    manifest = {
        "software": {"package": "ttedopa", "version": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "omega_c": config.spectral.omega_c,
        "units": "frequencies in omega_c, times in 1/omega_c",
        "wall_clock_seconds": time.time() - started,
        "files": {str(p.relative_to(out)): sha256_file(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
    return manifest


def _run_stage(name: str, out: Path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        (out / "FAILED").write_text(f"stage: {name}\n{type(exc).__name__}: {exc}\n")
        raise StageError(name, exc) from exc


def run_pipeline(config: RunConfig, out=None, progress=None) -> RunResult:
    started = time.time()
    out = Path(out if out is not None else config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    coeffs = _run_stage("coeffs", out, stage_coeffs, config, out)
    traj = _run_stage("evolve", out, stage_evolve, config, out, coeffs, progress)
    grid = _run_stage("measure", out, star_grid, config, out, coeffs)
    corrs, spectra, top_fock = _run_stage("measure", out, stage_measure, config, out, traj.snapshots, grid)
    phys = _run_stage("backmap", out, stage_backmap, config, out, spectra)
    report = _run_stage("analyze", out, stage_analyze, config, out, spectra, phys, coeffs)
    extra = {
        "max_bond_dim": traj.max_bond_dim,
        "bond_cap_reached": traj.capped,
        "max_projection_error": traj.max_projection_error,
        "top_fock_population": {f"{t:g}": float(np.max(v)) for t, v in top_fock.items()},
    }
    manifest = write_manifest(config, out, started, extra)
    return RunResult(out, coeffs, traj, corrs, spectra, phys, report, manifest)
