"""Experiment scenarios: initial states, order parameters, scripted runs.

Every scenario writes CSV data files plus a JSON manifest that echoes the
full materialized configuration, the master seed and per-point status, so any
output is reproducible from its manifest alone (timestamps excepted). Grid
points are independent: one failing point is recorded and the rest continue.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    connected_correlation_map,
    cumulant_report,
    detect_errors,
    error_rate,
    extract_discrete,
    pe_equilibrium,
    scgf_bound,
)
from .config import RunConfig, dumps_config
from .langevin import FloquetParams, run_floquet
from .pca import RULES, NoiseModel, SpinConfig, config_from_text, run_pca
from .streams import derive_stream

__all__ = [
    "InitialSpec",
    "PhasePoint",
    "Scenario",
    "build_initial",
    "dtc_order_parameter",
    "strobe_magnetizations",
    "run_scenario",
    "correction_trace",
    "langevin_discrete_ensemble",
]


@dataclass(frozen=True)
class InitialSpec:
    """Deterministic initial configurations used across the experiments.

    uniform: all cells at ``value``. island: a centered island_width x
    island_height block of -1 in a +1 sea. stripes: -1 on the anti-diagonals
    (x + y) mod period < stripe_width. file: a plain-text grid.

    The shipped diagonal stripes erode under the deterministic majority rule;
    perfect stripes aligned with a full row or column of the periodic lattice
    are fixed points it can never correct, a measure-zero pathology worth
    knowing about when designing new initial states.
    """

    kind: str = "uniform"
    value: int = 1
    island_width: int = 8
    island_height: int = 8
    period: int = 4
    stripe_width: int = 1
    path: str = ""

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "InitialSpec":
        return cls(**cfg.initial)


def build_initial(spec: InitialSpec, width: int, height: int) -> SpinConfig:
    if spec.kind == "uniform":
        return SpinConfig.uniform(width, height, spec.value)
    if spec.kind == "island":
        iw, ih = spec.island_width, spec.island_height
        if iw > width or ih > height:
            raise ValueError(
                f"{iw}x{ih} island does not fit a {width}x{height} lattice"
            )
        cells = np.ones((height, width), dtype=np.int8)
        x0 = (width - iw) // 2
        y0 = (height - ih) // 2
        cells[y0 : y0 + ih, x0 : x0 + iw] = -1
        return SpinConfig(cells)
    if spec.kind == "stripes":
        if spec.stripe_width > spec.period:
            raise ValueError("stripe_width must not exceed period")
        y, x = np.mgrid[0:height, 0:width]
        cells = np.where((x + y) % spec.period < spec.stripe_width, -1, 1)
        return SpinConfig(cells.astype(np.int8))
    if spec.kind == "file":
        return config_from_text(Path(spec.path).read_text())
    raise ValueError(f"unknown initial kind {spec.kind!r}")


def single_error_initial(width: int, height: int, site=(1, 1)) -> SpinConfig:
    cells = np.ones((height, width), dtype=np.int8)
    cells[site[1] % height, site[0] % width] = -1
    return SpinConfig(cells)


@dataclass
class PhasePoint:
    control: float            # error rate (pca) or temperature (langevin)
    plateau: float
    stderr: float
    realizations: int
    measured_pe: float = float("nan")
    pe_stderr: float = float("nan")


def dtc_order_parameter(mags, window) -> tuple[float, float]:
    """Late-time average of the sign-corrected stroboscopic magnetization.

    ``mags[k]`` is the magnetization at period k; the order parameter is the
    mean of (-1)^k mags[k] over window = (start, stop). The standard error
    ignores autocorrelation inside the window (windows are chosen much longer
    than the observed correlation time).
    """
    mags = np.asarray(mags, dtype=np.float64)
    start, stop = int(window[0]), int(window[1])
    if not 0 <= start < stop <= mags.size:
        raise ValueError(f"window {window} outside series of length {mags.size}")
    idx = np.arange(start, stop)
    vals = np.where(idx % 2 == 0, 1.0, -1.0) * mags[start:stop]
    stderr = vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else float("nan")
    return float(vals.mean()), float(stderr)


# ---------------------------------------------------------------------------
# Shared drivers
# ---------------------------------------------------------------------------


def _map_realizations(worker, n: int, threads: int):
    """Run realizations concurrently; results ordered by index regardless of
    schedule (each owns a derived stream, the reduction is index-sorted)."""
    if threads <= 1:
        return [worker(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(n)))


def strobe_magnetizations(traj) -> np.ndarray:
    """Stroboscopic A-sublattice magnetization; entry k belongs to period k.

    Index parity matters downstream (the order parameter applies (-1)^k), so
    the series starts at the cycle-0 read where A still holds the initial CA
    state.
    """
    by_pos = {(r.cycle, r.sub_step): r for r in traj.reads}
    out = []
    for c in range(traj.cycles + 1):
        read = by_pos[(c, 0)]
        out.append(float(read.a.cells.mean()))
    return np.asarray(out)


def langevin_discrete_ensemble(initial, params, mass, n_traj, warmup_cycles,
                               measure_cycles, seed, threads=1):
    """Independent trajectories reduced to post-warmup error fields.

    Returns (fields, mags) where fields[i] covers 2*measure_cycles CA steps
    and mags[i] is the full per-period stroboscopic series.
    """
    total = warmup_cycles + measure_cycles
    rules = [params.step2_rule, params.step4_rule]

    def worker(i):
        stream = derive_stream(seed, "trajectory", i)
        traj = run_floquet(initial, params, total, stream, mass=mass)
        configs = extract_discrete(traj)[2 * warmup_cycles :]
        return detect_errors(configs, rules), strobe_magnetizations(traj)

    results = _map_realizations(worker, n_traj, threads)
    return [r[0] for r in results], [r[1] for r in results]


def correction_trace(params: FloquetParams, site, cycles: int = 3, *,
                     width: int = 32, height: int = 32, mass: float = 1.0,
                     seed: int = 0):
    """Dense (q_A, q_B) series at one site, starting from a single error there.

    Both oscillators of ``site`` start at -1 in a +1 sea, at rest.
    """
    initial = single_error_initial(width, height, site)
    traj = run_floquet(
        initial, params, cycles, derive_stream(seed, "trace"),
        mass=mass, trace_site=site,
    )
    times, qa, qb = traj.trace
    return times, qa, qb, traj


# ---------------------------------------------------------------------------
# Scenario runner
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    kind: str
    config: RunConfig
    out_dir: Path
    seed: int | None = None
    threads: int = 1
    name: str = ""

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.seed is None:
            self.seed = self.config.run["seed"]
        if not self.name:
            self.name = self.kind


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _phase_windows(cfg: RunConfig):
    if cfg.run["tier"] == "quick":
        return 16, 16, 10, 100, 200
    sc = cfg.scan
    width, height = cfg.run["width"], cfg.run["height"]
    stop = sc["window_start"] + sc["window_cycles"]
    return width, height, sc["realizations"], sc["window_start"], stop


def _run_phase_scan(sc: Scenario):
    cfg = sc.config
    width, height, nreal, win_start, win_stop = _phase_windows(cfg)
    initial = build_initial(InitialSpec.from_config(cfg), width, height)
    rows, cal_rows, points, statuses = [], [], [], []
    engine = cfg.run["engine"]
    if engine == "pca":
        rule = RULES[cfg.pca["rule"]]
        grid = [("pca", None, r) for r in cfg.scan["error_rates"]]
    else:
        v_values = cfg.scan["v_values"] or [cfg.langevin["v"]]
        grid = [("langevin", v, t) for v in v_values for t in cfg.scan["temperatures"]]

    for engine_name, v, control in grid:
        label = {"engine": engine_name, "v": v, "control": control}
        try:
            plateaus, pes = [], []
            if engine_name == "pca":
                noise = NoiseModel.symmetric(control)

                def worker(i, control=control, noise=noise):
                    rng = derive_stream(sc.seed, "pca", repr(control), i)
                    traj = run_pca(initial, rule, noise, win_stop, rng)
                    plateau, _ = dtc_order_parameter(
                        traj.magnetizations, (win_start, win_stop)
                    )
                    fld = detect_errors(traj.configs[win_start:], [rule])
                    pe, _ = error_rate(fld)
                    return plateau, pe

                results = _map_realizations(worker, nreal, sc.threads)
            else:
                params = cfg.floquet_params(temperature=control, v=v)

                def worker(i, params=params, v=v, control=control):
                    rng = derive_stream(sc.seed, "lang", repr(v), repr(control), i)
                    traj = run_floquet(
                        initial, params, win_stop, rng, mass=cfg.langevin["mass"]
                    )
                    mags = strobe_magnetizations(traj)
                    plateau, _ = dtc_order_parameter(mags, (win_start, win_stop))
                    configs = extract_discrete(traj)[2 * win_start :]
                    fld = detect_errors(
                        configs, [params.step2_rule, params.step4_rule]
                    )
                    pe, _ = error_rate(fld)
                    return plateau, pe

                results = _map_realizations(worker, nreal, sc.threads)
            plateaus = np.array([r[0] for r in results])
            pes = np.array([r[1] for r in results])
            point = PhasePoint(
                control=float(control),
                plateau=float(plateaus.mean()),
                stderr=float(plateaus.std(ddof=1) / math.sqrt(nreal)),
                realizations=nreal,
                measured_pe=float(pes.mean()),
                pe_stderr=float(pes.std(ddof=1) / math.sqrt(nreal)),
            )
            points.append(point)
            rows.append([
                engine_name, v if v is not None else "", point.control,
                point.measured_pe, point.pe_stderr, point.plateau, point.stderr,
                nreal,
            ])
            if engine_name == "langevin":
                cal_rows.append([v, control, point.measured_pe, point.pe_stderr])
            statuses.append({**label, "status": "ok"})
        except Exception as exc:  # noqa: BLE001 - grid points are isolated
            statuses.append({**label, "status": "error", "error": str(exc)})
    _write_csv(
        sc.out_dir / "phase.csv",
        ["engine", "v", "control", "measured_pe", "pe_stderr", "plateau",
         "plateau_stderr", "realizations"],
        rows,
    )
    outputs = ["phase.csv"]
    if cal_rows:
        _write_csv(
            sc.out_dir / "pe_calibration.csv",
            ["v", "T", "P_E", "stderr"], cal_rows,
        )
        outputs.append("pe_calibration.csv")
    return outputs, statuses, points


def _run_error_bench(sc: Scenario):
    cfg = sc.config
    width, height = cfg.run["width"], cfg.run["height"]
    warmup = cfg.scan["warmup_cycles"]
    measure = cfg.scan["measure_cycles"]
    ratios = list(cfg.scan["v_over_t"])
    if cfg.run["tier"] == "quick" and len(ratios) > 3:
        ratios = [ratios[0], ratios[len(ratios) // 2], ratios[-1]]
    v = cfg.langevin["v"]
    initial = SpinConfig.uniform(width, height)
    rows, statuses = [], []
    for rule_name in cfg.scan["rules"]:
        for ratio in ratios:
            temperature = v / ratio
            label = {"rule": rule_name, "v_over_t": ratio}
            try:
                params = cfg.floquet_params(
                    temperature=temperature, step2=rule_name, step4=rule_name
                )
                fields, _ = langevin_discrete_ensemble(
                    initial, params, cfg.langevin["mass"], 1, warmup, measure,
                    derive_stream(sc.seed, "bench", rule_name, repr(ratio)).integers(2**63),
                )
                pe, stderr = error_rate(fields[0])
                rows.append([
                    rule_name, v, temperature, ratio, pe, stderr,
                    pe_equilibrium(v / 4.0, temperature),
                ])
                statuses.append({**label, "status": "ok"})
            except Exception as exc:  # noqa: BLE001
                statuses.append({**label, "status": "error", "error": str(exc)})
    _write_csv(
        sc.out_dir / "pe.csv",
        ["rule", "v", "T", "v_over_T", "P_E", "stderr", "pe_equilibrium"],
        rows,
    )
    return ["pe.csv"], statuses, rows


def _ensemble_settings(cfg: RunConfig):
    if cfg.run["tier"] == "quick":
        return 16, 16, 60, cfg.scan["traj_warmup"], cfg.scan["traj_cycles"]
    return (cfg.run["width"], cfg.run["height"], cfg.scan["trajectories"],
            cfg.scan["traj_warmup"], cfg.scan["traj_cycles"])


def _build_ensemble(sc: Scenario):
    cfg = sc.config
    width, height, n_traj, warmup, measure = _ensemble_settings(cfg)
    initial = build_initial(InitialSpec.from_config(cfg), width, height)
    params = cfg.floquet_params()
    fields, _ = langevin_discrete_ensemble(
        initial, params, cfg.langevin["mass"], n_traj, warmup, measure,
        sc.seed, sc.threads,
    )
    return fields, params


def _run_cumulants(sc: Scenario):
    cfg = sc.config
    fields, params = _build_ensemble(sc)
    box_sizes = cfg.scan["box_sizes"]
    report = cumulant_report(
        fields, box_sizes, 4, n_blocks=cfg.scan["blocks"],
        rng=derive_stream(sc.seed, "blocks"),
    )
    t = params.temperature
    rows = [[t, params.v, r.order, r.box_size, r.value, r.stderr]
            for r in report.rows]
    _write_csv(
        sc.out_dir / "cumulants.csv",
        ["T", "v", "n", "L", "scaled_cumulant", "stderr"], rows,
    )
    fit_rows = [[f.order, f.c, f.b, f.eta, f.residual] for f in report.fits]
    _write_csv(
        sc.out_dir / "fits.csv", ["n", "c_n", "b_n", "eta_n", "residual"], fit_rows
    )
    return ["cumulants.csv", "fits.csv"], [{"status": "ok"}], report


def _run_correlations(sc: Scenario):
    cfg = sc.config
    fields, _ = _build_ensemble(sc)
    dts = cfg.scan["dts"]
    radius = cfg.scan["radius"]
    corr, _ = connected_correlation_map(
        fields, dts, radius, rng=derive_stream(sc.seed, "corrmap")
    )
    rows = []
    for j, dt in enumerate(dts):
        for iy, dy in enumerate(range(-radius, radius + 1)):
            for ix, dx in enumerate(range(-radius, radius + 1)):
                rows.append([dt, dx, dy, float(corr[j, iy, ix])])
    _write_csv(sc.out_dir / "corr.csv", ["dt", "dx", "dy", "corr_over_PE"], rows)
    return ["corr.csv"], [{"status": "ok"}], corr


def _run_scgf(sc: Scenario):
    cfg = sc.config
    fields, _ = _build_ensemble(sc)
    cubes = [(L, L, L) for L in cfg.scan["box_sizes"]]
    h, w = fields[0].height, fields[0].width
    steps = fields[0].steps
    slabs = [
        (2, min(16, h), min(16, w)),
        (min(16, steps), min(4, h), min(4, w)),
    ]
    k_grid = np.arange(0.0, cfg.scan["k_max"] + 1e-9, 0.1)
    report = scgf_bound(
        fields, cubes + slabs, k_grid, n_blocks=cfg.scan["blocks"],
        rng=derive_stream(sc.seed, "scgf"),
    )
    rows = []
    for gi, geo in enumerate(report.geometries):
        name = "x".join(str(v) for v in geo)
        for ki, k in enumerate(report.k_grid):
            rows.append([name, float(k), float(report.lam[gi, ki]), report.bound])
    _write_csv(sc.out_dir / "scgf.csv", ["geometry", "k", "lambda", "bound"], rows)
    return ["scgf.csv"], [{"status": "ok"}], report


def _run_correct_trace(sc: Scenario):
    cfg = sc.config
    width, height = cfg.run["width"], cfg.run["height"]
    site = tuple(cfg.scan["trace_site"])
    cycles = max(cfg.scan["trace_cycles"], 3)
    rows, statuses = [], []
    for kappa in cfg.scan["kappas"]:
        for temperature in cfg.scan["trace_temperatures"]:
            label = {"kappa_f": kappa, "T": temperature}
            try:
                params = FloquetParams(
                    v=cfg.langevin["v"], F=cfg.langevin["F"],
                    temperature=temperature, kappa_f=kappa,
                    dt=cfg.langevin["dt"], pin_ramp=cfg.langevin["pin_ramp"],
                )
                times, qa, qb, _ = correction_trace(
                    params, site, cycles, width=width, height=height,
                    mass=cfg.langevin["mass"],
                    seed=sc.seed,
                )
                keep = max(1, len(times) // 4000)
                for idx in range(0, len(times), keep):
                    rows.append([
                        kappa, temperature, float(times[idx]),
                        float(qa[idx]), float(qb[idx]),
                    ])
                statuses.append({**label, "status": "ok"})
            except Exception as exc:  # noqa: BLE001
                statuses.append({**label, "status": "error", "error": str(exc)})
    _write_csv(
        sc.out_dir / "traces.csv", ["kappa_f", "T", "time", "q_a", "q_b"], rows
    )
    return ["traces.csv"], statuses, rows


def _run_pca_once(sc: Scenario):
    cfg = sc.config
    width, height = cfg.run["width"], cfg.run["height"]
    initial = build_initial(InitialSpec.from_config(cfg), width, height)
    initial = SpinConfig(initial.cells, cfg.pca["boundary"], cfg.pca["fixed_value"])
    rule = RULES[cfg.pca["rule"]]
    traj = run_pca(
        initial, rule, cfg.noise_model(), cfg.pca["steps"],
        derive_stream(sc.seed, "pca-run"),
    )
    rows = [[t, float(m)] for t, m in enumerate(traj.magnetizations)]
    _write_csv(sc.out_dir / "trajectory.csv", ["step", "magnetization"], rows)
    from .pca import config_to_bytes, config_to_text

    (sc.out_dir / "final.txt").write_text(config_to_text(traj.configs[-1]))
    (sc.out_dir / "final.pca").write_bytes(
        config_to_bytes(traj.configs[-1], step=traj.steps)
    )
    return ["trajectory.csv", "final.txt", "final.pca"], [{"status": "ok"}], traj


def _run_langevin_once(sc: Scenario):
    cfg = sc.config
    width, height = cfg.run["width"], cfg.run["height"]
    initial = build_initial(InitialSpec.from_config(cfg), width, height)
    params = cfg.floquet_params()
    snap = cfg.langevin["snapshot_every"] or None
    traj = run_floquet(
        initial, params, cfg.langevin["cycles"],
        derive_stream(sc.seed, "langevin-run"),
        mass=cfg.langevin["mass"], snapshot_every=snap,
    )
    rows = [[r.cycle, r.sub_step, r.time, r.m_a, r.m_b] for r in traj.strobe]
    _write_csv(
        sc.out_dir / "strobe.csv", ["cycle", "sub_step", "time", "M_A", "M_B"], rows
    )
    outputs = ["strobe.csv"]
    from .langevin import lattice_to_bytes

    for t, lat in traj.snapshots:
        name = f"lattice_t{int(t):06d}.osc1"
        (sc.out_dir / name).write_bytes(lattice_to_bytes(lat))
        outputs.append(name)
    return outputs, [{"status": "ok"}], traj


_RUNNERS = {
    "pca-run": _run_pca_once,
    "langevin-run": _run_langevin_once,
    "phase-scan": _run_phase_scan,
    "error-bench": _run_error_bench,
    "cumulants": _run_cumulants,
    "correlations": _run_correlations,
    "scgf": _run_scgf,
    "correct-trace": _run_correct_trace,
}


def run_scenario(scenario: Scenario):
    """Execute one scenario, write its data files and manifest.

    Returns the manifest dict; manifest["ok"] is False when any grid point
    failed (CLI maps that to exit code 2).
    """
    if scenario.kind not in _RUNNERS:
        raise ValueError(f"unknown scenario kind {scenario.kind!r}")
    scenario.out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        outputs, statuses, _ = _RUNNERS[scenario.kind](scenario)
    except Exception as exc:  # noqa: BLE001 - recorded, surfaced via exit code
        outputs, statuses = [], [{"status": "error", "error": str(exc)}]
    manifest = {
        "name": scenario.name,
        "kind": scenario.kind,
        "version": __version__,
        "seed": scenario.seed,
        "threads": scenario.threads,
        "config": dumps_config(scenario.config),
        "grid": statuses,
        "outputs": outputs,
        "conventions": {
            "error_clock": "both Floquet sub-steps count as space-time cells",
            "stroboscopic_read": "A sublattice decoded after each cycle's first relaxation",
        },
        "ok": all(s.get("status") == "ok" for s in statuses),
        "started_unix": started,
        "wall_time_s": time.time() - started,
    }
    with open(scenario.out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
