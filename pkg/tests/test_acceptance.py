"""Acceptance suite: one test per shipping criterion, at stated tolerances.

Each test prints a single PASS/FAIL line. The statistical criteria run at
desk scale on preregistered seeds, so every number here is reproducible.
The two heavy driven-lattice ensembles are built once per session and shared.
"""

import math

import numpy as np
import pytest
import scipy.stats

from toomlab.analysis import (
    ErrorField,
    box_cumulants,
    connected_correlation_map,
    cumulant_report,
    detect_errors,
    error_rate,
    extract_discrete,
    pe_equilibrium,
    sample_block_counts,
    scgf_bound,
)
from toomlab.langevin import (
    FloquetParams,
    OscillatorLattice,
    interaction_potential,
    langevin_step,
    pin_forces,
    pin_potential,
    run_floquet,
)
from toomlab.pca import (
    PI_TOOM,
    TOOM,
    NoiseModel,
    SpinConfig,
    apply_rule,
    run_pca,
)
from toomlab.scenarios import (
    correction_trace,
    dtc_order_parameter,
    langevin_discrete_ensemble,
    single_error_initial,
)
from toomlab.streams import derive_stream

SEED = 20260809

pytestmark = pytest.mark.acceptance


def report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


# ---------------------------------------------------------------------------
# shared ensembles (pi-Toom driven lattice at v = 100)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def ensemble_517():
    params = FloquetParams(v=100.0, temperature=5.17)
    fields, _ = langevin_discrete_ensemble(
        SpinConfig.uniform(32, 32), params, 1.0,
        n_traj=300, warmup_cycles=12, measure_cycles=16, seed=SEED,
    )
    return fields


@pytest.fixture(scope="module")
def ensemble_1194():
    params = FloquetParams(v=100.0, temperature=11.94)
    fields, _ = langevin_discrete_ensemble(
        SpinConfig.uniform(32, 32), params, 1.0,
        n_traj=40, warmup_cycles=12, measure_cycles=16, seed=SEED + 1,
    )
    return fields


@pytest.fixture(scope="module")
def quick_phase_points():
    """Quick-tier plateau + error-rate measurements, both engines, 16x16."""
    out = {}
    total, win = 200, (100, 200)
    for temperature in (5.17, 11.94):
        params = FloquetParams(v=100.0, temperature=temperature)
        plateaus, pes = [], []
        for i in range(10):
            traj = run_floquet(
                SpinConfig.uniform(16, 16), params, total,
                derive_stream(SEED, "phase", repr(temperature), i),
            )
            from toomlab.scenarios import strobe_magnetizations

            plateau, _ = dtc_order_parameter(strobe_magnetizations(traj), win)
            configs = extract_discrete(traj)[2 * win[0]:]
            pe, _ = error_rate(
                detect_errors(configs, [params.step2_rule, params.step4_rule])
            )
            plateaus.append(plateau)
            pes.append(pe)
        plateaus, pes = np.array(plateaus), np.array(pes)
        out[temperature] = {
            "plateau": plateaus.mean(),
            "plateau_err": plateaus.std(ddof=1) / math.sqrt(plateaus.size),
            "pe": pes.mean(),
        }
    return out


def pca_plateau(error_p, side, total, window, nreal, seed_label):
    plateaus = []
    for i in range(nreal):
        rng = derive_stream(SEED, "pca", seed_label, i)
        traj = run_pca(SpinConfig.uniform(side, side), PI_TOOM,
                       NoiseModel.symmetric(error_p), total, rng)
        plateau, _ = dtc_order_parameter(traj.magnetizations, window)
        plateaus.append(plateau)
    plateaus = np.array(plateaus)
    return plateaus.mean(), plateaus.std(ddof=1) / math.sqrt(nreal)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_1_zero_noise_faithfulness():
    """20 random 16x16 starts, 20 cycles: decoded trajectory == composed CA."""
    params = FloquetParams(v=50.0, temperature=0.0, dt=1e-3, kappa_f=1.0)
    rng = derive_stream(SEED, "faithful")
    mismatches = 0
    for trial in range(20):
        c0 = SpinConfig(np.where(rng.random((16, 16)) < 0.5, 1, -1).astype(np.int8))
        traj = run_floquet(c0, params, 20, derive_stream(SEED, "faithful", trial))
        configs = extract_discrete(traj)
        state = c0
        for t, cfg in enumerate(configs):
            if t:
                state = apply_rule(state, (TOOM, PI_TOOM)[(t - 1) % 2])
            if not cfg.same_cells(state):
                mismatches += 1
    ok = report(
        "1 (zero-noise faithfulness)",
        mismatches == 0,
        f"{mismatches} mismatched configs over 20 trials x 41 steps",
    )
    assert ok


def test_criterion_2_single_error_correction():
    """One flipped site at v=50, T=0.5 is corrected within one period."""
    params = FloquetParams(v=50.0, temperature=0.5)
    initial = single_error_initial(32, 32, (1, 1))
    traj = run_floquet(initial, params, 1, derive_stream(SEED, "correct"))
    b_read = traj.reads[2]      # end of the relaxation after the Toom drive
    a_read = traj.reads[3]      # trailing relaxation after the pi-Toom drive
    corrected = (b_read.b.cells == 1).all() and (a_read.a.cells == -1).all()
    assert b_read.time == 3.0 and a_read.time == 5.0

    # deterministic variant, frozen regression of the trace at the error site
    params0 = FloquetParams(v=50.0, temperature=0.0)
    _, qa, qb, traj0 = correction_trace(params0, (1, 1), cycles=1,
                                        width=8, height=8, seed=0)
    n = params0.steps_per_unit
    frozen_ok = (
        abs(qb[2 * n - 1] - 0.6845072474101855) < 1e-9
        and (traj0.reads[2].b.cells == 1).all()
        and (traj0.reads[3].a.cells == -1).all()
    )
    ok = report(
        "2 (single-error correction)",
        corrected and frozen_ok,
        f"decoded uniform at t=3 and t=5: {corrected}; frozen T=0 trace: {frozen_ok}",
    )
    assert ok


def test_criterion_3_error_rate_benchmark():
    """Static Toom rule: P_E(v/T) monotone, within x5 of the Boltzmann
    estimate at three quick-tier grid points (full protocol per point)."""
    v = 50.0
    results = []
    for ratio in (5.0, 15.0, 25.0):
        temperature = v / ratio
        params = FloquetParams(v=v, temperature=temperature,
                               step2_rule=TOOM, step4_rule=TOOM)
        fields, _ = langevin_discrete_ensemble(
            SpinConfig.uniform(32, 32), params, 1.0,
            n_traj=1, warmup_cycles=200, measure_cycles=25,
            seed=derive_stream(SEED, "bench", repr(ratio)).integers(2**63),
        )
        pe, _ = error_rate(fields[0])
        eq = pe_equilibrium(v / 4.0, temperature)
        results.append((ratio, pe, eq, pe / eq))
    monotone = all(a[1] > b[1] for a, b in zip(results, results[1:]))
    within = all(1 / 5 <= r[3] <= 5 for r in results)
    within3 = all(1 / 3 <= r[3] <= 3 for r in results)
    detail = ", ".join(
        f"v/T={r[0]:g}: P_E={r[1]:.4g} (eq {r[2]:.4g}, x{r[3]:.2f})" for r in results
    )
    ok = report(
        "3 (error-rate benchmark)",
        monotone and within,
        f"monotone={monotone}, factor<=5={within}, factor<=3={within3}; {detail}",
    )
    assert ok


def test_criterion_4_cumulant_scaling(ensemble_517):
    """Box cumulants at T=5.17, v=100 over L in {2,4,8,16}, 300 trajectories."""
    rep = cumulant_report(
        ensemble_517, [2, 4, 8, 16], 4, n_blocks=1000,
        rng=derive_stream(SEED, "blocks"),
    )
    c1, c2, c3, c4 = (rep.fits[i].c for i in range(4))
    eta2 = rep.fits[1].eta
    ok_c1 = 0.038 <= c1 <= 0.058
    ok_c2 = 0.04 <= c2 <= 0.07
    ok_eta = eta2 > 0
    detail = (
        f"c1={c1:.4f} (gate [0.038, 0.058]), c2={c2:.4f} (gate [0.04, 0.07]), "
        f"eta2={eta2:.3f}; reported ungated: c3={c3:.4f} "
        f"(conv={rep.fits[2].converged}), c4={c4:.4f} (conv={rep.fits[3].converged})"
    )
    ok = report("4 (cumulant finite-size scaling)", ok_c1 and ok_c2 and ok_eta, detail)
    assert ok


def test_criterion_5_phase_transition(quick_phase_points):
    # (a) direct PCA thresholds on 32x32
    lo, lo_err = pca_plateau(0.005, 32, 600, (300, 600), 6, "lo")
    hi, hi_err = pca_plateau(0.2, 32, 600, (300, 600), 6, "hi")
    ok_a = lo > 0.9 and hi < 0.1

    # (b) driven lattice brackets the transition temperature
    p_cold = quick_phase_points[5.17]
    p_hot = quick_phase_points[11.94]
    ok_b = p_cold["plateau"] > 0.5 and p_hot["plateau"] < 0.1

    # (c) both engines at matched measured error rates (quick tier, 16x16),
    # away from the transition region
    agree = []
    for point in (p_cold, p_hot):
        pca_m, pca_e = pca_plateau(point["pe"], 16, 200, (100, 200), 10,
                                   f"match{point['pe']:.3f}")
        delta = abs(point["plateau"] - pca_m)
        budget = point["plateau_err"] + pca_e
        agree.append((delta, budget, delta <= budget))
    ok_c = all(a[2] for a in agree)
    detail = (
        f"(a) PCA plateau {lo:.3f}@0.005 / {hi:.3f}@0.2; "
        f"(b) Langevin plateau {p_cold['plateau']:.3f}@T=5.17 / "
        f"{p_hot['plateau']:.3f}@T=11.94; "
        f"(c) engine deltas {[f'{a[0]:.4f}<={a[1]:.4f}' for a in agree]}"
    )
    ok = report("5 (phase transition)", ok_a and ok_b and ok_c, detail)
    assert ok


def test_criterion_6_statistics_consistency():
    rng = derive_stream(SEED, "consistency")

    # c1 identity: order-1 scaled cumulant == error rate, same data, exactly
    field = ErrorField((rng.random((8, 8, 8)) < 0.17).astype(np.uint8))
    row1 = box_cumulants(field, 2, 1, plan="tiling", estimator="moment")[0]
    pe_f, _ = error_rate(field)
    ok_c1 = row1.value == pytest.approx(pe_f, abs=1e-15)

    # kappa2 == double sum of connected correlations (brute force, 4x4x4)
    bits = (rng.random((4, 4, 4)) < 0.3).astype(np.uint8)
    row2 = box_cumulants(ErrorField(bits), 4, 2, plan="translations",
                         estimator="moment")[1]
    shifts = [(dy, dx) for dy in range(4) for dx in range(4)]
    ens = np.array(
        [np.roll(bits, (dy, dx), axis=(1, 2)).reshape(-1) for dy, dx in shifts],
        dtype=np.float64,
    )
    double_sum = np.cov(ens.T, bias=True).sum()
    ok_k2 = row2.value * 64.0 == pytest.approx(double_sum, rel=1e-10)

    # iid Bernoulli closed forms within 3 sigma
    p = 0.1
    fields = [
        ErrorField((rng.random((16, 12, 12)) < p).astype(np.uint8))
        for _ in range(50)
    ]
    rows = box_cumulants(fields, 2, 3, n_blocks=400, rng=rng)
    binom = {1: 0.8 / 8, 2: 0.72 / 8, 3: 0.576 / 8}
    ok_bern = all(abs(r.value - binom[r.order]) < 3 * r.stderr for r in rows)

    k_grid = np.arange(0.0, 2.01, 0.25)
    sr = scgf_bound(fields, [(2, 2, 2)], k_grid, n_blocks=400, rng=rng)
    analytic = np.log(1 - p + p * np.exp(k_grid))
    ok_scgf = all(
        abs(sr.lam[0, ki] - analytic[ki]) < 3 * max(sr.lam_stderr[0, ki], 1e-5)
        for ki in range(k_grid.size)
        if sr.trusted[0, ki]
    )
    ok_zero = sr.lam[0, 0] == 0.0
    # initial slope via a two-point extrapolated derivative, which cancels
    # the kappa_2 k/2 secant bias
    h = 0.05
    ss = scgf_bound(fields, [(2, 2, 2)], np.array([0.0, h, 2 * h]),
                    n_blocks=400, rng=rng)
    slope = (4 * ss.lam[0, 1] - ss.lam[0, 2]) / (2 * h)
    slope_err = (4 * ss.lam_stderr[0, 1] + ss.lam_stderr[0, 2]) / (2 * h)
    ok_slope = abs(slope - ss.pe) < 3 * slope_err + 1e-3

    ok = report(
        "6 (statistics consistency)",
        ok_c1 and ok_k2 and ok_bern and ok_scgf and ok_zero and ok_slope,
        f"c1 identity={ok_c1}, kappa2 sum={ok_k2}, Bernoulli cumulants={ok_bern}, "
        f"SCGF closed form={ok_scgf}, lambda(0)=0={ok_zero}, slope={ok_slope}",
    )
    assert ok


def test_criterion_7_integrator_physics():
    rng = derive_stream(SEED, "physics")
    params = FloquetParams(v=50.0)
    h = 1e-5

    # forces are exact gradients (relative error < 1e-5)
    worst = 0.0
    for q in rng.uniform(-2, 2, size=100):
        ep, _ = pin_potential(q + h, params)
        em, _ = pin_potential(q - h, params)
        _, f = pin_potential(q, params)
        worst = max(worst, abs(f + (ep - em) / (2 * h)) / max(abs(f), 1e-3))
    for _ in range(100):
        u = rng.uniform(-0.95, 0.95, size=3)
        q_b = rng.choice([-1, 1]) * rng.uniform(1.2, 2.0)
        e0, fb, fn = interaction_potential(q_b, u, params, TOOM)
        eb_p = interaction_potential(q_b + h, u, params, TOOM)[0]
        eb_m = interaction_potential(q_b - h, u, params, TOOM)[0]
        worst = max(worst, abs(fb + (eb_p - eb_m) / (2 * h)) / abs(fb))
        for j in range(3):
            up, um = u.copy(), u.copy()
            up[j] += h
            um[j] -= h
            ep = interaction_potential(q_b, up, params, TOOM)[0]
            em = interaction_potential(q_b, um, params, TOOM)[0]
            worst = max(
                worst, abs(fn[j] + (ep - em) / (2 * h)) / max(abs(fn[j]), 1e-6)
            )
    ok_fd = worst < 1e-5

    # critically damped analytic trajectory: q(1)/q0 = 6 exp(-5)
    v_i, gamma = 25.0, 10.0
    lat = OscillatorLattice(np.ones((1, 1)), np.zeros((1, 1)),
                            np.ones((1, 1)), np.zeros((1, 1)), 1.0)
    well = lambda l: (-v_i * l.qA, -v_i * l.qB)
    for _ in range(10000):
        lat = langevin_step(lat, well, gamma, 0.0, 1e-4, rng)
    analytic_err = abs(lat.qA[0, 0] - 6 * math.exp(-5))
    ok_damped = analytic_err < 1e-3

    # equipartition and well variance at m = 1/2 (v = 100, T = 2, where the
    # quartic well's anharmonic correction fits inside the 5% budget)
    eqp = FloquetParams(v=100.0, F=0.0, temperature=2.0)
    mass, dt = 0.5, 1e-4
    h_ = w_ = 16
    ones = np.ones((h_, w_))
    lat = OscillatorLattice(ones.copy(), 0 * ones, ones.copy(), 0 * ones, mass)
    forces = pin_forces(eqp)
    stream = derive_stream(SEED, "equilibrium")
    p_acc = q_acc = n = 0.0
    burn, steps = 10000, 50000
    for i in range(burn + steps):
        lat = langevin_step(lat, forces, eqp.gamma_relax, eqp.temperature, dt,
                            stream)
        if i >= burn:
            p_acc += (lat.pA**2).mean() + (lat.pB**2).mean()
            q_acc += ((lat.qA - 1.0) ** 2).mean() + ((lat.qB - 1.0) ** 2).mean()
            n += 2
    p2 = p_acc / n
    var = q_acc / n
    ok_p = abs(p2 - eqp.temperature / 2) < 0.05 * eqp.temperature / 2
    harm = eqp.temperature / (8 * eqp.v_pin)
    ok_var = abs(var - harm) < 0.05 * harm

    ok = report(
        "7 (integrator physics)",
        ok_fd and ok_damped and ok_p and ok_var,
        f"max FD rel err={worst:.2e}, damped |err|={analytic_err:.2e}, "
        f"<p^2>={p2:.4f} (T/2={eqp.temperature / 2}), "
        f"well var={var:.6f} (T/8v={harm:.6f})",
    )
    assert ok


def test_criterion_8_correlation_anisotropy(ensemble_517):
    corr, err = connected_correlation_map(
        ensemble_517, [1, 2, 3], 3, rng=derive_stream(SEED, "cmap")
    )
    r = 3
    nec_influenced = [(0, 0), (0, -1), (-1, 0)]   # (dy, dx) reached at dt = 1
    ok_pos = all(
        corr[0, dy + r, dx + r] > 3 * err[0, dy + r, dx + r]
        for dy, dx in nec_influenced
    )
    off = corr[0].copy()
    off[r, r] = -np.inf
    iy, ix = np.unravel_index(np.argmax(off), off.shape)
    ok_max = off[iy, ix] > 3 * err[0, iy, ix]
    m1 = np.abs(np.delete(corr[0].reshape(-1), r * (2 * r + 1) + r)).max()
    m2 = np.abs(np.delete(corr[1].reshape(-1), r * (2 * r + 1) + r)).max()
    m3 = np.abs(np.delete(corr[2].reshape(-1), r * (2 * r + 1) + r)).max()
    ok_decay = m1 > m2 and m1 > m3
    detail = (
        f"dt=1 corr at (0,0)/(0,-1)/(-1,0) = "
        f"{[round(float(corr[0, dy + r, dx + r]), 4) for dy, dx in nec_influenced]}, "
        f"max offsets ({iy - r},{ix - r}); |max| by dt: {m1:.4f}, {m2:.4f}, {m3:.4f}"
    )
    ok = report("8 (correlation anisotropy)", ok_pos and ok_max and ok_decay, detail)
    assert ok


def test_scgf_error_bound_and_ratios(ensemble_517, ensemble_1194):
    """Min-max bound machinery on the production ensembles; the c2/P_E ratio
    at T=5.17 is gated at the published 1.08 +- 0.15, the T=11.94 ratio is
    reported only (near the transition its estimate is unstable at desk
    scale; see the decisions ledger)."""
    k_grid = np.arange(0.0, 3.01, 0.1)
    geometries = [(2, 2, 2), (4, 4, 4), (8, 8, 8), (16, 16, 16),
                  (2, 16, 16), (16, 4, 4)]
    rep = scgf_bound(ensemble_517, geometries, k_grid, n_blocks=1000,
                     rng=derive_stream(SEED, "scgf"))
    ok_zero = np.allclose(rep.lam[:, 0], 0.0)
    ok_bound = np.isfinite(rep.bound) and rep.bound > 0
    ratio2 = rep.ratios.get(2, float("nan"))
    ok_ratio = abs(ratio2 - 1.08) <= 0.15

    rep_hot = scgf_bound(ensemble_1194, [(2, 2, 2), (4, 4, 4), (8, 8, 8),
                                         (16, 16, 16)], k_grid,
                         n_blocks=1000, rng=derive_stream(SEED, "scgf-hot"))
    hot_ratio = rep_hot.ratios.get(2, float("nan"))

    ok = report(
        "scgf bound + temperature ratios",
        ok_zero and ok_bound and ok_ratio,
        f"ln(1/eps)={rep.bound:.3f}, lambda(0)=0: {ok_zero}, "
        f"c2/P_E(T=5.17)={ratio2:.3f} (gate 1.08+-0.15); "
        f"T=11.94 reported: c2/P_E={hot_ratio:.3f}, P_E={rep_hot.pe:.3f} "
        f"(published values 1.24 and 0.21)",
    )
    assert ok
