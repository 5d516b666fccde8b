//! Acceptance gate for the toolkit: eight end-to-end checks, one test per
//! criterion, each validating a frozen expected value or a closed-form
//! oracle computed independently of the code path under test.
//!
//! Run with `cargo test --test acceptance`; each test prints a single
//! `criterion N: PASS (...)` line under `--nocapture`, and every assert
//! message starts with `criterion N: FAIL` so a red run still yields one
//! line per criterion.

use eetsim::exec::RunMode;
use eetsim::grape::{
    cnot, fidelity, gradient, haar_random_unitary, optimize, ControlPulse, GradientForm,
    OptimizeOptions, SpinSystem,
};
use eetsim::heom::{
    build_hierarchy, converged_depth, cost_estimate, heom_propagate, BathParams,
};
use eetsim::model::{
    build_exciton_hamiltonian, encode_site, HamiltonianMatrix, UnitScaler, UnitTag,
};
use eetsim::ramsey::{ramsey_analytic, ramsey_simulate, DecoherenceSource, RamseyConfig};
use eetsim::spectral::{
    chi, lineshape_g, modulation_profile, LineshapeParams, NoiseChannel, SpectralDensitySpec,
};
use eetsim::trajectory::{
    ensemble_average, noise_schedule, propagate_trajectory, NoiseRealization,
    PiecewiseHamiltonianSchedule,
};
use nalgebra::{Complex, DMatrix, DVector};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C64 = Complex<f64>;

const TAU: f64 = std::f64::consts::TAU;

/// Upper eigengap of the four-site register below, in kHz. Frozen from an
/// exact symmetric eigensolve; `criterion_3` re-derives it in place before
/// using it as the oracle for the observed exchange frequency.
const EXACT_UPPER_GAP_KHZ: f64 = 13.137446340826386;

/// Site energies of the four-level register, kHz.
const SITE_KHZ: [f64; 4] = [650.0, 645.0, 615.0, 610.0];
/// Pairwise couplings of the register, kHz, 1-based site indices.
const COUPLINGS_KHZ: [(usize, usize, f64); 6] = [
    (1, 2, 6.3040),
    (2, 3, 6.5950),
    (3, 4, 6.3040),
    (1, 3, 0.8059),
    (2, 4, 0.8059),
    (1, 4, 0.2370),
];

fn register_hamiltonian() -> HamiltonianMatrix {
    let site: Vec<f64> = SITE_KHZ.iter().map(|e| TAU * e).collect();
    let couplings: Vec<(usize, usize, f64)> =
        COUPLINGS_KHZ.iter().map(|&(a, b, j)| (a, b, TAU * j)).collect();
    build_exciton_hamiltonian(&site, &couplings, UnitTag::NmrAngular).unwrap()
}

fn register_bath() -> BathParams {
    BathParams::uniform(4, TAU * 0.01, TAU * 45.0, 5e-5).unwrap()
}

fn site1_density() -> DMatrix<C64> {
    let psi = encode_site(1).unwrap();
    &psi * psi.adjoint()
}

fn grid(n: usize, step: f64) -> Vec<f64> {
    (0..=n).map(|i| i as f64 * step).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Largest pointwise population deviation between an ensemble mean and a
/// reference population table on a shared grid.
fn max_population_dev(mean: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    assert_eq!(mean.len(), reference.len());
    let mut worst = 0.0f64;
    for (row_m, row_r) in mean.iter().zip(reference) {
        for (a, b) in row_m.iter().zip(row_r) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Criterion 1: the Ramsey triangle. A 500-trajectory simulated fringe must
/// sit on the analytic curve P0 = (1 + cos(w_L t) exp(-2 chi)) / 2 within
/// three mean standard errors (RMS over the full-decay grid), and the comb
/// attenuation chi must match the real part of the continuum lineshape
/// integral within 2% through the decay window.
#[test]
fn criterion_1_ramsey_triangle() {
    let scaler = UnitScaler::default();
    let temp = scaler.temperature_to_nmr(300.0);
    let spec = SpectralDensitySpec::Debye { lambda: TAU * 0.01, gamma: TAU * 45.0 };
    let profile =
        modulation_profile(&spec, temp, TAU * 0.005, 5000, 1.0, NoiseChannel::Dephasing).unwrap();

    let t_grid = grid(400, 0.1);
    let config = RamseyConfig {
        omega_l: TAU * 15.0,
        t_grid: t_grid.clone(),
        dt: 0.02,
        m: 500,
        source: DecoherenceSource::Chi(profile.clone()),
    };
    let analytic = ramsey_analytic(&config).unwrap();
    let sim = ramsey_simulate(&config, &profile, 11, RunMode::default()).unwrap();

    let n = t_grid.len() as f64;
    let rms = (sim
        .p0_mean
        .iter()
        .zip(&analytic)
        .map(|(s, a)| (s - a) * (s - a))
        .sum::<f64>()
        / n)
        .sqrt();
    let mean_se = mean(&sim.p0_se);
    assert!(
        rms <= 3.0 * mean_se,
        "criterion 1: FAIL (simulated fringe deviates from the analytic curve: \
         RMS {rms:.6} > 3 x mean SE {:.6})",
        3.0 * mean_se
    );

    // The comb equals the continuum lineshape only between its two native
    // timescales: past the bath correlation time 1/gamma (3.5 us) and well
    // inside its recurrence period 2 pi / omega0 (200 ms). The decay window
    // [0.5, 2.5] ms sits in that range; outside it the deviation is not
    // noise but a quadrature deficit of the comb's empty [0, omega0) bin,
    // relative size omega0 t / 2 pi, which is checked as a model out to
    // 20 ms below.
    let params = LineshapeParams::new(TAU * 0.01, TAU * 45.0, temp).unwrap();
    let omega0 = TAU * 0.005;
    let mut worst_rel = 0.0f64;
    let mut worst_model = 0.0f64;
    for k in 0..=390 {
        let t = 0.5 + 0.05 * k as f64;
        let c = chi(&profile, t);
        let g = lineshape_g(&params, t).unwrap().re;
        let rel = (c - g) / g;
        if t <= 2.5 {
            worst_rel = worst_rel.max(rel.abs());
        }
        worst_model = worst_model.max((rel + omega0 * t / TAU).abs());
    }
    assert!(
        worst_rel <= 0.02,
        "criterion 1: FAIL (comb attenuation drifts from the lineshape integral: \
         max relative deviation {worst_rel:.4} > 0.02 over the [0.5, 2.5] ms \
         decay window)"
    );
    assert!(
        worst_model <= 0.02,
        "criterion 1: FAIL (comb deviation beyond the decay window is not \
         explained by the recurrence deficit omega0 t / 2 pi: residual \
         {worst_model:.4} > 0.02 out to 20 ms)"
    );

    println!(
        "criterion 1: PASS (fringe RMS {rms:.5} <= 3 x mean SE {:.5}; \
         max |chi - Re g| / Re g = {worst_rel:.4} on the [0.5, 2.5] ms decay \
         window; past it the deviation follows the comb recurrence deficit \
         omega0 t / 2 pi to {worst_model:.4} out to 20 ms)",
        3.0 * mean_se
    );
}

/// Criterion 2: trajectory ensembles converge on the exact hierarchy result.
/// The probed truncation depth must still be 2 at tolerance 1e-4, the
/// deviation must shrink from M = 50 to M = 500 in at least 4 of 5 seeds
/// (and in the medians across all three ensemble sizes), and every M = 500
/// deviation must clear the frozen absolute threshold of 0.12.
#[test]
fn criterion_2_ensemble_matches_hierarchy() {
    let h = register_hamiltonian();
    let bath = register_bath();
    let rho0 = site1_density();
    let psi0 = encode_site(1).unwrap();
    let t_grid = grid(200, 0.06);

    let depth =
        converged_depth(&h, &bath, &rho0, &t_grid, 1e-4, RunMode::default()).unwrap();
    assert_eq!(
        depth, 2,
        "criterion 2: FAIL (hierarchy depth probe moved: expected 2, got {depth})"
    );
    let reference =
        heom_propagate(&h, &bath, &rho0, &t_grid, depth, RunMode::default()).unwrap();

    let spec = SpectralDensitySpec::Debye { lambda: TAU * 0.01, gamma: TAU * 45.0 };
    let alpha = std::f64::consts::SQRT_2;
    let profile =
        modulation_profile(&spec, 5e-5, TAU * 0.005, 5000, alpha, NoiseChannel::Dephasing)
            .unwrap();

    let seeds: [u64; 5] = [11, 12, 13, 14, 15];
    let sizes: [usize; 3] = [50, 100, 500];
    let mut devs = [[0.0f64; 3]; 5];
    for (si, &seed) in seeds.iter().enumerate() {
        for (mi, &m) in sizes.iter().enumerate() {
            let ens = ensemble_average(
                &h,
                &profile,
                m,
                0.02,
                &t_grid,
                &psi0,
                seed,
                RunMode::default(),
            )
            .unwrap();
            devs[si][mi] = max_population_dev(&ens.mean, &reference.populations);
        }
    }

    let shrinking = devs.iter().filter(|row| row[2] < row[0]).count();
    assert!(
        shrinking >= 4,
        "criterion 2: FAIL (deviation shrank from M=50 to M=500 in only \
         {shrinking}/5 seeds; per-seed deviations {devs:?})"
    );
    let med: Vec<f64> = (0..3)
        .map(|mi| median(&devs.iter().map(|row| row[mi]).collect::<Vec<_>>()))
        .collect();
    assert!(
        med[0] > med[1] && med[1] > med[2],
        "criterion 2: FAIL (median deviation not decreasing across M = 50/100/500: \
         {:.4} / {:.4} / {:.4})",
        med[0],
        med[1],
        med[2]
    );
    for (si, row) in devs.iter().enumerate() {
        assert!(
            row[2] <= 0.12,
            "criterion 2: FAIL (seed {} M=500 deviation {:.4} above the frozen \
             threshold 0.12)",
            seeds[si],
            row[2]
        );
    }

    println!(
        "criterion 2: PASS (depth 2; deviation shrank in {shrinking}/5 seeds; \
         median deviations {:.4}/{:.4}/{:.4} across M=50/100/500; \
         worst M=500 deviation {:.4} <= 0.12)",
        med[0],
        med[1],
        med[2],
        devs.iter().map(|r| r[2]).fold(0.0f64, f64::max)
    );
}

/// First interior local minimum of `p` on `t`, refined by fitting a parabola
/// through the bracketing three points. Used as an independent frequency
/// readout: for two-state exchange the first minimum of the initial-site
/// population sits half an oscillation period after t = 0.
fn first_minimum(t: &[f64], p: &[f64]) -> f64 {
    for i in 1..p.len() - 1 {
        if p[i] <= p[i - 1] && p[i] <= p[i + 1] {
            let dt = t[i + 1] - t[i];
            let denom = p[i - 1] - 2.0 * p[i] + p[i + 1];
            let shift = if denom.abs() > 0.0 {
                0.5 * dt * (p[i - 1] - p[i + 1]) / denom
            } else {
                0.0
            };
            return t[i] + shift;
        }
    }
    panic!("criterion 3: FAIL (no interior population minimum found)");
}

/// Criterion 3: qualitative structure of the four-site transfer figure.
/// (a) The site 1 <-> 2 exchange frequency must match the register's upper
/// eigengap (re-derived here from a plain symmetric eigensolve) within 2%;
/// the coarser two-level reduction of that block gives 13.56 kHz, 3.2%
/// above the exact gap, and is checked as a stated approximation only.
/// (b) Oscillations damp out: the late swing is under a tenth of the early
/// swing. (c) By 24 ms the populations are stationary (|dP/dt| < 1e-4 /ms)
/// and thermally ordered P4 >= P3 >= P2 >= P1.
#[test]
fn criterion_3_transfer_figure_structure() {
    let h = register_hamiltonian();
    let bath = register_bath();
    let rho0 = site1_density();

    let mut flat = Vec::with_capacity(16);
    for r in 0..4 {
        for c in 0..4 {
            flat.push(if r == c {
                SITE_KHZ[r]
            } else {
                COUPLINGS_KHZ
                    .iter()
                    .find(|&&(a, b, _)| (a - 1 == r && b - 1 == c) || (a - 1 == c && b - 1 == r))
                    .map(|&(_, _, j)| j)
                    .unwrap()
            });
        }
    }
    let mut ev: Vec<f64> = DMatrix::from_row_slice(4, 4, &flat)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gap_khz = ev[3] - ev[2];
    assert!(
        (gap_khz - EXACT_UPPER_GAP_KHZ).abs() <= 1e-9,
        "criterion 3: FAIL (upper eigengap re-derivation moved: {gap_khz:.12} kHz \
         vs frozen {EXACT_UPPER_GAP_KHZ:.12})"
    );
    let two_level_khz =
        ((SITE_KHZ[0] - SITE_KHZ[1]).powi(2) + 4.0 * COUPLINGS_KHZ[0].2.powi(2)).sqrt();
    assert!(
        (two_level_khz - 13.56).abs() <= 0.005 * 13.56,
        "criterion 3: FAIL (two-level block estimate moved: {two_level_khz:.4} kHz \
         vs 13.56)"
    );

    let fine_grid = grid(250, 0.002);
    let fine = heom_propagate(&h, &bath, &rho0, &fine_grid, 2, RunMode::default()).unwrap();
    let p1_fine: Vec<f64> = fine.populations.iter().map(|row| row[0]).collect();
    let t_min = first_minimum(&fine_grid, &p1_fine);
    let omega_observed = std::f64::consts::PI / t_min;
    let omega_exact = TAU * gap_khz;
    let rel = (omega_observed - omega_exact).abs() / omega_exact;
    assert!(
        rel <= 0.02,
        "criterion 3: FAIL (exchange frequency {:.4} kHz deviates {:.2}% from the \
         eigengap {gap_khz:.4} kHz)",
        omega_observed / TAU,
        100.0 * rel
    );

    let long_grid = grid(240, 0.1);
    let long = heom_propagate(&h, &bath, &rho0, &long_grid, 2, RunMode::default()).unwrap();
    let p1_long: Vec<f64> = long.populations.iter().map(|row| row[0]).collect();
    let window_ptp = |t: &[f64], p: &[f64], lo: f64, hi: f64| {
        let vals: Vec<f64> = t
            .iter()
            .zip(p)
            .filter(|(tt, _)| **tt >= lo && **tt <= hi)
            .map(|(_, v)| *v)
            .collect();
        vals.iter().copied().fold(f64::MIN, f64::max)
            - vals.iter().copied().fold(f64::MAX, f64::min)
    };
    let early = window_ptp(&fine_grid, &p1_fine, 0.0, 0.5);
    let late = window_ptp(&long_grid, &p1_long, 10.0, 12.0);
    assert!(
        late < 0.1 * early,
        "criterion 3: FAIL (oscillations not damped: late swing {late:.4} vs \
         early swing {early:.4})"
    );

    let n = long_grid.len();
    let mut slope = 0.0f64;
    for level in 0..4 {
        let d = (long.populations[n - 1][level] - long.populations[n - 3][level])
            / (long_grid[n - 1] - long_grid[n - 3]);
        slope = slope.max(d.abs());
    }
    assert!(
        slope < 1e-4,
        "criterion 3: FAIL (populations still drifting at 24 ms: max |dP/dt| \
         {slope:.2e} /ms >= 1e-4)"
    );
    let fin = &long.populations[n - 1];
    assert!(
        fin[3] >= fin[2] && fin[2] >= fin[1] && fin[1] >= fin[0],
        "criterion 3: FAIL (final populations not ordered P4 >= P3 >= P2 >= P1: \
         {fin:?})"
    );

    println!(
        "criterion 3: PASS (exchange at {:.4} kHz vs eigengap {gap_khz:.4} kHz, \
         {:.2}% off; the two-level block estimate {two_level_khz:.4} kHz sits \
         {:.1}% above the exact gap and is not the oracle; late/early swing \
         {:.3}/{:.3}; final max |dP/dt| {slope:.2e} /ms with P4 >= ... >= P1)",
        omega_observed / TAU,
        100.0 * rel,
        100.0 * (two_level_khz - gap_khz) / gap_khz,
        late,
        early
    );
}

/// Criterion 4: structural invariants of the hierarchy solver. Trace and
/// Hermiticity drift stay at solver precision; with the coupling strength
/// sent to zero the dynamics match an independently propagated unitary
/// trajectory; a diagonal Hamiltonian under pure dephasing leaves every
/// population frozen; and deepening the hierarchy converges monotonically.
#[test]
fn criterion_4_hierarchy_invariants() {
    let h = register_hamiltonian();
    let bath = register_bath();
    let rho0 = site1_density();
    let t_grid = grid(40, 0.1);

    let run = heom_propagate(&h, &bath, &rho0, &t_grid, 2, RunMode::default()).unwrap();
    assert!(
        run.max_trace_error <= 1e-8,
        "criterion 4: FAIL (trace drift {:.2e} above 1e-8)",
        run.max_trace_error
    );
    assert!(
        run.max_hermiticity_error <= 1e-10,
        "criterion 4: FAIL (Hermiticity drift {:.2e} above 1e-10)",
        run.max_hermiticity_error
    );

    let bath0 = BathParams::uniform(4, 0.0, TAU * 45.0, 5e-5).unwrap();
    let unitary = heom_propagate(&h, &bath0, &rho0, &t_grid, 2, RunMode::default()).unwrap();
    let schedule =
        PiecewiseHamiltonianSchedule::free_evolution(register_hamiltonian(), 0.1, 40).unwrap();
    let psi0 = encode_site(1).unwrap();
    let traj = propagate_trajectory(&schedule, &psi0).unwrap();
    let dev_unitary = max_population_dev(&unitary.populations, &traj.populations());
    assert!(
        dev_unitary <= 1e-8,
        "criterion 4: FAIL (zero-coupling hierarchy deviates {dev_unitary:.2e} \
         from the unitary trajectory)"
    );

    let site: Vec<f64> = SITE_KHZ.iter().map(|e| TAU * e).collect();
    let h_diag = build_exciton_hamiltonian(&site, &[], UnitTag::NmrAngular).unwrap();
    let quarter = C64::new(0.5, 0.0);
    let psi_flat = DVector::from_element(4, quarter);
    let rho_flat = &psi_flat * psi_flat.adjoint();
    let dephasing =
        heom_propagate(&h_diag, &bath, &rho_flat, &t_grid, 2, RunMode::default()).unwrap();
    let mut pop_drift = 0.0f64;
    for row in &dephasing.populations {
        for p in row {
            pop_drift = pop_drift.max((p - 0.25).abs());
        }
    }
    assert!(
        pop_drift <= 1e-8,
        "criterion 4: FAIL (dephasing moved populations of a diagonal register \
         by {pop_drift:.2e})"
    );

    let mut runs = Vec::new();
    for depth in 0..=4 {
        runs.push(
            heom_propagate(&h, &bath, &rho0, &t_grid, depth, RunMode::default())
                .unwrap()
                .populations,
        );
    }
    let dists: Vec<f64> =
        (0..4).map(|k| max_population_dev(&runs[k], &runs[k + 1])).collect();
    for k in 0..3 {
        assert!(
            dists[k + 1] < dists[k],
            "criterion 4: FAIL (depth convergence not monotone: successive \
             distances {dists:?})"
        );
    }

    println!(
        "criterion 4: PASS (trace drift {:.1e}, Hermiticity drift {:.1e}, \
         zero-coupling vs unitary {dev_unitary:.1e}, dephasing population \
         drift {pop_drift:.1e}, depth distances {:?} strictly decreasing)",
        run.max_trace_error,
        run.max_hermiticity_error,
        dists.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>()
    );
}

/// Criterion 5: hierarchy bookkeeping. For every register size N <= 5,
/// exponential order K <= 2, and depth <= 6, the enumerated hierarchy has
/// exactly binomial(depth + NK, NK) members and never exceeds the printed
/// Stirling-style bound.
#[test]
fn criterion_5_hierarchy_counting() {
    let mut checked = 0usize;
    for n in 1..=5usize {
        for k in 1..=2usize {
            for depth in 0..=6usize {
                let set = build_hierarchy(n * k, depth).unwrap();
                let est = cost_estimate(n, k, depth);
                assert_eq!(
                    BigUint::from(set.len()),
                    est.count,
                    "criterion 5: FAIL (enumerated {} members at N={n} K={k} \
                     depth={depth}, closed form says {})",
                    set.len(),
                    est.count
                );
                assert!(
                    !est.bound_overflowed && set.len() as f64 <= est.stirling_bound,
                    "criterion 5: FAIL (count {} exceeds bound {} at N={n} K={k} \
                     depth={depth})",
                    set.len(),
                    est.stirling_bound
                );
                checked += 1;
            }
        }
    }
    println!(
        "criterion 5: PASS ({checked} configurations: enumerated counts equal \
         binomial(depth + NK, NK) and sit under the bound)"
    );
}

fn flatten_pulse(pulse: &ControlPulse) -> (Vec<f64>, Vec<f64>) {
    let l = pulse.segments();
    let nq = pulse.n_qubits();
    let mut ux = Vec::with_capacity(l * nq);
    let mut uy = Vec::with_capacity(l * nq);
    for j in 0..l {
        for k in 0..nq {
            ux.push(pulse.ux(j, k));
            uy.push(pulse.uy(j, k));
        }
    }
    (ux, uy)
}

/// Criterion 6: pulse search. The exact gradient must agree with a central
/// finite difference to 1e-4 relative (norm over all controls) on 50 random
/// two-qubit instances; the stock optimizer must reach fidelity 0.99 for a
/// CNOT on the chloroform register in 100 segments of 0.05 ms; and the
/// median fidelity over 20 random two-qubit targets must also reach 0.99.
#[test]
fn criterion_6_pulse_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst_rel = 0.0f64;
    for i in 0..50u64 {
        let sys = SpinSystem::two_spin(
            rng.gen_range(-8.0..=8.0),
            rng.gen_range(-8.0..=8.0),
            rng.gen_range(0.05..=0.5),
        )
        .unwrap();
        let dt = rng.gen_range(0.02..=0.08);
        let pulse = ControlPulse::random_uniform(2, 6, dt, 0.2 * TAU, 300 + i).unwrap();
        let target = haar_random_unitary(4, 9000 + i);
        let g = gradient(&pulse, &target, &sys, GradientForm::Exact).unwrap();
        let analytic: Vec<f64> = g.gx.iter().chain(&g.gy).copied().collect();

        let (ux, uy) = flatten_pulse(&pulse);
        let h = 1e-5;
        let mut fd = Vec::with_capacity(2 * ux.len());
        for table in 0..2 {
            let len = ux.len();
            for idx in 0..len {
                let probe = |delta: f64| {
                    let mut ux2 = ux.clone();
                    let mut uy2 = uy.clone();
                    if table == 0 {
                        ux2[idx] += delta;
                    } else {
                        uy2[idx] += delta;
                    }
                    let p = ControlPulse::from_controls(2, dt, ux2, uy2).unwrap();
                    fidelity(&target, &p, &sys).unwrap()
                };
                fd.push((probe(h) - probe(-h)) / (2.0 * h));
            }
        }
        let diff_norm = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let fd_norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = diff_norm / fd_norm;
        assert!(
            rel <= 1e-4,
            "criterion 6: FAIL (instance {i}: gradient vs central difference \
             relative deviation {rel:.2e} > 1e-4)"
        );
        worst_rel = worst_rel.max(rel);
    }

    let opts = OptimizeOptions::default();
    let out = optimize(&cnot(), &SpinSystem::chloroform(), 100, 0.05, &opts).unwrap();
    assert!(
        out.fidelity >= 0.99,
        "criterion 6: FAIL (chloroform CNOT stalled at fidelity {:.6})",
        out.fidelity
    );
    let cnot_f = out.fidelity;

    let sys = SpinSystem::chloroform();
    let mut fids = Vec::with_capacity(20);
    for i in 0..20u64 {
        let target = haar_random_unitary(4, 1000 + i);
        let run_opts = OptimizeOptions { seed: 2000 + i, ..OptimizeOptions::default() };
        fids.push(optimize(&target, &sys, 100, 0.05, &run_opts).unwrap().fidelity);
    }
    let med = median(&fids);
    assert!(
        med >= 0.99,
        "criterion 6: FAIL (median fidelity {med:.6} over 20 random targets \
         below 0.99)"
    );

    println!(
        "criterion 6: PASS (worst gradient/FD deviation {worst_rel:.2e} over 50 \
         instances; chloroform CNOT fidelity {cnot_f:.6}; median {med:.6} over \
         20 random targets)"
    );
}

/// Criterion 7: the synthesized noise is statistically faithful. The
/// empirical autocorrelation over 1e4 field realizations must match the
/// closed-form comb autocorrelation within three standard errors at ten
/// lags, and an averaged transverse coherence over 2000 propagated
/// trajectories must match the Gaussian-phase envelope exp(-2 chi) within
/// three standard errors at each readout.
#[test]
fn criterion_7_noise_statistics() {
    let spec = SpectralDensitySpec::Debye { lambda: TAU * 0.01, gamma: TAU * 45.0 };
    let profile = modulation_profile(
        &spec,
        5e-5,
        TAU * 0.05,
        500,
        std::f64::consts::SQRT_2,
        NoiseChannel::Dephasing,
    )
    .unwrap();

    let m = 10_000usize;
    let lags: Vec<f64> = (0..10).map(|k| k as f64 * 0.01).collect();
    let mut sums = vec![0.0f64; lags.len()];
    let mut sums_sq = vec![0.0f64; lags.len()];
    for r in 0..m {
        let real = NoiseRealization::new(&profile, 50_000 + r as u64);
        let b0 = real.signal_at(0.0);
        for (k, &tau) in lags.iter().enumerate() {
            let prod = b0 * real.signal_at(tau);
            sums[k] += prod;
            sums_sq[k] += prod * prod;
        }
    }
    let mut worst_sigma = 0.0f64;
    for (k, &tau) in lags.iter().enumerate() {
        let mean_k = sums[k] / m as f64;
        let var = (sums_sq[k] / m as f64 - mean_k * mean_k).max(0.0);
        let se = (var / (m as f64 - 1.0)).sqrt();
        let expected = profile.autocorrelation(tau);
        let dev = (mean_k - expected).abs();
        assert!(
            dev <= 3.0 * se,
            "criterion 7: FAIL (autocorrelation at lag {tau:.2} ms off by \
             {dev:.4e} with SE {se:.4e})"
        );
        worst_sigma = worst_sigma.max(dev / se);
    }

    let strong = SpectralDensitySpec::Debye { lambda: TAU * 1.0, gamma: TAU * 45.0 };
    let profile_b =
        modulation_profile(&strong, 5e-5, TAU * 0.2, 100, 1.0, NoiseChannel::Dephasing).unwrap();
    let h_free = HamiltonianMatrix::new(DMatrix::zeros(2, 2), UnitTag::NmrAngular).unwrap();
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = DVector::from_element(2, amp);

    let m_traj = 2000usize;
    let dt = 0.002;
    let steps = 500usize;
    let readout: Vec<usize> = (1..=10).map(|k| k * 50).collect();
    let mut x_sums = vec![0.0f64; readout.len()];
    let mut x_sums_sq = vec![0.0f64; readout.len()];
    for r in 0..m_traj {
        let sched =
            noise_schedule(&h_free, &profile_b, dt, steps, 70_000 + r as u64).unwrap();
        let run = propagate_trajectory(&sched, &plus).unwrap();
        for (k, &idx) in readout.iter().enumerate() {
            let s = run.state(idx);
            let x = 2.0 * (s[0].conj() * s[1]).re;
            x_sums[k] += x;
            x_sums_sq[k] += x * x;
        }
    }
    let mut worst_sigma_x = 0.0f64;
    for (k, &idx) in readout.iter().enumerate() {
        let t = idx as f64 * dt;
        let mean_x = x_sums[k] / m_traj as f64;
        let var = (x_sums_sq[k] / m_traj as f64 - mean_x * mean_x).max(0.0);
        let se = (var / (m_traj as f64 - 1.0)).sqrt();
        let expected = (-2.0 * chi(&profile_b, t)).exp();
        let dev = (mean_x - expected).abs();
        assert!(
            dev <= 3.0 * se,
            "criterion 7: FAIL (<X> at {t:.1} ms off the exp(-2 chi) envelope by \
             {dev:.4e} with SE {se:.4e})"
        );
        worst_sigma_x = worst_sigma_x.max(dev / se);
    }

    println!(
        "criterion 7: PASS (autocorrelation within {worst_sigma:.2} SE at 10 lags \
         over 1e4 realizations; <X> within {worst_sigma_x:.2} SE of exp(-2 chi) \
         at 10 readouts over 2000 trajectories)"
    );
}

/// Criterion 8: unit bookkeeping. The wavenumber map sends 13000 / 0.2 / 900
/// cm^-1 to 2 pi x 650 / 0.01 / 45 rad/ms, and the thermal frequency of the
/// scaled register temperature 5e-5 K is 2 pi x 1.042 MHz to 0.1%.
#[test]
fn criterion_8_unit_scaling() {
    let s = UnitScaler::default();
    let cases = [(13000.0, 650.0), (0.2, 0.01), (900.0, 45.0)];
    for (wavenumber, khz) in cases {
        let got = s.wavenumber_to_rad_per_ms(wavenumber);
        let want = TAU * khz;
        assert!(
            (got - want).abs() <= 1e-12 * want.abs(),
            "criterion 8: FAIL ({wavenumber} cm^-1 mapped to {got:.12} rad/ms, \
             expected 2 pi x {khz})"
        );
    }
    let thermal = s.thermal_frequency(5e-5);
    let want = TAU * 1042.0;
    let rel = (thermal - want).abs() / want;
    assert!(
        rel <= 1e-3,
        "criterion 8: FAIL (thermal frequency at 5e-5 K is {thermal:.2} rad/ms, \
         {:.3}% from 2 pi x 1042 kHz)",
        100.0 * rel
    );
    println!(
        "criterion 8: PASS (wavenumber map exact on 13000 / 0.2 / 900 cm^-1; \
         thermal frequency {:.4} MHz x 2 pi, {:.3}% from 1.042)",
        thermal / TAU / 1000.0,
        100.0 * rel
    );
}
