//! Gradient-ascent pulse engineering on small spin registers: compile
//! piecewise-constant x/y controls into propagators, score them against a
//! target gate, differentiate the score, and iterate with a backtracking
//! line search.
//!
//! The objective is `F = |Tr(U_D^dag U_T)| / 2^n` with
//! `U_T = U_L ... U_2 U_1` and
//! `U_j = exp[-i dt (H_int + sum_k u_x^k(j) X_k + u_y^k(j) Y_k)]`.
//! Two gradient forms are provided: the exact Frechet derivative of each
//! segment exponential (eigenbasis divided differences) and the cheaper
//! first-order form that treats the control Hamiltonian as constant over
//! the segment. The first-order rule is the classic one but its relative
//! error grows as `dt |H|`; on registers with kHz-scale internal shifts a
//! practical segment length makes that error order one and the ascent
//! stalls, so the optimizer defaults to the exact form.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{HamiltonianMatrix, UnitTag};
use crate::{mat, Error, Result};

/// Internal Hamiltonian of a small spin register plus the per-qubit
/// control operators.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    n_qubits: usize,
    h: HamiltonianMatrix,
    ops_x: Vec<DMatrix<C64>>,
    ops_y: Vec<DMatrix<C64>>,
}

impl SpinSystem {
    /// One spin with chemical shift `nu_khz` (kHz): `H = pi nu Z`, rad/ms.
    pub fn single_spin(nu_khz: f64) -> Result<Self> {
        let z = mat::pauli_z();
        let h = z.map(|e| C64::new(std::f64::consts::PI * nu_khz, 0.0) * e);
        Self::from_hamiltonian(HamiltonianMatrix::new(h, UnitTag::NmrAngular)?)
    }

    /// Two spins with shifts `nu1_khz`, `nu2_khz` and scalar coupling
    /// `j_khz` (all kHz):
    /// `H = pi nu1 Z1 + pi nu2 Z2 + (pi/2) J Z1 Z2`, rad/ms.
    pub fn two_spin(nu1_khz: f64, nu2_khz: f64, j_khz: f64) -> Result<Self> {
        use std::f64::consts::PI;
        let (i2, z) = (mat::pauli_i(), mat::pauli_z());
        let z1 = mat::kron(&z, &i2);
        let z2 = mat::kron(&i2, &z);
        let zz = mat::kron(&z, &z);
        let mut h = DMatrix::<C64>::zeros(4, 4);
        h += z1.map(|e| C64::new(PI * nu1_khz, 0.0) * e);
        h += z2.map(|e| C64::new(PI * nu2_khz, 0.0) * e);
        h += zz.map(|e| C64::new(0.5 * PI * j_khz, 0.0) * e);
        Self::from_hamiltonian(HamiltonianMatrix::new(h, UnitTag::NmrAngular)?)
    }

    /// The 13C-chloroform register used for the two-qubit gate searches:
    /// shifts 3.2065 kHz and 7.7879 kHz, coupling 215.1 Hz.
    pub fn chloroform() -> Self {
        Self::two_spin(3.2065, 7.7879, 0.2151).expect("static parameters are valid")
    }

    /// Wraps an arbitrary register-frame Hamiltonian of dimension `2^n`.
    pub fn from_hamiltonian(h: HamiltonianMatrix) -> Result<Self> {
        if h.unit_tag() != UnitTag::NmrAngular {
            return Err(Error::InvalidInput(format!(
                "control systems are register-frame; got unit tag {}",
                h.unit_tag()
            )));
        }
        let dim = h.dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension {dim} is not a power of two qubit space"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        let mut ops_x = Vec::with_capacity(n_qubits);
        let mut ops_y = Vec::with_capacity(n_qubits);
        for k in 0..n_qubits {
            ops_x.push(embed_single(&mat::pauli_x(), k, n_qubits));
            ops_y.push(embed_single(&mat::pauli_y(), k, n_qubits));
        }
        Ok(Self { n_qubits, h, ops_x, ops_y })
    }

    /// Number of qubits.
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Internal Hamiltonian.
    pub fn hamiltonian(&self) -> &HamiltonianMatrix {
        &self.h
    }
}

/// `op` acting on qubit `k` (0-based, qubit 0 most significant).
fn embed_single(op: &DMatrix<C64>, k: usize, n_qubits: usize) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::identity(1, 1);
    for q in 0..n_qubits {
        let factor = if q == k { op.clone() } else { mat::pauli_i() };
        out = mat::kron(&out, &factor);
    }
    out
}

/// Piecewise-constant x/y control amplitudes, rad/ms, `dt` ms per segment.
#[derive(Debug, Clone)]
pub struct ControlPulse {
    n_qubits: usize,
    dt: f64,
    /// `ux[j * n_qubits + k]`: x control on qubit `k` during segment `j`.
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl ControlPulse {
    /// All-zero pulse with `l` segments.
    pub fn zeros(n_qubits: usize, l: usize, dt: f64) -> Result<Self> {
        Self::from_controls(n_qubits, dt, vec![0.0; l * n_qubits], vec![0.0; l * n_qubits])
    }

    /// Pulse from explicit control tables laid out `[segment][qubit]`.
    pub fn from_controls(n_qubits: usize, dt: f64, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidInput("pulse needs at least one qubit".into()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!("segment length must be positive, got {dt}")));
        }
        if ux.is_empty() || ux.len() != uy.len() || ux.len() % n_qubits != 0 {
            return Err(Error::InvalidInput(format!(
                "control tables must be equal nonempty multiples of {n_qubits}, got {} and {}",
                ux.len(),
                uy.len()
            )));
        }
        if ux.iter().chain(&uy).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("control amplitudes must be finite".into()));
        }
        Ok(Self { n_qubits, dt, ux, uy })
    }

    /// Uniform random controls in `[-amp, amp]` from a seeded generator.
    pub fn random_uniform(n_qubits: usize, l: usize, dt: f64, amp: f64, seed: u64) -> Result<Self> {
        if !(amp >= 0.0) || !amp.is_finite() {
            return Err(Error::InvalidInput(format!("amplitude must be nonnegative, got {amp}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = l * n_qubits;
        let draw = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(-amp..=amp)).collect();
        let ux = draw(&mut rng);
        let uy = draw(&mut rng);
        Self::from_controls(n_qubits, dt, ux, uy)
    }

    /// Number of segments.
    pub fn segments(&self) -> usize {
        self.ux.len() / self.n_qubits
    }

    /// Number of qubits.
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Segment length in ms.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total pulse duration in ms.
    pub fn total_time(&self) -> f64 {
        self.dt * self.segments() as f64
    }

    /// x control on qubit `k` during segment `j`.
    pub fn ux(&self, j: usize, k: usize) -> f64 {
        self.ux[j * self.n_qubits + k]
    }

    /// y control on qubit `k` during segment `j`.
    pub fn uy(&self, j: usize, k: usize) -> f64 {
        self.uy[j * self.n_qubits + k]
    }

    /// Largest absolute control amplitude.
    pub fn max_amplitude(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// `self + eps * g`, optionally clamped to `cap`.
    fn stepped(&self, g: &PulseGradient, eps: f64, cap: Option<f64>) -> Self {
        let clamp = |v: f64| match cap {
            Some(c) => v.clamp(-c, c),
            None => v,
        };
        let ux = self.ux.iter().zip(&g.gx).map(|(&u, &d)| clamp(u + eps * d)).collect();
        let uy = self.uy.iter().zip(&g.gy).map(|(&u, &d)| clamp(u + eps * d)).collect();
        Self { n_qubits: self.n_qubits, dt: self.dt, ux, uy }
    }
}

/// Gradient of the fidelity, laid out exactly like the pulse tables.
#[derive(Debug, Clone)]
pub struct PulseGradient {
    /// d F / d u_x, `[segment][qubit]`.
    pub gx: Vec<f64>,
    /// d F / d u_y, `[segment][qubit]`.
    pub gy: Vec<f64>,
}

impl PulseGradient {
    /// Euclidean norm over all entries.
    pub fn norm(&self) -> f64 {
        self.gx.iter().chain(&self.gy).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Which segment-derivative is used inside [`gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientForm {
    /// Exact Frechet derivative of each segment exponential.
    Exact,
    /// First-order rule `dU_j ~ -i dt A U_j`; accurate for small
    /// `dt |H_j|` and the classic choice for this optimizer.
    FirstOrder,
}

fn check_dims(pulse: &ControlPulse, sys: &SpinSystem) -> Result<()> {
    if pulse.n_qubits() != sys.n_qubits() {
        return Err(Error::InvalidInput(format!(
            "pulse drives {} qubits but the system has {}",
            pulse.n_qubits(),
            sys.n_qubits()
        )));
    }
    Ok(())
}

/// Per-segment compilation products reused by the fidelity and gradient.
struct Compiled {
    /// Segment propagators `U_j`.
    seg_u: Vec<DMatrix<C64>>,
    /// Segment Hamiltonian eigenvectors.
    seg_v: Vec<DMatrix<C64>>,
    /// Segment Hamiltonian eigenvalues.
    seg_w: Vec<Vec<f64>>,
    /// Forward partial products; `fwd[j] = U_j ... U_1`, `fwd[0] = I`.
    fwd: Vec<DMatrix<C64>>,
}

fn compile(pulse: &ControlPulse, sys: &SpinSystem) -> Compiled {
    let dim = sys.dim();
    let l = pulse.segments();
    let mut seg_u = Vec::with_capacity(l);
    let mut seg_v = Vec::with_capacity(l);
    let mut seg_w = Vec::with_capacity(l);
    let mut fwd = Vec::with_capacity(l + 1);
    fwd.push(DMatrix::<C64>::identity(dim, dim));
    let mut hj = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..l {
        hj.copy_from(sys.h.matrix());
        for k in 0..sys.n_qubits() {
            let (cx, cy) = (pulse.ux(j, k), pulse.uy(j, k));
            if cx != 0.0 {
                hj += sys.ops_x[k].map(|e| C64::new(cx, 0.0) * e);
            }
            if cy != 0.0 {
                hj += sys.ops_y[k].map(|e| C64::new(cy, 0.0) * e);
            }
        }
        let (w, v) = mat::eigh(&hj);
        let mut u = v.clone();
        for (p, wp) in w.iter().enumerate() {
            let phase = C64::from_polar(1.0, -pulse.dt() * wp);
            for r in 0..dim {
                u[(r, p)] *= phase;
            }
        }
        let u = u * v.adjoint();
        fwd.push(&u * &fwd[j]);
        seg_u.push(u);
        seg_v.push(v);
        seg_w.push(w);
    }
    Compiled { seg_u, seg_v, seg_w, fwd }
}

/// Total propagator `U_T = U_L ... U_1` of a pulse on a system.
pub fn compile_propagator(pulse: &ControlPulse, sys: &SpinSystem) -> Result<DMatrix<C64>> {
    check_dims(pulse, sys)?;
    Ok(compile(pulse, sys).fwd.last().unwrap().clone())
}

/// `|Tr(U_D^dag U_T)| / 2^n`, global-phase invariant, in `[0, 1]`.
pub fn gate_fidelity(u_target: &DMatrix<C64>, u_t: &DMatrix<C64>) -> f64 {
    let dim = u_target.nrows();
    let z: C64 = (u_target.adjoint() * u_t).diagonal().iter().sum();
    z.norm() / dim as f64
}

/// Fidelity of a pulse's propagator against a target gate.
pub fn fidelity(u_target: &DMatrix<C64>, pulse: &ControlPulse, sys: &SpinSystem) -> Result<f64> {
    check_dims(pulse, sys)?;
    if u_target.nrows() != sys.dim() || u_target.ncols() != sys.dim() {
        return Err(Error::InvalidInput(format!(
            "target is {}x{}, system dimension is {}",
            u_target.nrows(),
            u_target.ncols(),
            sys.dim()
        )));
    }
    Ok(gate_fidelity(u_target, compile(pulse, sys).fwd.last().unwrap()))
}

/// Gradient of [`fidelity`] with respect to every control amplitude.
///
/// Fails as ill-conditioned when the trace overlap is numerically zero
/// (the absolute value is not differentiable there).
pub fn gradient(
    pulse: &ControlPulse,
    u_target: &DMatrix<C64>,
    sys: &SpinSystem,
    form: GradientForm,
) -> Result<PulseGradient> {
    check_dims(pulse, sys)?;
    let dim = sys.dim();
    if u_target.nrows() != dim || u_target.ncols() != dim {
        return Err(Error::InvalidInput(format!(
            "target is {}x{}, system dimension is {dim}",
            u_target.nrows(),
            u_target.ncols()
        )));
    }
    let c = compile(pulse, sys);
    let u_t = c.fwd.last().unwrap();
    let z: C64 = (u_target.adjoint() * u_t).diagonal().iter().sum();
    if z.norm() < 1e-12 {
        return Err(Error::NumericalFailure(
            "gradient is ill-conditioned: trace overlap is numerically zero".into(),
        ));
    }
    // dF = Re[(z*/|z|) dz] / 2^n with dz_j = Tr(D_j M_j),
    // M_j = (U_{j-1}...U_1)(U_D^dag U_L...U_{j+1}).
    let phase = z.conj() / z.norm();
    let l = pulse.segments();
    let n = sys.n_qubits();
    let mut gx = vec![0.0f64; l * n];
    let mut gy = vec![0.0f64; l * n];
    let mut g_right = u_target.adjoint();
    let dt = pulse.dt();
    for j in (0..l).rev() {
        let m = &c.fwd[j] * &g_right;
        for k in 0..n {
            for (axis, table) in [(&sys.ops_x[k], &mut gx), (&sys.ops_y[k], &mut gy)] {
                let dz = match form {
                    GradientForm::Exact => {
                        let d = frechet_exp(&c.seg_v[j], &c.seg_w[j], axis, dt);
                        trace_prod(&d, &m)
                    }
                    GradientForm::FirstOrder => {
                        // Tr((-i dt A) U_j M)
                        let w = &c.seg_u[j] * &m;
                        C64::new(0.0, -dt) * trace_prod(axis, &w)
                    }
                };
                table[j * n + k] = (phase * dz).re / dim as f64;
            }
        }
        g_right = &g_right * &c.seg_u[j];
    }
    Ok(PulseGradient { gx, gy })
}

/// `Tr(A B)` without forming the product.
fn trace_prod(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let dim = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..dim {
        for c in 0..dim {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Exact directional derivative of `exp(-i dt H)` in direction `A`, from
/// the eigenbasis divided differences of the exponential.
fn frechet_exp(v: &DMatrix<C64>, w: &[f64], a: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let dim = v.nrows();
    let b = v.adjoint() * a * v;
    let scale = w.iter().fold(1.0f64, |acc, &x| acc.max(x.abs()));
    let mut k = DMatrix::<C64>::zeros(dim, dim);
    for p in 0..dim {
        for q in 0..dim {
            let (wp, wq) = (w[p], w[q]);
            let lam = if (wp - wq).abs() <= 1e-12 * scale {
                // Degenerate pair: divided difference collapses to f'.
                C64::new(0.0, -dt) * C64::from_polar(1.0, -dt * wp)
            } else {
                (C64::from_polar(1.0, -dt * wp) - C64::from_polar(1.0, -dt * wq))
                    / C64::new(wp - wq, 0.0)
            };
            k[(p, q)] = b[(p, q)] * lam;
        }
    }
    v * k * v.adjoint()
}

/// Progress status of an optimization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeStatus {
    /// Hit the requested fidelity.
    ReachedTarget,
    /// Ran out of iterations; best pulse returned.
    MaxIterations,
    /// No accepted ascent step over the patience window; best returned.
    Stalled,
}

/// Knobs for [`optimize`]; the defaults match the regression suite.
#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Initial ascent step; the line search halves it on failure and grows
    /// it 1.2x on success.
    pub step0: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Fidelity at which the search stops.
    pub target_fidelity: f64,
    /// Consecutive step-less iterations tolerated before stalling out.
    pub patience: usize,
    /// Segment-derivative form driving the ascent direction.
    pub form: GradientForm,
    /// Initial-guess control amplitude bound, rad/ms.
    pub init_amplitude: f64,
    /// Seed for the initial guess.
    pub seed: u64,
    /// Optional hard cap on control amplitudes, rad/ms.
    pub amplitude_cap: Option<f64>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            step0: 0.1,
            max_iter: 2000,
            target_fidelity: 0.99,
            patience: 5,
            form: GradientForm::Exact,
            init_amplitude: 0.2 * std::f64::consts::PI,
            seed: 7,
            amplitude_cap: None,
        }
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    /// Best pulse found.
    pub pulse: ControlPulse,
    /// Its fidelity.
    pub fidelity: f64,
    /// Fidelity after the initial guess and after every accepted step;
    /// nondecreasing by construction.
    pub trace: Vec<f64>,
    /// Why the run stopped.
    pub status: OptimizeStatus,
}

/// Searches for a pulse implementing `u_target`, starting from a seeded
/// small random guess with `l` segments of `dt` ms.
pub fn optimize(
    u_target: &DMatrix<C64>,
    sys: &SpinSystem,
    l: usize,
    dt: f64,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    let init =
        ControlPulse::random_uniform(sys.n_qubits(), l, dt, opts.init_amplitude, opts.seed)?;
    optimize_from(u_target, sys, init, opts)
}

/// As [`optimize`], from an explicit initial pulse.
pub fn optimize_from(
    u_target: &DMatrix<C64>,
    sys: &SpinSystem,
    init: ControlPulse,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    if !(opts.target_fidelity > 0.0 && opts.target_fidelity <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "target fidelity must be in (0, 1], got {}",
            opts.target_fidelity
        )));
    }
    if !(opts.step0 > 0.0) || !opts.step0.is_finite() {
        return Err(Error::InvalidInput(format!("step must be positive, got {}", opts.step0)));
    }
    let mut cur = init;
    let mut cur_f = fidelity(u_target, &cur, sys)?;
    let mut trace = vec![cur_f];
    let mut eps = opts.step0;
    let mut idle = 0usize;
    let mut status = OptimizeStatus::MaxIterations;
    for _ in 0..opts.max_iter {
        if cur_f >= opts.target_fidelity {
            status = OptimizeStatus::ReachedTarget;
            break;
        }
        let g = gradient(&cur, u_target, sys, opts.form)?;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = cur.stepped(&g, eps, opts.amplitude_cap);
            let cand_f = fidelity(u_target, &cand, sys)?;
            if cand_f > cur_f {
                cur = cand;
                cur_f = cand_f;
                eps *= 1.2;
                accepted = true;
                break;
            }
            eps *= 0.5;
            if eps < 1e-14 {
                break;
            }
        }
        if accepted {
            trace.push(cur_f);
            idle = 0;
        } else {
            idle += 1;
            if idle >= opts.patience {
                status = OptimizeStatus::Stalled;
                break;
            }
        }
    }
    if cur_f >= opts.target_fidelity {
        status = OptimizeStatus::ReachedTarget;
    }
    Ok(OptimizeOutcome { pulse: cur, fidelity: cur_f, trace, status })
}

/// Controlled-NOT with the first qubit as control.
pub fn cnot() -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    m[(0, 0)] = C64::ONE;
    m[(1, 1)] = C64::ONE;
    m[(2, 3)] = C64::ONE;
    m[(3, 2)] = C64::ONE;
    m
}

/// Haar-random unitary of the given dimension: complex Gaussian matrix,
/// QR decomposition, phases fixed by the sign of the R diagonal.
pub fn haar_random_unitary(dim: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || {
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let g = DMatrix::from_fn(dim, dim, |_, _| C64::new(normal(), normal()));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::ONE };
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    q
}
