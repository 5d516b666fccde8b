//! Frenkel-exciton Hamiltonians, unit rescaling onto an NMR register, and
//! Pauli-string decompositions.
//!
//! A pigment aggregate with one excitation shared over `n` sites is a dense
//! `n x n` Hermitian matrix: site energies on the diagonal (wavenumbers,
//! `cm^-1`), electronic couplings off it. For `n = 2^q` the single-exciton
//! basis maps onto `q` qubits by binary order, `|site k> -> |k-1>` as a
//! bitstring, so a tetramer needs two qubits:
//!
//! ```text
//! |1> -> |00>,  |2> -> |01>,  |3> -> |10>,  |4> -> |11>
//! ```
//!
//! Everything dynamical downstream works in angular frequency units of
//! `rad/ms`. The wavenumber-to-register conversion is fixed by two
//! conventions shared across the toolkit: the speed of light is rounded to
//! `3e10 cm/s` and all energies are scaled down by `6e8`, which lands
//! `1 cm^-1` exactly on `pi/10 rad/ms` (that is, `2 pi x 0.05 kHz`).
//! Temperatures scale by the same `6e8` so that Boltzmann factors are
//! preserved.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::fmt;

use crate::mat;
use crate::{tol, Error, Result};

/// Exact wavenumber conversion: `1 cm^-1 = pi/10 rad/ms` on the register.
pub const WAVENUMBER_TO_RAD_PER_MS: f64 = PI / 10.0;

/// `k_B / hbar` in `rad/(ms K)`, from the rounded constants
/// `k_B = 1.381e-23 J/K` and `hbar = 1.055e-34 J s` used throughout.
/// (CODATA values differ in the fifth digit; the rounded pair is the
/// convention everything else here is calibrated against.)
pub const KB_OVER_HBAR_RAD_PER_MS_K: f64 = 1.381e-23 / 1.055e-34 * 1e-3;

/// `1 meV` as an angular frequency in `rad/ms`: `e * 1e-3 / hbar * 1e-3`,
/// with the exact SI elementary charge and the same rounded `hbar` as
/// [`KB_OVER_HBAR_RAD_PER_MS_K`].
pub const MEV_TO_RAD_PER_MS: f64 = 1.602_176_634e-22 / 1.055e-34 * 1e-3;

/// Which unit system a Hamiltonian's entries live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitTag {
    /// Entries are wavenumbers in `cm^-1` (electronic scale).
    EetWavenumber,
    /// Entries are angular frequencies in `rad/ms` (register scale).
    NmrAngular,
}

impl fmt::Display for UnitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitTag::EetWavenumber => write!(f, "EET_wavenumber"),
            UnitTag::NmrAngular => write!(f, "NMR_angular"),
        }
    }
}

impl std::str::FromStr for UnitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EET_wavenumber" => Ok(UnitTag::EetWavenumber),
            "NMR_angular" => Ok(UnitTag::NmrAngular),
            other => Err(Error::Parse(format!("unknown unit tag {other:?}"))),
        }
    }
}

/// A Hermitian system Hamiltonian together with its unit system.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    matrix: DMatrix<C64>,
    unit_tag: UnitTag,
}

impl HamiltonianMatrix {
    /// Wraps a matrix after checking shape and Hermiticity.
    ///
    /// Hermiticity is required to within [`tol::HAMILTONIAN_HERMITICITY`]
    /// relative to the largest entry; anything worse is a construction bug
    /// upstream, not noise.
    pub fn new(matrix: DMatrix<C64>, unit_tag: UnitTag) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "Hamiltonian must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = mat::max_abs(&matrix).max(1.0);
        let herm = mat::hermiticity_error(&matrix);
        if herm > tol::HAMILTONIAN_HERMITICITY * scale {
            return Err(Error::InvalidInput(format!(
                "Hamiltonian is not Hermitian: max |H - H^dag| = {herm:.3e} at scale {scale:.3e}"
            )));
        }
        Ok(Self { matrix, unit_tag })
    }

    /// Matrix dimension (number of sites).
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The unit system of the entries.
    pub fn unit_tag(&self) -> UnitTag {
        self.unit_tag
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

/// Conversion between the electronic energy scale and the register scale.
///
/// `scale_factor` is the defining ratio `nu_EET[Hz] / omega_NMR[rad/s] =
/// 3e8/pi`; combined with the factor `2 pi` between linear and angular
/// frequency this is the dimensionless energy downscale of `6e8`.
#[derive(Debug, Clone, Copy)]
pub struct UnitScaler {
    /// `nu_EET[Hz] / omega_NMR[rad/s]`, `3e8/pi` by convention.
    pub scale_factor: f64,
    /// `k_B/hbar` in `rad/(ms K)`.
    pub kb_over_hbar: f64,
}

impl Default for UnitScaler {
    fn default() -> Self {
        Self {
            scale_factor: 3.0e8 / PI,
            kb_over_hbar: KB_OVER_HBAR_RAD_PER_MS_K,
        }
    }
}

impl UnitScaler {
    /// Dimensionless energy (and temperature) downscale, `2 pi x
    /// scale_factor = 6e8` for the default scaler.
    pub fn energy_ratio(&self) -> f64 {
        2.0 * PI * self.scale_factor
    }

    /// Wavenumber (`cm^-1`) to register angular frequency (`rad/ms`).
    ///
    /// Equals [`WAVENUMBER_TO_RAD_PER_MS`] for the default scaler up to
    /// rounding in the last bit.
    pub fn wavenumber_to_rad_per_ms(&self, x_cm: f64) -> f64 {
        // c nu_wav / energy_ratio, in rad/ms: c = 3e10 cm/s rounded.
        x_cm * (2.0 * PI * 3.0e10) / self.energy_ratio() * 1e-3
    }

    /// Inverse of [`Self::wavenumber_to_rad_per_ms`].
    pub fn rad_per_ms_to_wavenumber(&self, w: f64) -> f64 {
        w / ((2.0 * PI * 3.0e10) / self.energy_ratio() * 1e-3)
    }

    /// Electronic-scale temperature (K) to register-scale temperature (K).
    ///
    /// Temperatures divide by the same `6e8` as energies so that every
    /// `hbar omega / k_B T` is invariant: `3e4 K` maps to `5e-5 K`.
    pub fn temperature_to_nmr(&self, t_eet_kelvin: f64) -> f64 {
        t_eet_kelvin / self.energy_ratio()
    }

    /// Inverse of [`Self::temperature_to_nmr`].
    pub fn temperature_to_eet(&self, t_nmr_kelvin: f64) -> f64 {
        t_nmr_kelvin * self.energy_ratio()
    }

    /// `T' = k_B T / hbar` in `rad/ms` for a temperature in kelvin.
    ///
    /// This is the only way temperature enters the dynamics; at the
    /// register scale `5e-5 K` gives `6545.02 rad/ms`, i.e. about
    /// `2 pi x 1.042 MHz`.
    pub fn thermal_frequency(&self, t_kelvin: f64) -> f64 {
        self.kb_over_hbar * t_kelvin
    }
}

/// Rescales an electronic-scale Hamiltonian onto the register scale.
///
/// Entries convert from `cm^-1` to `rad/ms` (factor `pi/10`); the unit tag
/// flips to [`UnitTag::NmrAngular`]. Rescaling an already-rescaled matrix
/// is rejected rather than silently squaring the factor.
pub fn scale_to_nmr(h: &HamiltonianMatrix, scaler: &UnitScaler) -> Result<HamiltonianMatrix> {
    if h.unit_tag() != UnitTag::EetWavenumber {
        return Err(Error::InvalidInput(
            "scale_to_nmr expects an EET_wavenumber Hamiltonian".into(),
        ));
    }
    let f = scaler.wavenumber_to_rad_per_ms(1.0);
    let m = h.matrix().map(|z| z * f);
    HamiltonianMatrix::new(m, UnitTag::NmrAngular)
}

/// Builds an `n`-site single-exciton Hamiltonian.
///
/// `site_energies[k]` is the energy of site `k+1` on the diagonal;
/// `couplings` lists `(i, j, J_ij)` with 1-based site labels, `i != j`,
/// each unordered pair at most once. Entries share the `unit` system.
pub fn build_exciton_hamiltonian(
    site_energies: &[f64],
    couplings: &[(usize, usize, f64)],
    unit: UnitTag,
) -> Result<HamiltonianMatrix> {
    let n = site_energies.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two sites, got {n}"
        )));
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (k, &e) in site_energies.iter().enumerate() {
        m[(k, k)] = C64::new(e, 0.0);
    }
    let mut seen = std::collections::HashSet::new();
    for &(i, j, jij) in couplings {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::InvalidInput(format!(
                "coupling ({i},{j}) out of range for {n} sites (labels are 1-based)"
            )));
        }
        if i == j {
            return Err(Error::InvalidInput(format!(
                "coupling ({i},{j}) connects a site to itself"
            )));
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(Error::InvalidInput(format!(
                "coupling ({},{}) listed more than once",
                key.0, key.1
            )));
        }
        m[(i - 1, j - 1)] = C64::new(jij, 0.0);
        m[(j - 1, i - 1)] = C64::new(jij, 0.0);
    }
    HamiltonianMatrix::new(m, unit)
}

/// A real-weighted sum of Pauli strings equal to a Hermitian matrix.
///
/// Strings use one character per qubit from `{I, X, Y, Z}`, leftmost
/// character acting on qubit 1 (the most significant bit of the site
/// index). The identity string carries the trace offset; it is retained so
/// reconstruction is exact, but it generates no dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTermSum {
    n_qubits: usize,
    terms: Vec<(f64, String)>,
}

impl PauliTermSum {
    /// Number of qubits.
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Terms as `(coefficient, string)` pairs, coefficient units matching
    /// the decomposed matrix.
    pub fn terms(&self) -> &[(f64, String)] {
        &self.terms
    }

    /// The coefficient of a given string, `0.0` if the term is absent.
    pub fn coefficient(&self, label: &str) -> f64 {
        self.terms
            .iter()
            .find(|(_, l)| l == label)
            .map(|(c, _)| *c)
            .unwrap_or(0.0)
    }

    /// Rebuilds the dense matrix `sum_k c_k P_k`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (c, label) in &self.terms {
            m += pauli_string_matrix(label).map(|z| z * C64::new(*c, 0.0));
        }
        m
    }
}

/// Dense matrix of a Pauli string like `"XZ"` (leftmost = qubit 1).
fn pauli_string_matrix(label: &str) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::identity(1, 1);
    for ch in label.chars() {
        let p = match ch {
            'I' => mat::pauli_i(),
            'X' => mat::pauli_x(),
            'Y' => mat::pauli_y(),
            'Z' => mat::pauli_z(),
            other => panic!("invalid Pauli character {other:?}"),
        };
        m = mat::kron(&m, &p);
    }
    m
}

/// Decomposes a Hermitian matrix over the Pauli-string basis.
///
/// Requires the dimension to be a power of two. Coefficients are
/// `Tr(P_k H) / 2^n`, which are real for Hermitian input; terms smaller
/// than `1e-12` of the largest entry are dropped, everything else
/// (identity included) is kept, so
/// [`PauliTermSum::reconstruct`] matches `H` to [`tol::PAULI_RECONSTRUCTION`]
/// in Frobenius norm.
pub fn pauli_decompose(h: &HamiltonianMatrix) -> Result<PauliTermSum> {
    let dim = h.dim();
    if !dim.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "Pauli decomposition needs a power-of-two dimension, got {dim}"
        )));
    }
    let n_qubits = dim.trailing_zeros() as usize;
    let scale = mat::max_abs(h.matrix()).max(1.0);
    let cutoff = 1e-12 * scale;
    let mut terms = Vec::new();
    let axes = ['I', 'X', 'Y', 'Z'];
    for k in 0..dim * dim {
        // Base-4 digits of k select the axis on each qubit.
        let mut label = String::with_capacity(n_qubits);
        let mut idx = k;
        for _ in 0..n_qubits {
            label.push(axes[idx % 4]);
            idx /= 4;
        }
        let label: String = label.chars().rev().collect();
        let p = pauli_string_matrix(&label);
        // Tr(P H) / 2^n; P is Hermitian so this is real for Hermitian H.
        let tr: C64 = (&p * h.matrix()).trace();
        let c = tr / C64::new(dim as f64, 0.0);
        if c.im.abs() > 1e-10 * scale {
            return Err(Error::NumericalFailure(format!(
                "Pauli coefficient for {label} has imaginary part {:.3e}",
                c.im
            )));
        }
        if c.re.abs() > cutoff {
            terms.push((c.re, label));
        }
    }
    Ok(PauliTermSum { n_qubits, terms })
}

/// Computational-basis state for a 1-based site label on two qubits:
/// `|1> = |00>`, `|2> = |01>`, `|3> = |10>`, `|4> = |11>`.
pub fn encode_site(site: usize) -> Result<DVector<C64>> {
    if !(1..=4).contains(&site) {
        return Err(Error::InvalidInput(format!(
            "site label must be 1..=4, got {site}"
        )));
    }
    let mut v = DVector::<C64>::zeros(4);
    v[site - 1] = C64::ONE;
    Ok(v)
}

/// Site populations of a two-qubit state from the three diagonal Pauli
/// expectation values `<Z1>`, `<Z2>`, `<Z1 Z2>`.
///
/// ```text
/// P_1 = (1 + z1 + z2 + zz)/4        P_3 = (1 - z1 + z2 - zz)/4
/// P_2 = (1 + z1 - z2 - zz)/4        P_4 = (1 - z1 - z2 + zz)/4
/// ```
///
/// The four populations always sum to one; each must land in `[0, 1]`
/// (tiny negative rounding up to `1e-9` is clamped), otherwise the
/// expectations did not come from a physical state and the call fails.
pub fn populations_from_expectations(z1: f64, z2: f64, zz: f64) -> Result<[f64; 4]> {
    for (name, v) in [("<Z1>", z1), ("<Z2>", z2), ("<Z1Z2>", zz)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!(
                "{name} = {v} outside [-1, 1]"
            )));
        }
    }
    let raw = [
        (1.0 + z1 + z2 + zz) / 4.0,
        (1.0 + z1 - z2 - zz) / 4.0,
        (1.0 - z1 + z2 - zz) / 4.0,
        (1.0 - z1 - z2 + zz) / 4.0,
    ];
    let mut out = [0.0; 4];
    for (k, &p) in raw.iter().enumerate() {
        if p < -1e-9 {
            return Err(Error::InvalidInput(format!(
                "expectations are inconsistent: population {} would be {p:.3e}",
                k + 1
            )));
        }
        out[k] = p.max(0.0);
    }
    Ok(out)
}
