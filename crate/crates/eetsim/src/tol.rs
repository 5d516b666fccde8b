//! Numerical tolerances used by validators and tests, with the reasoning
//! behind each number. Centralizing them keeps "how exact is exact" from
//! being renegotiated ad hoc at every call site.

// ════════════════════════════════════════════════════════════════════
// Structural validity
// ════════════════════════════════════════════════════════════════════

/// Hermiticity of constructed Hamiltonians, relative to the largest entry.
/// Inputs are built from real tables and symmetrized couplings, so anything
/// beyond a few ulps of rounding means the caller handed us garbage.
pub const HAMILTONIAN_HERMITICITY: f64 = 1e-12;

/// Frobenius-norm mismatch allowed when a Pauli-term sum is reconstructed
/// back into a matrix. The decomposition is an exact linear transform; the
/// budget only covers rounding in the 2^n-term accumulation.
pub const PAULI_RECONSTRUCTION: f64 = 1e-10;

/// Round-trip error budget for unit rescaling (wavenumber -> angular NMR
/// frequency -> wavenumber). Pure multiplication by a constant, so this is
/// rounding only.
pub const UNIT_ROUNDTRIP: f64 = 1e-12;

// ════════════════════════════════════════════════════════════════════
// Hierarchy propagation
// ════════════════════════════════════════════════════════════════════

/// Trace-preservation drift allowed for the physical density matrix over a
/// full propagation. The equations preserve the trace exactly; fixed-step
/// RK4 preserves linear invariants exactly too, so this budget is pure
/// floating-point accumulation over ~1e5 steps.
pub const HEOM_TRACE_DRIFT: f64 = 1e-8;

/// Hermiticity drift of the physical density matrix over a propagation.
pub const HEOM_HERMITICITY_DRIFT: f64 = 1e-10;

/// Agreement with exact unitary evolution when the coupling is switched
/// off. This bounds the RK4 discretization error and pins the safety
/// factor baked into the solver's step bound.
pub const HEOM_UNITARY_LIMIT: f64 = 1e-8;

/// Populations under a diagonal Hamiltonian (pure dephasing) must stay
/// constant; the generator leaves diagonals untouched term by term.
pub const HEOM_DEPHASING_CONSTANCY: f64 = 1e-8;

/// Default depth-convergence tolerance for `converged_depth`: maximum
/// absolute population difference between consecutive truncation depths.
pub const HEOM_DEPTH_DEFAULT: f64 = 1e-4;

// ════════════════════════════════════════════════════════════════════
// Trajectories and ensembles
// ════════════════════════════════════════════════════════════════════

/// State-norm drift allowed over very long piecewise-unitary trajectories
/// (1e5 steps). Each step applies an eigensolver-exact unitary, so errors
/// accumulate as a random walk of ~1e-15 per step.
pub const TRAJECTORY_NORM_DRIFT: f64 = 1e-10;

/// Ensemble population means must sum to one at every time; averaging
/// trace-one trajectories is a convex combination.
pub const ENSEMBLE_TRACE: f64 = 1e-10;

/// Cross-mode reproducibility: sequential and parallel execution evaluate
/// identical floating-point trees, so they must agree to the bit. The
/// tolerance exists only to phrase the test as a bound.
pub const MODE_REPRODUCIBILITY: f64 = 0.0;

// ════════════════════════════════════════════════════════════════════
// Lineshape and spectra
// ════════════════════════════════════════════════════════════════════

/// Relative error allowed for the closed-form lineshape against direct
/// numerical quadrature of its defining integral. Limits the Matsubara
/// truncation (handled by an analytic tail) and the quadrature itself.
pub const LINESHAPE_VS_QUADRATURE: f64 = 1e-5;

/// Relative tail size at which the Matsubara series is considered
/// converged before the analytic tail correction is added.
pub const MATSUBARA_LAST_TERM: f64 = 1e-8;

/// Hard cap on explicitly summed Matsubara terms.
pub const MATSUBARA_MAX_TERMS: usize = 10_000;
