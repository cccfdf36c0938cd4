//! Frozen calibration constants.
//!
//! Every inequality the library checks has the shape `measured <= C * envelope`
//! with a dimensionless constant `C` that the underlying analysis leaves
//! implicit.  The constants below were measured once on the reference
//! corpus (the deterministic configurations exercised by the acceptance
//! tests) and then frozen; tests compare against these values, never
//! against freshly measured ones.  Re-deriving them is a one-line change in
//! each consuming test, but any drift should be treated as a regression.

/// Per-level coefficient envelope for the two-bump decomposition:
/// `|gamma_i^k| <= C * C_i * 2^{k n (1/p - 1)} * |B(y_i, r)|^{1/p}`.
///
/// The continuum argument gives `2^n + 1` (= 3 in one dimension); discrete
/// ball measures add a few percent at coarse resolution.  Measured maximum
/// across the reference corpus: 3.02 (n = 1).
pub const TWO_BUMP_COEFF_ENVELOPE: f64 = 3.5;

/// Quasi-norm envelope for the two-bump decomposition:
/// `quasinorm^p <= C * N^{n(1-p)} * log2(N) * (C_1|B_1| + C_2|B_2|)`.
///
/// Measured ratios on the canonical corpus fall from about 1.78 at N = 8
/// down to about 1.05 at N = 64, uniformly over p in {0.6, 0.75, 0.9}
/// (the log factor overshoots the true growth as N grows).
pub const TWO_BUMP_QUASINORM_ENVELOPE: f64 = 2.5;

/// Triple-norm budget for one approximation step:
/// `||g||_q ||h_1||_{r_1} ||h_2||_{r_2} <= C * N^{2n}`.
///
/// The product is dimensionless because `1/q + 1/r_1 + 1/r_2 = 1/p`
/// cancels the ball volumes; what remains is the reciprocal of the
/// normalized denominator.  Measured maximum over the reference
/// three-round run (N = 32, p = 0.75, n = 1): 0.708.
pub const TRIPLE_NORM_BUDGET: f64 = 2.0;

/// Sup-norm envelope for the single-atom approximation error:
/// `sup |a - Pi_l(g, h_1, h_2)| <= C * N^{-eps} * r^{-n/p}`.
///
/// The built-in kernel is smooth at separation N r, so the measured decay
/// is nearer N^{-1}; the envelope uses the kernel's declared Hoelder
/// exponent and the constant absorbs the gap at desk-scale N.  Measured
/// maximum of `sup_error * N^eps` over the reference run: 0.147.
pub const APPROX_ERROR_ENVELOPE: f64 = 2.0;

/// Two-sided constant for factorization_norm vs the atomic quasi-norm on
/// the reference single-atom run (N = 32, p = 0.75, n = 1, three rounds).
///
/// The equivalence constant inherits the N^{2n} triple-norm budget, so at
/// desk scale it is of order N^2: the reference run measures 2436.8.
/// A scale-free constant (say, 100) is unattainable at this separation;
/// the acceptance suite records that failure rather than masking it.
pub const NORM_EQUIV_CEQ: f64 = 2500.0;

/// Two-sided constant for the commutator-estimate / Lipschitz-seminorm
/// ratio across the reference symbol family.  The measured ratios sit
/// between 0.218 and 0.225 for all three reference shapes (absolute power,
/// shifted power, saturated step) at p = 0.75 in one dimension.
pub const LIP_COMP_CEQ: f64 = 10.0;

/// Spot-check constant for the boundedness of the multiplication operator:
/// atomic quasi-norm of a two-bump decomposition of `Pi_l(g, h_1, h_2)`
/// is at most `C * ||g||_q ||h_1||_{r_1} ||h_2||_{r_2}`.
pub const PI_BOUNDEDNESS: f64 = 4.0;
