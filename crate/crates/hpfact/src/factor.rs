//! Weak factorization of atomic decompositions through a bilinear
//! singular-integral operator.
//!
//! The building block is the elementary factor
//! `pi_2(g, h1, h2) = h2 * T2*(h1, g) - g * T(h1, h2)` (and its slot-1
//! mirror), which has mean zero by the discrete adjoint identities.  A
//! single atom is approximated by one elementary factor built from two
//! displaced indicator balls; the approximation error is a mean-zero
//! two-bump function, which the telescoping decomposition converts back
//! into atoms for the next round.  Iterating yields `f = sum lambda pi_l`
//! plus a tracked remainder whose coefficient mass is recorded per round.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{atomic_quasinorm_p, two_bump_decompose, Atom, AtomicDecomposition, TwoBumpFunction};
use crate::calibration::TRIPLE_NORM_BUDGET;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Ball, GridFunction, GridSpec, MAX_DIM};
use crate::kernel::KernelSpec;
use crate::operator::{apply_partial_adjoint, apply_t};

/// Integrability exponents tied together by the Hoelder-type identity
/// `1/q + 1/r1 + 1/r2 = 1/p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSystem {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub r1: f64,
    pub r2: f64,
}

impl ExponentSystem {
    pub fn new(dim: usize, p: f64, q: f64, r1: f64, r2: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidExponents(format!("dim must be 1 or 2, got {dim}")));
        }
        let lower = dim as f64 / (dim as f64 + 1.0);
        if !(p > lower && p < 1.0) {
            return Err(Error::InvalidExponents(format!("p = {p} outside ({lower}, 1)")));
        }
        for (name, v) in [("q", q), ("r1", r1), ("r2", r2)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::InvalidExponents(format!("{name} = {v} must exceed 1")));
            }
        }
        let lhs = 1.0 / q + 1.0 / r1 + 1.0 / r2;
        if (lhs - 1.0 / p).abs() > 1e-12 {
            return Err(Error::InvalidExponents(format!(
                "1/q + 1/r1 + 1/r2 = {lhs} but 1/p = {}",
                1.0 / p
            )));
        }
        Ok(ExponentSystem { dim, p, q, r1, r2 })
    }

    /// The symmetric choice `q = r1 = r2 = 3p`.
    pub fn symmetric(dim: usize, p: f64) -> Result<Self> {
        ExponentSystem::new(dim, p, 3.0 * p, 3.0 * p, 3.0 * p)
    }

    /// Conjugate exponent of `q`.
    pub fn q_dual(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// The Lipschitz order `n (1/p - 1)` dual to `H^p`.
    pub fn lip_alpha(&self) -> f64 {
        self.dim as f64 * (1.0 / self.p - 1.0)
    }
}

/// Smallest power-of-two separation `N` with
/// `log2(N) / N^{eps_s p - n(1-p)} < eps^p` for every power of two from `N`
/// onward.
///
/// The quotient is unimodal in `N` (it rises to a single hump before its
/// power decay takes over), so the scan runs past the hump rather than
/// accepting a spuriously small `N` on the rising side.  The exponent must
/// be positive (equivalently `p > n / (n + eps_s)`), otherwise no
/// separation achieves the target and the parameters are rejected.
pub fn select_separation(eps: f64, p: f64, dim: usize, smoothness_eps: f64) -> Result<u64> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {dim}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("target eps must be positive, got {eps}")));
    }
    let expo = smoothness_eps * p - dim as f64 * (1.0 - p);
    // A tiny positive value is a rounding artifact of a vanishing exponent.
    if expo <= 1e-12 {
        return Err(Error::InvalidExponents(format!(
            "decay exponent eps_s p - n(1-p) = {expo} is not positive"
        )));
    }
    let target = eps.powf(p);
    let value = |n: u64| (n as f64).log2() / (n as f64).powf(expo);
    // Find the hump: the last power of two on the rising side.
    let mut peak: u64 = 2;
    while value(peak * 2) > value(peak) {
        peak = peak.checked_mul(2).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no separation up to 2^63 achieves target eps = {eps}"
            ))
        })?;
    }
    if value(peak) < target {
        // Every separation works; minimality gives the smallest admissible.
        return Ok(2);
    }
    let mut n = peak;
    loop {
        if value(n) < target {
            return Ok(n);
        }
        n = n.checked_mul(2).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no separation up to 2^63 achieves target eps = {eps}"
            ))
        })?;
    }
}

/// The elementary factor `pi_l(g, h1, h2)`.
///
/// For `l = 2` this is `h2 * T2*(h1, g) - g * T(h1, h2)`; for `l = 1` it is
/// `h1 * T1*(g, h2) - g * T(h1, h2)`.  The result is supported in
/// `supp h_l U supp g` and integrates to zero up to summation roundoff,
/// because both terms reduce to the same triple sum under the discrete
/// pairing identities.
pub fn pi(
    k: &KernelSpec,
    l: usize,
    g: &GridFunction,
    h1: &GridFunction,
    h2: &GridFunction,
) -> Result<GridFunction> {
    let h_l = match l {
        1 => h1,
        2 => h2,
        _ => return Err(Error::InvalidParameter(format!("slot must be 1 or 2, got {l}"))),
    };
    let spec = g.spec();
    if spec != h1.spec() || spec != h2.spec() {
        return Err(Error::GridMismatch { what: "elementary factor inputs" });
    }
    let first = match h_l.support_box() {
        None => GridFunction::zero(spec),
        Some(bx) => {
            let adj = match l {
                1 => apply_partial_adjoint(k, 1, g, h2, &bx)?,
                _ => apply_partial_adjoint(k, 2, h1, g, &bx)?,
            };
            h_l.multiply(&adj.func)?
        }
    };
    let second = match g.support_box() {
        None => GridFunction::zero(spec),
        Some(bx) => {
            let t = apply_t(k, h1, h2, &bx)?;
            g.multiply(&t.func)?
        }
    };
    first.lin_comb(1.0, &second, -1.0)
}

/// One emitted factor: the coefficient, the three functions, their recorded
/// norms, and the measurements certifying the construction.
#[derive(Clone, Debug)]
pub struct FactorTriple {
    pub lambda: f64,
    /// Which slot's partial adjoint the factor uses (1 or 2).
    pub slot: usize,
    pub g: GridFunction,
    pub h1: GridFunction,
    pub h2: GridFunction,
    /// `L^q`, `L^{r1}`, `L^{r2}` norms of `g`, `h1`, `h2`.
    pub norm_g: f64,
    pub norm_h1: f64,
    pub norm_h2: f64,
    /// Ball of the atom this factor approximates.
    pub atom_ball: Ball,
    /// Center of the displaced ball carrying `g` (the second error bump).
    pub g_center: [f64; MAX_DIM],
    /// The partial-adjoint denominator at the atom center.
    pub denominator: f64,
    /// Sup norm of the approximation error `a - pi_l(g, h1, h2)`.
    pub sup_error: f64,
    /// `L^1` norm of the approximation error.
    pub error_l1: f64,
}

/// A single-atom approximation: the factor plus its two-bump error.
#[derive(Clone, Debug)]
pub struct AtomApproximation {
    pub triple: FactorTriple,
    pub error: TwoBumpFunction,
}

/// Approximates one atom by a single elementary factor.
///
/// Geometry: with `rho` the atom's ball radius, the ball carrying `g` is
/// displaced from the atom center by `N rho / sqrt(n)` along every
/// coordinate, and the ball carrying the other indicator by twice that, so
/// `|x0 - y_l| = N rho` and `|x0 - y_l~| = 2 N rho`.  The slot function is
/// `h_l = a / D` with `D` the partial adjoint of the two indicators
/// evaluated at the atom's center by quadrature.
///
/// The returned error `a - pi_l(g, h1, h2)` is wrapped as a two-bump
/// function supported in `B(x0, rho) U B(y_l, rho)`; its mean vanishes up
/// to the atom's own mean tolerance.  Inputs whose integral is not small
/// relative to the error mass (exactly mean-zero atoms always are) fail the
/// two-bump wrap and propagate that error.
pub fn approximate_atom(
    k: &KernelSpec,
    atom: &Atom,
    exps: &ExponentSystem,
    l: usize,
    n_sep: f64,
) -> Result<AtomApproximation> {
    if l != 1 && l != 2 {
        return Err(Error::InvalidParameter(format!("slot must be 1 or 2, got {l}")));
    }
    if !(n_sep >= 4.0) || !n_sep.is_finite() {
        return Err(Error::InvalidParameter(format!("separation must be >= 4, got {n_sep}")));
    }
    let spec = atom.func().spec();
    let dim = spec.dim();
    if k.dim() != dim || exps.dim != dim {
        return Err(Error::GridMismatch { what: "kernel, exponents, and atom grid" });
    }
    if (atom.p() - exps.p).abs() > 1e-12 {
        return Err(Error::InvalidExponents(format!(
            "atom exponent {} does not match the system's p = {}",
            atom.p(),
            exps.p
        )));
    }
    let ball = *atom.ball();
    let rho = ball.radius;
    let step = n_sep * rho / (dim as f64).sqrt();
    let mut near_center = ball.center;
    let mut far_center = ball.center;
    for c in 0..dim {
        near_center[c] += step;
        far_center[c] += 2.0 * step;
    }
    let near_ball = Ball::new(near_center, rho);
    let far_ball = Ball::new(far_center, rho);
    for b in [&near_ball, &far_ball] {
        if !spec.contains_ball(b) {
            return Err(Error::GridTooSmall(format!(
                "displaced ball at {:?} with radius {rho} does not fit the grid box",
                &b.center[..dim]
            )));
        }
    }
    let g = GridFunction::indicator(spec, &near_ball)?;
    let far_ind = GridFunction::indicator(spec, &far_ball)?;

    let atom_box = atom
        .func()
        .support_box()
        .ok_or_else(|| Error::InvalidAtom("atom function has empty support".into()))?;
    // D = T_l^*(indicators)(x0): slot 2 pairs (h1, g), slot 1 pairs (g, h2).
    let w = match l {
        1 => apply_partial_adjoint(k, 1, &g, &far_ind, &atom_box)?,
        _ => apply_partial_adjoint(k, 2, &far_ind, &g, &atom_box)?,
    };
    let mut center_idx = [0usize; MAX_DIM];
    for c in 0..dim {
        let i = ((ball.center[c] + spec.half_width()) / spec.spacing()).round();
        center_idx[c] = i.clamp(0.0, (spec.points_per_axis() - 1) as f64) as usize;
    }
    let denominator = w.func.sample(center_idx);
    let threshold = 1e-3 * k.homogeneity_const() * (n_sep * rho).powi(-2 * dim as i32);
    if denominator.abs() < threshold {
        return Err(Error::SmallDenominator { value: denominator, threshold });
    }
    let h_slot = atom.func().scale(1.0 / denominator);
    let (h1, h2) = match l {
        1 => (h_slot.clone(), far_ind.clone()),
        _ => (far_ind.clone(), h_slot.clone()),
    };

    // Error piece on the atom ball: a - h_l * W.
    let near_piece = atom.func().lin_comb(1.0, &h_slot.multiply(&w.func)?, -1.0)?;
    // Error piece on the displaced ball: + g * T(h1, h2).
    let g_box = g.support_box().expect("indicator has support");
    let t_out = apply_t(k, &h1, &h2, &g_box)?;
    let far_piece = g.multiply(&t_out.func)?;
    let error_func = near_piece.lin_comb(1.0, &far_piece, 1.0)?;

    let c_near = near_piece.sup_norm();
    let c_far = far_piece.sup_norm();
    let error = TwoBumpFunction::new(error_func, ball, near_ball, c_near, c_far)?;
    let sup_error = c_near.max(c_far);
    let error_l1 = lp_norm(error.func(), 1.0);

    let triple = FactorTriple {
        lambda: 1.0,
        slot: l,
        norm_g: lp_norm(&g, exps.q),
        norm_h1: lp_norm(&h1, exps.r1),
        norm_h2: lp_norm(&h2, exps.r2),
        g,
        h1,
        h2,
        atom_ball: ball,
        g_center: near_center,
        denominator,
        sup_error,
        error_l1,
    };
    Ok(AtomApproximation { triple, error })
}

/// Result of the factorization iteration.
#[derive(Clone, Debug)]
pub struct FactorizationResult {
    /// Emitted factors, one list per round, ordered by input atom index.
    pub rounds: Vec<Vec<FactorTriple>>,
    /// Coefficient mass `sum |lambda|^p` of the remainder after each round.
    pub error_norms: Vec<f64>,
    pub exponents: ExponentSystem,
    pub n_used: f64,
    /// Smoothness exponent of the kernel used.
    pub eps_used: f64,
    /// Set when the remainder mass grew two rounds in a row.
    pub non_contraction: bool,
    /// `sum |lambda|^p` of the input decomposition.
    pub input_mass: f64,
    /// Whether every emitted triple satisfied the norm-product budget
    /// `|g| |h1| |h2| <= budget * N^{2n}`.
    pub triple_budget_ok: bool,
    /// The remaining atoms after the last round, on their own grids.
    pub final_error: AtomicDecomposition,
}

/// Chooses a per-atom lattice for approximation: the atom is rebased (and
/// block-mean coarsened when finer than `samples_per_radius` points per
/// radius allow) onto a grid large enough for the displaced balls and the
/// telescoping balls of the resulting error.  Returns the renormalizing
/// coefficient factor and the new atom, or `None` when the atom coarsens
/// to the zero function.
fn rebase_atom(
    atom: &Atom,
    n_sep: f64,
    samples_per_radius: usize,
) -> Result<Option<(f64, Atom)>> {
    let spec = atom.func().spec();
    let dim = spec.dim();
    let h = spec.spacing();
    let ball = *atom.ball();
    let rho = ball.radius;
    let s = samples_per_radius as f64;
    // Largest dyadic coarsening that keeps more than `samples_per_radius`
    // points per radius.
    let ratio = rho / (h * s);
    let t = if ratio > 1.0 {
        ((ratio.log2() - 1e-9).ceil() as i32 - 1).max(0)
    } else {
        0
    };
    let m = 1usize << t;
    let h_t = h * m as f64;
    // Block means spread support leftward by up to (m-1) h per axis.
    let rho2 = rho + (dim as f64).sqrt() * (m as f64 - 1.0) * h;
    let mut reach = 0.0f64;
    for c in 0..dim {
        reach = reach.max(ball.center[c].abs());
    }
    let extent = reach + 4.5 * n_sep * rho2 + 2.0 * rho2;
    let target = GridSpec::fitted(dim, extent, h_t)?;
    let coarse = atom.func().resample_block_mean(target)?;
    let sup = coarse.sup_norm();
    if sup == 0.0 {
        return Ok(None);
    }
    let ball2 = Ball::new(ball.center, rho2);
    let factor = sup * ball2.volume(dim).powf(1.0 / atom.p());
    let rescaled = coarse.scale(1.0 / factor);
    let atom2 = Atom::new(rescaled, ball2, atom.p())?;
    Ok(Some((factor, atom2)))
}

/// The factorization iteration: approximate every atom of the current
/// decomposition, emit the factors, decompose every error into next-round
/// atoms, and record the remainder's coefficient mass.
///
/// Each atom is processed on its own fitted lattice (see [`rebase_atom`]),
/// so the input decomposition's grid only needs to hold the atoms
/// themselves.  Stops after `max_rounds` rounds or when the remainder mass
/// drops to `stop_tol` or below.  A growing remainder (two consecutive
/// increases, counting the input mass as the baseline) sets the
/// `non_contraction` flag rather than aborting.
#[allow(clippy::too_many_arguments)]
pub fn uchiyama_factorize(
    k: &KernelSpec,
    l: usize,
    f: &AtomicDecomposition,
    exps: &ExponentSystem,
    n_sep: f64,
    max_rounds: usize,
    stop_tol: f64,
    samples_per_radius: usize,
) -> Result<FactorizationResult> {
    if l != 1 && l != 2 {
        return Err(Error::InvalidParameter(format!("slot must be 1 or 2, got {l}")));
    }
    if samples_per_radius < 4 {
        return Err(Error::InvalidParameter(format!(
            "samples_per_radius must be at least 4, got {samples_per_radius}"
        )));
    }
    if !(stop_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("stop_tol must be >= 0, got {stop_tol}")));
    }
    if (f.p() - exps.p).abs() > 1e-12 {
        return Err(Error::InvalidExponents(format!(
            "decomposition exponent {} does not match the system's p = {}",
            f.p(),
            exps.p
        )));
    }
    let p = exps.p;
    let input_mass = atomic_quasinorm_p(f);
    let mut current: Vec<(f64, Atom)> = f
        .terms()
        .iter()
        .filter(|(lam, _)| *lam != 0.0)
        .cloned()
        .collect();
    let mut rounds: Vec<Vec<FactorTriple>> = Vec::new();
    let mut error_norms: Vec<f64> = Vec::new();
    let mut triple_budget_ok = true;
    let budget = TRIPLE_NORM_BUDGET * n_sep.powi(2 * exps.dim as i32);

    for _ in 0..max_rounds {
        if current.is_empty() {
            break;
        }
        let processed: Result<Vec<Option<(FactorTriple, Vec<(f64, Atom)>)>>> = current
            .par_iter()
            .map(|(lam, atom)| {
                let Some((factor, rebased)) = rebase_atom(atom, n_sep, samples_per_radius)?
                else {
                    return Ok(None);
                };
                let approx = approximate_atom(k, &rebased, exps, l, n_sep)?;
                let dec = two_bump_decompose(&approx.error, p)?;
                let lambda = lam * factor;
                let mut triple = approx.triple;
                triple.lambda = lambda;
                let children = dec
                    .decomposition
                    .terms()
                    .iter()
                    .filter(|(gamma, _)| *gamma != 0.0)
                    .map(|(gamma, a)| (lambda * gamma, a.clone()))
                    .collect();
                Ok(Some((triple, children)))
            })
            .collect();
        let mut round_triples = Vec::new();
        let mut next: Vec<(f64, Atom)> = Vec::new();
        for item in processed?.into_iter().flatten() {
            let (triple, children) = item;
            if triple.norm_g * triple.norm_h1 * triple.norm_h2 > budget {
                triple_budget_ok = false;
            }
            round_triples.push(triple);
            next.extend(children);
        }
        let mut mass = 0.0f64;
        for (lam, _) in &next {
            mass += lam.abs().powf(p);
        }
        rounds.push(round_triples);
        error_norms.push(mass);
        current = next;
        if mass <= stop_tol {
            break;
        }
    }

    let mut non_contraction = false;
    let mut track = Vec::with_capacity(error_norms.len() + 1);
    track.push(input_mass);
    track.extend_from_slice(&error_norms);
    for w in track.windows(3) {
        if w[1] > w[0] && w[2] > w[1] {
            non_contraction = true;
        }
    }

    Ok(FactorizationResult {
        rounds,
        error_norms,
        exponents: *exps,
        n_used: n_sep,
        eps_used: k.smoothness_eps(),
        non_contraction,
        input_mass,
        triple_budget_ok,
        final_error: AtomicDecomposition::new(current, p)?,
    })
}

/// The p-homogeneous factorization norm
/// `(sum |lambda|^p (|g|_q |h1|_{r1} |h2|_{r2})^p)^{1/p}`.
pub fn factorization_norm(res: &FactorizationResult) -> f64 {
    let p = res.exponents.p;
    let mut sum = 0.0f64;
    for round in &res.rounds {
        for t in round {
            sum += t.lambda.abs().powf(p) * (t.norm_g * t.norm_h1 * t.norm_h2).powf(p);
        }
    }
    sum.powf(1.0 / p)
}

/// The alternative mixed-exponent reading
/// `(sum |lambda|^p |g|_q |h1|_{r1} |h2|_{r2})^{1/p}`, recorded for
/// comparison; it is not homogeneous under scaling of the factors.
pub fn factorization_norm_mixed(res: &FactorizationResult) -> f64 {
    let p = res.exponents.p;
    let mut sum = 0.0f64;
    for round in &res.rounds {
        for t in round {
            sum += t.lambda.abs().powf(p) * t.norm_g * t.norm_h1 * t.norm_h2;
        }
    }
    sum.powf(1.0 / p)
}

/// Triangle-inequality envelope for the unfactored remainder in `L^1`:
/// the last round's errors integrated against their recorded sup bounds.
pub fn residual_l1_envelope(res: &FactorizationResult) -> f64 {
    let dim = res.exponents.dim;
    match res.rounds.last() {
        None => 0.0,
        Some(round) => round
            .iter()
            .map(|t| t.lambda.abs() * t.sup_error * 2.0 * t.atom_ball.volume(dim))
            .sum(),
    }
}

/// The same remainder measured by the recorded per-error `L^1` norms;
/// never exceeds [`residual_l1_envelope`].
pub fn residual_l1_recorded(res: &FactorizationResult) -> f64 {
    match res.rounds.last() {
        None => 0.0,
        Some(round) => round.iter().map(|t| t.lambda.abs() * t.error_l1).sum(),
    }
}

/// Serializable summary of a factorization run: per-round tables of the
/// coefficients, ball metadata, norm triples, and error measurements.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationContainer {
    pub format_version: u32,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub r1: f64,
    pub r2: f64,
    pub n_used: f64,
    pub eps_used: f64,
    pub non_contraction: bool,
    pub triple_budget_ok: bool,
    pub input_mass: f64,
    pub error_norms: Vec<f64>,
    pub rounds: Vec<Vec<TripleRecord>>,
}

/// One factor's metadata (the grid functions themselves stay in memory).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripleRecord {
    pub lambda: f64,
    pub slot: usize,
    pub atom_center: Vec<f64>,
    pub atom_radius: f64,
    pub g_center: Vec<f64>,
    pub denominator: f64,
    pub sup_error: f64,
    pub error_l1: f64,
    pub norm_g: f64,
    pub norm_h1: f64,
    pub norm_h2: f64,
}

impl FactorizationResult {
    pub fn to_container(&self) -> FactorizationContainer {
        let dim = self.exponents.dim;
        FactorizationContainer {
            format_version: 1,
            dim,
            p: self.exponents.p,
            q: self.exponents.q,
            r1: self.exponents.r1,
            r2: self.exponents.r2,
            n_used: self.n_used,
            eps_used: self.eps_used,
            non_contraction: self.non_contraction,
            triple_budget_ok: self.triple_budget_ok,
            input_mass: self.input_mass,
            error_norms: self.error_norms.clone(),
            rounds: self
                .rounds
                .iter()
                .map(|round| {
                    round
                        .iter()
                        .map(|t| TripleRecord {
                            lambda: t.lambda,
                            slot: t.slot,
                            atom_center: t.atom_ball.center[..dim].to_vec(),
                            atom_radius: t.atom_ball.radius,
                            g_center: t.g_center[..dim].to_vec(),
                            denominator: t.denominator,
                            sup_error: t.sup_error,
                            error_l1: t.error_l1,
                            norm_g: t.norm_g,
                            norm_h1: t.norm_h1,
                            norm_h2: t.norm_h2,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}
