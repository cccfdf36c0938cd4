//! `H^p` atoms, atomic decompositions, and the telescoping decomposition of
//! mean-zero "two-bump" functions into atoms.
//!
//! An atom here is a grid function supported in a ball `B` with
//! `sup |a| <= |B|^{-1/p}` (continuum ball volume) and discrete integral
//! zero.  A two-bump function is dominated by `C_1` and `C_2` on two
//! disjoint equal-radius balls and has integral zero; the decomposition
//! telescopes its bump averages through dyadically growing balls, closing
//! both chains on a shared ball around the midpoint.  Because every average
//! divides by the *discrete* ball measure, each emitted piece has integral
//! zero to roundoff and their sum reproduces the input exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    discrete_ball_measure, dist, integrate, Ball, GridFunction, GridFunctionContainer, GridSpec,
    KahanSum, Point,
};

/// Internal slack for constructor-level invariant checks.
const CONSTRUCT_TOL: f64 = 1e-9;

fn p_range_ok(p: f64, dim: usize) -> bool {
    let lower = dim as f64 / (dim as f64 + 1.0);
    p > lower && p < 1.0
}

/// A certified `H^p` atom: supported in `ball`, `sup |a| <= |ball|^{-1/p}`,
/// and mean zero.
#[derive(Clone, Debug)]
pub struct Atom {
    func: GridFunction,
    ball: Ball,
    p: f64,
}

impl Atom {
    pub fn new(func: GridFunction, ball: Ball, p: f64) -> Result<Self> {
        let report = validate_atom(&func, &ball, p, CONSTRUCT_TOL);
        if !report.passed {
            return Err(Error::InvalidAtom(format!(
                "candidate fails atom checks: support_ok={}, size_ratio={}, mean_ratio={}, p_ok={}",
                report.support_ok, report.size_ratio, report.mean_ratio, report.p_ok
            )));
        }
        Ok(Atom { func, ball, p })
    }

    pub fn func(&self) -> &GridFunction {
        &self.func
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Outcome of the three atom checks, with measured slack.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AtomReport {
    /// Every nonzero sample lies strictly inside the ball.
    pub support_ok: bool,
    /// `sup |a| * |ball|^{1/p}`; at most `1 + tol` for a valid atom.
    pub size_ratio: f64,
    /// `|integral of a| / (sup |a| * |ball|)`; at most `tol` for a valid
    /// atom.  Zero for the zero function.
    pub mean_ratio: f64,
    /// `p` lies in `(n/(n+1), 1)`.
    pub p_ok: bool,
    pub tol: f64,
    pub passed: bool,
}

/// Checks the atom invariants and reports measured slack instead of
/// erroring, so callers can diagnose near-misses.
pub fn validate_atom(func: &GridFunction, ball: &Ball, p: f64, tol: f64) -> AtomReport {
    let dim = func.spec().dim();
    let p_ok = p_range_ok(p, dim);
    let support_ok = func.supported_in_ball(ball);
    let sup = func.sup_norm();
    let vol = ball.volume(dim);
    let size_ratio = if p_ok { sup * vol.powf(1.0 / p) } else { f64::INFINITY };
    let mean_ratio = if sup == 0.0 { 0.0 } else { integrate(func).abs() / (sup * vol) };
    let passed = p_ok && support_ok && size_ratio <= 1.0 + tol && mean_ratio <= tol;
    AtomReport { support_ok, size_ratio, mean_ratio, p_ok, tol, passed }
}

/// A finite atomic decomposition `sum lambda_j a_j` with its exponent.
#[derive(Clone, Debug)]
pub struct AtomicDecomposition {
    terms: Vec<(f64, Atom)>,
    p: f64,
}

impl AtomicDecomposition {
    /// All atoms must share the exponent `p`.
    pub fn new(terms: Vec<(f64, Atom)>, p: f64) -> Result<Self> {
        for (lambda, atom) in &terms {
            if !lambda.is_finite() {
                return Err(Error::InvalidAtom(format!("non-finite coefficient {lambda}")));
            }
            if (atom.p() - p).abs() > 1e-12 {
                return Err(Error::InvalidAtom(format!(
                    "atom exponent {} does not match decomposition exponent {p}",
                    atom.p()
                )));
            }
        }
        Ok(AtomicDecomposition { terms, p })
    }

    pub fn terms(&self) -> &[(f64, Atom)] {
        &self.terms
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Concatenation; quasi-norms add in the `p`-th power exactly.
    pub fn concat(mut self, other: AtomicDecomposition) -> Result<AtomicDecomposition> {
        if (self.p - other.p).abs() > 1e-12 {
            return Err(Error::InvalidAtom("cannot concatenate decompositions with different exponents".into()));
        }
        self.terms.extend(other.terms);
        Ok(self)
    }

    /// Pointwise sum `sum lambda_j a_j` on the shared grid.
    pub fn reconstruct(&self, spec: GridSpec) -> Result<GridFunction> {
        let mut acc = GridFunction::zero(spec);
        for (lambda, atom) in &self.terms {
            acc = acc.lin_comb(1.0, atom.func(), *lambda)?;
        }
        Ok(acc)
    }
}

/// The atomic quasi-norm `(sum |lambda_j|^p)^{1/p}` — the working upper
/// estimate of the `H^p` quasi-norm throughout.
pub fn atomic_quasinorm(d: &AtomicDecomposition) -> f64 {
    atomic_quasinorm_p(d).powf(1.0 / d.p)
}

/// The `p`-th power `sum |lambda_j|^p`, which is the additive quantity.
pub fn atomic_quasinorm_p(d: &AtomicDecomposition) -> f64 {
    let mut acc = KahanSum::new();
    for (lambda, _) in &d.terms {
        acc.add(lambda.abs().powf(d.p));
    }
    acc.value()
}

/// A mean-zero function dominated by two disjoint equal-radius bumps:
/// `|f| <= C_1 chi_{B_1} + C_2 chi_{B_2}` pointwise, `integral f = 0`.
#[derive(Clone, Debug)]
pub struct TwoBumpFunction {
    func: GridFunction,
    b1: Ball,
    b2: Ball,
    c1: f64,
    c2: f64,
    /// Separation ratio `|y_1 - y_2| / r`.
    n_ratio: f64,
}

impl TwoBumpFunction {
    pub fn new(func: GridFunction, b1: Ball, b2: Ball, c1: f64, c2: f64) -> Result<Self> {
        let spec = func.spec();
        let dim = spec.dim();
        b1.validate(&spec)?;
        b2.validate(&spec)?;
        if !(c1 >= 0.0 && c2 >= 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(Error::InvalidTwoBump(format!("bump heights must be finite and >= 0, got {c1}, {c2}")));
        }
        let r = b1.radius;
        if (b2.radius - r).abs() > 1e-12 * r {
            return Err(Error::InvalidTwoBump(format!(
                "bump radii differ: {} vs {}",
                b1.radius, b2.radius
            )));
        }
        let sep = dist(b1.center, b2.center, dim);
        if sep < 2.0 * r * (1.0 - 1e-12) {
            return Err(Error::InvalidTwoBump(format!(
                "balls overlap: separation {sep} < 2r = {}",
                2.0 * r
            )));
        }
        // Pointwise domination by the two bumps.
        if let Some(bx) = func.support_box() {
            for idx in bx.iter() {
                let v = func.sample(idx).abs();
                if v == 0.0 {
                    continue;
                }
                let x = spec.point(idx);
                let bound = if b1.contains(x, dim) {
                    c1
                } else if b2.contains(x, dim) {
                    c2
                } else {
                    0.0
                };
                if v > bound * (1.0 + CONSTRUCT_TOL) {
                    return Err(Error::InvalidTwoBump(format!(
                        "sample {v} at {:?} exceeds its bump bound {bound}",
                        &x[..dim]
                    )));
                }
            }
        }
        let mass_scale = c1 * b1.volume(dim) + c2 * b2.volume(dim);
        let mean = integrate(&func).abs();
        if mean > CONSTRUCT_TOL * mass_scale {
            return Err(Error::InvalidTwoBump(format!(
                "integral {mean} exceeds the mean-zero tolerance {}",
                CONSTRUCT_TOL * mass_scale
            )));
        }
        Ok(TwoBumpFunction { func, b1, b2, c1, c2, n_ratio: sep / r })
    }

    pub fn func(&self) -> &GridFunction {
        &self.func
    }

    pub fn balls(&self) -> (Ball, Ball) {
        (self.b1, self.b2)
    }

    pub fn heights(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    /// Separation in units of the bump radius.
    pub fn separation_ratio(&self) -> f64 {
        self.n_ratio
    }

    /// `C_1|B_1| + C_2|B_2|` (continuum volumes), the natural mass scale.
    pub fn mass_scale(&self) -> f64 {
        let dim = self.func.spec().dim();
        self.c1 * self.b1.volume(dim) + self.c2 * self.b2.volume(dim)
    }
}

/// One emitted coefficient with its per-level envelope
/// `C_i * 2^{k n (1/p - 1)} * |B(y_i, r)|^{1/p}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoefficientRecord {
    /// Which bump the piece telescopes from (1 or 2).
    pub bump: usize,
    /// Telescoping level `k` in `1..=J_0+1`; level `J_0+1` is the shared
    /// mid-ball closure.
    pub level: usize,
    /// The coefficient `gamma_i^k` (zero when the piece vanished).
    pub gamma: f64,
    /// The envelope value the coefficient is compared against.
    pub envelope: f64,
}

/// Result of [`two_bump_decompose`]: the atoms plus the bookkeeping the
/// envelope checks need.
#[derive(Clone, Debug)]
pub struct TwoBumpDecomposition {
    pub decomposition: AtomicDecomposition,
    /// The telescoping depth `J_0` (levels run `1..=J_0+1`).
    pub levels: usize,
    pub coefficients: Vec<CoefficientRecord>,
    /// The closing coefficient computed two ways: from bump 1's integral
    /// and from minus bump 2's; equal up to the input's mean tolerance.
    pub mid_alpha: (f64, f64),
    /// Natural scale of `mid_alpha`: mass scale over the mid-ball measure.
    pub mid_alpha_scale: f64,
    /// `quasinorm^p / (N^{n(1-p)} log2(N) (C_1|B_1| + C_2|B_2|))`.
    pub envelope_ratio: f64,
}

/// Smallest integer strictly larger than `log2(x)`, robust to the
/// floating-point representation of exact powers of two.
fn levels_for_ratio(x: f64) -> usize {
    let l = x.log2();
    ((l + 1e-9).floor() as i64 + 1).max(1) as usize
}

/// Decomposes a two-bump function into `2 (J_0 + 1)` coefficient/atom pairs
/// by telescoping each bump's average through balls `B(y_i, 2^k r)` and
/// closing both chains on the ball `B((y_1+y_2)/2, 2^{J_0+1} r)`.
///
/// Pieces with vanishing sup norm are kept as zero coefficients paired with
/// the zero atom on their level ball, so the output length is always
/// `2 (J_0 + 1)`.  The sum of `lambda_j a_j` reproduces the input up to the
/// input's own deviation from exact mean zero spread over the mid-ball.
pub fn two_bump_decompose(f: &TwoBumpFunction, p: f64) -> Result<TwoBumpDecomposition> {
    let spec = f.func().spec();
    let dim = spec.dim();
    if !p_range_ok(p, dim) {
        return Err(Error::InvalidParameter(format!(
            "exponent p = {p} outside ({}, 1)",
            dim as f64 / (dim as f64 + 1.0)
        )));
    }
    let (b1, b2) = f.balls();
    let (c1, c2) = f.heights();
    let r = b1.radius;
    let j0 = levels_for_ratio(f.separation_ratio());

    let mut mid = [0.0; 2];
    for k in 0..dim {
        mid[k] = 0.5 * (b1.center[k] + b2.center[k]);
    }
    let mid_ball = Ball::new(mid, (1 << (j0 + 1)) as f64 * r);
    // The mid-ball is the largest ball used; if it fits, all level balls fit.
    mid_ball.validate(&spec).map_err(|e| {
        Error::GridTooSmall(format!("closing ball of the telescoping does not fit: {e}"))
    })?;
    for (center, label) in [(b1.center, "bump 1"), (b2.center, "bump 2")] {
        Ball::new(center, (1 << j0) as f64 * r).validate(&spec).map_err(|e| {
            Error::GridTooSmall(format!("largest {label} telescoping ball does not fit: {e}"))
        })?;
    }

    let f1 = f.func().restrict_to_ball(&b1)?;
    let f2 = f.func().restrict_to_ball(&b2)?;
    let int1 = integrate(&f1);
    let int2 = integrate(&f2);
    let m_mid = discrete_ball_measure(&spec, &mid_ball)?;
    let mid_alpha = (int1 / m_mid, -int2 / m_mid);
    let mid_alpha_scale = f.mass_scale() / m_mid;

    let mut terms: Vec<(f64, Atom)> = Vec::with_capacity(2 * (j0 + 1));
    let mut coefficients = Vec::with_capacity(2 * (j0 + 1));

    for (bump, part, center, height, closing) in [
        (1usize, &f1, b1.center, c1, -mid_alpha.0),
        (2usize, &f2, b2.center, c2, mid_alpha.1),
    ] {
        let int_i = integrate(part);
        let level_ball = |k: usize| Ball::new(center, (1 << k) as f64 * r);
        let indicator = |k: usize| GridFunction::indicator(spec, &level_ball(k));
        let alpha = |k: usize| -> Result<f64> {
            Ok(int_i / discrete_ball_measure(&spec, &level_ball(k))?)
        };

        let mut pieces: Vec<(GridFunction, Ball)> = Vec::with_capacity(j0 + 1);
        pieces.push((part.lin_comb(1.0, &indicator(1)?, -alpha(1)?)?, level_ball(1)));
        for k in 2..=j0 {
            let piece = indicator(k - 1)?
                .scale(alpha(k - 1)?)
                .lin_comb(1.0, &indicator(k)?, -alpha(k)?)?;
            pieces.push((piece, level_ball(k)));
        }
        let mid_indicator = GridFunction::indicator(spec, &mid_ball)?;
        let last = indicator(j0)?
            .scale(alpha(j0)?)
            .lin_comb(1.0, &mid_indicator, closing)?;
        pieces.push((last, mid_ball));

        for (k, (piece, ball)) in pieces.into_iter().enumerate() {
            let level = k + 1;
            let sup = piece.sup_norm();
            let envelope = height
                * 2f64.powf(level as f64 * dim as f64 * (1.0 / p - 1.0))
                * b1.volume(dim).powf(1.0 / p);
            let (lambda, atom) = if sup == 0.0 {
                (0.0, Atom::new(GridFunction::zero(spec), ball, p)?)
            } else {
                let gamma = sup * ball.volume(dim).powf(1.0 / p);
                (gamma, Atom::new(piece.scale(1.0 / gamma), ball, p)?)
            };
            coefficients.push(CoefficientRecord { bump, level, gamma: lambda, envelope });
            terms.push((lambda, atom));
        }
    }

    let decomposition = AtomicDecomposition::new(terms, p)?;
    let n_ratio = f.separation_ratio();
    let envelope_denominator =
        n_ratio.powf(dim as f64 * (1.0 - p)) * n_ratio.log2() * f.mass_scale();
    let envelope_ratio = atomic_quasinorm_p(&decomposition) / envelope_denominator;

    Ok(TwoBumpDecomposition {
        decomposition,
        levels: j0,
        coefficients,
        mid_alpha,
        mid_alpha_scale,
        envelope_ratio,
    })
}

/// Serializable form of a decomposition: coefficient, ball, exponent, and
/// sample payload per atom.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionContainer {
    pub format_version: u32,
    pub p: f64,
    pub terms: Vec<DecompositionTerm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub lambda: f64,
    pub ball_center: Point,
    pub ball_radius: f64,
    pub payload: GridFunctionContainer,
}

impl AtomicDecomposition {
    pub fn to_container(&self) -> DecompositionContainer {
        DecompositionContainer {
            format_version: 1,
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|(lambda, atom)| DecompositionTerm {
                    lambda: *lambda,
                    ball_center: atom.ball().center,
                    ball_radius: atom.ball().radius,
                    payload: atom.func().to_container(),
                })
                .collect(),
        }
    }

    pub fn from_container(c: &DecompositionContainer) -> Result<AtomicDecomposition> {
        if c.format_version != 1 {
            return Err(Error::InvalidParameter(format!(
                "unsupported decomposition container version {}",
                c.format_version
            )));
        }
        let mut terms = Vec::with_capacity(c.terms.len());
        for term in &c.terms {
            let func = GridFunction::from_container(&term.payload)?;
            let ball = Ball::new(term.ball_center, term.ball_radius);
            terms.push((term.lambda, Atom::new(func, ball, c.p)?));
        }
        AtomicDecomposition::new(terms, c.p)
    }
}

/// Largest sampled Hoelder quotient `|b(x') - b(x)| / |x' - x|^alpha`.
///
/// Exhaustive over all grid pairs when their count fits the budget;
/// otherwise a fixed-seed sample of `sample_budget` pairs.  Always a lower
/// estimate of the true seminorm.
pub fn lip_seminorm(b: &GridFunction, alpha: f64, sample_budget: usize) -> f64 {
    assert!(alpha > 0.0 && alpha <= 1.0, "order must lie in (0, 1]");
    let spec = b.spec();
    let full = spec.full_box();
    let points: Vec<[usize; 2]> = full.iter().collect();
    let n = points.len();
    let dim = spec.dim();
    let quotient = |a: [usize; 2], c: [usize; 2]| -> f64 {
        let xa = spec.point(a);
        let xc = spec.point(c);
        let d = dist(xa, xc, dim);
        if d == 0.0 {
            return 0.0;
        }
        (b.sample(a) - b.sample(c)).abs() / d.powf(alpha)
    };
    let mut best = 0.0f64;
    if n.saturating_mul(n) <= sample_budget.max(4) {
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(quotient(points[i], points[j]));
            }
        }
    } else {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x11b5_ee7a);
        for _ in 0..sample_budget {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i != j {
                best = best.max(quotient(points[i], points[j]));
            }
        }
    }
    best
}

fn poisson_kernel(dim: usize, t: f64, d2: f64) -> f64 {
    match dim {
        1 => t / (std::f64::consts::PI * (t * t + d2)),
        _ => t / (2.0 * std::f64::consts::PI * (t * t + d2).powf(1.5)),
    }
}

/// Pointwise maximum over `t_levels` of the discrete convolution of `f`
/// with the Poisson kernel, truncated to the grid box.  A diagnostic for
/// eyeballing maximal-function behaviour; no acceptance bound uses it.
pub fn poisson_maximal_diagnostic(f: &GridFunction, t_levels: &[f64]) -> Result<GridFunction> {
    if t_levels.is_empty() || t_levels.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter(
            "t_levels must be nonempty and strictly positive".into(),
        ));
    }
    let spec = f.spec();
    let dim = spec.dim();
    let support = match f.support_box() {
        None => return Ok(GridFunction::zero(spec)),
        Some(s) => s,
    };
    let cell = spec.cell_volume();
    let samples: Vec<(Point, f64)> = support
        .iter()
        .filter_map(|idx| {
            let v = f.sample(idx);
            if v == 0.0 {
                None
            } else {
                Some((spec.point(idx), v))
            }
        })
        .collect();
    Ok(GridFunction::from_fn(spec, spec.full_box(), |x| {
        let mut best = 0.0f64;
        for &t in t_levels {
            let mut acc = KahanSum::new();
            for (y, v) in &samples {
                let mut d2 = 0.0;
                for k in 0..dim {
                    let d = x[k] - y[k];
                    d2 += d * d;
                }
                acc.add(poisson_kernel(dim, t, d2) * v);
            }
            best = best.max((acc.value() * cell).abs());
        }
        best
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, lp_norm};

    fn spec1(l: f64, h: f64) -> GridSpec {
        GridSpec::new(1, l, h).unwrap()
    }

    /// Odd (antisymmetric) profile on B(0,1) that vanishes at the origin,
    /// scaled to `height`; discretely mean-zero by symmetry.
    fn odd_profile(spec: GridSpec, height: f64) -> GridFunction {
        let ball = Ball::new([0.0, 0.0], 1.0);
        let ind = GridFunction::indicator(spec, &ball).unwrap();
        ind.multiply(&GridFunction::from_fn(spec, spec.full_box(), |x| {
            if x[0] > 0.0 {
                -height
            } else if x[0] < 0.0 {
                height
            } else {
                0.0
            }
        }))
        .unwrap()
    }

    #[test]
    fn antisymmetric_half_height_atom_is_valid() {
        let spec = spec1(2.0, 0.25);
        let p = 0.75;
        let height = 0.5 * 2.0f64.powf(-1.0 / p); // half of |B|^{-1/p}, |B| = 2
        let a = odd_profile(spec, height);
        let report = validate_atom(&a, &Ball::new([0.0, 0.0], 1.0), p, 1e-9);
        assert!(report.passed, "{report:?}");
        assert!((report.size_ratio - 0.5).abs() <= 1e-12);
        assert_eq!(report.mean_ratio, 0.0);
    }

    #[test]
    fn constant_bump_fails_mean_check() {
        let spec = spec1(2.0, 0.25);
        let ball = Ball::new([0.0, 0.0], 1.0);
        let one = GridFunction::indicator(spec, &ball).unwrap();
        let report = validate_atom(&one, &ball, 0.75, 1e-9);
        assert!(!report.passed);
        // Discrete ball mass over continuum volume: well above any tolerance.
        assert!(report.mean_ratio > 0.5, "constant bump mean ratio {}", report.mean_ratio);
    }

    #[test]
    fn doubling_a_saturating_atom_fails_size_with_factor_two() {
        let spec = spec1(2.0, 0.25);
        let p = 0.75;
        let ball = Ball::new([0.0, 0.0], 1.0);
        let saturating = odd_profile(spec, 2.0f64.powf(-1.0 / p));
        let report = validate_atom(&saturating, &ball, p, 1e-9);
        assert!(report.passed);
        assert!((report.size_ratio - 1.0).abs() <= 1e-12);
        let doubled = validate_atom(&saturating.scale(2.0), &ball, p, 1e-9);
        assert!(!doubled.passed);
        assert!((doubled.size_ratio - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn support_violation_is_reported() {
        let spec = spec1(2.0, 0.25);
        let big = GridFunction::indicator(spec, &Ball::new([0.0, 0.0], 1.5)).unwrap();
        let report = validate_atom(&big, &Ball::new([0.0, 0.0], 1.0), 0.75, 1e-9);
        assert!(!report.support_ok && !report.passed);
    }

    #[test]
    fn quasinorm_matches_hand_computation() {
        let spec = spec1(2.0, 0.25);
        let p = 0.75;
        let ball = Ball::new([0.0, 0.0], 1.0);
        let a = Atom::new(odd_profile(spec, 2.0f64.powf(-1.0 / p)), ball, p).unwrap();
        let single = AtomicDecomposition::new(vec![(1.0, a.clone())], p).unwrap();
        assert_eq!(atomic_quasinorm(&single), 1.0);
        // Two unit coefficients at p = 0.5 give (1 + 1)^{1/0.5} = 4 — but
        // p = 0.5 is outside the atom range in n = 1, so check the formula
        // at p = 0.75 instead: (2)^{4/3}.
        let double = AtomicDecomposition::new(vec![(1.0, a.clone()), (1.0, a)], p).unwrap();
        assert!((atomic_quasinorm(&double) - 2.0f64.powf(1.0 / p)).abs() <= 1e-12);
    }

    #[test]
    fn quasinorm_power_adds_under_concat() {
        let spec = spec1(2.0, 0.25);
        let p = 0.8;
        let ball = Ball::new([0.0, 0.0], 1.0);
        let a = Atom::new(odd_profile(spec, 2.0f64.powf(-1.0 / p)), ball, p).unwrap();
        let d1 = AtomicDecomposition::new(vec![(0.3, a.clone()), (-1.7, a.clone())], p).unwrap();
        let d2 = AtomicDecomposition::new(vec![(2.2, a.clone())], p).unwrap();
        let want = atomic_quasinorm_p(&d1) + atomic_quasinorm_p(&d2);
        let got = atomic_quasinorm_p(&d1.concat(d2).unwrap());
        assert!((got - want).abs() <= 1e-15 * want);
    }

    /// The canonical separated pair: unit-radius balls at distance `n_sep`,
    /// heights adjusted for exact discrete mean zero.
    fn canonical_two_bump(spec: GridSpec, n_sep: f64) -> TwoBumpFunction {
        let b1 = Ball::new([-0.5 * n_sep, 0.0], 1.0);
        let b2 = Ball::new([0.5 * n_sep, 0.0], 1.0);
        let i1 = GridFunction::indicator(spec, &b1).unwrap();
        let i2 = GridFunction::indicator(spec, &b2).unwrap();
        // Equal discrete masses by symmetry, so heights 1 and -1 cancel.
        let f = i1.lin_comb(1.0, &i2, -1.0).unwrap();
        TwoBumpFunction::new(f, b1, b2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn two_bump_constructor_rejects_violations() {
        let spec = spec1(64.0, 0.25);
        let b1 = Ball::new([-4.0, 0.0], 1.0);
        let b2 = Ball::new([4.0, 0.0], 1.0);
        let i1 = GridFunction::indicator(spec, &b1).unwrap();
        let i2 = GridFunction::indicator(spec, &b2).unwrap();
        let f = i1.lin_comb(1.0, &i2, -1.0).unwrap();
        // Nonzero mean.
        assert!(TwoBumpFunction::new(i1.clone(), b1, b2, 1.0, 1.0).is_err());
        // Sample exceeding its bump height.
        assert!(TwoBumpFunction::new(f.clone(), b1, b2, 0.5, 1.0).is_err());
        // Overlapping balls.
        assert!(TwoBumpFunction::new(
            f.clone(),
            Ball::new([-4.0, 0.0], 5.0),
            Ball::new([4.0, 0.0], 5.0),
            1.0,
            1.0
        )
        .is_err());
        // Unequal radii.
        assert!(TwoBumpFunction::new(f, b1, Ball::new([4.0, 0.0], 2.0), 1.0, 1.0).is_err());
        // Valid.
        let i2_scaled = i2.scale(-integrate(&i1) / integrate(&i2));
        let g = i1.lin_comb(1.0, &i2_scaled, 1.0).unwrap();
        assert!(TwoBumpFunction::new(g, b1, b2, 1.0, 1.1).is_ok());
    }

    #[test]
    fn separation_eight_gives_ten_pairs() {
        // Separation ratio 8: 2 (J_0 + 1) = 10 pieces with J_0 = 4, the
        // smallest integer above log2(8) = 3.
        let spec = spec1(80.0, 0.25);
        let f = canonical_two_bump(spec, 8.0);
        let d = two_bump_decompose(&f, 0.75).unwrap();
        assert_eq!(d.levels, 4);
        assert_eq!(d.decomposition.terms().len(), 10);
        assert_eq!(d.coefficients.len(), 10);
        // All ten pieces are nonzero for this input.
        assert!(d.coefficients.iter().all(|c| c.gamma != 0.0));
    }

    #[test]
    fn decomposition_reconstructs_the_input() {
        let spec = spec1(80.0, 0.25);
        let f = canonical_two_bump(spec, 8.0);
        let d = two_bump_decompose(&f, 0.75).unwrap();
        let rebuilt = d.decomposition.reconstruct(spec).unwrap();
        let diff = rebuilt.lin_comb(1.0, f.func(), -1.0).unwrap();
        let (c1, c2) = f.heights();
        assert!(
            diff.sup_norm() <= 1e-10 * c1.max(c2),
            "reconstruction error {}",
            diff.sup_norm()
        );
    }

    #[test]
    fn decomposition_atoms_validate() {
        let spec = spec1(80.0, 0.25);
        let f = canonical_two_bump(spec, 8.0);
        let d = two_bump_decompose(&f, 0.75).unwrap();
        for (_, atom) in d.decomposition.terms() {
            let report = validate_atom(atom.func(), atom.ball(), atom.p(), 1e-8);
            assert!(report.passed, "{report:?}");
            assert!(report.mean_ratio <= 1e-10, "mean ratio {}", report.mean_ratio);
        }
    }

    #[test]
    fn pure_atom_input_kills_telescoping_coefficients() {
        // A mean-zero function in bump 1 alone: every ball average is zero,
        // so only the level-1 piece of bump 1 survives.
        let spec = spec1(80.0, 0.25);
        let b1 = Ball::new([-4.0, 0.0], 1.0);
        let b2 = Ball::new([4.0, 0.0], 1.0);
        let shifted_odd = GridFunction::from_fn(spec, spec.full_box(), |x| {
            let u = x[0] + 4.0;
            if u.abs() >= 1.0 {
                0.0
            } else if u > 0.0 {
                -1.0
            } else if u < 0.0 {
                1.0
            } else {
                0.0
            }
        });
        let f = TwoBumpFunction::new(shifted_odd, b1, b2, 1.0, 0.0).unwrap();
        let d = two_bump_decompose(&f, 0.75).unwrap();
        for c in &d.coefficients {
            if c.bump == 1 && c.level == 1 {
                assert!(c.gamma > 0.0);
            } else {
                assert!(
                    c.gamma.abs() <= 1e-14,
                    "bump {} level {} coefficient {}",
                    c.bump,
                    c.level,
                    c.gamma
                );
            }
        }
        let rebuilt = d.decomposition.reconstruct(spec).unwrap();
        let diff = rebuilt.lin_comb(1.0, f.func(), -1.0).unwrap();
        assert!(diff.sup_norm() <= 1e-12);
    }

    #[test]
    fn closing_coefficient_agrees_both_ways() {
        let spec = spec1(80.0, 0.25);
        let f = canonical_two_bump(spec, 8.0);
        let d = two_bump_decompose(&f, 0.75).unwrap();
        let (a1, a2) = d.mid_alpha;
        assert!((a1 - a2).abs() <= 1e-9 * d.mid_alpha_scale, "{a1} vs {a2}");
        assert!(a1 != 0.0);
    }

    #[test]
    fn coefficients_sit_under_their_envelopes() {
        let spec = spec1(300.0, 0.25);
        for n_sep in [8.0, 16.0, 32.0] {
            let f = canonical_two_bump(spec, n_sep);
            let d = two_bump_decompose(&f, 0.75).unwrap();
            for c in &d.coefficients {
                assert!(
                    c.gamma.abs() <= crate::calibration::TWO_BUMP_COEFF_ENVELOPE * c.envelope,
                    "N={n_sep} bump {} level {}: gamma {} vs envelope {}",
                    c.bump,
                    c.level,
                    c.gamma,
                    c.envelope
                );
            }
        }
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let spec = spec1(16.0, 0.25);
        // Separation 8 needs the closing ball of radius 32 around 0.
        let f = canonical_two_bump(spec, 8.0);
        match two_bump_decompose(&f, 0.75) {
            Err(Error::GridTooSmall(_)) => {}
            other => panic!("expected GridTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn decomposition_container_round_trip() {
        let spec = spec1(80.0, 0.25);
        let f = canonical_two_bump(spec, 8.0);
        let d = two_bump_decompose(&f, 0.75).unwrap().decomposition;
        let json = serde_json::to_string(&d.to_container()).unwrap();
        let parsed: DecompositionContainer = serde_json::from_str(&json).unwrap();
        let back = AtomicDecomposition::from_container(&parsed).unwrap();
        assert_eq!(back.terms().len(), d.terms().len());
        assert_eq!(atomic_quasinorm_p(&back), atomic_quasinorm_p(&d));
        let diff = back
            .reconstruct(spec)
            .unwrap()
            .lin_comb(1.0, &d.reconstruct(spec).unwrap(), -1.0)
            .unwrap();
        assert_eq!(diff.sup_norm(), 0.0);
    }

    #[test]
    fn lip_seminorm_linear_profile_is_one() {
        let spec = spec1(2.0, 0.125);
        let b = GridFunction::from_fn(spec, spec.full_box(), |x| x[0]);
        let s = lip_seminorm(&b, 1.0, 10_000_000);
        assert!((s - 1.0).abs() <= 1e-10, "seminorm {s}");
        let c = GridFunction::from_fn(spec, spec.full_box(), |_| 3.7);
        assert_eq!(lip_seminorm(&c, 0.5, 10_000_000), 0.0);
    }

    #[test]
    fn lip_seminorm_power_profile_attains_one_at_origin() {
        let alpha = 1.0 / 3.0;
        let h = 0.125;
        let spec = spec1(2.0, h);
        let b = GridFunction::from_fn(spec, spec.full_box(), |x| x[0].abs().powf(alpha));
        let s = lip_seminorm(&b, alpha, 10_000_000);
        assert!(s <= 1.0 + 1e-12 && s >= 1.0 - 10.0 * h, "seminorm {s}");
    }

    #[test]
    fn poisson_diagnostic_basics() {
        let spec = spec1(4.0, 0.125);
        let zero = GridFunction::zero(spec);
        let out = poisson_maximal_diagnostic(&zero, &[0.5, 1.0]).unwrap();
        assert_eq!(out.sup_norm(), 0.0);
        assert!(poisson_maximal_diagnostic(&zero, &[]).is_err());
        assert!(poisson_maximal_diagnostic(&zero, &[0.0]).is_err());

        let bump = GridFunction::indicator(spec, &Ball::new([0.0, 0.0], 0.5)).unwrap();
        let m = poisson_maximal_diagnostic(&bump, &[0.25, 0.5, 1.0]).unwrap();
        let bx = m.support_box().unwrap();
        assert!(bx.iter().all(|idx| m.sample(idx) >= 0.0));
        assert!(m.sup_norm() > 0.0);
    }

    #[test]
    fn poisson_diagnostic_shrinks_with_the_ball() {
        // Two atoms at the same sup * |B|^{1/p} normalization; the smaller
        // ball carries less mass, so the maximal diagnostic is smaller.
        let p = 0.75;
        let spec = spec1(4.0, 1.0 / 64.0);
        let t_levels = [0.25, 0.5, 1.0, 2.0];
        let mut norms = Vec::new();
        for r in [1.0, 0.5] {
            let ball = Ball::new([0.0, 0.0], r);
            let ind = GridFunction::indicator(spec, &ball).unwrap();
            let odd = GridFunction::from_fn(spec, spec.full_box(), |x| {
                if x[0] > 0.0 {
                    -1.0
                } else if x[0] < 0.0 {
                    1.0
                } else {
                    0.0
                }
            });
            let a = ind.multiply(&odd).unwrap().scale(ball.volume(1).powf(-1.0 / p));
            assert!(validate_atom(&a, &ball, p, 1e-9).passed);
            let m = poisson_maximal_diagnostic(&a, &t_levels).unwrap();
            norms.push(lp_norm(&m, p));
        }
        assert!(norms[0].is_finite() && norms[1].is_finite());
        assert!(norms[1] < norms[0], "radius 0.5 gave {} vs {}", norms[1], norms[0]);
    }

    #[test]
    fn reconstruction_pairs_with_inner_product() {
        // Sanity: the decomposition's reconstruction matches the original
        // in the L^2 pairing against an independent window.
        let spec = spec1(80.0, 0.25);
        let f = canonical_two_bump(spec, 8.0);
        let d = two_bump_decompose(&f, 0.75).unwrap();
        let window = GridFunction::indicator(spec, &Ball::new([-4.0, 0.0], 2.0)).unwrap();
        let lhs = inner_product(&d.decomposition.reconstruct(spec).unwrap(), &window).unwrap();
        let rhs = inner_product(f.func(), &window).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }
}
