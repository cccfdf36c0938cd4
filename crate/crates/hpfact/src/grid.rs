//! Uniform lattices on a symmetric box, compactly supported samples, and the
//! midpoint-rule quadrature every other module is built on.
//!
//! All geometry lives on the box `[-L, L]^n` (`n` is 1 or 2) with lattice
//! points `-L + i*h`.  Discrete balls use the *strict* inequality
//! `|x - c| < r` so that concentric balls of dyadically increasing radius are
//! nested as point sets, which the telescoping constructions rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported dimension.  Points always carry two coordinates; a
/// one-dimensional grid simply ignores the second one.
pub const MAX_DIM: usize = 2;

/// A point of the ambient space.  Only the first `dim` coordinates are used.
pub type Point = [f64; MAX_DIM];

/// Euclidean distance restricted to the first `dim` coordinates.
pub fn dist(a: Point, b: Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

/// Compensated (Kahan) accumulator.  Summation order is always fixed by the
/// caller, so results are bit-identical run to run.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub(crate) fn new() -> Self {
        KahanSum { sum: 0.0, carry: 0.0 }
    }

    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// Relative slack used when checking that a stored float is an integer.
const INTEGRALITY_TOL: f64 = 1e-9;

fn nearly_integer(x: f64) -> Option<i64> {
    let r = x.round();
    if (x - r).abs() <= INTEGRALITY_TOL * x.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

/// Description of a uniform lattice on the box `[-L, L]^dim`.
///
/// Lattice points along each axis are `-L + i*h` for `i = 0..points_per_axis`,
/// where `2L/h` must be a positive integer so both endpoints are on-grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    spacing: f64,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let steps = match nearly_integer(2.0 * half_width / spacing) {
            Some(s) if s >= 1 => s as usize,
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "2*half_width/spacing = {} is not a positive integer",
                    2.0 * half_width / spacing
                )))
            }
        };
        Ok(GridSpec { dim, half_width, spacing, points_per_axis: steps + 1 })
    }

    /// Smallest grid whose half-width is an integer multiple of `spacing` and
    /// at least `extent`.  Keeping `L` a multiple of `h` keeps dyadically
    /// coarsened lattices aligned with their parents, which the block-mean
    /// resample requires.
    pub fn fitted(dim: usize, extent: f64, spacing: f64) -> Result<Self> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        let cells = (extent / spacing).ceil().max(1.0);
        GridSpec::new(dim, cells * spacing, spacing)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn total_points(&self) -> usize {
        match self.dim {
            1 => self.points_per_axis,
            _ => self.points_per_axis * self.points_per_axis,
        }
    }

    /// Volume of one quadrature cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of lattice index `i` along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64) * self.spacing - self.half_width
    }

    /// Position of a multi-index.  The second coordinate of the result is 0
    /// on one-dimensional grids.
    pub fn point(&self, idx: [usize; MAX_DIM]) -> Point {
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim {
            p[k] = self.coordinate(idx[k]);
        }
        p
    }

    /// Whether the closed ball lies inside the box.
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        (0..self.dim).all(|k| ball.center[k].abs() + ball.radius <= self.half_width + 1e-12)
    }

    /// Full index box of the grid.
    pub fn full_box(&self) -> IndexBox {
        let hi1 = self.points_per_axis - 1;
        match self.dim {
            1 => IndexBox { lo: [0, 0], hi: [hi1, 0] },
            _ => IndexBox { lo: [0, 0], hi: [hi1, hi1] },
        }
    }
}

/// Euclidean ball, used both as atom support and as quadrature geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Ball { center, radius }
    }

    /// Checks the grid-facing invariants: the ball sits inside the box and is
    /// resolved by at least two spacings per radius.
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidBall(format!("radius must be positive, got {}", self.radius)));
        }
        if self.radius < 2.0 * spec.spacing() {
            return Err(Error::InvalidBall(format!(
                "radius {} is below the resolution floor 2h = {}",
                self.radius,
                2.0 * spec.spacing()
            )));
        }
        if !spec.contains_ball(self) {
            return Err(Error::InvalidBall(format!(
                "ball at {:?} with radius {} leaves the box [-{}, {}]",
                &self.center[..spec.dim()],
                self.radius,
                spec.half_width(),
                spec.half_width()
            )));
        }
        Ok(())
    }

    /// Lebesgue measure of the continuum ball: `2r` in one dimension,
    /// `pi r^2` in two.
    pub fn volume(&self, dim: usize) -> f64 {
        match dim {
            1 => 2.0 * self.radius,
            _ => std::f64::consts::PI * self.radius * self.radius,
        }
    }

    pub fn contains(&self, x: Point, dim: usize) -> bool {
        dist(x, self.center, dim) < self.radius
    }
}

/// Inclusive axis-aligned index box.  For `dim = 1` the second axis is the
/// degenerate range `[0, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [usize; MAX_DIM],
    pub hi: [usize; MAX_DIM],
}

impl IndexBox {
    pub fn extent(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis] + 1
    }

    pub fn len(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, idx: [usize; MAX_DIM]) -> bool {
        (0..MAX_DIM).all(|k| self.lo[k] <= idx[k] && idx[k] <= self.hi[k])
    }

    pub fn union(&self, other: &IndexBox) -> IndexBox {
        IndexBox {
            lo: [self.lo[0].min(other.lo[0]), self.lo[1].min(other.lo[1])],
            hi: [self.hi[0].max(other.hi[0]), self.hi[1].max(other.hi[1])],
        }
    }

    pub fn intersect(&self, other: &IndexBox) -> Option<IndexBox> {
        let lo = [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])];
        let hi = [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])];
        if lo[0] > hi[0] || lo[1] > hi[1] {
            None
        } else {
            Some(IndexBox { lo, hi })
        }
    }

    /// Row-major iteration over the box.
    pub fn iter(&self) -> impl Iterator<Item = [usize; MAX_DIM]> + '_ {
        let b = *self;
        (b.lo[0]..=b.hi[0]).flat_map(move |i| (b.lo[1]..=b.hi[1]).map(move |j| [i, j]))
    }
}

/// Tight index box of the lattice points strictly inside a ball, or `None`
/// when the discrete ball is empty.
fn ball_index_box(spec: &GridSpec, ball: &Ball) -> Option<IndexBox> {
    let mut lo = [0usize; MAX_DIM];
    let mut hi = [0usize; MAX_DIM];
    let h = spec.spacing();
    let half = spec.half_width();
    let n = spec.points_per_axis() as i64;
    for k in 0..spec.dim() {
        let c = ball.center[k];
        // First index with coordinate > c - r (strict on the ball boundary).
        let tl = (c - ball.radius + half) / h;
        let mut l = tl.floor() as i64 + 1;
        // Floating-point floor can land one step high when tl is integral.
        while l > 0 && spec.coordinate((l - 1) as usize) > c - ball.radius {
            l -= 1;
        }
        while (l as f64) * h - half <= c - ball.radius {
            l += 1;
        }
        // Last index with coordinate < c + r.
        let tu = (c + ball.radius + half) / h;
        let mut u = tu.ceil() as i64 - 1;
        while u + 1 < n && spec.coordinate((u + 1) as usize) < c + ball.radius {
            u += 1;
        }
        while u >= 0 && (u as f64) * h - half >= c + ball.radius {
            u -= 1;
        }
        let l = l.max(0);
        let u = u.min(n - 1);
        if l > u {
            return None;
        }
        lo[k] = l as usize;
        hi[k] = u as usize;
    }
    Some(IndexBox { lo, hi })
}

/// A compactly supported real function sampled on a grid.
///
/// Samples are stored only inside the declared support box (row-major);
/// everything outside is an exact zero.  All values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    support: Option<IndexBox>,
    samples: Vec<f64>,
}

impl GridFunction {
    /// The identically zero function.
    pub fn zero(spec: GridSpec) -> Self {
        GridFunction { spec, support: None, samples: Vec::new() }
    }

    /// Samples `f` at every lattice point of `support`.
    pub fn from_fn(spec: GridSpec, support: IndexBox, f: impl Fn(Point) -> f64) -> Self {
        let mut samples = Vec::with_capacity(support.len());
        for idx in support.iter() {
            let v = f(spec.point(idx));
            assert!(v.is_finite(), "grid samples must be finite");
            samples.push(v);
        }
        GridFunction { spec, support: Some(support), samples }
    }

    /// Wraps precomputed row-major samples over `support`.
    pub(crate) fn from_box_samples(
        spec: GridSpec,
        support: IndexBox,
        samples: Vec<f64>,
    ) -> Self {
        assert_eq!(samples.len(), support.len(), "sample count must match the box");
        assert!(samples.iter().all(|s| s.is_finite()), "grid samples must be finite");
        GridFunction { spec, support: Some(support), samples }
    }

    /// Indicator of the discrete ball `{x : |x - c| < r}`.
    pub fn indicator(spec: GridSpec, ball: &Ball) -> Result<Self> {
        ball.validate(&spec)?;
        let bx = ball_index_box(&spec, ball).ok_or(Error::EmptyBall { radius: ball.radius })?;
        Ok(GridFunction::from_fn(spec, bx, |x| if ball.contains(x, spec.dim()) { 1.0 } else { 0.0 }))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn support_box(&self) -> Option<IndexBox> {
        self.support
    }

    /// Sample at a multi-index; zero outside the support box.
    pub fn sample(&self, idx: [usize; MAX_DIM]) -> f64 {
        match &self.support {
            None => 0.0,
            Some(b) => {
                if !b.contains(idx) {
                    0.0
                } else {
                    let off = (idx[0] - b.lo[0]) * b.extent(1) + (idx[1] - b.lo[1]);
                    self.samples[off]
                }
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    /// `alpha * self`, with the same support box.
    pub fn scale(&self, alpha: f64) -> GridFunction {
        assert!(alpha.is_finite());
        GridFunction {
            spec: self.spec,
            support: self.support,
            samples: self.samples.iter().map(|s| alpha * s).collect(),
        }
    }

    /// `alpha * self + beta * other`; the support box is the union.
    pub fn lin_comb(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch { what: "linear combination operands" });
        }
        let support = match (self.support, other.support) {
            (None, None) => return Ok(GridFunction::zero(self.spec)),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.union(&b),
        };
        let mut samples = Vec::with_capacity(support.len());
        for idx in support.iter() {
            samples.push(alpha * self.sample(idx) + beta * other.sample(idx));
        }
        Ok(GridFunction { spec: self.spec, support: Some(support), samples })
    }

    /// Pointwise product; the support box is the intersection.
    pub fn multiply(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch { what: "pointwise product operands" });
        }
        let support = match (self.support, other.support) {
            (Some(a), Some(b)) => a.intersect(&b),
            _ => None,
        };
        match support {
            None => Ok(GridFunction::zero(self.spec)),
            Some(s) => {
                let mut samples = Vec::with_capacity(s.len());
                for idx in s.iter() {
                    samples.push(self.sample(idx) * other.sample(idx));
                }
                Ok(GridFunction { spec: self.spec, support: Some(s), samples })
            }
        }
    }

    /// Restriction `f * chi_B` (strict ball inequality).
    pub fn restrict_to_ball(&self, ball: &Ball) -> Result<GridFunction> {
        ball.validate(&self.spec)?;
        let bx = match (ball_index_box(&self.spec, ball), self.support) {
            (Some(b), Some(s)) => b.intersect(&s),
            _ => None,
        };
        match bx {
            None => Ok(GridFunction::zero(self.spec)),
            Some(b) => {
                let dim = self.spec.dim();
                let mut samples = Vec::with_capacity(b.len());
                for idx in b.iter() {
                    let x = self.spec.point(idx);
                    samples.push(if ball.contains(x, dim) { self.sample(idx) } else { 0.0 });
                }
                Ok(GridFunction { spec: self.spec, support: Some(b), samples })
            }
        }
    }

    /// True when every nonzero sample lies strictly inside the ball.
    pub fn supported_in_ball(&self, ball: &Ball) -> bool {
        match &self.support {
            None => true,
            Some(b) => {
                let dim = self.spec.dim();
                b.iter().all(|idx| self.sample(idx) == 0.0 || ball.contains(self.spec.point(idx), dim))
            }
        }
    }

    /// Block-mean resample onto a coarser, aligned lattice.
    ///
    /// The target spacing must be an integer multiple `m` of the source
    /// spacing and the target lattice offset must land on source lattice
    /// points.  Each coarse sample is the mean of the `m^dim` source samples
    /// in the block whose lower corner is the coarse point, so the discrete
    /// integral is preserved exactly and support can only spread by
    /// `(m-1) * h_src` per axis toward larger coordinates of the block.
    pub fn resample_block_mean(&self, target: GridSpec) -> Result<GridFunction> {
        if target.dim() != self.spec.dim() {
            return Err(Error::MisalignedResample("dimension mismatch".into()));
        }
        let m = match nearly_integer(target.spacing() / self.spec.spacing()) {
            Some(m) if m >= 1 => m,
            _ => {
                return Err(Error::MisalignedResample(format!(
                    "target spacing {} is not an integer multiple of source spacing {}",
                    target.spacing(),
                    self.spec.spacing()
                )))
            }
        };
        // Offset of the target origin inside the source lattice.
        let delta = match nearly_integer(
            (self.spec.half_width() - target.half_width()) / self.spec.spacing(),
        ) {
            Some(d) => d,
            None => {
                return Err(Error::MisalignedResample(
                    "target lattice does not pass through source lattice points".into(),
                ))
            }
        };
        let src = match self.support {
            None => return Ok(GridFunction::zero(target)),
            Some(s) => s,
        };
        let dim = self.spec.dim();
        // Coarse index range covering the source support; the target box
        // must contain it outright — silently dropping mass would break the
        // exact-integral contract.
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let t_max = (target.points_per_axis() - 1) as i64;
        for k in 0..dim {
            let a = (src.lo[k] as i64 - delta).div_euclid(m);
            let b = (src.hi[k] as i64 - delta).div_euclid(m);
            if a < 0 || b > t_max {
                return Err(Error::GridTooSmall(format!(
                    "target box does not cover the source support along axis {k}"
                )));
            }
            lo[k] = a as usize;
            hi[k] = b as usize;
        }
        let bx = IndexBox { lo, hi };
        let inv = 1.0 / (m as f64).powi(dim as i32);
        let src_n = self.spec.points_per_axis() as i64;
        let mut samples = Vec::with_capacity(bx.len());
        for idx in bx.iter() {
            let mut acc = KahanSum::new();
            let base0 = delta + (idx[0] as i64) * m;
            let base1 = if dim == 2 { delta + (idx[1] as i64) * m } else { 0 };
            for t0 in 0..m {
                let i0 = base0 + t0;
                if i0 < 0 || i0 >= src_n {
                    continue;
                }
                if dim == 1 {
                    acc.add(self.sample([i0 as usize, 0]));
                } else {
                    for t1 in 0..m {
                        let i1 = base1 + t1;
                        if i1 < 0 || i1 >= src_n {
                            continue;
                        }
                        acc.add(self.sample([i0 as usize, i1 as usize]));
                    }
                }
            }
            samples.push(acc.value() * inv);
        }
        Ok(GridFunction { spec: target, support: Some(bx), samples })
    }

    /// Serializable container with a stable layout.
    pub fn to_container(&self) -> GridFunctionContainer {
        let support = self.support.unwrap_or(IndexBox { lo: [0, 0], hi: [0, 0] });
        GridFunctionContainer {
            format_version: 1,
            dim: self.spec.dim(),
            half_width: self.spec.half_width(),
            spacing: self.spec.spacing(),
            empty: self.support.is_none(),
            support_lo: support.lo,
            support_hi: support.hi,
            samples: self.samples.clone(),
        }
    }

    pub fn from_container(c: &GridFunctionContainer) -> Result<GridFunction> {
        if c.format_version != 1 {
            return Err(Error::InvalidParameter(format!(
                "unsupported grid-function container version {}",
                c.format_version
            )));
        }
        let spec = GridSpec::new(c.dim, c.half_width, c.spacing)?;
        if c.empty {
            return Ok(GridFunction::zero(spec));
        }
        let support = IndexBox { lo: c.support_lo, hi: c.support_hi };
        if support.len() != c.samples.len() {
            return Err(Error::InvalidParameter(format!(
                "container holds {} samples for a support box of {} points",
                c.samples.len(),
                support.len()
            )));
        }
        if c.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("container holds non-finite samples".into()));
        }
        Ok(GridFunction { spec, support: Some(support), samples: c.samples.clone() })
    }
}

/// Versioned on-disk layout of a [`GridFunction`]: grid parameters, the
/// support box, and its row-major samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFunctionContainer {
    pub format_version: u32,
    pub dim: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub empty: bool,
    pub support_lo: [usize; MAX_DIM],
    pub support_hi: [usize; MAX_DIM],
    pub samples: Vec<f64>,
}

/// Midpoint-rule integral `h^dim * sum(samples)`, accumulated in row-major
/// support order with compensated summation.
pub fn integrate(f: &GridFunction) -> f64 {
    let mut acc = KahanSum::new();
    for s in &f.samples {
        acc.add(*s);
    }
    acc.value() * f.spec.cell_volume()
}

/// Discrete `L^p` norm `(h^dim * sum |s|^p)^(1/p)`; `p = infinity` gives the
/// max norm.  Requires `p > 0`.
pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    assert!(p > 0.0, "lp_norm requires p > 0");
    if p.is_infinite() {
        return f.sup_norm();
    }
    let mut acc = KahanSum::new();
    for s in &f.samples {
        acc.add(s.abs().powf(p));
    }
    (acc.value() * f.spec.cell_volume()).powf(1.0 / p)
}

/// Discrete pairing `h^dim * sum f*g` over the intersection of supports.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if f.spec != g.spec {
        return Err(Error::GridMismatch { what: "pairing operands" });
    }
    let bx = match (f.support, g.support) {
        (Some(a), Some(b)) => a.intersect(&b),
        _ => None,
    };
    let mut acc = KahanSum::new();
    if let Some(bx) = bx {
        for idx in bx.iter() {
            acc.add(f.sample(idx) * g.sample(idx));
        }
    }
    Ok(acc.value() * f.spec.cell_volume())
}

/// Number of lattice points strictly inside the ball.
pub fn discrete_ball_count(spec: &GridSpec, ball: &Ball) -> usize {
    match ball_index_box(spec, ball) {
        None => 0,
        Some(bx) => {
            let dim = spec.dim();
            bx.iter().filter(|&idx| ball.contains(spec.point(idx), dim)).count()
        }
    }
}

/// Discrete measure `h^dim * #(lattice points inside the ball)`.
pub fn discrete_ball_measure(spec: &GridSpec, ball: &Ball) -> Result<f64> {
    let count = discrete_ball_count(spec, ball);
    if count == 0 {
        return Err(Error::EmptyBall { radius: ball.radius });
    }
    Ok(spec.cell_volume() * count as f64)
}

/// Mean of `f` over the discrete ball: integral of the restriction divided
/// by the *discrete* ball measure, so that subtracting the mean from the
/// restriction is mean-zero to roundoff on this lattice.
pub fn average_on_ball(f: &GridFunction, ball: &Ball) -> Result<f64> {
    let measure = discrete_ball_measure(&f.spec, ball)?;
    let restricted = f.restrict_to_ball(ball)?;
    Ok(integrate(&restricted) / measure)
}
