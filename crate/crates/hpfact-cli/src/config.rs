//! Versioned TOML configuration for the experiment runner.
//!
//! Every cross-field constraint is checked up front by [`Config::validate`],
//! which reports the violated invariant by name before any computation
//! starts.

use serde::Deserialize;

use hpfact::factor::ExponentSystem;
use hpfact::grid::GridSpec;
use hpfact::kernel::{kernel_by_name, KernelSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    pub exponents: ExponentConfig,
    #[serde(default)]
    pub factorize: FactorizeConfig,
    #[serde(default)]
    pub commutator: CommutatorConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub kernel_check: KernelCheckConfig,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub spacing: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    /// Overrides the kernel's declared Hoelder exponent; must stay inside
    /// `(n/(n+1), 1)`.
    pub smoothness_eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: f64,
    pub q: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorizeConfig {
    pub slot: usize,
    pub separation: f64,
    pub rounds: usize,
    pub stop_tol: f64,
    pub samples_per_radius: usize,
    pub atom_radius: f64,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        FactorizeConfig {
            slot: 2,
            separation: 32.0,
            rounds: 3,
            stop_tol: 0.0,
            samples_per_radius: 16,
            atom_radius: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutatorConfig {
    /// Symbol names: `abs-pow`, `dist-pow`, `step`, `linear`, `zero`.
    pub family: Vec<String>,
    pub trials: usize,
    pub dist_center: f64,
    pub step_width: f64,
    /// Optional explicit Hoelder order; when present it must equal
    /// `n (1/p - 1)`.
    pub alpha: Option<f64>,
}

impl Default for CommutatorConfig {
    fn default() -> Self {
        CommutatorConfig {
            family: vec!["abs-pow".into(), "dist-pow".into(), "step".into()],
            trials: 24,
            dist_center: 0.3,
            step_width: 1.0,
            alpha: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub separations: Vec<f64>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { separations: vec![8.0, 16.0, 32.0] }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckConfig {
    pub samples: usize,
    pub homogeneity_separations: Vec<f64>,
    pub ball_radius: f64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        KernelCheckConfig {
            samples: 10_000,
            homogeneity_separations: vec![16.0, 32.0],
            ball_radius: 0.5,
        }
    }
}

const KNOWN_SYMBOLS: [&str; 5] = ["abs-pow", "dist-pow", "step", "linear", "zero"];

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Config, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| format!("cannot parse config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every cross-field invariant, naming the violated one.
    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!(
                "config version must be {CONFIG_VERSION}, got {}",
                self.version
            ));
        }
        let dim = self.grid.dim;
        if dim != 1 && dim != 2 {
            return Err(format!("grid.dim must be 1 or 2, got {dim}"));
        }
        if !(self.grid.spacing > 0.0) || !self.grid.spacing.is_finite() {
            return Err(format!("grid.spacing must be positive, got {}", self.grid.spacing));
        }
        if self.grid.half_width < 4.0 * self.grid.spacing {
            return Err(format!(
                "grid.half_width must be at least 4 spacings, got {} vs spacing {}",
                self.grid.half_width, self.grid.spacing
            ));
        }
        // Kernel name and the optional smoothness override.
        self.kernel()?;
        // The exponent identity 1/q + 1/r1 + 1/r2 = 1/p.
        let exps = self.exponents()?;
        // Commutator order, when given explicitly, must be the dual order.
        if let Some(alpha) = self.commutator.alpha {
            let expected = exps.lip_alpha();
            if (alpha - expected).abs() > 1e-12 {
                return Err(format!(
                    "commutator.alpha must equal n(1/p - 1) = {expected}, got {alpha}"
                ));
            }
        }
        for name in &self.commutator.family {
            if !KNOWN_SYMBOLS.contains(&name.as_str()) {
                return Err(format!(
                    "commutator.family contains unknown symbol {name:?}; known: {KNOWN_SYMBOLS:?}"
                ));
            }
        }
        if self.commutator.trials == 0 {
            return Err("commutator.trials must be at least 1".into());
        }
        if self.factorize.slot != 1 && self.factorize.slot != 2 {
            return Err(format!("factorize.slot must be 1 or 2, got {}", self.factorize.slot));
        }
        if !(self.factorize.separation >= 4.0) {
            return Err(format!(
                "factorize.separation must be at least 4, got {}",
                self.factorize.separation
            ));
        }
        if self.factorize.samples_per_radius < 4 {
            return Err(format!(
                "factorize.samples_per_radius must be at least 4, got {}",
                self.factorize.samples_per_radius
            ));
        }
        if !(self.factorize.stop_tol >= 0.0) {
            return Err(format!(
                "factorize.stop_tol must be >= 0, got {}",
                self.factorize.stop_tol
            ));
        }
        if !(self.factorize.atom_radius > 0.0) {
            return Err(format!(
                "factorize.atom_radius must be positive, got {}",
                self.factorize.atom_radius
            ));
        }
        for s in &self.decay.separations {
            if !(*s >= 4.0) {
                return Err(format!("decay.separations entries must be at least 4, got {s}"));
            }
        }
        if self.kernel_check.samples == 0 {
            return Err("kernel_check.samples must be at least 1".into());
        }
        if !(self.kernel_check.ball_radius > 0.0) {
            return Err(format!(
                "kernel_check.ball_radius must be positive, got {}",
                self.kernel_check.ball_radius
            ));
        }
        Ok(())
    }

    /// The configured kernel, with the optional smoothness override applied.
    pub fn kernel(&self) -> Result<KernelSpec, String> {
        let base = kernel_by_name(&self.kernel.name, self.grid.dim)
            .map_err(|e| format!("kernel.name: {e}"))?;
        match self.kernel.smoothness_eps {
            None => Ok(base),
            Some(eps) => KernelSpec::new(
                base.name().to_string(),
                base.dim(),
                eps,
                base.size_const(),
                base.homogeneity_const(),
                base.eval_fn(),
            )
            .map_err(|e| format!("kernel.smoothness_eps: {e}")),
        }
    }

    pub fn exponents(&self) -> Result<ExponentSystem, String> {
        let p = self.exponents.p;
        match (self.exponents.q, self.exponents.r1, self.exponents.r2) {
            (None, None, None) => ExponentSystem::symmetric(self.grid.dim, p)
                .map_err(|e| format!("exponents: {e}")),
            (Some(q), Some(r1), Some(r2)) => ExponentSystem::new(self.grid.dim, p, q, r1, r2)
                .map_err(|e| format!("exponents: {e}")),
            _ => Err("exponents: q, r1, r2 must be given together or all omitted".into()),
        }
    }

    /// The fixed-extent grid used by the kernel and commutator commands.
    pub fn grid_spec(&self) -> Result<GridSpec, String> {
        GridSpec::new(self.grid.dim, self.grid.half_width, self.grid.spacing)
            .map_err(|e| format!("grid: {e}"))
    }

    /// A grid sized for one factorization geometry at separation `n`:
    /// the displaced balls and the telescoping closure need reach
    /// `4.5 n rho` plus slack.
    pub fn factor_grid(&self, n: f64, rho: f64) -> Result<GridSpec, String> {
        GridSpec::fitted(self.grid.dim, 4.5 * n * rho + 2.5 * rho, self.grid.spacing)
            .map_err(|e| format!("grid: {e}"))
    }
}
