//! The four experiment commands.  Every command is a pure function of the
//! configuration and seed: identical inputs produce byte-identical tables
//! and reports, whatever the thread count.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use hpfact::atoms::{Atom, AtomicDecomposition};
use hpfact::commutator::{
    duality_pairing_check, estimate_commutator_norm, LipFunction, LipProfile,
};
use hpfact::factor::{approximate_atom, uchiyama_factorize};
use hpfact::grid::{Ball, GridFunction, GridSpec};
use hpfact::kernel::{
    check_homogeneity, check_size_condition, check_smoothness_condition, HomogeneityReport,
    SeparatedConfig, SizeReport, SmoothnessReport,
};

use crate::config::Config;

pub struct CommandOutput {
    pub exit_code: i32,
    /// Text echoed to stdout (also the CSV payload where the command has
    /// one).
    pub stdout: String,
}

fn write_out(out_dir: &Path, name: &str, content: &str) -> Result<(), String> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", out_dir.display()))?;
    let path = out_dir.join(name);
    std::fs::write(&path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// An oscillating mean-zero atom of the configured radius at the origin:
/// odd sine profile in one dimension, odd coordinate difference in two.
fn reference_atom(spec: GridSpec, radius: f64, p: f64) -> Result<Atom, String> {
    let dim = spec.dim();
    let ball = Ball::new([0.0, 0.0], radius);
    let ind = GridFunction::indicator(spec, &ball).map_err(|e| e.to_string())?;
    let bx = ind.support_box().ok_or("atom ball is empty on this grid")?;
    let raw = GridFunction::from_fn(spec, bx, move |x| {
        if !ball.contains(x, dim) {
            0.0
        } else if dim == 1 {
            (std::f64::consts::PI * x[0] / radius).sin()
        } else {
            (x[0] - x[1]) / radius
        }
    });
    let gamma = raw.sup_norm() * ball.volume(dim).powf(1.0 / p);
    Atom::new(raw.scale(1.0 / gamma), ball, p).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct KernelReport {
    kernel: String,
    dim: usize,
    seed: u64,
    samples: usize,
    size: SizeReport,
    smoothness: SmoothnessReport,
    homogeneity: Vec<(f64, HomogeneityReport)>,
    all_passed: bool,
}

pub fn cmd_verify_kernel(cfg: &Config, seed: u64, out_dir: &Path) -> Result<CommandOutput, String> {
    let k = cfg.kernel()?;
    let samples = cfg.kernel_check.samples;
    let size = check_size_condition(&k, samples, seed);
    let smoothness = check_smoothness_condition(&k, samples, seed);
    let mut homogeneity = Vec::new();
    let mut all = size.passed && smoothness.passed && !smoothness.monotone_growth;
    for &n in &cfg.kernel_check.homogeneity_separations {
        let sep = SeparatedConfig::axis_aligned(
            cfg.grid.dim,
            [0.0, 0.0],
            cfg.kernel_check.ball_radius,
            n,
        )
        .map_err(|e| format!("kernel_check.homogeneity_separations: {e}"))?;
        let rep = check_homogeneity(&k, &sep, samples, seed);
        all &= rep.passed;
        homogeneity.push((n, rep));
    }
    let report = KernelReport {
        kernel: k.name().to_string(),
        dim: k.dim(),
        seed,
        samples,
        size,
        smoothness,
        homogeneity,
        all_passed: all,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    write_out(out_dir, "kernel_report.json", &json)?;
    let mut text = String::new();
    writeln!(
        text,
        "kernel {}: size {:?} (declared {:?}), smoothness {:?}, growth {}",
        report.kernel,
        report.size.a_measured,
        report.size.declared_a,
        report.smoothness.a_measured,
        report.smoothness.monotone_growth
    )
    .unwrap();
    for (n, rep) in &report.homogeneity {
        writeln!(
            text,
            "homogeneity at separation {n:?}: lower ratio {:?} (declared {:?}) pass {}",
            rep.lower_ratio, rep.declared_c, rep.passed
        )
        .unwrap();
    }
    writeln!(text, "all checks passed: {all}").unwrap();
    Ok(CommandOutput { exit_code: if all { 0 } else { 1 }, stdout: text })
}

pub fn cmd_factorize(cfg: &Config, seed: u64, out_dir: &Path) -> Result<CommandOutput, String> {
    let _ = seed; // the pipeline is deterministic; the seed names the run
    let k = cfg.kernel()?;
    let exps = cfg.exponents()?;
    let fc = &cfg.factorize;
    let spec = cfg.factor_grid(fc.separation, fc.atom_radius)?;
    let atom = reference_atom(spec, fc.atom_radius, exps.p)?;
    let f = AtomicDecomposition::new(vec![(1.0, atom)], exps.p).map_err(|e| e.to_string())?;
    let res = uchiyama_factorize(
        &k,
        fc.slot,
        &f,
        &exps,
        fc.separation,
        fc.rounds,
        fc.stop_tol,
        fc.samples_per_radius,
    )
    .map_err(|e| e.to_string())?;

    let mut csv = String::from(
        "round,num_triples,error_quasinorm_p,contraction_ratio,triple_norm_budget_max\n",
    );
    let mut prev = res.input_mass;
    let scale = fc.separation.powi(2 * cfg.grid.dim as i32);
    for (i, round) in res.rounds.iter().enumerate() {
        let err = res.error_norms[i];
        let mut budget_max = 0.0f64;
        for t in round {
            budget_max = budget_max.max(t.norm_g * t.norm_h1 * t.norm_h2 / scale);
        }
        writeln!(csv, "{},{},{:?},{:?},{:?}", i + 1, round.len(), err, err / prev, budget_max)
            .unwrap();
        prev = err;
    }
    write_out(out_dir, "factorization.csv", &csv)?;
    let container = res.to_container();
    let json = serde_json::to_string_pretty(&container).map_err(|e| e.to_string())?;
    write_out(out_dir, "factorization.json", &json)?;
    let exit_code = if res.non_contraction { 2 } else { 0 };
    Ok(CommandOutput { exit_code, stdout: csv })
}

fn symbol_profile(cfg: &Config, name: &str) -> LipProfile {
    match name {
        "abs-pow" => LipProfile::AbsPow,
        "dist-pow" => LipProfile::DistPow { center: [cfg.commutator.dist_center, 0.0] },
        "step" => LipProfile::Step { width: cfg.commutator.step_width },
        "linear" => LipProfile::Linear,
        _ => LipProfile::Constant { value: 0.0 },
    }
}

pub fn cmd_commutator(cfg: &Config, seed: u64, out_dir: &Path) -> Result<CommandOutput, String> {
    let k = cfg.kernel()?;
    let exps = cfg.exponents()?;
    let spec = cfg.grid_spec()?;
    let dim = cfg.grid.dim;
    let slot = cfg.factorize.slot;

    // A fixed separated triple for the duality column: three cosine bumps
    // spread across the box, dephased so no mirror symmetry cancels the
    // pairing.
    let radius = spec.half_width() / 5.0;
    let offset = spec.half_width() / 2.0;
    let mk = |center: f64, phase: f64| -> Result<GridFunction, String> {
        let mut c = [0.0; 2];
        c[..dim].fill(center / (dim as f64).sqrt());
        let ball = Ball::new(c, radius);
        let ind = GridFunction::indicator(spec, &ball).map_err(|e| e.to_string())?;
        let bx = ind.support_box().ok_or("duality bump is empty on this grid")?;
        Ok(GridFunction::from_fn(spec, bx, move |x| {
            if ball.contains(x, dim) {
                (1.1 * (x[0] + x[1]) + phase).cos() + 0.3
            } else {
                0.0
            }
        }))
    };
    let g = mk(0.0, 0.9)?;
    let h1 = mk(-offset, 0.1)?;
    let h2 = mk(offset, 1.9)?;

    let mut csv =
        String::from("symbol,seminorm_est,commutator_estimate,ratio,duality_rel_err\n");
    for name in &cfg.commutator.family {
        if name == "zero" {
            writeln!(csv, "zero,{:?},{:?},{:?},{:?}", 0.0, 0.0, 0.0, 0.0).unwrap();
            continue;
        }
        let b = LipFunction::new(symbol_profile(cfg, name), &exps, spec, 200_000)
            .map_err(|e| e.to_string())?;
        let est = estimate_commutator_norm(&k, slot, &b, &exps, cfg.commutator.trials, seed)
            .map_err(|e| e.to_string())?;
        let duality = duality_pairing_check(&k, slot, &b, &g, &h1, &h2)
            .map_err(|e| e.to_string())?;
        let ratio = if b.seminorm_est() > 0.0 { est / b.seminorm_est() } else { 0.0 };
        writeln!(
            csv,
            "{name},{:?},{est:?},{ratio:?},{:?}",
            b.seminorm_est(),
            duality.rel_err
        )
        .unwrap();
    }
    write_out(out_dir, "commutator.csv", &csv)?;
    Ok(CommandOutput { exit_code: 0, stdout: csv })
}

pub fn cmd_decay_table(cfg: &Config, seed: u64, out_dir: &Path) -> Result<CommandOutput, String> {
    let _ = seed;
    let k = cfg.kernel()?;
    let exps = cfg.exponents()?;
    let fc = &cfg.factorize;
    let mut csv = String::from("separation,sup_error,error_l1,denominator,norm_product\n");
    for &n in &cfg.decay.separations {
        let spec = cfg.factor_grid(n, fc.atom_radius)?;
        let atom = reference_atom(spec, fc.atom_radius, exps.p)?;
        let approx =
            approximate_atom(&k, &atom, &exps, fc.slot, n).map_err(|e| e.to_string())?;
        let t = &approx.triple;
        writeln!(
            csv,
            "{n:?},{:?},{:?},{:?},{:?}",
            t.sup_error,
            t.error_l1,
            t.denominator,
            t.norm_g * t.norm_h1 * t.norm_h2
        )
        .unwrap();
    }
    write_out(out_dir, "decay.csv", &csv)?;
    Ok(CommandOutput { exit_code: 0, stdout: csv })
}
