//! Measurement driver behind the frozen constants in `calibration.rs`.
//!
//! Prints the raw measured quantities (contraction ratios, norm-equivalence
//! ratios, envelope spreads, kernel-scan suprema, commutator/seminorm
//! ratios) at the same parameters the integration tests use, so the frozen
//! values can be re-derived.

use hpfact::atoms::{atomic_quasinorm, two_bump_decompose, Atom, AtomicDecomposition};
use hpfact::commutator::{estimate_commutator_norm, LipFunction, LipProfile};
use hpfact::factor::{
    factorization_norm, factorization_norm_mixed, uchiyama_factorize, ExponentSystem,
};
use hpfact::grid::{Ball, GridFunction, GridSpec};
use hpfact::kernel::{self, builtin_riesz_kernel, SeparatedConfig};

fn oscillating_atom(spec: GridSpec, radius: f64, p: f64) -> Atom {
    let ball = Ball::new([0.0, 0.0], radius);
    let ind = GridFunction::indicator(spec, &ball).unwrap();
    let raw = GridFunction::from_fn(spec, ind.support_box().unwrap(), move |x| {
        if ball.contains(x, 1) {
            (std::f64::consts::PI * x[0] / radius).sin()
        } else {
            0.0
        }
    });
    let gamma = raw.sup_norm() * ball.volume(1).powf(1.0 / p);
    Atom::new(raw.scale(1.0 / gamma), ball, p).unwrap()
}

fn main() {
    let k = builtin_riesz_kernel(1, 1).unwrap();

    // --- Kernel scans at the declared constants -------------------------
    for dim in [1usize, 2] {
        let kd = builtin_riesz_kernel(dim, 1).unwrap();
        let size = kernel::check_size_condition(&kd, 10_000, 7);
        let smooth = kernel::check_smoothness_condition(&kd, 10_000, 7);
        println!(
            "kernel dim {dim}: size measured {:.4} (declared {}), smooth measured {:.4}, ratios {:?}, growth {}",
            size.a_measured, size.declared_a, smooth.a_measured, smooth.scale_ratios,
            smooth.monotone_growth
        );
        for n in [16.0, 32.0] {
            let cfg = SeparatedConfig::axis_aligned(dim, [0.0, 0.0], 0.5, n).unwrap();
            let hom = kernel::check_homogeneity(&kd, &cfg, 2_000, 7);
            println!(
                "  homogeneity n {n}: lower_ratio {:.6} declared {} pass {}",
                hom.lower_ratio, hom.declared_c, hom.passed
            );
        }
    }

    // --- Two-bump envelope spread across scales and exponents -----------
    for p in [0.6, 0.75, 0.9] {
        let mut ratios = Vec::new();
        for n in [8.0f64, 16.0, 32.0, 64.0] {
            let rho = 1.0;
            let spacing = rho / 16.0;
            let extent = 4.5 * n * rho + 2.5 * rho;
            let spec = GridSpec::fitted(1, extent, spacing).unwrap();
            let b1 = Ball::new([0.0, 0.0], rho);
            let b2 = Ball::new([n * rho, 0.0], rho);
            let i1 = GridFunction::indicator(spec, &b1).unwrap();
            let i2 = GridFunction::indicator(spec, &b2).unwrap();
            let m1 = hpfact::grid::integrate(&i1);
            let m2 = hpfact::grid::integrate(&i2);
            let f = i1.lin_comb(1.0, &i2, -m1 / m2).unwrap();
            let tb = hpfact::atoms::TwoBumpFunction::new(f, b1, b2, 1.0, m1 / m2).unwrap();
            let d = two_bump_decompose(&tb, p).unwrap();
            ratios.push(d.envelope_ratio);
        }
        println!("two-bump envelope ratios p {p}: {ratios:?}");
    }

    // --- Single-atom iteration at the acceptance parameters -------------
    let p = 0.75;
    let exps = ExponentSystem::symmetric(1, p).unwrap();
    let n = 32.0;
    let rho = 1.0;
    let spacing = rho / 16.0;
    let extent = 4.5 * n * rho + 2.0 * rho;
    let spec = GridSpec::fitted(1, extent, spacing).unwrap();
    let atom = oscillating_atom(spec, rho, p);
    let f = AtomicDecomposition::new(vec![(1.0, atom)], p).unwrap();
    let t0 = std::time::Instant::now();
    let res = uchiyama_factorize(&k, 2, &f, &exps, n, 3, 0.0, 16).unwrap();
    println!(
        "uchiyama n {n}: input_mass {:?} error_norms {:?} elapsed {:?}",
        res.input_mass,
        res.error_norms,
        t0.elapsed()
    );
    let mut prev = res.input_mass;
    for e in &res.error_norms {
        println!("  ratio {:.6}", e / prev);
        prev = *e;
    }
    println!(
        "  rounds sizes {:?} non_contraction {} budget_ok {}",
        res.rounds.iter().map(|r| r.len()).collect::<Vec<_>>(),
        res.non_contraction,
        res.triple_budget_ok
    );
    let fnorm = factorization_norm(&res);
    let fmixed = factorization_norm_mixed(&res);
    let anorm = atomic_quasinorm(&f);
    println!(
        "  factorization_norm {fnorm:?} mixed {fmixed:?} atomic_quasinorm {anorm:?} ratio {:?}",
        fnorm / anorm
    );
    let mut max_budget = 0.0f64;
    let mut max_sup_scaled = 0.0f64;
    for round in &res.rounds {
        for t in round {
            let prod = t.norm_g * t.norm_h1 * t.norm_h2;
            max_budget = max_budget.max(prod / n.powi(2));
            max_sup_scaled = max_sup_scaled.max(t.sup_error * n.powf(res.eps_used));
        }
    }
    println!("  max norm-product / n^2 = {max_budget:?}, max sup_error * n^eps = {max_sup_scaled:?}");

    // --- Commutator estimates against seminorms --------------------------
    let cspec = GridSpec::new(1, 6.0, 0.125).unwrap();
    let profiles: Vec<(&str, LipProfile)> = vec![
        ("abs-pow", LipProfile::AbsPow),
        ("dist-pow", LipProfile::DistPow { center: [0.3, 0.0] }),
        ("step", LipProfile::Step { width: 1.0 }),
    ];
    for (name, profile) in profiles {
        let b = LipFunction::new(profile, &exps, cspec, 200_000).unwrap();
        let t1 = std::time::Instant::now();
        let est = estimate_commutator_norm(&k, 2, &b, &exps, 24, 2024).unwrap();
        println!(
            "commutator {name}: estimate {est:?} seminorm {:?} ratio {:?} elapsed {:?}",
            b.seminorm_est(),
            est / b.seminorm_est(),
            t1.elapsed()
        );
    }
}
