//! Cross-module flows: factorize, serialize, pair against a symbol; plus a
//! two-dimensional smoke pass over the same machinery.

use hpfact::atoms::{
    atomic_quasinorm_p, two_bump_decompose, validate_atom, Atom, AtomicDecomposition,
    TwoBumpFunction,
};
use hpfact::commutator::{
    duality_pairing_check, lip_lower_bound_via_factorization, LipFunction, LipProfile,
};
use hpfact::factor::{uchiyama_factorize, ExponentSystem};
use hpfact::grid::{integrate, Ball, GridFunction, GridSpec};
use hpfact::kernel::{
    builtin_riesz_kernel, check_homogeneity, check_size_condition, check_smoothness_condition,
    SeparatedConfig,
};

fn oscillating_atom(spec: GridSpec, center: f64, radius: f64, p: f64) -> Atom {
    let ball = Ball::new([center, 0.0], radius);
    let ind = GridFunction::indicator(spec, &ball).unwrap();
    let raw = GridFunction::from_fn(spec, ind.support_box().unwrap(), move |x| {
        if ball.contains(x, 1) {
            (std::f64::consts::PI * (x[0] - center) / radius).sin()
        } else {
            0.0
        }
    });
    let gamma = raw.sup_norm() * ball.volume(1).powf(1.0 / p);
    Atom::new(raw.scale(1.0 / gamma), ball, p).unwrap()
}

#[test]
fn factorize_serialize_and_pair_against_a_symbol() {
    let p = 0.75;
    let exps = ExponentSystem::symmetric(1, p).unwrap();
    let n = 16.0;
    let spec = GridSpec::fitted(1, 4.5 * n + 4.0, 1.0 / 8.0).unwrap();
    let k = builtin_riesz_kernel(1, 1).unwrap();
    // A two-atom input: the pipeline must thread every atom through its own
    // displaced geometry.
    let f = AtomicDecomposition::new(
        vec![
            (0.8, oscillating_atom(spec, 0.0, 1.0, p)),
            (-0.4, oscillating_atom(spec, 2.5, 1.0, p)),
        ],
        p,
    )
    .unwrap();
    let res = uchiyama_factorize(&k, 2, &f, &exps, n, 2, 0.0, 8).unwrap();
    assert_eq!(res.rounds[0].len(), 2);
    assert!(!res.rounds[1].is_empty());
    assert_eq!(res.error_norms.len(), 2);
    assert!(res.error_norms[1] < res.error_norms[0]);
    assert!(res.triple_budget_ok);
    let remainder_mass = atomic_quasinorm_p(&res.final_error);
    assert!(
        (remainder_mass - res.error_norms[1]).abs() <= 1e-12 * res.error_norms[1],
        "remainder mass {remainder_mass} vs recorded {}",
        res.error_norms[1]
    );

    // Lossless container round trip.
    let container = res.to_container();
    let json = serde_json::to_string(&container).unwrap();
    let back: hpfact::factor::FactorizationContainer = serde_json::from_str(&json).unwrap();
    assert_eq!(back.format_version, container.format_version);
    assert_eq!(back.error_norms, container.error_norms);
    assert_eq!(back.input_mass, container.input_mass);
    assert_eq!(back.rounds.len(), container.rounds.len());
    for (a, b) in back.rounds.iter().flatten().zip(container.rounds.iter().flatten()) {
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.denominator, b.denominator);
        assert_eq!(a.sup_error, b.sup_error);
    }

    // The factored series pairs against a Hoelder symbol below its chain
    // bound, and the remainder pairing is consistent with the direct one.
    let b = LipFunction::new(LipProfile::AbsPow, &exps, spec, 2000).unwrap();
    let rep = lip_lower_bound_via_factorization(&b, &res, &k).unwrap();
    assert!(rep.chain_bound.is_finite() && rep.chain_bound > 0.0);
    assert!(rep.pairing <= rep.chain_bound * (1.0 + 1e-9) + 1e-9);
    let direct: f64 = f
        .terms()
        .iter()
        .map(|(lam, a)| lam * integrate(&b.func().multiply(a.func()).unwrap()))
        .sum();
    let recovered = {
        let mut signed = 0.0;
        for round in &res.rounds {
            for t in round {
                let b_here = b.materialize(t.g.spec());
                let factor = hpfact::factor::pi(&k, t.slot, &t.g, &t.h1, &t.h2).unwrap();
                signed += t.lambda * hpfact::grid::inner_product(&b_here, &factor).unwrap();
            }
        }
        signed + rep.remainder_pairing
    };
    // Across rounds each child atom is transplanted to a coarser lattice by
    // block means; that preserves integrals but shifts the pairing against a
    // Hoelder symbol by its modulus over one coarse cell per child.  The
    // recovered series therefore tracks the direct pairing only to a few
    // percent here (one-round truncations are exact to roundoff; that case
    // is covered by the symbol-pairing unit tests).
    assert!(
        (recovered - direct).abs() <= 0.1 * direct.abs(),
        "factored-series pairing {recovered} vs direct {direct}"
    );
}

#[test]
fn two_dimensional_smoke_pass() {
    let p = 0.75;
    let n = 8.0;
    let rho = 0.5;

    // Kernel certification in two dimensions.
    let k = builtin_riesz_kernel(2, 1).unwrap();
    let size = check_size_condition(&k, 4000, 11);
    assert!(size.passed, "size scan: {} vs declared {}", size.a_measured, size.declared_a);
    let smooth = check_smoothness_condition(&k, 4000, 11);
    assert!(smooth.passed && !smooth.monotone_growth);
    let cfg = SeparatedConfig::axis_aligned(2, [0.0, 0.0], rho, n).unwrap();
    let hom = check_homogeneity(&k, &cfg, 2000, 11);
    assert!(hom.passed, "homogeneity lower ratio {}", hom.lower_ratio);

    // Two-bump decomposition on a planar pair.
    let spec = GridSpec::fitted(2, 4.5 * n * rho + 2.5 * rho, rho / 4.0).unwrap();
    let step = n * rho / 2f64.sqrt();
    let b1 = Ball::new([0.0, 0.0], rho);
    let b2 = Ball::new([step, step], rho);
    let i1 = GridFunction::indicator(spec, &b1).unwrap();
    let i2 = GridFunction::indicator(spec, &b2).unwrap();
    let kappa = integrate(&i1) / integrate(&i2);
    let f = i1.lin_comb(1.0, &i2, -kappa).unwrap();
    let tb = TwoBumpFunction::new(f, b1, b2, 1.0, kappa).unwrap();
    let d = two_bump_decompose(&tb, p).unwrap();
    assert!(!d.decomposition.is_empty());
    for (_, atom) in d.decomposition.terms() {
        assert!(validate_atom(atom.func(), atom.ball(), p, 1e-8).passed);
    }

    // One factorization round through the full 2-D quadrature path.
    let exps = ExponentSystem::symmetric(2, p).unwrap();
    let ball = Ball::new([0.0, 0.0], rho);
    let ind = GridFunction::indicator(spec, &ball).unwrap();
    let raw = GridFunction::from_fn(spec, ind.support_box().unwrap(), move |x| {
        if ball.contains(x, 2) {
            x[0] - x[1]
        } else {
            0.0
        }
    });
    let gamma = raw.sup_norm() * ball.volume(2).powf(1.0 / p);
    let atom = Atom::new(raw.scale(1.0 / gamma), ball, p).unwrap();
    let f = AtomicDecomposition::new(vec![(1.0, atom)], p).unwrap();
    let res = uchiyama_factorize(&k, 2, &f, &exps, n, 1, 0.0, 4).unwrap();
    assert_eq!(res.rounds[0].len(), 1);
    assert!(res.error_norms[0].is_finite() && res.error_norms[0] > 0.0);
    for (_, a) in res.final_error.terms() {
        assert!(validate_atom(a.func(), a.ball(), p, 1e-8).passed);
    }

    // Duality stays transpose-exact in two dimensions.
    let small = GridSpec::new(2, 4.0, 0.25).unwrap();
    let mk = |cx: f64, cy: f64| {
        let ball = Ball::new([cx, cy], 0.7);
        let ind = GridFunction::indicator(small, &ball).unwrap();
        GridFunction::from_fn(small, ind.support_box().unwrap(), move |x| {
            if ball.contains(x, 2) {
                (x[0] + 0.7 * x[1]).cos() + 0.3
            } else {
                0.0
            }
        })
    };
    let g = mk(0.0, 0.0);
    let h1 = mk(-2.4, 1.8);
    let h2 = mk(2.4, -1.8);
    let b = LipFunction::new(LipProfile::AbsPow, &exps, small, 2000).unwrap();
    for l in [1, 2] {
        let rep = duality_pairing_check(&k, l, &b, &g, &h1, &h2).unwrap();
        assert!(rep.lhs.abs() > 0.0);
        assert!(rep.rel_err <= 1e-10, "2-D duality slot {l}: rel_err {}", rep.rel_err);
    }
}
