use imagnoise::distributional::{
    comb_from_moments, comb_to_distribution, laurent_truncated, pair_exponential, poisson_transform, GridDensity,
};
use imagnoise::genfunc::{eval_gf, general_rhs_residual, gf_from_distribution};
use imagnoise::io::{fmt_f64, parse_f64};
use imagnoise::moments::{solve_closed, FactorialMoments};
use imagnoise::reaction::{
    build_generator, factorial_moments, master_evolve, parity, ssa_snapshots, CountDistribution, ReactionChannel,
    ReactionSpec,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn distribution() -> impl Strategy<Value = CountDistribution> {
    prop::collection::vec(0.0f64..1.0, 1..12).prop_filter_map("nonzero mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| CountDistribution::new(w.iter().map(|x| x / total).collect(), 0.0).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_decimal_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back = parse_f64(&fmt_f64(x)).unwrap().unwrap();
        prop_assert!(back == x);
    }

    #[test]
    fn comb_reproduces_taylor_expansion(d in distribution()) {
        // G(x) = sum_n M_n (x - 1)^n / n!
        let m = factorial_moments(&d, d.n_max());
        let comb = comb_from_moments(&m);
        let back = comb_to_distribution(&comb).unwrap();
        for (n, p) in d.probs().iter().enumerate() {
            prop_assert!((back.probs()[n] - p).abs() < 1e-9, "n={} {} vs {}", n, back.probs()[n], p);
        }
        let g = gf_from_distribution(&d);
        for x in [-1.0, -0.3, 0.0, 0.6, 1.0] {
            prop_assert!((pair_exponential(&comb, x) - eval_gf(&g, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn master_conserves_mass_and_parity(d in distribution(), t in 0.0f64..3.0, rate in 0.1f64..3.0) {
        let spec = ReactionSpec::annihilation(rate).unwrap();
        let n_max = d.n_max().max(2);
        let gen = build_generator(&spec, n_max).unwrap();
        let out = master_evolve(&gen, &d.padded(n_max), t, 1e-12).unwrap();
        prop_assert!((out.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!((parity(&out) - parity(&d)).abs() < 1e-10);
        prop_assert!(out.probs().iter().all(|&p| p >= -1e-12));
    }

    #[test]
    fn closed_moments_match_master(n0 in 0usize..10, t in 0.0f64..2.0) {
        let spec = ReactionSpec::annihilation(1.0).unwrap();
        let n_max = n0.max(2);
        let gen = build_generator(&spec, n_max).unwrap();
        let p0 = CountDistribution::point_mass(n0, n_max).unwrap();
        let out = master_evolve(&gen, &p0, t, 1e-13).unwrap();
        let fm = factorial_moments(&out, n0);
        let cl = solve_closed(&FactorialMoments::point_mass(n0 as u64, 1.0), t);
        for m in 0..=n0 {
            prop_assert!((fm.get(m) - cl.get(m)).abs() < 1e-9 * (1.0 + cl.get(m)));
        }
    }

    #[test]
    fn general_identity_on_mixtures(d in distribution(), j in 1u32..5, l in 0u32..4, rate in 0.1f64..2.0) {
        prop_assume!(l < j);
        let ch = ReactionChannel::new(j, l, rate).unwrap();
        prop_assert!(general_rhs_residual(&ch, &d).unwrap() < 1e-10);
    }

    #[test]
    fn poisson_transform_is_an_isometry(coeffs in prop::collection::vec(0.0f64..1.0, 2..8)) {
        // piecewise-linear density through the coefficients on [0, 2k], zero beyond
        let k = coeffs.len();
        let f = |x: f64| {
            let u = x / 2.0;
            let i = u.floor() as usize;
            if i + 1 >= k { return 0.0; }
            let w = u - i as f64;
            coeffs[i] * (1.0 - w) + coeffs[i + 1] * w
        };
        let phi_max = 2.0 * k as f64;
        let g = GridDensity::from_fn(phi_max, 40 * k, f).unwrap();
        let tr = poisson_transform(&g, (phi_max + 10.0 * phi_max.sqrt() + 40.0) as usize).unwrap();
        prop_assert!((tr.output_l1 - tr.input_l1).abs() < 1e-10);
    }

    #[test]
    fn laurent_remainder_bounds_the_truncation(a in -2.0f64..2.0, n in 1usize..25, scale in 1.2f64..4.0, arg in 0.0f64..6.28) {
        // moments a^n belong to a point mass at a, whose Cauchy function is (1/2 pi i)/(a - phi)
        let radius = a.abs().max(0.1);
        let phi = Complex64::from_polar(scale * radius, arg);
        let m = FactorialMoments::new((0..40).map(|k| a.powi(k)).collect(), 1.0, 0.0);
        let v = laurent_truncated(&m, n, radius).unwrap().eval(phi).unwrap();
        let exact = 1.0 / (Complex64::new(0.0, 2.0 * std::f64::consts::PI) * (a - phi));
        prop_assert!((v.value - exact).norm() <= v.remainder_bound * (1.0 + 1e-9) + 1e-15);
    }
}

#[test]
fn ssa_is_reproducible_across_thread_counts() {
    let spec = ReactionSpec::annihilation(1.0).unwrap();
    let init = CountDistribution::point_mass(10, 10).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ssa_snapshots(&spec, &init, &[0.1, 1.0], 500, 99, false).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.snapshots, b.snapshots);
}
