//! Property tests for the structural invariants: Pinsker's inequality, tilt
//! composition, marginal chain consistency, conditional recombination, CGF
//! convexity and curvature signs, penalized-objective identities, and the
//! expected-score continuity modulus.

use proptest::prelude::*;

use scgap::dist::{
    kl_divergence, moments, tilt, total_variation_l1, AlphabetProduct, JointDist,
};
use scgap::relaxation::{penalized_cgf, penalized_score, Sign};
use scgap::score::{FixedTerm, MarginalTerm, ScoreSpec};
use scgap::wyner_ziv::{WzInstance, WzProblem};

fn space(sizes: &[usize]) -> AlphabetProduct {
    let names: Vec<String> = (0..sizes.len()).map(|i| format!("V{i}")).collect();
    AlphabetProduct::new(names, sizes.to_vec()).unwrap()
}

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Full-support mass vector of the given length.
fn mass_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, len).prop_map(normalize)
}

/// Mass vector that may carry exact zeros.
fn sparse_mass_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.0..1.0f64, len), 0..len as u32).prop_map(move |(mut raw, zeros)| {
        for i in 0..zeros as usize {
            let slot = (i * 7 + 3) % len;
            raw[slot] = 0.0;
        }
        if raw.iter().sum::<f64>() <= 0.0 {
            raw[0] = 1.0;
        }
        normalize(raw)
    })
}

fn wz_spec(xi: f64) -> (WzProblem, WzInstance) {
    let inst = WzInstance::binary_symmetric(0.25).unwrap();
    let problem = WzProblem::build(&inst, xi, None).unwrap();
    (problem, inst)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pinsker_l1_form(qm in sparse_mass_strategy(6), pm in mass_strategy(6)) {
        let sp = space(&[2, 3]);
        let q = JointDist::new(sp.clone(), qm).unwrap();
        let p = JointDist::new(sp, pm).unwrap();
        let kl = kl_divergence(&q, &p).unwrap();
        let l1 = total_variation_l1(&q, &p).unwrap();
        prop_assert!(kl >= 0.0);
        if kl.is_finite() {
            prop_assert!(l1 <= (2.0 * kl).sqrt() + 1e-12);
        }
    }

    #[test]
    fn kl_zero_iff_pointwise_equal(qm in sparse_mass_strategy(8), pm in mass_strategy(8)) {
        let sp = space(&[2, 2, 2]);
        let q = JointDist::new(sp.clone(), qm).unwrap();
        let p = JointDist::new(sp, pm).unwrap();
        let kl = kl_divergence(&q, &p).unwrap();
        let linf = q.mass().iter().zip(p.mass()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        if kl == 0.0 {
            prop_assert!(linf <= 1e-12);
        }
        if linf <= 1e-13 {
            prop_assert!(kl <= 1e-12);
        }
    }

    #[test]
    fn tilt_composes_additively(
        bm in mass_strategy(6),
        w in prop::collection::vec(-2.0..2.0f64, 6),
        s1 in -1.5..1.5f64,
        s2 in -1.5..1.5f64,
    ) {
        let sp = space(&[6]);
        let b = JointDist::new(sp, bm).unwrap();
        let two_step = tilt(&tilt(&b, &w, s1).unwrap(), &w, s2).unwrap();
        let one_step = tilt(&b, &w, s1 + s2).unwrap();
        for (a, c) in two_step.mass().iter().zip(one_step.mass()) {
            prop_assert!((a - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn marginal_chain_consistency(pm in sparse_mass_strategy(24)) {
        let sp = space(&[2, 3, 4]);
        let p = JointDist::new(sp, pm).unwrap();
        let m_bc = p.marginal(&[1, 2]).unwrap();
        let via_chain = m_bc.marginal(&[1]).unwrap();
        let direct = p.marginal(&[2]).unwrap();
        for (a, b) in via_chain.mass().iter().zip(direct.mass()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn conditional_recombines_to_marginal(pm in sparse_mass_strategy(12)) {
        let sp = space(&[3, 4]);
        let p = JointDist::new(sp.clone(), pm).unwrap();
        let cond = p.conditional(&[1], &[0]).unwrap();
        let giv = p.marginal(&[0]).unwrap();
        let joint = p.marginal(&[0, 1]).unwrap();
        for g in 0..3 {
            if let Some(row) = cond.row(g) {
                for t in 0..4 {
                    let recombined = giv.prob(g) * row[t];
                    prop_assert!((recombined - joint.prob(g * 4 + t)).abs() <= 1e-12);
                }
            } else {
                prop_assert!(giv.prob(g) == 0.0);
            }
        }
    }

    #[test]
    fn cgf_is_convex_in_tilt(pm in mass_strategy(16), l1 in -0.45..0.45f64, l2 in -0.45..0.45f64) {
        let (problem, _) = wz_spec(0.5);
        let p = JointDist::new(problem.space.clone(), pm).unwrap();
        let f = |l: f64| problem.score.cgf(&p, l).unwrap();
        let mid = f(0.5 * (l1 + l2));
        prop_assert!(mid <= 0.5 * (f(l1) + f(l2)) + 1e-9);
    }

    #[test]
    fn cgf_curvature_is_variance_like(pm in mass_strategy(16), lam in -0.4..0.4f64) {
        let (problem, _) = wz_spec(0.5);
        let p = JointDist::new(problem.space.clone(), pm).unwrap();
        let (_, d2, _) = problem.score.cgf_derivatives(&p, lam).unwrap();
        prop_assert!(d2 >= 0.0);
        if d2 <= 1e-9 {
            // Zero curvature forces a constant score on the support.
            let table = problem.score.score_table(&p).unwrap();
            let m = moments(&p, &table, 2).unwrap();
            prop_assert!(m.variance.unwrap() <= 1e-7);
        }
    }

    #[test]
    fn penalized_objectives_collapse_on_constrained_members(
        seed in 0u64..1000,
        alpha in 0.0..50.0f64,
    ) {
        use rand::SeedableRng;
        let (problem, inst) = wz_spec(0.25);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let q = scgap::sample::wz_constrained(&inst, None, &mut rng).unwrap();
        let base = problem.score.expected_score(&q).unwrap();
        let plus = penalized_score(&problem.relax, &problem.score, &q, alpha, Sign::Plus).unwrap();
        let minus = penalized_score(&problem.relax, &problem.score, &q, alpha, Sign::Minus).unwrap();
        prop_assert!((plus - base).abs() <= 1e-9);
        prop_assert!((minus - base).abs() <= 1e-9);
    }

    #[test]
    fn penalized_cgf_is_convex_in_tilt(qm in mass_strategy(16), t in 0.0..1.0f64, s in 0.0..1.0f64) {
        let (problem, _) = wz_spec(0.5);
        let q = JointDist::new(problem.space.clone(), qm).unwrap();
        let alpha = 3.0;
        let hi = 1.0 / (alpha + problem.score.eta_sum().min(problem.relax.kappa_sum()));
        let t1 = t * hi;
        let t2 = s * hi;
        let f = |th: f64| penalized_cgf(&problem.relax, &problem.score, &q, th, alpha).unwrap();
        let mid = f(0.5 * (t1 + t2));
        prop_assert!(mid <= 0.5 * (f(t1) + f(t2)) + 1e-9);
    }

    #[test]
    fn expected_score_continuity_modulus(
        pm in mass_strategy(16),
        dir in prop::collection::vec(-1.0..1.0f64, 16),
        scale in 1e-4..0.01f64,
    ) {
        // Perturb within L1 distance `scale` and compare against the modulus.
        let (problem, _) = wz_spec(0.5);
        let p = JointDist::new(problem.space.clone(), pm).unwrap();
        let mean: f64 = dir.iter().sum::<f64>() / 16.0;
        let mut shifted: Vec<f64> = p
            .mass()
            .iter()
            .zip(&dir)
            .map(|(&m, &d)| m + scale * (d - mean) / 16.0)
            .collect();
        for v in &mut shifted {
            if *v < 1e-9 {
                *v = 1e-9;
            }
        }
        let shifted = normalize(shifted);
        let q = JointDist::new(problem.space.clone(), shifted).unwrap();
        let delta = total_variation_l1(&q, &p).unwrap();
        if delta > 1e-12 && delta <= 0.01 {
            let a = problem.score.expected_score(&p).unwrap();
            let b = problem.score.expected_score(&q).unwrap();
            let modulus = problem.score.k_prime()
                * delta
                * (std::f64::consts::E * 16.0 / delta).ln();
            prop_assert!((a - b).abs() <= modulus + 1e-12);
        }
    }

    #[test]
    fn score_spec_weights_are_validated(coeff in -10.0..0.0f64) {
        let sp = space(&[2, 2]);
        let bad = ScoreSpec::new(
            sp.clone(),
            vec![],
            vec![MarginalTerm { coeff, vars: vec![0] }],
            vec![],
        );
        prop_assert!(bad.is_err());
        let bad = ScoreSpec::new(
            sp,
            vec![FixedTerm { coeff: 1.0, table: vec![0.0, -1.0, 0.0, 0.0] }],
            vec![],
            vec![],
        );
        prop_assert!(bad.is_err());
    }
}
