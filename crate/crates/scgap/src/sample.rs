//! Seeded random distribution samplers for verification suites and tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{AlphabetProduct, JointDist};
use crate::error::Result;
use crate::wyner_ziv::WzInstance;

/// A flat Dirichlet(1) draw: uniform over the simplex, full support.
pub fn simplex(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-300)).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

/// A full-support random joint distribution on a product space.
pub fn joint(space: &AlphabetProduct, rng: &mut ChaCha8Rng) -> JointDist {
    JointDist::new(space.clone(), simplex(space.total(), rng))
        .expect("simplex draw is a valid mass")
}

/// A random member of the constrained family of an instance, composed from
/// random factor rows so the fixed marginal and both Markov chains hold by
/// construction.
pub fn wz_constrained(
    instance: &WzInstance,
    u_card: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<JointDist> {
    let u = u_card.unwrap_or(instance.u_card_tilde);
    let x = instance.x_card();
    let y = instance.y_card();
    let z = instance.z_card();
    let rows_ux: Vec<Vec<f64>> = (0..x).map(|_| simplex(u, rng)).collect();
    let rows_zuy: Vec<Vec<f64>> = (0..u * y).map(|_| simplex(z, rng)).collect();
    crate::wyner_ziv::compose_joint(&instance.space(u)?, instance.p_xy(), &rows_ux, &rows_zuy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn joint_draws_are_full_support_and_seeded() {
        let space = AlphabetProduct::new(vec!["A", "B"], vec![3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = joint(&space, &mut rng);
        assert!(a.mass().iter().all(|&m| m > 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = joint(&space, &mut rng);
        assert_eq!(a.mass(), b.mass());
    }

    #[test]
    fn constrained_draws_pass_predicates() {
        let inst = WzInstance::binary_symmetric(0.25).unwrap();
        let problem = crate::wyner_ziv::WzProblem::build(&inst, 0.5, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let q = wz_constrained(&inst, None, &mut rng).unwrap();
            assert!(problem.constrained.max_residual(&q).unwrap() < 1e-9);
        }
    }
}
