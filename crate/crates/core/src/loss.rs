//! Margin-based contrastive loss over cosine similarity.
//!
//! For a pair of embeddings `(u, v)` with pair label `y`:
//!
//! * same label (`y = 1`): `loss = 1 - cos(u, v)`
//! * different labels (`y = -1`): `loss = max(0, cos(u, v) - m)`
//!
//! with margin `m ∈ [0, 1]`.  Same-label pairs are pulled toward cosine 1;
//! different-label pairs are pushed below the margin, beyond which they
//! contribute nothing.  The Euclidean distance [`energy`] is kept as a
//! diagnostic only; it plays no role in training.
//!
//! All arithmetic is `f64`, and every function here is symmetric in its
//! two embeddings down to the last bit: evaluating a pair as `(u, v)` or
//! `(v, u)` produces bitwise-identical losses and mirrored gradients,
//! which the trainer relies on for its reproducibility guarantees.

use crate::corpus::PairLabel;
use crate::error::{Error, Result};
use crate::tensor::{dot, l2_norm};

/// Norms below this are treated as zero: the cosine of a degenerate pair
/// is defined as 0 and its gradient vanishes.
pub const NORM_EPS: f64 = 1e-12;

/// Cosine similarity with degenerate-vector guard.
///
/// Returns `u·v / (max(‖u‖, ε) · max(‖v‖, ε))`, which is exactly 0
/// whenever either norm falls below [`NORM_EPS`].
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "cosine of vectors with different lengths");
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu < NORM_EPS || nv < NORM_EPS {
        return 0.0;
    }
    dot(u, v) / (nu * nv)
}

/// Euclidean distance `‖u - v‖` (diagnostic pair energy).
pub fn energy(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "energy of vectors with different lengths");
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Reject margins outside the valid `[0, 1]` range.
pub fn check_margin(m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::MarginOutOfRange(m));
    }
    Ok(())
}

/// Contrastive loss of one pair.
pub fn pair_loss(u: &[f64], v: &[f64], y: PairLabel, m: f64) -> Result<f64> {
    check_margin(m)?;
    let c = cosine(u, v);
    Ok(match y {
        PairLabel::Same => 1.0 - c,
        PairLabel::Different => (c - m).max(0.0),
    })
}

/// Loss plus gradients with respect to both embeddings.
///
/// The gradient is zero when the hinge is inactive (different labels and
/// `cos ≤ m`) and when either embedding is degenerate (the guarded cosine
/// is constant there).
pub fn pair_loss_grad(
    u: &[f64],
    v: &[f64],
    y: PairLabel,
    m: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_margin(m)?;
    assert_eq!(u.len(), v.len(), "pair of vectors with different lengths");
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu < NORM_EPS || nv < NORM_EPS {
        let loss = match y {
            PairLabel::Same => 1.0,
            PairLabel::Different => (0.0f64 - m).max(0.0),
        };
        return Ok((loss, vec![0.0; u.len()], vec![0.0; v.len()]));
    }
    let c = dot(u, v) / (nu * nv);
    let (loss, scale) = match y {
        // d(1 - cos) = -dcos
        PairLabel::Same => (1.0 - c, -1.0),
        // d max(0, cos - m) = dcos if the hinge is active, else 0
        PairLabel::Different => {
            if c > m {
                (c - m, 1.0)
            } else {
                ((c - m).max(0.0), 0.0)
            }
        }
    };
    if scale == 0.0 {
        return Ok((loss, vec![0.0; u.len()], vec![0.0; v.len()]));
    }
    // ∂cos/∂u_i = v_i/(‖u‖‖v‖) − cos·u_i/‖u‖².  The two sides use the
    // same mirrored expression so that swapping (u, v) swaps the gradients
    // bit-for-bit.
    let grad_side = |this: &[f64], other: &[f64], n_this: f64, n_other: f64| -> Vec<f64> {
        this.iter()
            .zip(other)
            .map(|(&ti, &oi)| scale * (oi / (n_this * n_other) - c * ti / (n_this * n_this)))
            .collect()
    };
    let gu = grad_side(u, v, nu, nv);
    let gv = grad_side(v, u, nv, nu);
    Ok((loss, gu, gv))
}

/// Sum and mean of the contrastive loss over a batch of pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub sum: f64,
    pub mean: f64,
    pub count: usize,
}

/// Accumulate [`pair_loss`] over `items` in iteration order.
pub fn batch_loss<'a, I>(items: I, m: f64) -> Result<BatchLoss>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64], PairLabel)>,
{
    check_margin(m)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (u, v, y) in items {
        sum += pair_loss(u, v, y, m)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(BatchLoss {
        sum,
        mean: sum / count as f64,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const E1: [f64; 3] = [1.0, 0.0, 0.0];
    const E2: [f64; 3] = [0.0, 1.0, 0.0];

    #[test]
    fn the_four_canonical_cases_are_exact() {
        let m = 0.5;
        // identical directions
        assert_eq!(pair_loss(&E1, &E1, PairLabel::Same, m).unwrap(), 0.0);
        assert_eq!(pair_loss(&E1, &E1, PairLabel::Different, m).unwrap(), 0.5);
        // orthogonal directions
        assert_eq!(pair_loss(&E1, &E2, PairLabel::Same, m).unwrap(), 1.0);
        assert_eq!(pair_loss(&E1, &E2, PairLabel::Different, m).unwrap(), 0.0);
    }

    #[test]
    fn margin_endpoints_behave() {
        // m = 0: any positive cosine of a different-label pair is penalized.
        assert_eq!(pair_loss(&E1, &E1, PairLabel::Different, 0.0).unwrap(), 1.0);
        // m = 1: the hinge never activates (cos ≤ 1 always).
        assert_eq!(pair_loss(&E1, &E1, PairLabel::Different, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn margins_outside_unit_interval_are_rejected() {
        assert!(matches!(
            pair_loss(&E1, &E2, PairLabel::Same, -0.1),
            Err(Error::MarginOutOfRange(_))
        ));
        assert!(matches!(
            pair_loss(&E1, &E2, PairLabel::Same, 1.1),
            Err(Error::MarginOutOfRange(_))
        ));
    }

    #[test]
    fn zero_vectors_have_zero_cosine_and_zero_gradient() {
        let z = [0.0, 0.0, 0.0];
        assert_eq!(cosine(&z, &E1), 0.0);
        let (loss, gu, gv) = pair_loss_grad(&z, &E1, PairLabel::Same, 0.5).unwrap();
        assert_eq!(loss, 1.0);
        assert!(gu.iter().chain(&gv).all(|&g| g == 0.0));
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        let (loss, gu, gv) = pair_loss_grad(&E1, &E2, PairLabel::Different, 0.5).unwrap();
        assert_eq!(loss, 0.0);
        assert!(gu.iter().chain(&gv).all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_is_stationary_at_perfect_alignment() {
        let u = [0.3, -1.2, 0.8, 2.0];
        let (_, gu, gv) = pair_loss_grad(&u, &u, PairLabel::Same, 0.5).unwrap();
        for g in gu.iter().chain(&gv) {
            assert!(g.abs() < 1e-12, "gradient {g} not stationary at u = v");
        }
    }

    #[test]
    fn swapping_the_pair_swaps_gradients_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for trial in 0..50 {
            let u: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            for y in [PairLabel::Same, PairLabel::Different] {
                let (l1, gu1, gv1) = pair_loss_grad(&u, &v, y, 0.3).unwrap();
                let (l2, gu2, gv2) = pair_loss_grad(&v, &u, y, 0.3).unwrap();
                assert_eq!(l1.to_bits(), l2.to_bits(), "trial {trial}");
                assert_eq!(gu1, gv2, "trial {trial}");
                assert_eq!(gv1, gu2, "trial {trial}");
            }
        }
    }

    /// Central finite differences of the scalar loss, the independent
    /// oracle the analytic gradient is frozen against.
    fn numeric_grad(u: &[f64], v: &[f64], y: PairLabel, m: f64, eps: f64) -> (Vec<f64>, Vec<f64>) {
        let mut gu = vec![0.0; u.len()];
        let mut gv = vec![0.0; v.len()];
        let mut pu = u.to_vec();
        let mut pv = v.to_vec();
        for i in 0..u.len() {
            pu[i] = u[i] + eps;
            let plus = pair_loss(&pu, v, y, m).unwrap();
            pu[i] = u[i] - eps;
            let minus = pair_loss(&pu, v, y, m).unwrap();
            pu[i] = u[i];
            gu[i] = (plus - minus) / (2.0 * eps);
        }
        for i in 0..v.len() {
            pv[i] = v[i] + eps;
            let plus = pair_loss(u, &pv, y, m).unwrap();
            pv[i] = v[i] - eps;
            let minus = pair_loss(u, &pv, y, m).unwrap();
            pv[i] = v[i];
            gv[i] = (plus - minus) / (2.0 * eps);
        }
        (gu, gv)
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-3))
            .fold(0.0, f64::max)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let eps = 1e-6;
        for trial in 0..40 {
            let dim = rng.random_range(2..10);
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y = if trial % 2 == 0 {
                PairLabel::Same
            } else {
                PairLabel::Different
            };
            // Keep a comfortable distance from the hinge kink at cos = m so
            // the ±eps probes stay on one side of it.
            let c = cosine(&u, &v);
            let m = if (c - 0.5).abs() < 0.05 { 0.8 } else { 0.5 };
            let (_, gu, gv) = pair_loss_grad(&u, &v, y, m).unwrap();
            let (nu, nv) = numeric_grad(&u, &v, y, m, eps);
            let err = max_rel_err(&gu, &nu).max(max_rel_err(&gv, &nv));
            assert!(
                err < 1e-6,
                "trial {trial}: max relative error {err:.3e} exceeds 1e-6"
            );
        }
    }

    #[test]
    fn batch_loss_equals_independent_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pairs: Vec<(Vec<f64>, Vec<f64>, PairLabel)> = (0..10)
            .map(|i| {
                let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = if i % 3 == 0 {
                    PairLabel::Different
                } else {
                    PairLabel::Same
                };
                (u, v, y)
            })
            .collect();
        let batch = batch_loss(
            pairs
                .iter()
                .map(|(u, v, y)| (u.as_slice(), v.as_slice(), *y)),
            0.5,
        )
        .unwrap();
        let mut expect = 0.0;
        for (u, v, y) in &pairs {
            expect += pair_loss(u, v, *y, 0.5).unwrap();
        }
        assert_eq!(batch.sum, expect);
        assert_eq!(batch.count, 10);
        assert_eq!(batch.mean, expect / 10.0);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let empty: Vec<(&[f64], &[f64], PairLabel)> = Vec::new();
        assert!(matches!(batch_loss(empty, 0.5), Err(Error::EmptyBatch)));
    }

    proptest! {
        #[test]
        fn cosine_is_invariant_under_positive_scaling(
            u in prop::collection::vec(-10.0f64..10.0, 4),
            v in prop::collection::vec(-10.0f64..10.0, 4),
            alpha in 0.01f64..100.0,
        ) {
            let su: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            let a = cosine(&u, &v);
            let b = cosine(&su, &v);
            prop_assert!((a - b).abs() < 1e-9, "cos {a} vs scaled {b}");
        }

        #[test]
        fn cosine_is_bounded(
            u in prop::collection::vec(-10.0f64..10.0, 5),
            v in prop::collection::vec(-10.0f64..10.0, 5),
        ) {
            let c = cosine(&u, &v);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
        }

        #[test]
        fn pair_loss_is_non_negative(
            u in prop::collection::vec(-10.0f64..10.0, 5),
            v in prop::collection::vec(-10.0f64..10.0, 5),
            m in 0.0f64..=1.0,
        ) {
            for y in [PairLabel::Same, PairLabel::Different] {
                let l = pair_loss(&u, &v, y, m).unwrap();
                prop_assert!(l >= 0.0, "loss {l} negative for {y:?}");
            }
        }

        #[test]
        fn energy_is_symmetric_and_triangular(
            u in prop::collection::vec(-10.0f64..10.0, 4),
            v in prop::collection::vec(-10.0f64..10.0, 4),
            w in prop::collection::vec(-10.0f64..10.0, 4),
        ) {
            prop_assert!((energy(&u, &v) - energy(&v, &u)).abs() < 1e-12);
            prop_assert!(energy(&u, &w) <= energy(&u, &v) + energy(&v, &w) + 1e-9);
        }
    }
}
