mod common;

use common::{eval_polyline, integral_exact, lipschitz_polyline, mcshane, random_knots};
use coxmeas::{tent_transform, tent_transform_with_floor, SplineHazard};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(tau: f64) -> impl Iterator<Item = f64> {
    (0..=400).map(move |i| tau * i as f64 / 400.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tent_equals_lower_envelope(seed in any::<u64>(), floor in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 0.2 + 3.0 * rng.random::<f64>();
        let (ts, vs) = lipschitz_polyline(&mut rng, 1.0, l, 6);
        let knots = random_knots(&mut rng, 1.0, 5);
        let values: Vec<f64> = knots.iter().map(|&t| eval_polyline(&ts, &vs, t).max(floor)).collect();
        let h = tent_transform_with_floor(&knots, &values, l, 1.0, floor).unwrap();
        for t in dense(1.0).chain(knots.iter().copied()) {
            let want = mcshane(&knots, &values, l, floor, t);
            prop_assert!((h.eval(t).unwrap() - want).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn tent_is_below_every_lipschitz_interpolant_and_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 0.5 + 2.0 * rng.random::<f64>();
        let (ts, vs) = lipschitz_polyline(&mut rng, 2.0, l, 8);
        let knots = random_knots(&mut rng, 2.0, 4);
        let values: Vec<f64> = knots.iter().map(|&t| eval_polyline(&ts, &vs, t)).collect();
        let h = tent_transform(&knots, &values, l, 2.0).unwrap();
        for t in dense(2.0) {
            prop_assert!(h.eval(t).unwrap() <= eval_polyline(&ts, &vs, t) + 1e-12);
        }
        // resampling the tent at a superset of its knots gives it back
        let mut more = knots.clone();
        more.extend(random_knots(&mut rng, 2.0, 6));
        more.sort_by(f64::total_cmp);
        more.dedup();
        let again: Vec<f64> = more.iter().map(|&t| h.eval(t).unwrap()).collect();
        let h2 = tent_transform(&more, &again, l, 2.0).unwrap();
        for t in dense(2.0) {
            prop_assert!((h.eval(t).unwrap() - h2.eval(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_matches_piecewise_trapezoids(seed in any::<u64>(), floor in 0.0f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 0.3 + 2.0 * rng.random::<f64>();
        let knots = random_knots(&mut rng, 1.5, 4);
        let (ts, vs) = lipschitz_polyline(&mut rng, 1.5, l, 5);
        let values: Vec<f64> = knots.iter().map(|&t| eval_polyline(&ts, &vs, t).max(floor)).collect();
        let h = tent_transform_with_floor(&knots, &values, l, 1.5, floor).unwrap();
        for y in [0.0, 0.1, 0.77, 1.2, 1.5] {
            let want = integral_exact(&knots, &values, l, floor, y);
            prop_assert!((h.cumulative(y).unwrap() - want).abs() < 1e-12);
        }
        prop_assert!(h.check_membership().is_ok());
    }

    #[test]
    fn interp_is_exact_at_knots_and_survives_json(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ts, vs) = lipschitz_polyline(&mut rng, 1.0, 1.0, 5);
        let h = SplineHazard::interp(1.0, 1.0, &ts, &vs).unwrap();
        for (t, v) in ts.iter().zip(&vs) {
            prop_assert_eq!(h.eval(*t).unwrap(), *v);
        }
        let back: SplineHazard = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        for t in dense(1.0) {
            prop_assert_eq!(back.eval(t).unwrap(), h.eval(t).unwrap());
        }
    }

    #[test]
    fn inverse_cumulative_inverts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let knots = random_knots(&mut rng, 1.0, 4);
        let (ts, vs) = lipschitz_polyline(&mut rng, 1.0, 0.5, 4);
        let values: Vec<f64> = knots.iter().map(|&t| 0.6 + eval_polyline(&ts, &vs, t)).collect();
        let h = tent_transform(&knots, &values, 0.5, 1.0).unwrap();
        let total = h.cumulative(1.0).unwrap();
        let target = total * rng.random::<f64>();
        let t = h.inverse_cumulative(target).unwrap().unwrap();
        prop_assert!((h.cumulative(t).unwrap() - target).abs() < 1e-12);
        prop_assert!(h.inverse_cumulative(total * 1.01).unwrap().is_none());
    }
}

#[test]
fn tent_cumulative_over_two_unit_nodes() {
    let h = tent_transform(&[0.0, 1.0], &[1.0, 1.0], 1.0, 1.0).unwrap();
    assert!((h.cumulative(1.0).unwrap() - 0.75).abs() < 1e-15);
    assert_eq!(h.cumulative(0.0).unwrap(), 0.0);
    let c = SplineHazard::constant(1.0, 2.0, 0.0).unwrap();
    assert!((c.cumulative(0.3).unwrap() - 0.6).abs() < 1e-15);
}
