//! Property tests over randomized inputs.

use dms_core::channel::{ErrorControlConfig, Protocol, RmaxMode};
use dms_core::filter::{acceptance_factor, expectation_thresholds};
use dms_core::optimizer::round_lengths;
use dms_core::source::zipf_pmf;
use dms_core::value::{attenuation_factor, choquet_weights, sugeno_lambda, LinkValues};
use proptest::prelude::*;

proptest! {
    /// Subset weights from the Sugeno parameter always telescope to one,
    /// whenever an admissible parameter exists for the weight vector.
    #[test]
    fn choquet_weights_telescope(weights in prop::collection::vec(0.02f64..1.0, 2..=8)) {
        if let Ok(lambda) = sugeno_lambda(&weights) {
            let u = choquet_weights(&weights, lambda).unwrap();
            prop_assert!((u.last().unwrap() - 1.0).abs() <= 1e-8);
            for w in u.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    #[test]
    fn zipf_is_a_sorted_distribution(n in 1usize..200, s in 0.0f64..3.0) {
        let p = zipf_pmf(n, s).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for w in p.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    /// Ceiling rounding never breaks decodability.
    #[test]
    fn rounded_lengths_stay_decodable(lengths in prop::collection::vec(0.05f64..20.0, 1..=40)) {
        // Scale the draw onto the Kraft boundary first.
        let k: f64 = lengths.iter().map(|&l| 2f64.powf(-l)).sum();
        let shift = k.log2(); // adding shift makes the sum exactly one
        let on_boundary: Vec<f64> = lengths.iter().map(|&l| (l + shift).max(1e-9)).collect();
        let ints = round_lengths(&on_boundary);
        let k_int: f64 = ints.iter().map(|&l| 2f64.powi(-(l as i32))).sum();
        prop_assert!(k_int <= 1.0 + 1e-12);
        prop_assert!(ints.iter().all(|&l| l >= 1));
    }

    /// Higher meta-value never gets a higher attenuation factor.
    #[test]
    fn attenuation_is_antitone(v in prop::collection::vec(0.0f64..1.0, 2..=30)) {
        let lv = LinkValues::from_raw(
            &v.iter().map(|&x| x + 1e-9).collect::<Vec<_>>(),
            0.1,
            5.0,
        ).unwrap();
        for w in lv.order.windows(2) {
            prop_assert!(lv.rho[w[0]] <= lv.rho[w[1]] + 1e-12);
        }
        let _ = attenuation_factor(lv.v[lv.order[0]], 1.0, 0.1, 5.0).unwrap();
    }

    /// Residual error probabilities are strictly decreasing in the round
    /// count for both protocols across the configuration space.
    #[test]
    fn residual_errors_decrease(
        snr_db in 0.0f64..25.0,
        gm_db in -5.0f64..12.0,
        g in 0.05f64..2.0,
        harq in any::<bool>(),
    ) {
        let cfg = ErrorControlConfig::from_db(
            if harq { Protocol::Harq } else { Protocol::Arq },
            snr_db,
            gm_db,
            g,
            2.0,
            4,
            RmaxMode::Fixed,
        ).unwrap();
        let mut prev = 1.0;
        for r in 1..=8 {
            let t = cfg.residual_error_prob(r);
            prop_assert!(t >= 0.0 && t <= 1.0);
            prop_assert!(t < prev + 1e-15);
            prev = t;
        }
    }

    /// The acceptance factor is a probability and equals one for flat
    /// attenuation profiles.
    #[test]
    fn acceptance_factor_is_probability(
        rho in prop::collection::vec(0.1f64..5.0, 1..=20),
        d_max in 1u32..12,
        lambda_q in 0.01f64..5.0,
    ) {
        let pmf = vec![1.0 / rho.len() as f64; rho.len()];
        let ts = expectation_thresholds(d_max, lambda_q, 100.0);
        let a = acceptance_factor(&rho, &pmf, d_max, &ts).unwrap();
        prop_assert!(a.psi > 0.0 && a.psi <= 1.0);
        let flat = acceptance_factor(&vec![rho[0]; rho.len()], &pmf, d_max, &ts).unwrap();
        prop_assert!((flat.psi - 1.0).abs() < 1e-12);
    }
}
