use std::collections::BTreeMap;

use depol_core::bath::DecayDistribution;
use depol_core::charge::{evolve, ChargeGrid};
use depol_core::fit::CurveSeries;
use depol_core::io::{ingest_differential, parse_curve, render_curve, Normalization, RawReadoutRecord};
use depol_core::units::Time;
use proptest::prelude::*;

fn grid(n: usize, seed: &[f64]) -> ChargeGrid {
    ChargeGrid::from_fn(n, 100.0, |x, y| {
        let k = ((x.abs() + 3.0 * y.abs()) as usize / 100) % seed.len();
        seed[k]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn curve_csv_round_trips(
        pts in prop::collection::vec((-1e6f64..1e6, 1e-9f64..1e3), 2..40),
        x0 in -1e3f64..1e3,
        with_sigma in any::<bool>(),
    ) {
        let x: Vec<f64> = (0..pts.len()).map(|i| x0 + i as f64 * 0.37).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let s = with_sigma.then(|| pts.iter().map(|p| p.1).collect());
        let c = CurveSeries::new(x, y, s, "us", "1").unwrap();
        let meta = BTreeMap::from([("seed".to_string(), "5".to_string())]);
        let back = parse_curve(&render_curve(&c, &meta)).unwrap();
        prop_assert_eq!(&back.x, &c.x);
        prop_assert_eq!(&back.y, &c.y);
        prop_assert_eq!(&back.sigma, &c.sigma);
        prop_assert_eq!(back.metadata.get("seed").map(String::as_str), Some("5"));
    }

    #[test]
    fn charge_evolution_conserves_and_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 3..7),
        b in prop::collection::vec(-1.0f64..1.0, 3..7),
        c in -3.0f64..3.0,
        t in 0.1f64..20.0,
    ) {
        let (ga, gb) = (grid(21, &a), grid(21, &b));
        let mix = ChargeGrid { values: ga.values.iter().zip(&gb.values).map(|(p, q)| c * p + q).collect(), ..ga.clone() };
        let d = 2500.0;
        let ea = evolve(&ga, d, Time(t)).unwrap().grid;
        let eb = evolve(&gb, d, Time(t)).unwrap().grid;
        let em = evolve(&mix, d, Time(t)).unwrap().grid;
        let scale = ga.values.iter().chain(&gb.values).fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!((ea.integral() - ga.integral()).abs() <= 1e-9 * scale * ga.integral().abs().max(1e4));
        for k in 0..em.values.len() {
            prop_assert!((em.values[k] - (c * ea.values[k] + eb.values[k])).abs() <= 1e-9 * scale * 4.0);
        }
        // maximum principle
        let hi = ga.values.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ga.values.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(ea.values.iter().all(|v| *v <= hi + 1e-12 && *v >= lo - 1e-12));
    }

    #[test]
    fn ingested_curve_starts_at_one(
        counts in prop::collection::vec((50.0f64..200.0, 0.05f64..0.3), 3..20),
    ) {
        let records: Vec<_> = counts.iter().enumerate().map(|(i, (bg, c))| RawReadoutRecord {
            t: 1.0 + i as f64,
            f_no_pi: bg * (1.0 + c),
            f_pi: bg * (1.0 - c),
            repetitions: Some(1000),
        }).collect();
        let curve = ingest_differential(&records, Normalization::Earliest, 3).unwrap();
        prop_assert_eq!(curve.y[0], 1.0);
        prop_assert!(curve.sigma.as_ref().unwrap().iter().all(|s| *s > 0.0));
        prop_assert_eq!(curve.x_unit.as_str(), "us");
    }

    #[test]
    fn decay_distribution_cdf_is_monotone(t in 1.0f64..500.0, g in 1e-6f64..10.0, f in 1.01f64..3.0) {
        let d = DecayDistribution::new(Time(t)).unwrap();
        prop_assert!(d.cdf(g) <= d.cdf(g * f));
        prop_assert!((0.0..=1.0).contains(&d.cdf(g)));
        prop_assert!(d.pdf(g) >= 0.0);
    }
}
