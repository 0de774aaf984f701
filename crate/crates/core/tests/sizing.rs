use nvphot::rate_model::DetectionChain;
use nvphot::sizing::{
    fit_saturation, records_from_rows, saturation_curve, size_distribution, CrystalRecord, ObservationRow, Sample,
    SizingOptions, SuspensionSpec, Weighting,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn fit_uncertainties_cover_true_values() {
    let (r_true, ps_true) = (2.0e6, 0.9);
    let powers: Vec<f64> = (0..12).map(|i| 0.05 * 1.45f64.powi(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 1000;
    let (mut r_ok, mut ps_ok) = (0, 0);
    for _ in 0..trials {
        let truth: Vec<f64> = powers.iter().map(|&p| saturation_curve(r_true, ps_true, p)).collect();
        let points: Vec<(f64, f64)> = powers
            .iter()
            .zip(&truth)
            .map(|(&p, &y)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (p, y * (1.0 + 0.02 * z))
            })
            .collect();
        let weights: Vec<f64> = truth.iter().map(|y| 1.0 / (0.02 * y).powi(2)).collect();
        let fit = fit_saturation(&points, Some(&weights)).unwrap();
        r_ok += usize::from((fit.r_det - r_true).abs() <= 3.0 * fit.r_det_std_err);
        ps_ok += usize::from((fit.p_s - ps_true).abs() <= 3.0 * fit.p_s_std_err);
    }
    assert!(r_ok as f64 >= 0.99 * trials as f64, "R_det covered {r_ok}/{trials}");
    assert!(ps_ok as f64 >= 0.99 * trials as f64, "P_s covered {ps_ok}/{trials}");
}

fn record(id: &str, r_det: f64, p_s: f64) -> CrystalRecord {
    let samples = [0.2, 0.6, 1.5, 4.0]
        .iter()
        .map(|&p| Sample {
            power_w: p,
            rate_hz: saturation_curve(r_det, p_s, p),
            dwell_s: None,
        })
        .collect();
    let mut r = CrystalRecord::new(id, 0.0, 0.0, samples);
    r.fit(Weighting::Unweighted).unwrap();
    r
}

#[test]
fn rows_group_into_records_in_order() {
    let row = |id: &str, p: f64| ObservationRow {
        crystal_id: id.into(),
        x_um: 1.0,
        y_um: 2.0,
        power_w: p,
        rate_hz: 10.0 * p,
        dwell_s: None,
    };
    let recs = records_from_rows(&[row("b", 1.0), row("a", 1.0), row("b", 2.0)]);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].id, "b");
    assert_eq!(recs[0].samples.len(), 2);
    assert_eq!(recs[1].id, "a");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn noiseless_fit_recovers_parameters(
        r_det in 1e3f64..1e9,
        p_s in 1e-3f64..1e2,
        lo in 0.05f64..0.8,
        span in 2.0f64..100.0,
        n in 3usize..12,
    ) {
        let powers: Vec<f64> = (0..n).map(|i| p_s * lo * span.powf(i as f64 / (n - 1) as f64)).collect();
        prop_assume!(powers[n - 1] > p_s);
        let points: Vec<(f64, f64)> = powers.iter().map(|&p| (p, saturation_curve(r_det, p_s, p))).collect();
        let fit = fit_saturation(&points, None).unwrap();
        prop_assert!((fit.r_det / r_det - 1.0).abs() < 1e-9);
        prop_assert!((fit.p_s / p_s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn volumes_add_up_and_order_is_irrelevant(rates in prop::collection::vec(1e3f64..1e8, 2..30), rot in 0usize..30) {
        let records: Vec<CrystalRecord> = rates.iter().enumerate().map(|(i, &r)| record(&i.to_string(), r, 0.9)).collect();
        let spec = SuspensionSpec::default();
        let det = DetectionChain::with_total(0.1);
        let opts = SizingOptions::default();
        let res = size_distribution(&records, &spec, &det, &opts).unwrap();
        let vsum: f64 = res.crystals.iter().map(|c| c.volume_nm3).sum();
        prop_assert!((vsum / spec.total_volume_nm3() - 1.0).abs() < 1e-9);

        let mut rotated = records.clone();
        rotated.rotate_left(rot % records.len());
        let res2 = size_distribution(&rotated, &spec, &det, &opts).unwrap();
        prop_assert!((res.beta_hz_nm3 / res2.beta_hz_nm3 - 1.0).abs() < 1e-14);
        for c in &res2.crystals {
            let same = res.crystals.iter().find(|x| x.id == c.id).unwrap();
            prop_assert!((same.diameter_nm / c.diameter_nm - 1.0).abs() < 1e-12);
        }

        let mut pairs: Vec<(f64, f64)> = res.crystals.iter().map(|c| (c.r_det_hz, c.diameter_nm)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
    }
}
