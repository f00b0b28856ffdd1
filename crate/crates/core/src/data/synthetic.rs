//! Seeded synthetic credit data shaped like the German Credit table: a mix of
//! integer-valued numeric attributes with realistic correlations and several
//! categorical attributes, labelled by a noisy logistic scoring rule with
//! roughly 70% accepted applicants.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DatasetSchema, FeatureSpec, RawDataset, RawValue};

pub fn german_like_schema() -> DatasetSchema {
    DatasetSchema {
        features: vec![
            FeatureSpec::categorical("checking", ["lt0", "0to200", "ge200", "none"]),
            FeatureSpec::numeric("duration"),
            FeatureSpec::categorical("history", ["critical", "delayed", "paid", "all_paid", "none"]),
            FeatureSpec::categorical("purpose", ["car_new", "car_used", "furniture", "radio_tv", "education", "business"]),
            FeatureSpec::numeric("amount"),
            FeatureSpec::categorical("savings", ["lt100", "100to500", "500to1000", "ge1000", "unknown"]),
            FeatureSpec::numeric("installment_rate"),
            FeatureSpec::numeric("age"),
            FeatureSpec::categorical("housing", ["rent", "own", "free"]),
            FeatureSpec::numeric("existing_credits"),
        ],
        target: "class".into(),
        positive_label: "good".into(),
        missing_tokens: vec![String::new()],
    }
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Generates `n` rows; identical `(n, seed)` give identical data.
pub fn german_like(n: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let checking = pick(&mut rng, &[0.27, 0.27, 0.06, 0.40]);
        let history = pick(&mut rng, &[0.29, 0.09, 0.53, 0.05, 0.04]);
        let purpose = pick(&mut rng, &[0.23, 0.10, 0.18, 0.28, 0.06, 0.15]);
        let savings = pick(&mut rng, &[0.60, 0.10, 0.06, 0.05, 0.19]);
        let housing = pick(&mut rng, &[0.18, 0.71, 0.11]);

        let base: f64 = z.sample(&mut rng);
        let duration = (20.0 + 11.0 * base).clamp(4.0, 72.0).round();
        let log_amount = 7.4 + 0.035 * (duration - 20.0) + 0.45 * z.sample(&mut rng);
        let amount = (log_amount.exp() / 10.0).round().clamp(25.0, 1850.0) * 10.0;
        let installment_rate = (3.0 - 0.8 * (amount / 3000.0 - 1.0) + 0.9 * z.sample(&mut rng)).round().clamp(1.0, 4.0);
        let age = (35.0 + 10.0 * z.sample(&mut rng).abs() + rng.gen_range(-12.0..6.0_f64)).round().clamp(19.0, 75.0);
        let existing_credits = (1.0 + (0.6 * z.sample(&mut rng)).abs() + if history == 0 { 0.8 } else { 0.0 })
            .round()
            .clamp(1.0, 4.0);

        let score = 0.9
            + [-0.9, -0.4, 0.3, 1.1][checking]
            + [0.6, -0.1, 0.0, -0.6, -0.8][history]
            + [-0.2, 0.6, 0.0, 0.3, -0.4, -0.1][purpose]
            + [-0.3, 0.0, 0.3, 0.8, 0.5][savings]
            + [-0.3, 0.2, -0.2][housing]
            - 0.035 * (duration - 20.0)
            - 0.00012 * (amount - 3000.0)
            - 0.25 * (installment_rate - 3.0)
            + 0.018 * (age - 35.0)
            - 0.15 * (existing_credits - 1.0);
        let p = 1.0 / (1.0 + (-score).exp());
        let good = rng.gen::<f64>() < p;

        rows.push(vec![
            RawValue::Cat(checking),
            RawValue::Num(duration),
            RawValue::Cat(history),
            RawValue::Cat(purpose),
            RawValue::Num(amount),
            RawValue::Cat(savings),
            RawValue::Num(installment_rate),
            RawValue::Num(age),
            RawValue::Cat(housing),
            RawValue::Num(existing_credits),
        ]);
        labels.push(if good { "good" } else { "bad" }.to_string());
    }
    RawDataset { schema: german_like_schema(), rows, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode;

    #[test]
    fn deterministic_and_well_formed() {
        let a = german_like(300, 4);
        assert_eq!(a, german_like(300, 4));
        assert_ne!(a.rows, german_like(300, 5).rows);
        a.schema.validate().unwrap();
        let enc = encode(&a);
        assert_eq!(enc.width(), 5 + 4 + 5 + 6 + 5 + 3);
        for g in enc.map.groups.iter().filter(|g| g.columns.len() > 1) {
            for r in &enc.rows {
                assert_eq!(r[g.columns.clone()].iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn roughly_seventy_percent_good() {
        let enc = encode(&german_like(4000, 1));
        let pos = enc.labels.iter().filter(|&&y| y == 1).count() as f64 / 4000.0;
        assert!((0.55..0.85).contains(&pos), "{pos}");
    }
}
