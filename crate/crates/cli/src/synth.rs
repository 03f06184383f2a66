//! Synthetic daily yield series standing in for private farm records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::wrangle::{CategoricalColumn, NumericColumn, OutOfRange, WrangleSpec};

pub const FEED_TYPES: [&str; 3] = ["silage", "hay", "pasture"];

/// CSV with columns `day, feed_kg, temperature_c, feed_type, milk_yield`.
/// Yield follows today's and yesterday's feed, heat stress and feed type.
pub fn synth_csv(seed: u64, rows: usize) -> String {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut feed: f64 = 20.0;
    let mut feed_type = 0usize;
    let mut previous_feed = feed;
    let mut out = String::from("day,feed_kg,temperature_c,feed_type,milk_yield\n");
    for day in 0..rows {
        feed = (feed + rng.random_range(-2.5..2.5)).clamp(12.0, 28.0);
        let season = (day as f64 * std::f64::consts::TAU / 60.0).sin();
        let temperature = 12.0 + 10.0 * season + 2.0 * noise.sample(&mut rng);
        if rng.random_bool(0.15) {
            feed_type = rng.random_range(0..FEED_TYPES.len());
        }
        let bonus = [2.0, 0.0, 3.0][feed_type];
        let milk = 12.0 + 0.6 * feed + 0.3 * previous_feed - 0.25 * (temperature - 12.0).abs()
            + bonus
            + noise.sample(&mut rng);
        previous_feed = feed;
        out.push_str(&format!(
            "{day},{feed:.2},{temperature:.1},{},{:.2}\n",
            FEED_TYPES[feed_type],
            milk.clamp(5.0, 45.0)
        ));
    }
    out
}

/// Normalisation bounds matching [`synth_csv`].
pub fn synthetic_spec() -> WrangleSpec {
    WrangleSpec {
        numeric: vec![
            NumericColumn {
                column: "feed_kg".into(),
                min: 10.0,
                max: 30.0,
            },
            NumericColumn {
                column: "temperature_c".into(),
                min: -15.0,
                max: 40.0,
            },
        ],
        categorical: vec![CategoricalColumn {
            column: "feed_type".into(),
            categories: FEED_TYPES.iter().map(|s| s.to_string()).collect(),
        }],
        target: NumericColumn {
            column: "milk_yield".into(),
            min: 0.0,
            max: 50.0,
        },
        window_length: 3,
        out_of_range: OutOfRange::Clamp,
    }
}
