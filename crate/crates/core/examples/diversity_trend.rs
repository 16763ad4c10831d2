//! n-gram novelty along a suite and a cubic trend through it.
//!
//! cargo run --example diversity_trend

use mtcheck::metrics::{diversity_series, trend_fit_points, trend_value};
use mtcheck::text::TokenizerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let templates = [
        "The {} was late again",
        "We saw a {} near the river",
        "Nobody liked the {}",
    ];
    let nouns = [
        "train", "heron", "speech", "bus", "otter", "movie", "ferry", "fox", "play",
    ];
    let suite: Vec<String> = nouns
        .iter()
        .enumerate()
        .map(|(i, n)| templates[i % templates.len()].replace("{}", n))
        .collect();

    let series = diversity_series(suite.iter().map(String::as_str), 2, &TokenizerConfig::default())?;
    let points = series.points();
    let coefs = trend_fit_points(&points, 3)?;
    for ((sentence, value), total) in suite.iter().zip(&series.values).zip(&series.cumulative) {
        println!(
            "{:>5}  {total:>3}  {sentence}",
            value.map_or("-".into(), |v| format!("{v:.2}"))
        );
    }
    let last = points.last().map_or(0.0, |p| p.0);
    println!(
        "trend: {:.2} at start, {:.2} at end",
        trend_value(&coefs, 0.0),
        trend_value(&coefs, last)
    );
    Ok(())
}
