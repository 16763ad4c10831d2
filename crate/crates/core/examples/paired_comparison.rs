//! Paired bootstrap between two systems judged on the same cases.
//!
//! cargo run --example paired_comparison

use mtcheck::metrics::{paired_bootstrap, ResampleConfig, Sample};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = Pcg64::seed_from_u64(3);
    let values: Vec<String> = (0..300).map(|i| format!("v{}", i % 40)).collect();
    let a = Sample::new(values.iter().map(|v| (v.as_str(), rng.random_bool(0.82))))?;
    let b = Sample::new(values.iter().map(|v| (v.as_str(), rng.random_bool(0.74))))?;
    let cfg = ResampleConfig {
        k: 2000,
        alpha: 0.05,
        seed: 1,
    };

    let out = paired_bootstrap(&a, &b, &cfg)?;
    println!(
        "winner {:?}, p = {:.3} ({}), wins {} / {} / ties {}",
        out.winner,
        out.p_value,
        if out.significant {
            "significant"
        } else {
            "not significant"
        },
        out.wins_a,
        out.wins_b,
        out.ties
    );
    let same = paired_bootstrap(&a, &a, &cfg)?;
    println!("a vs a: winner {:?}, p = {:.3}", same.winner, same.p_value);
    Ok(())
}
