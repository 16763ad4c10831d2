//! Pass rate, macro pass rate and a percentile bootstrap interval.
//!
//! cargo run --example bootstrap_interval

use mtcheck::metrics::{bootstrap_ci, macro_pass_rate, pass_rate, ResampleConfig, Sample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // One common value passing everywhere, one rare value failing half the time.
    let mut entries = vec![("1.5", true), ("1.5", false)];
    entries.extend(std::iter::repeat_n(("7", true), 4));
    let s = Sample::new(entries)?;
    println!("PR  = {:.4}", pass_rate(&s));
    println!("MPR = {:.4}", macro_pass_rate(&s));

    for k in [100, 1000, 10_000] {
        let ci = bootstrap_ci(
            &s,
            &ResampleConfig {
                k,
                alpha: 0.05,
                seed: 42,
            },
        )?;
        println!("K = {k:>5}: 95% CI [{:.3}, {:.3}]", ci.lo, ci.hi);
    }
    Ok(())
}
