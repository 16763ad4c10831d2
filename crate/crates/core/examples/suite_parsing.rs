//! Parse bracket-tagged LLM lines into test cases and write a suite file.
//!
//! cargo run --example suite_parsing

use mtcheck::model::{load_suite, save_suite, TestCase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lines = [
        "The company received [4200.4]€.",
        "She ran [3 miles] before breakfast.",
        "Two [values] in [one] line.",
        "No marker at all.",
    ];
    let mut cases = Vec::new();
    for (i, raw) in lines.iter().enumerate() {
        match TestCase::from_raw(format!("demo-{:04}", i + 1), "demo", *raw) {
            Ok(case) => {
                println!(
                    "{:<40} value {:?} at chars {}..{}",
                    case.source, case.value, case.value_span.start, case.value_span.end
                );
                cases.push(case);
            }
            Err(e) => println!("{raw:<40} rejected: {e}"),
        }
    }

    let dir = std::env::temp_dir().join("mtcheck-suite-example");
    let path = dir.join("suite.jsonl");
    save_suite(&cases, &path)?;
    let back = load_suite(&path)?;
    assert_eq!(back, cases);
    println!("wrote {} cases to {}", back.len(), path.display());
    Ok(())
}
