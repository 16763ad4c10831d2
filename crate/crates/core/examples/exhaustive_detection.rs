//! Case-insensitive candidate matching.
//!
//! cargo run --example exhaustive_detection

use mtcheck::detection::{match_exhaustive, MatchMode};
use mtcheck::model::CandidateSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let miles = CandidateSet::new("miles", vec!["Meilen".into(), "mi".into()])?;
    let decimal = CandidateSet::new("4200.4", vec!["4200,4".into(), "4.200,4".into()])?;
    let street = CandidateSet::new("street", vec!["Straße".into()])?;

    let checks = [
        ("Ich lief 3 Meilen.", &miles),
        ("Ich lief 3 km.", &miles),
        ("Das Unternehmen erhielt 4.200,4 €.", &decimal),
        ("Das Unternehmen erhielt 4200.4 €.", &decimal),
        ("Sie wohnt in der HAUPTSTRASSE.", &street),
    ];
    for (translation, set) in checks {
        let out = match_exhaustive(translation, set, MatchMode::Substring);
        let verdict = if out.pass { "pass" } else { "fail" };
        println!("{verdict}  {translation:<38} {:?}", out.matched_candidate);
    }

    // Substring mode accepts "mi" inside unrelated words; boundary mode does not.
    let t = "Wir trafen uns mittags.";
    println!(
        "{t:?}: substring {}, token boundary {}",
        match_exhaustive(t, &miles, MatchMode::Substring).pass,
        match_exhaustive(t, &miles, MatchMode::TokenBoundary).pass
    );
    Ok(())
}
