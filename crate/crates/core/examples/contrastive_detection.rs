//! n-gram similarity against correct and foil renderings.
//!
//! The mock embedder only rewards exact (case-folded) text matches, so it
//! shows the mechanics; plug in an `HttpEmbedder` for real similarity.
//!
//! cargo run --example contrastive_detection

use mtcheck::detection::{judge_contrastive, max_sim, MockEmbedder};
use mtcheck::model::ContrastivePair;
use mtcheck::text::{ngrams, TokenizerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tok = TokenizerConfig::default();
    let emb = MockEmbedder::new(64);
    let pair = ContrastivePair::new(
        "over the moon",
        vec!["muy emocionado".into(), "feliz".into()],
        vec!["sobre la luna".into()],
    )?;

    let translation = "Estoy muy emocionado por el concierto";
    println!("2-grams: {:?}", ngrams(translation, 2, &tok)?);
    println!(
        "max_sim(correct) = {:.3}",
        max_sim(translation, "muy emocionado", &emb, &tok)?
    );

    for t in [translation, "Estoy sobre la luna por el concierto", "..."] {
        let out = judge_contrastive(t, &pair, &emb, &tok)?;
        println!(
            "{}  {t:<40} correct {:.3} foil {:.3}",
            if out.pass { "pass" } else { "fail" },
            out.scores.correct,
            out.scores.foil
        );
    }
    Ok(())
}
