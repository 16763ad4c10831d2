//! Suite generation against a replayed LLM, with filtering statistics.
//!
//! cargo run --example replay_generation

use mtcheck::generation::{generation_stats, Generator, ReplayFixture, ReplayProvider, Sampling};
use mtcheck::model::{DetectorKind, LanguagePair, PropertySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = PropertySpec {
        id: "units".into(),
        name: "physical unit".into(),
        detector: DetectorKind::Exhaustive,
        source_prompt: mtcheck::generation::templates::SOURCE_SENTENCES.into(),
        candidate_prompt: "{value}".into(),
        foil_prompt: None,
        demos: vec![
            "I ran 3 [miles] this morning.".into(),
            "The box weighs 12 [pounds].".into(),
            "Add two [cups] of flour.".into(),
        ],
        language_pair: LanguagePair::new("en", "de"),
    };
    let reply = "Here you go:\n\
        - The pool is 25 [yards] long.\n\
        - The pool is 25 [yards] long.\n\
        - Set the oven to 350 [degrees Fahrenheit].\n\
        - He drank a [pint] of milk. Then he left.\n\
        - It is 5 [feet] and 2 [inches] tall.\n\
        - The trail climbs 900 [feet] in total.";
    let llm = ReplayProvider::new(
        "replay",
        vec![ReplayFixture {
            responses: vec![reply.into()],
            cycle: true,
            ..Default::default()
        }],
    );

    let (cases, log) = Generator::new(&llm, Sampling::default()).generate_suite(&spec, 3, 7)?;
    for c in &cases {
        println!("{}  {}", c.id, c.raw);
    }
    let stats = generation_stats(&log)?;
    println!(
        "emitted {}, kept {} ({:.0}%), rejected {:?}",
        log.emitted(),
        log.kept(),
        stats.kept * 100.0,
        log.rejected_by_reason()
    );
    Ok(())
}
