//! Whole pipeline through the library: replayed LLM, identity system,
//! verdicts and the interval table.
//!
//! cargo run --example library_pipeline

use mtcheck::detection::DetectorConfig;
use mtcheck::generation::{Generator, ReplayFixture, ReplayProvider, Sampling};
use mtcheck::metrics::ResampleConfig;
use mtcheck::model::{CandidateEntry, DetectorKind, LanguagePair, PropertySpec};
use mtcheck::runner::{
    build_report, evaluate, render_table, translate_all, AdapterError, ReportMetadata, SourceItem, Translator,
};

struct Identity;

impl Translator for Identity {
    fn system_id(&self) -> &str {
        "identity"
    }
    fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>> {
        items.iter().map(|i| Ok(i.source.to_string())).collect()
    }
}

struct DropDigits;

impl Translator for DropDigits {
    fn system_id(&self) -> &str {
        "drop-digits"
    }
    fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>> {
        items
            .iter()
            .map(|i| Ok(i.source.chars().filter(|c| !c.is_ascii_digit()).collect()))
            .collect()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = PropertySpec {
        id: "integers".into(),
        name: "integer".into(),
        detector: DetectorKind::Exhaustive,
        source_prompt: "Write sentences with an {property}.\n- {demo_1}".into(),
        candidate_prompt: "List {tgt_lang_name} renderings of this number, separated by |:\n{value}".into(),
        foil_prompt: None,
        demos: vec!["We planted [14] trees.".into()],
        language_pair: LanguagePair::new("en", "de"),
    };
    let llm = ReplayProvider::new(
        "replay",
        vec![
            ReplayFixture {
                contains: Some("Write sentences".into()),
                responses: vec![
                    "- The bus had [31] seats.\n- We counted [7] geese.\n- It took [12] days.\n- [7] cats slept."
                        .into(),
                ],
                ..Default::default()
            },
            ReplayFixture {
                echo: true,
                ..Default::default()
            },
        ],
    );
    let generator = Generator::new(&llm, Sampling::default());
    let (cases, _) = generator.generate_suite(&spec, 4, 1)?;
    // The echo fixture answers with the prompt's last line, i.e. the value itself.
    let mut candidates: Vec<CandidateEntry> = Vec::new();
    for case in &cases {
        if candidates.iter().all(|c| c.value() != case.value) {
            candidates.push(generator.candidates_for(case, &spec)?);
        }
    }

    let mut verdicts = Vec::new();
    for system in [&Identity as &dyn Translator, &DropDigits] {
        let out = translate_all(&cases, system, None)?;
        let v = evaluate(
            &spec,
            &cases,
            &candidates,
            &out.records,
            &DetectorConfig::default(),
            None,
        )?;
        verdicts.push((system.system_id().to_string(), v));
    }
    let report = build_report(
        &spec.id,
        spec.detector,
        &cases,
        &verdicts,
        &ResampleConfig {
            k: 500,
            alpha: 0.05,
            seed: 5,
        },
        ReportMetadata {
            suite_sha256: String::new(),
            candidates_sha256: String::new(),
            detector: DetectorConfig::default(),
        },
    )?;
    for s in &report.systems {
        println!("{:<12} PR {:.2}  MPR {:.2}", s.system_id, s.pr, s.mpr);
    }
    print!("{}", render_table(&[report]));
    Ok(())
}
