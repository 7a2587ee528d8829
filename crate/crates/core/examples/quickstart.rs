//! Generate a small labelled corpus, train a tagger, score held-out
//! documents and rank them.
//!
//!     cargo run --release --example quickstart

use hare::analysis::evaluate_scores;
use hare::corpus::{generate_synthetic_corpus, split_folds, SyntheticSpec};
use hare::features::FeatureSource;
use hare::postprocess::{apply_postprocessing, gold_annotations, PostProcessSettings};
use hare::ranking::{rank_documents, spearman_rho, RankingMethod};
use hare::tagger::{tag_corpus, train, TaggerConfig};

fn main() -> hare::Result<()> {
    let spec = SyntheticSpec {
        doc_count: 30,
        tokens_per_doc: 300,
        ..Default::default()
    };
    let (corpus, table) = generate_synthetic_corpus(&spec)?;
    let features = FeatureSource::static_window(table, 10);

    // hold out one fifth of the documents
    let split = split_folds(&corpus, 5, 13)?;
    let (train_part, test_part) = split.split(&corpus, 0);

    let config = TaggerConfig {
        max_epochs: 15,
        ..Default::default()
    };
    let (model, report) = train(&train_part, &features, &config)?;
    println!(
        "trained {} epochs, best dev F2 {:.3} at epoch {}",
        report.stopping_epoch, report.best_dev_f_beta, report.best_epoch
    );

    let scores = tag_corpus(&model, &test_part, &features, "quickstart")?;
    let eval = evaluate_scores(&scores, &test_part, 0.5, 2.0)?;
    println!(
        "held-out P {:.3} R {:.3} F2 {:.3}",
        eval.precision, eval.recall, eval.f_beta
    );

    let annotated =
        apply_postprocessing(&scores, &test_part, PostProcessSettings::default(), None)?;
    let ranking = rank_documents(&test_part, &annotated, RankingMethod::SegmentsTokens)?;
    let gold = rank_documents(
        &test_part,
        &gold_annotations(&test_part)?,
        RankingMethod::SegmentsTokens,
    )?;
    for e in &ranking.entries {
        println!(
            "{:>2}. {} score {} (gold rank {})",
            e.rank,
            e.id,
            e.score,
            gold.get(&e.id).unwrap().rank
        );
    }
    println!(
        "spearman rho vs gold: {:.3}",
        spearman_rho(&gold, &ranking)?
    );
    Ok(())
}
