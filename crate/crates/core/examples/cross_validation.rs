//! Five-fold cross-validation on the default synthetic corpus, raw and
//! smoothed.
//!
//!     cargo run --release --example cross_validation

use hare::corpus::{generate_synthetic_corpus, SyntheticSpec};
use hare::features::FeatureSource;
use hare::pipeline::cross_validate;
use hare::postprocess::{apply_postprocessing, gold_annotations, PostProcessSettings};
use hare::ranking::{rank_documents, spearman_rho, RankingMethod};
use hare::tagger::TaggerConfig;

fn main() -> hare::Result<()> {
    let (corpus, table) = generate_synthetic_corpus(&SyntheticSpec::default())?;
    let features = FeatureSource::static_window(table, 10);
    let cv = cross_validate(
        &corpus,
        &features,
        &TaggerConfig::default(),
        5,
        13,
        0.5,
        "cv",
    )?;
    for f in &cv.folds {
        println!(
            "fold {}: {} test docs, stopped at epoch {}, F2 raw {:.3} smoothed {:.3}",
            f.fold,
            f.test_documents.len(),
            f.train_report.stopping_epoch,
            f.raw.f_beta,
            f.smoothed.f_beta
        );
    }
    println!(
        "macro F2 raw {:.3} smoothed {:.3}",
        cv.macro_raw.f_beta, cv.macro_smoothed.f_beta
    );

    let gold = rank_documents(
        &corpus,
        &gold_annotations(&corpus)?,
        RankingMethod::SegmentsTokens,
    )?;
    for (name, scores) in [("raw", &cv.raw), ("smoothed", &cv.smoothed)] {
        let ann = apply_postprocessing(scores, &corpus, PostProcessSettings::default(), None)?;
        let ranking = rank_documents(&corpus, &ann, RankingMethod::SegmentsTokens)?;
        println!(
            "{name:>8} spearman rho {:.3}",
            spearman_rho(&gold, &ranking)?
        );
    }
    Ok(())
}
