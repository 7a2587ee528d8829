//! Threshold sweep, per-token lexicalization and score histogram for a
//! trained tagger's scores.
//!
//!     cargo run --release --example qualitative_analysis

use hare::analysis::{lexicalization, score_histogram, threshold_sweep};
use hare::corpus::{generate_synthetic_corpus, SyntheticSpec};
use hare::features::FeatureSource;
use hare::tagger::{tag_corpus, train, TaggerConfig};

fn main() -> hare::Result<()> {
    let spec = SyntheticSpec {
        doc_count: 20,
        tokens_per_doc: 300,
        ..Default::default()
    };
    let (corpus, table) = generate_synthetic_corpus(&spec)?;
    let features = FeatureSource::static_window(table, 10);
    let config = TaggerConfig {
        max_epochs: 10,
        ..Default::default()
    };
    let (model, _) = train(&corpus, &features, &config)?;
    // in-sample scores; fine for a look at the tooling
    let scores = tag_corpus(&model, &corpus, &features, "demo")?;

    let sweep = threshold_sweep(&scores, &corpus, 2.0, 20)?;
    println!(
        "best threshold {} with F2 {:.3}",
        sweep.best_threshold, sweep.best.f_beta
    );
    for p in sweep.points.iter().step_by(4) {
        println!(
            "  t={:.2} P={:.3} R={:.3} F2={:.3}",
            p.threshold, p.result.precision, p.result.recall, p.result.f_beta
        );
    }

    let lex = lexicalization(&scores, &corpus, 5, false)?;
    println!("\nhighest-scoring words:");
    for e in lex.entries.iter().take(5) {
        println!("  {:<8} {:.3} (x{})", e.token, e.mean_score, e.frequency);
    }
    println!("lowest-scoring words:");
    for e in lex.entries.iter().rev().take(5) {
        println!("  {:<8} {:.3} (x{})", e.token, e.mean_score, e.frequency);
    }

    let hist = score_histogram(scores.all_scores(), 10)?;
    println!("\nscore histogram:");
    let max = *hist.counts.iter().max().unwrap_or(&1);
    for (i, c) in hist.counts.iter().enumerate() {
        println!(
            "  [{:.1}, {:.1}) {:>5} {}",
            hist.edges[i],
            hist.edges[i + 1],
            c,
            "#".repeat(c * 40 / max.max(1))
        );
    }
    Ok(())
}
