//! A small grid over dropout and window size, one training run per cell.
//!
//!     cargo run --release --example hyperparameter_sweep

use hare::cli::{parse_grid, run_sweep, FeatureSpec};
use hare::corpus::{generate_synthetic_corpus, SyntheticSpec};
use hare::tagger::TaggerConfig;

fn main() -> hare::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| hare::Error::InvalidArgument(e.to_string()))?;
    let spec = SyntheticSpec {
        doc_count: 20,
        tokens_per_doc: 300,
        ..Default::default()
    };
    let (corpus, table) = generate_synthetic_corpus(&spec)?;
    let emb = dir.path().join("embeddings.txt");
    table.save(&emb)?;

    let axes = parse_grid("dropout_rate = 0.0 | 0.6\nwindow = 2 | 10\n")?;
    let base = TaggerConfig {
        max_epochs: 8,
        ..Default::default()
    };
    let rows = run_sweep(&axes, &corpus, &FeatureSpec::Static(emb), &base, 10)?;
    for r in rows {
        println!(
            "{:?} -> dev F2 {:.3} (best epoch {})",
            r.values, r.dev_f_beta, r.best_epoch
        );
    }
    Ok(())
}
