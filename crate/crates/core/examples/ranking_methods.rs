//! Compare the three document ranking methods on gold annotations and
//! print the gold-by-model correlation matrix.
//!
//!     cargo run --example ranking_methods

use hare::corpus::{generate_synthetic_corpus, SyntheticSpec};
use hare::postprocess::{gold_annotations, ScoreSet};
use hare::ranking::{rank_documents, ranking_method_matrix, RankingMethod};

fn main() -> hare::Result<()> {
    let spec = SyntheticSpec {
        doc_count: 12,
        tokens_per_doc: 200,
        ..Default::default()
    };
    let (corpus, _) = generate_synthetic_corpus(&spec)?;
    let gold = gold_annotations(&corpus)?;

    for method in RankingMethod::ALL {
        let ranking = rank_documents(&corpus, &gold, method)?;
        let top: Vec<_> = ranking
            .entries
            .iter()
            .take(3)
            .map(|e| format!("{} ({})", e.id, e.score))
            .collect();
        println!("{method:>16}: {}", top.join(", "));
    }

    // a noisy "model": gold labels blurred towards 0.5
    let mut blurred = ScoreSet::new("blurred");
    for doc in corpus.documents() {
        let s = doc.gold().unwrap().iter().enumerate();
        blurred.insert(
            doc.id(),
            s.map(|(i, &g)| if g ^ (i % 7 == 0) { 0.8 } else { 0.2 })
                .collect(),
        )?;
    }
    let model =
        hare::postprocess::apply_postprocessing(&blurred, &corpus, Default::default(), None)?;
    let matrix = ranking_method_matrix(&corpus, &gold, &model)?;
    println!("\nrows: gold method, columns: model method");
    for (g, row) in RankingMethod::ALL.iter().zip(matrix) {
        println!(
            "{:>8} {:>7.3} {:>7.3} {:>7.3}",
            g.as_str(),
            row[0],
            row[1],
            row[2]
        );
    }
    Ok(())
}
