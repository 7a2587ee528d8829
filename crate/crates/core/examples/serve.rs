//! Serve a synthetic corpus with gold and a perturbed score set.
//!
//!     cargo run --example serve
//!     curl 'localhost:8080/corpora/demo/documents?model=noisy&smooth=true'

use hare::corpus::{generate_synthetic_corpus, Corpus, SyntheticSpec};
use hare::postprocess::ScoreSet;
use hare::service::{serve, Session};

#[tokio::main]
async fn main() -> hare::Result<()> {
    let spec = SyntheticSpec {
        doc_count: 10,
        tokens_per_doc: 200,
        ..Default::default()
    };
    let (generated, _) = generate_synthetic_corpus(&spec)?;
    let corpus = Corpus::new("demo", generated.documents().to_vec())?;
    let mut noisy = ScoreSet::new("noisy");
    for doc in corpus.documents() {
        let scores = doc.gold().unwrap().iter().enumerate();
        noisy.insert(
            doc.id(),
            scores
                .map(|(i, &g)| {
                    if g {
                        0.7
                    } else {
                        0.1 + 0.5 * ((i % 5 == 0) as u8 as f64)
                    }
                })
                .collect(),
        )?;
    }
    let mut session = Session::new();
    let id = session.add_corpus(corpus).expect("fresh session");
    session.add_scoreset(&id, noisy).expect("aligned scores");
    let addr = "127.0.0.1:8080".parse().unwrap();
    println!("listening on http://{addr}");
    serve(addr, session.into_shared())
        .await
        .map_err(|e| hare::Error::InvalidArgument(e.to_string()))
}
