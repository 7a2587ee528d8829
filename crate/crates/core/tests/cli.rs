use std::fs;
use std::path::Path;

use clap::Parser;
use hare::cli::{run, Cli};
use hare::corpus::load_corpus;
use hare::postprocess::load_scores;
use hare::tagger::load_model;

fn hare(args: &[&str]) -> hare::Result<()> {
    let mut argv = vec!["hare"];
    argv.extend_from_slice(args);
    run(Cli::try_parse_from(argv).expect("valid command line"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Small corpus plus a quickly trained model and its scores.
fn setup(dir: &Path) {
    hare(&[
        "generate",
        "--out",
        s(dir),
        "--docs",
        "12",
        "--tokens-per-doc",
        "150",
    ])
    .unwrap();
    fs::write(
        dir.join("cfg.txt"),
        "hidden_layers = 16\nmax_epochs = 30\nlearning_rate = 0.1\n",
    )
    .unwrap();
    let features = format!("static:{}", s(&dir.join("embeddings.txt")));
    hare(&[
        "train",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &features,
        "--config",
        s(&dir.join("cfg.txt")),
        "--out",
        s(&dir.join("model.json")),
        "--report",
        s(&dir.join("report.json")),
    ])
    .unwrap();
    hare(&[
        "tag",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &features,
        "--out",
        s(&dir.join("scores.jsonl")),
    ])
    .unwrap();
}

#[test]
fn train_tag_rank_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);

    let corpus = load_corpus(dir.join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.len(), 12);
    let model = load_model(dir.join("model.json")).unwrap();
    assert_eq!(model.config.hidden_layers, vec![16]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["config"]["tagger"]["max_epochs"], 30);

    let scores = load_scores(dir.join("scores.jsonl")).unwrap();
    assert_eq!(scores.model_id, "model");
    scores.check_alignment(&corpus).unwrap();

    let ranking = dir.join("ranking.csv");
    hare(&[
        "rank",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--scores",
        s(&dir.join("scores.jsonl")),
        "--method",
        "density",
        "--smooth",
        "--collapse",
        "1",
        "--out",
        s(&ranking),
    ])
    .unwrap();
    let text = fs::read_to_string(&ranking).unwrap();
    assert!(text.starts_with("# {"));
    assert!(text.contains("\"spearman_rho\""));
    let rows = data_lines(&ranking);
    assert_eq!(rows[0], "rank,id,score,segments,gold_rank,gold_score");
    assert_eq!(rows.len(), 13);
    assert!(rows[1].starts_with("1,"));

    let eval = dir.join("eval.json");
    hare(&[
        "eval",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--scores",
        s(&dir.join("scores.jsonl")),
        "--beta",
        "1",
        "--out",
        s(&eval),
    ])
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&eval).unwrap()).unwrap();
    let r = &v["result"];
    let total = r["tp"].as_u64().unwrap() + r["fn"].as_u64().unwrap();
    let relevant: usize = corpus
        .documents()
        .iter()
        .map(|d| d.gold().unwrap().iter().filter(|g| **g).count())
        .sum();
    assert_eq!(total as usize, relevant);
    assert_eq!(r["beta"], 1.0);
}

#[test]
fn outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    setup(a.path());
    setup(b.path());
    let read = |d: &Path, f: &str| fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(
        read(a.path(), "corpus.jsonl"),
        read(b.path(), "corpus.jsonl")
    );
    // score payloads match; the meta line names the temp directory
    let body = |d: &Path| {
        read(d, "scores.jsonl")
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body(a.path()), body(b.path()));
}

#[test]
fn smooth_and_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let corpus = s(&dir.join("corpus.jsonl")).to_owned();
    let scores = s(&dir.join("scores.jsonl")).to_owned();

    let smoothed = dir.join("smoothed.jsonl");
    hare(&[
        "smooth",
        "--scores",
        &scores,
        "--corpus",
        &corpus,
        "--transitions-from",
        &corpus,
        "--out",
        s(&smoothed),
    ])
    .unwrap();
    let sm = load_scores(&smoothed).unwrap();
    assert!(sm.smoothed);
    let first_line = fs::read_to_string(&smoothed)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned();
    assert!(first_line.contains("\"transitions\""));

    let sweep = dir.join("sweep.csv");
    hare(&[
        "analyze",
        "sweep",
        "--corpus",
        &corpus,
        "--scores",
        &scores,
        "--grid",
        "10",
        "--out",
        s(&sweep),
    ])
    .unwrap();
    let rows = data_lines(&sweep);
    assert_eq!(rows.len(), 12);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",1")).count(), 1);

    let hist = dir.join("hist.csv");
    hare(&[
        "analyze",
        "histogram",
        "--corpus",
        &corpus,
        "--scores",
        &scores,
        "--bins",
        "4",
        "--out",
        s(&hist),
    ])
    .unwrap();
    let counts: usize = data_lines(&hist)[1..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counts, load_corpus(&corpus).unwrap().token_count());

    let lex = dir.join("lex.csv");
    hare(&[
        "analyze",
        "lexicalization",
        "--corpus",
        &corpus,
        "--scores",
        &scores,
        "--document",
        "doc-0000",
        "--min-frequency",
        "2",
        "--out",
        s(&lex),
    ])
    .unwrap();
    let rows = data_lines(&lex);
    assert_eq!(rows[0], "token,mean_score,frequency");
    assert!(rows[1..]
        .iter()
        .all(|r| r.rsplit(',').next().unwrap().parse::<usize>().unwrap() >= 2));

    let err = hare(&[
        "analyze",
        "histogram",
        "--corpus",
        &corpus,
        "--scores",
        &scores,
        "--document",
        "nope",
    ])
    .unwrap_err();
    assert!(matches!(err, hare::Error::UnknownDocument(_)));
}

#[test]
fn sweep_grid_runs_every_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    hare(&[
        "generate",
        "--out",
        s(dir),
        "--docs",
        "10",
        "--tokens-per-doc",
        "120",
    ])
    .unwrap();
    fs::write(dir.join("cfg.txt"), "hidden_layers = 8\nmax_epochs = 2\n").unwrap();
    fs::write(
        dir.join("grid.txt"),
        "# two by two\nlearning_rate = 0.01 | 0.05\nwindow = 1 | 4\n",
    )
    .unwrap();
    let features = format!("static:{}", s(&dir.join("embeddings.txt")));
    let out = dir.join("sweep.csv");
    hare(&[
        "sweep",
        "--grid",
        s(&dir.join("grid.txt")),
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &features,
        "--config",
        s(&dir.join("cfg.txt")),
        "--out",
        s(&out),
    ])
    .unwrap();
    let rows = data_lines(&out);
    assert_eq!(
        rows[0],
        "cell,learning_rate,window,dev_f_beta,best_epoch,epochs_run"
    );
    assert_eq!(rows.len(), 5);
    assert!(rows[4].starts_with("3,0.05,4,"));

    fs::write(dir.join("empty.txt"), "# nothing here\n").unwrap();
    let err = hare(&[
        "sweep",
        "--grid",
        s(&dir.join("empty.txt")),
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &features,
    ])
    .unwrap_err();
    assert!(err.to_string().contains("empty grid"));
}

#[test]
fn crossval_writes_out_of_fold_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    hare(&[
        "generate",
        "--out",
        s(dir),
        "--docs",
        "9",
        "--tokens-per-doc",
        "120",
    ])
    .unwrap();
    fs::write(dir.join("cfg.txt"), "hidden_layers = 8\nmax_epochs = 2\n").unwrap();
    let features = format!("static:{}", s(&dir.join("embeddings.txt")));
    let out = dir.join("cv");
    hare(&[
        "crossval",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &features,
        "--config",
        s(&dir.join("cfg.txt")),
        "--folds",
        "3",
        "--out",
        s(&out),
    ])
    .unwrap();
    let corpus = load_corpus(dir.join("corpus.jsonl")).unwrap();
    load_scores(out.join("raw.jsonl"))
        .unwrap()
        .check_alignment(&corpus)
        .unwrap();
    assert!(load_scores(out.join("smoothed.jsonl")).unwrap().smoothed);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
}

#[test]
fn import_tokenizes_text_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("note1.txt"), "Pt walks 50 ft.\nNo distress.").unwrap();
    fs::write(dir.join("note2.txt"), "Ambulating with walker").unwrap();
    let out = dir.join("imported.jsonl");
    hare(&[
        "import",
        s(&dir.join("note1.txt")),
        s(&dir.join("note2.txt")),
        "--out",
        s(&out),
    ])
    .unwrap();
    let corpus = load_corpus(&out).unwrap();
    let doc = corpus.document("note1").unwrap();
    assert_eq!(doc.lines().len(), 2);
    let first: Vec<&str> = doc.lines()[0].iter().map(|t| t.text.as_str()).collect();
    assert_eq!(first, ["Pt", "walks", "50", "ft", "."]);
    assert!(!corpus.has_gold());
}

#[test]
fn missing_inputs_name_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let err = hare(&[
        "tag",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        "static:/definitely/missing.txt",
    ])
    .unwrap_err();
    assert!(err.to_string().contains("/definitely/missing.txt"), "{err}");

    fs::write(dir.join("broken.json"), "{\"format\":\"hare-tagger\"").unwrap();
    let err = hare(&[
        "tag",
        "--model",
        s(&dir.join("broken.json")),
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &format!("static:{}", s(&dir.join("embeddings.txt"))),
    ])
    .unwrap_err();
    assert!(matches!(err, hare::Error::ModelFormat(_)), "{err}");

    assert!(Cli::try_parse_from(["hare", "tag", "--features", "glove:x"]).is_err());
}

#[test]
fn eval_of_gold_scores_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    hare(&[
        "generate",
        "--out",
        s(dir),
        "--docs",
        "5",
        "--tokens-per-doc",
        "100",
    ])
    .unwrap();
    let corpus = load_corpus(dir.join("corpus.jsonl")).unwrap();
    let mut gold = hare::postprocess::ScoreSet::new("gold");
    for d in corpus.documents() {
        gold.insert(
            d.id(),
            d.gold()
                .unwrap()
                .iter()
                .map(|&g| f64::from(u8::from(g)))
                .collect(),
        )
        .unwrap();
    }
    gold.save(dir.join("gold.jsonl"), None).unwrap();
    let out = dir.join("eval.json");
    hare(&[
        "eval",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--scores",
        s(&dir.join("gold.jsonl")),
        "--out",
        s(&out),
    ])
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    for k in ["precision", "recall", "f_beta"] {
        assert_eq!(v["result"][k], 1.0, "{k}");
    }
}

#[test]
fn rank_rho_matches_ranking_module() {
    use hare::postprocess::{apply_postprocessing, gold_annotations, PostProcessSettings};
    use hare::ranking::{rank_documents, spearman_rho, RankingMethod};

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let out = dir.join("rank.csv");
    hare(&[
        "rank",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--scores",
        s(&dir.join("scores.jsonl")),
        "--gold-method",
        "density",
        "--model-method",
        "density",
        "--out",
        s(&out),
    ])
    .unwrap();
    let header = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned();
    let meta: serde_json::Value = serde_json::from_str(header.trim_start_matches("# ")).unwrap();
    let reported = meta["config"]["spearman_rho"].as_f64().unwrap();

    let corpus = load_corpus(dir.join("corpus.jsonl")).unwrap();
    let scores = load_scores(dir.join("scores.jsonl")).unwrap();
    let ann = apply_postprocessing(&scores, &corpus, PostProcessSettings::default(), None).unwrap();
    let model = rank_documents(&corpus, &ann, RankingMethod::Density).unwrap();
    let gold = rank_documents(
        &corpus,
        &gold_annotations(&corpus).unwrap(),
        RankingMethod::Density,
    )
    .unwrap();
    assert_eq!(reported, spearman_rho(&gold, &model).unwrap());
}

#[test]
fn train_report_echoes_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    hare(&[
        "generate",
        "--out",
        s(dir),
        "--docs",
        "6",
        "--tokens-per-doc",
        "100",
    ])
    .unwrap();
    fs::write(
        dir.join("cfg.txt"),
        "dropout_rate = 0.9\nhidden_layers = 4\nmax_epochs = 2\n",
    )
    .unwrap();
    let report = dir.join("report.json");
    hare(&[
        "train",
        "--corpus",
        s(&dir.join("corpus.jsonl")),
        "--features",
        &format!("static:{}", s(&dir.join("embeddings.txt"))),
        "--config",
        s(&dir.join("cfg.txt")),
        "--seed",
        "99",
        "--out",
        s(&dir.join("m.json")),
        "--report",
        s(&report),
    ])
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["meta"]["config"]["tagger"]["dropout_rate"], 0.9);
    assert_eq!(v["meta"]["config"]["tagger"]["seed"], 99);
    assert!(v["report"]["stop_reason"].is_string());
}
