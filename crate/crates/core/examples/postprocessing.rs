//! Thresholding, segment extraction and gap collapsing on a toy document.
//!
//!     cargo run --example postprocessing

use hare::postprocess::{binarize, collapse_segments, extract_segments};

fn main() {
    let scores = [0.1, 0.7, 0.8, 0.2, 0.9, 0.4, 0.3, 0.6, 0.1, 0.95];
    for threshold in [0.3, 0.5, 0.75] {
        let labels = binarize(&scores, threshold);
        let segments = extract_segments(&labels);
        println!(
            "threshold {threshold}: {} segments {:?}",
            segments.len(),
            segments
        );
        for gap in [1, 2] {
            let merged = collapse_segments(&segments, gap);
            println!(
                "  collapse gap {gap}: {} segments {:?}",
                merged.len(),
                merged
            );
        }
    }
}
