//! Smooth one line of noisy token scores with a two-state model and look
//! at the best-path probabilities behind each smoothed value.
//!
//!     cargo run --example viterbi_smoothing

use hare::postprocess::{viterbi_lattice, viterbi_smooth, TransitionModel};

fn main() -> hare::Result<()> {
    // relevant text tends to continue once started
    let transitions = TransitionModel::new([[0.9, 0.1], [0.2, 0.8]], [0.8, 0.2])?;
    let line = [0.1, 0.2, 0.9, 0.4, 0.85, 0.9, 0.3, 0.1, 0.6, 0.05];

    let lattice = viterbi_lattice(&line, &transitions)?;
    let smoothed = viterbi_smooth(&line, &transitions)?;
    println!(
        "{:>3} {:>6} {:>12} {:>12} {:>8}",
        "i", "score", "W0", "W1", "smooth"
    );
    for (i, (p, s)) in lattice
        .path_probabilities()
        .iter()
        .zip(&smoothed)
        .enumerate()
    {
        println!(
            "{i:>3} {:>6.2} {:>12.4e} {:>12.4e} {:>8.3}",
            line[i], p[0], p[1], s
        );
    }
    Ok(())
}
