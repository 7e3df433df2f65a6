//! AUROC and AUPR with tie handling, next to their exhaustive references.

use sdfad::metrics::oracle::{aupr_thresholds, auroc_all_pairs};
use sdfad::{aupr, auroc};

fn main() -> sdfad::Result<()> {
    let cases: [(&str, Vec<f64>, Vec<u8>); 4] = [
        ("separated", vec![0.9, 0.8, 0.3, 0.2], vec![1, 1, 0, 0]),
        ("interleaved", vec![0.9, 0.2, 0.8, 0.3], vec![1, 1, 0, 0]),
        ("all tied", vec![0.5; 4], vec![1, 0, 1, 0]),
        ("ties across classes", vec![0.7, 0.7, 0.4, 0.4, 0.1], vec![1, 0, 1, 0, 0]),
    ];
    println!("{:<22}{:>8}{:>10}{:>8}{:>10}", "case", "auroc", "pairs", "aupr", "oracle");
    for (name, scores, labels) in cases {
        println!(
            "{:<22}{:>8.4}{:>10.4}{:>8.4}{:>10.4}",
            name,
            auroc(&scores, &labels)?,
            auroc_all_pairs(&scores, &labels)?,
            aupr(&scores, &labels)?,
            aupr_thresholds(&scores, &labels)?
        );
    }
    Ok(())
}
