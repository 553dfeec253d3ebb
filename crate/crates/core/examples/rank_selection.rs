//! NMF with stability-based rank selection on block matrices.

use topiclink::factor::{nmf, select_rank, NmfOptions, RankSelectionOptions};
use topiclink::DenseMatrix;

fn main() -> topiclink::Result<()> {
    for blocks in 2..=4 {
        let x = DenseMatrix::from_fn(20, 20, |(i, j)| (i * blocks / 20 == j * blocks / 20) as u8 as f64)?;
        let report = select_rank(&x, &[1, 2, 3, 4, 5, 6], &RankSelectionOptions::default(), 1)?;
        print!("{blocks} blocks -> rank {} | stability", report.selected_rank);
        for (k, s) in report.candidate_ranks.iter().zip(&report.stability_score) {
            print!(" k{k}={s:.2}");
        }
        println!();
        let fit = nmf(&x, report.selected_rank, 1, NmfOptions::default())?;
        println!("   error {:.2e} after {} iterations", fit.reconstruction_error, fit.iterations_run);
    }
    Ok(())
}
