//! Boolean factorization of a planted matrix with some cells hidden.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topiclink::binary::{bnmfk_fit, boolean_product, BnmfOptions, BoolMatrix};
use topiclink::factor::RankSelectionOptions;
use topiclink::{Cell, MaskedBinaryMatrix};

fn main() -> topiclink::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = BoolMatrix::from_fn(12, 3, |i, r| i % 3 == r || rng.random_bool(0.1));
    let h = BoolMatrix::from_fn(3, 9, |r, j| j / 3 == r);
    let truth = boolean_product(&w, &h)?;
    let cells = (0..12 * 9)
        .map(|c| match (rng.random_bool(0.15), truth.get(c / 9, c % 9)) {
            (true, _) => Cell::Unknown,
            (false, true) => Cell::One,
            (false, false) => Cell::Zero,
        })
        .collect();
    let t = MaskedBinaryMatrix::from_cells(12, 9, cells)?;
    println!("observed (. = unknown)\n{t}");

    let model = bnmfk_fit(&t, &[1, 2, 3, 4, 5], &RankSelectionOptions::default(), &BnmfOptions::default(), 0)?;
    println!("rank {} hamming error {}", model.rank, model.hamming_error);
    let rec = model.reconstruction();
    let wrong = (0..12).flat_map(|i| (0..9).map(move |j| (i, j))).filter(|&(i, j)| rec.get(i, j) != truth.get(i, j)).count();
    println!("cells differing from the planted product, hidden ones included: {wrong}");
    Ok(())
}
