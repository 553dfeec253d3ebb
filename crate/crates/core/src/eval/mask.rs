use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Cell, MaskedBinaryMatrix};

/// Cells hidden for one evaluation: known links (positives) and sampled
/// known non-links (negatives).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
    pub seed: u64,
}

impl MaskSpec {
    /// Positives then negatives.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.positives.iter().chain(&self.negatives).copied()
    }
}

/// Hides every one-cell in `target_cols` together with an equal number of
/// zero-cells sampled from the whole matrix.
pub fn mask_links(
    t: &MaskedBinaryMatrix,
    target_cols: &[usize],
    seed: u64,
) -> Result<(MaskedBinaryMatrix, MaskSpec)> {
    let mut positives = Vec::new();
    for &j in target_cols {
        if j >= t.cols() {
            return Err(Error::argument(format!("target column {j} out of range")));
        }
        let before = positives.len();
        positives.extend((0..t.rows()).filter(|&i| t.get(i, j) == Cell::One).map(|i| (i, j)));
        if positives.len() == before {
            return Err(Error::domain(format!(
                "target column `{}` has no known links",
                t.col_labels()[j]
            )));
        }
    }
    positives.sort_unstable();
    positives.dedup();
    mask_cells(t, &positives, 1, None, seed)
}

/// Hides the given one-cells and `negative_ratio` times as many zero-cells,
/// sampled uniformly without replacement from the zero-cells of
/// `negative_rows` (every row when `None`).
pub fn mask_cells(
    t: &MaskedBinaryMatrix,
    positives: &[(usize, usize)],
    negative_ratio: usize,
    negative_rows: Option<&[usize]>,
    seed: u64,
) -> Result<(MaskedBinaryMatrix, MaskSpec)> {
    if positives.is_empty() {
        return Err(Error::domain("no positive cells to mask"));
    }
    for &(i, j) in positives {
        if i >= t.rows() || j >= t.cols() || t.get(i, j) != Cell::One {
            return Err(Error::argument(format!("cell ({i}, {j}) is not a known link")));
        }
    }
    let zeros: Vec<(usize, usize)> = t
        .iter()
        .filter(|&(i, _, c)| c == Cell::Zero && negative_rows.is_none_or(|r| r.contains(&i)))
        .map(|(i, j, _)| (i, j))
        .collect();
    let wanted = positives.len() * negative_ratio;
    if zeros.len() < wanted {
        return Err(Error::domain(format!(
            "need {wanted} zero cells for negatives, matrix has {}",
            zeros.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut negatives: Vec<(usize, usize)> = sample(&mut rng, zeros.len(), wanted)
        .into_iter()
        .map(|idx| zeros[idx])
        .collect();
    negatives.sort_unstable();
    let mut positives = positives.to_vec();
    positives.sort_unstable();
    let spec = MaskSpec {
        positives,
        negatives,
        seed,
    };
    let hidden: Vec<(usize, usize)> = spec.cells().collect();
    let masked = t.with_cells(&hidden, Cell::Unknown)?;
    Ok((masked, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> MaskedBinaryMatrix {
        // column 0 has three ones
        let bits = [
            true, false, false, //
            true, true, false, //
            true, false, false, //
            false, false, true,
        ];
        MaskedBinaryMatrix::from_bools(4, 3, &bits).unwrap()
    }

    #[test]
    fn cardinality_and_determinism() {
        let t = fixture();
        let (masked, spec) = mask_links(&t, &[0], 3).unwrap();
        assert_eq!(spec.positives, [(0, 0), (1, 0), (2, 0)]);
        assert_eq!(spec.negatives.len(), 3);
        assert!(spec.negatives.iter().all(|&(i, j)| t.get(i, j) == Cell::Zero));
        assert_eq!(mask_links(&t, &[0], 3).unwrap().1, spec);
        let hidden: Vec<_> = spec.cells().collect();
        for (i, j, c) in t.iter() {
            let expect = if hidden.contains(&(i, j)) { Cell::Unknown } else { c };
            assert_eq!(masked.get(i, j), expect);
        }
    }

    #[test]
    fn errors() {
        let t = fixture();
        assert!(matches!(mask_links(&t, &[5], 0), Err(Error::Argument(_))));
        let ones = MaskedBinaryMatrix::from_bools(2, 1, &[true, true]).unwrap();
        assert!(matches!(mask_links(&ones, &[0], 0), Err(Error::Domain(_))));
        let zero_col = MaskedBinaryMatrix::from_bools(2, 2, &[true, false, true, false]).unwrap();
        assert!(matches!(mask_links(&zero_col, &[1], 0), Err(Error::Domain(_))));
        assert!(mask_cells(&t, &[(0, 1)], 1, None, 0).is_err());
    }

    #[test]
    fn negative_ratio() {
        let t = fixture();
        let (_, spec) = mask_cells(&t, &[(3, 2)], 4, None, 1).unwrap();
        assert_eq!(spec.negatives.len(), 4);
        assert!(mask_cells(&t, &[(3, 2)], 8, None, 1).is_err());
    }
}
