use std::collections::BTreeMap;

use ndarray::Array2;
use proptest::prelude::*;
use topiclink::binary::{ensemble_scores, lmf_gradients, lmf_loss, BoolMatrix, LmfModel};
use topiclink::corpus::{build_property_matrix, build_tfidf_tokens, Document, PropertyOptions, TfidfOptions};
use topiclink::eval::{hit_at_k, mask_links, per_positive_hit_at_k, separation_from_scores, MaskSpec};
use topiclink::factor::{nmf_from, random_init, select_rank, NmfOptions, RankSelectionOptions};
use topiclink::hnmfk::{StopReason, TopicNode, TopicTree};
use topiclink::{Cell, DenseMatrix, MaskedBinaryMatrix};

fn nonneg_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (2..=max_rows, 2..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0f64..1.0, r * c)
            .prop_map(move |v| DenseMatrix::from_row_major(r, c, v).unwrap())
    })
}

fn cells(rows: usize, cols: usize) -> impl Strategy<Value = MaskedBinaryMatrix> {
    prop::collection::vec(prop_oneof![Just(Cell::One), Just(Cell::Zero), Just(Cell::Unknown)], rows * cols)
        .prop_filter("needs an observed cell", |v| v.iter().any(|c| c.is_observed()))
        .prop_map(move |v| MaskedBinaryMatrix::from_cells(rows, cols, v).unwrap())
}

/// Scores on a 3×4 grid plus a mask over distinct cells with at least one
/// positive.
fn scored_mask() -> impl Strategy<Value = (Array2<f64>, MaskSpec)> {
    (
        prop::collection::vec(prop_oneof![Just(0.25), Just(0.5), 0.0f64..1.0], 12),
        Just((0..12).collect::<Vec<usize>>()).prop_shuffle(),
        1usize..=12,
        1usize..=12,
    )
        .prop_filter("at least one positive", |(_, _, n, p)| p <= n)
        .prop_map(|(v, order, n, p)| {
            let scores = Array2::from_shape_vec((3, 4), v).unwrap();
            let at = |c: usize| (c / 4, c % 4);
            let spec = MaskSpec {
                positives: order[..p].iter().map(|&c| at(c)).collect(),
                negatives: order[p..n].iter().map(|&c| at(c)).collect(),
                seed: 0,
            };
            (scores, spec)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nmf_error_never_increases(x in nonneg_matrix(8, 8), k in 1usize..=3, seed in any::<u64>()) {
        let k = k.min(x.rows()).min(x.cols());
        let (w0, h0) = random_init(x.view(), k, seed);
        let opts = NmfOptions { max_iters: 60, tol: 1e-12 };
        let (fit, trace) = nmf_from(&x, w0, h0, opts).unwrap();
        for pair in trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-9) + 1e-12, "{:?}", pair);
        }
        prop_assert!(fit.w.is_nonnegative() && fit.h.is_nonnegative());
    }

    #[test]
    fn selected_rank_is_a_candidate(x in nonneg_matrix(6, 6), seed in any::<u64>()) {
        let opts = RankSelectionOptions { ensemble_size: 3, restarts: 1, ..RankSelectionOptions::default() };
        let max = x.rows().min(x.cols());
        let candidates: Vec<usize> = (1..=max.min(3)).collect();
        let report = select_rank(&x, &candidates, &opts, seed).unwrap();
        prop_assert!(candidates.contains(&report.selected_rank));
        prop_assert_eq!(report.stability_score.len(), candidates.len());
    }

    #[test]
    fn hit_at_k_is_monotone_in_k((scores, spec) in scored_mask()) {
        let n = spec.positives.len() + spec.negatives.len();
        let mut prev = (0.0, 0.0);
        for k in 1..=n + 1 {
            let now = (hit_at_k(&scores, &spec, k).unwrap(), per_positive_hit_at_k(&scores, &spec, k).unwrap());
            prop_assert!(now.0 >= prev.0 && now.1 >= prev.1);
            prev = now;
        }
        prop_assert_eq!(prev, (1.0, 1.0));
    }

    #[test]
    fn hit_at_k_ignores_monotone_transforms((scores, spec) in scored_mask(), k in 1usize..=6) {
        let warped = scores.mapv(|s| (4.0 * s).exp() - 7.0);
        prop_assert_eq!(hit_at_k(&scores, &spec, k).unwrap(), hit_at_k(&warped, &spec, k).unwrap());
        prop_assert_eq!(
            per_positive_hit_at_k(&scores, &spec, k).unwrap(),
            per_positive_hit_at_k(&warped, &spec, k).unwrap()
        );
    }

    #[test]
    fn mask_links_only_touches_masked_cells(t in cells(5, 4), col in 0usize..4, seed in any::<u64>()) {
        let ones = (0..5).filter(|&i| t.get(i, col) == Cell::One).count();
        let zeros = t.count(Cell::Zero);
        prop_assume!(ones > 0 && zeros >= ones);
        let (masked, spec) = mask_links(&t, &[col], seed).unwrap();
        prop_assert_eq!(spec.positives.len(), ones);
        prop_assert_eq!(spec.negatives.len(), ones);
        let hidden: std::collections::BTreeSet<_> = spec.cells().collect();
        for (i, j, c) in t.iter() {
            if hidden.contains(&(i, j)) {
                prop_assert_eq!(masked.get(i, j), Cell::Unknown);
            } else {
                prop_assert_eq!(masked.get(i, j), c);
            }
        }
    }

    #[test]
    fn quartiles_match_order_statistics(v in prop::collection::vec(-5.0f64..5.0, 1..1000)) {
        let stats = separation_from_scores(v.clone(), vec![0.0]).unwrap().positive;
        let n = v.len();
        let order_stat = |r: usize| {
            let mut w = v.clone();
            *w.select_nth_unstable_by(r, f64::total_cmp).1
        };
        for (p, got) in [(0.25, stats.q25), (0.5, stats.median), (0.75, stats.q75)] {
            let pos = p * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            let want = if frac == 0.0 { order_stat(lo) } else { order_stat(lo) * (1.0 - frac) + order_stat(lo + 1) * frac };
            prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "p={} {} vs {}", p, got, want);
        }
        prop_assert_eq!(stats.count, n);
    }

    #[test]
    fn tfidf_is_permutation_equivariant(
        docs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["ab", "cd", "ef", "gh", "ij"]), 0..6), 2..8),
        perm_seed in any::<u64>(),
    ) {
        let docs: Vec<Vec<String>> = docs.into_iter().map(|d| d.into_iter().map(String::from).collect()).collect();
        let opts = TfidfOptions { min_df: 1, max_df_fraction: 1.0 };
        let mut perm: Vec<usize> = (0..docs.len()).collect();
        let mut s = perm_seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<Vec<String>> = perm.iter().map(|&i| docs[i].clone()).collect();
        match (build_tfidf_tokens(&docs, &opts), build_tfidf_tokens(&shuffled, &opts)) {
            (Ok((x, v)), Ok((y, w))) => {
                prop_assert_eq!(&v.terms, &w.terms);
                for (r, &src) in perm.iter().enumerate() {
                    for c in 0..x.cols() {
                        prop_assert_eq!(y.get(r, c), x.get(src, c));
                    }
                }
                for r in 0..x.rows() {
                    let norm: f64 = (0..x.cols()).map(|c| x.get(r, c).powi(2)).sum::<f64>().sqrt();
                    prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one order failed"),
        }
    }

    #[test]
    fn property_matrix_monotone_in_assoc_min(
        tags in prop::collection::vec(prop::collection::vec(0usize..4, 0..3), 6..16),
        a in 1usize..4,
        step in 1usize..3,
        floor in 1usize..4,
    ) {
        let docs: Vec<Document> = tags
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut attributes = BTreeMap::new();
                attributes.insert("material".to_string(), t.iter().map(|m| format!("M{m}")).collect());
                Document { id: format!("d{i}"), title: String::new(), abstract_text: String::new(), attributes }
            })
            .collect();
        prop_assume!(docs.iter().any(|d| !d.facet("material").is_empty()));
        let tree = two_level_tree(docs.len());
        let build = |assoc_min| {
            build_property_matrix(&tree, &docs, &PropertyOptions { facet: "material".into(), assoc_min, coverage_floor: floor })
        };
        let (Ok(lo), Ok(hi)) = (build(a), build(a + step)) else {
            // no observed cell at this coverage floor
            return Ok(());
        };
        for (i, j, c) in hi.matrix.iter() {
            if c == Cell::One {
                prop_assert_eq!(lo.matrix.get(i, j), Cell::One);
            }
        }
        for m in [&lo, &hi] {
            for (i, j, c) in m.matrix.iter() {
                if c == Cell::One {
                    prop_assert!(m.support(i, j) >= 1);
                }
            }
        }
    }

    #[test]
    fn ensemble_scores_bounded_and_monotone_in_reconstruction(
        bits in prop::collection::vec(any::<bool>(), 12),
        b_r in prop::collection::vec(-40.0f64..40.0, 3),
        b_c in prop::collection::vec(-40.0f64..40.0, 4),
    ) {
        let t_hat = BoolMatrix::new(3, 4, bits.clone()).unwrap();
        let flipped = BoolMatrix::new(3, 4, bits.iter().map(|b| !b).collect()).unwrap();
        let s = ensemble_scores(&t_hat, &b_r, &b_c).unwrap();
        let f = ensemble_scores(&flipped, &b_r, &b_c).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                prop_assert!(s[[i, j]] > 0.0 && s[[i, j]] < 1.0);
                let (one, zero) = if bits[i * 4 + j] { (s[[i, j]], f[[i, j]]) } else { (f[[i, j]], s[[i, j]]) };
                // strict unless both saturate at the same float
                prop_assert!(one > zero || (one == zero && (one >= 1.0 - 1e-15 || one <= 1e-300)));
            }
        }
    }

    #[test]
    fn lmf_gradient_matches_finite_differences(
        x in cells(4, 3),
        params in prop::collection::vec(-1.0f64..1.0, 4 * 2 + 2 * 3 + 4 + 3),
        lambda in 0.0f64..1.0,
    ) {
        let model = |p: &[f64]| {
            LmfModel::new(
                DenseMatrix::from_row_major(4, 2, p[..8].to_vec()).unwrap(),
                DenseMatrix::from_row_major(2, 3, p[8..14].to_vec()).unwrap(),
                p[14..18].to_vec(),
                p[18..].to_vec(),
                lambda,
            )
            .unwrap()
        };
        let g = lmf_gradients(&model(&params), &x).unwrap();
        let analytic: Vec<f64> = g.w.iter().chain(&g.h).chain(&g.b_r).chain(&g.b_c).copied().collect();
        let h = 1e-5;
        for (idx, a) in analytic.iter().enumerate() {
            let mut up = params.clone();
            up[idx] += h;
            let mut down = params.clone();
            down[idx] -= h;
            let numeric = (lmf_loss(&model(&up), &x).unwrap() - lmf_loss(&model(&down), &x).unwrap()) / (2.0 * h);
            prop_assert!((a - numeric).abs() <= 1e-6 * (1.0 + a.abs()), "param {}: {} vs {}", idx, a, numeric);
        }
    }
}

/// Root over `n` documents with two children splitting them in half.
fn two_level_tree(n: usize) -> TopicTree {
    let node = |path_id: &str, depth, member_ids: Vec<usize>, children| TopicNode {
        path_id: path_id.to_string(),
        depth,
        member_ids,
        local_rank: None,
        stability: None,
        top_tokens: Vec::new(),
        stop_reason: StopReason::MinSize,
        zero_rows: Vec::new(),
        children,
    };
    let half = n / 2;
    TopicTree::new(node(
        "root",
        0,
        (0..n).collect(),
        vec![node("0", 1, (0..half).collect(), vec![]), node("1", 1, (half..n).collect(), vec![])],
    ))
    .unwrap()
}
