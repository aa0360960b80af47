//! Frame-pair similarity and aligned sequence matching.
//!
//! A query window `i` covers query frames `i..i+k`; it is compared against
//! every reference window `j..j+k` by averaging the `k` aligned pair scores
//! `sim(i+t, j+t)`. There is no velocity search: offsets advance one frame
//! at a time on both sides. With `q` query frames only the first `q - k + 1`
//! windows exist.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::io::write_matrix;
use crate::descriptor::{Descriptor, DescriptorSet};
use crate::error::{Error, Result};

/// Norms below this are treated as zero vectors.
pub const ZERO_NORM: f64 = 1e-12;

/// Cosine similarity, 0 when either side is (numerically) the zero vector.
pub fn cosine_similarity(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(cosine_unchecked(a, b))
}

fn cosine_unchecked(a: &Descriptor, b: &Descriptor) -> f64 {
    if a.l2_norm() < ZERO_NORM || b.l2_norm() < ZERO_NORM {
        return 0.0;
    }
    let dot: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    (dot / (a.l2_norm() * b.l2_norm())).clamp(-1.0, 1.0)
}

/// Dense row-major `queries x references` score grid. Higher is better.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!("similarity matrix must be non-empty, got {rows}x{cols}")));
        }
        if scores.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{rows}x{cols} similarity matrix needs {} scores, got {}",
                rows * cols,
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("similarity scores must be finite".into()));
        }
        Ok(Self { rows, cols, scores })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let scores = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self::new(rows, cols, scores)
    }

    pub fn num_queries(&self) -> usize {
        self.rows
    }

    pub fn num_refs(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, query: usize, reference: usize) -> f64 {
        self.scores[query * self.cols + reference]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        &self.scores[query * self.cols..(query + 1) * self.cols]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Writes the matrix as an `SVPR1` file (`N` = queries, `D` = references),
    /// narrowing scores to `f32`.
    pub fn dump(&self, path: &Path) -> Result<()> {
        write_matrix(path, self.rows, self.cols, self.scores.iter().map(|&s| s as f32))
    }
}

/// Cosine similarity of every query/reference pair.
pub fn build_similarity_matrix(queries: &DescriptorSet, refs: &DescriptorSet) -> Result<SimilarityMatrix> {
    if queries.dim() != refs.dim() {
        return Err(Error::DimensionMismatch {
            left: queries.dim(),
            right: refs.dim(),
        });
    }
    let scores: Vec<f64> = queries
        .descriptors()
        .par_iter()
        .flat_map_iter(|q| refs.descriptors().iter().map(move |r| cosine_unchecked(q, r)))
        .collect();
    SimilarityMatrix::new(queries.len(), refs.len(), scores)
}

/// Best reference window for every query window at one sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMatchSet {
    pub k: usize,
    pub best_ref_window: Vec<usize>,
    pub best_score: Vec<f64>,
}

impl SequenceMatchSet {
    pub fn num_windows(&self) -> usize {
        self.best_ref_window.len()
    }
}

fn check_k(sim: &SimilarityMatrix, k: usize) -> Result<()> {
    let limit = sim.num_queries().min(sim.num_refs());
    if k == 0 || k > limit {
        return Err(Error::InvalidArgument(format!(
            "sequence length {k} out of range 1..={limit} for a {}x{} matrix",
            sim.num_queries(),
            sim.num_refs()
        )));
    }
    Ok(())
}

/// Mean of the `k` aligned scores of query window `i` against reference window `j`.
#[inline]
pub fn window_score(sim: &SimilarityMatrix, i: usize, j: usize, k: usize) -> f64 {
    let mut sum = 0.0;
    for t in 0..k {
        sum += sim.get(i + t, j + t);
    }
    sum / k as f64
}

/// Matches every query window of length `k` to its highest-scoring reference
/// window. Ties go to the smallest reference index.
pub fn match_sequences(sim: &SimilarityMatrix, k: usize) -> Result<SequenceMatchSet> {
    check_k(sim, k)?;
    let query_windows = sim.num_queries() - k + 1;
    let ref_windows = sim.num_refs() - k + 1;
    let (best_ref_window, best_score) = (0..query_windows)
        .into_par_iter()
        .map(|i| {
            let mut best = (0, window_score(sim, i, 0, k));
            for j in 1..ref_windows {
                let s = window_score(sim, i, j, k);
                if s > best.1 {
                    best = (j, s);
                }
            }
            best
        })
        .unzip();
    Ok(SequenceMatchSet {
        k,
        best_ref_window,
        best_score,
    })
}

/// Same result as [`match_sequences`] in `O(Q * R)`, using running sums
/// along each diagonal. Scores can differ from the direct form by rounding
/// only, so exact ties may resolve differently.
pub fn match_sequences_prefix(sim: &SimilarityMatrix, k: usize) -> Result<SequenceMatchSet> {
    check_k(sim, k)?;
    let (q, r) = (sim.num_queries(), sim.num_refs());
    let query_windows = q - k + 1;
    let ref_windows = r - k + 1;

    // prefix[i][j] = sum of sim(i - m, j - m) for m in 1..=min(i, j)
    let mut prefix = vec![0.0f64; (q + 1) * (r + 1)];
    for i in 1..=q {
        for j in 1..=r {
            prefix[i * (r + 1) + j] = prefix[(i - 1) * (r + 1) + j - 1] + sim.get(i - 1, j - 1);
        }
    }
    let kf = k as f64;
    let mut best_ref_window = Vec::with_capacity(query_windows);
    let mut best_score = Vec::with_capacity(query_windows);
    for i in 0..query_windows {
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..ref_windows {
            let s = (prefix[(i + k) * (r + 1) + j + k] - prefix[i * (r + 1) + j]) / kf;
            if s > best.1 {
                best = (j, s);
            }
        }
        best_ref_window.push(best.0);
        best_score.push(best.1);
    }
    Ok(SequenceMatchSet {
        k,
        best_ref_window,
        best_score,
    })
}

/// Per-frame best match; the `k = 1` baseline.
pub fn single_frame_matches(sim: &SimilarityMatrix) -> SequenceMatchSet {
    match_sequences(sim, 1).expect("k = 1 is valid for any non-empty matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desc(v: &[f32]) -> Descriptor {
        Descriptor::new(v.to_vec()).unwrap()
    }

    fn set(rows: &[&[f32]]) -> DescriptorSet {
        DescriptorSet::new("t", rows.iter().map(|r| desc(r)).collect(), 0.0).unwrap()
    }

    // Independent triple loop: collects every candidate score first, then
    // takes the first maximum.
    fn brute_force(sim: &SimilarityMatrix, k: usize) -> (Vec<usize>, Vec<f64>) {
        let mut idx = Vec::new();
        let mut best = Vec::new();
        for i in 0..sim.num_queries() + 1 - k {
            let mut scores = Vec::new();
            for j in 0..sim.num_refs() + 1 - k {
                let mut total = 0.0;
                for t in 0..k {
                    total += sim.get(i + t, j + t);
                }
                scores.push(total / k as f64);
            }
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let j = scores.iter().position(|&s| s == top).unwrap();
            idx.push(j);
            best.push(top);
        }
        (idx, best)
    }

    fn random_matrix(rng: &mut impl Rng, q: usize, r: usize) -> SimilarityMatrix {
        SimilarityMatrix::from_fn(q, r, |_, _| rng_value(rng)).unwrap()
    }

    fn rng_value(rng: &mut impl Rng) -> f64 {
        rng.random_range(-1.0..=1.0)
    }

    #[test]
    fn cosine_cases() {
        let a = desc(&[1.0, 2.0, 3.0]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg = desc(&[-1.0, -2.0, -3.0]);
        assert!((cosine_similarity(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&desc(&[1.0, 0.0]), &desc(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&desc(&[0.0, 0.0]), &desc(&[0.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&desc(&[1.0]), &desc(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn orthonormal_set_gives_identity() {
        let s = set(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let m = build_similarity_matrix(&s, &s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn shape_and_dimension_check() {
        let q = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let m = build_similarity_matrix(&q, &r).unwrap();
        assert_eq!((m.num_queries(), m.num_refs()), (2, 3));
        let bad = set(&[&[1.0, 0.0, 0.0]]);
        assert!(build_similarity_matrix(&q, &bad).is_err());
    }

    #[test]
    fn noiseless_synthetic_diagonal_is_strict_row_max() {
        let data = crate::dataset::generate_synthetic(20, 24, 0.0, 3).unwrap();
        let m = build_similarity_matrix(&data.queries, &data.references).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert!(m.get(i, i) > m.get(i, j));
                }
            }
        }
    }

    #[test]
    fn window_count_follows_n_minus_k_plus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 100, 100);
        let out = match_sequences(&m, 5).unwrap();
        assert_eq!(out.num_windows(), 96);
        assert!(out.best_ref_window.iter().all(|&j| j <= 95));
    }

    #[test]
    fn k_out_of_range() {
        let m = SimilarityMatrix::from_fn(3, 5, |_, _| 0.0).unwrap();
        assert!(match_sequences(&m, 0).is_err());
        assert!(match_sequences(&m, 4).is_err());
        assert!(match_sequences(&m, 3).is_ok());
    }

    #[test]
    fn four_by_four_identity_plus_noise_k2_matches_brute_force() {
        let noise = [
            [0.00, 0.10, -0.05, 0.20],
            [0.15, 0.00, 0.30, -0.10],
            [-0.20, 0.05, 0.00, 0.25],
            [0.10, -0.15, 0.05, 0.00],
        ];
        let m = SimilarityMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 } + noise[i][j]).unwrap();
        let out = match_sequences(&m, 2).unwrap();
        let (idx, best) = brute_force(&m, 2);
        assert_eq!(out.best_ref_window, idx);
        assert_eq!(out.best_score, best);
        assert_eq!(out.best_ref_window, vec![0, 1, 2]);
    }

    #[test]
    fn single_frame_cases() {
        let m = SimilarityMatrix::new(1, 1, vec![0.3]).unwrap();
        let out = single_frame_matches(&m);
        assert_eq!(out.best_ref_window, vec![0]);
        assert_eq!(out.best_score, vec![0.3]);

        let row = [0.1, 0.2, 0.0, 0.9, 0.4, 0.5, 0.3, 0.9, 0.2];
        let m = SimilarityMatrix::new(1, row.len(), row.to_vec()).unwrap();
        assert_eq!(single_frame_matches(&m).best_ref_window, vec![3]);
    }

    #[test]
    fn dump_uses_svpr_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.svpr");
        let m = SimilarityMatrix::new(2, 3, vec![1.0, 0.5, 0.0, -0.5, 0.25, 1.0]).unwrap();
        m.dump(&path).unwrap();
        let (rows, cols, values) = crate::descriptor::io::read_matrix(&path).unwrap();
        assert_eq!((rows, cols), (2, 3));
        assert_eq!(values, vec![1.0, 0.5, 0.0, -0.5, 0.25, 1.0]);
    }

    fn matrix_strategy(max_q: usize, max_r: usize) -> impl Strategy<Value = SimilarityMatrix> {
        (1..=max_q, 1..=max_r).prop_flat_map(|(q, r)| {
            proptest::collection::vec(-1.0f64..=1.0, q * r)
                .prop_map(move |s| SimilarityMatrix::new(q, r, s).unwrap())
        })
    }

    // Scores on a 1/256 grid so sums and shifts are exact in f64.
    fn grid_matrix_strategy() -> impl Strategy<Value = SimilarityMatrix> {
        (1usize..=12, 1usize..=12).prop_flat_map(|(q, r)| {
            proptest::collection::vec(-192i32..=192, q * r).prop_map(move |s| {
                SimilarityMatrix::new(q, r, s.into_iter().map(|v| f64::from(v) / 256.0).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn k1_is_single_frame(m in matrix_strategy(30, 30)) {
            prop_assert_eq!(match_sequences(&m, 1).unwrap(), single_frame_matches(&m));
        }

        #[test]
        fn direct_matches_brute_force(m in matrix_strategy(12, 12), k in 1usize..=4) {
            prop_assume!(k <= m.num_queries().min(m.num_refs()));
            let out = match_sequences(&m, k).unwrap();
            let (idx, best) = brute_force(&m, k);
            prop_assert_eq!(out.num_windows(), m.num_queries() - k + 1);
            prop_assert_eq!(&out.best_ref_window, &idx);
            for (a, b) in out.best_score.iter().zip(&best) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn best_score_is_mean_of_diagonal(m in matrix_strategy(12, 12), k in 1usize..=4) {
            prop_assume!(k <= m.num_queries().min(m.num_refs()));
            let out = match_sequences(&m, k).unwrap();
            for (i, (&j, &s)) in out.best_ref_window.iter().zip(&out.best_score).enumerate() {
                prop_assert!(j <= m.num_refs() - k);
                let mean = (0..k).map(|t| m.get(i + t, j + t)).sum::<f64>() / k as f64;
                prop_assert!((mean - s).abs() <= 1e-9);
                prop_assert!((-1.0..=1.0).contains(&s));
            }
        }

        #[test]
        fn constant_shift_moves_scores_not_argmax(m in grid_matrix_strategy(), k in 1usize..=4, c in -8i32..=8) {
            prop_assume!(k <= m.num_queries().min(m.num_refs()));
            let c = f64::from(c) / 32.0;
            let shifted = SimilarityMatrix::new(
                m.num_queries(), m.num_refs(), m.scores().iter().map(|s| s + c).collect()).unwrap();
            let a = match_sequences(&m, k).unwrap();
            let b = match_sequences(&shifted, k).unwrap();
            prop_assert_eq!(&a.best_ref_window, &b.best_ref_window);
            for (x, y) in a.best_score.iter().zip(&b.best_score) {
                prop_assert!((x + c - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn prefix_form_agrees_with_direct(m in matrix_strategy(16, 16), k in 1usize..=5) {
            prop_assume!(k <= m.num_queries().min(m.num_refs()));
            let direct = match_sequences(&m, k).unwrap();
            let fast = match_sequences_prefix(&m, k).unwrap();
            prop_assert_eq!(direct.num_windows(), fast.num_windows());
            for i in 0..direct.num_windows() {
                prop_assert!((direct.best_score[i] - fast.best_score[i]).abs() <= 1e-12);
                let (jd, jf) = (direct.best_ref_window[i], fast.best_ref_window[i]);
                if jd != jf {
                    // only a rounding-level tie may flip the winner
                    prop_assert!((window_score(&m, i, jd, k) - window_score(&m, i, jf, k)).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn cosine_matrix_in_unit_range(
            q in proptest::collection::vec(proptest::collection::vec(-10f32..10.0, 4), 1..6),
            r in proptest::collection::vec(proptest::collection::vec(-10f32..10.0, 4), 1..6),
        ) {
            let qs = DescriptorSet::new("q", q.into_iter().map(|v| Descriptor::new(v).unwrap()).collect(), 0.0).unwrap();
            let rs = DescriptorSet::new("r", r.into_iter().map(|v| Descriptor::new(v).unwrap()).collect(), 0.0).unwrap();
            let m = build_similarity_matrix(&qs, &rs).unwrap();
            prop_assert!(m.scores().iter().all(|s| (-1.0..=1.0).contains(s)));
        }
    }
}
