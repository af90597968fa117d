//! Selection and prediction metrics, and size-indexed path quality curves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::axpy;

/// Default densest model size tracked by path-quality curves.
pub const DEFAULT_PATH_QUALITY_CAP: usize = 180;

/// Point-estimate quality: support size, out-of-sample mean squared error,
/// and (when ground truth is known) false discovery and true positive
/// proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub size: usize,
    pub mse: f64,
    pub fdp: Option<f64>,
    pub tpp: Option<f64>,
}

/// Indices of the nonzero coordinates.
pub fn support_of(estimate: &[f64]) -> Vec<usize> {
    estimate
        .iter()
        .enumerate()
        .filter_map(|(j, &b)| (b != 0.0).then_some(j))
        .collect()
}

/// FDP and TPP of a selected support against the true support.
pub fn fdp_tpp(selected: &[usize], truth_support: &[usize]) -> (f64, f64) {
    let true_hits = selected
        .iter()
        .filter(|j| truth_support.contains(j))
        .count();
    let false_hits = selected.len() - true_hits;
    let fdp = false_hits as f64 / selected.len().max(1) as f64;
    let tpp = true_hits as f64 / truth_support.len().max(1) as f64;
    (fdp, tpp)
}

/// Evaluate an estimate on held-out data. `truth` enables FDP/TPP; without
/// it those fields are absent and only size and MSE are reported.
pub fn evaluate(estimate: &[f64], truth: Option<&[f64]>, test: &Dataset) -> Result<Metrics> {
    let p = test.p();
    if estimate.len() != p {
        return Err(Error::Dimension(format!(
            "estimate has length {}, test design has {} columns",
            estimate.len(),
            p
        )));
    }
    if let Some(t) = truth {
        if t.len() != p {
            return Err(Error::Dimension(format!(
                "truth has length {}, test design has {} columns",
                t.len(),
                p
            )));
        }
    }
    let n = test.n();
    let mut resid = test.y.clone();
    for (j, &b) in estimate.iter().enumerate() {
        if b != 0.0 {
            axpy(-b, test.x.col(j), &mut resid);
        }
    }
    let mse = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let selected = support_of(estimate);
    let (fdp, tpp) = match truth {
        Some(t) => {
            let ts = support_of(t);
            let (f, tp) = fdp_tpp(&selected, &ts);
            (Some(f), Some(tp))
        }
        None => (None, None),
    };
    Ok(Metrics {
        size: selected.len(),
        mse,
        fdp,
        tpp,
    })
}

/// Per-size TPP/FDP averages across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PathQuality {
    /// `tpp[t-1]` and `fdp[t-1]` summarize model size `t`.
    pub tpp: Vec<f64>,
    pub fdp: Vec<f64>,
    pub max_size: usize,
}

/// Average TPP and FDP at each model size along a family of paths.
///
/// `paths[r]` lists the supports of replicate r's path entries in grid
/// order (sparse to dense). For each size the first support attaining it is
/// scored; sizes a path skips inherit the nearest sparser support.
pub fn path_quality(
    paths: &[Vec<Vec<usize>>],
    truth_supports: &[Vec<usize>],
    max_size: usize,
) -> Result<PathQuality> {
    if paths.len() != truth_supports.len() {
        return Err(Error::Dimension(format!(
            "{} paths but {} truth vectors",
            paths.len(),
            truth_supports.len()
        )));
    }
    if paths.is_empty() {
        return Err(Error::Parameter(format!("no paths")));
    }
    let mut tpp = vec![0.0; max_size];
    let mut fdp = vec![0.0; max_size];
    for (path, ts) in paths.iter().zip(truth_supports.iter()) {
        let mut first_at_size: Vec<Option<(f64, f64)>> = vec![None; max_size + 1];
        for support in path {
            let s = support.len();
            if s >= 1 && s <= max_size && first_at_size[s].is_none() {
                first_at_size[s] = Some(fdp_tpp(support, ts));
            }
        }
        let mut last = (0.0, 0.0);
        for t in 1..=max_size {
            if let Some(v) = first_at_size[t] {
                last = v;
            }
            fdp[t - 1] += last.0;
            tpp[t - 1] += last.1;
        }
    }
    let r = paths.len() as f64;
    for v in tpp.iter_mut() {
        *v /= r;
    }
    for v in fdp.iter_mut() {
        *v /= r;
    }
    Ok(PathQuality {
        tpp,
        fdp,
        max_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SimConfig};

    fn test_ds() -> Dataset {
        generate_synthetic(SimConfig {
            n: 50,
            p: 6,
            k: 2,
            s_star: 3.0,
            rho: 0.0,
            seed: 33,
        })
        .unwrap()
    }

    #[test]
    fn oracle_estimate_scores_perfectly() {
        let ds = test_ds();
        let truth = ds.truth.clone().unwrap();
        let m = evaluate(&truth, Some(&truth), &ds).unwrap();
        assert_eq!(m.size, 2);
        assert_eq!(m.fdp, Some(0.0));
        assert_eq!(m.tpp, Some(1.0));
        // Residual is exactly the noise, so MSE is near 1.
        assert!(m.mse > 0.3 && m.mse < 3.0);
    }

    #[test]
    fn null_estimate_uses_guarded_denominator() {
        let ds = test_ds();
        let truth = ds.truth.clone().unwrap();
        let zero = vec![0.0; 6];
        let m = evaluate(&zero, Some(&truth), &ds).unwrap();
        assert_eq!(m.size, 0);
        assert_eq!(m.fdp, Some(0.0));
        assert_eq!(m.tpp, Some(0.0));
    }

    #[test]
    fn missing_truth_flags_selection_metrics() {
        let ds = test_ds();
        let est = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let m = evaluate(&est, None, &ds).unwrap();
        assert!(m.fdp.is_none());
        assert!(m.tpp.is_none());
        assert_eq!(m.size, 1);
    }

    #[test]
    fn discovery_counts_partition_selection() {
        // true discoveries + false discoveries = selections, exactly.
        let truth_support = vec![0usize, 1, 2];
        let selected = vec![1usize, 2, 4, 5];
        let (fdp, tpp) = fdp_tpp(&selected, &truth_support);
        let true_disc = (tpp * truth_support.len() as f64).round() as usize;
        let false_disc = (fdp * selected.len() as f64).round() as usize;
        assert_eq!(true_disc + false_disc, selected.len());
    }

    #[test]
    fn perfect_path_quality() {
        // All k true variables first: FDP stays 0 through size k, TPP hits 1.
        let truth = vec![0usize, 1, 2];
        let path = vec![
            vec![0usize],
            vec![0, 1],
            vec![0, 1, 2],
            vec![0, 1, 2, 5],
        ];
        let q = path_quality(&[path], &[truth], 4).unwrap();
        assert_eq!(q.fdp[..3], [0.0, 0.0, 0.0]);
        assert!((q.tpp[2] - 1.0).abs() < 1e-15);
        assert!((q.fdp[3] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn skipped_sizes_carry_the_sparser_support() {
        let truth = vec![0usize];
        // Path jumps from size 1 straight to size 3.
        let path = vec![vec![0usize], vec![0, 4, 5]];
        let q = path_quality(&[path], &[truth], 3).unwrap();
        // Size 2 inherits the size-1 entry.
        assert!((q.tpp[1] - 1.0).abs() < 1e-15);
        assert_eq!(q.fdp[1], 0.0);
        assert!((q.fdp[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_ordering_matches_hypergeometric_expectation() {
        // Variables entering in uniformly random order: E[TPP at size t]
        // equals t*k/p / k = t/p.
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let p = 10usize;
        let k = 5usize;
        let truth: Vec<usize> = (0..k).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let reps = 4000;
        let mut paths = Vec::with_capacity(reps);
        let mut truths = Vec::with_capacity(reps);
        for _ in 0..reps {
            let mut perm: Vec<usize> = (0..p).collect();
            perm.shuffle(&mut rng);
            let mut path = Vec::with_capacity(p);
            for t in 1..=p {
                path.push(perm[..t].to_vec());
            }
            paths.push(path);
            truths.push(truth.clone());
        }
        let q = path_quality(&paths, &truths, p).unwrap();
        for t in 1..=p {
            let want = t as f64 / p as f64;
            assert!(
                (q.tpp[t - 1] - want).abs() < 0.03,
                "size {t}: {} vs {want}",
                q.tpp[t - 1]
            );
        }
    }
}
