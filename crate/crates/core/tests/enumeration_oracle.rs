//! Exhaustive model enumeration as ground truth for the spike-and-slab
//! sampler's inclusion probabilities and posterior means.

use decouple_core::data::{center, generate_synthetic, SimConfig};
use decouple_core::spikeslab::{enumerate_exact, sample_ss};

fn sim(n: usize, p: usize, k: usize, s: f64, rho: f64, seed: u64) -> decouple_core::Dataset {
    center(
        &generate_synthetic(SimConfig {
            n,
            p,
            k,
            s_star: s,
            rho,
            seed,
        })
        .unwrap(),
    )
    .unwrap()
}

#[test]
fn sampler_pips_match_enumeration_p8() {
    let ds = sim(40, 8, 2, 1.5, 0.3, 71);
    let exact = enumerate_exact(&ds).unwrap();
    let draws = sample_ss(&ds, 20000, 2000, 5).unwrap();
    for j in 0..8 {
        assert!(
            (draws.pip[j] - exact.pip[j]).abs() < 0.01,
            "pip[{j}]: sampler {} vs exact {}",
            draws.pip[j],
            exact.pip[j]
        );
    }
    // The raw inclusion frequency agrees with the Rao-Blackwellized PIP up
    // to Monte Carlo error.
    let raw = draws.raw_inclusion_freq();
    for j in 0..8 {
        assert!(
            (raw[j] - draws.pip[j]).abs() < 0.02,
            "raw[{j}] {} vs rb {}",
            raw[j],
            draws.pip[j]
        );
    }
}

#[test]
fn sampler_post_mean_matches_enumeration_p10() {
    let ds = sim(50, 10, 3, 5.0, 0.0, 72);
    let exact = enumerate_exact(&ds).unwrap();
    let draws = sample_ss(&ds, 20000, 2000, 11).unwrap();
    // Rao-Blackwellized mean against the exact model average.
    for j in 0..10 {
        assert!(
            (draws.post_mean[j] - exact.post_mean[j]).abs() < 0.02,
            "post_mean[{j}]: {} vs {}",
            draws.post_mean[j],
            exact.post_mean[j]
        );
    }
    // Plain draw average converges to the same limit.
    let dm = draws.draw_mean();
    for j in 0..10 {
        assert!(
            (dm[j] - exact.post_mean[j]).abs() < 0.02,
            "draw_mean[{j}]: {} vs {}",
            dm[j],
            exact.post_mean[j]
        );
    }
}

#[test]
fn enumeration_is_consistent_with_itself() {
    // PIP and post_mean recomputed from the model-probability table.
    let ds = sim(40, 8, 2, 2.0, 0.2, 73);
    let e = enumerate_exact(&ds).unwrap();
    let p = 8;
    let mut pip = vec![0.0; p];
    for (mask, &prob) in e.model_probs.iter().enumerate() {
        for j in 0..p {
            if (mask >> j) & 1 == 1 {
                pip[j] += prob;
            }
        }
    }
    for j in 0..p {
        assert!((pip[j] - e.pip[j]).abs() < 1e-12);
    }
}
