//! An independently coded proximal-gradient solver checks the coordinate
//! descent path, and the lasso baseline is pinned to the shared kernel.

use decouple_core::data::{center, generate_synthetic, SimConfig};
use decouple_core::linalg::{axpy, dot, Mat};
use decouple_core::weights::{unit_weights, WeightVector};
use decouple_core::wlasso::{self, TargetKind};
use rand::{Rng, SeedableRng};

/// FISTA on f(b) = ||t - Xb||^2 + lambda sum w_j |b_j|; shares nothing with
/// the coordinate-descent implementation beyond the objective.
fn fista(target: &[f64], x: &Mat, w: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let p = x.ncols();
    // Lipschitz constant of the gradient: 2 * lambda_max(X'X), by power
    // iteration.
    let mut v = vec![1.0f64; p];
    let mut lmax = 1.0;
    for _ in 0..200 {
        // u = X'X v
        let xv = x.matvec(&v);
        let u = x.tr_matvec(&xv);
        lmax = dot(&u, &v) / dot(&v, &v).max(1e-300);
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        v = u.iter().map(|a| a / norm).collect();
    }
    let step = 1.0 / (2.0 * lmax * 1.0001);
    let mut b = vec![0.0f64; p];
    let mut z = b.clone();
    let mut t_k = 1.0f64;
    for _ in 0..iters {
        // gradient of smooth part at z: -2 X'(t - Xz)
        let mut r = target.to_vec();
        for (j, &zj) in z.iter().enumerate() {
            if zj != 0.0 {
                axpy(-zj, x.col(j), &mut r);
            }
        }
        let grad: Vec<f64> = (0..p).map(|j| -2.0 * dot(x.col(j), &r)).collect();
        let mut b_new = vec![0.0f64; p];
        for j in 0..p {
            let v = z[j] - step * grad[j];
            let thr = step * lambda * w[j];
            b_new[j] = if v > thr {
                v - thr
            } else if v < -thr {
                v + thr
            } else {
                0.0
            };
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let momentum = (t_k - 1.0) / t_new;
        for j in 0..p {
            z[j] = b_new[j] + momentum * (b_new[j] - b[j]);
        }
        b = b_new;
        t_k = t_new;
    }
    b
}

#[test]
fn coordinate_descent_matches_proximal_gradient() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
    for trial in 0..4 {
        let (n, p) = (30, 12);
        let mut x = Mat::zeros(n, p);
        for j in 0..p {
            for i in 0..n {
                x[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut w = unit_weights(p);
        if trial % 2 == 1 {
            for v in w.w.iter_mut() {
                *v = rng.gen_range(0.3..2.0);
            }
        }
        let lam = wlasso::lambda_max(&t, &x, &w).unwrap() * 0.25;
        let cd = wlasso::solve_weighted(&t, &x, &w, lam).unwrap();
        let fi = fista(&t, &x, &w.w, lam, 100_000);
        for j in 0..p {
            assert!(
                (cd[j] - fi[j]).abs() < 1e-6,
                "trial {trial} coord {j}: cd {} vs fista {}",
                cd[j],
                fi[j]
            );
        }
    }
}

#[test]
fn unit_weight_solver_equals_plain_l1() {
    // A weighted solve with all-ones weights is the plain lasso.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let (n, p) = (25, 8);
    let mut x = Mat::zeros(n, p);
    for j in 0..p {
        for i in 0..n {
            x[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let unit = unit_weights(p);
    let as_weighted = WeightVector {
        w: vec![1.0; p],
        kind: decouple_core::PenaltyKind::Is,
        eps: Some(0.5),
    };
    let lam = wlasso::lambda_max(&t, &x, &unit).unwrap() * 0.4;
    let a = wlasso::solve_weighted(&t, &x, &unit, lam).unwrap();
    let b = wlasso::solve_weighted(&t, &x, &as_weighted, lam).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lasso_baseline_path_equals_shared_kernel_path() {
    let ds = center(
        &generate_synthetic(SimConfig {
            n: 60,
            p: 20,
            k: 3,
            s_star: 4.0,
            rho: 0.2,
            seed: 44,
        })
        .unwrap(),
    )
    .unwrap();
    let cv = decouple_core::baselines::lasso_cv(&ds, 5, 3).unwrap();
    let direct = wlasso::path(
        &ds.y,
        &ds.x,
        &unit_weights(20),
        TargetKind::RawY,
        wlasso::DEFAULT_GRID,
    )
    .unwrap();
    assert_eq!(cv.full_path.lambdas.len(), direct.lambdas.len());
    for g in 0..direct.lambdas.len() {
        assert!((cv.full_path.lambdas[g] - direct.lambdas[g]).abs() <= 1e-12 * direct.lambdas[g]);
        for j in 0..20 {
            assert!(
                (cv.full_path.coefs[(j, g)] - direct.coefs[(j, g)]).abs() < 1e-7,
                "grid {g} coord {j}"
            );
        }
    }
}

#[test]
fn bd_target_at_zero_lambda_recovers_posterior_mean_fit() {
    // Full-column-rank X and lambda = 0: the stage-two minimizer is exactly
    // the smoothed-target coefficients.
    let ds = center(
        &generate_synthetic(SimConfig {
            n: 40,
            p: 6,
            k: 2,
            s_star: 5.0,
            rho: 0.0,
            seed: 45,
        })
        .unwrap(),
    )
    .unwrap();
    let post_mean = vec![4.9, 5.1, 0.02, -0.01, 0.0, 0.03];
    let target = ds.x.matvec(&post_mean);
    let b = wlasso::solve_weighted(&target, &ds.x, &unit_weights(6), 0.0).unwrap();
    for j in 0..6 {
        assert!((b[j] - post_mean[j]).abs() < 1e-8);
    }
}
