//! Seeded random instance generators shared by the integration tests.
#![allow(dead_code)]

use congested_ot_core::{Matrix, PenalizedInstance, ProblemInstance};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, l: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(n, l, |_, _| rng.gen_range(lo..hi))
}

/// Splits `total ≥ parts` into `parts` positive integers.
pub fn composition(rng: &mut ChaCha8Rng, total: u64, parts: usize) -> Vec<u64> {
    let mut v = vec![1u64; parts];
    for _ in 0..total - parts as u64 {
        v[rng.gen_range(0..parts)] += 1;
    }
    v
}

/// Balanced marginals with integer entries and total mass `m`.
pub fn integer_marginals(rng: &mut ChaCha8Rng, n: usize, l: usize, m: u64) -> (Vec<f64>, Vec<f64>) {
    let mu = composition(rng, m, n).into_iter().map(|v| v as f64).collect();
    let nu = composition(rng, m, l).into_iter().map(|v| v as f64).collect();
    (mu, nu)
}

/// Congestion instance with `c ∈ [0, 10)`, `a ∈ [0.5, 5)` and integer marginals.
pub fn congestion(rng: &mut ChaCha8Rng, n: usize, l: usize) -> ProblemInstance {
    let m = rng.gen_range((n.max(l) as u64)..=(8 * n.max(l)) as u64);
    let (mu, nu) = integer_marginals(rng, n, l, m);
    let mut p = ProblemInstance::congestion(
        random_matrix(rng, n, l, 0.0, 10.0),
        random_matrix(rng, n, l, 0.5, 5.0),
        mu,
        nu,
    );
    p.fixed_cost = random_matrix(rng, n, l, 0.0, 5.0);
    p
}

/// Penalized instance satisfying the spectral gate with margin: `a ∈ [1, 3)`,
/// `ε_i < 0.45 min a / L`, `δ_j < 0.45 min a / N`.
pub fn spectral_gate(rng: &mut ChaCha8Rng, n: usize, l: usize) -> PenalizedInstance {
    let a = random_matrix(rng, n, l, 1.0, 3.0);
    let min_a = a.min();
    let eps = (0..n).map(|_| rng.gen_range(0.0..0.45 * min_a / l as f64)).collect();
    let delta = (0..l).map(|_| rng.gen_range(0.0..0.45 * min_a / n as f64)).collect();
    let mu = (0..n).map(|_| rng.gen_range(5.0..40.0)).collect();
    let nu = (0..l).map(|_| rng.gen_range(5.0..40.0)).collect();
    let base = ProblemInstance::congestion(random_matrix(rng, n, l, 0.0, 2.0), a, mu, nu);
    PenalizedInstance::new(base, eps, delta)
}

/// Like [`spectral_gate`] but resampled until the direct solution is interior.
pub fn interior_spectral_gate(rng: &mut ChaCha8Rng, n: usize, l: usize) -> PenalizedInstance {
    loop {
        let inst = spectral_gate(rng, n, l);
        if congested_ot_core::penalized::solve_direct(&inst).unwrap().interior {
            return inst;
        }
    }
}

/// `δ ≡ 0`, `D = βI`, `L ε_i < min{1, β}`.
pub fn closed_form(rng: &mut ChaCha8Rng, n: usize, l: usize) -> PenalizedInstance {
    let beta = rng.gen_range(0.25..6.0);
    let cap = f64::min(1.0, beta) / l as f64;
    let eps = (0..n).map(|_| rng.gen_range(0.01 * cap..0.99 * cap)).collect();
    let mu = (0..n).map(|_| rng.gen_range(5.0..40.0)).collect();
    let nu = (0..l).map(|_| rng.gen_range(5.0..40.0)).collect();
    let base = ProblemInstance::congestion(random_matrix(rng, n, l, 0.0, 4.0), Matrix::filled(n, l, beta), mu, nu);
    PenalizedInstance::new(base, eps, vec![0.0; l])
}

/// `δ ≡ 0`, `a ≡ 0`, `0 < c_ij = c_i < 2 ε_i μ_i`, with dyadic parameters so
/// every quantity in `x_i = μ_i − c_i/(2ε_i)` is exactly representable.
pub fn linear_rows(rng: &mut ChaCha8Rng, n: usize, l: usize) -> PenalizedInstance {
    let eps: Vec<f64> = (0..n).map(|_| f64::powi(2.0, rng.gen_range(-4..=3))).collect();
    let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=64) as f64).collect();
    let c: Vec<f64> = (0..n)
        .map(|i| {
            let top = 2.0 * eps[i] * mu[i];
            // k / 64 of the upper limit, 0 < k < 64
            top * rng.gen_range(1..64) as f64 / 64.0
        })
        .collect();
    let total: f64 = mu.iter().sum();
    let nu = vec![total / l as f64; l];
    let base = ProblemInstance::linear(Matrix::from_fn(n, l, |i, _| c[i]), mu, nu);
    PenalizedInstance::new(base, eps, vec![0.0; l])
}

/// `a ≡ ρ`, `ε ≡ δ ≡ ζ` with `ρ > 2NLζ`.
pub fn uniform_weights(rng: &mut ChaCha8Rng, n: usize, l: usize) -> PenalizedInstance {
    let zeta = rng.gen_range(0.05..1.0);
    let rho = 2.0 * (n * l) as f64 * zeta * rng.gen_range(1.05..20.0);
    let mu = (0..n).map(|_| rng.gen_range(5.0..40.0)).collect();
    let nu = (0..l).map(|_| rng.gen_range(5.0..40.0)).collect();
    let base = ProblemInstance::congestion(random_matrix(rng, n, l, 0.0, 4.0), Matrix::filled(n, l, rho), mu, nu);
    PenalizedInstance::new(base, vec![zeta; n], vec![zeta; l])
}
