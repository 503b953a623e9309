//! Seeded random states, unitaries, local instruments and separable channels.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::channels::{LocalKrausPair, SeparableChannel};
use crate::measures::negativity;
use crate::qmat::{hermitian_eig, CMat2, CMat4};
use crate::states::DensityMatrix;

const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("sampling exhausted after {0} rejections")]
    SamplingExhausted(usize),
    #[error("n_kraus must be ≥ 1")]
    NoKraus,
}

pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn gaussian_mat2<R: Rng + ?Sized>(rng: &mut R) -> CMat2 {
    let mut m = CMat2::zeros();
    for row in m.0.iter_mut() {
        for z in row.iter_mut() {
            *z = gaussian_c64(rng);
        }
    }
    m
}

/// `ρ = GG†/tr(GG†)` with `G` a 4×`rank` complex Gaussian matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> DensityMatrix {
    assert!((1..=4).contains(&rank), "rank must be in 1..=4");
    let mut g = CMat4::zeros();
    for row in g.0.iter_mut() {
        for z in row.iter_mut().take(rank) {
            *z = gaussian_c64(rng);
        }
    }
    let m = g * g.adjoint();
    DensityMatrix::from_physical(m.scale_re(1.0 / m.trace().re))
}

/// Rejection sampling of [`random_density_matrix`] until the negativity
/// exceeds `min_negativity`.
pub fn random_entangled_state<R: Rng + ?Sized>(
    rng: &mut R,
    rank: usize,
    min_negativity: f64,
) -> Result<DensityMatrix, SamplingError> {
    for _ in 0..MAX_REJECTIONS {
        let rho = random_density_matrix(rng, rank);
        if negativity(&rho) > min_negativity {
            return Ok(rho);
        }
    }
    Err(SamplingError::SamplingExhausted(MAX_REJECTIONS))
}

/// Haar-like unitary from the polar part of a Gaussian matrix.
pub fn random_unitary2<R: Rng + ?Sized>(rng: &mut R) -> CMat2 {
    loop {
        let g = gaussian_mat2(rng);
        if let Some(r) = (g.adjoint() * g).inverse_sqrt_psd(1e-8) {
            return g * r;
        }
    }
}

/// Eigenvector matrix of a random Hermitian matrix.
pub fn random_unitary4<R: Rng + ?Sized>(rng: &mut R) -> CMat4 {
    let mut h = CMat4::zeros();
    for i in 0..4 {
        h.0[i][i] = C64::new(StandardNormal.sample(rng), 0.0);
        for j in (i + 1)..4 {
            let z = gaussian_c64(rng);
            h.0[i][j] = z;
            h.0[j][i] = z.conj();
        }
    }
    hermitian_eig(&h).expect("hermitian by construction").unitary()
}

/// Dirichlet(1, …, 1) weights.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// A complete local measurement `{M_i}`, `Σ M_i†M_i = I`, with a random mix
/// of weak (near-identity), generic and rank-one elements.
pub fn random_local_instrument<R: Rng + ?Sized>(rng: &mut R, outcomes: usize) -> Vec<CMat2> {
    loop {
        let raw: Vec<CMat2> = (0..outcomes)
            .map(|_| match rng.random_range(0..3) {
                0 => {
                    let strength: f64 = rng.random_range(0.0..0.5);
                    CMat2::identity() + gaussian_mat2(rng).scale_re(strength)
                }
                1 => gaussian_mat2(rng),
                _ => {
                    let x = [gaussian_c64(rng), gaussian_c64(rng)];
                    let y = [gaussian_c64(rng), gaussian_c64(rng)];
                    CMat2::outer(&x, &y)
                }
            })
            .collect();
        let s = raw.iter().fold(CMat2::zeros(), |acc, m| acc + m.adjoint() * *m);
        let (vals, _) = s.hermitian_eig();
        if vals[1] <= 1e-6 * vals[0] {
            continue;
        }
        let r = s.inverse_sqrt_psd(0.0).expect("positive definite");
        return raw.into_iter().map(|m| m * r).collect();
    }
}

/// Random one-way LOCC instrument with exactly `n_kraus` product Kraus
/// operators: one party measures with `m` outcomes, and for each outcome the
/// other party applies its own complete measurement. Either party may go
/// first. Completeness holds by construction; samples whose numerical
/// residual exceeds the channel tolerance are rejected.
pub fn random_separable_channel_with<R: Rng + ?Sized>(
    rng: &mut R,
    n_kraus: usize,
) -> Result<SeparableChannel, SamplingError> {
    if n_kraus == 0 {
        return Err(SamplingError::NoKraus);
    }
    for _ in 0..MAX_REJECTIONS {
        let first_outcomes = rng.random_range(1..=n_kraus);
        let mut counts = vec![1usize; first_outcomes];
        for _ in first_outcomes..n_kraus {
            let k = rng.random_range(0..first_outcomes);
            counts[k] += 1;
        }
        let alice_first = rng.random_bool(0.5);
        let first = random_local_instrument(rng, first_outcomes);
        let mut kraus = Vec::with_capacity(n_kraus);
        for (m, &k) in first.iter().zip(&counts) {
            for second in random_local_instrument(rng, k) {
                kraus.push(if alice_first {
                    LocalKrausPair::new(*m, second)
                } else {
                    LocalKrausPair::new(second, *m)
                });
            }
        }
        if let Ok(ch) = SeparableChannel::new(kraus, true) {
            return Ok(ch);
        }
    }
    Err(SamplingError::SamplingExhausted(MAX_REJECTIONS))
}

/// Deterministic in `seed`.
pub fn random_separable_channel(seed: u64, n_kraus: usize) -> Result<SeparableChannel, SamplingError> {
    let mut rng = crate::exec::trial_rng(seed, u64::MAX);
    random_separable_channel_with(&mut rng, n_kraus)
}

/// Product pure state `|a⟩ ⊗ |b⟩` with Haar-random factors.
pub fn random_product_vector<R: Rng + ?Sized>(rng: &mut R) -> ([C64; 2], [C64; 2]) {
    let ua = random_unitary2(rng);
    let ub = random_unitary2(rng);
    ([ua.0[0][0], ua.0[1][0]], [ub.0[0][0], ub.0[1][0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::trial_rng;

    #[test]
    fn density_matrix_ranks() {
        let mut rng = trial_rng(3, 0);
        for rank in 1..=4 {
            let rho = random_density_matrix(&mut rng, rank);
            assert_eq!(rho.rank(1e-9), rank);
        }
    }

    #[test]
    fn single_kraus_is_product_unitary() {
        for seed in 0..20 {
            let ch = random_separable_channel(seed, 1).unwrap();
            let k = ch.kraus()[0];
            assert!(k.a.unitarity_defect() < 1e-10);
            assert!(k.b.unitarity_defect() < 1e-10);
        }
    }

    #[test]
    fn completeness_and_determinism() {
        for seed in 0..1000 {
            let n = 1 + (seed as usize % 8);
            let ch = random_separable_channel(seed, n).unwrap();
            assert_eq!(ch.len(), n);
            assert!(ch.completeness_residual() < 1e-10);
        }
        assert_eq!(random_separable_channel(5, 4), random_separable_channel(5, 4));
        assert_ne!(random_separable_channel(5, 4), random_separable_channel(6, 4));
        assert_eq!(random_separable_channel(1, 0), Err(SamplingError::NoKraus));
    }

    #[test]
    fn unitaries() {
        let mut rng = trial_rng(11, 0);
        for _ in 0..20 {
            assert!(random_unitary2(&mut rng).unitarity_defect() < 1e-12);
            assert!(random_unitary4(&mut rng).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn entangled_sampler_respects_margin() {
        let mut rng = trial_rng(2, 0);
        for rank in [3, 4] {
            let rho = random_entangled_state(&mut rng, rank, 1e-4).unwrap();
            assert!(negativity(&rho) > 1e-4);
            assert_eq!(rho.rank(1e-9), rank);
        }
    }
}
