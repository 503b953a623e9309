//! Numerical search for LOCC protocols between arbitrary states.
//!
//! Candidates are mixtures of the identity, the six one-sided Pauli
//! unitaries and one preparation of a diagonal (hence separable) state, so
//! any protocol found is itself a constructive LOCC certificate.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::nelder_mead::{minimize, NelderMeadOptions};
use crate::channels::{Atom, Protocol};
use crate::convertibility::verify_protocol;
use crate::exec::trial_rng;
use crate::qmat::{CMat2, CMat4};
use crate::states::DensityMatrix;

/// A protocol is reported only when it reaches the target this closely.
pub const SEARCH_SUCCESS_DISTANCE: f64 = 1e-6;

const N_UNITARY: usize = 7;
const N_PARAMS: usize = N_UNITARY + 1 + 4;

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub restarts: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { restarts: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// `‖apply(protocol, ρ) − ρ'‖_F` for the best candidate.
    pub best_distance: f64,
    /// Present iff `best_distance < SEARCH_SUCCESS_DISTANCE`.
    pub protocol: Option<Protocol>,
    pub evaluations: usize,
    /// Best objective reached by each restart.
    pub restart_best: Vec<f64>,
}

fn unitaries() -> [(CMat2, CMat2); N_UNITARY] {
    let (id, x, y, z) = (CMat2::identity(), CMat2::pauli_x(), CMat2::pauli_y(), CMat2::pauli_z());
    [(id, id), (x, id), (y, id), (z, id), (id, x), (id, y), (id, z)]
}

struct Decoded {
    unitary: [f64; N_UNITARY],
    prep: f64,
    diag: [f64; 4],
}

fn decode(x: &[f64]) -> Decoded {
    let sq: Vec<f64> = x[..N_UNITARY + 1].iter().map(|v| v * v).collect();
    let total: f64 = sq.iter().sum();
    let mut unitary = [0.0; N_UNITARY];
    let prep = if total > 0.0 {
        for k in 0..N_UNITARY {
            unitary[k] = sq[k] / total;
        }
        sq[N_UNITARY] / total
    } else {
        unitary[0] = 1.0;
        0.0
    };
    let dq: Vec<f64> = x[N_UNITARY + 1..].iter().map(|v| v * v).collect();
    let dt: f64 = dq.iter().sum();
    let diag = if dt > 0.0 {
        [dq[0] / dt, dq[1] / dt, dq[2] / dt, dq[3] / dt]
    } else {
        [0.25; 4]
    };
    Decoded { unitary, prep, diag }
}

fn to_protocol(d: &Decoded) -> Protocol {
    let mut atoms: Vec<(f64, Atom)> = unitaries()
        .into_iter()
        .zip(d.unitary)
        .filter(|(_, w)| *w > 0.0)
        .map(|((ua, ub), w)| (w, Atom::LocalUnitary { ua, ub }))
        .collect();
    if d.prep > 0.0 {
        let sigma = DensityMatrix::diagonal(d.diag).expect("normalized diagonal");
        atoms.push((d.prep, Atom::DiscardPrepare(sigma)));
    }
    Protocol::new(atoms).expect("weights are a probability vector")
}

fn identity_start() -> Vec<f64> {
    let mut x = vec![0.0; N_PARAMS];
    x[0] = 1.0;
    for v in &mut x[N_UNITARY + 1..] {
        *v = 1.0;
    }
    x
}

/// Minimizes `‖apply(protocol, ρ) − ρ'‖_F` over the candidate family with
/// Nelder–Mead restarts, spending at most `budget` objective evaluations.
pub fn convert_search(rho: &DensityMatrix, rho2: &DensityMatrix, budget: usize, seed: u64) -> SearchOutcome {
    convert_search_with(rho, rho2, budget, seed, &SearchOptions::default())
}

/// Restart 0 starts at the identity protocol; odd restarts polish the best
/// point so far with a small simplex; other restarts start at random points.
pub fn convert_search_with(
    rho: &DensityMatrix,
    rho2: &DensityMatrix,
    budget: usize,
    seed: u64,
    opts: &SearchOptions,
) -> SearchOutcome {
    let images: Vec<CMat4> = unitaries()
        .iter()
        .map(|(ua, ub)| crate::qmat::kron2(ua, ub).sandwich(rho.matrix()))
        .collect();
    let target = *rho2.matrix();
    let objective = |x: &[f64]| {
        let d = decode(x);
        let mut m = CMat4::diag(d.diag).scale_re(d.prep);
        for (img, w) in images.iter().zip(d.unitary) {
            m = m + img.scale_re(w);
        }
        m.distance(&target)
    };

    let restarts = opts.restarts.max(1);
    let per_restart = budget / restarts;
    let mut rng = trial_rng(seed, 0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    let mut restart_best = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let (x0, step) = match &best {
            Some((bx, _)) if r % 2 == 1 => (bx.clone(), 0.05),
            _ if r == 0 => (identity_start(), 0.5),
            _ => (random_start(&mut rng), 0.5),
        };
        let nm = NelderMeadOptions {
            step,
            max_evals: per_restart,
            ftol: 1e-20,
            target: 1e-13,
        };
        let m = minimize(objective, &x0, &nm);
        evaluations += m.evals;
        restart_best.push(m.value);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }

    let x = best.map(|(x, _)| x).unwrap_or_else(identity_start);
    let protocol = to_protocol(&decode(&x));
    let best_distance = verify_protocol(&protocol, rho, rho2);
    SearchOutcome {
        best_distance,
        protocol: (best_distance < SEARCH_SUCCESS_DISTANCE).then_some(protocol),
        evaluations,
        restart_best,
    }
}

fn random_start<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    (0..N_PARAMS).map(|_| StandardNormal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_mems, make_werner, MemsWeights, WernerParam};

    fn werner(w: f64) -> DensityMatrix {
        make_werner(WernerParam::new(w).unwrap())
    }

    #[test]
    fn identical_states_need_no_search() {
        let rho = werner(0.7);
        let out = convert_search(&rho, &rho, 100, 1);
        assert!(out.best_distance < 1e-15);
        let p = out.protocol.unwrap();
        assert_eq!(p.atoms().len(), 1);
    }

    #[test]
    fn werner_dilution_is_found() {
        let out = convert_search(&werner(0.9), &werner(0.45), 20_000, 42);
        assert!(out.best_distance < 1e-6, "{:?}", out.restart_best);
        assert!(out.protocol.is_some());
        assert!(out.evaluations <= 20_000);
    }

    #[test]
    fn full_rank_cannot_reach_rank_two() {
        let target = make_mems(MemsWeights::new([0.9, 0.1, 0.0, 0.0]).unwrap());
        let out = convert_search(&werner(0.9), &target, 20_000, 42);
        assert_eq!(out.restart_best.len(), 10);
        assert!(out.restart_best.iter().all(|&v| v > 1e-3));
        assert!(out.protocol.is_none());
    }

    #[test]
    fn deterministic() {
        let a = convert_search(&werner(0.8), &werner(0.3), 3000, 5);
        let b = convert_search(&werner(0.8), &werner(0.3), 3000, 5);
        assert_eq!(a.restart_best, b.restart_best);
        assert_eq!(a.best_distance, b.best_distance);
    }
}
