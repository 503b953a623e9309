//! Randomized verification: separable-channel sampling, rank-monotonicity
//! counterexample hunts, monotone audits and protocol search.

mod nelder_mead;
mod sampling;
mod search;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{apply, bell_extremal_catalog, mix, Atom, CatalogEntry, Protocol, SeparableChannel};
use crate::exec::{map_trials, trial_rng, Exec};
use crate::measures::{bell_monotones, concurrence, negativity, MonotoneTriple};
use crate::qmat::CMat4;
use crate::states::{bell_diagonal_of, bell_projectors, is_entangled, make_bell_diagonal_ordered, BellWeights, DensityMatrix};

pub use nelder_mead::{minimize, Minimum, NelderMeadOptions};
pub use sampling::{
    gaussian_c64, gaussian_mat2, random_density_matrix, random_entangled_state, random_local_instrument,
    random_product_vector, random_separable_channel, random_separable_channel_with, random_simplex,
    random_unitary2, random_unitary4, SamplingError,
};
pub use search::{convert_search, convert_search_with, SearchOptions, SearchOutcome, SEARCH_SUCCESS_DISTANCE};

pub const DEFAULT_SEED: u64 = 42;

/// Output must be at least this entangled for a rank drop to count.
pub const FALSIFIER_NEGATIVITY_MARGIN: f64 = 1e-6;
/// Eigenvalues below this are treated as exact zeros.
pub const RANK_ZERO_MARGIN: f64 = 1e-12;
/// Eigenvalues above this are treated as genuine support.
pub const RANK_SUPPORT_MARGIN: f64 = 1e-6;
/// Slack on `E_k(in) ≥ E_k(out)` and on concurrence non-increase.
pub const AUDIT_TOL: f64 = 1e-9;
/// Rejection margin for sampled entangled inputs.
pub const INPUT_NEGATIVITY_MARGIN: f64 = 1e-4;

/// Real and imaginary parts of a 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixParts {
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

impl From<&CMat4> for MatrixParts {
    fn from(m: &CMat4) -> Self {
        Self {
            re: m.0.map(|row| row.map(|z| z.re)),
            im: m.0.map(|row| row.map(|z| z.im)),
        }
    }
}

impl From<&MatrixParts> for CMat4 {
    fn from(p: &MatrixParts) -> Self {
        let mut m = CMat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = num_complex::Complex64::new(p.re[i][j], p.im[i][j]);
            }
        }
        m
    }
}

/// A recorded violation together with what is needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub seed: u64,
    pub trial: u64,
    pub kind: String,
    pub input: MatrixParts,
    pub channel_seed: Option<u64>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub trials: u64,
    /// Number of comparisons actually evaluated, by category.
    pub checks: BTreeMap<String, u64>,
    pub counterexamples: Vec<Finding>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub elapsed: f64,
}

impl SearchReport {
    pub fn empty() -> Self {
        Self {
            trials: 0,
            checks: BTreeMap::new(),
            counterexamples: Vec::new(),
            elapsed: 0.0,
        }
    }

    pub fn checked(&self, category: &str) -> u64 {
        self.checks.get(category).copied().unwrap_or(0)
    }

    pub fn is_clean(&self) -> bool {
        self.counterexamples.is_empty()
    }

    /// Combines shards. Findings are kept sorted by `(seed, trial)`; elapsed
    /// time is the longest shard.
    pub fn merge(mut self, other: SearchReport) -> SearchReport {
        self.trials += other.trials;
        for (k, v) in other.checks {
            *self.checks.entry(k).or_insert(0) += v;
        }
        self.counterexamples.extend(other.counterexamples);
        self.counterexamples.sort_by_key(|f| (f.seed, f.trial));
        self.elapsed = self.elapsed.max(other.elapsed);
        self
    }

    /// Equality on everything except timing.
    pub fn same_outcome(&self, other: &SearchReport) -> bool {
        self.trials == other.trials && self.checks == other.checks && self.counterexamples == other.counterexamples
    }
}

#[derive(Default)]
struct TrialOutcome {
    checks: Vec<&'static str>,
    findings: Vec<Finding>,
}

fn collect(trials: u64, exec: Exec, start: Instant, f: impl Fn(u64) -> TrialOutcome + Sync + Send) -> SearchReport {
    let outcomes = map_trials(exec, trials, f);
    let mut report = SearchReport::empty();
    report.trials = trials;
    for o in outcomes {
        for c in o.checks {
            *report.checks.entry(c.to_string()).or_insert(0) += 1;
        }
        report.counterexamples.extend(o.findings);
    }
    report.counterexamples.sort_by_key(|f| (f.seed, f.trial));
    report.elapsed = start.elapsed().as_secs_f64();
    report
}

/// Seed of the channel used in `trial` of a run seeded with `seed`.
pub fn derived_channel_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which maps the rank falsifier feeds its inputs through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FalsifierMode {
    /// Random one-way LOCC instruments with 1 to 8 Kraus operators.
    Separable,
    /// Negative control: random global unitaries, which are not separable
    /// but preserve the spectrum.
    GlobalUnitary,
}

/// Rank counted only when the spectrum has a clear gap: `Some(r)` if the
/// top `r` eigenvalues exceed the support margin and the rest are below the
/// zero margin, `None` otherwise.
pub fn margin_rank(eigenvalues_desc: &[f64; 4]) -> Option<usize> {
    let r = eigenvalues_desc.iter().filter(|&&x| x > RANK_SUPPORT_MARGIN).count();
    eigenvalues_desc[r..].iter().all(|&x| x < RANK_ZERO_MARGIN).then_some(r)
}

fn fmt_spectrum(v: &[f64; 4]) -> String {
    format!("[{:e}, {:e}, {:e}, {:e}]", v[0], v[1], v[2], v[3])
}

fn rank_trial(seed: u64, trial: u64, mode: FalsifierMode) -> TrialOutcome {
    let mut rng = trial_rng(seed, trial);
    let rank = if rng.random_bool(0.5) { 3 } else { 4 };
    let Ok(rho) = random_entangled_state(&mut rng, rank, INPUT_NEGATIVITY_MARGIN) else {
        return TrialOutcome::default();
    };
    let channel_seed = derived_channel_seed(seed, trial);
    let out = match mode {
        FalsifierMode::Separable => {
            let n_kraus = rng.random_range(1..=8);
            match random_separable_channel(channel_seed, n_kraus) {
                Ok(ch) => apply(&ch, &rho),
                Err(_) => return TrialOutcome::default(),
            }
        }
        FalsifierMode::GlobalUnitary => {
            let mut crng = trial_rng(channel_seed, 0);
            let u = random_unitary4(&mut crng);
            DensityMatrix::from_physical(u.sandwich(rho.matrix()))
        }
    };
    let mut outcome = TrialOutcome::default();
    let neg = negativity(&out);
    if neg <= FALSIFIER_NEGATIVITY_MARGIN {
        return outcome;
    }
    outcome.checks.push("entangled_outputs");
    let out_eigs = out.eigenvalues();
    if let Some(r) = margin_rank(&out_eigs) {
        outcome.checks.push("gapped_outputs");
        let in_rank = rho.rank(RANK_SUPPORT_MARGIN);
        if r < in_rank {
            outcome.findings.push(Finding {
                seed,
                trial,
                kind: "rank_drop".into(),
                input: MatrixParts::from(rho.matrix()),
                channel_seed: Some(channel_seed),
                diagnostics: format!(
                    "input rank {in_rank} spectrum {}; output rank {r} spectrum {}; output negativity {neg:e}",
                    fmt_spectrum(&rho.eigenvalues()),
                    fmt_spectrum(&out_eigs)
                ),
            });
        }
    }
    outcome
}

/// Hunts for separable channels that lower the rank of an entangled state
/// while keeping it entangled.
pub fn falsify_rank_monotonicity(trials: u64, seed: u64) -> SearchReport {
    falsify_rank_monotonicity_with(trials, seed, Exec::default(), FalsifierMode::Separable)
}

pub fn falsify_rank_monotonicity_with(trials: u64, seed: u64, exec: Exec, mode: FalsifierMode) -> SearchReport {
    let start = Instant::now();
    collect(trials, exec, start, |t| rank_trial(seed, t, mode))
}

/// One logged step of the monotone audit.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTrial {
    pub input: [f64; 4],
    pub order: [usize; 4],
    pub mixture: Vec<(f64, usize)>,
    /// Bell-basis weights of the output, basis order.
    pub output: [f64; 4],
    /// Distance of the output from the Bell-diagonal matrix with those weights.
    pub off_bell: f64,
    pub output_entangled: bool,
    pub e_in: MonotoneTriple,
    pub e_out: Option<MonotoneTriple>,
}

fn random_entangled_bell<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    loop {
        let mut l: [f64; 4] = random_simplex(rng, 4).try_into().expect("four weights");
        l.sort_by(|a, b| b.total_cmp(a));
        if l[0] > 0.5 + 1e-6 {
            return l;
        }
    }
}

fn random_permutation<R: Rng + ?Sized>(rng: &mut R) -> [usize; 4] {
    let mut p = [0, 1, 2, 3];
    for i in (1..4).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

fn renormalized_bell(d: [f64; 4]) -> Option<BellWeights> {
    let d = d.map(|x| x.max(0.0));
    let s: f64 = d.iter().sum();
    BellWeights::from_unsorted(d.map(|x| x / s)).ok()
}

/// Input state, catalog mixture and output of monotone-audit trial `trial`.
/// `catalog` must be [`bell_extremal_catalog`]; an empty `catalog_subset`
/// means the whole catalog is eligible.
pub fn monotone_trial(seed: u64, trial: u64, catalog: &[CatalogEntry], catalog_subset: &[usize]) -> MonotoneTrial {
    let mut rng = trial_rng(seed, trial);
    let input = random_entangled_bell(&mut rng);
    let order = random_permutation(&mut rng);
    let rho = make_bell_diagonal_ordered(BellWeights::new(input).expect("sorted simplex point"), order);

    let eligible: Vec<usize> = if catalog_subset.is_empty() {
        (0..catalog.len()).collect()
    } else {
        catalog_subset.to_vec()
    };
    let n = rng.random_range(1..=4usize);
    let weights = random_simplex(&mut rng, n);
    let mixture: Vec<(f64, usize)> = weights
        .into_iter()
        .map(|w| (w, eligible[rng.random_range(0..eligible.len())]))
        .collect();
    let channel = mix(&mixture.iter().map(|&(w, k)| (w, catalog[k].channel.clone())).collect::<Vec<_>>())
        .expect("catalog mixtures are complete");
    let out = apply(&channel, &rho);

    let output = bell_diagonal_of(out.matrix());
    let proj = bell_projectors();
    let rebuilt = (0..4).fold(CMat4::zeros(), |acc, i| acc + proj[i].scale_re(output[i]));
    let off_bell = rebuilt.distance(out.matrix());
    let output_entangled = is_entangled(&out);
    let e_out = if output_entangled { renormalized_bell(output).map(|b| bell_monotones(&b)) } else { None };
    MonotoneTrial {
        input,
        order,
        mixture,
        output,
        off_bell,
        output_entangled,
        e_in: bell_monotones(&BellWeights::new(input).expect("sorted simplex point")),
        e_out,
    }
}

const OFF_BELL_TOL: f64 = 1e-10;

fn monotone_check(seed: u64, trial: u64, catalog: &[CatalogEntry], subset: &[usize]) -> TrialOutcome {
    let t = monotone_trial(seed, trial, catalog, subset);
    let mut outcome = TrialOutcome::default();
    let rho = make_bell_diagonal_ordered(BellWeights::new(t.input).expect("sorted"), t.order);
    let finding = |kind: &str, diagnostics: String| Finding {
        seed,
        trial,
        kind: kind.into(),
        input: MatrixParts::from(rho.matrix()),
        channel_seed: None,
        diagnostics,
    };
    if t.off_bell > OFF_BELL_TOL {
        outcome.findings.push(finding(
            "not_bell_diagonal",
            format!("mixture {:?} left off-diagonal mass {:e}", t.mixture, t.off_bell),
        ));
        return outcome;
    }
    let Some(e_out) = t.e_out else {
        return outcome;
    };
    outcome.checks.push("monotone");
    for (k, (a, b)) in t.e_in.as_array().iter().zip(e_out.as_array()).enumerate() {
        if !a.ge_within(&b, AUDIT_TOL) {
            outcome.findings.push(finding(
                &format!("monotone_e{}", k + 1),
                format!("mixture {:?}: E{}(in) = {a} < E{}(out) = {b}; output weights {:?}", t.mixture, k + 1, k + 1, t.output),
            ));
        }
    }
    outcome
}

/// A random LOCC-certified channel of one of three shapes: a one-way
/// instrument, a catalog mixture, or a mixture of random local unitaries and
/// product preparations.
fn random_certified_channel<R: Rng + ?Sized>(rng: &mut R, catalog: &[CatalogEntry]) -> Option<SeparableChannel> {
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(1..=6);
            random_separable_channel_with(rng, n).ok()
        }
        1 => {
            let n = rng.random_range(1..=4usize);
            let parts: Vec<(f64, SeparableChannel)> = random_simplex(rng, n)
                .into_iter()
                .map(|w| (w, catalog[rng.random_range(0..catalog.len())].channel.clone()))
                .collect();
            mix(&parts).ok()
        }
        _ => {
            let n = rng.random_range(1..=4usize);
            let atoms: Vec<(f64, Atom)> = random_simplex(rng, n)
                .into_iter()
                .map(|w| {
                    let atom = if rng.random_bool(0.6) {
                        Atom::LocalUnitary {
                            ua: random_unitary2(rng),
                            ub: random_unitary2(rng),
                        }
                    } else {
                        let (a, b) = random_product_vector(rng);
                        let psi = crate::qmat::kron_vec(&a, &b);
                        Atom::DiscardPrepare(DensityMatrix::pure(&psi).expect("unit product vector"))
                    };
                    (w, atom)
                })
                .collect();
            Protocol::new(atoms).ok().map(|p| p.compile().clone())
        }
    }
}

fn concurrence_check(seed: u64, trial: u64, catalog: &[CatalogEntry]) -> TrialOutcome {
    // separate stream from the monotone part of the same trial
    let mut rng = trial_rng(seed ^ 0x5A5A_5A5A_5A5A_5A5A, trial);
    let rank = rng.random_range(1..=4usize);
    let rho = random_density_matrix(&mut rng, rank);
    let mut outcome = TrialOutcome::default();
    let Some(ch) = random_certified_channel(&mut rng, catalog) else {
        return outcome;
    };
    if !ch.locc_certified() {
        return outcome;
    }
    let out = apply(&ch, &rho);
    let (c_in, c_out) = (concurrence(&rho), concurrence(&out));
    outcome.checks.push("concurrence");
    if c_out > c_in + AUDIT_TOL {
        outcome.findings.push(Finding {
            seed,
            trial,
            kind: "concurrence_increase".into(),
            input: MatrixParts::from(rho.matrix()),
            channel_seed: None,
            diagnostics: format!("C(in) = {c_in}, C(out) = {c_out}, {} Kraus operators", ch.len()),
        });
    }
    outcome
}

/// Checks `E_k(in) ≥ E_k(out)` for random catalog mixtures on entangled
/// Bell-diagonal states, and concurrence non-increase for random certified
/// channels on random states.
pub fn monotone_audit(trials: u64, seed: u64) -> SearchReport {
    monotone_audit_with(trials, seed, Exec::default(), &[])
}

/// `catalog_subset` restricts the mixtures to the given catalog indices
/// (empty = all); concurrence checks run only for the full catalog.
pub fn monotone_audit_with(trials: u64, seed: u64, exec: Exec, catalog_subset: &[usize]) -> SearchReport {
    let start = Instant::now();
    let catalog = bell_extremal_catalog();
    let full = catalog_subset.is_empty();
    collect(trials, exec, start, |t| {
        let mut o = monotone_check(seed, t, &catalog, catalog_subset);
        if full {
            let c = concurrence_check(seed, t, &catalog);
            o.checks.extend(c.checks);
            o.findings.extend(c.findings);
        }
        o
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_rank_cases() {
        assert_eq!(margin_rank(&[0.5, 0.3, 0.2, 0.0]), Some(3));
        assert_eq!(margin_rank(&[0.5, 0.3, 0.2, 1e-9]), None);
        assert_eq!(margin_rank(&[0.25; 4]), Some(4));
        assert_eq!(margin_rank(&[1.0, 1e-13, 0.0, -1e-14]), Some(1));
    }

    #[test]
    fn empty_runs() {
        let r = falsify_rank_monotonicity(0, 1);
        assert_eq!(r.trials, 0);
        assert!(r.counterexamples.is_empty());
        assert!(r.checks.is_empty());
    }

    #[test]
    fn small_runs_are_clean_and_deterministic() {
        let a = falsify_rank_monotonicity_with(300, 9, Exec::Sequential, FalsifierMode::Separable);
        let b = falsify_rank_monotonicity_with(300, 9, Exec::Parallel, FalsifierMode::Separable);
        assert!(a.is_clean(), "{:?}", a.counterexamples);
        assert!(a.same_outcome(&b));
        assert!(a.checked("entangled_outputs") > 0);

        let m = monotone_audit_with(300, 9, Exec::Sequential, &[]);
        assert!(m.is_clean(), "{:?}", m.counterexamples);
        assert!(m.same_outcome(&monotone_audit(300, 9)));
        assert!(m.checked("monotone") > 0);
        assert_eq!(m.checked("concurrence"), 300);
    }

    #[test]
    fn merge_is_associative() {
        let a = monotone_audit(20, 1);
        let b = monotone_audit(20, 2);
        let c = monotone_audit(20, 3);
        let left = a.clone().merge(b.clone()).merge(c.clone());
        let right = a.merge(b.merge(c));
        assert!(left.same_outcome(&right));
    }
}
