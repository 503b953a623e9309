//! Separable operations as product Kraus sets, the LOCC atoms that build
//! protocols, and the Bell-diagonal extremal catalog.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::qmat::{kron2, CMat2, CMat4, I};
use crate::states::{
    bell_diagonal_of, bell_projectors, is_entangled, DensityMatrix, StateError, BELL_NAMES,
};

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;
const MIX_WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("operator is not unitary (‖U†U − I‖_F = {0:.3e})")]
    NotUnitary(f64),
    #[error("target state is entangled and cannot be prepared locally")]
    NotSeparable,
    #[error("no product-basis decomposition of the target state was found")]
    NotProductDiagonal,
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("Kraus set is not trace preserving (‖Σ E†E − I‖_F = {0:.3e})")]
    NotTracePreserving(f64),
    #[error("Kraus set is empty")]
    Empty,
    #[error(transparent)]
    State(#[from] StateError),
}

/// One product Kraus operator `a ⊗ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalKrausPair {
    pub a: CMat2,
    pub b: CMat2,
}

impl LocalKrausPair {
    pub fn new(a: CMat2, b: CMat2) -> Self {
        Self { a, b }
    }

    pub fn operator(&self) -> CMat4 {
        kron2(&self.a, &self.b)
    }
}

/// Trace-preserving map `ρ ↦ Σ E_i ρ E_i†` with every `E_i` a product.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableChannel {
    kraus: Vec<LocalKrausPair>,
    ops: Vec<CMat4>,
    locc_certified: bool,
}

/// `‖Σ E†E − I‖_F`
pub fn completeness_residual(ops: &[CMat4]) -> f64 {
    ops.iter()
        .fold(CMat4::zeros(), |acc, e| acc + e.adjoint() * *e)
        .distance(&CMat4::identity())
}

impl SeparableChannel {
    pub fn new(kraus: Vec<LocalKrausPair>, locc_certified: bool) -> Result<Self, ChannelError> {
        if kraus.is_empty() {
            return Err(ChannelError::Empty);
        }
        let ops: Vec<CMat4> = kraus.iter().map(LocalKrausPair::operator).collect();
        let residual = completeness_residual(&ops);
        if residual.is_nan() || residual > COMPLETENESS_TOL {
            return Err(ChannelError::NotTracePreserving(residual));
        }
        Ok(Self {
            kraus,
            ops,
            locc_certified,
        })
    }

    pub fn identity() -> Self {
        local_unitary_channel(&CMat2::identity(), &CMat2::identity())
            .expect("identity is unitary")
    }

    pub fn kraus(&self) -> &[LocalKrausPair] {
        &self.kraus
    }

    pub fn operators(&self) -> &[CMat4] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn locc_certified(&self) -> bool {
        self.locc_certified
    }

    pub fn completeness_residual(&self) -> f64 {
        completeness_residual(&self.ops)
    }

    /// `Σ E_i m E_i†` on a raw matrix.
    pub fn apply_matrix(&self, m: &CMat4) -> CMat4 {
        self.ops
            .iter()
            .fold(CMat4::zeros(), |acc, e| acc + e.sandwich(m))
    }
}

pub fn local_unitary_channel(ua: &CMat2, ub: &CMat2) -> Result<SeparableChannel, ChannelError> {
    for u in [ua, ub] {
        let defect = u.unitarity_defect();
        if defect.is_nan() || defect > UNITARY_TOL {
            return Err(ChannelError::NotUnitary(defect));
        }
    }
    SeparableChannel::new(vec![LocalKrausPair::new(*ua, *ub)], true)
}

/// Weighted product pure states `Σ p_k |a_k⟩⟨a_k| ⊗ |b_k⟩⟨b_k|`.
pub type ProductEnsemble = Vec<(f64, [C64; 2], [C64; 2])>;

/// Discard the input and prepare `Σ p_k |a_k b_k⟩⟨a_k b_k|`, with Kraus
/// operators `√p_k |a_k⟩⟨i| ⊗ |b_k⟩⟨j|` over all `i, j`.
pub fn discard_prepare_ensemble(ensemble: &ProductEnsemble) -> Result<SeparableChannel, ChannelError> {
    let total: f64 = ensemble.iter().map(|e| e.0).sum();
    if ensemble.iter().any(|e| e.0.is_nan() || e.0 < 0.0) || (total - 1.0).abs() > MIX_WEIGHT_TOL {
        return Err(ChannelError::BadWeights(format!(
            "ensemble weights must be ≥ 0 and sum to 1 (sum {total})"
        )));
    }
    let mut kraus = Vec::with_capacity(4 * ensemble.len());
    for (p, a, b) in ensemble.iter().filter(|e| e.0 > 0.0) {
        let s = p.sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let mut ka = CMat2::zeros();
                let mut kb = CMat2::zeros();
                for r in 0..2 {
                    ka.0[r][i] = a[r] * s;
                    kb.0[r][j] = b[r];
                }
                kraus.push(LocalKrausPair::new(ka, kb));
            }
        }
    }
    SeparableChannel::new(kraus, true)
}

fn pauli_bases() -> [CMat2; 3] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [
        CMat2::identity(),
        CMat2([[h, h], [h, -h]]),
        CMat2([[h, h], [I * h, -I * h]]),
    ]
}

/// Splits `v = a ⊗ b` when `v` is (numerically) a product vector.
fn factor_product(v: &[C64; 4]) -> Option<([C64; 2], [C64; 2])> {
    let det = v[0] * v[3] - v[1] * v[2];
    if det.norm() > 1e-10 {
        return None;
    }
    let rows = [[v[0], v[1]], [v[2], v[3]]];
    let norms = rows.map(|r| (r[0].norm_sqr() + r[1].norm_sqr()).sqrt());
    let pick = if norms[0] >= norms[1] { 0 } else { 1 };
    if norms[pick] == 0.0 {
        return None;
    }
    let b = rows[pick].map(|z| z / norms[pick]);
    let a = rows.map(|r| b[0].conj() * r[0] + b[1].conj() * r[1]);
    Some((a, b))
}

/// Decomposes a separable state into product pure states when it is diagonal
/// in a local Pauli eigenbasis or its eigenvectors are products.
pub fn product_ensemble(sigma: &DensityMatrix) -> Option<ProductEnsemble> {
    let m = sigma.matrix();
    let bases = pauli_bases();
    for ua in &bases {
        for ub in &bases {
            let u = kron2(ua, ub);
            let rotated = u.adjoint() * *m * u;
            if rotated.off_diagonal_norm() > 1e-12 {
                continue;
            }
            let diag = rotated.real_diagonal();
            let mut out = Vec::new();
            for (k, &p) in diag.iter().enumerate() {
                if p.abs() < 1e-15 {
                    continue;
                }
                let (ia, ib) = (k / 2, k % 2);
                out.push((p.max(0.0), [ua.0[0][ia], ua.0[1][ia]], [ub.0[0][ib], ub.0[1][ib]]));
            }
            return Some(normalize_ensemble(out));
        }
    }
    if let Some(ens) = bell_pair_ensemble(m) {
        return Some(ens);
    }
    let eig = sigma.eigen();
    let mut out = Vec::new();
    for k in 0..4 {
        let p = eig.eigenvalues[k];
        if p < 1e-14 {
            continue;
        }
        let (a, b) = factor_product(&eig.eigenvectors[k])?;
        out.push((p, a, b));
    }
    let ens = normalize_ensemble(out);
    let rebuilt = ensemble_matrix(&ens);
    (rebuilt.distance(m) < 1e-10).then_some(ens)
}

/// Weights `x_ij` with `Σ_j x_ij = 2λ_i`, for `λ` non-ascending with
/// `λ1 ≤ 1/2`: pair the two largest first, then transport the remainder of
/// `{1,2}` onto `{3,4}`.
pub fn bell_pair_weights(lambda: [f64; 4]) -> Option<[[f64; 4]; 4]> {
    let d = lambda.map(|x| 2.0 * x);
    if d[0] > d[1] + d[2] + d[3] + 1e-12 || d.windows(2).any(|w| w[0] < w[1]) {
        return None;
    }
    let mut x = [[0.0; 4]; 4];
    let x12 = 0.5 * (d[0] + d[1] - d[2] - d[3]);
    let r1 = (d[0] - x12).max(0.0);
    let x13 = r1.min(d[2]);
    let x14 = r1 - x13;
    let x23 = d[2] - x13;
    let x24 = (d[3] - x14).max(0.0);
    for (i, j, w) in [(0, 1, x12), (0, 2, x13), (0, 3, x14), (1, 2, x23), (1, 3, x24)] {
        x[i][j] = w;
        x[j][i] = w;
    }
    Some(x)
}

/// Separable Bell-diagonal states as mixtures of the six equal Bell-pair
/// mixtures, each of which is diagonal in a local Pauli basis.
fn bell_pair_ensemble(m: &CMat4) -> Option<ProductEnsemble> {
    let bell = crate::states::bell_vectors();
    let u = CMat4::from_columns(&bell);
    let in_bell = u.adjoint() * *m * u;
    if in_bell.off_diagonal_norm() > 1e-12 {
        return None;
    }
    let diag = in_bell.real_diagonal();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]));
    let sorted = order.map(|k| diag[k].max(0.0));
    let x = bell_pair_weights(sorted)?;
    let proj = bell_projectors();
    let mut out = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            if x[i][j] <= 0.0 {
                continue;
            }
            let (a, b) = (order[i], order[j]);
            let pair = DensityMatrix::from_physical((proj[a] + proj[b]).scale_re(0.5));
            for (p, va, vb) in product_ensemble(&pair)? {
                out.push((p * x[i][j], va, vb));
            }
        }
    }
    let ens = normalize_ensemble(out);
    (ensemble_matrix(&ens).distance(m) < 1e-10).then_some(ens)
}

fn normalize_ensemble(mut ens: ProductEnsemble) -> ProductEnsemble {
    let total: f64 = ens.iter().map(|e| e.0).sum();
    for e in ens.iter_mut() {
        e.0 /= total;
    }
    ens
}

pub fn ensemble_matrix(ens: &ProductEnsemble) -> CMat4 {
    ens.iter().fold(CMat4::zeros(), |acc, (p, a, b)| {
        let v = crate::qmat::kron_vec(a, b);
        acc + CMat4::projector(&v).scale_re(*p)
    })
}

/// Discard-and-prepare channel with output `sigma` for every input.
pub fn discard_prepare_channel(sigma: &DensityMatrix) -> Result<SeparableChannel, ChannelError> {
    if is_entangled(sigma) {
        return Err(ChannelError::NotSeparable);
    }
    let ens = product_ensemble(sigma).ok_or(ChannelError::NotProductDiagonal)?;
    discard_prepare_ensemble(&ens)
}

/// Convex combination; each part's Kraus operators are scaled by `√weight`.
pub fn mix(parts: &[(f64, SeparableChannel)]) -> Result<SeparableChannel, ChannelError> {
    if parts.is_empty() {
        return Err(ChannelError::BadWeights("no parts to mix".into()));
    }
    let total: f64 = parts.iter().map(|p| p.0).sum();
    if parts.iter().any(|p| !p.0.is_finite() || p.0 < 0.0) {
        return Err(ChannelError::BadWeights("weights must be finite and ≥ 0".into()));
    }
    if (total - 1.0).abs() > MIX_WEIGHT_TOL {
        return Err(ChannelError::BadWeights(format!("weights sum to {total}, expected 1")));
    }
    let mut kraus = Vec::new();
    let mut certified = true;
    for (w, ch) in parts {
        certified &= ch.locc_certified;
        if *w == 0.0 {
            continue;
        }
        let s = C64::new(w.sqrt(), 0.0);
        kraus.extend(ch.kraus.iter().map(|k| LocalKrausPair::new(k.a.scale(s), k.b)));
    }
    SeparableChannel::new(kraus, certified)
}

pub fn apply(ch: &SeparableChannel, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_physical(ch.apply_matrix(rho.matrix()))
}

/// Building block of a constructive LOCC protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    LocalUnitary { ua: CMat2, ub: CMat2 },
    DiscardPrepare(DensityMatrix),
}

impl Atom {
    pub fn identity() -> Self {
        Atom::LocalUnitary {
            ua: CMat2::identity(),
            ub: CMat2::identity(),
        }
    }

    pub fn channel(&self) -> Result<SeparableChannel, ChannelError> {
        match self {
            Atom::LocalUnitary { ua, ub } => local_unitary_channel(ua, ub),
            Atom::DiscardPrepare(sigma) => discard_prepare_channel(sigma),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Atom::LocalUnitary { .. } => "local_unitary",
            Atom::DiscardPrepare(_) => "discard_prepare",
        }
    }
}

/// Deterministic mixture of LOCC atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    atoms: Vec<(f64, Atom)>,
    compiled: SeparableChannel,
}

impl Protocol {
    pub fn new(atoms: Vec<(f64, Atom)>) -> Result<Self, ChannelError> {
        let parts = atoms
            .iter()
            .map(|(w, a)| a.channel().map(|ch| (*w, ch)))
            .collect::<Result<Vec<_>, _>>()?;
        let compiled = mix(&parts)?;
        Ok(Self { atoms, compiled })
    }

    pub fn identity() -> Self {
        Self::new(vec![(1.0, Atom::identity())]).expect("identity protocol")
    }

    /// `p·identity + (1−p)·prepare(sigma)`
    pub fn identity_or_prepare(p: f64, sigma: DensityMatrix) -> Result<Self, ChannelError> {
        if p >= 1.0 {
            return Self::new(vec![(1.0, Atom::identity())]);
        }
        Self::new(vec![(p, Atom::identity()), (1.0 - p, Atom::DiscardPrepare(sigma))])
    }

    pub fn atoms(&self) -> &[(f64, Atom)] {
        &self.atoms
    }

    /// The whole protocol as a single separable channel.
    pub fn compile(&self) -> &SeparableChannel {
        &self.compiled
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        apply(&self.compiled, rho)
    }
}

/// A probabilistic operation: with `success_prob` the branch succeeds and its
/// deterministic completion `atom` is what remains once the state is replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticBranch {
    pub weight: f64,
    pub atom: Atom,
    pub success_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Renormalized {
    pub protocol: Protocol,
    /// Overall success probability of the original probabilistic mixture.
    pub success_probability: f64,
    pub weights: Vec<f64>,
}

/// Replaces a probabilistic mixture by a deterministic one: branch `k` gets
/// weight `w_k s_k / Σ_j w_j s_j`.
pub fn renormalize_probabilistic(
    branches: &[ProbabilisticBranch],
) -> Result<Renormalized, ChannelError> {
    if branches.is_empty() {
        return Err(ChannelError::BadWeights("no branches".into()));
    }
    for b in branches {
        if !(0.0..=1.0).contains(&b.weight) {
            return Err(ChannelError::BadWeights(format!("branch weight {} outside [0,1]", b.weight)));
        }
        if !(b.success_prob > 0.0 && b.success_prob <= 1.0) {
            return Err(ChannelError::BadWeights(format!(
                "success probability {} outside (0,1]",
                b.success_prob
            )));
        }
    }
    let total: f64 = branches.iter().map(|b| b.weight).sum();
    if (total - 1.0).abs() > MIX_WEIGHT_TOL {
        return Err(ChannelError::BadWeights(format!("branch weights sum to {total}")));
    }
    let success: f64 = branches.iter().map(|b| b.weight * b.success_prob).sum();
    let weights: Vec<f64> = branches
        .iter()
        .map(|b| b.weight * b.success_prob / success)
        .collect();
    let protocol = Protocol::new(
        weights
            .iter()
            .zip(branches)
            .map(|(w, b)| (*w, b.atom.clone()))
            .collect(),
    )?;
    Ok(Renormalized {
        protocol,
        success_probability: success,
        weights,
    })
}

/// How a catalog channel acts on the four Bell projectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellAction {
    /// `Π_i ↦ Π_{perm[i]}`
    Permutation([usize; 4]),
    /// `ρ ↦ (Π_i + Π_j)/2`
    Replace(usize, usize),
}

impl BellAction {
    /// Image of a Bell-basis weight vector (unsorted, basis order).
    pub fn act(&self, weights: &[f64; 4]) -> [f64; 4] {
        match *self {
            BellAction::Permutation(perm) => {
                let mut out = [0.0; 4];
                for i in 0..4 {
                    out[perm[i]] += weights[i];
                }
                out
            }
            BellAction::Replace(i, j) => {
                let mut out = [0.0; 4];
                out[i] = 0.5;
                out[j] = 0.5;
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub channel: SeparableChannel,
    pub action: BellAction,
}

fn measured_permutation(ch: &SeparableChannel) -> [usize; 4] {
    let proj = bell_projectors();
    let mut perm = [0usize; 4];
    for (i, p) in proj.iter().enumerate() {
        let diag = bell_diagonal_of(&ch.apply_matrix(p));
        let j = (0..4)
            .find(|&j| (diag[j] - 1.0).abs() < 1e-12)
            .expect("one-sided Pauli maps Bell states to Bell states");
        perm[i] = j;
    }
    perm
}

/// Identity, the six one-sided Pauli channels with their measured Bell
/// permutations, and the six pair-replacement channels.
pub fn bell_extremal_catalog() -> Vec<CatalogEntry> {
    let paulis = [
        ("x", CMat2::pauli_x()),
        ("y", CMat2::pauli_y()),
        ("z", CMat2::pauli_z()),
    ];
    let id = CMat2::identity();
    let mut unitaries = vec![("id".to_string(), id, id)];
    for (n, p) in &paulis {
        unitaries.push((format!("{n}_a"), *p, id));
    }
    for (n, p) in &paulis {
        unitaries.push((format!("{n}_b"), id, *p));
    }

    let mut out = Vec::with_capacity(13);
    for (name, ua, ub) in unitaries {
        let channel = local_unitary_channel(&ua, &ub).expect("Pauli operators are unitary");
        let action = BellAction::Permutation(measured_permutation(&channel));
        out.push(CatalogEntry { name, channel, action });
    }
    let proj = bell_projectors();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let sigma = DensityMatrix::from_physical((proj[i] + proj[j]).scale_re(0.5));
            let channel =
                discard_prepare_channel(&sigma).expect("equal Bell pair mixtures are product-diagonal");
            out.push(CatalogEntry {
                name: format!("replace_{}_{}", BELL_NAMES[i], BELL_NAMES[j]),
                channel,
                action: BellAction::Replace(i, j),
            });
        }
    }
    out
}
