//! Convertibility verdicts: the rank gate, the Werner / Bell-diagonal / MEMS
//! rules, and explicit LOCC protocols where a construction exists.

use std::fmt;

use thiserror::Error;

use crate::channels::{product_ensemble, Atom, Protocol};
use crate::measures::bell_monotones;
use crate::qmat::DEFAULT_RANK_TOL;
use crate::states::{
    classify_family, is_entangled, make_bell_diagonal, product_basis, BellWeights,
    DensityMatrix, FamilyTag, MemsWeights, WernerParam, DEFAULT_CLASSIFY_TOL,
};

/// Slack on weight comparisons and on the feasibility bounds of synthesized
/// protocols.
pub const WEIGHT_TOL: f64 = 1e-10;

/// Maximum verification residual of a protocol attached to a verdict.
pub const PROTOCOL_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    /// Entangled target of strictly lower rank than an entangled source.
    RankGate { from_rank: usize, to_rank: usize },
    /// Bell-diagonal monotone `E_k` would have to increase.
    MonotoneE(u8),
    /// Rank-2 MEMS: the singlet weight, and with it the entanglement of
    /// formation, would have to increase.
    EofDecrease,
    /// No admissible mixture weight reaches the target.
    WeightInfeasible,
    /// Separable operations cannot create entanglement.
    SeparableSource,
}

impl Reason {
    pub fn code(&self) -> String {
        match self {
            Reason::RankGate { .. } => "rank_gate".into(),
            Reason::MonotoneE(k) => format!("monotone_e{k}"),
            Reason::EofDecrease => "eof_decrease".into(),
            Reason::WeightInfeasible => "weight_infeasible".into(),
            Reason::SeparableSource => "separable_source".into(),
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::RankGate { from_rank, to_rank } => write!(
                f,
                "entangled target has rank {to_rank} < source rank {from_rank}; no separable operation lowers the rank of an entangled two-qubit state"
            ),
            Reason::MonotoneE(k) => write!(f, "Bell-diagonal monotone E{k} would increase"),
            Reason::EofDecrease => f.write_str("rank-2 MEMS target has larger singlet weight (entanglement of formation) than the source"),
            Reason::WeightInfeasible => f.write_str("target singlet weight exceeds the source's"),
            Reason::SeparableSource => f.write_str("source is separable but the target is entangled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// `protocol` is `None` when convertibility is certified by monotones
    /// alone (Bell-diagonal pairs).
    Convertible {
        protocol: Option<Protocol>,
        certificate: String,
    },
    Forbidden { reason: Reason, detail: String },
    Inconclusive { detail: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Convertible { .. } => "convertible",
            Verdict::Forbidden { .. } => "forbidden",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn is_convertible(&self) -> bool {
        matches!(self, Verdict::Convertible { .. })
    }

    pub fn protocol(&self) -> Option<&Protocol> {
        match self {
            Verdict::Convertible { protocol, .. } => protocol.as_ref(),
            _ => None,
        }
    }

    pub fn reason(&self) -> Option<Reason> {
        match self {
            Verdict::Forbidden { reason, .. } => Some(*reason),
            _ => None,
        }
    }

    fn forbidden(reason: Reason) -> Self {
        Verdict::Forbidden {
            reason,
            detail: reason.to_string(),
        }
    }

    fn with_protocol(protocol: Protocol, certificate: impl Into<String>) -> Self {
        Verdict::Convertible {
            protocol: Some(protocol),
            certificate: certificate.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvertError {
    #[error("Bell-diagonal rule needs entangled endpoints (λ1 > 1/2), got λ1 = {source_l1}, λ'1 = {target_l1}")]
    NotEntangled { source_l1: f64, target_l1: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("source has no singlet component (λ1 = λ3)")]
    NoSingletWeight,
    #[error("infeasible: {0}")]
    Infeasible(String),
}

/// Weights of the prepared separable state
/// `p01|01⟩⟨01| + (p00_11/2)(|00⟩⟨00| + |11⟩⟨11|) + p10|10⟩⟨10|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepWeights {
    pub p01: f64,
    pub p00_11: f64,
    pub p10: f64,
}

impl PrepWeights {
    pub fn as_array(&self) -> [f64; 3] {
        [self.p01, self.p00_11, self.p10]
    }

    pub fn state(&self) -> DensityMatrix {
        let h = 0.5 * self.p00_11;
        DensityMatrix::diagonal([h, self.p01, self.p10, h]).expect("prep weights are a distribution")
    }
}

/// `W·identity + (1−W)·prepare(prep)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemsProtocolParams {
    pub w: f64,
    pub prep: PrepWeights,
}

impl MemsProtocolParams {
    pub fn protocol(&self) -> Protocol {
        Protocol::identity_or_prepare(self.w, self.prep.state())
            .expect("diagonal product states are preparable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecideOptions {
    pub rank_tol: f64,
    pub classify_tol: f64,
}

impl Default for DecideOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            classify_tol: DEFAULT_CLASSIFY_TOL,
        }
    }
}

/// Forbids conversions from an entangled state to an entangled state of
/// strictly lower rank. `None` means the gate passes.
pub fn rank_gate(rho: &DensityMatrix, rho2: &DensityMatrix, tol: f64) -> Option<Verdict> {
    if !is_entangled(rho) || !is_entangled(rho2) {
        return None;
    }
    let from_rank = rho.rank(tol);
    let to_rank = rho2.rank(tol);
    (to_rank < from_rank).then(|| Verdict::forbidden(Reason::RankGate { from_rank, to_rank }))
}

/// Mix the identity with preparing `I/4`: `w ↦ p·w`.
pub fn decide_werner(w: WernerParam, w2: WernerParam) -> Verdict {
    let (w, w2) = (w.value(), w2.value());
    if w2 > w + WEIGHT_TOL {
        return Verdict::forbidden(Reason::WeightInfeasible);
    }
    let p = if w <= 0.0 { 1.0 } else { (w2 / w).min(1.0) };
    let protocol = Protocol::identity_or_prepare(p, DensityMatrix::maximally_mixed())
        .expect("I/4 is preparable");
    Verdict::with_protocol(
        protocol,
        format!("identity with weight p = {p}, prepare I/4 with weight {}", 1.0 - p),
    )
}

/// The Bell-diagonal iff rule: convertible exactly when `E1, E2, E3` do not
/// increase (extended reals).
pub fn decide_bell(l: &BellWeights, l2: &BellWeights) -> Result<Verdict, ConvertError> {
    let entangled = |w: &BellWeights| w.is_entangled() && is_entangled(&make_bell_diagonal(*w));
    if !entangled(l) || !entangled(l2) {
        return Err(ConvertError::NotEntangled {
            source_l1: l.lambda()[0],
            target_l1: l2.lambda()[0],
        });
    }
    let from = bell_monotones(l);
    let to = bell_monotones(l2);
    Ok(match from.first_violation(&to) {
        Some(k) => Verdict::Forbidden {
            reason: Reason::MonotoneE(k as u8),
            detail: format!(
                "E{k}: source {} < target {}",
                from.as_array()[k - 1],
                to.as_array()[k - 1]
            ),
        },
        None => Verdict::Convertible {
            protocol: None,
            certificate: format!(
                "monotones non-increasing: E1 {} ≥ {}, E2 {} ≥ {}, E3 {} ≥ {}",
                from.e1, to.e1, from.e2, to.e2, from.e3, to.e3
            ),
        },
    })
}

fn is_rank2_mems(l: &MemsWeights) -> bool {
    let [_, _, l3, l4] = l.lambda();
    l3 == 0.0 && l4 == 0.0
}

/// Solves `W(λ1−λ3) = λ'1−λ'3` and the three preparation equations for the
/// normalized prepared state.
pub fn synthesize_mems_protocol(
    l: &MemsWeights,
    l2: &MemsWeights,
) -> Result<MemsProtocolParams, SynthesisError> {
    let [l1, l2s, l3, l4] = l.lambda();
    let [t1, t2, t3, t4] = l2.lambda();
    let singlet = l1 - l3;
    if singlet <= 0.0 {
        return Err(SynthesisError::NoSingletWeight);
    }
    let w = (t1 - t3) / singlet;
    if w < -WEIGHT_TOL {
        return Err(SynthesisError::Infeasible(format!("W = {w} < 0")));
    }
    if w > 1.0 + WEIGHT_TOL {
        return Err(SynthesisError::Infeasible(format!("W = {w} > 1")));
    }
    let w = w.clamp(0.0, 1.0);
    let rest = 1.0 - w;
    if rest <= WEIGHT_TOL {
        let gap = (0..4)
            .map(|k| (l.lambda()[k] - l2.lambda()[k]).abs())
            .fold(0.0, f64::max);
        if gap > WEIGHT_TOL {
            return Err(SynthesisError::Infeasible(format!(
                "W = 1 but the weights differ by {gap}"
            )));
        }
        return Ok(MemsProtocolParams {
            w: 1.0,
            prep: PrepWeights { p01: 1.0, p00_11: 0.0, p10: 0.0 },
        });
    }
    let p01 = (t2 - w * l2s) / rest;
    let p00_11 = 2.0 * (t3 - w * l3) / rest;
    let p10 = (t4 - w * l4) / rest;
    for (name, p) in [("p01", p01), ("p00_11", p00_11), ("p10", p10)] {
        if !(-WEIGHT_TOL..=1.0 + WEIGHT_TOL).contains(&p) {
            return Err(SynthesisError::Infeasible(format!("{name} = {p} outside [0, 1]")));
        }
    }
    let sum = p01 + p00_11 + p10;
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(SynthesisError::Infeasible(format!("prep weights sum to {sum}")));
    }
    let clip = |x: f64| x.clamp(0.0, 1.0);
    let (p01, p00_11, p10) = (clip(p01), clip(p00_11), clip(p10));
    let s = p01 + p00_11 + p10;
    Ok(MemsProtocolParams {
        w,
        prep: PrepWeights {
            p01: p01 / s,
            p00_11: p00_11 / s,
            p10: p10 / s,
        },
    })
}

/// Rank-2 pairs are decided exactly; otherwise a feasible synthesized
/// protocol gives a constructive verdict and infeasibility is inconclusive.
pub fn decide_mems(l: &MemsWeights, l2: &MemsWeights) -> Verdict {
    if is_rank2_mems(l) && is_rank2_mems(l2) {
        let (a, b) = (l.lambda()[0], l2.lambda()[0]);
        if b > a + WEIGHT_TOL {
            return Verdict::forbidden(Reason::EofDecrease);
        }
        let w = if a <= 0.0 { 1.0 } else { (b / a).min(1.0) };
        let ket01 = DensityMatrix::pure(&product_basis(0, 1)).expect("basis state");
        let protocol = Protocol::identity_or_prepare(w, ket01).expect("|01⟩ is preparable");
        return Verdict::with_protocol(
            protocol,
            format!("identity with weight W = {w}, prepare |01⟩ with weight {}", 1.0 - w),
        );
    }
    match synthesize_mems_protocol(l, l2) {
        Ok(params) => Verdict::with_protocol(
            params.protocol(),
            format!(
                "identity with weight W = {}, prepare p01 = {}, p00_11 = {}, p10 = {}",
                params.w, params.prep.p01, params.prep.p00_11, params.prep.p10
            ),
        ),
        Err(e) => Verdict::Inconclusive {
            detail: format!("no identity/prepare mixture reaches the target ({e})"),
        },
    }
}

/// `‖apply(compile(p), ρ) − ρ'‖_F`
pub fn verify_protocol(p: &Protocol, rho: &DensityMatrix, rho2: &DensityMatrix) -> f64 {
    p.apply(rho).distance(rho2)
}

enum Pair {
    Werner(WernerParam, WernerParam),
    Bell(BellWeights, BellWeights),
    Mems(MemsWeights, MemsWeights),
}

/// Werner states belong to both larger families; lift when the tags differ.
fn common_family(a: FamilyTag, b: FamilyTag) -> Option<Pair> {
    use FamilyTag::*;
    match (a, b) {
        (Werner(x), Werner(y)) => Some(Pair::Werner(x, y)),
        (Werner(x), BellDiagonal { weights, .. }) => Some(Pair::Bell(x.bell_weights(), weights)),
        (BellDiagonal { weights, .. }, Werner(y)) => Some(Pair::Bell(weights, y.bell_weights())),
        (BellDiagonal { weights: x, .. }, BellDiagonal { weights: y, .. }) => Some(Pair::Bell(x, y)),
        (Werner(x), Mems(y)) => Some(Pair::Mems(x.mems_weights(), y)),
        (Mems(x), Werner(y)) => Some(Pair::Mems(x, y.mems_weights())),
        (Mems(x), Mems(y)) => Some(Pair::Mems(x, y)),
        _ => None,
    }
}

/// Full pipeline: identical states, separable targets, the rank gate,
/// separable sources, then the family rules. Everything else is
/// inconclusive.
pub fn decide(rho: &DensityMatrix, rho2: &DensityMatrix, opts: &DecideOptions) -> Verdict {
    if rho.distance(rho2) < 1e-12 {
        return Verdict::with_protocol(Protocol::identity(), "states coincide; identity");
    }
    let target_entangled = is_entangled(rho2);
    if !target_entangled && product_ensemble(rho2).is_some() {
        if let Ok(p) = Protocol::new(vec![(1.0, Atom::DiscardPrepare(*rho2))]) {
            return Verdict::with_protocol(p, "target is separable; discard and prepare it");
        }
    }
    if let Some(v) = rank_gate(rho, rho2, opts.rank_tol) {
        return v;
    }
    if target_entangled && !is_entangled(rho) {
        return Verdict::forbidden(Reason::SeparableSource);
    }

    let from = classify_family(rho, opts.classify_tol);
    let to = classify_family(rho2, opts.classify_tol);
    let verdict = match common_family(from, to) {
        Some(Pair::Werner(a, b)) => decide_werner(a, b),
        Some(Pair::Bell(a, b)) => match decide_bell(&a, &b) {
            Ok(v) => v,
            Err(e) => Verdict::Inconclusive { detail: e.to_string() },
        },
        Some(Pair::Mems(a, b)) => decide_mems(&a, &b),
        None => Verdict::Inconclusive {
            detail: format!("no rule covers {} → {}", from.name(), to.name()),
        },
    };
    // family protocols act on the canonical representative; make sure it is
    // the state we were handed
    if let Some(p) = verdict.protocol() {
        let residual = verify_protocol(p, rho, rho2);
        if residual > PROTOCOL_RESIDUAL_TOL {
            return Verdict::Inconclusive {
                detail: format!("family protocol misses the target by {residual:.3e}"),
            };
        }
    }
    verdict
}
