//! Two-qubit density matrices and the Werner, Bell-diagonal and MEMS families.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::qmat::{
    hermitian_eig, numeric_rank, partial_transpose, CMat4, EigenDecomposition, QmatError,
    Subsystem, DEFAULT_RANK_TOL, ONE, ZERO,
};

pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-10;
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
pub const ENTANGLEMENT_TOL: f64 = 1e-10;
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Matrix(#[from] QmatError),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("{field}: {detail}")]
    OutOfRange { field: &'static str, detail: String },
}

fn out_of_range(field: &'static str, detail: impl Into<String>) -> StateError {
    StateError::OutOfRange {
        field,
        detail: detail.into(),
    }
}

/// Hermitian, positive semidefinite, unit-trace 4×4 matrix with its
/// eigendecomposition computed once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    mat: CMat4,
    eig: EigenDecomposition,
}

impl DensityMatrix {
    pub fn new(mat: CMat4) -> Result<Self, StateError> {
        let eig = hermitian_eig(&mat)?;
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(StateError::BadTrace(trace.re));
        }
        if eig.min_eigenvalue() < -PSD_TOL {
            return Err(StateError::NotPsd(eig.min_eigenvalue()));
        }
        Ok(Self {
            mat: mat.hermitian_part(),
            eig,
        })
    }

    /// Builds from a matrix that is a density matrix up to rounding, e.g. the
    /// output of a trace-preserving CP map. Hermiticity is enforced and the
    /// trace is renormalized; panics only on non-finite input.
    pub(crate) fn from_physical(mat: CMat4) -> Self {
        let mut mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if tr > 0.0 {
            mat = mat.scale_re(1.0 / tr);
        }
        let eig = hermitian_eig(&mat).expect("hermitian part of a finite matrix");
        Self { mat, eig }
    }

    pub fn matrix(&self) -> &CMat4 {
        &self.mat
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        self.eig.eigenvalues
    }

    pub fn rank(&self, tol: f64) -> usize {
        numeric_rank(&self.eig.eigenvalues, tol)
    }

    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        self.mat.distance(&other.mat)
    }

    pub fn partial_transpose(&self) -> CMat4 {
        partial_transpose(&self.mat, Subsystem::B)
    }

    /// Spectrum of the partial transpose, non-ascending.
    pub fn pt_spectrum(&self) -> [f64; 4] {
        hermitian_eig(&self.partial_transpose())
            .expect("partial transpose of a Hermitian matrix is Hermitian")
            .eigenvalues
    }

    pub fn maximally_mixed() -> Self {
        Self::from_physical(CMat4::identity().scale_re(0.25))
    }

    pub fn pure(psi: &[C64; 4]) -> Result<Self, StateError> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(out_of_range("psi", "state vector must be non-zero and finite"));
        }
        let v = psi.map(|z| z / norm);
        Self::new(CMat4::projector(&v))
    }

    /// Computational-basis diagonal state `Σ p_k |k⟩⟨k|`.
    pub fn diagonal(p: [f64; 4]) -> Result<Self, StateError> {
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(out_of_range("diagonal", "weights must be finite and ≥ 0"));
        }
        Self::new(CMat4::diag(p))
    }
}

/// The four Bell vectors in the fixed order used by [`BellWeights`]:
/// `Ψ−, Φ+, Φ−, Ψ+`.
pub fn bell_vectors() -> [[C64; 4]; 4] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [
        [ZERO, h, -h, ZERO],
        [h, ZERO, ZERO, h],
        [h, ZERO, ZERO, -h],
        [ZERO, h, h, ZERO],
    ]
}

pub const BELL_NAMES: [&str; 4] = ["psi-", "phi+", "phi-", "psi+"];

pub fn bell_projectors() -> [CMat4; 4] {
    bell_vectors().map(|v| CMat4::projector(&v))
}

pub fn singlet_vector() -> [C64; 4] {
    bell_vectors()[0]
}

pub fn singlet() -> DensityMatrix {
    DensityMatrix::from_physical(bell_projectors()[0])
}

/// Diagonal of `ρ` in the Bell basis (same order as [`bell_vectors`]).
pub fn bell_diagonal_of(m: &CMat4) -> [f64; 4] {
    bell_vectors().map(|v| {
        let mv = m.apply(&v);
        crate::qmat::inner(&v, &mv).re
    })
}

/// Singlet weight `w` of `w·|ψs⟩⟨ψs| + (1−w)·I/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WernerParam(f64);

impl WernerParam {
    pub fn new(w: f64) -> Result<Self, StateError> {
        if !(0.0..=1.0).contains(&w) {
            return Err(out_of_range("w", format!("{w} is outside [0, 1]")));
        }
        Ok(Self(w))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// The same state written as Bell weights.
    pub fn bell_weights(&self) -> BellWeights {
        let q = (1.0 - self.0) / 4.0;
        BellWeights([self.0 + q, q, q, q])
    }

    /// The same state written as MEMS decomposition weights.
    pub fn mems_weights(&self) -> MemsWeights {
        let q = (1.0 - self.0) / 4.0;
        MemsWeights([self.0 + q, q, q, q])
    }
}

fn check_weights(field: &'static str, l: [f64; 4]) -> Result<(), StateError> {
    if l.iter().any(|x| !x.is_finite()) {
        return Err(out_of_range(field, "weights must be finite"));
    }
    if l[3] < 0.0 {
        return Err(out_of_range(field, "weights must be ≥ 0"));
    }
    if l.windows(2).any(|w| w[0] < w[1]) {
        return Err(out_of_range(field, format!("weights {l:?} are not non-ascending")));
    }
    let sum: f64 = l.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(out_of_range(field, format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Weights `λ1 ≥ λ2 ≥ λ3 ≥ λ4` on the Bell projectors `Ψ−, Φ+, Φ−, Ψ+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellWeights([f64; 4]);

impl BellWeights {
    pub fn new(lambda: [f64; 4]) -> Result<Self, StateError> {
        check_weights("lambda", lambda)?;
        Ok(Self(lambda))
    }

    /// Sorts arbitrary non-negative weights into canonical order.
    pub fn from_unsorted(mut lambda: [f64; 4]) -> Result<Self, StateError> {
        lambda.sort_by(|a, b| b.total_cmp(a));
        Self::new(lambda)
    }

    pub fn lambda(&self) -> [f64; 4] {
        self.0
    }

    /// Entangled iff the largest weight exceeds one half.
    pub fn is_entangled(&self) -> bool {
        self.0[0] > 0.5
    }
}

/// Decomposition weights of
/// `(λ1−λ3)|ψs⟩⟨ψs| + λ3(|00⟩⟨00|+|11⟩⟨11|) + λ2|01⟩⟨01| + λ4|10⟩⟨10|`.
///
/// These are mixture weights, not eigenvalues of the matrix: the `{|01⟩,|10⟩}`
/// block is not diagonal once the singlet weight is non-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemsWeights([f64; 4]);

impl MemsWeights {
    pub fn new(lambda: [f64; 4]) -> Result<Self, StateError> {
        check_weights("lambda", lambda)?;
        Ok(Self(lambda))
    }

    pub fn lambda(&self) -> [f64; 4] {
        self.0
    }

    pub fn singlet_weight(&self) -> f64 {
        self.0[0] - self.0[2]
    }

    /// Number of non-zero decomposition weights.
    pub fn weight_rank(&self) -> usize {
        self.0.iter().filter(|&&x| x > 0.0).count()
    }
}

pub fn make_werner(w: WernerParam) -> DensityMatrix {
    let w = w.value();
    let m = bell_projectors()[0].scale_re(w) + CMat4::identity().scale_re((1.0 - w) / 4.0);
    DensityMatrix::from_physical(m)
}

pub fn make_bell_diagonal(l: BellWeights) -> DensityMatrix {
    make_bell_diagonal_ordered(l, [0, 1, 2, 3])
}

/// `Σ λ_k Π_{order[k]}`: sorted weights placed on a permuted Bell basis.
pub fn make_bell_diagonal_ordered(l: BellWeights, order: [usize; 4]) -> DensityMatrix {
    let projectors = bell_projectors();
    let m = l
        .0
        .iter()
        .zip(order)
        .fold(CMat4::zeros(), |acc, (&w, k)| acc + projectors[k].scale_re(w));
    DensityMatrix::from_physical(m)
}

pub fn make_mems(l: MemsWeights) -> DensityMatrix {
    let [l1, l2, l3, l4] = l.0;
    let m = bell_projectors()[0].scale_re(l1 - l3) + CMat4::diag([l3, l2, l4, l3]);
    DensityMatrix::from_physical(m)
}

/// Family membership of a state, most specific first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyTag {
    Werner(WernerParam),
    /// `weights` sorted; `order[k]` is the Bell-basis index carrying `λ_{k+1}`.
    BellDiagonal { weights: BellWeights, order: [usize; 4] },
    Mems(MemsWeights),
    General,
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::Werner(_) => "werner",
            FamilyTag::BellDiagonal { .. } => "bell_diagonal",
            FamilyTag::Mems(_) => "mems",
            FamilyTag::General => "general",
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyTag::Werner(w) => write!(f, "werner(w={})", w.value()),
            FamilyTag::BellDiagonal { weights, .. } => {
                write!(f, "bell_diagonal(lambda={:?})", weights.lambda())
            }
            FamilyTag::Mems(l) => write!(f, "mems(lambda={:?})", l.lambda()),
            FamilyTag::General => f.write_str("general"),
        }
    }
}

fn fit_werner(m: &CMat4) -> Option<WernerParam> {
    // least squares over w of ‖w·(P − I/4) + I/4 − m‖_F; ‖P − I/4‖_F² = 3/4
    let direction = bell_projectors()[0] - CMat4::identity().scale_re(0.25);
    let residual = *m - CMat4::identity().scale_re(0.25);
    let mut dot = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            dot += (direction.0[i][j].conj() * residual.0[i][j]).re;
        }
    }
    let w = dot / 0.75;
    if !(-1e-12..=1.0 + 1e-12).contains(&w) {
        return None;
    }
    WernerParam::new(w.clamp(0.0, 1.0)).ok()
}

fn fit_bell(m: &CMat4) -> Option<(BellWeights, [usize; 4])> {
    let diag = bell_diagonal_of(m);
    let mut order = [0usize, 1, 2, 3];
    // stable sort keeps the canonical order on ties
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]));
    let mut sorted = order.map(|k| diag[k]);
    for x in sorted.iter_mut() {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    let sum: f64 = sorted.iter().sum();
    if sorted[3] < -1e-12 {
        return None;
    }
    sorted[3] = sorted[3].max(0.0);
    let sorted = sorted.map(|x| x / sum);
    BellWeights::new(sorted).ok().map(|w| (w, order))
}

fn fit_mems(m: &CMat4) -> Option<MemsWeights> {
    let s = -2.0 * m.0[1][2].re;
    let l3 = 0.5 * (m.0[0][0].re + m.0[3][3].re);
    let l1 = s + l3;
    let l2 = m.0[1][1].re - 0.5 * s;
    let l4 = m.0[2][2].re - 0.5 * s;
    let mut l = [l1, l2, l3, l4];
    for x in l.iter_mut() {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    let sum: f64 = l.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return None;
    }
    let l = l.map(|x| x / sum);
    // tiny ordering violations from rounding are clipped, larger ones reject
    if l.windows(2).any(|w| w[0] < w[1] - 1e-12) || l[3] < -1e-12 {
        return None;
    }
    let mut fixed = l;
    for k in 1..4 {
        fixed[k] = fixed[k].min(fixed[k - 1]);
    }
    fixed[3] = fixed[3].max(0.0);
    let sum: f64 = fixed.iter().sum();
    MemsWeights::new(fixed.map(|x| x / sum)).ok()
}

/// Most specific family whose best-fit member lies within Frobenius distance
/// `tol` of `rho`. Werner states are also Bell-diagonal and MEMS; the
/// intersection of the latter two is exactly the Werner family.
pub fn classify_family(rho: &DensityMatrix, tol: f64) -> FamilyTag {
    let m = rho.matrix();
    if let Some(w) = fit_werner(m) {
        if make_werner(w).matrix().distance(m) <= tol {
            return FamilyTag::Werner(w);
        }
    }
    if let Some((weights, order)) = fit_bell(m) {
        if make_bell_diagonal_ordered(weights, order).matrix().distance(m) <= tol {
            return FamilyTag::BellDiagonal { weights, order };
        }
    }
    if let Some(l) = fit_mems(m) {
        if make_mems(l).matrix().distance(m) <= tol {
            return FamilyTag::Mems(l);
        }
    }
    FamilyTag::General
}

/// Peres–Horodecki test, exact for two qubits.
pub fn is_entangled(rho: &DensityMatrix) -> bool {
    rho.pt_spectrum()[3] < -ENTANGLEMENT_TOL
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScalars {
    pub purity: f64,
    /// von Neumann entropy in bits.
    pub entropy: f64,
    pub rank: usize,
}

pub fn state_scalars(rho: &DensityMatrix) -> StateScalars {
    let eigs = rho.eigenvalues();
    let purity = (*rho.matrix() * *rho.matrix()).trace().re;
    let entropy = eigs
        .iter()
        .filter(|&&x| x > 1e-12)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0);
    StateScalars {
        purity,
        entropy,
        rank: numeric_rank(&eigs, DEFAULT_RANK_TOL),
    }
}

/// `|ab⟩` as a 4-vector.
pub fn product_basis(a: usize, b: usize) -> [C64; 4] {
    let mut v = [ZERO; 4];
    v[2 * a + b] = ONE;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn werner_endpoints() {
        let s = make_werner(WernerParam::new(1.0).unwrap());
        assert!(s.distance(&singlet()) < 1e-15);
        let m = make_werner(WernerParam::new(0.0).unwrap());
        assert!(m.distance(&DensityMatrix::maximally_mixed()) < 1e-15);
        assert!(WernerParam::new(1.2).is_err());
        assert!(WernerParam::new(-0.1).is_err());
    }

    #[test]
    fn werner_entanglement() {
        let rho = make_werner(WernerParam::new(0.8).unwrap());
        assert!(rho.pt_spectrum()[3] < 0.0);
        assert!(is_entangled(&rho));
        // PT spectrum of Werner w is (1+w)/4 ×3 and (1−3w)/4
        let rho = make_werner(WernerParam::new(0.2).unwrap());
        assert!(close(rho.pt_spectrum()[3], (1.0 - 0.6) / 4.0, 1e-14));
        assert!(!is_entangled(&rho));
    }

    #[test]
    fn bell_diagonal_cases() {
        let pure = make_bell_diagonal(BellWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!(pure.rank(DEFAULT_RANK_TOL), 1);
        let mixed = make_bell_diagonal(BellWeights::new([0.25; 4]).unwrap());
        assert!(mixed.distance(&DensityMatrix::maximally_mixed()) < 1e-15);
        let l = [0.7, 0.1, 0.1, 0.1];
        let rho = make_bell_diagonal(BellWeights::new(l).unwrap());
        for (got, want) in rho.eigenvalues().iter().zip(l) {
            assert!(close(*got, want, 1e-10));
        }
    }

    #[test]
    fn bell_weights_validation() {
        assert!(BellWeights::new([0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(BellWeights::new([0.5, 0.5, 0.1, -0.1]).is_err());
        assert!(BellWeights::new([0.5, 0.2, 0.2, 0.2]).is_err());
        assert_eq!(
            BellWeights::from_unsorted([0.1, 0.2, 0.3, 0.4]).unwrap().lambda(),
            [0.4, 0.3, 0.2, 0.1]
        );
    }

    #[test]
    fn mems_cases() {
        let s = make_mems(MemsWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(s.distance(&singlet()) < 1e-15);

        let rho = make_mems(MemsWeights::new([0.9, 0.1, 0.0, 0.0]).unwrap());
        assert_eq!(rho.rank(DEFAULT_RANK_TOL), 2);

        let rho = make_mems(MemsWeights::new([0.5, 0.2, 0.2, 0.1]).unwrap());
        assert!(close(rho.matrix().trace().re, 1.0, 1e-15));
        assert!(rho.eigenvalues()[3] > 0.0);
        assert_eq!(rho.rank(DEFAULT_RANK_TOL), 4);
    }

    #[test]
    fn mems_spectrum_differs_from_weights() {
        // {|01⟩,|10⟩} block [[0.55, −0.45], [−0.45, 0.45]]
        let rho = make_mems(MemsWeights::new([0.9, 0.1, 0.0, 0.0]).unwrap());
        let disc = (1.0f64 - 4.0 * (0.55 * 0.45 - 0.45 * 0.45)).sqrt();
        let expected = [(1.0 + disc) / 2.0, (1.0 - disc) / 2.0];
        let eigs = rho.eigenvalues();
        assert!(close(eigs[0], expected[0], 1e-12));
        assert!(close(eigs[1], expected[1], 1e-12));
        assert!(!close(eigs[0], 0.9, 1e-3));
    }

    #[test]
    fn classify_round_trips() {
        let w = make_werner(WernerParam::new(0.5).unwrap());
        match classify_family(&w, DEFAULT_CLASSIFY_TOL) {
            FamilyTag::Werner(p) => assert!(close(p.value(), 0.5, 1e-14)),
            other => panic!("expected werner, got {other}"),
        }

        let l = [0.6, 0.25, 0.15, 0.0];
        match classify_family(&make_mems(MemsWeights::new(l).unwrap()), DEFAULT_CLASSIFY_TOL) {
            FamilyTag::Mems(got) => {
                for (a, b) in got.lambda().iter().zip(l) {
                    assert!(close(*a, b, 1e-10));
                }
            }
            other => panic!("expected mems, got {other}"),
        }

        let l = [0.6, 0.3, 0.1, 0.0];
        match classify_family(&make_bell_diagonal(BellWeights::new(l).unwrap()), 1e-8) {
            FamilyTag::BellDiagonal { weights, order } => {
                assert_eq!(order, [0, 1, 2, 3]);
                for (a, b) in weights.lambda().iter().zip(l) {
                    assert!(close(*a, b, 1e-12));
                }
            }
            other => panic!("expected bell, got {other}"),
        }
    }

    #[test]
    fn classify_permuted_bell_state() {
        let w = BellWeights::new([0.7, 0.2, 0.1, 0.0]).unwrap();
        let rho = make_bell_diagonal_ordered(w, [1, 3, 0, 2]);
        match classify_family(&rho, DEFAULT_CLASSIFY_TOL) {
            FamilyTag::BellDiagonal { order, .. } => assert_eq!(order, [1, 3, 0, 2]),
            other => panic!("expected bell, got {other}"),
        }
    }

    #[test]
    fn classify_nonlocal_rotation_is_general() {
        // exp(−iθ(XX+YY)/2)-style mixing of |01⟩ and |00⟩ phases: a global
        // unitary that carries the singlet out of every family
        let c = 0.8f64.cos();
        let s = 0.8f64.sin();
        let mut u = CMat4::identity();
        u.0[0][0] = C64::new(c, 0.0);
        u.0[0][1] = C64::new(0.0, s);
        u.0[1][0] = C64::new(0.0, s);
        u.0[1][1] = C64::new(c, 0.0);
        u.0[2][3] = C64::new(0.0, 0.3f64.sin());
        u.0[3][2] = C64::new(0.0, 0.3f64.sin());
        u.0[2][2] = C64::new(0.3f64.cos(), 0.0);
        u.0[3][3] = C64::new(0.3f64.cos(), 0.0);
        assert!(u.unitarity_defect() < 1e-14);
        let rho = DensityMatrix::new(u.sandwich(singlet().matrix())).unwrap();
        assert_eq!(classify_family(&rho, DEFAULT_CLASSIFY_TOL), FamilyTag::General);
    }

    #[test]
    fn scalars() {
        let s = state_scalars(&singlet());
        assert!(close(s.purity, 1.0, 1e-14) && close(s.entropy, 0.0, 1e-12) && s.rank == 1);
        let s = state_scalars(&DensityMatrix::maximally_mixed());
        assert!(close(s.purity, 0.25, 1e-15) && close(s.entropy, 2.0, 1e-12) && s.rank == 4);
        // trace ρ² from the matrix entries: 0.55² + 0.45² + 2·0.45²
        let s = state_scalars(&make_mems(MemsWeights::new([0.9, 0.1, 0.0, 0.0]).unwrap()));
        assert_eq!(s.rank, 2);
        assert!(close(s.purity, 0.91, 1e-12));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(
            DensityMatrix::new(CMat4::identity()),
            Err(StateError::BadTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(CMat4::diag([1.5, -0.5, 0.0, 0.0])),
            Err(StateError::NotPsd(_))
        ));
        let mut m = CMat4::diag([0.5, 0.5, 0.0, 0.0]);
        m.0[0][1] = ONE;
        assert!(matches!(
            DensityMatrix::new(m),
            Err(StateError::Matrix(QmatError::NotHermitian(_)))
        ));
    }
}
