//! Entanglement measures and the Bell-diagonal monotone triple.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::qmat::{kron2, singular_values, CMat2, CMat4, ZERO};
use crate::states::{BellWeights, DensityMatrix};

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    /// `num / den`, with a vanishing denominator mapped to `+∞`.
    pub fn ratio(num: f64, den: f64) -> Self {
        if den <= 0.0 {
            ExtReal::Infinity
        } else {
            ExtReal::Finite(num / den)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtReal::Infinity)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(x) => *x,
            ExtReal::Infinity => f64::INFINITY,
        }
    }

    /// `self ≥ other` with `+∞ ≥ +∞`.
    pub fn ge(&self, other: &ExtReal) -> bool {
        self.partial_cmp(other).is_some_and(|o| o != Ordering::Less)
    }

    /// `self ≥ other − tol·max(1, |other|)`; `+∞` dominates everything.
    pub fn ge_within(&self, other: &ExtReal, tol: f64) -> bool {
        match (self, other) {
            (ExtReal::Infinity, _) => true,
            (ExtReal::Finite(_), ExtReal::Infinity) => false,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => *a >= b - tol * b.abs().max(1.0),
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Infinity, ExtReal::Infinity) => Some(Ordering::Equal),
            (ExtReal::Infinity, _) => Some(Ordering::Greater),
            (_, ExtReal::Infinity) => Some(Ordering::Less),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinity => f.write_str("inf"),
        }
    }
}

// Infinity is written as the string "inf" so any JSON reader can carry it.
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(ExtReal::Finite(x)),
            Raw::Str(s) if s == "inf" => Ok(ExtReal::Infinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

/// `(E1, E2, E3)` for a Bell-diagonal weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTriple {
    pub e1: ExtReal,
    pub e2: ExtReal,
    pub e3: ExtReal,
}

impl MonotoneTriple {
    pub fn as_array(&self) -> [ExtReal; 3] {
        [self.e1, self.e2, self.e3]
    }

    /// Index (1-based) of the first monotone where `self` falls below `other`.
    pub fn first_violation(&self, other: &MonotoneTriple) -> Option<usize> {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .position(|(a, b)| !a.ge(&b))
            .map(|k| k + 1)
    }
}

pub fn bell_monotones(l: &BellWeights) -> MonotoneTriple {
    let [l1, l2, l3, l4] = l.lambda();
    MonotoneTriple {
        e1: ExtReal::Finite(l1),
        e2: ExtReal::ratio(1.0 - 2.0 * l2, l3 + l4),
        e3: ExtReal::ratio(1.0 - 2.0 * l2 - 2.0 * l3, l4),
    }
}

fn spin_flip() -> CMat4 {
    kron2(&CMat2::pauli_y(), &CMat2::pauli_y())
}

/// Wootters concurrence.
///
/// The square roots of the eigenvalues of `ρ(σy⊗σy)ρ*(σy⊗σy)` equal the
/// singular values of `τ = Ψᵀ(σy⊗σy)Ψ`, where the columns of `Ψ` are the
/// subnormalized eigenvectors `√λ_k |e_k⟩`. Taking singular values directly
/// keeps near-zero terms accurate to rounding instead of to its square root.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let eig = rho.eigen();
    let mut psi = [[ZERO; 4]; 4];
    for k in 0..4 {
        let w = eig.eigenvalues[k].max(0.0).sqrt();
        psi[k] = eig.eigenvectors[k].map(|z| z * w);
    }
    let psi = CMat4::from_columns(&psi);
    let tau = psi.transpose() * spin_flip() * psi;
    let s = singular_values(&tau);
    (s[0] - s[1] - s[2] - s[3]).clamp(0.0, 1.0)
}

/// Concurrence through the spectrum of `√ρ ρ̃ √ρ`. Kept as an independent
/// route for cross-checks; loses accuracy near zero terms.
pub fn concurrence_via_spectrum(rho: &DensityMatrix) -> f64 {
    let sqrt_rho = rho.eigen().reconstruct_with(|x| x.max(0.0).sqrt());
    let flip = spin_flip();
    let tilde = flip * rho.matrix().conj() * flip;
    let r = (sqrt_rho * tilde * sqrt_rho).hermitian_part();
    let mu = crate::qmat::hermitian_eig(&r)
        .expect("hermitian by construction")
        .eigenvalues
        .map(|x| x.max(0.0).sqrt());
    (mu[0] - mu[1] - mu[2] - mu[3]).clamp(0.0, 1.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Entanglement of formation in ebits.
pub fn eof(rho: &DensityMatrix) -> f64 {
    eof_from_concurrence(concurrence(rho))
}

/// Sum of the magnitudes of the negative partial-transpose eigenvalues.
pub fn negativity(rho: &DensityMatrix) -> f64 {
    rho.pt_spectrum().iter().filter(|&&x| x < 0.0).map(|x| -x).sum()
}

/// Closed form for states with X-shaped matrices (non-zero entries only on
/// the diagonal and anti-diagonal).
pub fn x_state_concurrence(m: &CMat4) -> f64 {
    let r = |i: usize, j: usize| m.get(i, j).re;
    let a = m.get(1, 2).norm() - (r(0, 0) * r(3, 3)).max(0.0).sqrt();
    let b = m.get(0, 3).norm() - (r(1, 1) * r(2, 2)).max(0.0).sqrt();
    2.0 * a.max(b).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{
        make_mems, make_werner, product_basis, singlet, MemsWeights, WernerParam,
    };

    fn finite(x: f64) -> ExtReal {
        ExtReal::Finite(x)
    }

    fn assert_triple(l: [f64; 4], want: [ExtReal; 3]) {
        let got = bell_monotones(&BellWeights::new(l).unwrap()).as_array();
        for (g, w) in got.iter().zip(want) {
            match (g, w) {
                (ExtReal::Finite(a), ExtReal::Finite(b)) => assert!((a - b).abs() < 1e-12, "{got:?}"),
                _ => assert_eq!(*g, w),
            }
        }
    }

    #[test]
    fn monotone_values() {
        assert_triple([0.7, 0.1, 0.1, 0.1], [finite(0.7), finite(4.0), finite(6.0)]);
        assert_triple([1.0, 0.0, 0.0, 0.0], [finite(1.0), ExtReal::Infinity, ExtReal::Infinity]);
        assert_triple([0.6, 0.2, 0.1, 0.1], [finite(0.6), finite(3.0), finite(4.0)]);
    }

    #[test]
    fn extended_comparisons() {
        assert!(ExtReal::Infinity.ge(&ExtReal::Infinity));
        assert!(ExtReal::Infinity.ge(&finite(1e300)));
        assert!(!finite(1e300).ge(&ExtReal::Infinity));
        assert!(finite(2.0).ge(&finite(2.0)));
        assert!(finite(2.0 - 1e-12).ge_within(&finite(2.0), 1e-9));
    }

    #[test]
    fn ext_real_json() {
        let t = bell_monotones(&BellWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap());
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"e1":1.0,"e2":"inf","e3":"inf"}"#);
        let back: MonotoneTriple = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn concurrence_cases() {
        assert!((concurrence(&singlet()) - 1.0).abs() < 1e-14);
        let prod = DensityMatrix::pure(&product_basis(0, 1)).unwrap();
        assert_eq!(concurrence(&prod), 0.0);
        let mems = make_mems(MemsWeights::new([0.9, 0.1, 0.0, 0.0]).unwrap());
        assert!((x_state_concurrence(mems.matrix()) - 0.9).abs() < 1e-15);
        assert!((concurrence(&mems) - 0.9).abs() < 1e-10);
    }

    #[test]
    fn eof_values() {
        assert!((eof(&singlet()) - 1.0).abs() < 1e-12);
        assert_eq!(eof(&DensityMatrix::maximally_mixed()), 0.0);
        // h(0.9) = −0.9·log2(0.9) − 0.1·log2(0.1)
        let h = -0.9 * 0.9f64.log2() - 0.1 * 0.1f64.log2();
        assert!((eof_from_concurrence(0.6) - h).abs() < 1e-12);
        assert!((eof_from_concurrence(0.6) - 0.4690).abs() < 1e-3);
    }

    #[test]
    fn negativity_cases() {
        assert!((negativity(&singlet()) - 0.5).abs() < 1e-14);
        assert_eq!(negativity(&DensityMatrix::maximally_mixed()), 0.0);
        // Werner: single negative PT eigenvalue (1−3w)/4 above w = 1/3
        for w in [0.0, 0.2, 0.33, 0.34, 0.6, 1.0] {
            let n = negativity(&make_werner(WernerParam::new(w).unwrap()));
            let want = ((3.0 * w - 1.0) / 4.0).max(0.0);
            assert!((n - want).abs() < 1e-13, "w={w}: {n} vs {want}");
        }
    }

    #[test]
    fn werner_concurrence_closed_form() {
        for w in [0.0, 0.3, 0.5, 0.9] {
            let c = concurrence(&make_werner(WernerParam::new(w).unwrap()));
            let want = ((3.0 * w - 1.0) / 2.0).max(0.0);
            assert!((c - want).abs() < 1e-12);
        }
    }
}
