//! Dense complex kernel for 2×2 and 4×4 matrices.
//!
//! Two-qubit operators use the computational basis ordering
//! `|00⟩, |01⟩, |10⟩, |11⟩`, i.e. basis index `2a + b` for `|a b⟩`, so that
//! `kron2(a, b)[2i + k][2j + l] = a[i][j] * b[k][l]`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Default tolerance used by [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Hermiticity tolerance accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-14;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmatError {
    #[error("matrix is not Hermitian (‖m − m†‖_F = {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix has a non-finite entry")]
    NonFinite,
}

/// Which tensor factor of a two-qubit operator an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subsystem {
    A,
    B,
}

/// Single-qubit operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat2(pub [[C64; 2]; 2]);

/// Two-qubit operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat4(pub [[C64; 4]; 4]);

macro_rules! square_matrix {
    ($name:ident, $n:expr) => {
        impl $name {
            pub const DIM: usize = $n;

            pub fn zeros() -> Self {
                Self([[ZERO; $n]; $n])
            }

            pub fn identity() -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    m.0[i][i] = ONE;
                }
                m
            }

            pub fn from_real(rows: [[f64; $n]; $n]) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] = C64::new(rows[i][j], 0.0);
                    }
                }
                m
            }

            pub fn from_parts(re: [[f64; $n]; $n], im: [[f64; $n]; $n]) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] = C64::new(re[i][j], im[i][j]);
                    }
                }
                m
            }

            pub fn diag(d: [f64; $n]) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    m.0[i][i] = C64::new(d[i], 0.0);
                }
                m
            }

            /// `|v⟩⟨w|`
            pub fn outer(v: &[C64; $n], w: &[C64; $n]) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] = v[i] * w[j].conj();
                    }
                }
                m
            }

            pub fn projector(v: &[C64; $n]) -> Self {
                Self::outer(v, v)
            }

            #[inline]
            pub fn get(&self, i: usize, j: usize) -> C64 {
                self.0[i][j]
            }

            pub fn adjoint(&self) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] = self.0[j][i].conj();
                    }
                }
                m
            }

            pub fn transpose(&self) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] = self.0[j][i];
                    }
                }
                m
            }

            pub fn conj(&self) -> Self {
                let mut m = *self;
                for row in m.0.iter_mut() {
                    for z in row.iter_mut() {
                        *z = z.conj();
                    }
                }
                m
            }

            pub fn scale(&self, s: C64) -> Self {
                let mut m = *self;
                for row in m.0.iter_mut() {
                    for z in row.iter_mut() {
                        *z *= s;
                    }
                }
                m
            }

            pub fn scale_re(&self, s: f64) -> Self {
                self.scale(C64::new(s, 0.0))
            }

            pub fn trace(&self) -> C64 {
                (0..$n).map(|i| self.0[i][i]).sum()
            }

            pub fn frobenius_norm(&self) -> f64 {
                self.0
                    .iter()
                    .flat_map(|row| row.iter())
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            }

            pub fn distance(&self, other: &Self) -> f64 {
                (*self - *other).frobenius_norm()
            }

            pub fn is_finite(&self) -> bool {
                self.0
                    .iter()
                    .flat_map(|row| row.iter())
                    .all(|z| z.re.is_finite() && z.im.is_finite())
            }

            /// `‖m − m†‖_F`
            pub fn hermiticity_defect(&self) -> f64 {
                self.distance(&self.adjoint())
            }

            /// `(m + m†)/2`
            pub fn hermitian_part(&self) -> Self {
                (*self + self.adjoint()).scale_re(0.5)
            }

            /// `‖m†m − I‖_F`
            pub fn unitarity_defect(&self) -> f64 {
                (self.adjoint() * *self).distance(&Self::identity())
            }

            pub fn apply(&self, v: &[C64; $n]) -> [C64; $n] {
                let mut out = [ZERO; $n];
                for i in 0..$n {
                    out[i] = (0..$n).map(|j| self.0[i][j] * v[j]).sum();
                }
                out
            }

            /// `m ρ m†`
            pub fn sandwich(&self, rho: &Self) -> Self {
                *self * *rho * self.adjoint()
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                for i in 0..$n {
                    for j in 0..$n {
                        self.0[i][j] += rhs.0[i][j];
                    }
                }
                self
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                for i in 0..$n {
                    for j in 0..$n {
                        self.0[i][j] -= rhs.0[i][j];
                    }
                }
                self
            }
        }

        impl Mul for $name {
            type Output = Self;
            fn mul(self, rhs: Self) -> Self {
                let mut out = Self::zeros();
                for i in 0..$n {
                    for k in 0..$n {
                        let a = self.0[i][k];
                        if a == ZERO {
                            continue;
                        }
                        for j in 0..$n {
                            out.0[i][j] += a * rhs.0[k][j];
                        }
                    }
                }
                out
            }
        }
    };
}

square_matrix!(CMat2, 2);
square_matrix!(CMat4, 4);

impl CMat2 {
    pub fn pauli_x() -> Self {
        Self::from_real([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        Self([[ZERO, -I], [I, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Self::from_real([[1.0, 0.0], [0.0, -1.0]])
    }

    /// Closed-form spectrum of a Hermitian 2×2 matrix, non-ascending, with
    /// orthonormal eigenvectors as columns of the returned unitary.
    pub fn hermitian_eig(&self) -> ([f64; 2], CMat2) {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = self.0[0][1];
        let mean = 0.5 * (a + d);
        let half_gap = 0.5 * (a - d);
        let r = (half_gap * half_gap + b.norm_sqr()).sqrt();
        let vals = [mean + r, mean - r];
        if b.norm() <= f64::EPSILON * (a.abs() + d.abs()).max(f64::MIN_POSITIVE) {
            return if a >= d {
                (vals, CMat2::identity())
            } else {
                (vals, CMat2([[ZERO, ONE], [ONE, ZERO]]))
            };
        }
        // (m − λ2) has columns in the λ1 eigenspace; pick the better conditioned one
        let col0 = [C64::new(a - vals[1], 0.0), b.conj()];
        let col1 = [b, C64::new(d - vals[1], 0.0)];
        let n0 = (col0[0].norm_sqr() + col0[1].norm_sqr()).sqrt();
        let n1 = (col1[0].norm_sqr() + col1[1].norm_sqr()).sqrt();
        let (v, n) = if n0 >= n1 { (col0, n0) } else { (col1, n1) };
        let v1 = [v[0] / n, v[1] / n];
        // orthogonal complement
        let v2 = [-v1[1].conj(), v1[0].conj()];
        (vals, CMat2([[v1[0], v2[0]], [v1[1], v2[1]]]))
    }

    /// `m^{-1/2}` for positive definite Hermitian `m`, `None` when the smallest
    /// eigenvalue is below `floor`.
    pub fn inverse_sqrt_psd(&self, floor: f64) -> Option<CMat2> {
        let (vals, vecs) = self.hermitian_eig();
        if vals[1] <= floor {
            return None;
        }
        let d = CMat2::diag([1.0 / vals[0].sqrt(), 1.0 / vals[1].sqrt()]);
        Some(vecs * d * vecs.adjoint())
    }
}

impl CMat4 {
    pub fn column(&self, j: usize) -> [C64; 4] {
        [self.0[0][j], self.0[1][j], self.0[2][j], self.0[3][j]]
    }

    pub fn from_columns(cols: &[[C64; 4]; 4]) -> Self {
        let mut m = Self::zeros();
        for (j, c) in cols.iter().enumerate() {
            for i in 0..4 {
                m.0[i][j] = c[i];
            }
        }
        m
    }

    pub fn real_diagonal(&self) -> [f64; 4] {
        [self.0[0][0].re, self.0[1][1].re, self.0[2][2].re, self.0[3][3].re]
    }

    pub fn off_diagonal_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    acc += self.0[i][j].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron2(a: &CMat2, b: &CMat2) -> CMat4 {
    let mut out = CMat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    out
}

/// `|a⟩ ⊗ |b⟩`
pub fn kron_vec(a: &[C64; 2], b: &[C64; 2]) -> [C64; 4] {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

pub fn inner(v: &[C64; 4], w: &[C64; 4]) -> C64 {
    v.iter().zip(w).map(|(x, y)| x.conj() * y).sum()
}

/// Transpose on one tensor factor. An involution.
pub fn partial_transpose(m: &CMat4, subsystem: Subsystem) -> CMat4 {
    let mut out = CMat4::zeros();
    for i in 0..2 {
        for k in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    let (ri, rk, cj, cl) = match subsystem {
                        Subsystem::A => (j, k, i, l),
                        Subsystem::B => (i, l, j, k),
                    };
                    out.0[2 * i + k][2 * j + l] = m.0[2 * ri + rk][2 * cj + cl];
                }
            }
        }
    }
    out
}

/// Trace over the factor that is not `keep`.
pub fn partial_trace(m: &CMat4, keep: Subsystem) -> CMat2 {
    let mut out = CMat2::zeros();
    for x in 0..2 {
        for y in 0..2 {
            out.0[x][y] = match keep {
                Subsystem::A => m.0[2 * x][2 * y] + m.0[2 * x + 1][2 * y + 1],
                Subsystem::B => m.0[x][y] + m.0[2 + x][2 + y],
            };
        }
    }
    out
}

/// Spectrum (non-ascending) and orthonormal eigenvectors of a Hermitian 4×4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: [f64; 4],
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: [[C64; 4]; 4],
}

impl EigenDecomposition {
    /// `Σ f(λ_k) v_k v_k†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMat4 {
        let mut out = CMat4::zeros();
        for k in 0..4 {
            let w = f(self.eigenvalues[k]);
            if w == 0.0 {
                continue;
            }
            out = out + CMat4::projector(&self.eigenvectors[k]).scale_re(w);
        }
        out
    }

    pub fn reconstruct(&self) -> CMat4 {
        self.reconstruct_with(|x| x)
    }

    /// Unitary whose columns are the eigenvectors.
    pub fn unitary(&self) -> CMat4 {
        CMat4::from_columns(&self.eigenvectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[3]
    }
}

/// Cyclic complex Jacobi diagonalization.
///
/// Each rotation first removes the phase of the pivot `m[p][q]` and then
/// applies the real symmetric Jacobi rotation that annihilates it. Stops when
/// the off-diagonal Frobenius mass drops below `1e-14 · max(1, ‖m‖_F)` or after
/// 100 sweeps.
pub fn hermitian_eig(m: &CMat4) -> Result<EigenDecomposition, QmatError> {
    if !m.is_finite() {
        return Err(QmatError::NonFinite);
    }
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(QmatError::NotHermitian(defect));
    }
    let mut a = m.hermitian_part();
    let mut v = CMat4::identity();
    let threshold = JACOBI_OFF_TOL * a.frobenius_norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if a.off_diagonal_norm() < threshold {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a.0[p][q];
                let r = apq.norm();
                if r < f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r;
                let app = a.0[p][p].re;
                let aqq = a.0[q][q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) on (p,q) followed by the real rotation
                let gpp = C64::new(c, 0.0);
                let gpq = C64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;

                // a <- a G
                for row in 0..4 {
                    let x = a.0[row][p];
                    let y = a.0[row][q];
                    a.0[row][p] = x * gpp + y * gqp;
                    a.0[row][q] = x * gpq + y * gqq;
                }
                // a <- G† a
                for col in 0..4 {
                    let x = a.0[p][col];
                    let y = a.0[q][col];
                    a.0[p][col] = gpp.conj() * x + gqp.conj() * y;
                    a.0[q][col] = gpq.conj() * x + gqq.conj() * y;
                }
                a.0[p][q] = ZERO;
                a.0[q][p] = ZERO;
                a.0[p][p].im = 0.0;
                a.0[q][q].im = 0.0;
                for row in 0..4 {
                    let x = v.0[row][p];
                    let y = v.0[row][q];
                    v.0[row][p] = x * gpp + y * gqp;
                    v.0[row][q] = x * gpq + y * gqq;
                }
            }
        }
    }

    let diag = a.real_diagonal();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let mut eigenvalues = [0.0; 4];
    let mut eigenvectors = [[ZERO; 4]; 4];
    for (slot, &k) in order.iter().enumerate() {
        eigenvalues[slot] = diag[k];
        eigenvectors[slot] = v.column(k);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Singular values (non-ascending) by one-sided Jacobi orthogonalization of
/// the columns. Small singular values come out with absolute accuracy on the
/// order of `ε·‖m‖`, unlike square roots of eigenvalues of `m†m`.
pub fn singular_values(m: &CMat4) -> [f64; 4] {
    let mut cols: [[C64; 4]; 4] = [m.column(0), m.column(1), m.column(2), m.column(3)];
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return [0.0; 4];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..3 {
            for q in (p + 1)..4 {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g < f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..4 {
                    let x = cols[p][i];
                    let y = cols[q][i] * phase.conj();
                    cols[p][i] = x * c - y * s;
                    cols[q][i] = (x * s + y * c) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = cols.map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of eigenvalues strictly above `tol`.
pub fn numeric_rank(eigs: &[f64], tol: f64) -> usize {
    eigs.iter().filter(|&&x| x > tol).count()
}
