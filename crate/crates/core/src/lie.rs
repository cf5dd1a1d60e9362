//! Finite-dimensional symmetric Lie algebras `(g, τ)`.
//!
//! The basis always diagonalizes the involution, so every basis element is
//! either τ-fixed (`h`) or τ-odd (`q`). Structure constants are stored
//! densely: `[e_i, e_j] = Σ_k c[i][j][k] e_k`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, expm, CMat};

/// Tolerance used by [`ValidationReport::passed`].
pub const VALIDATION_TOL: f64 = 1e-12;

const CDUAL_PREFIX: &str = "i·";

/// Which eigenspace of the involution a basis element lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// τ-fixed, eigenvalue `+1`.
    H,
    /// τ-odd, eigenvalue `−1`.
    Q,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::H => 1.0,
            Parity::Q => -1.0,
        }
    }
}

/// How the basis acts when the algebra comes with a concrete realization.
#[derive(Debug, Clone, PartialEq)]
pub enum Realization {
    /// Affine matrices `[[A, b], [0, 0]]` of size `(d+1)×(d+1)` acting on `ℝ^d`.
    Affine(Vec<DMatrix<f64>>),
    /// Square matrices acting on matrix space by right multiplication.
    Linear(Vec<DMatrix<f64>>),
}

impl Realization {
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        match self {
            Realization::Affine(m) | Realization::Linear(m) => m,
        }
    }
}

/// A real Lie algebra with an involutive automorphism in diagonal form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricLieAlgebra {
    name: String,
    labels: Vec<String>,
    constants: Vec<f64>,
    parity: Vec<Parity>,
    realization: Option<Realization>,
    fingerprint: u64,
}

/// Violations found by [`SymmetricLieAlgebra::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub antisymmetry: f64,
    pub jacobi: f64,
    pub involution: f64,
    pub hh_in_h: f64,
    pub qq_in_h: f64,
    pub hq_in_q: f64,
}

impl ValidationReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.antisymmetry,
            self.jacobi,
            self.involution,
            self.hh_in_h,
            self.qq_in_h,
            self.hq_in_q,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_violation() <= VALIDATION_TOL
    }

    /// Name of the worst check, for error messages.
    pub fn worst(&self) -> &'static str {
        let named = [
            ("antisymmetry", self.antisymmetry),
            ("jacobi", self.jacobi),
            ("involution", self.involution),
            ("[h,h] ⊆ h", self.hh_in_h),
            ("[q,q] ⊆ h", self.qq_in_h),
            ("[h,q] ⊆ q", self.hq_in_q),
        ];
        named.iter().fold(named[0], |a, b| if b.1 > a.1 { *b } else { a }).0
    }
}

/// An element of `g_ℂ`, expanded in the basis of its parent algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    pub coeffs: Vec<Complex64>,
    origin: u64,
}

impl AlgebraElement {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|z| z * s).collect(),
            origin: self.origin,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_parent(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            origin: self.origin,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c(-1.0)))
    }

    /// True when every coefficient is real.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|z| z.im.abs() <= tol)
    }

    fn same_parent(&self, other: &Self) -> Result<()> {
        if self.origin != other.origin || self.dim() != other.dim() {
            return Err(Error::InvalidArgument(String::from(
                "elements belong to different algebras",
            )));
        }
        Ok(())
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, seed: u64) -> u64 {
    let mut h = seed;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl SymmetricLieAlgebra {
    /// Build from flat constants (`c[i][j][k]` at `(i·n + j)·n + k`) and an
    /// involution matrix, which must be diagonal with `±1` entries.
    pub fn new(
        name: impl Into<String>,
        labels: Vec<String>,
        constants: Vec<f64>,
        involution: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidArgument(String::from(
                "algebra needs at least one basis element",
            )));
        }
        if constants.len() != n * n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n * n,
                got: constants.len(),
            });
        }
        if involution.nrows() != n || involution.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: involution.nrows(),
            });
        }
        let mut parity = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && involution[(i, j)] != 0.0 {
                    return Err(Error::Validation(String::from(
                        "involution must be diagonal in the chosen basis",
                    )));
                }
            }
            parity.push(match involution[(i, i)] {
                1.0 => Parity::H,
                -1.0 => Parity::Q,
                v => return Err(Error::Validation(format!("involution diagonal entry {v} is not ±1"))),
            });
        }
        if constants.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(String::from("non-finite structure constant")));
        }
        Ok(Self::assemble(name.into(), labels, constants, parity, None))
    }

    /// Same as [`new`](Self::new) with nested constants `c[i][j][k]`.
    pub fn from_nested(
        name: impl Into<String>,
        labels: Vec<String>,
        constants: &[Vec<Vec<f64>>],
        involution: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        let shape_ok = constants.len() == n
            && constants
                .iter()
                .all(|row| row.len() == n && row.iter().all(|v| v.len() == n));
        if !shape_ok {
            return Err(Error::Validation(format!(
                "structure constants must have shape {n}×{n}×{n}"
            )));
        }
        let flat = constants.iter().flatten().flatten().copied().collect();
        Self::new(name, labels, flat, involution)
    }

    fn assemble(
        name: String,
        labels: Vec<String>,
        constants: Vec<f64>,
        parity: Vec<Parity>,
        realization: Option<Realization>,
    ) -> Self {
        let mut fp = fnv1a(name.bytes(), 0xcbf2_9ce4_8422_2325);
        for l in &labels {
            fp = fnv1a(l.bytes(), fp);
        }
        fp = fnv1a(constants.iter().flat_map(|v| v.to_bits().to_le_bytes()), fp);
        fp = fnv1a(parity.iter().map(|p| matches!(p, Parity::H) as u8), fp);
        Self {
            name,
            labels,
            constants,
            parity,
            realization,
            fingerprint: fp,
        }
    }

    pub fn with_realization(mut self, realization: Realization) -> Result<Self> {
        if realization.matrices().len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: realization.matrices().len(),
            });
        }
        self.realization = Some(realization);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn parity(&self, k: usize) -> Parity {
        self.parity[k]
    }

    pub fn h_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.parity[k] == Parity::H).collect()
    }

    pub fn q_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.parity[k] == Parity::Q).collect()
    }

    pub fn realization(&self) -> Option<&Realization> {
        self.realization.as_ref()
    }

    /// `c[i][j][k]`.
    #[inline]
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.constants[(i * n + j) * n + k]
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn involution(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.parity.iter().map(|p| p.sign()),
        ))
    }

    pub fn element(&self, coeffs: Vec<Complex64>) -> Result<AlgebraElement> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        Ok(AlgebraElement {
            coeffs,
            origin: self.fingerprint,
        })
    }

    pub fn real_element(&self, coeffs: &[f64]) -> Result<AlgebraElement> {
        self.element(coeffs.iter().map(|v| c(*v)).collect())
    }

    pub fn basis(&self, k: usize) -> AlgebraElement {
        let mut coeffs = vec![c(0.0); self.dim()];
        coeffs[k] = c(1.0);
        AlgebraElement {
            coeffs,
            origin: self.fingerprint,
        }
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            coeffs: vec![c(0.0); self.dim()],
            origin: self.fingerprint,
        }
    }

    fn owns(&self, x: &AlgebraElement) -> Result<()> {
        if x.origin != self.fingerprint || x.dim() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "element does not belong to algebra `{}`",
                self.name
            )));
        }
        Ok(())
    }

    /// Bilinear extension of the structure constants.
    pub fn bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        self.owns(a)?;
        self.owns(b)?;
        Ok(self.bracket_unchecked(&a.coeffs, &b.coeffs))
    }

    fn bracket_unchecked(&self, a: &[Complex64], b: &[Complex64]) -> AlgebraElement {
        let n = self.dim();
        let mut out = vec![c(0.0); n];
        for (i, ai) in a.iter().enumerate() {
            if *ai == c(0.0) {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                let ab = ai * bj;
                if ab == c(0.0) {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    let cijk = self.constant(i, j, k);
                    if cijk != 0.0 {
                        *o += ab * cijk;
                    }
                }
            }
        }
        AlgebraElement {
            coeffs: out,
            origin: self.fingerprint,
        }
    }

    /// `[e_i, e_j]` as a real coefficient vector.
    pub fn basis_bracket(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.dim()).map(|k| self.constant(i, j, k)).collect()
    }

    /// `τ(x)`.
    pub fn involute(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.owns(x)?;
        Ok(AlgebraElement {
            coeffs: x.coeffs.iter().zip(&self.parity).map(|(z, p)| z * p.sign()).collect(),
            origin: self.fingerprint,
        })
    }

    /// Check antisymmetry, Jacobi, `τ² = I` and the eigenspace inclusions.
    pub fn validate(&self) -> ValidationReport {
        let n = self.dim();
        let mut antisymmetry = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    antisymmetry = antisymmetry.max((self.constant(i, j, k) + self.constant(j, i, k)).abs());
                }
            }
        }

        let mut jacobi = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    for m in 0..n {
                        // [[a,b],d] + [[b,d],a] + [[d,a],b], component m
                        let mut s = 0.0;
                        for k in 0..n {
                            s += self.constant(a, b, k) * self.constant(k, d, m)
                                + self.constant(b, d, k) * self.constant(k, a, m)
                                + self.constant(d, a, k) * self.constant(k, b, m);
                        }
                        jacobi = jacobi.max(s.abs());
                    }
                }
            }
        }

        let tau = self.involution();
        let involution = (&tau * &tau - DMatrix::identity(n, n)).abs().max();

        let (mut hh, mut qq, mut hq) = (0.0_f64, 0.0_f64, 0.0_f64);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.constant(i, j, k).abs();
                    match (self.parity[i], self.parity[j], self.parity[k]) {
                        (Parity::H, Parity::H, Parity::Q) => hh = hh.max(v),
                        (Parity::Q, Parity::Q, Parity::Q) => qq = qq.max(v),
                        (Parity::H, Parity::Q, Parity::H) | (Parity::Q, Parity::H, Parity::H) => hq = hq.max(v),
                        _ => {}
                    }
                }
            }
        }
        ValidationReport {
            antisymmetry,
            jacobi,
            involution,
            hh_in_h: hh,
            qq_in_h: qq,
            hq_in_q: hq,
        }
    }

    /// The dual algebra on `h ⊕ i·q`. Brackets of two `q` elements change
    /// sign; everything else is unchanged. Applying it twice returns the
    /// original constants and labels.
    pub fn c_dual(&self) -> Result<Self> {
        let report = self.validate();
        if !report.passed() {
            return Err(Error::Validation(format!(
                "{} violation {:e}",
                report.worst(),
                report.max_violation()
            )));
        }
        let n = self.dim();
        let mut constants = self.constants.clone();
        for i in 0..n {
            for j in 0..n {
                if self.parity[i] == Parity::Q && self.parity[j] == Parity::Q {
                    for k in 0..n {
                        constants[(i * n + j) * n + k] = -constants[(i * n + j) * n + k];
                    }
                }
            }
        }
        let labels = self
            .labels
            .iter()
            .zip(&self.parity)
            .map(|(l, p)| match p {
                Parity::H => l.clone(),
                Parity::Q => match l.strip_prefix(CDUAL_PREFIX) {
                    Some(orig) => orig.to_string(),
                    None => format!("{CDUAL_PREFIX}{l}"),
                },
            })
            .collect();
        let name = match self.name.strip_prefix("c_dual(").and_then(|s| s.strip_suffix(')')) {
            Some(orig) => orig.to_string(),
            None => format!("c_dual({})", self.name),
        };
        Ok(Self::assemble(name, labels, constants, self.parity.clone(), None))
    }

    /// Coefficients in `g_ℂ` of the c-dual element with real coordinates
    /// `coeffs`: `h` parts stay real, `q` parts pick up a factor `i`.
    pub fn cdual_embedding(&self, coeffs: &[f64]) -> Result<AlgebraElement> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        let z = coeffs
            .iter()
            .zip(&self.parity)
            .map(|(v, p)| match p {
                Parity::H => c(*v),
                Parity::Q => Complex64::new(0.0, *v),
            })
            .collect();
        self.element(z)
    }

    /// True when `x` lies in `h + i q` (real on `h`, imaginary on `q`).
    pub fn in_cdual_real_form(&self, x: &AlgebraElement, tol: f64) -> bool {
        x.coeffs.iter().zip(&self.parity).all(|(z, p)| match p {
            Parity::H => z.im.abs() <= tol,
            Parity::Q => z.re.abs() <= tol,
        })
    }

    /// `ad(x)` with `ad(x)_{kj} = Σ_i x_i c[i][j][k]`.
    pub fn ad(&self, x: &AlgebraElement) -> Result<CMat> {
        self.owns(x)?;
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for (i, xi) in x.coeffs.iter().enumerate() {
            if *xi == c(0.0) {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += xi * self.constant(i, j, k);
                }
            }
        }
        Ok(m)
    }

    /// `e^{t ad x}`.
    pub fn exp_ad(&self, x: &AlgebraElement, t: f64) -> Result<CMat> {
        Ok(expm(&(self.ad(x)? * c(t))))
    }

    /// Apply a matrix in the basis to an element.
    pub fn apply(&self, m: &CMat, y: &AlgebraElement) -> Result<AlgebraElement> {
        self.owns(y)?;
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        let v = m * nalgebra::DVector::from_column_slice(&y.coeffs);
        Ok(AlgebraElement {
            coeffs: v.iter().copied().collect(),
            origin: self.fingerprint,
        })
    }
}

/// Names accepted by [`builtin_algebra`].
pub const BUILTIN_ALGEBRAS: [&str; 3] = ["euclidean_motion", "abelian", "matrix_involutive"];

/// Construct a builtin algebra by name.
///
/// - `euclidean_motion` takes `[d, p, q]` with `p + q = d`;
/// - `abelian` takes `[d]`;
/// - `matrix_involutive` takes `[n]`.
pub fn builtin_algebra(name: &str, params: &[usize]) -> Result<SymmetricLieAlgebra> {
    let want = |k: usize| -> Result<()> {
        if params.len() != k {
            return Err(Error::InvalidArgument(format!(
                "`{name}` takes {k} integer parameter(s), got {}",
                params.len()
            )));
        }
        Ok(())
    };
    match name {
        "euclidean_motion" => {
            want(3)?;
            euclidean_motion(params[0], params[1], params[2])
        }
        "abelian" => {
            want(1)?;
            abelian(params[0])
        }
        "matrix_involutive" => {
            want(1)?;
            matrix_involutive(params[0])
        }
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Structure constants of a matrix basis that is orthogonal for the
/// Frobenius inner product and closed under commutators.
fn constants_from_matrices(basis: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    let n = basis.len();
    let norms: Vec<f64> = basis.iter().map(|b| frobenius(b, b)).collect();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let comm = &basis[i] * &basis[j] - &basis[j] * &basis[i];
            let mut rest = comm.clone();
            for k in 0..n {
                let coef = frobenius(&comm, &basis[k]) / norms[k];
                out[(i * n + j) * n + k] = coef;
                rest -= &basis[k] * coef;
            }
            if rest.abs().max() > 1e-12 {
                return Err(Error::Validation(String::from(
                    "matrix basis is not closed under commutators",
                )));
            }
        }
    }
    Ok(out)
}

fn from_matrices(
    name: String,
    labels: Vec<String>,
    parity: Vec<Parity>,
    realization: Realization,
) -> Result<SymmetricLieAlgebra> {
    let constants = constants_from_matrices(realization.matrices())?;
    Ok(SymmetricLieAlgebra::assemble(
        name,
        labels,
        constants,
        parity,
        Some(realization),
    ))
}

/// `ℝ^d ⋊ so(d)` with the involution induced by `I_{p,q} = diag(−I_p, I_q)`.
///
/// Basis order: rotations `r_ij` (`i < j`, acting as `E_ji − E_ij`) then
/// translations `t_k`. Realized by `(d+1)×(d+1)` affine matrices.
pub fn euclidean_motion(d: usize, p: usize, q: usize) -> Result<SymmetricLieAlgebra> {
    if d == 0 || p + q != d {
        return Err(Error::InvalidArgument(format!(
            "euclidean_motion needs d ≥ 1 and p + q = d, got ({d}, {p}, {q})"
        )));
    }
    let sign = |k: usize| if k < p { -1.0 } else { 1.0 };
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    let mut parity = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let mut m = DMatrix::zeros(d + 1, d + 1);
            m[(j, i)] = 1.0;
            m[(i, j)] = -1.0;
            mats.push(m);
            labels.push(if d == 2 {
                String::from("r")
            } else {
                format!("r{}{}", i + 1, j + 1)
            });
            parity.push(if sign(i) * sign(j) > 0.0 { Parity::H } else { Parity::Q });
        }
    }
    for k in 0..d {
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m[(k, d)] = 1.0;
        mats.push(m);
        labels.push(format!("t{}", k + 1));
        parity.push(if sign(k) > 0.0 { Parity::H } else { Parity::Q });
    }
    from_matrices(
        format!("euclidean_motion({d},{p},{q})"),
        labels,
        parity,
        Realization::Affine(mats),
    )
}

/// `ℝ^d` with zero bracket and `τ = −I`, realized by diagonal matrices.
pub fn abelian(d: usize) -> Result<SymmetricLieAlgebra> {
    if d == 0 {
        return Err(Error::InvalidArgument(String::from("abelian needs d ≥ 1")));
    }
    let mats = (0..d)
        .map(|k| {
            let mut m = DMatrix::zeros(d, d);
            m[(k, k)] = 1.0;
            m
        })
        .collect();
    let labels = (0..d).map(|k| format!("a{}", k + 1)).collect();
    from_matrices(
        format!("abelian({d})"),
        labels,
        vec![Parity::Q; d],
        Realization::Linear(mats),
    )
}

/// `gl(n, ℝ)` with `τ(a) = −aᵀ`: `h = so(n)`, `q` = symmetric matrices.
pub fn matrix_involutive(n: usize) -> Result<SymmetricLieAlgebra> {
    if n == 0 {
        return Err(Error::InvalidArgument(String::from("matrix_involutive needs n ≥ 1")));
    }
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    let mut parity = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = 1.0;
            m[(j, i)] = -1.0;
            mats.push(m);
            labels.push(format!("k{}{}", i + 1, j + 1));
            parity.push(Parity::H);
        }
    }
    for i in 0..n {
        let mut m = DMatrix::zeros(n, n);
        m[(i, i)] = 1.0;
        mats.push(m);
        labels.push(format!("d{}", i + 1));
        parity.push(Parity::Q);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
            mats.push(m);
            labels.push(format!("s{}{}", i + 1, j + 1));
            parity.push(Parity::Q);
        }
    }
    from_matrices(
        format!("matrix_involutive({n})"),
        labels,
        parity,
        Realization::Linear(mats),
    )
}
