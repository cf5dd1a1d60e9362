//! Lie-derivative operators on kernel spans.
//!
//! For a field `X` the operator `L_X` is known through its form on the
//! sample, `B_ij = ⟨L_X K_{m_j}, K_{m_i}⟩ = (L_X K_{m_j})(m_i)`, and is
//! compressed to the whitened basis as `Ã = W B W†`. Symmetry is decided on
//! `B` itself, since whitening amplifies roundoff by `1/λ_min`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{flow_point_strict, integrate_curve, lie_bracket, pushforward, ChartDomain, Point, VectorField};
use crate::kernels::{GramModel, Kernel, RKHSVector};
use crate::lie::{AlgebraElement, Parity, Realization, SymmetricLieAlgebra};
use crate::linalg::{c, expm, hermitian_defect, max_abs, CMat, HermitianEigen, I};

/// Default relative tolerance for symmetry classification.
pub const DEFAULT_TOL_SYM: f64 = 1e-8;

/// Symmetry type of `L_X` with respect to the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `ε = +1`: `⟨L_X K_m, K_n⟩ = ⟨K_m, L_X K_n⟩`.
    Symmetric,
    /// `ε = −1`.
    Skew,
}

impl Symmetry {
    pub fn sign(self) -> f64 {
        match self {
            Symmetry::Symmetric => 1.0,
            Symmetry::Skew => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Self {
        if s >= 0.0 {
            Symmetry::Symmetric
        } else {
            Symmetry::Skew
        }
    }

    /// The symmetry an `h` (skew) or `q` (symmetric) element must have.
    pub fn expected_for(parity: Parity) -> Self {
        match parity {
            Parity::H => Symmetry::Skew,
            Parity::Q => Symmetry::Symmetric,
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::Symmetric => "+1",
            Symmetry::Skew => "-1",
        })
    }
}

/// `B_ij = ∇₁K(m_i, m_j)·X(m_i)`.
pub fn lie_derivative_form(kernel: &Kernel, field: &VectorField, points: &[Point]) -> Result<CMat> {
    if kernel.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: field.dim(),
        });
    }
    let n = points.len();
    let mut b = CMat::zeros(n, n);
    for (i, mi) in points.iter().enumerate() {
        let x = field.eval(mi)?;
        for (j, mj) in points.iter().enumerate() {
            let g = kernel.grad1(mi, mj)?;
            b[(i, j)] = g.iter().zip(x.iter()).map(|(gk, xk)| gk * *xk).sum();
        }
    }
    Ok(b)
}

/// Relative symmetric and skew defects of a form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    /// `max|B − B†| / max|B|`.
    pub symmetric_defect: f64,
    /// `max|B + B†| / max|B|`.
    pub skew_defect: f64,
    pub scale: f64,
    pub symmetry: Option<Symmetry>,
}

impl ClassificationReport {
    pub fn defect_for(&self, s: Symmetry) -> f64 {
        match s {
            Symmetry::Symmetric => self.symmetric_defect,
            Symmetry::Skew => self.skew_defect,
        }
    }
}

/// Classify a form; a vanishing form counts as symmetric.
pub fn classify_form(b: &CMat, tol_sym: f64) -> ClassificationReport {
    let scale = max_abs(b);
    let (sym, skew) = if scale == 0.0 {
        (0.0, 0.0)
    } else {
        (hermitian_defect(b, 1.0) / scale, hermitian_defect(b, -1.0) / scale)
    };
    let symmetry = if sym <= tol_sym {
        Some(Symmetry::Symmetric)
    } else if skew <= tol_sym {
        Some(Symmetry::Skew)
    } else {
        None
    };
    ClassificationReport {
        symmetric_defect: sym,
        skew_defect: skew,
        scale,
        symmetry,
    }
}

/// Symmetry of the form `B` built on the points of `model`.
pub fn symmetry_classify(b: &CMat, model: &GramModel, tol_sym: f64) -> Result<Option<Symmetry>> {
    if b.nrows() != model.len() || b.ncols() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            got: b.nrows(),
        });
    }
    Ok(classify_form(b, tol_sym).symmetry)
}

/// Compressed operator in the orthonormal basis of a [`GramModel`].
#[derive(Debug, Clone)]
pub struct OperatorCompression {
    pub label: String,
    pub form: CMat,
    /// `W B W†`, symmetrized according to `symmetry`.
    pub matrix: CMat,
    pub symmetry: Option<Symmetry>,
    /// Relative defect of the form for the chosen symmetry.
    pub form_defect: f64,
    /// Relative defect of the raw compression before symmetrization.
    pub compressed_defect: f64,
    eigen: Option<HermitianEigen>,
}

/// Compress a form. With `symmetry = None` the raw compression is kept for
/// diagnostics and no spectral calculus is available.
pub fn compress_operator(
    b: &CMat,
    model: &GramModel,
    symmetry: Option<Symmetry>,
    tol_sym: f64,
) -> Result<OperatorCompression> {
    let raw = model.compress_form(b)?;
    let report = classify_form(b, tol_sym);
    let (matrix, form_defect, compressed_defect, eigen) = match symmetry {
        None => (raw, 0.0, 0.0, None),
        Some(s) => {
            let defect = report.defect_for(s);
            if defect > tol_sym {
                return Err(Error::ClassificationInconsistency { defect, tol: tol_sym });
            }
            let sign = s.sign();
            let scale = max_abs(&raw);
            let compressed_defect = if scale == 0.0 {
                0.0
            } else {
                hermitian_defect(&raw, sign) / scale
            };
            let m = (&raw + raw.adjoint() * c(sign)) * c(0.5);
            let eig = match s {
                Symmetry::Symmetric => HermitianEigen::new(&m),
                Symmetry::Skew => HermitianEigen::new(&(&m * I)),
            };
            (m, defect, compressed_defect, Some(eig))
        }
    };
    Ok(OperatorCompression {
        label: String::from("operator"),
        form: b.clone(),
        matrix,
        symmetry,
        form_defect,
        compressed_defect,
        eigen,
    })
}

/// Which one-parameter family to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralMode {
    /// `e^{tÃ}` for symmetric `Ã`.
    Semigroup(f64),
    /// `e^{itÃ}` for symmetric `Ã`, `e^{tÃ}` for skew `Ã`.
    Unitary(f64),
}

impl OperatorCompression {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues of `Ã` (symmetric) or of `iÃ` (skew), descending.
    pub fn spectrum(&self) -> Option<&[f64]> {
        self.eigen.as_ref().map(|e| e.values.as_slice())
    }

    fn eigen_for(&self, need: &'static str) -> Result<&HermitianEigen> {
        self.eigen.as_ref().ok_or(Error::SymmetryMismatch { required: need })
    }

    /// `e^{tÃ}`; only for symmetric operators.
    pub fn semigroup_matrix(&self, t: f64) -> Result<CMat> {
        if self.symmetry != Some(Symmetry::Symmetric) {
            return Err(Error::SymmetryMismatch { required: "symmetric" });
        }
        let e = self.eigen_for("symmetric")?;
        Ok(e.apply_fn(|l| c(num_traits::Float::exp(t * l))))
    }

    /// `e^{itÃ}` for symmetric and `e^{tÃ}` for skew operators.
    pub fn unitary_matrix(&self, t: f64) -> Result<CMat> {
        let e = self.eigen_for("symmetric or skew")?;
        Ok(match self.symmetry {
            Some(Symmetry::Symmetric) => e.apply_fn(|l| Complex64::from_polar(1.0, t * l)),
            // Ã = −i(iÃ), so e^{tÃ} = e^{−it(iÃ)}
            Some(Symmetry::Skew) => e.apply_fn(|l| Complex64::from_polar(1.0, -t * l)),
            None => unreachable!("eigen is present only with a symmetry"),
        })
    }

    pub fn spectral_matrix(&self, mode: SpectralMode) -> Result<CMat> {
        match mode {
            SpectralMode::Semigroup(t) => self.semigroup_matrix(t),
            SpectralMode::Unitary(t) => self.unitary_matrix(t),
        }
    }

    /// `e^{tÃ}` for any operator, via the matrix exponential.
    pub fn exp(&self, t: f64) -> CMat {
        expm(&(&self.matrix * c(t)))
    }
}

pub fn spectral_apply(op: &OperatorCompression, mode: SpectralMode, v: &RKHSVector) -> Result<RKHSVector> {
    if v.coords.len() != op.rank() {
        return Err(Error::DimensionMismatch {
            expected: op.rank(),
            got: v.coords.len(),
        });
    }
    Ok(RKHSVector {
        coords: op.spectral_matrix(mode)? * &v.coords,
        label: None,
    })
}

/// Build, classify and compress `L_X` on the sample of `model`.
pub fn lie_derivative_operator(
    kernel: &Kernel,
    field: &VectorField,
    model: &GramModel,
    tol_sym: f64,
) -> Result<OperatorCompression> {
    let b = lie_derivative_form(kernel, field, model.points())?;
    let sym = classify_form(&b, tol_sym).symmetry;
    Ok(compress_operator(&b, model, sym, tol_sym)?.with_label(field.label()))
}

type PointMap = dyn Fn(f64, &Point) -> Point + Send + Sync;

/// A homomorphism `β: g → V(M)` assembled from fields for the basis, with
/// optional closed-form flows.
#[derive(Clone)]
pub struct CompatibleAction {
    pub algebra: SymmetricLieAlgebra,
    fields: Vec<VectorField>,
    flows: Vec<Option<Arc<PointMap>>>,
}

impl fmt::Debug for CompatibleAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompatibleAction")
            .field("algebra", &self.algebra.name())
            .field("fields", &self.fields)
            .finish()
    }
}

/// Per-element result of [`compatibility_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElementCompatibility {
    pub label: String,
    pub parity: Parity,
    /// `max |L¹_{β(x)}K + L²_{β(τx)}K|` over sample pairs.
    pub defect: f64,
    /// Largest form entry, for scale.
    pub scale: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub elements: Vec<ElementCompatibility>,
    pub tol: f64,
}

impl CompatibilityReport {
    pub fn passed(&self) -> bool {
        self.elements.iter().all(|e| e.passed)
    }

    pub fn max_defect(&self) -> f64 {
        self.elements.iter().fold(0.0, |a, e| a.max(e.defect))
    }
}

impl CompatibleAction {
    pub fn new(algebra: SymmetricLieAlgebra, fields: Vec<VectorField>) -> Result<Self> {
        if fields.len() != algebra.dim() {
            return Err(Error::DimensionMismatch {
                expected: algebra.dim(),
                got: fields.len(),
            });
        }
        let d = fields[0].dim();
        if let Some(bad) = fields.iter().find(|f| f.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        let n = fields.len();
        Ok(Self {
            algebra,
            fields,
            flows: alloc::vec![None; n],
        })
    }

    /// Attach a closed-form flow `σ_t` for basis element `k`.
    pub fn with_flow(mut self, k: usize, flow: impl Fn(f64, &Point) -> Point + Send + Sync + 'static) -> Self {
        self.flows[k] = Some(Arc::new(flow));
        self
    }

    /// Action of an affinely realized algebra on `ℝ^d` (or a chart of it):
    /// `β(x)(p) = −(A p + b)`. The sign makes `β` a homomorphism for the
    /// bracket `[X, Y] = DY·X − DX·Y`. Flows are the affine exponentials.
    pub fn affine(algebra: SymmetricLieAlgebra, domain: Option<ChartDomain>) -> Result<Self> {
        let mats = match algebra.realization() {
            Some(Realization::Affine(m)) => m.clone(),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "algebra `{}` has no affine realization",
                    algebra.name()
                )))
            }
        };
        let d = mats[0].nrows() - 1;
        let domain = domain.unwrap_or_else(|| ChartDomain::euclidean(d));
        if domain.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: domain.dim(),
            });
        }
        let fields = mats
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let a = -m.view((0, 0), (d, d)).into_owned();
                let b = -m.view((0, d), (d, 1)).column(0).into_owned();
                let jac = a.clone();
                VectorField::new(domain.clone(), move |p| &a * p + &b)
                    .with_jacobian(move |_| jac.clone())
                    .with_label(algebra.label(k))
            })
            .collect();
        let mut action = Self::new(algebra, fields)?;
        for (k, m) in mats.into_iter().enumerate() {
            action = action.with_flow(k, move |t, p| {
                let e = expm(&(&m * -t));
                let mut h = DMatrix::from_element(d + 1, 1, 1.0);
                h.view_mut((0, 0), (d, 1)).copy_from(p);
                (e * h).view((0, 0), (d, 1)).column(0).into_owned()
            });
        }
        Ok(action)
    }

    /// Action of a linearly realized algebra on `n×n` matrices (flattened
    /// column-major) by right multiplication: `β(x)(g) = g X`.
    pub fn right_multiplication(algebra: SymmetricLieAlgebra, domain: Option<ChartDomain>) -> Result<Self> {
        let mats = match algebra.realization() {
            Some(Realization::Linear(m)) => m.clone(),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "algebra `{}` has no linear realization",
                    algebra.name()
                )))
            }
        };
        let n = mats[0].nrows();
        let domain = domain.unwrap_or_else(|| ChartDomain::euclidean(n * n));
        if domain.dim() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: domain.dim(),
            });
        }
        let fields = mats
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let xv = x.clone();
                // vec(g X) = (Xᵀ ⊗ I) vec(g)
                let jac = x.transpose().kronecker(&DMatrix::<f64>::identity(n, n));
                VectorField::new(domain.clone(), move |p| {
                    let g = DMatrix::from_column_slice(n, n, p.as_slice());
                    Point::from_column_slice((g * &xv).as_slice())
                })
                .with_jacobian(move |_| jac.clone())
                .with_label(algebra.label(k))
            })
            .collect();
        let mut action = Self::new(algebra, fields)?;
        for (k, x) in mats.into_iter().enumerate() {
            action = action.with_flow(k, move |t, p| {
                let g = DMatrix::from_column_slice(n, n, p.as_slice());
                Point::from_column_slice((g * expm(&(&x * t))).as_slice())
            });
        }
        Ok(action)
    }

    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn basis_field(&self, k: usize) -> &VectorField {
        &self.fields[k]
    }

    /// `β(x)` for a real element.
    pub fn field(&self, x: &AlgebraElement) -> Result<VectorField> {
        if x.dim() != self.algebra.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.algebra.dim(),
                got: x.dim(),
            });
        }
        if !x.is_real(0.0) {
            return Err(Error::InvalidArgument(String::from(
                "vector fields exist only for real algebra elements",
            )));
        }
        let terms: Vec<(f64, VectorField)> = x
            .coeffs
            .iter()
            .zip(&self.fields)
            .filter(|(z, _)| z.re != 0.0)
            .map(|(z, f)| (z.re, f.clone()))
            .collect();
        if terms.is_empty() {
            let d = self.dim();
            return Ok(VectorField::constant(Point::zeros(d)).with_label("zero"));
        }
        VectorField::linear_combination(&terms)
    }

    /// `σ_t(p)` along basis element `k`, closed form when attached,
    /// otherwise by integrating the field.
    pub fn flow(&self, k: usize, t: f64, p: &Point, step: f64) -> Result<Point> {
        match &self.flows[k] {
            Some(f) => Ok(f(t, p)),
            None => flow_point_strict(&self.fields[k], p, t, step),
        }
    }

    /// `max |((Φ^x_{−t})_* β(e_y))(p) − β(e^{t ad x} e_y)(p)|` over every
    /// basis element `y` and point, with `x = e_k`.
    pub fn adjoint_flow_defect(&self, k: usize, t: f64, points: &[Point], step: f64) -> Result<f64> {
        let n = self.algebra.dim();
        if k >= n {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} out of range for dimension {n}"
            )));
        }
        let ad = self.algebra.exp_ad(&self.algebra.basis(k), t)?;
        let mut worst = 0.0_f64;
        for y in 0..n {
            let moved = self.algebra.apply(&ad, &self.algebra.basis(y))?;
            let coeffs: Vec<f64> = moved.coeffs.iter().map(|z| z.re).collect();
            let rhs = self.field(&self.algebra.real_element(&coeffs)?)?;
            let lhs = pushforward(&self.fields[k], -t, &self.fields[y], step);
            for p in points {
                worst = worst.max((lhs.eval(p)? - rhs.eval(p)?).amax());
            }
        }
        Ok(worst)
    }

    /// `max |β(a + 2b)(p) − β(a)(p) − 2β(b)(p)|` over basis pairs and points.
    pub fn linearity_defect(&self, points: &[Point]) -> Result<f64> {
        let n = self.algebra.dim();
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                let mut coeffs = alloc::vec![0.0; n];
                coeffs[a] += 1.0;
                coeffs[b] += 2.0;
                let combo = self.field(&self.algebra.real_element(&coeffs)?)?;
                for p in points {
                    let lhs = combo.eval(p)?;
                    let rhs = self.fields[a].eval(p)? + self.fields[b].eval(p)? * 2.0;
                    worst = worst.max((lhs - rhs).amax());
                }
            }
        }
        Ok(worst)
    }

    /// `max |[β(e_i), β(e_j)](p) − β([e_i, e_j])(p)|`.
    pub fn homomorphism_defect(&self, points: &[Point]) -> Result<f64> {
        let n = self.algebra.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let lhs = lie_bracket(&self.fields[i], &self.fields[j]);
                let rhs = self.field(&self.algebra.real_element(&self.algebra.basis_bracket(i, j))?)?;
                for p in points {
                    worst = worst.max((lhs.eval(p)? - rhs.eval(p)?).amax());
                }
            }
        }
        Ok(worst)
    }
}

/// Check `L¹_{β(x)}K = −L²_{β(τx)}K` for every basis element: `h`
/// elements must act skew, `q` elements symmetric.
///
/// An element passes when its defect is at most `tol · max(1, scale)`.
pub fn compatibility_check(
    kernel: &Kernel,
    action: &CompatibleAction,
    points: &[Point],
    tol: f64,
) -> Result<CompatibilityReport> {
    let mut elements = Vec::with_capacity(action.algebra.dim());
    for k in 0..action.algebra.dim() {
        let b = lie_derivative_form(kernel, action.basis_field(k), points)?;
        let parity = action.algebra.parity(k);
        // L²(m, n) = conj(L¹(n, m)) and β(τ e_k) = ±β(e_k)
        let defect = hermitian_defect(&b, -parity.sign());
        let scale = max_abs(&b);
        elements.push(ElementCompatibility {
            label: String::from(action.algebra.label(k)),
            parity,
            defect,
            scale,
            passed: defect <= tol * scale.max(1.0),
        });
    }
    Ok(CompatibilityReport { elements, tol })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowInvarianceReport {
    pub max_drift: f64,
    /// Largest `t` reached by every pair; below `t_max` after a domain exit.
    pub t_reached: f64,
    pub passed: bool,
}

/// Drift of `K(Φ_t m, Φ_{−εt} n)` from `K(m, n)` on `[0, t_max]`.
pub fn flow_invariance_check(
    kernel: &Kernel,
    field: &VectorField,
    symmetry: Symmetry,
    pairs: &[(Point, Point)],
    t_max: f64,
    step: f64,
    tol_flow: f64,
) -> Result<FlowInvarianceReport> {
    let mut max_drift = 0.0_f64;
    let mut t_reached = t_max;
    for (m, n) in pairs {
        let k0 = kernel.eval(m, n)?;
        let cm = integrate_curve(field, m, t_max, step)?;
        let cn = integrate_curve(field, n, -symmetry.sign() * t_max, step)?;
        let len = cm.points.len().min(cn.points.len());
        if len < cm.times.len().max(cn.times.len()) || cm.terminated_early() || cn.terminated_early() {
            t_reached = t_reached.min(cm.times[len - 1].abs());
        }
        for k in 0..len {
            let drift = (kernel.eval(&cm.points[k], &cn.points[k])? - k0).norm();
            max_drift = max_drift.max(drift);
        }
    }
    Ok(FlowInvarianceReport {
        max_drift,
        t_reached,
        passed: max_drift <= tol_flow,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FroelichReport {
    /// `‖e^{tÃ}K̂_m − K̂_{Φ_t(m)}‖ / ‖K̂_{Φ_t(m)}‖`.
    pub delta: f64,
    /// Relative distance of `K_{Φ_t(m)}` from the sample span.
    pub projection_residual: f64,
    pub target: Point,
}

/// Relative norm of the part of `K_p` outside the retained sample span.
pub fn projection_residual(model: &GramModel, kernel: &Kernel, p: &Point) -> Result<f64> {
    let full = kernel.eval(p, p)?.re;
    let proj = model.embed_point(kernel, p)?.norm();
    if !(full > 0.0) {
        return Ok(0.0);
    }
    Ok(num_traits::Float::sqrt((full - proj * proj).max(0.0) / full))
}

/// Compare the compressed semigroup on `K̂_{m}` with the kernel section at
/// the flowed point, using a precomputed symmetric operator.
pub fn froelich_with(
    op: &OperatorCompression,
    kernel: &Kernel,
    field: &VectorField,
    model: &GramModel,
    m: usize,
    t: f64,
    step: f64,
) -> Result<FroelichReport> {
    if m >= model.len() {
        return Err(Error::InvalidArgument(format!("sample index {m} out of range")));
    }
    let target = flow_point_strict(field, &model.points()[m], t, step)?;
    let evolved = spectral_apply(op, SpectralMode::Semigroup(t), &model.embed_sample(m))?;
    let exact = model.embed_point(kernel, &target)?;
    let delta = (&evolved.coords - &exact.coords).norm() / exact.norm();
    Ok(FroelichReport {
        delta,
        projection_residual: projection_residual(model, kernel, &target)?,
        target,
    })
}

/// `δ` for `e^{tL_X} K_m = K_{γ_m(t)}` on the sample model.
pub fn froelich_check(
    kernel: &Kernel,
    field: &VectorField,
    model: &GramModel,
    m: usize,
    t: f64,
    step: f64,
) -> Result<FroelichReport> {
    let op = lie_derivative_operator(kernel, field, model, DEFAULT_TOL_SYM)?;
    if op.symmetry != Some(Symmetry::Symmetric) {
        return Err(Error::SymmetryMismatch { required: "symmetric" });
    }
    froelich_with(&op, kernel, field, model, m, t, step)
}

/// `‖(η(t+h) − η(t−h))/(2h) − ε Ã η(t)‖ / ‖η(t)‖` with `η(t) = K̂_{Φ_t(p)}`.
#[allow(clippy::too_many_arguments)]
pub fn curve_derivative_defect(
    op: &OperatorCompression,
    kernel: &Kernel,
    field: &VectorField,
    model: &GramModel,
    p: &Point,
    t: f64,
    h: f64,
    step: f64,
) -> Result<f64> {
    let sign = op
        .symmetry
        .ok_or(Error::SymmetryMismatch {
            required: "symmetric or skew",
        })?
        .sign();
    let eta = |s: f64| -> Result<RKHSVector> {
        let q = flow_point_strict(field, p, s, step)?;
        model.embed_point(kernel, &q)
    };
    let mid = eta(t)?;
    let fd = (eta(t + h)?.coords - eta(t - h)?.coords) / c(2.0 * h);
    let rhs = &op.matrix * &mid.coords * c(sign);
    Ok((fd - rhs).norm() / mid.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{self, gram};
    use crate::lie;
    use crate::linalg::chebyshev_points;
    use alloc::vec;

    fn line(v: &[f64]) -> Vec<Point> {
        v.iter().map(|x| Point::from_element(1, *x)).collect()
    }

    fn d1() -> VectorField {
        VectorField::translation(1, 0)
    }

    fn exp_sum() -> Kernel {
        Kernel::real("exp_sum", 1, |x, y| (-(x[0] + y[0])).exp()).with_real_grad1(|x, y| vec![-(-(x[0] + y[0])).exp()])
    }

    #[test]
    fn constant_kernel_form_vanishes() {
        let b = lie_derivative_form(&kernels::constant(1, 1.0), &d1(), &line(&[0.0, 1.0])).unwrap();
        assert_eq!(max_abs(&b), 0.0);
        assert_eq!(classify_form(&b, 1e-8).symmetry, Some(Symmetry::Symmetric));
    }

    #[test]
    fn fock_form_is_unclassified() {
        let b = lie_derivative_form(&kernels::fock(1, 1.0), &d1(), &line(&[0.0, 1.0])).unwrap();
        let e = core::f64::consts::E;
        let want = [[0.0, 1.0], [0.0, e]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[(i, j)] - c(want[i][j])).norm() < 1e-14);
            }
        }
        assert_eq!(classify_form(&b, 1e-8).symmetry, None);
    }

    #[test]
    fn classification_by_kernel_type() {
        let pts = line(&[-0.8, -0.3, 0.0, 0.3, 0.8]);
        let model = gram(&kernels::gaussian_laplace(1, 1.0), &pts).unwrap();
        let b = lie_derivative_form(&kernels::gaussian_laplace(1, 1.0), &d1(), &pts).unwrap();
        assert_eq!(symmetry_classify(&b, &model, 1e-8).unwrap(), Some(Symmetry::Symmetric));
        let b = lie_derivative_form(&kernels::gaussian_rbf(1, 0.7), &d1(), &pts).unwrap();
        assert_eq!(classify_form(&b, 1e-8).symmetry, Some(Symmetry::Skew));
        assert!(max_abs(&(&b + b.transpose())) < 1e-15);
    }

    #[test]
    fn eigenfunction_compression() {
        let k = exp_sum();
        let model = gram(&k, &line(&[0.4])).unwrap();
        let op = lie_derivative_operator(&k, &d1(), &model, 1e-8).unwrap();
        assert_eq!(op.symmetry, Some(Symmetry::Symmetric));
        assert!((op.matrix[(0, 0)] - c(-1.0)).norm() < 1e-14);
        let v = model.embed_sample(0);
        let w = spectral_apply(&op, SpectralMode::Semigroup(0.7), &v).unwrap();
        assert!((w.coords - v.coords.clone() * c((-0.7f64).exp())).norm() < 1e-14);
        let same = spectral_apply(&op, SpectralMode::Semigroup(0.0), &v).unwrap();
        assert!((same.coords - v.coords).norm() < 1e-15);
        let r = froelich_check(&k, &d1(), &model, 0, 0.3, 1e-3).unwrap();
        assert!(r.delta < 1e-10, "delta {}", r.delta);
    }

    #[test]
    fn zero_form_compresses_to_zero() {
        let model = gram(&kernels::fock(1, 1.0), &line(&[0.0, 0.5])).unwrap();
        let op = compress_operator(&CMat::zeros(2, 2), &model, Some(Symmetry::Symmetric), 1e-8).unwrap();
        assert_eq!(max_abs(&op.matrix), 0.0);
    }

    #[test]
    fn cosh_kernel_operator_is_hermitian() {
        let mu = kernels::MeasureSample::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let k = kernels::laplace_kernel_from_measure(&mu);
        let pts = line(&chebyshev_points(15, -1.0, 1.0));
        let model = gram(&k, &pts).unwrap();
        let op = lie_derivative_operator(&k, &d1(), &model, 1e-8).unwrap();
        assert_eq!(op.symmetry, Some(Symmetry::Symmetric));
        assert!(op.form_defect <= 1e-10);
        assert!(hermitian_defect(&op.matrix, 1.0) == 0.0);
    }

    #[test]
    fn inconsistent_classification_rejected() {
        let pts = line(&[0.0, 1.0]);
        let model = gram(&kernels::fock(1, 1.0), &pts).unwrap();
        let b = lie_derivative_form(&kernels::fock(1, 1.0), &d1(), &pts).unwrap();
        let err = compress_operator(&b, &model, Some(Symmetry::Symmetric), 1e-8).unwrap_err();
        assert!(matches!(err, Error::ClassificationInconsistency { .. }));
        let diag = compress_operator(&b, &model, None, 1e-8).unwrap();
        assert!(diag.semigroup_matrix(1.0).is_err());
        assert!(diag.unitary_matrix(1.0).is_err());
    }

    #[test]
    fn unitary_and_semigroup_laws() {
        let k = kernels::gaussian_laplace(1, 1.0);
        let model = gram(&k, &line(&chebyshev_points(11, -1.0, 1.0))).unwrap();
        let op = lie_derivative_operator(&k, &d1(), &model, 1e-8).unwrap();
        let r = op.rank();
        let u = op.unitary_matrix(0.8).unwrap();
        assert!(max_abs(&(u.adjoint() * &u - CMat::identity(r, r))) < 1e-12);
        let ab = op.semigroup_matrix(0.2).unwrap() * op.semigroup_matrix(0.3).unwrap();
        let s = op.semigroup_matrix(0.5).unwrap();
        assert!(crate::linalg::op_norm(&(ab - &s)) <= 1e-10 * crate::linalg::op_norm(&s));

        let rbf = kernels::gaussian_rbf(1, 0.5);
        let model = gram(&rbf, &line(&chebyshev_points(9, -1.0, 1.0))).unwrap();
        let skew = lie_derivative_operator(&rbf, &d1(), &model, 1e-8).unwrap();
        assert_eq!(skew.symmetry, Some(Symmetry::Skew));
        assert!(matches!(
            skew.semigroup_matrix(0.1),
            Err(Error::SymmetryMismatch { .. })
        ));
        let u = skew.unitary_matrix(0.4).unwrap();
        let direct = skew.exp(0.4);
        assert!(max_abs(&(&u - direct)) < 1e-10);
        let r = skew.rank();
        assert!(max_abs(&(u.adjoint() * &u - CMat::identity(r, r))) < 1e-12);
    }

    #[test]
    fn compatibility_examples() {
        // translation on ℝ as the single q-direction of abelian(1)
        let mu = kernels::MeasureSample::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let cosh = kernels::laplace_kernel_from_measure(&mu);
        let act = CompatibleAction::new(lie::abelian(1).unwrap(), vec![d1()]).unwrap();
        let pts = line(&[-0.9, -0.2, 0.1, 0.6, 1.0]);
        assert!(compatibility_check(&cosh, &act, &pts, 1e-10).unwrap().passed());
        let rbf = kernels::gaussian_rbf(1, 0.5);
        let rep = compatibility_check(&rbf, &act, &pts, 1e-10).unwrap();
        assert!(!rep.passed());

        // rotations of the plane as h with a rotation-invariant kernel
        let g = lie::euclidean_motion(2, 0, 2).unwrap();
        let act = CompatibleAction::affine(g, None).unwrap();
        let pts: Vec<Point> = (0..6)
            .map(|k| Point::from_column_slice(&[(k as f64).cos(), 0.5 * (k as f64).sin()]))
            .collect();
        let rep = compatibility_check(&kernels::gaussian_rbf(2, 0.8), &act, &pts, 1e-10).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn affine_action_is_homomorphism() {
        let pts: Vec<Point> = (0..4)
            .map(|k| Point::from_column_slice(&[0.3 * k as f64 - 0.2, 0.7 - 0.4 * k as f64]))
            .collect();
        for (p, q) in [(1, 1), (2, 0), (0, 2)] {
            let act = CompatibleAction::affine(lie::euclidean_motion(2, p, q).unwrap(), None).unwrap();
            assert!(act.homomorphism_defect(&pts).unwrap() < 1e-12);
            assert!(act.linearity_defect(&pts).unwrap() < 1e-12);
            // closed-form flow agrees with integration
            let num = flow_point_strict(act.basis_field(0), &pts[1], 0.6, 1e-3).unwrap();
            assert!((act.flow(0, 0.6, &pts[1], 1e-3).unwrap() - num).norm() < 1e-10);
        }
    }

    #[test]
    fn adjoint_flow_matches_exp_ad() {
        let act = CompatibleAction::affine(lie::euclidean_motion(2, 0, 2).unwrap(), None).unwrap();
        let pts: Vec<Point> = (0..10)
            .map(|k| Point::from_column_slice(&[0.9 * (k as f64).sin(), 0.8 * (1.3 * k as f64).cos()]))
            .collect();
        for k in 0..3 {
            let d = act.adjoint_flow_defect(k, 0.5, &pts, 1e-3).unwrap();
            assert!(d < 1e-6, "basis {k}: {d:e}");
        }
        assert!(act.adjoint_flow_defect(3, 0.5, &pts, 1e-3).is_err());
    }

    #[test]
    fn right_multiplication_is_homomorphism() {
        let act = CompatibleAction::right_multiplication(lie::matrix_involutive(2).unwrap(), None).unwrap();
        let pts = vec![
            Point::from_column_slice(&[0.1, 0.2, -0.3, 0.4]),
            Point::from_column_slice(&[0.5, -0.1, 0.0, 0.2]),
        ];
        assert!(act.homomorphism_defect(&pts).unwrap() < 1e-12);
        let num = flow_point_strict(act.basis_field(2), &pts[0], 0.3, 1e-3).unwrap();
        assert!((act.flow(2, 0.3, &pts[0], 1e-3).unwrap() - num).norm() < 1e-10);
    }

    #[test]
    fn flow_invariance_examples() {
        let rot = VectorField::rotation();
        let rbf = kernels::gaussian_rbf(2, 1.0);
        let pair = (
            Point::from_column_slice(&[1.0, 0.0]),
            Point::from_column_slice(&[0.2, -0.5]),
        );
        let r = flow_invariance_check(&rbf, &rot, Symmetry::Skew, &[pair], 1.0, 1e-3, 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
        let pair = (Point::from_element(1, 0.0), Point::from_element(1, 0.3));
        let gl = kernels::gaussian_laplace(1, 1.0);
        let r = flow_invariance_check(
            &gl,
            &d1(),
            Symmetry::Symmetric,
            core::slice::from_ref(&pair),
            0.5,
            1e-3,
            1e-8,
        )
        .unwrap();
        assert!(r.passed);
        let r = flow_invariance_check(
            &kernels::gaussian_rbf(1, 1.0),
            &d1(),
            Symmetry::Symmetric,
            &[pair],
            0.5,
            1e-3,
            1e-8,
        )
        .unwrap();
        assert!(!r.passed);
        assert!(r.max_drift > 0.1);
    }

    #[test]
    fn flow_invariance_reports_exit() {
        let q = VectorField::quadratic_1d();
        let k = kernels::gaussian_rbf(1, 1.0);
        let pair = (Point::from_element(1, 0.5), Point::from_element(1, 0.5));
        let r = flow_invariance_check(&k, &q, Symmetry::Skew, &[pair], 3.0, 1e-3, 1e-8).unwrap();
        assert!(r.t_reached < 1.0);
    }

    #[test]
    fn froelich_laplace_family() {
        let k = kernels::gaussian_laplace(1, 1.0);
        let pts = line(&chebyshev_points(21, -1.0, 1.0));
        let model = gram(&k, &pts).unwrap();
        let r = froelich_check(&k, &d1(), &model, 10, 0.1, 1e-3).unwrap();
        assert!(r.delta <= 1e-3, "delta {}", r.delta);
        let r0 = froelich_check(&k, &d1(), &model, 10, 0.0, 1e-3).unwrap();
        assert!(r0.delta <= 1e-12);
    }
}
