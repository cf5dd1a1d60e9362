//! Kernels smeared against grid test functions, reflection positivity and
//! Osterwalder–Schrader quotients.
//!
//! Test functions live on uniform 1-D or 2-D grids and vanish on a margin of
//! at least [`MIN_SUPPORT_MARGIN`] cells. Flows act on them only through
//! exact grid translations, so every translate is represented without
//! interpolation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_complex::Complex64;
use num_traits::Float;

use crate::geometry::{Point, VectorField};
use crate::kernels::{GramModel, Kernel, PsdReport, RKHSVector};
use crate::linalg::{c, hermitian_defect, max_abs, op_norm, CMat, CVec, HermitianEigen};
use crate::operators::{classify_form, compress_operator, spectral_apply, SpectralMode, Symmetry};
use crate::{Error, Result};

pub const MIN_SUPPORT_MARGIN: usize = 2;
/// Rank cutoff for twisted Gram matrices, relative to the largest eigenvalue.
pub const DEFAULT_OS_RANK_CUTOFF: f64 = 1e-10;
pub const DEFAULT_RP_TOL: f64 = 1e-10;

/// A uniform grid with trapezoid weights. Index `i = i₀ + n₀ i₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionGrid {
    origin: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
    margin: usize,
}

impl TestFunctionGrid {
    pub fn new(origin: &[f64], spacing: f64, counts: &[usize], margin: usize) -> Result<Self> {
        if origin.is_empty() || origin.len() > 2 || origin.len() != counts.len() {
            return Err(Error::InvalidArgument(format!(
                "grids are 1-D or 2-D, got origin of length {} and {} counts",
                origin.len(),
                counts.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        if margin < MIN_SUPPORT_MARGIN {
            return Err(Error::InvalidArgument(format!(
                "support margin must be at least {MIN_SUPPORT_MARGIN} cells, got {margin}"
            )));
        }
        if counts.iter().any(|&n| n <= 2 * margin) {
            return Err(Error::InvalidArgument(String::from(
                "grid has no interior beyond the margin",
            )));
        }
        Ok(Self {
            origin: origin.to_vec(),
            spacing,
            counts: counts.to_vec(),
            margin,
        })
    }

    /// `n` nodes on `[−L, L]`.
    pub fn symmetric_line(half_width: f64, n: usize, margin: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(String::from("a grid needs at least 2 nodes")));
        }
        Self::new(&[-half_width], 2.0 * half_width / (n - 1) as f64, &[n], margin)
    }

    /// `n×n` nodes on `[−L, L]²`.
    pub fn symmetric_square(half_width: f64, n: usize, margin: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(String::from("a grid needs at least 2 nodes")));
        }
        Self::new(
            &[-half_width, -half_width],
            2.0 * half_width / (n - 1) as f64,
            &[n, n],
            margin,
        )
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    fn unravel(&self, idx: usize) -> [usize; 2] {
        [idx % self.counts[0], idx / self.counts[0]]
    }

    fn ravel(&self, pos: [usize; 2]) -> usize {
        pos[0] + self.counts[0] * pos[1]
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing
    }

    pub fn point(&self, idx: usize) -> Point {
        let pos = self.unravel(idx);
        Point::from_iterator(self.dim(), (0..self.dim()).map(|a| self.coord(a, pos[a])))
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Tensor-product trapezoid weights.
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|idx| {
                let pos = self.unravel(idx);
                (0..self.dim())
                    .map(|a| {
                        let end = pos[a] == 0 || pos[a] + 1 == self.counts[a];
                        if end {
                            0.5 * self.spacing
                        } else {
                            self.spacing
                        }
                    })
                    .product()
            }),
        )
    }

    fn in_margin(&self, idx: usize) -> bool {
        let pos = self.unravel(idx);
        (0..self.dim()).any(|a| pos[a] < self.margin || pos[a] + self.margin >= self.counts[a])
    }

    /// Wrap sampled values, enforcing the zero margin.
    pub fn function(&self, values: DVector<f64>) -> Result<TestFunction> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(String::from("non-finite test function value")));
        }
        if values.iter().enumerate().any(|(i, v)| *v != 0.0 && self.in_margin(i)) {
            return Err(Error::SupportMargin);
        }
        Ok(TestFunction {
            grid: self.clone(),
            values,
        })
    }

    pub fn from_fn(&self, f: impl Fn(&Point) -> f64) -> Result<TestFunction> {
        let values = DVector::from_iterator(self.len(), (0..self.len()).map(|i| f(&self.point(i))));
        self.function(values)
    }

    /// `exp(−1/(1 − r²))` with `r = |x − center| / radius`, zero for `r ≥ 1`.
    pub fn bump(&self, center: &[f64], radius: f64) -> Result<TestFunction> {
        if center.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: center.len(),
            });
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bump radius must be positive, got {radius}"
            )));
        }
        self.from_fn(|p| {
            let r2 = p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>() / (radius * radius);
            if r2 < 1.0 {
                Float::exp(-1.0 / (1.0 - r2))
            } else {
                0.0
            }
        })
    }

    fn check(&self, f: &TestFunction) -> Result<()> {
        if f.grid != *self {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `x ↦ f(x − kΔ)`: the support moves by `cells[a]` along axis `a`.
    pub fn translate(&self, f: &TestFunction, cells: &[i64]) -> Result<TestFunction> {
        self.check(f)?;
        if cells.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: cells.len(),
            });
        }
        let mut out = DVector::zeros(self.len());
        for (idx, v) in f.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let pos = self.unravel(idx);
            let mut new = [0usize; 2];
            for a in 0..self.dim() {
                let p = pos[a] as i64 + cells[a];
                if p < 0 || p >= self.counts[a] as i64 {
                    return Err(Error::SupportMargin);
                }
                new[a] = p as usize;
            }
            out[self.ravel(new)] = *v;
        }
        self.function(out)
    }

    /// Whether the nodes along `axis` are symmetric about zero.
    pub fn is_symmetric(&self, axis: usize) -> bool {
        let mid = self.origin[axis] + 0.5 * (self.counts[axis] - 1) as f64 * self.spacing;
        mid.abs() <= 1e-12 * self.spacing.max(self.origin[axis].abs())
    }

    fn require_symmetric(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        if !self.is_symmetric(axis) {
            return Err(Error::InvalidArgument(format!(
                "grid is not symmetric along axis {axis}"
            )));
        }
        Ok(())
    }

    fn mirror(&self, idx: usize, axis: usize) -> usize {
        let mut pos = self.unravel(idx);
        pos[axis] = self.counts[axis] - 1 - pos[axis];
        self.ravel(pos)
    }

    /// `x ↦ f(θx)` with `θ` flipping the sign of coordinate `axis`.
    pub fn reflect(&self, f: &TestFunction, axis: usize) -> Result<TestFunction> {
        self.check(f)?;
        self.require_symmetric(axis)?;
        let values = DVector::from_iterator(self.len(), (0..self.len()).map(|i| f.values[self.mirror(i, axis)]));
        self.function(values)
    }

    /// Cyclic shift by `cells` along `axis`, acting on sampled values.
    pub fn shift_matrix(&self, axis: usize, cells: i64) -> Result<CMat> {
        if axis >= self.dim() {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        let n = self.len();
        let len = self.counts[axis] as i64;
        let mut m = CMat::zeros(n, n);
        for idx in 0..n {
            let mut pos = self.unravel(idx);
            pos[axis] = (pos[axis] as i64 + cells).rem_euclid(len) as usize;
            m[(self.ravel(pos), idx)] = c(1.0);
        }
        Ok(m)
    }

    /// Permutation matrix of the reflection along `axis`.
    pub fn reflection_matrix(&self, axis: usize) -> Result<CMat> {
        self.require_symmetric(axis)?;
        let n = self.len();
        let mut m = CMat::zeros(n, n);
        for idx in 0..n {
            m[(self.mirror(idx, axis), idx)] = c(1.0);
        }
        Ok(m)
    }

    /// Diagonal projector onto the nodes with positive coordinate `axis`.
    pub fn half_space_projector(&self, axis: usize) -> Result<CMat> {
        if axis >= self.dim() {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        let n = self.len();
        let mut m = CMat::zeros(n, n);
        for idx in 0..n {
            if self.coord(axis, self.unravel(idx)[axis]) > 0.0 {
                m[(idx, idx)] = c(1.0);
            }
        }
        Ok(m)
    }
}

/// Real samples of a compactly supported function on a [`TestFunctionGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    grid: TestFunctionGrid,
    values: DVector<f64>,
}

impl TestFunction {
    pub fn grid(&self) -> &TestFunctionGrid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Indices of nonzero samples.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0.0).collect()
    }

    /// `Σ_i w_i f_i`.
    pub fn integral(&self) -> f64 {
        self.grid.weights().dot(&self.values)
    }

    /// Centroid of `|f|`, or the origin for the zero function.
    pub fn centroid(&self) -> Point {
        let w = self.grid.weights();
        let mut total = 0.0;
        let mut acc = Point::zeros(self.grid.dim());
        for i in self.support() {
            let m = w[i] * self.values[i].abs();
            total += m;
            acc += self.grid.point(i) * m;
        }
        if total > 0.0 {
            acc / total
        } else {
            acc
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.amax()
    }
}

/// A kernel paired with test functions by quadrature:
/// `⟨f, g⟩ = Σ_ij w_i w_j f_i K(x_i, x_j) g_j`.
#[derive(Debug, Clone)]
pub struct SmearedKernel {
    kernel: Kernel,
}

impl SmearedKernel {
    pub fn new(kernel: Kernel) -> Self {
        Self { kernel }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn pairing(&self, f: &TestFunction, g: &TestFunction) -> Result<Complex64> {
        Ok(self.pairing_matrix(core::slice::from_ref(f), core::slice::from_ref(g))?[(0, 0)])
    }

    /// `P_ij = ⟨f_i, g_j⟩`. The kernel is evaluated once on the union of
    /// the supports.
    pub fn pairing_matrix(&self, fs: &[TestFunction], gs: &[TestFunction]) -> Result<CMat> {
        let grid = match fs.first().or(gs.first()) {
            Some(f) => f.grid.clone(),
            None => return Ok(CMat::zeros(fs.len(), gs.len())),
        };
        for f in fs.iter().chain(gs) {
            grid.check(f)?;
        }
        if grid.dim() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: grid.dim(),
            });
        }
        let support = |list: &[TestFunction]| {
            let mut s: Vec<usize> = list.iter().flat_map(TestFunction::support).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let (left, right) = (support(fs), support(gs));
        let w = grid.weights();
        let lp: Vec<Point> = left.iter().map(|&i| grid.point(i)).collect();
        let rp: Vec<Point> = right.iter().map(|&i| grid.point(i)).collect();
        let mut k = CMat::zeros(left.len(), right.len());
        for (a, x) in lp.iter().enumerate() {
            for (b, y) in rp.iter().enumerate() {
                k[(a, b)] = self.kernel.eval(x, y)?;
            }
        }
        let weighted = |list: &[TestFunction], idx: &[usize]| {
            CMat::from_fn(idx.len(), list.len(), |a, j| c(w[idx[a]] * list[j].values[idx[a]]))
        };
        let fl = weighted(fs, &left);
        let gr = weighted(gs, &right);
        Ok(fl.transpose() * k * gr)
    }

    /// `max |P − P†|` over the pairing matrix of `fs` with itself.
    pub fn hermitian_defect(&self, fs: &[TestFunction]) -> Result<f64> {
        Ok(hermitian_defect(&self.pairing_matrix(fs, fs)?, 1.0))
    }
}

/// Gram model of the smeared sections `K_{f_i}`, indexed by the centroids.
pub fn smeared_gram(d: &SmearedKernel, fns: &[TestFunction], eps_rank: f64) -> Result<GramModel> {
    let g = d.pairing_matrix(fns, fns)?;
    GramModel::from_matrix(fns.iter().map(TestFunction::centroid).collect(), g, eps_rank)
}

/// `L_X f = X·∇f` with fourth-order central differences.
pub fn distribution_lie_derivative(field: &VectorField, f: &TestFunction) -> Result<TestFunction> {
    let grid = &f.grid;
    if field.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: field.dim(),
        });
    }
    let at = |pos: [usize; 2], axis: usize, off: i64| -> f64 {
        let p = pos[axis] as i64 + off;
        if p < 0 || p >= grid.counts[axis] as i64 {
            return 0.0;
        }
        let mut q = pos;
        q[axis] = p as usize;
        f.values[grid.ravel(q)]
    };
    let h = grid.spacing;
    let mut out = DVector::zeros(grid.len());
    for idx in 0..grid.len() {
        let pos = grid.unravel(idx);
        let grad: Vec<f64> = (0..grid.dim())
            .map(|a| (-at(pos, a, 2) + 8.0 * at(pos, a, 1) - 8.0 * at(pos, a, -1) + at(pos, a, -2)) / (12.0 * h))
            .collect();
        if grad.iter().all(|g| *g == 0.0) {
            continue;
        }
        let x = field.eval(&grid.point(idx))?;
        out[idx] = x.iter().zip(&grad).map(|(xa, ga)| xa * ga).sum();
    }
    grid.function(out)
}

/// `B_ij = −⟨f_i, L_X f_j⟩`, the form of `L_X` on the smeared sections.
pub fn distribution_lie_derivative_form(d: &SmearedKernel, field: &VectorField, fns: &[TestFunction]) -> Result<CMat> {
    let derived = fns
        .iter()
        .map(|f| distribution_lie_derivative(field, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(-d.pairing_matrix(fns, &derived)?)
}

/// Cell offsets of the displacement `tX` for a constant field `X`.
pub fn grid_displacement(grid: &TestFunctionGrid, field: &VectorField, t: f64) -> Result<Vec<i64>> {
    if field.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: field.dim(),
        });
    }
    let x0 = field.eval(&grid.point(0))?;
    let scale = x0.amax().max(1.0);
    for idx in 1..grid.len() {
        if (field.eval(&grid.point(idx))? - &x0).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument(String::from(
                "test functions are moved only by constant fields",
            )));
        }
    }
    x0.iter()
        .map(|xa| {
            let cells = t * xa / grid.spacing;
            let rounded = Float::round(cells);
            if (cells - rounded).abs() > 1e-9 * rounded.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "displacement of {cells} cells is not grid-aligned"
                )));
            }
            Ok(rounded as i64)
        })
        .collect()
}

/// `f ∘ Φ_{−t}` for a constant field.
pub fn flow_test_function(field: &VectorField, f: &TestFunction, t: f64) -> Result<TestFunction> {
    let cells = grid_displacement(&f.grid, field, t)?;
    f.grid.translate(f, &cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFroelichReport {
    /// `‖e^{tÃ} K̂_f − K̂_{f∘Φ_{−t}}‖ / ‖K̂_{f∘Φ_{−t}}‖`.
    pub delta: f64,
    /// Relative norm of the part of `K_{f∘Φ_{−t}}` outside the basis span.
    pub projection_residual: f64,
    pub rank: usize,
    pub cells: Vec<i64>,
}

/// Compare `e^{tL_X}` on the span of `basis` with the exact translate of
/// `basis[index]`.
pub fn distribution_froelich_check(
    d: &SmearedKernel,
    field: &VectorField,
    basis: &[TestFunction],
    index: usize,
    t: f64,
    eps_rank: f64,
    tol_sym: f64,
) -> Result<DistributionFroelichReport> {
    let f = basis
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("basis index {index} out of range")))?;
    let cells = grid_displacement(&f.grid, field, t)?;
    let target = f.grid.translate(f, &cells)?;
    let model = smeared_gram(d, basis, eps_rank)?;
    model.require_nonempty()?;
    let form = distribution_lie_derivative_form(d, field, basis)?;
    if classify_form(&form, tol_sym).symmetry != Some(Symmetry::Symmetric) {
        return Err(Error::SymmetryMismatch { required: "symmetric" });
    }
    let op = compress_operator(&form, &model, Some(Symmetry::Symmetric), tol_sym)?;
    let evolved = spectral_apply(&op, SpectralMode::Semigroup(t), &model.embed_sample(index))?;
    let column = d.pairing_matrix(basis, core::slice::from_ref(&target))?;
    let exact = RKHSVector {
        coords: model.whitening() * CVec::from_iterator(basis.len(), column.iter().copied()),
        label: None,
    };
    let full = d.pairing(&target, &target)?.re;
    let captured = exact.norm();
    Ok(DistributionFroelichReport {
        delta: (&evolved.coords - &exact.coords).norm() / captured,
        projection_residual: Float::sqrt((full - captured * captured).max(0.0) / full),
        rank: model.rank(),
        cells,
    })
}

/// A coordinate reflection `θ` with positive half-space `{x_axis > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSetup {
    grid: TestFunctionGrid,
    axis: usize,
}

impl ReflectionSetup {
    pub fn new(grid: &TestFunctionGrid, axis: usize) -> Result<Self> {
        grid.require_symmetric(axis)?;
        Ok(Self {
            grid: grid.clone(),
            axis,
        })
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn grid(&self) -> &TestFunctionGrid {
        &self.grid
    }

    pub fn reflect(&self, f: &TestFunction) -> Result<TestFunction> {
        self.grid.reflect(f, self.axis)
    }

    pub fn in_positive_half(&self, p: &Point) -> bool {
        p[self.axis] > 0.0
    }

    /// Whether `f` is supported in the open positive half-space.
    pub fn is_positive(&self, f: &TestFunction) -> bool {
        f.grid == self.grid && f.support().iter().all(|&i| self.in_positive_half(&self.grid.point(i)))
    }

    fn require_positive(&self, fns: &[TestFunction]) -> Result<()> {
        if fns.is_empty() {
            return Err(Error::InvalidArgument(String::from("no test functions given")));
        }
        for (i, f) in fns.iter().enumerate() {
            self.grid.check(f)?;
            if !self.is_positive(f) {
                return Err(Error::InvalidArgument(format!(
                    "test function {i} is not supported in the positive half-space"
                )));
            }
        }
        Ok(())
    }

    /// `T_ij = ⟨θf_i, f_j⟩`.
    pub fn twisted_gram(&self, d: &SmearedKernel, fns: &[TestFunction]) -> Result<CMat> {
        self.require_positive(fns)?;
        let reflected = fns.iter().map(|f| self.reflect(f)).collect::<Result<Vec<_>>>()?;
        d.pairing_matrix(&reflected, fns)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPositivityReport {
    pub twisted: CMat,
    /// `max|T − T†| / max|T|`.
    pub hermitian_defect: f64,
    pub psd: PsdReport,
    pub passed: bool,
}

/// Hermiticity and positivity of the twisted Gram matrix.
pub fn reflection_positivity_check(
    d: &SmearedKernel,
    setup: &ReflectionSetup,
    fns_plus: &[TestFunction],
    tol: f64,
) -> Result<ReflectionPositivityReport> {
    let twisted = setup.twisted_gram(d, fns_plus)?;
    let scale = max_abs(&twisted);
    let defect = if scale == 0.0 {
        0.0
    } else {
        hermitian_defect(&twisted, 1.0) / scale
    };
    let sym = (&twisted + twisted.adjoint()) * c(0.5);
    let spectrum = HermitianEigen::new(&sym).values;
    let max_eigenvalue = spectrum.first().copied().unwrap_or(0.0);
    let min_eigenvalue = spectrum.last().copied().unwrap_or(0.0);
    let psd = PsdReport {
        passed: min_eigenvalue >= -tol * max_eigenvalue.abs(),
        min_eigenvalue,
        max_eigenvalue,
        spectrum,
    };
    Ok(ReflectionPositivityReport {
        passed: psd.passed && defect <= tol,
        hermitian_defect: defect,
        psd,
        twisted,
    })
}

/// The quotient of the positive-slice span by the null vectors of the
/// twisted form.
#[derive(Debug, Clone)]
pub struct OsSpace {
    setup: ReflectionSetup,
    functions: Vec<TestFunction>,
    model: GramModel,
}

impl OsSpace {
    pub fn rank(&self) -> usize {
        self.model.rank()
    }

    /// Descending eigenvalues of the twisted Gram matrix.
    pub fn spectrum(&self) -> &[f64] {
        self.model.eigenvalues()
    }

    /// `λ_{r̂+1} / λ_1`, or zero when nothing was discarded.
    pub fn discarded_ratio(&self) -> f64 {
        let s = self.spectrum();
        match s.get(self.rank()) {
            Some(l) => l.abs() / s[0],
            None => 0.0,
        }
    }

    /// Dimension of the discarded null directions.
    pub fn null_dim(&self) -> usize {
        self.functions.len() - self.rank()
    }

    pub fn model(&self) -> &GramModel {
        &self.model
    }

    pub fn setup(&self) -> &ReflectionSetup {
        &self.setup
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    /// Quotient coordinates of `[f_i]`.
    pub fn embed(&self, i: usize) -> RKHSVector {
        self.model.embed_sample(i)
    }
}

pub fn os_quotient(
    d: &SmearedKernel,
    setup: &ReflectionSetup,
    fns_plus: &[TestFunction],
    eps_rank: f64,
) -> Result<OsSpace> {
    let report = reflection_positivity_check(d, setup, fns_plus, DEFAULT_RP_TOL)?;
    if !report.psd.passed {
        return Err(Error::NotPositive {
            min_eigenvalue: report.psd.min_eigenvalue,
        });
    }
    if report.hermitian_defect > DEFAULT_RP_TOL {
        return Err(Error::NotHermitian {
            asymmetry: report.hermitian_defect,
        });
    }
    let points = fns_plus.iter().map(TestFunction::centroid).collect();
    let model = GramModel::from_matrix(points, report.twisted, eps_rank)?;
    if model.rank() == 0 {
        return Err(Error::DegenerateQuotient);
    }
    Ok(OsSpace {
        setup: setup.clone(),
        functions: fns_plus.to_vec(),
        model,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsSemigroup {
    pub t: f64,
    pub cells: i64,
    pub matrix: CMat,
    /// Operator norm in the quotient inner product.
    pub norm: f64,
    /// `max|Ŝ − Ŝ†|`.
    pub self_adjoint_defect: f64,
    /// Descending eigenvalues of the hermitian part.
    pub eigenvalues: Vec<f64>,
}

/// `Ŝ(t)`: translation by `t` away from the reflecting hyperplane, in the
/// quotient basis.
pub fn os_semigroup(space: &OsSpace, d: &SmearedKernel, t: f64) -> Result<OsSemigroup> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "semigroup time must be non-negative, got {t}"
        )));
    }
    let setup = &space.setup;
    let grid = &setup.grid;
    let mut direction = Point::zeros(grid.dim());
    direction[setup.axis] = 1.0;
    let cells = grid_displacement(grid, &VectorField::constant(direction), t)?;
    let moved = space
        .functions
        .iter()
        .map(|f| grid.translate(f, &cells))
        .collect::<Result<Vec<_>>>()?;
    let reflected = space
        .functions
        .iter()
        .map(|f| setup.reflect(f))
        .collect::<Result<Vec<_>>>()?;
    let form = d.pairing_matrix(&reflected, &moved)?;
    let matrix = space.model.compress_form(&form)?;
    let sym = (&matrix + matrix.adjoint()) * c(0.5);
    Ok(OsSemigroup {
        t,
        cells: cells[setup.axis],
        norm: op_norm(&matrix),
        self_adjoint_defect: hermitian_defect(&matrix, 1.0),
        eigenvalues: HermitianEigen::new(&sym).values,
        matrix,
    })
}

/// `‖Ŝ(s)Ŝ(t) − Ŝ(s+t)‖`.
pub fn os_semigroup_defect(space: &OsSpace, d: &SmearedKernel, s: f64, t: f64) -> Result<f64> {
    let a = os_semigroup(space, d, s)?;
    let b = os_semigroup(space, d, t)?;
    let ab = os_semigroup(space, d, s + t)?;
    Ok(op_norm(&(a.matrix * b.matrix - ab.matrix)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpAxiomsReport {
    /// `‖P_{τ(g)} − Θ P_g Θ‖_F` per pair.
    pub rp1: Vec<f64>,
    /// `‖(I − Π) P_h Π‖_F` per element.
    pub rp2: Vec<f64>,
    pub tol: f64,
}

impl RpAxiomsReport {
    pub fn max_rp1(&self) -> f64 {
        self.rp1.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_rp2(&self) -> f64 {
        self.rp2.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn passed(&self) -> bool {
        self.max_rp1() <= self.tol && self.max_rp2() <= self.tol
    }
}

/// Check the reflection axioms on matrices of a representation.
///
/// `pairs` holds `(P_g, P_{τ(g)})`; `h_elements` the matrices that must
/// preserve the range of `projector`. Defects are Frobenius norms, which
/// bound the operator norm from above. The domain condition on the
/// analytic continuation is outside numerical reach and is not checked.
pub fn rp_axioms_check(
    pairs: &[(CMat, CMat)],
    h_elements: &[CMat],
    theta: &CMat,
    projector: &CMat,
    tol: f64,
) -> Result<RpAxiomsReport> {
    let n = theta.nrows();
    let square = |m: &CMat| -> Result<()> {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
        Ok(())
    };
    square(theta)?;
    square(projector)?;
    let mut rp1 = Vec::with_capacity(pairs.len());
    for (g, tg) in pairs {
        square(g)?;
        square(tg)?;
        rp1.push((tg - theta * g * theta).norm());
    }
    let complement = CMat::identity(n, n) - projector;
    let mut rp2 = Vec::with_capacity(h_elements.len());
    for h in h_elements {
        square(h)?;
        rp2.push((&complement * h * projector).norm());
    }
    Ok(RpAxiomsReport { rp1, rp2, tol })
}

/// Translation representation of a grid: cyclic shifts along the reflected
/// axis paired with their inverses, and shifts along the other axis.
pub fn grid_translation_rp(grid: &TestFunctionGrid, axis: usize, shifts: &[i64], tol: f64) -> Result<RpAxiomsReport> {
    let theta = grid.reflection_matrix(axis)?;
    let projector = grid.half_space_projector(axis)?;
    let mut pairs = vec![(
        CMat::identity(grid.len(), grid.len()),
        CMat::identity(grid.len(), grid.len()),
    )];
    for &k in shifts {
        pairs.push((grid.shift_matrix(axis, k)?, grid.shift_matrix(axis, -k)?));
    }
    let mut h_elements = Vec::new();
    for other in (0..grid.dim()).filter(|&a| a != axis) {
        for &k in shifts {
            h_elements.push(grid.shift_matrix(other, k)?);
        }
    }
    rp_axioms_check(&pairs, &h_elements, &theta, &projector, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{self, DEFAULT_RANK_CUTOFF};
    use crate::linalg::fitted_order;
    use crate::operators::DEFAULT_TOL_SYM;

    fn line(n: usize) -> TestFunctionGrid {
        TestFunctionGrid::symmetric_line(4.0, n, 2).unwrap()
    }

    #[test]
    fn grid_basics() {
        let g = line(81);
        assert_eq!(g.len(), 81);
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        assert!(g.is_symmetric(0));
        let w = g.weights();
        assert!((w.sum() - 8.0).abs() < 1e-12);
        assert!(TestFunctionGrid::new(&[0.0], 0.1, &[10], 1).is_err());
        assert!(TestFunctionGrid::new(&[0.0], 0.1, &[4], 2).is_err());
        let sq = TestFunctionGrid::symmetric_square(1.0, 11, 2).unwrap();
        assert_eq!(sq.point(12).as_slice(), &[-0.8, -0.8]);
    }

    #[test]
    fn margin_is_enforced() {
        let g = line(81);
        assert_eq!(g.bump(&[3.95], 0.5).unwrap_err(), Error::SupportMargin);
        let f = g.bump(&[3.0], 0.5).unwrap();
        assert_eq!(g.translate(&f, &[6]).unwrap_err(), Error::SupportMargin);
        assert!(g.translate(&f, &[4]).is_ok());
        let other = line(41).bump(&[0.0], 0.5).unwrap();
        assert_eq!(g.translate(&other, &[1]).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = line(81);
        let f = g.bump(&[1.2], 0.7).unwrap();
        let back = g.reflect(&g.reflect(&f, 0).unwrap(), 0).unwrap();
        assert_eq!(back, f);
        let theta = g.reflection_matrix(0).unwrap();
        assert_eq!(&theta * &theta, CMat::identity(81, 81));
        let lopsided = TestFunctionGrid::new(&[0.0], 0.1, &[20], 2).unwrap();
        assert!(lopsided.reflection_matrix(0).is_err());
    }

    #[test]
    fn constant_kernel_pairing_is_squared_integral() {
        let g = line(81);
        let f = g.bump(&[0.3], 1.0).unwrap();
        let d = SmearedKernel::new(kernels::constant(1, 1.0));
        let p = d.pairing(&f, &f).unwrap();
        assert!((p.re - f.integral().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn ou_pairing_of_distant_bumps() {
        let g = TestFunctionGrid::symmetric_line(6.0, 481, 2).unwrap();
        let d = SmearedKernel::new(kernels::ou(1, 1.0));
        for dist in [4.0, 6.0] {
            let f = g.bump(&[-dist / 2.0], 0.25).unwrap();
            let h = g.bump(&[dist / 2.0], 0.25).unwrap();
            let p = d.pairing(&f, &h).unwrap().re;
            let want = (-dist).exp() * f.integral() * h.integral();
            assert!((p / want - 1.0).abs() < 0.1, "d = {dist}: {p} vs {want}");
        }
    }

    #[test]
    fn narrow_kernel_separates_far_bumps() {
        let g = line(161);
        let d = SmearedKernel::new(kernels::gaussian_rbf(1, 0.05));
        let f = g.bump(&[-2.0], 0.4).unwrap();
        let h = g.bump(&[2.0], 0.4).unwrap();
        let model = smeared_gram(&d, &[f, h], DEFAULT_RANK_CUTOFF).unwrap();
        assert!(model.gram()[(0, 1)].norm() <= 1e-12);
        assert!(d.hermitian_defect(model_fns(&g).as_slice()).unwrap() < 1e-12);
    }

    fn model_fns(g: &TestFunctionGrid) -> Vec<TestFunction> {
        [-1.0, 0.0, 0.7].iter().map(|c| g.bump(&[*c], 0.6).unwrap()).collect()
    }

    #[test]
    fn derivative_of_bump_integrates_to_zero() {
        let g = line(161);
        let f = g.bump(&[0.0], 1.0).unwrap();
        let dx = distribution_lie_derivative(&VectorField::translation(1, 0), &f).unwrap();
        assert!(dx.integral().abs() <= 1e-10);
        for i in 0..g.len() {
            assert!((dx.values()[i] + dx.values()[g.len() - 1 - i]).abs() < 1e-12);
        }
        let zero = distribution_lie_derivative(&VectorField::constant(Point::zeros(1)), &f).unwrap();
        assert!(zero.is_zero());
    }

    #[test]
    fn derivative_stencil_is_fourth_order() {
        let analytic = |x: f64| -2.0 * x * (-x * x).exp();
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for n in [81, 161, 321] {
            let g = TestFunctionGrid::symmetric_line(8.0, n, 2).unwrap();
            let f = g
                .from_fn(|p| {
                    let v = (-p[0] * p[0]).exp();
                    if p[0].abs() < 7.0 {
                        v
                    } else {
                        0.0
                    }
                })
                .unwrap();
            let dx = distribution_lie_derivative(&VectorField::translation(1, 0), &f).unwrap();
            let err = (0..g.len())
                .filter(|&i| g.point(i)[0].abs() < 6.0)
                .map(|i| (dx.values()[i] - analytic(g.point(i)[0])).abs())
                .fold(0.0, f64::max);
            hs.push(g.spacing());
            errs.push(err);
        }
        let order = fitted_order(&hs, &errs);
        assert!((order - 4.0).abs() < 0.3, "order {order}, errors {errs:?}");
    }

    #[test]
    fn derivative_reaching_margin_is_rejected() {
        let g = line(81);
        let vals = DVector::from_fn(81, |i, _| if i == 2 { 1.0 } else { 0.0 });
        let f = g.function(vals).unwrap();
        let err = distribution_lie_derivative(&VectorField::translation(1, 0), &f).unwrap_err();
        assert_eq!(err, Error::SupportMargin);
    }

    fn translates(g: &TestFunctionGrid, f: &TestFunction, count: usize, stride: i64) -> Vec<TestFunction> {
        let half = (count / 2) as i64;
        (0..count as i64)
            .map(|k| g.translate(f, &[(k - half) * stride]).unwrap())
            .collect()
    }

    #[test]
    fn froelich_on_rank_one_kernel() {
        let g = TestFunctionGrid::symmetric_line(2.0, 161, 2).unwrap();
        let k = Kernel::real("exp_sum", 1, |x, y| (-(x[0] + y[0])).exp());
        let d = SmearedKernel::new(k);
        let basis = translates(&g, &g.bump(&[0.0], 0.5).unwrap(), 3, 8);
        let x = VectorField::translation(1, 0);
        let zero = distribution_froelich_check(&d, &x, &basis, 1, 0.0, DEFAULT_RANK_CUTOFF, DEFAULT_TOL_SYM).unwrap();
        assert!(zero.delta <= 1e-12);
        let r = distribution_froelich_check(
            &d,
            &x,
            &basis,
            1,
            2.0 * g.spacing(),
            DEFAULT_RANK_CUTOFF,
            DEFAULT_TOL_SYM,
        )
        .unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.cells, vec![2]);
        assert!(r.delta <= 1e-8, "{r:?}");
    }

    #[test]
    fn froelich_requires_grid_aligned_time() {
        let g = line(81);
        let d = SmearedKernel::new(kernels::gaussian_laplace(1, 1.0));
        let basis = translates(&g, &g.bump(&[0.0], 0.5).unwrap(), 3, 2);
        let x = VectorField::translation(1, 0);
        let err = distribution_froelich_check(&d, &x, &basis, 1, 0.55 * g.spacing(), DEFAULT_RANK_CUTOFF, 1e-8);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        let rot = VectorField::rotation();
        let g2 = TestFunctionGrid::symmetric_square(1.0, 21, 2).unwrap();
        assert!(grid_displacement(&g2, &rot, 0.1).is_err());
    }

    fn cosh_half() -> Kernel {
        Kernel::real("cosh_half", 1, |x, y| ((x[0] + y[0]) / 2.0).cosh())
    }

    fn laplace_froelich(n: usize) -> DistributionFroelichReport {
        let g = TestFunctionGrid::symmetric_line(3.0, n, 2).unwrap();
        let cells_per_unit = (n - 1) as f64 / 6.0;
        let f = g.bump(&[0.0], 0.5).unwrap();
        let stride = (0.1 * cells_per_unit).round() as i64;
        let basis = translates(&g, &f, 15, stride);
        let d = SmearedKernel::new(cosh_half());
        let x = VectorField::translation(1, 0);
        distribution_froelich_check(&d, &x, &basis, 7, 4.0 * g.spacing(), DEFAULT_RANK_CUTOFF, 1e-8).unwrap()
    }

    #[test]
    fn froelich_on_laplace_kernel() {
        let coarse = laplace_froelich(121);
        assert!(coarse.delta <= 5e-3, "{coarse:?}");
        assert_eq!(coarse.rank, 2);
        let fine = laplace_froelich(241);
        let finer = laplace_froelich(481);
        assert!(
            fine.delta < coarse.delta && finer.delta < fine.delta,
            "{coarse:?} {fine:?} {finer:?}"
        );
    }

    #[test]
    fn ou_reflection_positive_rank_one() {
        let g = line(161);
        let setup = ReflectionSetup::new(&g, 0).unwrap();
        let d = SmearedKernel::new(kernels::ou(1, 1.0));
        let fns: Vec<TestFunction> = [0.5, 1.0].iter().map(|c| g.bump(&[*c], 0.15).unwrap()).collect();
        let report = reflection_positivity_check(&d, &setup, &fns, DEFAULT_RP_TOL).unwrap();
        assert!(report.passed, "{report:?}");
        let space = os_quotient(&d, &setup, &fns, DEFAULT_OS_RANK_CUTOFF).unwrap();
        assert_eq!(space.rank(), 1);
        assert!(space.discarded_ratio() <= 1e-10);
        let t = report.twisted;
        let ratio = t[(0, 1)].re / t[(1, 1)].re;
        let want = (-0.5_f64).exp() / (-1.0_f64).exp();
        assert!((ratio / want - 1.0).abs() < 1e-2, "{ratio} vs {want}");
        let s = os_semigroup(&space, &d, 0.3).unwrap();
        assert!((s.matrix[(0, 0)].re - (-0.3_f64).exp()).abs() < 1e-10);
        let id = os_semigroup(&space, &d, 0.0).unwrap();
        assert!((id.matrix[(0, 0)] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn cosine_kernel_is_not_reflection_positive() {
        let g = line(161);
        let setup = ReflectionSetup::new(&g, 0).unwrap();
        let d = SmearedKernel::new(kernels::cos_diff(1, 1.0));
        let fns: Vec<TestFunction> = [0.5, 2.0].iter().map(|c| g.bump(&[*c], 0.3).unwrap()).collect();
        let report = reflection_positivity_check(&d, &setup, &fns, DEFAULT_RP_TOL).unwrap();
        assert!(!report.passed);
        assert!(report.psd.min_eigenvalue < 0.0);
        assert!(matches!(
            os_quotient(&d, &setup, &fns, DEFAULT_OS_RANK_CUTOFF),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn single_function_positivity() {
        let g = line(161);
        let setup = ReflectionSetup::new(&g, 0).unwrap();
        let f = g.bump(&[1.0], 0.3).unwrap();
        let d = SmearedKernel::new(kernels::ou(1, 2.0));
        let r = reflection_positivity_check(&d, &setup, core::slice::from_ref(&f), DEFAULT_RP_TOL).unwrap();
        assert_eq!(r.passed, r.twisted[(0, 0)].re >= 0.0);
        let neg = g.bump(&[-1.0], 0.3).unwrap();
        assert!(reflection_positivity_check(&d, &setup, &[neg], DEFAULT_RP_TOL).is_err());
    }

    #[test]
    fn mixture_quotient_has_two_modes() {
        let g = line(161);
        let setup = ReflectionSetup::new(&g, 0).unwrap();
        let d = SmearedKernel::new(kernels::ou_mixture(1, &[1.0, 2.0], &[0.5, 0.5]).unwrap());
        let fns: Vec<TestFunction> = [0.5, 1.2, 2.0].iter().map(|c| g.bump(&[*c], 0.2).unwrap()).collect();
        let space = os_quotient(&d, &setup, &fns, DEFAULT_OS_RANK_CUTOFF).unwrap();
        assert_eq!(space.rank(), 2);
        assert_eq!(space.null_dim(), 1);
        for t in [0.2, 0.5] {
            let s = os_semigroup(&space, &d, t).unwrap();
            assert!((s.eigenvalues[0] - (-t).exp()).abs() < 1e-8);
            assert!((s.eigenvalues[1] - (-2.0 * t).exp()).abs() < 1e-8);
            assert!(s.norm <= 1.0 + 1e-10);
            assert!(s.self_adjoint_defect <= 1e-8);
        }
        assert!(os_semigroup_defect(&space, &d, 0.2, 0.3).unwrap() <= 1e-8);
    }

    #[test]
    fn adding_dependent_function_keeps_rank() {
        let g = line(161);
        let setup = ReflectionSetup::new(&g, 0).unwrap();
        let d = SmearedKernel::new(kernels::ou_mixture(1, &[1.0, 2.0], &[0.5, 0.5]).unwrap());
        let mut fns: Vec<TestFunction> = [0.6, 1.5].iter().map(|c| g.bump(&[*c], 0.2).unwrap()).collect();
        let before = os_quotient(&d, &setup, &fns, DEFAULT_OS_RANK_CUTOFF).unwrap().rank();
        let combo = g.function(fns[0].values() * 2.0 - fns[1].values()).unwrap();
        fns.push(combo);
        let after = os_quotient(&d, &setup, &fns, DEFAULT_OS_RANK_CUTOFF).unwrap().rank();
        assert_eq!(before, after);
    }

    #[test]
    fn grid_translations_satisfy_rp_axioms() {
        let g = TestFunctionGrid::symmetric_square(1.0, 11, 2).unwrap();
        let r = grid_translation_rp(&g, 0, &[1, 3], 1e-12).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.rp1[0], 0.0);
        assert_eq!(r.rp2.len(), 2);
        let line = line(21);
        let theta = line.reflection_matrix(0).unwrap();
        let shift = line.shift_matrix(0, 2).unwrap();
        let bad = rp_axioms_check(
            &[(shift.clone(), shift.clone())],
            &[shift],
            &theta,
            &line.half_space_projector(0).unwrap(),
            1e-12,
        )
        .unwrap();
        assert!(!bad.passed());
    }
}
