//! Scalar positive definite kernels, Gram matrices and finite-rank RKHS
//! models.
//!
//! Inner products are linear in the first slot. With `K_m = K(·, m)` the
//! reproducing property reads `⟨K_n, K_m⟩ = K(m, n)`, so the Gram matrix
//! `G_ij = K(m_i, m_j)` holds `⟨K_{m_j}, K_{m_i}⟩`.
//!
//! A [`GramModel`] keeps the eigenvectors above a relative cutoff and
//! whitens with `W = Λ_r^{-1/2} V_r†`. The vectors
//! `u_a = Σ_i (W†)_{ia} K_{m_i}` form an orthonormal basis of the retained
//! span; coordinates of `f` in that basis are `⟨f, u_a⟩`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{c, max_abs, op_norm_real, CMat, CVec, HermitianEigen};

/// Default relative rank cutoff.
pub const DEFAULT_RANK_CUTOFF: f64 = 1e-12;
/// Largest tolerated relative asymmetry of an assembled Gram matrix.
pub const ASYMMETRY_TOL: f64 = 1e-10;

type EvalFn = dyn Fn(&Point, &Point) -> Result<Complex64> + Send + Sync;
type GradFn = dyn Fn(&Point, &Point) -> Result<Vec<Complex64>> + Send + Sync;

/// A scalar kernel `K(x, y)` on points of a fixed dimension.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    dim: usize,
    eval: Arc<EvalFn>,
    grad1: Option<Arc<GradFn>>,
    h_fd: f64,
    hermitian: bool,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_grad", &self.grad1.is_some())
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl Kernel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&Point, &Point) -> Result<Complex64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            grad1: None,
            h_fd: crate::geometry::DEFAULT_FD_STEP,
            hermitian: true,
        }
    }

    /// Convenience constructor for real-valued kernels.
    pub fn real(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, dim, move |x, y| Ok(c(eval(x, y))))
    }

    pub fn with_grad1(
        mut self,
        grad: impl Fn(&Point, &Point) -> Result<Vec<Complex64>> + Send + Sync + 'static,
    ) -> Self {
        self.grad1 = Some(Arc::new(grad));
        self
    }

    pub fn with_real_grad1(self, grad: impl Fn(&Point, &Point) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.with_grad1(move |x, y| Ok(grad(x, y).into_iter().map(c).collect()))
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.h_fd = h;
        self
    }

    pub fn with_hermitian(mut self, hermitian: bool) -> Self {
        self.hermitian = hermitian;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad1.is_some()
    }

    fn check_dims(&self, x: &Point, y: &Point) -> Result<()> {
        for p in [x, y] {
            if p.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: p.len(),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<Complex64> {
        self.check_dims(x, y)?;
        (self.eval)(x, y)
    }

    /// Derivative in the first argument, analytic when available.
    pub fn grad1(&self, x: &Point, y: &Point) -> Result<Vec<Complex64>> {
        self.check_dims(x, y)?;
        match &self.grad1 {
            Some(g) => g(x, y),
            None => self.fd_grad1(x, y),
        }
    }

    /// Central-difference derivative in the first argument.
    pub fn fd_grad1(&self, x: &Point, y: &Point) -> Result<Vec<Complex64>> {
        self.check_dims(x, y)?;
        let h = self.h_fd;
        (0..self.dim)
            .map(|k| {
                let mut fwd = x.clone();
                fwd[k] += h;
                let mut bwd = x.clone();
                bwd[k] -= h;
                Ok(((self.eval)(&fwd, y)? - (self.eval)(&bwd, y)?) / (2.0 * h))
            })
            .collect()
    }

    /// `max |K(x, y) − conj(K(y, x))|` over all pairs.
    pub fn hermitian_defect(&self, points: &[Point]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (i, x) in points.iter().enumerate() {
            for y in &points[i..] {
                worst = worst.max((self.eval(x, y)? - self.eval(y, x)?.conj()).norm());
            }
        }
        Ok(worst)
    }
}

/// A discrete measure `Σ w_j δ_{α_j}` on the dual space.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSample {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MeasureSample {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "measure needs matching nonempty atoms and weights ({} vs {})",
                atoms.len(),
                weights.len()
            )));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(Error::InvalidArgument(String::from(
                "atoms must share a positive dimension",
            )));
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(String::from("atoms must be finite")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument(String::from(
                "weights must be positive and finite",
            )));
        }
        Ok(Self { atoms, weights })
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// Trapezoid discretization of the centered normal law `N(0, σ²)` on ℝ
    /// using `nodes` equispaced atoms on `[−half_width·σ, half_width·σ]`.
    pub fn gaussian(nodes: usize, half_width: f64, sigma: f64) -> Result<Self> {
        if nodes < 2 || !(half_width > 0.0) || !(sigma > 0.0) {
            return Err(Error::InvalidArgument(String::from(
                "gaussian measure needs nodes ≥ 2 and positive width and sigma",
            )));
        }
        let lo = -half_width * sigma;
        let h = 2.0 * half_width * sigma / (nodes - 1) as f64;
        let norm = 1.0 / (sigma * Float::sqrt(2.0 * core::f64::consts::PI));
        let mut atoms = Vec::with_capacity(nodes);
        let mut weights = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let a = lo + j as f64 * h;
            let end = if j == 0 || j + 1 == nodes { 0.5 } else { 1.0 };
            atoms.push(vec![a]);
            weights.push(end * h * norm * Float::exp(-0.5 * a * a / (sigma * sigma)));
        }
        Self::new(atoms, weights)
    }
}

fn laplace_terms<'a>(
    mu: &'a MeasureSample,
    x: &'a Point,
    y: &'a Point,
) -> impl Iterator<Item = (&'a Vec<f64>, f64)> + 'a {
    mu.atoms.iter().zip(&mu.weights).map(move |(a, w)| {
        let s: f64 = a
            .iter()
            .zip(x.iter().zip(y.iter()))
            .map(|(ak, (xk, yk))| ak * (xk + yk))
            .sum();
        (a, w * Float::exp(-0.5 * s))
    })
}

/// `K(x, y) = Σ_j w_j e^{−α_j·(x+y)/2}`.
pub fn laplace_kernel_from_measure(mu: &MeasureSample) -> Kernel {
    let d = mu.dim();
    let m1 = mu.clone();
    let m2 = mu.clone();
    Kernel::real("laplace", d, move |x, y| laplace_terms(&m1, x, y).map(|(_, v)| v).sum()).with_real_grad1(
        move |x, y| {
            let mut g = vec![0.0; x.len()];
            for (a, v) in laplace_terms(&m2, x, y) {
                for (gk, ak) in g.iter_mut().zip(a) {
                    *gk += -0.5 * ak * v;
                }
            }
            g
        },
    )
}

/// Numeric or list-valued kernel parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

/// Catalog entry for a builtin kernel.
#[derive(Debug, Clone, Copy)]
pub struct KernelInfo {
    pub name: &'static str,
    pub formula: &'static str,
    /// `(name, default)`; `None` marks a required or list-valued parameter.
    pub params: &'static [(&'static str, Option<f64>)],
}

pub const BUILTIN_KERNELS: &[KernelInfo] = &[
    KernelInfo {
        name: "fock",
        formula: "exp(scale <x,y>)",
        params: &[("dim", Some(1.0)), ("scale", Some(1.0))],
    },
    KernelInfo {
        name: "gaussian_rbf",
        formula: "exp(-|x-y|^2 / (2 length^2))",
        params: &[("dim", Some(1.0)), ("length", Some(1.0))],
    },
    KernelInfo {
        name: "ou",
        formula: "exp(-mass |x-y|)",
        params: &[("dim", Some(1.0)), ("mass", Some(1.0))],
    },
    KernelInfo {
        name: "ou_mixture",
        formula: "sum_k w_k exp(-m_k |x-y|), equal weights by default",
        params: &[("dim", Some(1.0)), ("masses", None), ("weights", None)],
    },
    KernelInfo {
        name: "constant",
        formula: "value",
        params: &[("dim", Some(1.0)), ("value", Some(1.0))],
    },
    KernelInfo {
        name: "cos_diff",
        formula: "cos(freq * sum_k (x_k - y_k))",
        params: &[("dim", Some(1.0)), ("freq", Some(1.0))],
    },
    KernelInfo {
        name: "determinant",
        formula: "det(I - X Y^T)^(-s) on n x n contractions, column-major",
        params: &[("n", Some(2.0)), ("s", Some(1.0))],
    },
    KernelInfo {
        name: "laplace",
        formula: "sum_j w_j exp(-a_j.(x+y)/2); explicit atoms/weights or N(0, sigma^2) quadrature",
        params: &[
            ("dim", Some(1.0)),
            ("atoms", None),
            ("weights", None),
            ("nodes", Some(41.0)),
            ("half_width", Some(8.0)),
            ("sigma", Some(1.0)),
        ],
    },
    KernelInfo {
        name: "gaussian_laplace",
        formula: "exp(sigma^2 |x+y|^2 / 8)",
        params: &[("dim", Some(1.0)), ("sigma", Some(1.0))],
    },
    KernelInfo {
        name: "mass_shell",
        formula: "sum_j w_j exp(-m cosh(t_j)(x1+y1)) cos(m sinh(t_j)(x2-y2)), chart x1 > 0",
        params: &[("mass", Some(1.0)), ("rapidity_max", Some(5.0)), ("nodes", Some(201.0))],
    },
    KernelInfo {
        name: "hardy",
        formula: "1 / (1 - x y) on (-1, 1)",
        params: &[],
    },
];

struct ParamReader<'a> {
    kernel: &'a str,
    params: &'a Params,
    allowed: &'static [(&'static str, Option<f64>)],
}

impl ParamReader<'_> {
    fn check_keys(&self) -> Result<()> {
        for key in self.params.keys() {
            if !self.allowed.iter().any(|(k, _)| k == key) {
                return Err(Error::InvalidArgument(format!(
                    "unknown parameter `{key}` for kernel `{}`",
                    self.kernel
                )));
            }
        }
        Ok(())
    }

    fn number(&self, key: &str) -> Result<f64> {
        let default = self.allowed.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d);
        match (self.params.get(key), default) {
            (Some(ParamValue::Number(v)), _) => Ok(*v),
            (Some(ParamValue::List(_)), _) => Err(Error::InvalidArgument(format!(
                "parameter `{key}` of `{}` must be a number",
                self.kernel
            ))),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::InvalidArgument(format!(
                "kernel `{}` needs parameter `{key}`",
                self.kernel
            ))),
        }
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.number(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "parameter `{key}` of `{}` must be positive, got {v}",
                self.kernel
            )));
        }
        Ok(v)
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.positive(key)?;
        if v.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "parameter `{key}` of `{}` must be an integer, got {v}",
                self.kernel
            )));
        }
        Ok(v as usize)
    }

    fn list(&self, key: &str) -> Result<Option<&[f64]>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::List(v)) => Ok(Some(v)),
            Some(ParamValue::Number(v)) => Ok(Some(core::slice::from_ref(v))),
        }
    }
}

/// Construct a builtin kernel from the catalog in [`BUILTIN_KERNELS`].
pub fn builtin_kernel(name: &str, params: &Params) -> Result<Kernel> {
    let info = BUILTIN_KERNELS
        .iter()
        .find(|k| k.name == name)
        .ok_or_else(|| Error::UnknownBuiltin(name.to_string()))?;
    let r = ParamReader {
        kernel: name,
        params,
        allowed: info.params,
    };
    r.check_keys()?;
    match name {
        "fock" => Ok(fock(r.count("dim")?, r.number("scale")?)),
        "gaussian_rbf" => Ok(gaussian_rbf(r.count("dim")?, r.positive("length")?)),
        "ou" => Ok(ou(r.count("dim")?, r.positive("mass")?)),
        "ou_mixture" => {
            let masses = r
                .list("masses")?
                .ok_or_else(|| Error::InvalidArgument(String::from("kernel `ou_mixture` needs parameter `masses`")))?;
            let weights = match r.list("weights")? {
                Some(w) => w.to_vec(),
                None => vec![1.0 / masses.len() as f64; masses.len()],
            };
            ou_mixture(r.count("dim")?, masses, &weights)
        }
        "constant" => Ok(constant(r.count("dim")?, r.number("value")?)),
        "cos_diff" => Ok(cos_diff(r.count("dim")?, r.number("freq")?)),
        "determinant" => Ok(determinant(r.count("n")?, r.positive("s")?)),
        "laplace" => {
            let dim = r.count("dim")?;
            let mu = match (r.list("atoms")?, r.list("weights")?) {
                (Some(atoms), Some(weights)) => {
                    if atoms.len() != weights.len() * dim {
                        return Err(Error::InvalidArgument(format!(
                            "laplace: {} atom coordinates do not match {} weights in dimension {dim}",
                            atoms.len(),
                            weights.len()
                        )));
                    }
                    MeasureSample::new(atoms.chunks(dim).map(<[f64]>::to_vec).collect(), weights.to_vec())?
                }
                (None, None) => {
                    if dim != 1 {
                        return Err(Error::InvalidArgument(String::from(
                            "laplace quadrature measure is one-dimensional",
                        )));
                    }
                    MeasureSample::gaussian(r.count("nodes")?, r.positive("half_width")?, r.positive("sigma")?)?
                }
                _ => {
                    return Err(Error::InvalidArgument(String::from(
                        "laplace needs both `atoms` and `weights` or neither",
                    )))
                }
            };
            Ok(laplace_kernel_from_measure(&mu))
        }
        "gaussian_laplace" => Ok(gaussian_laplace(r.count("dim")?, r.positive("sigma")?)),
        "mass_shell" => mass_shell(r.positive("mass")?, r.positive("rapidity_max")?, r.count("nodes")?),
        "hardy" => Ok(hardy()),
        _ => unreachable!("catalog entry without constructor"),
    }
}

fn dot(x: &Point, y: &Point) -> f64 {
    x.dot(y)
}

/// `e^{scale⟨x,y⟩}`.
pub fn fock(dim: usize, scale: f64) -> Kernel {
    Kernel::real("fock", dim, move |x, y| Float::exp(scale * dot(x, y))).with_real_grad1(move |x, y| {
        let k = Float::exp(scale * dot(x, y));
        y.iter().map(|v| scale * v * k).collect()
    })
}

/// `e^{−|x−y|²/(2ℓ²)}`.
pub fn gaussian_rbf(dim: usize, length: f64) -> Kernel {
    let inv = 1.0 / (length * length);
    Kernel::real("gaussian_rbf", dim, move |x, y| {
        Float::exp(-0.5 * inv * (x - y).norm_squared())
    })
    .with_real_grad1(move |x, y| {
        let diff = x - y;
        let k = Float::exp(-0.5 * inv * diff.norm_squared());
        diff.iter().map(|d| -inv * d * k).collect()
    })
}

/// `e^{−m|x−y|}`. The derivative is undefined on the diagonal.
pub fn ou(dim: usize, mass: f64) -> Kernel {
    Kernel::real("ou", dim, move |x, y| Float::exp(-mass * (x - y).norm())).with_grad1(move |x, y| {
        let diff = x - y;
        let r = diff.norm();
        if r == 0.0 {
            return Err(Error::Domain(String::from(
                "ou kernel is not differentiable on the diagonal",
            )));
        }
        let k = Float::exp(-mass * r);
        Ok(diff.iter().map(|d| c(-mass * d / r * k)).collect())
    })
}

/// `Σ_k w_k e^{−m_k|x−y|}` with positive masses and weights.
pub fn ou_mixture(dim: usize, masses: &[f64], weights: &[f64]) -> Result<Kernel> {
    if masses.is_empty() || masses.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "ou_mixture: {} masses and {} weights",
            masses.len(),
            weights.len()
        )));
    }
    if masses.iter().chain(weights).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(String::from(
            "ou_mixture masses and weights must be positive",
        )));
    }
    let terms: Arc<Vec<(f64, f64)>> = Arc::new(weights.iter().copied().zip(masses.iter().copied()).collect());
    let t2 = terms.clone();
    Ok(Kernel::real("ou_mixture", dim, move |x, y| {
        let r = (x - y).norm();
        terms.iter().map(|(w, m)| w * Float::exp(-m * r)).sum()
    })
    .with_grad1(move |x, y| {
        let diff = x - y;
        let r = diff.norm();
        if r == 0.0 {
            return Err(Error::Domain(String::from(
                "ou_mixture kernel is not differentiable on the diagonal",
            )));
        }
        let dk: f64 = t2.iter().map(|(w, m)| -w * m * Float::exp(-m * r)).sum();
        Ok(diff.iter().map(|d| c(dk * d / r)).collect())
    }))
}

pub fn constant(dim: usize, value: f64) -> Kernel {
    Kernel::real("constant", dim, move |_, _| value).with_real_grad1(move |x, _| vec![0.0; x.len()])
}

/// `cos(ω Σ_k (x_k − y_k))`, a rank-two kernel.
pub fn cos_diff(dim: usize, freq: f64) -> Kernel {
    let phase = move |x: &Point, y: &Point| freq * (x - y).sum();
    Kernel::real("cos_diff", dim, move |x, y| Float::cos(phase(x, y)))
        .with_real_grad1(move |x, y| vec![-freq * Float::sin(phase(x, y)); x.len()])
}

/// `e^{σ²|x+y|²/8}`, the Laplace transform of a centered Gaussian at the
/// midpoint.
pub fn gaussian_laplace(dim: usize, sigma: f64) -> Kernel {
    let s2 = sigma * sigma;
    Kernel::real("gaussian_laplace", dim, move |x, y| {
        Float::exp(s2 * (x + y).norm_squared() / 8.0)
    })
    .with_real_grad1(move |x, y| {
        let sum = x + y;
        let k = Float::exp(s2 * sum.norm_squared() / 8.0);
        sum.iter().map(|v| 0.25 * s2 * v * k).collect()
    })
}

/// `1/(1 − xy)` on `(−1, 1)`.
pub fn hardy() -> Kernel {
    let check = |x: &Point, y: &Point| -> Result<f64> {
        if !(x[0].abs() < 1.0 && y[0].abs() < 1.0) {
            return Err(Error::Domain(String::from("hardy kernel needs arguments in (−1, 1)")));
        }
        Ok(1.0 - x[0] * y[0])
    };
    Kernel::new("hardy", 1, move |x, y| Ok(c(1.0 / check(x, y)?))).with_grad1(move |x, y| {
        let d = check(x, y)?;
        Ok(vec![c(y[0] / (d * d))])
    })
}

fn unflatten(p: &Point, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, p.as_slice())
}

/// `det(I − X Yᵀ)^{−s}` on `n×n` matrices with spectral norm below one,
/// flattened column-major. Derivatives use finite differences.
pub fn determinant(n: usize, s: f64) -> Kernel {
    Kernel::new("determinant", n * n, move |x, y| {
        let (xm, ym) = (unflatten(x, n), unflatten(y, n));
        for m in [&xm, &ym] {
            let norm = op_norm_real(m);
            if !(norm < 1.0) {
                return Err(Error::Domain(format!(
                    "determinant kernel needs contractions, got spectral norm {norm}"
                )));
            }
        }
        let det = (DMatrix::identity(n, n) - xm * ym.transpose()).determinant();
        Ok(c(Float::powf(det, -s)))
    })
}

/// A kernel built from a trapezoid rule over rapidities `θ ∈ [−θ_max, θ_max]`:
/// `Σ_j w_j e^{−m cosh θ_j (x₁+y₁)} cos(m sinh θ_j (x₂−y₂))`, defined for
/// `x₁ + y₁ > 0`.
pub fn mass_shell(mass: f64, rapidity_max: f64, nodes: usize) -> Result<Kernel> {
    if nodes < 2 {
        return Err(Error::InvalidArgument(String::from(
            "mass_shell needs at least 2 nodes",
        )));
    }
    let h = 2.0 * rapidity_max / (nodes - 1) as f64;
    let table: Vec<(f64, f64, f64)> = (0..nodes)
        .map(|j| {
            let t = -rapidity_max + j as f64 * h;
            let w = if j == 0 || j + 1 == nodes { 0.5 * h } else { h };
            (w, mass * Float::cosh(t), mass * Float::sinh(t))
        })
        .collect();
    let table = Arc::new(table);
    let t2 = table.clone();
    let sum_time = |x: &Point, y: &Point| -> Result<f64> {
        let a = x[0] + y[0];
        if !(a > 0.0) {
            return Err(Error::Domain(String::from("mass_shell kernel needs x₁ + y₁ > 0")));
        }
        Ok(a)
    };
    Ok(Kernel::new("mass_shell", 2, move |x, y| {
        let a = sum_time(x, y)?;
        let b = x[1] - y[1];
        Ok(c(table
            .iter()
            .map(|(w, ch, sh)| w * Float::exp(-ch * a) * Float::cos(sh * b))
            .sum()))
    })
    .with_grad1(move |x, y| {
        let a = sum_time(x, y)?;
        let b = x[1] - y[1];
        let (mut g0, mut g1) = (0.0, 0.0);
        for (w, ch, sh) in t2.iter() {
            let e = w * Float::exp(-ch * a);
            g0 -= ch * e * Float::cos(sh * b);
            g1 -= sh * e * Float::sin(sh * b);
        }
        Ok(vec![c(g0), c(g1)])
    }))
}

/// Spectrum-carrying positivity report.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    pub passed: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Descending.
    pub spectrum: Vec<f64>,
}

/// Gram matrix of a kernel on sample points with its spectral whitening.
#[derive(Debug, Clone)]
pub struct GramModel {
    points: Vec<Point>,
    gram: CMat,
    eigen: HermitianEigen,
    eps_rank: f64,
    rank: usize,
    whitening: CMat,
    asymmetry: f64,
    duplicates: Vec<(usize, usize)>,
}

/// `G_ij = K(m_i, m_j)` with the default rank cutoff.
pub fn gram(kernel: &Kernel, points: &[Point]) -> Result<GramModel> {
    gram_with_cutoff(kernel, points, DEFAULT_RANK_CUTOFF)
}

pub fn gram_with_cutoff(kernel: &Kernel, points: &[Point], eps_rank: f64) -> Result<GramModel> {
    let n = points.len();
    let mut g = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = kernel.eval(&points[i], &points[j])?;
        }
    }
    GramModel::from_matrix(points.to_vec(), g, eps_rank)
}

impl GramModel {
    /// Wrap an already assembled Gram matrix. The matrix is symmetrized
    /// after checking that its relative asymmetry is below
    /// [`ASYMMETRY_TOL`].
    pub fn from_matrix(points: Vec<Point>, g: CMat, eps_rank: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(String::from("gram needs at least one point")));
        }
        if g.nrows() != points.len() || g.ncols() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: g.nrows(),
            });
        }
        if g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain(String::from("non-finite kernel value")));
        }
        let scale = max_abs(&g).max(f64::MIN_POSITIVE);
        let asymmetry = crate::linalg::hermitian_defect(&g, 1.0) / scale;
        if asymmetry > ASYMMETRY_TOL {
            return Err(Error::NotHermitian { asymmetry });
        }
        let g = (&g + g.adjoint()) * c(0.5);
        let eigen = HermitianEigen::new(&g);
        let mut duplicates = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    duplicates.push((i, j));
                }
            }
        }
        let mut model = Self {
            points,
            gram: g,
            eigen,
            eps_rank,
            rank: 0,
            whitening: CMat::zeros(0, 0),
            asymmetry,
            duplicates,
        };
        model.rebuild_whitening(eps_rank);
        Ok(model)
    }

    fn rebuild_whitening(&mut self, eps_rank: f64) {
        let lmax = self.eigen.values.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
        let rank = if lmax > 0.0 {
            self.eigen.values.iter().take_while(|&&l| l > eps_rank * lmax).count()
        } else {
            0
        };
        let n = self.points.len();
        let mut w = CMat::zeros(rank, n);
        for a in 0..rank {
            let s = 1.0 / Float::sqrt(self.eigen.values[a]);
            for i in 0..n {
                w[(a, i)] = self.eigen.vectors[(i, a)].conj() * s;
            }
        }
        self.eps_rank = eps_rank;
        self.rank = rank;
        self.whitening = w;
    }

    /// Recompute the whitening at a new cutoff.
    pub fn whiten(&self, eps_rank: f64) -> Result<Self> {
        let mut out = self.clone();
        out.rebuild_whitening(eps_rank);
        if out.rank == 0 {
            return Err(Error::EmptyModel);
        }
        Ok(out)
    }

    /// Fail with [`Error::EmptyModel`] when nothing survived the cutoff.
    pub fn require_nonempty(&self) -> Result<&Self> {
        if self.rank == 0 {
            return Err(Error::EmptyModel);
        }
        Ok(self)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigen.vectors
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_cutoff(&self) -> f64 {
        self.eps_rank
    }

    /// `W`, of shape `r×N`.
    pub fn whitening(&self) -> &CMat {
        &self.whitening
    }

    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Index pairs of repeated sample points.
    pub fn duplicates(&self) -> &[(usize, usize)] {
        &self.duplicates
    }

    /// `max |W G W† − I_r|`.
    pub fn whitening_defect(&self) -> f64 {
        let w = &self.whitening;
        max_abs(&(w * &self.gram * w.adjoint() - CMat::identity(self.rank, self.rank)))
    }

    /// `W B W†`: the matrix, in the orthonormal basis, of the operator whose
    /// form on the sample is `B_ij = ⟨A K_{m_j}, K_{m_i}⟩`.
    pub fn compress_form(&self, form: &CMat) -> Result<CMat> {
        if form.nrows() != self.len() || form.ncols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: form.nrows(),
            });
        }
        Ok(&self.whitening * form * self.whitening.adjoint())
    }

    pub fn psd_check(&self, tol: f64) -> PsdReport {
        let spectrum = self.eigen.values.clone();
        let max_eigenvalue = spectrum.first().copied().unwrap_or(0.0);
        let min_eigenvalue = spectrum.last().copied().unwrap_or(0.0);
        PsdReport {
            passed: min_eigenvalue >= -tol * max_eigenvalue.abs(),
            min_eigenvalue,
            max_eigenvalue,
            spectrum,
        }
    }

    /// `K̂_{m_i}`; its coordinates are `W G e_i`.
    pub fn embed_sample(&self, i: usize) -> RKHSVector {
        let coords = &self.whitening * self.gram.column(i);
        RKHSVector {
            coords,
            label: Some(format!("K[m{i}]")),
        }
    }

    /// Orthogonal projection of `K_m` onto the retained sample span. For a
    /// point outside the sample this is an approximation of `K_m`.
    pub fn embed_point(&self, kernel: &Kernel, m: &Point) -> Result<RKHSVector> {
        let g = CVec::from_iterator(
            self.len(),
            self.points
                .iter()
                .map(|mi| kernel.eval(mi, m))
                .collect::<Result<Vec<_>>>()?,
        );
        Ok(RKHSVector {
            coords: &self.whitening * g,
            label: Some(String::from("K[m]")),
        })
    }

    /// Coordinates of `Σ_i a_i K_{m_i}`.
    pub fn embed_combination(&self, coeffs: &CVec) -> Result<RKHSVector> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        Ok(RKHSVector {
            coords: &self.whitening * (&self.gram * coeffs),
            label: None,
        })
    }

    /// `f(m) = ⟨f, K̂_m⟩`, using the projected `K_m`.
    pub fn evaluate(&self, kernel: &Kernel, f: &RKHSVector, m: &Point) -> Result<Complex64> {
        Ok(f.inner(&self.embed_point(kernel, m)?))
    }
}

/// A vector in the orthonormal basis of a [`GramModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct RKHSVector {
    pub coords: CVec,
    pub label: Option<String>,
}

impl RKHSVector {
    /// `⟨self, other⟩ = Σ_a self_a conj(other_a)`.
    pub fn inner(&self, other: &RKHSVector) -> Complex64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// Involution on a matrix semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarMap {
    Identity,
    Transpose,
}

impl StarMap {
    pub fn apply(self, s: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            StarMap::Identity => s.clone(),
            StarMap::Transpose => s.transpose(),
        }
    }
}

type PhiFn = dyn Fn(&DMatrix<f64>) -> Option<Complex64> + Send + Sync;
type PhiGradFn = dyn Fn(&DMatrix<f64>) -> Option<DMatrix<f64>> + Send + Sync;

/// A finite sample of an involutive semigroup of square matrices under
/// matrix multiplication, with a function `φ` on the semigroup.
///
/// `φ` returns `None` off its domain; products that need such a value
/// raise [`Error::MissingProduct`].
#[derive(Clone)]
pub struct InvolutiveSemigroupSample {
    pub elements: Vec<DMatrix<f64>>,
    pub star: StarMap,
    phi: Arc<PhiFn>,
    phi_grad: Option<Arc<PhiGradFn>>,
    label: String,
}

impl fmt::Debug for InvolutiveSemigroupSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InvolutiveSemigroupSample")
            .field("label", &self.label)
            .field("elements", &self.elements.len())
            .field("star", &self.star)
            .finish()
    }
}

/// Result of the GNS construction on a finite sample.
#[derive(Debug, Clone)]
pub struct GnsModel {
    pub model: GramModel,
    /// `Π(s)` in the orthonormal basis, one per requested translation.
    pub representations: Vec<CMat>,
}

fn describe(m: &DMatrix<f64>) -> String {
    let entries: Vec<String> = m.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", entries.join(", "))
}

impl InvolutiveSemigroupSample {
    pub fn new(
        label: impl Into<String>,
        elements: Vec<DMatrix<f64>>,
        star: StarMap,
        phi: impl Fn(&DMatrix<f64>) -> Option<Complex64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = elements.first().map(|m| m.nrows()).unwrap_or(0);
        if n == 0 || elements.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::InvalidArgument(String::from(
                "semigroup sample needs nonempty square elements of one size",
            )));
        }
        Ok(Self {
            elements,
            star,
            phi: Arc::new(phi),
            phi_grad: None,
            label: label.into(),
        })
    }

    /// Attach `Γ(u)` with `dφ(u)[V] = Σ_kl Γ(u)_kl V_kl`.
    pub fn with_phi_gradient(
        mut self,
        grad: impl Fn(&DMatrix<f64>) -> Option<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.phi_grad = Some(Arc::new(grad));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn order(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn phi(&self, u: &DMatrix<f64>) -> Result<Complex64> {
        (self.phi)(u).ok_or_else(|| Error::MissingProduct(describe(u)))
    }

    /// `table[i][j] = Some(k)` when `s_i s_j` equals the sample element `s_k`.
    pub fn product_table(&self) -> Vec<Vec<Option<usize>>> {
        let k = self.elements.len();
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let p = &self.elements[i] * &self.elements[j];
                        self.elements.iter().position(|e| (e - &p).abs().max() <= 1e-14)
                    })
                    .collect()
            })
            .collect()
    }

    /// Worst violation of `(s*)* = s` and `(st)* = t* s*` on the sample.
    pub fn star_axiom_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for s in &self.elements {
            worst = worst.max((self.star.apply(&self.star.apply(s)) - s).abs().max());
            for t in &self.elements {
                let lhs = self.star.apply(&(s * t));
                let rhs = self.star.apply(t) * self.star.apply(s);
                worst = worst.max((lhs - rhs).abs().max());
            }
        }
        worst
    }

    /// Sample elements flattened column-major.
    pub fn points(&self) -> Vec<Point> {
        self.elements
            .iter()
            .map(|m| Point::from_column_slice(m.as_slice()))
            .collect()
    }

    /// `K_φ(s, t) = φ(s t*)` on flattened elements. Its first-argument
    /// derivative is analytic when a `φ`-gradient is attached.
    pub fn kernel(&self) -> Kernel {
        let n = self.order();
        let star = self.star;
        let phi = self.phi.clone();
        let eval = move |x: &Point, y: &Point| -> Result<Complex64> {
            let u = unflatten(x, n) * star.apply(&unflatten(y, n));
            phi(&u).ok_or_else(|| Error::MissingProduct(describe(&u)))
        };
        let mut k = Kernel::new(format!("gns[{}]", self.label), n * n, eval);
        if let Some(grad) = self.phi_grad.clone() {
            k = k.with_grad1(move |x, y| {
                let ys = star.apply(&unflatten(y, n));
                let u = unflatten(x, n) * &ys;
                let gamma = grad(&u).ok_or_else(|| Error::MissingProduct(describe(&u)))?;
                Ok((gamma * ys.transpose()).iter().map(|v| c(*v)).collect())
            });
        }
        k
    }

    /// Form `B_ij = φ(s_i s s_j*)` of right translation by `s`.
    pub fn translation_form(&self, s: &DMatrix<f64>) -> Result<CMat> {
        let k = self.elements.len();
        let mut b = CMat::zeros(k, k);
        for i in 0..k {
            let left = &self.elements[i] * s;
            for j in 0..k {
                b[(i, j)] = self.phi(&(&left * self.star.apply(&self.elements[j])))?;
            }
        }
        Ok(b)
    }
}

/// GNS construction: the Gram of `K_φ` on the sample and, for each `s` in
/// `translations`, the compression of `(π(s)f)(t) = f(ts)`.
///
/// `π(s) K_t = K_{t s*}`, so the form of `π(s)` on the sample is
/// `⟨π(s)K_{s_j}, K_{s_i}⟩ = φ(s_i s s_j*)`.
pub fn gns_from_pd_function(
    sample: &InvolutiveSemigroupSample,
    translations: &[DMatrix<f64>],
    eps_rank: f64,
) -> Result<GnsModel> {
    let n = sample.order();
    let k = sample.elements.len();
    let mut g = CMat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = sample.phi(&(&sample.elements[i] * sample.star.apply(&sample.elements[j])))?;
        }
    }
    let model = GramModel::from_matrix(sample.points(), g, eps_rank)?;
    let mut representations = Vec::with_capacity(translations.len());
    for s in translations {
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.nrows(),
            });
        }
        representations.push(model.compress_form(&sample.translation_form(s)?)?);
    }
    Ok(GnsModel { model, representations })
}

impl GnsModel {
    /// `max |Π(s*) − Π(s)†|` for the pair `(Π(s), Π(s*))`.
    pub fn star_defect(rep: &CMat, rep_of_star: &CMat) -> f64 {
        max_abs(&(rep_of_star - rep.adjoint()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(v: &[&[f64]]) -> Vec<Point> {
        v.iter().map(|p| Point::from_column_slice(p)).collect()
    }

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn fock_two_point_model() {
        let k = fock(2, 1.0);
        let m = gram(&k, &pts(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        let e = core::f64::consts::E;
        assert_abs_diff_eq!(m.gram()[(1, 1)].re, e, epsilon = 1e-15);
        // eigenvalues of [[1,1],[1,e]]
        let tr = 1.0 + e;
        let disc = Float::sqrt(tr * tr - 4.0 * (e - 1.0));
        assert_abs_diff_eq!(m.eigenvalues()[1], 0.5 * (tr - disc), epsilon = 1e-14);
        assert_abs_diff_eq!(m.eigenvalues()[1], 0.5408, epsilon = 1e-4);
        assert_eq!(m.rank(), 2);
        assert!(m.whitening_defect() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let ip = m.embed_sample(j).inner(&m.embed_sample(i));
                assert!((ip - m.gram()[(i, j)]).norm() < 1e-12);
            }
        }
        let f = m.embed_sample(1);
        let val = m.evaluate(&k, &f, &Point::from_column_slice(&[0.0, 0.0])).unwrap();
        assert!((val - c(1.0)).norm() < 1e-12);
        let again = m.embed_point(&k, &Point::from_column_slice(&[1.0, 0.0])).unwrap();
        assert!((again.coords - m.embed_sample(1).coords).norm() < 1e-12);
    }

    #[test]
    fn single_and_duplicate_points() {
        let k = fock(1, 1.0);
        let one = gram(&k, &pts(&[&[0.3]])).unwrap();
        assert_eq!(one.rank(), 1);
        let dup = gram(&k, &pts(&[&[0.3], &[0.3]])).unwrap();
        assert_eq!(dup.rank(), 1);
        assert_eq!(dup.duplicates(), &[(0, 1)]);
        assert!(dup.eigenvalues()[1].abs() <= 1e-14 * dup.eigenvalues()[0]);
    }

    #[test]
    fn negative_constant_fails_psd_and_whitening() {
        let k = constant(1, -1.0);
        let m = gram(&k, &pts(&[&[0.0], &[1.0], &[2.0]])).unwrap();
        let rep = m.psd_check(1e-10);
        assert!(!rep.passed);
        assert_abs_diff_eq!(rep.min_eigenvalue, -3.0, epsilon = 1e-12);
        assert_eq!(m.rank(), 0);
        assert_eq!(m.whiten(1e-12).unwrap_err(), Error::EmptyModel);
    }

    #[test]
    fn identity_gram_whitens_to_identity() {
        let k = Kernel::real("delta", 1, |x, y| if x == y { 1.0 } else { 0.0 });
        let m = gram(&k, &pts(&[&[0.0], &[1.0], &[2.0]])).unwrap();
        let w = m.whitening();
        assert!(max_abs(&(w.adjoint() * w - CMat::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn non_hermitian_kernel_rejected() {
        let k = Kernel::real("skewed", 1, |x, y| x[0] - 2.0 * y[0]);
        let err = gram(&k, &pts(&[&[0.0], &[1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn ou_is_psd_and_kinked() {
        let k = ou(1, 1.0);
        let p: Vec<Point> = (0..10).map(|i| Point::from_element(1, 0.37 * i as f64 - 1.0)).collect();
        assert!(gram(&k, &p).unwrap().psd_check(1e-10).passed);
        assert!(k.grad1(&p[0], &p[0]).is_err());
    }

    #[test]
    fn laplace_single_atom_is_rank_one() {
        let mu = MeasureSample::new(vec![vec![1.5]], vec![1.0]).unwrap();
        let k = laplace_kernel_from_measure(&mu);
        let (x, y) = (Point::from_element(1, 0.2), Point::from_element(1, -0.7));
        assert_abs_diff_eq!(
            k.eval(&x, &y).unwrap().re,
            Float::exp(-1.5 * (0.2 - 0.7) / 2.0),
            epsilon = 1e-15
        );
        let p: Vec<Point> = (0..5).map(|i| Point::from_element(1, i as f64 * 0.3)).collect();
        assert_eq!(gram(&k, &p).unwrap().rank(), 1);
        let zero = laplace_kernel_from_measure(&MeasureSample::new(vec![vec![0.0]], vec![2.0]).unwrap());
        assert_eq!(zero.eval(&x, &y).unwrap(), c(2.0));
    }

    #[test]
    fn laplace_two_atoms_is_cosh() {
        let mu = MeasureSample::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let k = laplace_kernel_from_measure(&mu);
        let (x, y) = (Point::from_element(1, 0.4), Point::from_element(1, 1.1));
        assert_abs_diff_eq!(k.eval(&x, &y).unwrap().re, Float::cosh(0.75), epsilon = 1e-15);
    }

    #[test]
    fn gaussian_measure_quadrature_matches_closed_form() {
        let k = laplace_kernel_from_measure(&MeasureSample::gaussian(41, 8.0, 1.0).unwrap());
        let closed = gaussian_laplace(1, 1.0);
        let mut worst = 0.0_f64;
        for i in 0..=20 {
            for j in 0..=20 {
                let x = Point::from_element(1, -1.0 + 0.1 * i as f64);
                let y = Point::from_element(1, -1.0 + 0.1 * j as f64);
                let exact = closed.eval(&x, &y).unwrap().re;
                worst = worst.max((k.eval(&x, &y).unwrap().re - exact).abs() / exact);
            }
        }
        assert!(worst < 1e-6, "relative error {worst}");
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let x = Point::from_column_slice(&[0.7, 0.4]);
        let y = Point::from_column_slice(&[0.5, -0.3]);
        for k in [
            fock(2, 0.8),
            gaussian_rbf(2, 0.6),
            ou(2, 1.3),
            cos_diff(2, 1.7),
            gaussian_laplace(2, 1.0),
            mass_shell(1.0, 5.0, 201).unwrap(),
            laplace_kernel_from_measure(
                &MeasureSample::new(vec![vec![0.3, -1.0], vec![2.0, 0.5]], vec![1.0, 0.25]).unwrap(),
            ),
        ] {
            let a = k.grad1(&x, &y).unwrap();
            let f = k.fd_grad1(&x, &y).unwrap();
            for (u, v) in a.iter().zip(&f) {
                assert!((u - v).norm() <= 1e-6 * u.norm().max(1e-3), "{}: {u} vs {v}", k.name());
            }
        }
        let h = hardy();
        let (x, y) = (Point::from_element(1, 0.3), Point::from_element(1, -0.6));
        assert!((h.grad1(&x, &y).unwrap()[0] - h.fd_grad1(&x, &y).unwrap()[0]).norm() < 1e-8);
    }

    #[test]
    fn determinant_kernel_domain() {
        let k = determinant(2, 1.5);
        let zero = Point::zeros(4);
        assert_eq!(k.eval(&zero, &zero).unwrap(), c(1.0));
        let big = Point::from_column_slice(&[1.0, 0.0, 0.0, 0.5]);
        assert!(matches!(k.eval(&big, &zero), Err(Error::Domain(_))));
    }

    #[test]
    fn mass_shell_chart() {
        let k = mass_shell(1.0, 5.0, 201).unwrap();
        let bad = Point::from_column_slice(&[-0.5, 0.0]);
        assert!(k.eval(&bad, &bad).is_err());
        let p: Vec<Point> = (0..3)
            .flat_map(|i| (0..3).map(move |j| Point::from_column_slice(&[0.5 + 0.5 * i as f64, -0.5 + 0.5 * j as f64])))
            .collect();
        assert!(gram(&k, &p).unwrap().psd_check(1e-10).passed);
    }

    #[test]
    fn builtin_catalog_roundtrip() {
        let mut params = Params::new();
        params.insert("dim".into(), ParamValue::Number(2.0));
        for info in BUILTIN_KERNELS {
            let takes_dim = info.params.iter().any(|(k, _)| *k == "dim") && info.name != "laplace";
            let mut p = if takes_dim { params.clone() } else { Params::new() };
            if info.name == "ou_mixture" {
                p.insert("masses".into(), ParamValue::List(vec![1.0, 2.0]));
            }
            let k = builtin_kernel(info.name, &p).unwrap();
            assert_eq!(k.name(), info.name);
        }
        assert!(matches!(
            builtin_kernel("matern", &Params::new()),
            Err(Error::UnknownBuiltin(_))
        ));
        let mut bad = Params::new();
        bad.insert("lenght".into(), ParamValue::Number(1.0));
        assert!(builtin_kernel("gaussian_rbf", &bad).is_err());
    }

    #[test]
    fn ou_mixture_matches_terms() {
        let k = ou_mixture(1, &[1.0, 2.0], &[0.5, 0.5]).unwrap();
        let (x, y) = (Point::from_element(1, 0.3), Point::from_element(1, -0.4));
        let want = 0.5 * (-0.7_f64).exp() + 0.5 * (-1.4_f64).exp();
        assert!((k.eval(&x, &y).unwrap().re - want).abs() < 1e-15);
        let fd = k.fd_grad1(&x, &y).unwrap()[0].re;
        assert!((k.grad1(&x, &y).unwrap()[0].re - fd).abs() < 1e-8);
        assert!(ou_mixture(1, &[1.0], &[]).is_err());
        assert!(ou_mixture(1, &[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn gns_multiplicative_character() {
        let elems: Vec<DMatrix<f64>> = [0.2, 0.5, 0.9, 1.0].iter().map(|v| scalar(*v)).collect();
        let s = InvolutiveSemigroupSample::new("(0,1]", elems, StarMap::Identity, |u| Some(c(u[(0, 0)]))).unwrap();
        let gns = gns_from_pd_function(&s, &[scalar(0.3), scalar(0.7)], DEFAULT_RANK_CUTOFF).unwrap();
        assert_eq!(gns.model.rank(), 1);
        assert!((gns.representations[0][(0, 0)] - c(0.3)).norm() < 1e-14);
        assert!((gns.representations[1][(0, 0)] - c(0.7)).norm() < 1e-14);
        assert_eq!(s.product_table()[3][1], Some(1));
        assert_eq!(s.product_table()[1][1], None);
    }

    #[test]
    fn gns_trivial_character() {
        let elems: Vec<DMatrix<f64>> = [0.2, 0.5].iter().map(|v| scalar(*v)).collect();
        let s = InvolutiveSemigroupSample::new("(0,1]", elems, StarMap::Identity, |_| Some(c(1.0))).unwrap();
        let gns = gns_from_pd_function(&s, &[scalar(0.4)], DEFAULT_RANK_CUTOFF).unwrap();
        assert_eq!(gns.model.rank(), 1);
        assert!((gns.representations[0][(0, 0)] - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn gns_hardy_star_property() {
        let elems: Vec<DMatrix<f64>> = (0..8).map(|i| scalar(-0.85 + 0.24 * i as f64)).collect();
        let phi = |u: &DMatrix<f64>| (u[(0, 0)].abs() < 1.0).then(|| c(1.0 / (1.0 - u[(0, 0)])));
        let s = InvolutiveSemigroupSample::new("hardy", elems, StarMap::Identity, phi).unwrap();
        assert_eq!(s.star_axiom_defect(), 0.0);
        let gns = gns_from_pd_function(&s, &[scalar(0.5), scalar(-0.3)], DEFAULT_RANK_CUTOFF).unwrap();
        assert!(gns.model.psd_check(1e-10).passed);
        for r in &gns.representations {
            assert!(GnsModel::star_defect(r, r) < 1e-9);
        }
    }

    #[test]
    fn gns_missing_product() {
        let elems = vec![scalar(0.9), scalar(0.95)];
        let phi = |u: &DMatrix<f64>| (u[(0, 0)] < 0.9).then(|| c(1.0 / (1.0 - u[(0, 0)])));
        let s = InvolutiveSemigroupSample::new("partial", elems, StarMap::Identity, phi).unwrap();
        assert!(matches!(
            gns_from_pd_function(&s, &[], DEFAULT_RANK_CUTOFF),
            Err(Error::MissingProduct(_))
        ));
    }

    #[test]
    fn semigroup_kernel_gradient() {
        let elems = vec![DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.1, 0.3])];
        let a = 1.7;
        let phi = move |u: &DMatrix<f64>| {
            let d = (DMatrix::identity(2, 2) - u).determinant();
            (d > 0.0).then(|| c(Float::powf(d, -a)))
        };
        let grad = move |u: &DMatrix<f64>| {
            let m = DMatrix::identity(2, 2) - u;
            let d = m.determinant();
            let inv_t = m.try_inverse()?.transpose();
            Some(inv_t * (a * Float::powf(d, -a)))
        };
        let s = InvolutiveSemigroupSample::new("det", elems, StarMap::Transpose, phi)
            .unwrap()
            .with_phi_gradient(grad);
        let k = s.kernel();
        let x = Point::from_column_slice(&[0.2, -0.1, 0.3, 0.1]);
        let y = Point::from_column_slice(&[-0.3, 0.2, 0.1, 0.4]);
        let an = k.grad1(&x, &y).unwrap();
        let fd = k.fd_grad1(&x, &y).unwrap();
        for (u, v) in an.iter().zip(&fd) {
            assert!((u - v).norm() < 1e-8);
        }
    }
}
