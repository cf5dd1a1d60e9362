//! Vector fields on finite-dimensional chart domains and their local flows.
//!
//! Flows are integrated with the classical fixed-step RK4 scheme. Every
//! stage point is checked against the chart; a failed check stops the
//! integration and the flow value at that `(t, p)` becomes an exit marker
//! instead of an extrapolation. The Jacobian of a flow map comes from the
//! variational equation `J' = DX(γ(t))·J`, integrated with the same steps.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};

/// A point in chart coordinates.
pub type Point = DVector<f64>;

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Default central-difference step for missing Jacobians.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// A field value larger than this is treated as blow-up.
pub const BLOWUP_NORM: f64 = 1e12;

type Membership = dyn Fn(&[f64]) -> bool + Send + Sync;

/// An open subset of `ℝ^d` given by a membership predicate.
#[derive(Clone)]
pub struct ChartDomain {
    dim: usize,
    contains: Arc<Membership>,
    bbox: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for ChartDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartDomain")
            .field("dim", &self.dim)
            .field("bbox", &self.bbox)
            .finish_non_exhaustive()
    }
}

impl ChartDomain {
    pub fn new(dim: usize, contains: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "chart dimension must be at least 1");
        Self {
            dim,
            contains: Arc::new(contains),
            bbox: None,
        }
    }

    /// All of `ℝ^d`.
    pub fn euclidean(dim: usize) -> Self {
        Self::new(dim, |_| true)
    }

    /// `{x : x[axis] > bound}`.
    pub fn above(dim: usize, axis: usize, bound: f64) -> Self {
        Self::new(dim, move |x| x[axis] > bound)
    }

    /// `{x : x[axis] < bound}`.
    pub fn below(dim: usize, axis: usize, bound: f64) -> Self {
        Self::new(dim, move |x| x[axis] < bound)
    }

    /// Attach a sampling box `[lo, hi]`.
    pub fn with_bbox(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), self.dim);
        assert_eq!(hi.len(), self.dim);
        self.bbox = Some((lo, hi));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bbox(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.bbox.as_ref()
    }

    /// Membership test; non-finite coordinates are never inside.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim && p.iter().all(|v| v.is_finite()) && (self.contains)(p)
    }
}

type ValueFn = dyn Fn(&Point) -> Result<Point> + Send + Sync;
type JacobianFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;

/// A smooth vector field on a chart domain.
#[derive(Clone)]
pub struct VectorField {
    domain: ChartDomain,
    value: Arc<ValueFn>,
    jacobian: Option<Arc<JacobianFn>>,
    h_fd: f64,
    label: String,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("label", &self.label)
            .field("dim", &self.domain.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(domain: ChartDomain, value: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        Self::fallible(domain, move |p| Ok(value(p)))
    }

    /// A field whose evaluation can fail (e.g. a pushforward whose backward
    /// flow leaves the chart).
    pub fn fallible(domain: ChartDomain, value: impl Fn(&Point) -> Result<Point> + Send + Sync + 'static) -> Self {
        Self {
            domain,
            value: Arc::new(value),
            jacobian: None,
            h_fd: DEFAULT_FD_STEP,
            label: String::from("field"),
        }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        assert!(h > 0.0);
        self.h_fd = h;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, p: &Point) -> Result<Point> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        (self.value)(p)
    }

    /// `DX(p)`, analytic when available, otherwise central differences.
    pub fn jacobian(&self, p: &Point) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.jacobian {
            return Ok(j(p));
        }
        self.fd_jacobian(p)
    }

    pub fn fd_jacobian(&self, p: &Point) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let h = self.h_fd;
        let mut jac = DMatrix::zeros(d, d);
        for k in 0..d {
            let mut fwd = p.clone();
            fwd[k] += h;
            let mut bwd = p.clone();
            bwd[k] -= h;
            let col = (self.eval(&fwd)? - self.eval(&bwd)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }

    /// `Σ c_k X_k` on the domain of the first field. Jacobians combine
    /// analytically when every summand has one.
    pub fn linear_combination(terms: &[(f64, VectorField)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument(String::from("empty linear combination")))?;
        let dim = first.1.dim();
        if let Some((_, bad)) = terms.iter().find(|(_, f)| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        let owned: Vec<(f64, VectorField)> = terms.to_vec();
        let all_analytic = owned.iter().all(|(_, f)| f.has_analytic_jacobian());
        let values = owned.clone();
        let mut field = VectorField::fallible(first.1.domain.clone(), move |p| {
            let mut acc = Point::zeros(p.len());
            for (coef, f) in &values {
                if *coef != 0.0 {
                    acc += f.eval(p)? * *coef;
                }
            }
            Ok(acc)
        });
        if all_analytic {
            field = field.with_jacobian(move |p| {
                let mut acc = DMatrix::zeros(p.len(), p.len());
                for (coef, f) in &owned {
                    if *coef != 0.0 {
                        acc += f.jacobian(p).expect("analytic jacobian") * *coef;
                    }
                }
                acc
            });
        }
        Ok(field.with_label("combination"))
    }

    /// `X(p) = v` on `ℝ^d`.
    pub fn constant(v: Point) -> Self {
        let d = v.len();
        let value = v.clone();
        VectorField::new(ChartDomain::euclidean(d), move |_| value.clone())
            .with_jacobian(move |_| DMatrix::zeros(d, d))
            .with_label("constant")
    }

    /// Unit field along one coordinate axis.
    pub fn translation(dim: usize, axis: usize) -> Self {
        let mut v = Point::zeros(dim);
        v[axis] = 1.0;
        Self::constant(v).with_label(format!("translation{axis}"))
    }

    /// `X(x, y) = (−y, x)`: counterclockwise rotation of the plane.
    pub fn rotation() -> Self {
        Self::linear(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).with_label("rotation")
    }

    /// `X(v) = D v`; its flow is `e^{tD}`.
    pub fn linear(d: DMatrix<f64>) -> Self {
        assert_eq!(d.nrows(), d.ncols());
        let n = d.nrows();
        let jac = d.clone();
        VectorField::new(ChartDomain::euclidean(n), move |p| &d * p)
            .with_jacobian(move |_| jac.clone())
            .with_label("linear")
    }

    /// `X(x, y) = (0, x)`, i.e. `x ∂_y`.
    pub fn shear() -> Self {
        Self::linear(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])).with_label("shear")
    }

    /// `X(x) = x²` on the chart `(−∞, 1)`; solutions blow up in finite time.
    pub fn quadratic_1d() -> Self {
        VectorField::new(ChartDomain::below(1, 0, 1.0), |p| Point::from_element(1, p[0] * p[0]))
            .with_jacobian(|p| DMatrix::from_element(1, 1, 2.0 * p[0]))
            .with_label("quadratic_1d")
    }

    /// `X(x, y) = (x² − y, x y)` on the plane, a nonlinear test field.
    pub fn quadratic_2d() -> Self {
        VectorField::new(ChartDomain::euclidean(2), |p| {
            Point::from_column_slice(&[p[0] * p[0] - p[1], p[0] * p[1]])
        })
        .with_jacobian(|p| DMatrix::from_row_slice(2, 2, &[2.0 * p[0], -1.0, p[1], p[0]]))
        .with_label("quadratic_2d")
    }

    /// `X(x, y) = (sin y, cos x)`, a bounded nonlinear test field.
    pub fn trigonometric_2d() -> Self {
        VectorField::new(ChartDomain::euclidean(2), |p| {
            Point::from_column_slice(&[p[1].sin(), p[0].cos()])
        })
        .with_jacobian(|p| DMatrix::from_row_slice(2, 2, &[0.0, p[1].cos(), -p[0].sin(), 0.0]))
        .with_label("trigonometric_2d")
    }
}

/// Why an integral curve stopped before its requested end time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    /// A stage point failed the chart membership test.
    LeftChart,
    /// Non-finite or blown-up field value, or a failed field evaluation.
    StepFailure,
}

/// A sampled integral curve `γ` with `γ(0) = start`.
///
/// `times` is monotone in the direction of integration (decreasing for a
/// negative end time).
#[derive(Debug, Clone)]
pub struct IntegralCurve {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub exit: Option<ExitReason>,
}

impl IntegralCurve {
    pub fn terminated_early(&self) -> bool {
        self.exit.is_some()
    }

    pub fn end_point(&self) -> &Point {
        self.points.last().expect("curve has its start point")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("curve has its start time")
    }
}

/// Step count and signed step size covering `[0, t_end]` with `|h| ≤ step`.
fn step_plan(t_end: f64, step: f64) -> (usize, f64) {
    if t_end == 0.0 {
        return (0, 0.0);
    }
    let n = Float::ceil(Float::abs(t_end) / step - 1e-9).max(1.0) as usize;
    (n, t_end / n as f64)
}

enum StepOutcome {
    Ok(DVector<f64>),
    Exit(ExitReason),
}

/// One RK4 step for a state whose first `d` entries are chart coordinates.
fn rk4_step<F>(domain: &ChartDomain, rhs: &F, z: &DVector<f64>, h: f64) -> StepOutcome
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let d = domain.dim();
    let stage = |z: &DVector<f64>| -> core::result::Result<DVector<f64>, ExitReason> {
        if !domain.contains(&z.as_slice()[..d]) {
            return Err(ExitReason::LeftChart);
        }
        let k = rhs(z).map_err(|_| ExitReason::StepFailure)?;
        let head = k.rows(0, d);
        if k.iter().any(|v| !v.is_finite()) || head.norm() > BLOWUP_NORM {
            return Err(ExitReason::StepFailure);
        }
        Ok(k)
    };
    let run = || -> core::result::Result<DVector<f64>, ExitReason> {
        let k1 = stage(z)?;
        let k2 = stage(&(z + &k1 * (0.5 * h)))?;
        let k3 = stage(&(z + &k2 * (0.5 * h)))?;
        let k4 = stage(&(z + &k3 * h))?;
        let next = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !domain.contains(&next.as_slice()[..d]) {
            return Err(ExitReason::LeftChart);
        }
        Ok(next)
    };
    match run() {
        Ok(z) => StepOutcome::Ok(z),
        Err(r) => StepOutcome::Exit(r),
    }
}

struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    exit: Option<ExitReason>,
}

fn integrate_state<F>(
    domain: &ChartDomain,
    rhs: F,
    z0: DVector<f64>,
    t_end: f64,
    step: f64,
    keep_all: bool,
) -> Trajectory
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let (n, h) = step_plan(t_end, step);
    let mut times = Vec::with_capacity(if keep_all { n + 1 } else { 2 });
    let mut states = Vec::with_capacity(times.capacity());
    times.push(0.0);
    states.push(z0.clone());
    let mut z = z0;
    for k in 0..n {
        match rk4_step(domain, &rhs, &z, h) {
            StepOutcome::Ok(next) => {
                z = next;
                let t = if k + 1 == n { t_end } else { (k + 1) as f64 * h };
                if keep_all || k + 1 == n {
                    times.push(t);
                    states.push(z.clone());
                }
            }
            StepOutcome::Exit(reason) => {
                if !keep_all && k > 0 {
                    times.push(k as f64 * h);
                    states.push(z.clone());
                }
                return Trajectory {
                    times,
                    states,
                    exit: Some(reason),
                };
            }
        }
    }
    Trajectory {
        times,
        states,
        exit: None,
    }
}

fn check_start(field: &VectorField, start: &Point, step: f64) -> Result<()> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if start.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: start.len(),
        });
    }
    if !field.domain.contains(start.as_slice()) {
        return Err(Error::Domain(String::from("start point is outside the chart")));
    }
    Ok(())
}

/// Integrate `γ' = X(γ)` from `start` up to `t_end` (either sign) with
/// fixed RK4 steps no longer than `step`.
pub fn integrate_curve(field: &VectorField, start: &Point, t_end: f64, step: f64) -> Result<IntegralCurve> {
    check_start(field, start, step)?;
    let traj = integrate_state(
        &field.domain,
        |z: &DVector<f64>| field.eval(z),
        start.clone(),
        t_end,
        step,
        true,
    );
    Ok(IntegralCurve {
        times: traj.times,
        points: traj.states,
        exit: traj.exit,
    })
}

/// Where and why a flow evaluation stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowExit {
    /// Last time reached before the failing step.
    pub t: f64,
    pub reason: ExitReason,
}

/// `Φ_t(p)`, or the exit marker when `t ∉ I_p`.
pub fn flow_point(field: &VectorField, p: &Point, t: f64, step: f64) -> Result<core::result::Result<Point, FlowExit>> {
    if !field.domain.contains(p.as_slice()) {
        return Ok(Err(FlowExit {
            t: 0.0,
            reason: ExitReason::LeftChart,
        }));
    }
    check_start(field, p, step)?;
    let traj = integrate_state(
        &field.domain,
        |z: &DVector<f64>| field.eval(z),
        p.clone(),
        t,
        step,
        false,
    );
    Ok(match traj.exit {
        None => Ok(traj.states.last().cloned().expect("trajectory end")),
        Some(reason) => Err(FlowExit {
            t: *traj.times.last().expect("trajectory start"),
            reason,
        }),
    })
}

/// Like [`flow_point`] but turns an exit into an error.
pub fn flow_point_strict(field: &VectorField, p: &Point, t: f64, step: f64) -> Result<Point> {
    flow_point(field, p, t, step)?.map_err(|e| Error::FlowExit {
        t: e.t,
        reason: e.reason,
    })
}

/// `(Φ_t(p), DΦ_t(p))` from the flow and its variational equation.
pub fn flow_with_jacobian(field: &VectorField, p: &Point, t: f64, step: f64) -> Result<(Point, DMatrix<f64>)> {
    check_start(field, p, step)?;
    let d = field.dim();
    let mut z0 = DVector::zeros(d + d * d);
    z0.rows_mut(0, d).copy_from(p);
    for k in 0..d {
        z0[d + k * d + k] = 1.0;
    }
    let rhs = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let x: Point = z.rows(0, d).into_owned();
        let jz = DMatrix::from_column_slice(d, d, &z.as_slice()[d..]);
        let v = field.eval(&x)?;
        let dj = field.jacobian(&x)? * jz;
        let mut out = DVector::zeros(d + d * d);
        out.rows_mut(0, d).copy_from(&v);
        out.rows_mut(d, d * d).copy_from_slice(dj.as_slice());
        Ok(out)
    };
    let traj = integrate_state(&field.domain, rhs, z0, t, step, false);
    if let Some(reason) = traj.exit {
        return Err(Error::FlowExit {
            t: *traj.times.last().expect("trajectory start"),
            reason,
        });
    }
    let z = traj.states.last().expect("trajectory end");
    Ok((
        z.rows(0, d).into_owned(),
        DMatrix::from_column_slice(d, d, &z.as_slice()[d..]),
    ))
}

/// The flow `Φ_t` sampled at a list of points, with the sampled complement
/// of the flow domain recorded in `domain_log`.
#[derive(Debug, Clone)]
pub struct LocalFlowResult {
    pub t: f64,
    pub starts: Vec<Point>,
    pub values: Vec<core::result::Result<Point, FlowExit>>,
    /// `(t, p)` pairs at which the flow was not defined.
    pub domain_log: Vec<(f64, Point)>,
}

impl LocalFlowResult {
    pub fn defined(&self) -> impl Iterator<Item = (&Point, &Point)> {
        self.starts
            .iter()
            .zip(&self.values)
            .filter_map(|(s, v)| v.as_ref().ok().map(|e| (s, e)))
    }
}

/// Apply `Φ_t` to every point; failures become per-point markers.
pub fn flow_map(field: &VectorField, t: f64, points: &[Point], step: f64) -> Result<LocalFlowResult> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let mut values = Vec::with_capacity(points.len());
    let mut domain_log = Vec::new();
    for p in points {
        if p.len() != field.dim() {
            return Err(Error::DimensionMismatch {
                expected: field.dim(),
                got: p.len(),
            });
        }
        let v = flow_point(field, p, t, step)?;
        if v.is_err() {
            domain_log.push((t, p.clone()));
        }
        values.push(v);
    }
    Ok(LocalFlowResult {
        t,
        starts: points.to_vec(),
        values,
        domain_log,
    })
}

/// `(Φ^X_t)_* Y`, evaluated lazily: at `p` it is `DΦ_t(q)·Y(q)` with
/// `q = Φ_{−t}(p)`.
pub fn pushforward(field_x: &VectorField, t: f64, field_y: &VectorField, step: f64) -> VectorField {
    let x = field_x.clone();
    let y = field_y.clone();
    VectorField::fallible(field_y.domain.clone(), move |p| {
        if t == 0.0 {
            return y.eval(p);
        }
        let q = flow_point_strict(&x, p, -t, step)?;
        let (_, jac) = flow_with_jacobian(&x, &q, t, step)?;
        Ok(jac * y.eval(&q)?)
    })
    .with_label(format!("pushforward({}, {t}, {})", field_x.label, field_y.label))
}

/// `[X, Y](p) = DY(p)·X(p) − DX(p)·Y(p)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    let xf = x.clone();
    let yf = y.clone();
    VectorField::fallible(x.domain.clone(), move |p| {
        let xv = xf.eval(p)?;
        let yv = yf.eval(p)?;
        Ok(yf.jacobian(p)? * xv - xf.jacobian(p)? * yv)
    })
    .with_label(format!("[{}, {}]", x.label, y.label))
}

/// Symmetric difference quotient of `t ↦ ((Φ^X_{−t})_* Y)(p)` at `t = 0`.
pub fn lie_derivative_via_flow(x: &VectorField, y: &VectorField, p: &Point, h: f64, step: f64) -> Result<Point> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let back = pushforward(x, -h, y, step).eval(p)?;
    let fwd = pushforward(x, h, y, step).eval(p)?;
    Ok((back - fwd) / (2.0 * h))
}
