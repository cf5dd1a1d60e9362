//! Wiring from configs to the numerical crate, one function per experiment.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kerflow_core::geometry::{
    flow_point_strict, lie_bracket, lie_derivative_via_flow, ChartDomain, Point, VectorField,
};
use kerflow_core::integrability::{luscher_mack_pipeline, scalar_generator, synthesize_cdual_rep, LuscherMackInput};
use kerflow_core::kernels::{builtin_kernel, gram_with_cutoff, InvolutiveSemigroupSample, Kernel, StarMap};
use kerflow_core::lie::{builtin_algebra, Parity, SymmetricLieAlgebra};
use kerflow_core::linalg::{chebyshev_points, fitted_order, op_norm_real};
use kerflow_core::operators::{
    compatibility_check, flow_invariance_check, froelich_with, lie_derivative_operator, CompatibleAction, Symmetry,
};
use kerflow_core::reflection::{
    grid_translation_rp, os_quotient, os_semigroup, os_semigroup_defect, reflection_positivity_check, ReflectionSetup,
    SmearedKernel, TestFunction, TestFunctionGrid,
};

use crate::config::{ActionKind, ConfigError, ExperimentConfig, ExperimentKind, FieldSpec, GridSpec, SemigroupSpec};
use crate::report::{Check, Curve, ErrorInfo, ExperimentReport, Status, Timings};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the config seed, e.g. from `KERFLOW_SEED`.
    pub seed_override: Option<u64>,
    /// Omit timings so repeated runs are byte-identical.
    pub stable_output: bool,
}

type CoreResult<T> = kerflow_core::Result<T>;

/// Builtins resolved from a config.
struct Resolved {
    kernel: Option<Kernel>,
    algebra: Option<SymmetricLieAlgebra>,
    action: Option<CompatibleAction>,
    fields: Vec<(String, VectorField)>,
}

fn config_err(path: &str, e: kerflow_core::Error) -> ConfigError {
    ConfigError::at(path, e.to_string())
}

fn domain(spec: &Option<crate::config::DomainSpec>, dim: usize) -> Result<Option<ChartDomain>, ConfigError> {
    let Some(d) = spec else { return Ok(None) };
    if d.axis >= dim {
        return Err(ConfigError::at(
            "$.action.domain.axis",
            format!("axis {} out of range", d.axis),
        ));
    }
    match (d.above, d.below) {
        (Some(a), None) => Ok(Some(ChartDomain::above(dim, d.axis, a))),
        (None, Some(b)) => Ok(Some(ChartDomain::below(dim, d.axis, b))),
        _ => Err(ConfigError::at(
            "$.action.domain",
            "give exactly one of `above` and `below`",
        )),
    }
}

fn builtin_field(spec: &FieldSpec, path: &str) -> Result<VectorField, ConfigError> {
    let name = spec.builtin.as_deref().unwrap_or_default();
    let unused = |key: &str, present: bool| -> Result<(), ConfigError> {
        if present {
            return Err(ConfigError::at(
                format!("{path}.{key}"),
                format!("not used by field `{name}`"),
            ));
        }
        Ok(())
    };
    match name {
        "translation" => {
            unused("vector", spec.vector.is_some())?;
            let dim = spec
                .dim
                .ok_or_else(|| ConfigError::at(format!("{path}.dim"), "translation needs `dim`"))?;
            let axis = spec
                .axis
                .ok_or_else(|| ConfigError::at(format!("{path}.axis"), "translation needs `axis`"))?;
            if dim == 0 || axis >= dim {
                return Err(ConfigError::at(
                    format!("{path}.axis"),
                    format!("axis {axis} out of range"),
                ));
            }
            Ok(VectorField::translation(dim, axis))
        }
        "constant" => {
            unused("dim", spec.dim.is_some())?;
            unused("axis", spec.axis.is_some())?;
            let v = spec
                .vector
                .as_ref()
                .ok_or_else(|| ConfigError::at(format!("{path}.vector"), "constant needs `vector`"))?;
            if v.is_empty() {
                return Err(ConfigError::at(format!("{path}.vector"), "vector is empty"));
            }
            Ok(VectorField::constant(Point::from_column_slice(v)))
        }
        other => {
            unused("dim", spec.dim.is_some())?;
            unused("axis", spec.axis.is_some())?;
            unused("vector", spec.vector.is_some())?;
            match other {
                "rotation" => Ok(VectorField::rotation()),
                "shear" => Ok(VectorField::shear()),
                "quadratic_1d" => Ok(VectorField::quadratic_1d()),
                "quadratic_2d" => Ok(VectorField::quadratic_2d()),
                "trigonometric_2d" => Ok(VectorField::trigonometric_2d()),
                _ => Err(ConfigError::at(
                    format!("{path}.builtin"),
                    format!("unknown builtin `{other}`"),
                )),
            }
        }
    }
}

fn field_label(spec: &FieldSpec, alg: Option<&SymmetricLieAlgebra>) -> String {
    if let Some(b) = &spec.builtin {
        return match (b.as_str(), spec.axis) {
            ("translation", Some(a)) => format!("translation{a}"),
            _ => b.clone(),
        };
    }
    let coeffs = spec.element.as_deref().unwrap_or_default();
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| {
            let label = alg.map_or_else(|| format!("e{k}"), |a| a.label(k).to_string());
            format!("{c}{label}")
        })
        .collect();
    if terms.is_empty() {
        String::from("0")
    } else {
        terms.join("+")
    }
}

fn resolve(config: &ExperimentConfig) -> Result<Resolved, ConfigError> {
    let kernel = match &config.kernel {
        Some(spec) => Some(builtin_kernel(&spec.name, &spec.core_params()).map_err(|e| match e {
            kerflow_core::Error::UnknownBuiltin(_) => config_err("$.kernel.name", e),
            _ => config_err("$.kernel.params", e),
        })?),
        None => None,
    };
    let algebra = match &config.algebra {
        Some(spec) => Some(builtin_algebra(&spec.name, &spec.params).map_err(|e| match e {
            kerflow_core::Error::UnknownBuiltin(_) => config_err("$.algebra.name", e),
            _ => config_err("$.algebra.params", e),
        })?),
        None => None,
    };
    let action = match (&config.action, &algebra) {
        (Some(spec), Some(alg)) => {
            let dim = match alg.realization() {
                Some(kerflow_core::lie::Realization::Affine(m)) => m.first().map_or(0, |a| a.nrows().saturating_sub(1)),
                Some(kerflow_core::lie::Realization::Linear(m)) => m.first().map_or(0, |a| a.nrows() * a.nrows()),
                None => 0,
            };
            let dom = domain(&spec.domain, dim)?;
            let built = match spec.kind {
                ActionKind::Affine => CompatibleAction::affine(alg.clone(), dom),
                ActionKind::RightMultiplication => CompatibleAction::right_multiplication(alg.clone(), dom),
            };
            Some(built.map_err(|e| config_err("$.action.kind", e))?)
        }
        (Some(_), None) => return Err(ConfigError::at("$.algebra", "an action needs an algebra")),
        _ => None,
    };
    let mut fields = Vec::new();
    let mut seen = BTreeMap::<String, usize>::new();
    for (i, spec) in config.fields.iter().flatten().enumerate() {
        let path = format!("$.fields[{i}]");
        let field = match (&spec.builtin, &spec.element, &action, &algebra) {
            (Some(_), _, _, _) => builtin_field(spec, &path)?,
            (None, Some(coeffs), Some(act), Some(alg)) => {
                let x = alg
                    .real_element(coeffs)
                    .map_err(|e| config_err(&format!("{path}.element"), e))?;
                act.field(&x).map_err(|e| config_err(&format!("{path}.element"), e))?
            }
            _ => return Err(ConfigError::at(path, "cannot resolve field")),
        };
        let mut label = field_label(spec, algebra.as_ref());
        let count = seen.entry(label.clone()).or_insert(0);
        *count += 1;
        if *count > 1 {
            label = format!("{label}#{count}");
        }
        fields.push((label, field));
    }
    if let (Some(k), Some(act)) = (&kernel, &action) {
        let dim = act.basis_field(0).dim();
        if k.dim() != dim {
            return Err(ConfigError::at(
                "$.kernel",
                format!("kernel dimension {} does not match the action dimension {dim}", k.dim()),
            ));
        }
    }
    if let Some((_, f)) = fields.first() {
        let dim = f.dim();
        if let Some((i, _)) = fields.iter().enumerate().find(|(_, (_, g))| g.dim() != dim) {
            return Err(ConfigError::at(
                format!("$.fields[{i}]"),
                "fields have different dimensions",
            ));
        }
        if let Some(k) = &kernel {
            if k.dim() != dim {
                return Err(ConfigError::at("$.kernel", "kernel and field dimensions differ"));
            }
        }
    }
    let s = &config.sample;
    match config.experiment {
        ExperimentKind::Froelich => {
            if kernel.as_ref().is_some_and(|k| k.dim() != 1) {
                return Err(ConfigError::at("$.kernel", "froelich runs on 1-D Chebyshev samples"));
            }
            if s.bounds.as_ref().is_some_and(|b| b.len() != 1) {
                return Err(ConfigError::at("$.sample.bounds", "froelich needs one interval"));
            }
        }
        ExperimentKind::Compatibility | ExperimentKind::CdualRep => {
            let dim = kernel.as_ref().map_or(0, Kernel::dim);
            let bounds = s.bounds.as_ref().map_or(0, Vec::len);
            if bounds != dim {
                return Err(ConfigError::at(
                    "$.sample.bounds",
                    format!("{bounds} ranges for a {dim}-dimensional kernel"),
                ));
            }
            if config.experiment == ExperimentKind::CdualRep {
                for (i, n) in s.ladder.iter().flatten().enumerate() {
                    if grid_side(*n, dim).is_none() {
                        return Err(ConfigError::at(
                            format!("$.sample.ladder[{i}]"),
                            format!("{n} is not a {dim}-th power"),
                        ));
                    }
                }
            }
        }
        _ => {}
    }
    if let Some(sg) = &config.semigroup {
        semigroup_sample(sg, config.seed)?;
    }
    Ok(Resolved {
        kernel,
        algebra,
        action,
        fields,
    })
}

/// Resolve every builtin a config names without running anything.
pub fn validate(config: &ExperimentConfig) -> Result<(), ConfigError> {
    resolve(config).map(|_| ())
}

fn grid_side(n: usize, dim: usize) -> Option<usize> {
    if dim == 0 {
        return None;
    }
    let side = (n as f64).powf(1.0 / dim as f64).round() as usize;
    (side >= 2 && side.pow(dim as u32) == n).then_some(side)
}

fn tensor_grid(bounds: &[[f64; 2]], side: usize) -> Vec<Point> {
    let dim = bounds.len();
    let total = side.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = Point::zeros(dim);
            for (a, [lo, hi]) in bounds.iter().enumerate() {
                let i = idx % side;
                idx /= side;
                p[a] = lo + (hi - lo) * i as f64 / (side - 1) as f64;
            }
            p
        })
        .collect()
}

fn random_points(rng: &mut ChaCha8Rng, bounds: &[[f64; 2]], count: usize) -> Vec<Point> {
    (0..count)
        .map(|_| Point::from_iterator(bounds.len(), bounds.iter().map(|[lo, hi]| rng.gen_range(*lo..*hi))))
        .collect()
}

fn default_bounds(config: &ExperimentConfig, dim: usize) -> Vec<[f64; 2]> {
    config.sample.bounds.clone().unwrap_or_else(|| vec![[-1.0, 1.0]; dim])
}

struct Outcome {
    checks: Vec<Check>,
    values: BTreeMap<String, f64>,
    curves: Vec<Curve>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            values: BTreeMap::new(),
            curves: Vec::new(),
        }
    }
}

/// Run a parsed config. Config problems are returned as errors; numerical
/// failures are recorded in the report.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentReport, ConfigError> {
    let started = Instant::now();
    let mut config = config.clone();
    if let Some(seed) = options.seed_override {
        config.seed = seed;
    }
    let resolved = resolve(&config)?;
    let mut out = Outcome::new();
    let result = match config.experiment {
        ExperimentKind::FlowLaws => flow_laws(&config, &resolved, &mut out),
        ExperimentKind::BracketOrder => bracket_order(&config, &resolved, &mut out),
        ExperimentKind::Compatibility => compatibility(&config, &resolved, &mut out),
        ExperimentKind::Froelich => froelich(&config, &resolved, &mut out),
        ExperimentKind::CdualRep => cdual_rep(&config, &resolved, &mut out),
        ExperimentKind::LuscherMack => luscher_mack(&config, &resolved, &mut out),
        ExperimentKind::OsReconstruct => os_reconstruct(&config, &resolved, &mut out),
        ExperimentKind::RpAxioms => rp_axioms(&config, &mut out),
    };
    let error = result.err().map(|e| ErrorInfo {
        kind: "numeric",
        message: e.to_string(),
    });
    let status = if error.is_some() {
        Status::Error
    } else if out.checks.iter().all(|c| c.passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(ExperimentReport {
        experiment: config.experiment.to_string(),
        status,
        config,
        checks: out.checks,
        values: out.values,
        curves: out.curves,
        error,
        timings: (!options.stable_output).then(|| Timings {
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        }),
    })
}

fn flow_laws(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let s = &config.sample;
    let (count, t_max, step) = (s.points.unwrap_or(10), s.t_max.unwrap_or(1.0), s.step.unwrap_or(1e-3));
    let tol = config.tolerances.flow;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (label, field) in &r.fields {
        let bounds = default_bounds(config, field.dim());
        let mut group = 0.0_f64;
        let mut inverse = 0.0_f64;
        for p in random_points(&mut rng, &bounds, count) {
            let a = rng.gen_range(-t_max..=t_max);
            let b = rng.gen_range(-t_max..=t_max);
            let ab = flow_point_strict(field, &flow_point_strict(field, &p, a, step)?, b, step)?;
            let direct = flow_point_strict(field, &p, a + b, step)?;
            group = group.max((ab - direct).norm());
            let back = flow_point_strict(field, &flow_point_strict(field, &p, b, step)?, -b, step)?;
            inverse = inverse.max((back - &p).norm());
        }
        out.checks
            .push(Check::at_most(format!("group_law[{label}]"), group, tol));
        out.checks
            .push(Check::at_most(format!("inverse[{label}]"), inverse, tol));
    }
    Ok(())
}

fn bracket_order(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let s = &config.sample;
    let hs = s.h_values.clone().unwrap_or_default();
    let step = s.step.unwrap_or(1e-3);
    let tol = &config.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for pair in r.fields.chunks(2) {
        let [(lx, x), (ly, y)] = pair else {
            unreachable!("validated to come in pairs")
        };
        let bounds = default_bounds(config, x.dim());
        let points = random_points(&mut rng, &bounds, s.points.unwrap_or(5));
        let exact = lie_bracket(x, y);
        let name = format!("[{lx},{ly}]");
        let mut curve = Curve::new(format!("bracket_error{name}"), &["h", "error"]);
        let mut errs = Vec::with_capacity(hs.len());
        for &h in &hs {
            let mut worst = 0.0_f64;
            for p in &points {
                let approx = lie_derivative_via_flow(x, y, p, h, step)?;
                worst = worst.max((approx - exact.eval(p)?).norm());
            }
            curve.push(vec![h, worst]);
            errs.push(worst);
        }
        let order = fitted_order(&hs, &errs);
        out.checks.push(Check {
            name: format!("order{name}"),
            value: Some(order),
            tolerance: Some(tol.order_band),
            passed: (order - tol.order_target).abs() <= tol.order_band,
            note: Some(format!("target {}", tol.order_target)),
        });
        out.curves.push(curve);
    }
    Ok(())
}

fn compatibility(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let (kernel, action) = (r.kernel.as_ref().unwrap(), r.action.as_ref().unwrap());
    let s = &config.sample;
    let bounds = s.bounds.clone().unwrap_or_default();
    let points = match s.chebyshev {
        Some(n) if bounds.len() == 1 => chebyshev_points(n, bounds[0][0], bounds[0][1])
            .into_iter()
            .map(|x| Point::from_element(1, x))
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_points(&mut rng, &bounds, s.points.unwrap_or(15))
        }
    };
    let tol = &config.tolerances;
    let report = compatibility_check(kernel, action, &points, tol.compatibility)?;
    for e in &report.elements {
        out.checks.push(
            Check::at_most(
                format!("compatibility[{}]", e.label),
                e.defect / e.scale.max(1.0),
                tol.compatibility,
            )
            .with_note(format!("{} direction", if e.parity == Parity::H { "h" } else { "q" })),
        );
    }
    let t = s.t.unwrap_or(0.5);
    let probe: Vec<Point> = points.iter().take(10).cloned().collect();
    for k in 0..action.algebra.dim() {
        let defect = action.adjoint_flow_defect(k, t, &probe, s.step.unwrap_or(1e-3))?;
        out.checks.push(Check::at_most(
            format!("adjoint_flow[{}]", action.algebra.label(k)),
            defect,
            tol.adjoint,
        ));
    }
    let pairs: Vec<(Point, Point)> = points
        .chunks_exact(2)
        .take(5)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let (t_max, step) = (s.t_max.unwrap_or(0.5), s.step.unwrap_or(1e-3));
    for k in 0..action.algebra.dim() {
        let label = action.algebra.label(k).to_string();
        let sym = Symmetry::expected_for(action.algebra.parity(k));
        let inv = flow_invariance_check(kernel, action.basis_field(k), sym, &pairs, t_max, step, tol.invariance)?;
        let mut check = Check::at_most(format!("invariance[{label}]"), inv.max_drift, tol.invariance);
        if inv.t_reached < t_max {
            check = check.with_note(format!("flows left the chart at t = {}", inv.t_reached));
        }
        out.checks.push(check);
    }
    Ok(())
}

fn froelich(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let kernel = r.kernel.as_ref().unwrap();
    let (label, field) = &r.fields[0];
    let s = &config.sample;
    let [lo, hi] = s.bounds.as_ref().unwrap()[0];
    let target = s.target.as_ref().unwrap()[0];
    let (t, step, cutoff) = (s.t.unwrap(), s.step.unwrap(), s.rank_cutoff.unwrap());
    let tol = config.tolerances.froelich;
    let mut curve = Curve::new("froelich_delta", &["n", "rank", "projection_residual", "delta"]);
    let mut spectrum = Curve::new("gram_spectrum", &["n", "index", "eigenvalue"]);
    for &n in s.ladder.as_ref().unwrap() {
        let points: Vec<Point> = chebyshev_points(n, lo, hi)
            .into_iter()
            .map(|x| Point::from_element(1, x))
            .collect();
        let m = (0..n)
            .min_by(|&a, &b| (points[a][0] - target).abs().total_cmp(&(points[b][0] - target).abs()))
            .unwrap();
        let model = gram_with_cutoff(kernel, &points, cutoff)?;
        push_spectrum(&mut spectrum, Some(n), &model.psd_check(config.tolerances.psd).spectrum);
        let op = lie_derivative_operator(kernel, field, &model, config.tolerances.symmetry)?;
        if op.symmetry != Some(Symmetry::Symmetric) {
            return Err(kerflow_core::Error::SymmetryMismatch { required: "symmetric" });
        }
        let rep = froelich_with(&op, kernel, field, &model, m, t, step)?;
        out.values.insert(format!("start[n={n}]"), points[m][0]);
        curve.push(vec![n as f64, model.rank() as f64, rep.projection_residual, rep.delta]);
        out.checks.push(
            Check::at_most(format!("delta[n={n}]"), rep.delta, tol).with_note(format!(
                "{label}, t = {t}, projection residual {:e}",
                rep.projection_residual
            )),
        );
    }
    push_trend(out, "delta_decreasing", &curve.values(), config);
    out.curves.push(curve);
    out.curves.push(spectrum);
    Ok(())
}

fn push_spectrum(curve: &mut Curve, n: Option<usize>, eigenvalues: &[f64]) {
    for (i, l) in eigenvalues.iter().enumerate() {
        let mut row: Vec<f64> = n.map(|n| n as f64).into_iter().collect();
        row.extend([i as f64, *l]);
        curve.push(row);
    }
}

/// Strict decrease along a refinement curve; the value is the largest
/// ratio of consecutive entries.
fn push_trend(out: &mut Outcome, name: &str, values: &[f64], config: &ExperimentConfig) {
    let wanted = config.expect.decreasing.unwrap_or(values.len() > 1);
    if !wanted {
        return;
    }
    let worst = values.windows(2).map(|w| w[1] / w[0]).fold(0.0_f64, f64::max);
    let passed = values.len() > 1 && values.windows(2).all(|w| w[1] < w[0]);
    out.checks
        .push(Check::flag(name, Some(worst), passed).with_note("largest ratio of consecutive values"));
}

fn cdual_rep(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let (kernel, action) = (r.kernel.as_ref().unwrap(), r.action.as_ref().unwrap());
    let s = &config.sample;
    let tol = &config.tolerances;
    let bounds = s.bounds.clone().unwrap();
    let probe_at = match &s.target {
        Some(t) => Point::from_column_slice(t),
        None => Point::from_iterator(bounds.len(), bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi))),
    };
    let (sv, tv, cutoff) = (s.s.unwrap(), s.t.unwrap(), s.rank_cutoff.unwrap());
    let mut conj: BTreeMap<(usize, usize), Curve> = BTreeMap::new();
    let mut comm = Curve::new("commutation", &["n", "rank", "max_defect"]);
    let mut spectrum = Curve::new("gram_spectrum", &["n", "index", "eigenvalue"]);
    for &n in s.ladder.as_ref().unwrap() {
        let side = grid_side(n, bounds.len()).expect("validated ladder");
        let model = gram_with_cutoff(kernel, &tensor_grid(&bounds, side), cutoff)?;
        push_spectrum(&mut spectrum, Some(n), &model.psd_check(tol.psd).spectrum);
        let table = synthesize_cdual_rep(kernel, action, &model, tol.symmetry)?;
        let labels = table.labels().to_vec();
        for (label, d) in labels.iter().zip(table.skew_defects()) {
            out.checks
                .push(Check::at_most(format!("skew[{label}][n={n}]"), d, tol.skew));
        }
        for (label, d) in labels.iter().zip(table.unitarity_defects(tv)) {
            out.checks
                .push(Check::at_most(format!("unitary[{label}][n={n}]"), d, tol.unitary));
        }
        comm.push(vec![n as f64, model.rank() as f64, table.commutation_defect().max]);
        let probe = model.embed_point(kernel, &probe_at)?;
        let dual = &table.dual;
        for x in dual.h_indices() {
            for y in dual.q_indices() {
                let on_probe = table.conjugation_on(x, y, sv, &probe)?;
                let norm = table.conjugation_check(x, y, sv)?;
                conj.entry((x, y))
                    .or_insert_with(|| {
                        Curve::new(
                            format!("conjugation[{}->{}]", labels[x], labels[y]),
                            &["n", "operator_norm", "on_probe"],
                        )
                    })
                    .push(vec![n as f64, norm, on_probe]);
            }
        }
    }
    for curve in conj.into_values() {
        let name = curve.name.replacen("conjugation", "conjugation_decreasing", 1);
        push_trend(out, &name, &curve.values(), config);
        out.curves.push(curve);
    }
    out.curves.push(comm);
    out.curves.push(spectrum);
    Ok(())
}

struct SemigroupSetup {
    sample: InvolutiveSemigroupSample,
    domain: ChartDomain,
    translations: Vec<DMatrix<f64>>,
}

fn semigroup_sample(spec: &SemigroupSpec, seed: u64) -> Result<SemigroupSetup, ConfigError> {
    let allowed: &[&str] = match spec.name.as_str() {
        "scalar_power" => &["a"],
        "contraction_determinant" => &["n", "s", "count", "max_norm"],
        other => {
            return Err(ConfigError::at(
                "$.semigroup.name",
                format!("unknown builtin `{other}`"),
            ))
        }
    };
    if let Some(key) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ConfigError::at(
            format!("$.semigroup.params.{key}"),
            "unknown parameter",
        ));
    }
    let param = |k: &str, d: f64| spec.params.get(k).copied().unwrap_or(d);
    let scalar = |v: f64| DMatrix::from_element(1, 1, v);
    match spec.name.as_str() {
        "scalar_power" => {
            let a = param("a", 1.5);
            let elems = spec.elements.clone().unwrap_or_else(|| vec![0.2, 0.45, 0.7, 0.9]);
            if elems.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(ConfigError::at("$.semigroup.elements", "elements must lie in (0, 1)"));
            }
            let translations = spec.translations.clone().unwrap_or_else(|| vec![0.6]);
            if translations.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                return Err(ConfigError::at(
                    "$.semigroup.translations",
                    "translations must lie in (0, 1]",
                ));
            }
            let sample = InvolutiveSemigroupSample::new(
                "scalar_power",
                elems.into_iter().map(scalar).collect(),
                StarMap::Identity,
                move |u| (u[(0, 0)] > 0.0).then(|| Complex64::new(u[(0, 0)].powf(a), 0.0)),
            )
            .map_err(|e| config_err("$.semigroup", e))?
            .with_phi_gradient(move |u| (u[(0, 0)] > 0.0).then(|| scalar(a * u[(0, 0)].powf(a - 1.0))));
            Ok(SemigroupSetup {
                sample,
                domain: ChartDomain::new(1, |x| x[0] > 0.0 && x[0] < 1.0),
                translations: translations.into_iter().map(scalar).collect(),
            })
        }
        _ => {
            if spec.elements.is_some() || spec.translations.is_some() {
                return Err(ConfigError::at(
                    "$.semigroup.elements",
                    "contraction_determinant samples its elements from the seed",
                ));
            }
            let n = param("n", 2.0);
            let count = param("count", 6.0);
            let (s, max_norm) = (param("s", 2.0), param("max_norm", 0.6));
            if n < 1.0 || n.fract() != 0.0 || count < 1.0 || count.fract() != 0.0 {
                return Err(ConfigError::at(
                    "$.semigroup.params",
                    "`n` and `count` must be positive integers",
                ));
            }
            if !(max_norm > 0.0 && max_norm < 1.0) || !(s > 0.0) {
                return Err(ConfigError::at("$.semigroup.params", "need 0 < max_norm < 1 and s > 0"));
            }
            let n = n as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let elems: Vec<DMatrix<f64>> = (0..count as usize)
                .map(|_| {
                    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                    let scale = max_norm * rng.gen_range(0.3..1.0) / op_norm_real(&m).max(1e-12);
                    m * scale
                })
                .collect();
            let translations = elems.iter().take(2).cloned().collect();
            let id = DMatrix::<f64>::identity(n, n);
            let id2 = id.clone();
            let sample =
                InvolutiveSemigroupSample::new("contraction_determinant", elems, StarMap::Transpose, move |u| {
                    let d = (&id - u).determinant();
                    (d > 0.0).then(|| Complex64::new(d.powf(-s), 0.0))
                })
                .map_err(|e| config_err("$.semigroup", e))?
                .with_phi_gradient(move |u| {
                    let m = &id2 - u;
                    let d = m.determinant();
                    if !(d > 0.0) {
                        return None;
                    }
                    Some(m.try_inverse()?.transpose() * (s * d.powf(-s)))
                });
            Ok(SemigroupSetup {
                sample,
                domain: ChartDomain::new(n * n, move |x| op_norm_real(&DMatrix::from_column_slice(n, n, x)) < 1.0),
                translations,
            })
        }
    }
}

fn luscher_mack(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let algebra = r.algebra.clone().unwrap();
    let setup = semigroup_sample(config.semigroup.as_ref().unwrap(), config.seed)
        .map_err(|e| kerflow_core::Error::InvalidArgument(e.to_string()))?;
    let tol = &config.tolerances;
    let cutoff = config.sample.rank_cutoff.unwrap();
    let model = gram_with_cutoff(&setup.sample.kernel(), &setup.sample.points(), cutoff)?;
    let psd = model.psd_check(tol.psd);
    let scale = psd.max_eigenvalue.abs().max(f64::MIN_POSITIVE);
    out.values.insert(String::from("min_eigenvalue"), psd.min_eigenvalue);
    out.values.insert(String::from("max_eigenvalue"), psd.max_eigenvalue);
    out.checks
        .push(Check::at_most("psd", (-psd.min_eigenvalue / scale).max(0.0), tol.psd));
    let mut spectrum = Curve::new("gram_spectrum", &["index", "eigenvalue"]);
    push_spectrum(&mut spectrum, None, &psd.spectrum);
    out.curves.push(spectrum);
    if !psd.passed {
        out.checks
            .push(Check::flag("pipeline", None, false).with_note("not run: sample Gram matrix is not positive"));
        return Ok(());
    }
    let input = LuscherMackInput {
        sample: setup.sample,
        algebra,
        domain: setup.domain,
        translations: setup.translations,
        eps_rank: cutoff,
        tol_sym: tol.symmetry,
        psd_tol: tol.psd,
        compat_tol: tol.compatibility,
    };
    let rep = luscher_mack_pipeline(&input)?;
    out.checks.push(Check::flag("pipeline", None, true));
    let worst_compat = rep
        .compatibility
        .elements
        .iter()
        .map(|e| e.defect / e.scale.max(1.0))
        .fold(0.0_f64, f64::max);
    out.checks
        .push(Check::at_most("compatibility", worst_compat, tol.compatibility));
    for (label, d) in rep.table.labels().iter().zip(rep.table.skew_defects()) {
        out.checks.push(Check::at_most(format!("skew[{label}]"), d, tol.skew));
    }
    out.checks.push(Check::at_most("star", rep.star_defect, tol.star));
    out.values.insert(String::from("rank"), rep.table.rank() as f64);
    if let Some(rank) = config.expect.rank {
        out.checks.push(Check::flag(
            "rank",
            Some(rep.table.rank() as f64),
            rep.table.rank() == rank,
        ));
    }
    if let Some(expected) = config.expect.generator {
        let q = rep.table.dual.q_indices();
        let value = q.first().and_then(|&k| scalar_generator(&rep.table, k));
        let check = match value {
            Some(g) => {
                out.values.insert(String::from("generator_re"), g.re);
                out.values.insert(String::from("generator_im"), g.im);
                Check::at_most("generator", (g - Complex64::new(expected, 0.0)).norm(), tol.generator)
            }
            None => Check::flag("generator", None, false).with_note("table is not rank one"),
        };
        out.checks.push(check);
    }
    Ok(())
}

fn os_grid(spec: &GridSpec) -> CoreResult<TestFunctionGrid> {
    match spec.dim {
        1 => TestFunctionGrid::symmetric_line(spec.half_width, spec.nodes, spec.margin),
        _ => TestFunctionGrid::symmetric_square(spec.half_width, spec.nodes, spec.margin),
    }
}

fn os_reconstruct(config: &ExperimentConfig, r: &Resolved, out: &mut Outcome) -> CoreResult<()> {
    let kernel = r.kernel.clone().unwrap();
    let s = &config.sample;
    let tol = &config.tolerances;
    let grid = os_grid(s.grid.as_ref().unwrap())?;
    let setup = ReflectionSetup::new(&grid, s.axis.unwrap())?;
    let radius = s.radius.unwrap();
    let fns: Vec<TestFunction> = s
        .centers
        .as_ref()
        .unwrap()
        .iter()
        .map(|c| grid.bump(&[*c], radius))
        .collect::<CoreResult<_>>()?;
    let d = SmearedKernel::new(kernel);
    let rp = reflection_positivity_check(&d, &setup, &fns, tol.psd)?;
    let scale = rp.psd.max_eigenvalue.abs().max(f64::MIN_POSITIVE);
    out.checks.push(
        Check::flag(
            "reflection_positivity",
            Some((-rp.psd.min_eigenvalue / scale).max(0.0)),
            rp.passed,
        )
        .with_note(format!("hermitian defect {:e}", rp.hermitian_defect)),
    );
    for (i, l) in rp.psd.spectrum.iter().enumerate() {
        out.values.insert(format!("twisted_eigenvalue[{i}]"), *l);
    }
    if !rp.passed {
        out.checks
            .push(Check::flag("quotient", None, false).with_note("not built: twisted Gram matrix is not positive"));
        return Ok(());
    }
    let space = os_quotient(&d, &setup, &fns, s.rank_cutoff.unwrap())?;
    out.values.insert(String::from("rank"), space.rank() as f64);
    out.checks
        .push(Check::flag("quotient", Some(space.rank() as f64), true));
    if let Some(rank) = config.expect.rank {
        out.checks
            .push(Check::flag("rank", Some(space.rank() as f64), space.rank() == rank));
    }
    out.checks.push(Check::at_most(
        "discarded_ratio",
        space.discarded_ratio(),
        tol.rank_ratio,
    ));
    let times = s.times.clone().unwrap();
    let mut curve = Curve::new("semigroup_eigenvalues", &["t", "index", "value"]);
    for &t in &times {
        let sg = os_semigroup(&space, &d, t)?;
        for (i, l) in sg.eigenvalues.iter().enumerate() {
            curve.push(vec![t, i as f64, *l]);
        }
        out.checks.push(Check::at_most(
            format!("contraction[t={t}]"),
            (sg.norm - 1.0).max(0.0),
            tol.semigroup,
        ));
        out.checks.push(Check::at_most(
            format!("self_adjoint[t={t}]"),
            sg.self_adjoint_defect,
            tol.semigroup,
        ));
        if let Some(masses) = &config.expect.masses {
            let mut expected: Vec<f64> = masses.iter().map(|m| (-m * t).exp()).collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            let check = if expected.len() == sg.eigenvalues.len() {
                let err = expected
                    .iter()
                    .zip(&sg.eigenvalues)
                    .map(|(e, l)| (e - l).abs())
                    .fold(0.0_f64, f64::max);
                Check::at_most(format!("eigenvalues[t={t}]"), err, tol.semigroup_value)
            } else {
                Check::flag(format!("eigenvalues[t={t}]"), None, false).with_note(format!(
                    "{} eigenvalues for {} masses",
                    sg.eigenvalues.len(),
                    expected.len()
                ))
            };
            out.checks.push(check);
        }
    }
    for w in times.windows(2) {
        let defect = os_semigroup_defect(&space, &d, w[0], w[1])?;
        out.checks.push(Check::at_most(
            format!("semigroup_law[s={},t={}]", w[0], w[1]),
            defect,
            tol.semigroup,
        ));
    }
    out.curves.push(curve);
    Ok(())
}

fn rp_axioms(config: &ExperimentConfig, out: &mut Outcome) -> CoreResult<()> {
    let s = &config.sample;
    let grid = os_grid(s.grid.as_ref().unwrap())?;
    let report = grid_translation_rp(&grid, s.axis.unwrap(), s.shifts.as_ref().unwrap(), config.tolerances.rp)?;
    out.checks.push(Check::at_most("rp1", report.max_rp1(), report.tol));
    let rp2 = Check::at_most("rp2", report.max_rp2(), report.tol);
    out.checks.push(if report.rp2.is_empty() {
        rp2.with_note("no translations parallel to the hyperplane on a 1-D grid")
    } else {
        rp2
    });
    out.values.insert(String::from("pairs"), report.rp1.len() as f64);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_side_detects_powers() {
        assert_eq!(grid_side(81, 2), Some(9));
        assert_eq!(grid_side(27, 3), Some(3));
        assert_eq!(grid_side(10, 2), None);
        assert_eq!(grid_side(1, 2), None);
    }

    #[test]
    fn tensor_grid_spans_bounds() {
        let g = tensor_grid(&[[0.0, 1.0], [-1.0, 1.0]], 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0].as_slice(), &[0.0, -1.0]);
        assert_eq!(g[8].as_slice(), &[1.0, 1.0]);
    }
}
