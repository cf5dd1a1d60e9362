//! Finite-rank synthesis of the c-dual representation.
//!
//! Given a kernel compatible with an action `β` of `(g, τ)`, each `h`
//! element becomes the skew compression `Ã_x` and each `q` element the
//! skew matrix `i·Ã_y` with `Ã_y` hermitian. The resulting table is indexed
//! by the basis of the c-dual algebra `h ⊕ i·q`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ChartDomain, Point};
use crate::kernels::{GramModel, InvolutiveSemigroupSample, Kernel, PsdReport, RKHSVector};
use crate::lie::{AlgebraElement, Parity, SymmetricLieAlgebra};
use crate::linalg::{c, expm, max_abs, op_norm, CMat, I};
use crate::operators::{
    classify_form, compatibility_check, compress_operator, lie_derivative_form, CompatibilityReport, CompatibleAction,
    OperatorCompression, Symmetry,
};

/// One operator per basis element of the c-dual algebra.
#[derive(Debug, Clone)]
pub struct RepresentationTable {
    pub algebra: SymmetricLieAlgebra,
    pub dual: SymmetricLieAlgebra,
    pub model: GramModel,
    /// Compressions of `L_{β(e_k)}` in the original basis.
    pub operators: Vec<OperatorCompression>,
    /// `T_k`: `Ã` on `h`, `i·Ã` on `q`.
    pub entries: Vec<CMat>,
}

/// Build the table, enforcing skew forms on `h` and symmetric forms on `q`.
pub fn synthesize_cdual_rep(
    kernel: &Kernel,
    action: &CompatibleAction,
    model: &GramModel,
    tol_sym: f64,
) -> Result<RepresentationTable> {
    let algebra = action.algebra.clone();
    let dual = algebra.c_dual()?;
    model.require_nonempty()?;
    let mut operators = Vec::with_capacity(algebra.dim());
    let mut entries = Vec::with_capacity(algebra.dim());
    for k in 0..algebra.dim() {
        let b = lie_derivative_form(kernel, action.basis_field(k), model.points())?;
        let parity = algebra.parity(k);
        let expected = Symmetry::expected_for(parity);
        let defect = classify_form(&b, tol_sym).defect_for(expected);
        if defect > tol_sym {
            return Err(Error::Compatibility {
                element: String::from(algebra.label(k)),
                defect,
            });
        }
        let op = compress_operator(&b, model, Some(expected), tol_sym)?.with_label(algebra.label(k));
        entries.push(match parity {
            Parity::H => op.matrix.clone(),
            Parity::Q => &op.matrix * I,
        });
        operators.push(op);
    }
    Ok(RepresentationTable {
        algebra,
        dual,
        model: model.clone(),
        operators,
        entries,
    })
}

/// Pairwise commutation defects of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutationReport {
    /// `(a, b, defect)` for `a < b`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max: f64,
}

impl RepresentationTable {
    pub fn rank(&self) -> usize {
        self.model.rank()
    }

    pub fn labels(&self) -> &[String] {
        self.dual.labels()
    }

    /// `Σ_k z_k T_k` for an element of the c-dual algebra. Complex
    /// coefficients extend the table complex-linearly.
    pub fn operator_of(&self, z: &AlgebraElement) -> Result<CMat> {
        if z.dim() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                expected: self.entries.len(),
                got: z.dim(),
            });
        }
        let r = self.rank();
        let mut out = CMat::zeros(r, r);
        for (zk, t) in z.coeffs.iter().zip(&self.entries) {
            if *zk != c(0.0) {
                out += t * *zk;
            }
        }
        Ok(out)
    }

    /// `‖T + T†‖ / (‖T‖ + 1)` per entry.
    pub fn skew_defects(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|t| op_norm(&(t + t.adjoint())) / (op_norm(t) + 1.0))
            .collect()
    }

    /// `‖exp(tT)† exp(tT) − I‖` per entry.
    pub fn unitarity_defects(&self, t: f64) -> Vec<f64> {
        let r = self.rank();
        self.entries
            .iter()
            .map(|e| {
                let u = expm(&(e * c(t)));
                op_norm(&(u.adjoint() * &u - CMat::identity(r, r)))
            })
            .collect()
    }

    /// `‖[T_a, T_b] − T_{[a,b]}‖ / (‖T_a‖‖T_b‖ + 1)` for all pairs, with
    /// brackets taken in the c-dual algebra.
    pub fn commutation_defect(&self) -> CommutationReport {
        let n = self.entries.len();
        let norms: Vec<f64> = self.entries.iter().map(op_norm).collect();
        let mut pairs = Vec::new();
        let mut max = 0.0_f64;
        for a in 0..n {
            for b in a + 1..n {
                let (ta, tb) = (&self.entries[a], &self.entries[b]);
                let mut diff = ta * tb - tb * ta;
                for (k, tk) in self.entries.iter().enumerate() {
                    let coef = self.dual.constant(a, b, k);
                    if coef != 0.0 {
                        diff -= tk * c(coef);
                    }
                }
                let d = op_norm(&diff) / (norms[a] * norms[b] + 1.0);
                max = max.max(d);
                pairs.push((a, b, d));
            }
        }
        CommutationReport { pairs, max }
    }

    /// `‖exp(−sT_x) T_y exp(sT_x) − T_{e^{−s ad x} y}‖` for `x ∈ h`.
    pub fn conjugation_check(&self, x: usize, y: usize, s: f64) -> Result<f64> {
        Ok(op_norm(&self.conjugation_residual(x, y, s)?))
    }

    /// The same residual applied to a probe vector, relative to its norm.
    ///
    /// Compressions of an unbounded generator grow with resolution, so the
    /// operator norm need not shrink under refinement; on a fixed smooth
    /// vector such as a kernel section it does.
    pub fn conjugation_on(&self, x: usize, y: usize, s: f64, probe: &RKHSVector) -> Result<f64> {
        if probe.coords.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                got: probe.coords.len(),
            });
        }
        Ok((self.conjugation_residual(x, y, s)? * &probe.coords).norm() / probe.norm())
    }

    /// `exp(−sT_x) T_y exp(sT_x) − T_{e^{−s ad x} y}`.
    pub fn conjugation_residual(&self, x: usize, y: usize, s: f64) -> Result<CMat> {
        let n = self.entries.len();
        if x >= n || y >= n {
            return Err(Error::InvalidArgument(format!("basis index out of range ({x}, {y})")));
        }
        if self.dual.parity(x) != Parity::H {
            return Err(Error::InvalidArgument(format!("`{}` is not in h", self.dual.label(x))));
        }
        let tx = &self.entries[x];
        let lhs = expm(&(tx * c(-s))) * &self.entries[y] * expm(&(tx * c(s)));
        let moved = self
            .dual
            .apply(&self.dual.exp_ad(&self.dual.basis(x), -s)?, &self.dual.basis(y))?;
        Ok(lhs - self.operator_of(&moved)?)
    }
}

/// Result of [`h_group_rep`].
#[derive(Debug, Clone)]
pub struct HGroupReport {
    /// Matrix of `π^H(exp tx)` in the orthonormal basis.
    pub matrix: CMat,
    /// `‖P†P − I‖`.
    pub unitarity_defect: f64,
    /// `‖(P − I)/t − Ã_x‖`, or 0 at `t = 0`.
    pub generator_defect: f64,
}

/// `π^H(exp tx) K_m = K_{σ_{−t}(m)}` compressed to the model, for `x` the
/// `h` basis element with index `k`.
pub fn h_group_rep(
    kernel: &Kernel,
    action: &CompatibleAction,
    model: &GramModel,
    k: usize,
    t: f64,
    step: f64,
    tol_sym: f64,
) -> Result<HGroupReport> {
    if action.algebra.parity(k) != Parity::H {
        return Err(Error::InvalidArgument(format!(
            "`{}` is not in h",
            action.algebra.label(k)
        )));
    }
    let model = model.require_nonempty()?;
    let pts = model.points();
    let domain: &ChartDomain = action.basis_field(k).domain();
    let moved: Vec<Point> = pts
        .iter()
        .map(|p| {
            let q = action.flow(k, -t, p, step)?;
            if !domain.contains(q.as_slice()) {
                return Err(Error::Domain(String::from("moved sample point left the chart")));
            }
            Ok(q)
        })
        .collect::<Result<_>>()?;
    let n = pts.len();
    let mut b = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = kernel.eval(&pts[i], &moved[j])?;
        }
    }
    let p = model.compress_form(&b)?;
    let r = model.rank();
    let unitarity_defect = op_norm(&(p.adjoint() * &p - CMat::identity(r, r)));
    let generator_defect = if t == 0.0 {
        0.0
    } else {
        let form = lie_derivative_form(kernel, action.basis_field(k), pts)?;
        let gen = compress_operator(&form, model, Some(Symmetry::Skew), tol_sym)?;
        op_norm(&((&p - CMat::identity(r, r)) / c(t) - &gen.matrix))
    };
    Ok(HGroupReport {
        matrix: p,
        unitarity_defect,
        generator_defect,
    })
}

/// Inputs of the semigroup pipeline.
#[derive(Debug, Clone)]
pub struct LuscherMackInput {
    pub sample: InvolutiveSemigroupSample,
    /// Algebra with a linear realization acting by right multiplication.
    pub algebra: SymmetricLieAlgebra,
    /// Chart containing the sample.
    pub domain: ChartDomain,
    /// Elements whose translation operators are checked for `Π(s♯) = Π(s)†`.
    pub translations: Vec<DMatrix<f64>>,
    pub eps_rank: f64,
    pub tol_sym: f64,
    pub psd_tol: f64,
    pub compat_tol: f64,
}

#[derive(Debug, Clone)]
pub struct LuscherMackReport {
    pub psd: PsdReport,
    pub compatibility: CompatibilityReport,
    pub table: RepresentationTable,
    /// Compressed `Π(s)` for each requested translation.
    pub translations: Vec<CMat>,
    /// `max ‖Π(s♯) − Π(s)†‖` over requested translations.
    pub star_defect: f64,
}

/// Kernel `φ(x y♯)`, positivity, compatibility with right multiplication,
/// the c-dual table and the `*`-property of the translation operators.
pub fn luscher_mack_pipeline(input: &LuscherMackInput) -> Result<LuscherMackReport> {
    let sample = &input.sample;
    let kernel = sample.kernel();
    let points = sample.points();
    for p in &points {
        if !input.domain.contains(p.as_slice()) {
            return Err(Error::Domain(String::from("sample element outside the chart")));
        }
    }
    let model = crate::kernels::gram_with_cutoff(&kernel, &points, input.eps_rank)?;
    let psd = model.psd_check(input.psd_tol);
    if !psd.passed {
        return Err(Error::NotPositive {
            min_eigenvalue: psd.min_eigenvalue,
        });
    }
    let action = CompatibleAction::right_multiplication(input.algebra.clone(), Some(input.domain.clone()))?;
    let compatibility = compatibility_check(&kernel, &action, &points, input.compat_tol)?;
    if let Some(bad) = compatibility.elements.iter().find(|e| !e.passed) {
        return Err(Error::Compatibility {
            element: bad.label.clone(),
            defect: bad.defect,
        });
    }
    let table = synthesize_cdual_rep(&kernel, &action, &model, input.tol_sym)?;
    let mut translations = Vec::with_capacity(input.translations.len());
    let mut star_defect = 0.0_f64;
    for s in &input.translations {
        let pi = model.compress_form(&sample.translation_form(s)?)?;
        let pi_star = model.compress_form(&sample.translation_form(&sample.star.apply(s))?)?;
        star_defect = star_defect.max(max_abs(&(pi_star - pi.adjoint())));
        translations.push(pi);
    }
    Ok(LuscherMackReport {
        psd,
        compatibility,
        table,
        translations,
        star_defect,
    })
}

/// The scalar generator `Ã_y` of a rank-one table entry for `y ∈ q`.
pub fn scalar_generator(table: &RepresentationTable, k: usize) -> Option<Complex64> {
    let op = table.operators.get(k)?;
    (op.rank() == 1).then(|| op.matrix[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;
    use crate::kernels::{self, gram, StarMap};
    use crate::lie;
    use crate::linalg::chebyshev_points;
    use alloc::vec;
    use core::f64::consts::PI;

    fn cosh_kernel() -> Kernel {
        let mu = kernels::MeasureSample::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        kernels::laplace_kernel_from_measure(&mu)
    }

    fn line(v: &[f64]) -> Vec<Point> {
        v.iter().map(|x| Point::from_element(1, *x)).collect()
    }

    fn grid(n: usize) -> Vec<Point> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let u = i as f64 / (n - 1) as f64;
                let v = j as f64 / (n - 1) as f64;
                out.push(Point::from_column_slice(&[0.5 + u, -0.5 + v]));
            }
        }
        out
    }

    fn mass_shell_table(n: usize) -> RepresentationTable {
        let k = kernels::mass_shell(1.0, 5.0, 201).unwrap();
        let act = CompatibleAction::affine(
            lie::euclidean_motion(2, 1, 1).unwrap(),
            Some(ChartDomain::above(2, 0, 0.0)),
        )
        .unwrap();
        let model = gram(&k, &grid(n)).unwrap();
        synthesize_cdual_rep(&k, &act, &model, 1e-8).unwrap()
    }

    #[test]
    fn abelian_translation_table() {
        let act = CompatibleAction::new(lie::abelian(1).unwrap(), vec![VectorField::translation(1, 0)]).unwrap();
        let model = gram(&cosh_kernel(), &line(&chebyshev_points(15, -1.0, 1.0))).unwrap();
        let table = synthesize_cdual_rep(&cosh_kernel(), &act, &model, 1e-8).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert!(table.skew_defects()[0] <= 1e-8);
        assert_eq!(table.labels(), &["i·a1"]);
        assert_eq!(table.commutation_defect().max, 0.0);
        assert!(table.unitarity_defects(1.0)[0] <= 1e-10);
    }

    #[test]
    fn trivial_kernel_gives_zero_operators() {
        let act = CompatibleAction::affine(lie::euclidean_motion(2, 1, 1).unwrap(), None).unwrap();
        let k = kernels::constant(2, 1.0);
        let model = gram(&k, &grid(3)).unwrap();
        let table = synthesize_cdual_rep(&k, &act, &model, 1e-8).unwrap();
        assert!(table.entries.iter().all(|t| max_abs(t) == 0.0));
    }

    #[test]
    fn mismatched_kernel_names_element() {
        // gaussian_rbf makes translations skew, but t1 lies in q
        let act = CompatibleAction::affine(lie::euclidean_motion(2, 1, 1).unwrap(), None).unwrap();
        let k = kernels::gaussian_rbf(2, 0.7);
        let model = gram(&k, &grid(3)).unwrap();
        match synthesize_cdual_rep(&k, &act, &model, 1e-8) {
            Err(Error::Compatibility { element, .. }) => assert_eq!(element, "r"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mass_shell_table_is_skew_and_unitary() {
        let table = mass_shell_table(3);
        assert_eq!(table.labels(), &["i·r", "i·t1", "t2"]);
        for d in table.skew_defects() {
            assert!(d <= 1e-8, "skew defect {d}");
        }
        for d in table.unitarity_defects(1.0) {
            assert!(d <= 1e-10, "unitarity defect {d}");
        }
        assert!(table.commutation_defect().max.is_finite());
    }

    #[test]
    fn conjugation_basics() {
        let table = mass_shell_table(3);
        assert_eq!(table.conjugation_check(2, 0, 0.0).unwrap(), 0.0);
        assert!(table.conjugation_check(2, 2, 0.3).unwrap() <= 1e-10);
        assert!(table.conjugation_check(0, 1, 0.3).is_err());
    }

    #[test]
    fn conjugation_on_center_section_shrinks() {
        let k = kernels::mass_shell(1.0, 5.0, 201).unwrap();
        let center = Point::from_column_slice(&[1.0, 0.0]);
        let defects: Vec<f64> = [3, 5]
            .iter()
            .map(|n| {
                let table = mass_shell_table(*n);
                let probe = table.model.embed_point(&k, &center).unwrap();
                table.conjugation_on(2, 0, 0.2, &probe).unwrap()
            })
            .collect();
        assert!(defects[1] < defects[0], "{defects:?}");
    }

    #[test]
    fn h_group_rep_on_closed_orbit() {
        let g = lie::euclidean_motion(2, 0, 2).unwrap();
        let act = CompatibleAction::affine(g, None).unwrap();
        let k = kernels::gaussian_rbf(2, 0.5);
        let mut pts = Vec::new();
        for radius in [0.5, 1.0] {
            for j in 0..8 {
                let a = j as f64 * PI / 4.0;
                pts.push(Point::from_column_slice(&[radius * a.cos(), radius * a.sin()]));
            }
        }
        let model = gram(&k, &pts).unwrap();
        let id = h_group_rep(&k, &act, &model, 0, 0.0, 1e-3, 1e-8).unwrap();
        assert!(max_abs(&(id.matrix - CMat::identity(model.rank(), model.rank()))) < 1e-10);
        let quarter = h_group_rep(&k, &act, &model, 0, PI / 4.0, 1e-3, 1e-8).unwrap();
        assert!(quarter.unitarity_defect <= 1e-10, "{}", quarter.unitarity_defect);
        let ts = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = ts
            .iter()
            .map(|t| {
                h_group_rep(&k, &act, &model, 0, *t, 1e-3, 1e-8)
                    .unwrap()
                    .generator_defect
            })
            .collect();
        assert!(crate::linalg::fitted_order(&ts, &errs) >= 0.9, "{errs:?}");
    }

    fn power_sample(a: f64) -> InvolutiveSemigroupSample {
        let elems = [0.2, 0.45, 0.7, 0.9]
            .iter()
            .map(|v| DMatrix::from_element(1, 1, *v))
            .collect();
        InvolutiveSemigroupSample::new("power", elems, StarMap::Identity, move |u| {
            (u[(0, 0)] > 0.0).then(|| c(u[(0, 0)].powf(a)))
        })
        .unwrap()
        .with_phi_gradient(move |u| (u[(0, 0)] > 0.0).then(|| DMatrix::from_element(1, 1, a * u[(0, 0)].powf(a - 1.0))))
    }

    fn unit_interval() -> ChartDomain {
        ChartDomain::new(1, |x| x[0] > 0.0 && x[0] < 1.0)
    }

    #[test]
    fn luscher_mack_scalar() {
        let input = LuscherMackInput {
            sample: power_sample(1.5),
            algebra: lie::abelian(1).unwrap(),
            domain: unit_interval(),
            translations: vec![DMatrix::from_element(1, 1, 0.6)],
            eps_rank: 1e-12,
            tol_sym: 1e-8,
            psd_tol: 1e-10,
            compat_tol: 1e-10,
        };
        let rep = luscher_mack_pipeline(&input).unwrap();
        assert_eq!(rep.table.rank(), 1);
        let g = scalar_generator(&rep.table, 0).unwrap();
        assert!((g - c(1.5)).norm() < 1e-10);
        assert!((rep.translations[0][(0, 0)] - c(0.6f64.powf(1.5))).norm() < 1e-12);
        assert!(rep.star_defect < 1e-12);
    }

    #[test]
    fn luscher_mack_trivial_character() {
        let elems = [0.3, 0.8].iter().map(|v| DMatrix::from_element(1, 1, *v)).collect();
        let s = InvolutiveSemigroupSample::new("one", elems, StarMap::Identity, |_| Some(c(1.0)))
            .unwrap()
            .with_phi_gradient(|_| Some(DMatrix::zeros(1, 1)));
        let input = LuscherMackInput {
            sample: s,
            algebra: lie::abelian(1).unwrap(),
            domain: unit_interval(),
            translations: vec![],
            eps_rank: 1e-12,
            tol_sym: 1e-8,
            psd_tol: 1e-10,
            compat_tol: 1e-10,
        };
        let rep = luscher_mack_pipeline(&input).unwrap();
        assert_eq!(rep.table.rank(), 1);
        assert_eq!(max_abs(&rep.table.entries[0]), 0.0);
    }

    #[test]
    fn luscher_mack_rejects_non_positive() {
        let elems = [0.3, 0.8].iter().map(|v| DMatrix::from_element(1, 1, *v)).collect();
        let s = InvolutiveSemigroupSample::new("neg", elems, StarMap::Identity, |u| Some(c(-u[(0, 0)]))).unwrap();
        let input = LuscherMackInput {
            sample: s,
            algebra: lie::abelian(1).unwrap(),
            domain: unit_interval(),
            translations: vec![],
            eps_rank: 1e-12,
            tol_sym: 1e-8,
            psd_tol: 1e-10,
            compat_tol: 1e-10,
        };
        assert!(matches!(luscher_mack_pipeline(&input), Err(Error::NotPositive { .. })));
    }
}
