//! Dense complex linear algebra shared by the kernel and operator modules.
//!
//! Matrices are small (a few hundred rows at most), so everything here is
//! plain dense `nalgebra` with no attempt at blocking.

use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn op_norm_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `max |A_ij − s·conj(A_ji)|`; zero for an `s`-hermitian matrix.
pub fn hermitian_defect(m: &CMat, s: f64) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj() * s).norm());
        }
    }
    worst
}

/// Eigendecomposition of a hermitian matrix with eigenvalues sorted in
/// descending order; column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "hermitian_eigen needs a square matrix");
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMat::zeros(0, 0),
            };
        }
        let sym = (m + m.adjoint()) * c(0.5);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    /// `Q f(Λ) Q†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = f(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

fn one_norm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant (backward error at unit roundoff).
pub fn expm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> DMatrix<T> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        Float::ceil(Float::log2(norm / THETA_13)) as i32
    } else {
        0
    };
    let scale = T::from_real(Float::powi(2.0, -squarings));
    let a = a * scale;
    let b = |k: usize| T::from_real(B[k]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Chebyshev points of the first kind on `[a, b]`, ascending. For odd `n`
/// the midpoint is hit exactly.
pub fn chebyshev_points(n: usize, a: f64, b: f64) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..n)
        .map(|k| {
            let x = -Float::cos(core::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64);
            let x = if Float::abs(x) < 1e-15 { 0.0 } else { x };
            mid + half * x
        })
        .collect()
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fitted_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| Float::ln(*v)).collect();
    let ys: Vec<f64> = err.iter().map(|v| Float::ln(*v)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        assert_abs_diff_eq!(e[(0, 0)], Float::cos(t), epsilon = 1e-15);
        assert_abs_diff_eq!(e[(1, 0)], Float::sin(t), epsilon = 1e-15);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let a = DMatrix::from_row_slice(2, 2, &[-20.0, 0.0, 0.0, 3.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - Float::exp(-20.0f64)).abs() < 1e-20);
        assert!((e[(1, 1)] / Float::exp(3.0f64) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expm_nilpotent_series_terminates() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let expect = DMatrix::identity(3, 3) + &a + &a * &a * 0.5;
        assert!((expm(&a) - expect).abs().max() < 1e-15);
    }

    #[test]
    fn hermitian_eigen_complex_matrix() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[c(2.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), c(2.0)],
        );
        let e = HermitianEigen::new(&m);
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let back = e.apply_fn(c);
        assert!(max_abs(&(back - m)) < 1e-14);
    }

    #[test]
    fn chebyshev_odd_count_contains_midpoint() {
        let pts = chebyshev_points(21, -1.0, 1.0);
        assert_eq!(pts[10], 0.0);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fitted_order_of_pure_power() {
        let h = [1e-2, 5e-3, 2.5e-3];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert_abs_diff_eq!(fitted_order(&h, &e), 2.0, epsilon = 1e-12);
    }
}
