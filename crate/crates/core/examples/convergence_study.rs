//! Refinement studies behind the Fröhlich and conjugation targets.
//!
//! Run with `cargo run -p kerflow-core --example convergence_study --release`.

use kerflow_core::geometry::{ChartDomain, Point, VectorField};
use kerflow_core::integrability::synthesize_cdual_rep;
use kerflow_core::kernels::{gaussian_laplace, gram, mass_shell};
use kerflow_core::lie::euclidean_motion;
use kerflow_core::linalg::chebyshev_points;
use kerflow_core::operators::{froelich_check, CompatibleAction};

fn main() -> kerflow_core::Result<()> {
    println!("Fröhlich, exp((x+y)^2/8), d/dx, m = 0, t = 0.1");
    let kernel = gaussian_laplace(1, 1.0);
    let field = VectorField::translation(1, 0);
    for n in [11, 21, 41] {
        let pts: Vec<Point> = chebyshev_points(n, -1.0, 1.0)
            .into_iter()
            .map(|x| Point::from_element(1, x))
            .collect();
        let model = gram(&kernel, &pts)?;
        let r = froelich_check(&kernel, &field, &model, n / 2, 0.1, 1e-3)?;
        println!(
            "  n = {n:3}  rank = {:3}  delta = {:.3e}  residual = {:.3e}",
            model.rank(),
            r.delta,
            r.projection_residual
        );
    }

    println!("conjugation on euclidean_motion(2,1,1), mass-shell kernel, x = t2, s = 0.2");
    let kernel = mass_shell(1.0, 5.0, 201)?;
    let action = CompatibleAction::affine(euclidean_motion(2, 1, 1)?, Some(ChartDomain::above(2, 0, 0.0)))?;
    for n in [3, 5, 9] {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let u = i as f64 / (n - 1) as f64;
                let v = j as f64 / (n - 1) as f64;
                pts.push(Point::from_column_slice(&[0.5 + u, -0.5 + v]));
            }
        }
        let model = gram(&kernel, &pts)?;
        let table = synthesize_cdual_rep(&kernel, &action, &model, 1e-8)?;
        let mut line = format!("  N = {:3}  rank = {:3}", n * n, model.rank());
        let probe = model.embed_point(&kernel, &Point::from_column_slice(&[1.0, 0.0]))?;
        for y in 0..2 {
            let op = table.conjugation_check(2, y, 0.2)?;
            let on_center = table.conjugation_on(2, y, 0.2, &probe)?;
            line += &format!("  y{y}: norm {op:.3e} center {on_center:.3e}");
        }
        line += &format!("  comm = {:.3e}", table.commutation_defect().max);
        println!("{line}");
    }
    Ok(())
}
