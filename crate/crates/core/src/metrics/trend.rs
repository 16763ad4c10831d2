//! Least-squares polynomial trend over a series.

use nalgebra::{DMatrix, DVector};

use super::MetricsError;

/// Coefficients `c[0] + c[1] x + ... + c[d] x^d` fitted to `(x, y)` points.
pub fn trend_fit_points(points: &[(f64, f64)], degree: usize) -> Result<Vec<f64>, MetricsError> {
    if points.len() <= degree {
        return Err(MetricsError::Underdetermined {
            points: points.len(),
            degree,
        });
    }
    let cols = degree + 1;
    let mut design = DMatrix::from_fn(points.len(), cols, |r, c| points[r].0.powi(c as i32));
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));

    // Equilibrate columns; raw powers of the index span many orders of magnitude.
    let mut scale = vec![1.0; cols];
    for (c, s) in scale.iter_mut().enumerate() {
        let norm = design.column(c).norm();
        if norm > 0.0 {
            *s = norm;
            design.column_mut(c).unscale_mut(norm);
        }
    }
    let svd = design.svd(true, true);
    let sol = svd.solve(&y, 1e-13).map_err(|_| MetricsError::Underdetermined {
        points: points.len(),
        degree,
    })?;
    Ok(sol.iter().zip(&scale).map(|(c, s)| c / s).collect())
}

/// Fits against the element index `0, 1, 2, ...`.
pub fn trend_fit(series: &[f64], degree: usize) -> Result<Vec<f64>, MetricsError> {
    let points: Vec<(f64, f64)> = series.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
    trend_fit_points(&points, degree)
}

pub fn trend_value(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let c = trend_fit(&[0.7; 40], 3).unwrap();
        assert!((c[0] - 0.7).abs() < 1e-9);
        assert!(c[1..].iter().all(|x| x.abs() < 1e-9), "{c:?}");
    }

    #[test]
    fn exact_line() {
        let ys: Vec<f64> = (0..25).map(|i| 2.5 - 0.125 * i as f64).collect();
        let c = trend_fit(&ys, 1).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-9);
        assert!((c[1] + 0.125).abs() < 1e-9);
        assert!((trend_value(&c, 4.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn underdetermined() {
        assert_eq!(
            trend_fit(&[1.0, 2.0], 2),
            Err(MetricsError::Underdetermined { points: 2, degree: 2 })
        );
    }
}
