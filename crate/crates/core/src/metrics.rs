//! Error metrics against exact solutions on evaluation grids.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative L2 error `||u - u*||_2 / ||u||_2` over paired samples
/// (`u` exact, `u*` predicted).
pub fn relative_l2(exact: &[f64], predicted: &[f64]) -> Result<f64> {
    if exact.len() != predicted.len() || exact.is_empty() {
        return Err(Error::config(format!(
            "relative_l2 needs equal nonempty lengths, got {} and {}",
            exact.len(),
            predicted.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&u, &p) in exact.iter().zip(predicted) {
        num += (u - p) * (u - p);
        den += u * u;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric(
            "relative L2 is undefined for an identically zero reference".into(),
        ));
    }
    Ok(num.sqrt() / den.sqrt())
}

/// Per-time-slice errors, for the error profiles in the summary.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SliceError {
    pub t: f64,
    pub max_abs_error: f64,
    pub relative_l2: f64,
}

/// Error report over one evaluation grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorSummary {
    pub relative_l2: f64,
    pub max_abs_error: f64,
    pub grid_shape: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_time_slice: Option<Vec<SliceError>>,
}

/// Absolute errors over the spatial slice at time index `t_index` of a
/// row-major grid with time as the slowest axis.
pub fn slice_errors(exact: &[f64], predicted: &[f64], shape: &[usize], t_index: usize) -> Vec<f64> {
    let slice: usize = shape[1..].iter().product();
    assert!(t_index < shape[0]);
    assert_eq!(exact.len(), shape.iter().product::<usize>());
    let range = t_index * slice..(t_index + 1) * slice;
    exact[range.clone()]
        .iter()
        .zip(&predicted[range])
        .map(|(u, p)| (u - p).abs())
        .collect()
}

/// Build the full summary; `t_values` (one per time level) enables the
/// per-slice profile.
pub fn error_summary(
    exact: &[f64],
    predicted: &[f64],
    shape: &[usize],
    t_values: Option<&[f64]>,
) -> Result<ErrorSummary> {
    let rel = relative_l2(exact, predicted)?;
    let max_abs = exact
        .iter()
        .zip(predicted)
        .map(|(u, p)| (u - p).abs())
        .fold(0.0f64, f64::max);
    let per_time_slice = t_values.map(|ts| {
        assert_eq!(ts.len(), shape[0]);
        let slice: usize = shape[1..].iter().product();
        ts.iter()
            .enumerate()
            .map(|(i, &t)| {
                let range = i * slice..(i + 1) * slice;
                let max = exact[range.clone()]
                    .iter()
                    .zip(&predicted[range.clone()])
                    .map(|(u, p)| (u - p).abs())
                    .fold(0.0f64, f64::max);
                let rel = relative_l2(&exact[range.clone()], &predicted[range])
                    .unwrap_or(f64::NAN);
                SliceError { t, max_abs_error: max, relative_l2: rel }
            })
            .collect()
    });
    Ok(ErrorSummary { relative_l2: rel, max_abs_error: max_abs, grid_shape: shape.to_vec(), per_time_slice })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SplitMix64;

    #[test]
    fn identical_vectors_give_zero() {
        assert_eq!(relative_l2(&[1.0, -2.0, 3.0], &[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_prediction_gives_one() {
        // ||u - 0|| = ||u||
        assert_eq!(relative_l2(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn scale_invariance() {
        let mut rng = SplitMix64::new(2);
        let u: Vec<f64> = (0..50).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let p: Vec<f64> = (0..50).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let base = relative_l2(&u, &p).unwrap();
        let c = 7.0;
        let uc: Vec<f64> = u.iter().map(|x| c * x).collect();
        let pc: Vec<f64> = p.iter().map(|x| c * x).collect();
        let scaled = relative_l2(&uc, &pc).unwrap();
        assert!((base - scaled).abs() <= 1e-15);
    }

    #[test]
    fn permutation_invariance() {
        let u = [1.0, 2.0, 3.0, 4.0];
        let p = [0.5, 2.5, 2.0, 4.5];
        let a = relative_l2(&u, &p).unwrap();
        let u2 = [4.0, 1.0, 3.0, 2.0];
        let p2 = [4.5, 0.5, 2.0, 2.5];
        let b = relative_l2(&u2, &p2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_reference_is_undefined() {
        assert!(matches!(
            relative_l2(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn triangle_sanity() {
        let mut rng = SplitMix64::new(5);
        let u: Vec<f64> = (0..20).map(|_| rng.next_f64() + 0.1).collect();
        let p: Vec<f64> = (0..20).map(|_| rng.next_f64()).collect();
        let w: Vec<f64> = (0..20).map(|_| rng.next_f64()).collect();
        let norm = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let u_norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lhs = relative_l2(&u, &p).unwrap();
        let rhs = (norm(&u, &w) + norm(&w, &p)) / u_norm;
        assert!(lhs <= rhs + 1e-15);
    }

    #[test]
    fn slice_errors_shapes() {
        // 3 time levels x 4 spatial points
        let shape = [3usize, 4];
        let exact: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut predicted = exact.clone();
        predicted[5] += 0.5; // t index 1
        let errs = slice_errors(&exact, &predicted, &shape, 1);
        assert_eq!(errs.len(), 4);
        assert_eq!(errs, vec![0.0, 0.5, 0.0, 0.0]);
        let summary = error_summary(&exact, &predicted, &shape, Some(&[0.0, 0.5, 1.0])).unwrap();
        assert_eq!(summary.max_abs_error, 0.5);
        let slices = summary.per_time_slice.unwrap();
        assert_eq!(slices.len(), 3);
        assert_eq!(slices[1].max_abs_error, 0.5);
        // max over slice equals overall max restricted to that slice
        assert_eq!(slices[0].max_abs_error, 0.0);
    }
}
