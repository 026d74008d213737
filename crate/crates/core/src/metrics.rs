//! Quantitative evaluation of reconstructions against exact rasters.

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// Flat comparison summary between a reconstruction and a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// ||recon - truth||_2 / ||truth||_2 over grid values.
    pub relative_l2: f64,
    /// Largest absolute nodewise difference.
    pub max_abs: f64,
    /// Signed per-axis distance between the argmax of the reconstruction
    /// and the argmax of the truth.
    pub peak_offset: [f64; 3],
    /// Free-form provenance carried into serialized reports.
    pub meta: String,
}

fn check_same_geometry(a: &ImageGrid, b: &ImageGrid) -> Result<()> {
    if !a.same_geometry(b) {
        return Err(Error::ShapeMismatch(format!(
            "grids differ: shape {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    Ok(())
}

/// Relative L2 error of `recon` against `truth` over grid values.
pub fn relative_l2(recon: &ImageGrid, truth: &ImageGrid) -> Result<f64> {
    check_same_geometry(recon, truth)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (r, t) in recon.values.iter().zip(&truth.values) {
        num += (r - t) * (r - t);
        den += t * t;
    }
    if den <= 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Binary mask of the nodes at or above `level` times the grid maximum.
pub fn threshold_level_set(grid: &ImageGrid, level: f64) -> ImageGrid {
    let max = grid.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let cut = level * max;
    let values = grid.values.iter().map(|&v| if v >= cut { 1.0 } else { 0.0 }).collect();
    grid.with_values(values).expect("value count preserved")
}

fn check_binary(grid: &ImageGrid) -> Result<()> {
    if grid.values.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("jaccard needs binary masks of zeros and ones"));
    }
    Ok(())
}

/// Jaccard index |A and B| / |A or B| of two binary masks; 1 when both are
/// empty.
pub fn jaccard(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    check_same_geometry(a, b)?;
    check_binary(a)?;
    check_binary(b)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.values.iter().zip(&b.values) {
        let (p, q) = (*x == 1.0, *y == 1.0);
        if p && q {
            inter += 1;
        }
        if p || q {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

fn argmax_position(grid: &ImageGrid) -> [f64; 3] {
    let best = (0..grid.len())
        .max_by(|&i, &j| grid.values[i].total_cmp(&grid.values[j]))
        .expect("grids are never empty");
    grid.position(best)
}

/// Full comparison of a reconstruction against the exact raster.
pub fn error_report(recon: &ImageGrid, truth: &ImageGrid, meta: &str) -> Result<ErrorReport> {
    let relative_l2 = relative_l2(recon, truth)?;
    let max_abs = recon
        .values
        .iter()
        .zip(&truth.values)
        .map(|(r, t)| (r - t).abs())
        .fold(0.0, f64::max);
    let pr = argmax_position(recon);
    let pt = argmax_position(truth);
    let peak_offset = [pr[0] - pt[0], pr[1] - pt[1], pr[2] - pt[2]];
    Ok(ErrorReport { relative_l2, max_abs, peak_offset, meta: meta.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_image_grid;
    use proptest::prelude::*;

    fn grid2(values: Vec<f64>) -> ImageGrid {
        let n = (values.len() as f64).sqrt() as usize;
        assert_eq!(n * n, values.len());
        make_image_grid(2, &[[-1.0, 1.0], [-1.0, 1.0]], &[n, n])
            .unwrap()
            .with_values(values)
            .unwrap()
    }

    #[test]
    fn relative_l2_reference_cases() {
        let truth = grid2(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(relative_l2(&truth, &truth).unwrap(), 0.0);
        let double = grid2(truth.values.iter().map(|v| 2.0 * v).collect());
        assert!((relative_l2(&double, &truth).unwrap() - 1.0).abs() < 1e-15);
        let zero = grid2(vec![0.0; 4]);
        assert!((relative_l2(&zero, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_l2(&truth, &zero), Err(Error::ZeroReference)));
        let other = make_image_grid(2, &[[-1.0, 1.0], [-1.0, 1.0]], &[3, 3]).unwrap();
        assert!(matches!(relative_l2(&truth, &other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn threshold_levels() {
        let constant = grid2(vec![2.0; 4]);
        assert!(threshold_level_set(&constant, 0.9).values.iter().all(|&v| v == 1.0));
        let mixed = grid2(vec![1.0, 0.95, 0.89, 0.2]);
        let mask = threshold_level_set(&mixed, 0.9);
        assert_eq!(mask.values, vec![1.0, 1.0, 0.0, 0.0]);
        assert!(threshold_level_set(&mixed, 1.1).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jaccard_set_arithmetic() {
        let a = grid2(vec![1.0, 1.0, 0.0, 0.0]);
        let b = grid2(vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert!((jaccard(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let disjoint = grid2(vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(jaccard(&a, &disjoint).unwrap(), 0.0);
        let empty = grid2(vec![0.0; 4]);
        assert_eq!(jaccard(&empty, &empty).unwrap(), 1.0);
        let fuzzy = grid2(vec![0.5, 0.0, 0.0, 0.0]);
        assert!(jaccard(&a, &fuzzy).is_err());
    }

    #[test]
    fn error_report_tracks_peaks() {
        let truth = grid2(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let recon = grid2(vec![0.0, 0.9, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let report = error_report(&recon, &truth, "test").unwrap();
        // truth argmax at index (1,0), recon at (0,1); spacing 1.0
        assert_eq!(report.peak_offset, [-1.0, 1.0, 0.0]);
        assert!((report.max_abs - 1.0).abs() < 1e-15);
        assert_eq!(report.meta, "test");
    }

    proptest! {
        #[test]
        fn relative_l2_obeys_the_triangle_inequality(
            a in proptest::collection::vec(-10.0_f64..10.0, 9),
            b in proptest::collection::vec(-10.0_f64..10.0, 9),
            t in proptest::collection::vec(-10.0_f64..10.0, 9)
                .prop_filter("reference must have mass", |t| t.iter().any(|v| v.abs() > 0.1)),
        ) {
            let ga = grid2(a.clone());
            let gb = grid2(b.clone());
            let gt = grid2(t.clone());
            // ||a - t|| <= ||a - b|| + ||b - t||, all divided by ||t||; the
            // middle term rides through as the grid (a - b + t) vs t
            let shifted: Vec<f64> =
                a.iter().zip(&b).zip(&t).map(|((x, y), z)| x - y + z).collect();
            let lhs = relative_l2(&ga, &gt).unwrap();
            let rhs = relative_l2(&grid2(shifted), &gt).unwrap() + relative_l2(&gb, &gt).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }
}
