//! 3D accuracy metrics: per-frame mean joint error, threshold curves,
//! per-axis mean absolute error and a translation/scale aligned error.

use crate::error::{Error, Result};
use crate::geometry::{self, Vec3};
use crate::kinematics::{JointSet3D, NUM_KEYPOINTS};
use crate::par::{self, Execution};

/// Mean Euclidean distance between corresponding keypoints, mm.
pub fn mean_joint_error(estimated: &JointSet3D, truth: &JointSet3D) -> f64 {
    let total: f64 = estimated
        .points
        .iter()
        .zip(&truth.points)
        .map(|(a, b)| geometry::distance(*a, *b))
        .sum();
    total / NUM_KEYPOINTS as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub threshold_mm: f64,
    pub fraction: f64,
}

/// For each threshold, the fraction of frames whose error is at most it.
pub fn threshold_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<CurvePoint>> {
    curve_with_failures(errors, 0, thresholds)
}

/// Like [`threshold_curve`], counting `failed` extra frames that never
/// fall below any threshold.
fn curve_with_failures(errors: &[f64], failed: usize, thresholds: &[f64]) -> Result<Vec<CurvePoint>> {
    let total = errors.len() + failed;
    if total == 0 {
        return Err(Error::Metric("no frames".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::Metric(format!("error {e} is not a finite non-negative value")));
    }
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::Metric("NaN threshold".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&e| e <= t);
            CurvePoint {
                threshold_mm: t,
                fraction: below as f64 / total as f64,
            }
        })
        .collect())
}

/// 0, 5, ..., 100 mm.
pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| 5.0 * i as f64).collect()
}

/// Mean absolute error along each world axis over all frames and joints.
pub fn per_axis_mae(estimated: &[JointSet3D], truth: &[JointSet3D]) -> Result<Vec3> {
    if estimated.len() != truth.len() {
        return Err(Error::Metric(format!(
            "{} estimated frames vs {} ground-truth frames",
            estimated.len(),
            truth.len()
        )));
    }
    if estimated.is_empty() {
        return Err(Error::Metric("no frames".into()));
    }
    let mut sum = [0.0; 3];
    for (e, t) in estimated.iter().zip(truth) {
        let frame = axis_error(e, t);
        for k in 0..3 {
            sum[k] += frame[k];
        }
    }
    let n = estimated.len() as f64;
    Ok(sum.map(|s| s / n))
}

fn axis_error(estimated: &JointSet3D, truth: &JointSet3D) -> Vec3 {
    let mut sum = [0.0; 3];
    for (a, b) in estimated.points.iter().zip(&truth.points) {
        for k in 0..3 {
            sum[k] += (a[k] - b[k]).abs();
        }
    }
    sum.map(|s| s / NUM_KEYPOINTS as f64)
}

/// Mean joint error after moving the estimate's wrist onto the true wrist
/// and scaling it by the ratio of wrist-centered point-set norms. Rotation
/// is not removed.
pub fn aligned_error(estimated: &JointSet3D, truth: &JointSet3D) -> Result<f64> {
    let center = |s: &JointSet3D| s.points.map(|p| geometry::sub(p, s.points[0]));
    let (e, t) = (center(estimated), center(truth));
    let set_norm = |s: &[Vec3; NUM_KEYPOINTS]| s.iter().map(|p| geometry::dot(*p, *p)).sum::<f64>().sqrt();
    let (ne, nt) = (set_norm(&e), set_norm(&t));
    if ne == 0.0 || nt == 0.0 {
        return Err(Error::Metric("degenerate point set with zero extent".into()));
    }
    let scale = nt / ne;
    let total: f64 = e
        .iter()
        .zip(&t)
        .map(|(a, b)| geometry::distance(geometry::scale(*a, scale), *b))
        .sum();
    Ok(total / NUM_KEYPOINTS as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMetrics {
    pub frame_id: u64,
    pub hand_id: String,
    pub mean_error_mm: f64,
    pub aligned_error_mm: f64,
    pub axis_error_mm: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub threshold_curve: Vec<CurvePoint>,
    pub aligned_threshold_curve: Vec<CurvePoint>,
    pub per_axis_mae: Vec3,
    pub mean_error_mm: f64,
    pub aligned_mean_error_mm: f64,
    /// Frames the solver could not produce a pose for; they count against
    /// every threshold but not toward the means.
    pub failed_frames: usize,
    pub frames: Vec<FrameMetrics>,
}

/// One evaluated frame: estimate (if any) and ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalFrame {
    pub frame_id: u64,
    pub hand_id: String,
    pub estimated: Option<JointSet3D>,
    pub truth: JointSet3D,
}

pub fn evaluate(frames: &[EvalFrame], thresholds: &[f64], exec: Execution) -> Result<MetricsReport> {
    if frames.is_empty() {
        return Err(Error::Metric("no frames".into()));
    }
    let solved: Vec<(&EvalFrame, &JointSet3D)> = frames
        .iter()
        .filter_map(|f| f.estimated.as_ref().map(|e| (f, e)))
        .collect();
    let failed_frames = frames.len() - solved.len();
    if solved.is_empty() {
        return Err(Error::Metric("no solved frames".into()));
    }
    let per_frame = par::map(exec, &solved, |(f, est)| {
        Ok(FrameMetrics {
            frame_id: f.frame_id,
            hand_id: f.hand_id.clone(),
            mean_error_mm: mean_joint_error(est, &f.truth),
            aligned_error_mm: aligned_error(est, &f.truth)?,
            axis_error_mm: axis_error(est, &f.truth),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = per_frame.iter().map(|m| m.mean_error_mm).collect();
    let aligned: Vec<f64> = per_frame.iter().map(|m| m.aligned_error_mm).collect();
    let n = per_frame.len() as f64;
    let est: Vec<JointSet3D> = solved.iter().map(|(_, e)| **e).collect();
    let truth: Vec<JointSet3D> = solved.iter().map(|(f, _)| f.truth).collect();
    Ok(MetricsReport {
        threshold_curve: curve_with_failures(&errors, failed_frames, thresholds)?,
        aligned_threshold_curve: curve_with_failures(&aligned, failed_frames, thresholds)?,
        per_axis_mae: per_axis_mae(&est, &truth)?,
        mean_error_mm: errors.iter().sum::<f64>() / n,
        aligned_mean_error_mm: aligned.iter().sum::<f64>() / n,
        failed_frames,
        frames: per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(f: impl Fn(usize) -> Vec3) -> JointSet3D {
        JointSet3D {
            points: std::array::from_fn(f),
        }
    }

    fn hand() -> JointSet3D {
        set(|i| [i as f64 * 3.0 - 10.0, (i * i) as f64 * 0.5, 400.0 + (i % 4) as f64 * 7.0])
    }

    #[test]
    fn curve_examples() {
        let c = threshold_curve(&[10.0, 20.0, 30.0], &[25.0, 0.0, f64::INFINITY]).unwrap();
        assert_eq!(c[0].fraction, 2.0 / 3.0);
        assert_eq!(c[1].fraction, 0.0);
        assert_eq!(c[2].fraction, 1.0);
        assert!(threshold_curve(&[], &[1.0]).is_err());
        assert!(threshold_curve(&[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        let t = hand();
        assert_eq!(per_axis_mae(&[t], &[t]).unwrap(), [0.0; 3]);
        let shifted = t.map(|p| [p[0] + 1.0, p[1] - 2.0, p[2] + 3.0]);
        let mae = per_axis_mae(&[shifted, shifted], &[t, t]).unwrap();
        for (k, want) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((mae[k] - want).abs() < 1e-12);
        }
        assert!(per_axis_mae(&[t], &[t, t]).is_err());
    }

    #[test]
    fn aligned_examples() {
        let t = hand();
        let scaled = t.map(|p| [1.3 * p[0] + 5.0, 1.3 * p[1] - 7.0, 1.3 * p[2] + 11.0]);
        assert!(aligned_error(&scaled, &t).unwrap() < 1e-9);

        let q = crate::geometry::Quat::from_axis_angle([0.0, 0.0, 1.0], 10f64.to_radians());
        let rotated = t.map(|p| geometry::add(q.rotate(geometry::sub(p, t.points[0])), t.points[0]));
        assert!(aligned_error(&rotated, &t).unwrap() > 0.1);

        let flat = set(|_| [1.0, 2.0, 3.0]);
        assert!(aligned_error(&flat, &t).is_err());
    }

    #[test]
    fn evaluate_counts_failures() {
        let t = hand();
        let off = t.map(|p| [p[0] + 4.0, p[1], p[2]]);
        let frames = vec![
            EvalFrame { frame_id: 0, hand_id: "h".into(), estimated: Some(t), truth: t },
            EvalFrame { frame_id: 1, hand_id: "h".into(), estimated: Some(off), truth: t },
            EvalFrame { frame_id: 2, hand_id: "h".into(), estimated: None, truth: t },
        ];
        let r = evaluate(&frames, &[1.0, 10.0], Execution::Sequential).unwrap();
        assert_eq!(r.failed_frames, 1);
        assert_eq!(r.threshold_curve[0].fraction, 1.0 / 3.0);
        assert_eq!(r.threshold_curve[1].fraction, 2.0 / 3.0);
        assert!((r.mean_error_mm - 2.0).abs() < 1e-12);
        assert!((r.per_axis_mae[0] - 2.0).abs() < 1e-12);
        assert_eq!(r.aligned_threshold_curve[0].fraction, 2.0 / 3.0);
    }
}
