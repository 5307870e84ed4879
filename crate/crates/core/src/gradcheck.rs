//! Runtime comparison of the dual-number Jacobian against central finite
//! differences, reported per tangent block.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::Rig;
use crate::dual::TANGENT_DIM;
use crate::error::{Error, Result};
use crate::kinematics::{HandModel, PoseParams};
use crate::objective::{Observation, Problem, SolverConfig};
use crate::par::{self, Execution};
use crate::solver::evaluate_jacobian;
use crate::synth::{observe_pose, sample_pose, SynthConfig};

/// `|a - b| / max(1, |b|)`: relative for entries above one, absolute below.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

/// Central differences of the residuals along each tangent direction.
pub fn central_difference_jacobian(
    model: &HandModel,
    rig: &Rig,
    observations: &[Observation],
    pose: &PoseParams,
    config: &SolverConfig,
    step: f64,
) -> Result<Vec<[f64; TANGENT_DIM]>> {
    let problem = Problem::new(model, rig, observations, config)?;
    let center = problem.residuals(pose);
    let mut rows = vec![[0.0; TANGENT_DIM]; center.values.len()];
    for k in 0..TANGENT_DIM {
        let mut delta = [0.0; TANGENT_DIM];
        delta[k] = step;
        let plus = problem.residuals(&pose.retract(&delta));
        delta[k] = -step;
        let minus = problem.residuals(&pose.retract(&delta));
        if plus.active_mask != center.active_mask || minus.active_mask != center.active_mask {
            return Err(Error::InvalidPose("active set changes within the difference step".into()));
        }
        for (row, (p, m)) in rows.iter_mut().zip(plus.values.iter().zip(&minus.values)) {
            row[k] = (p - m) / (2.0 * step);
        }
    }
    Ok(rows)
}

/// Largest relative error in the translation, rotation and articulation
/// columns.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockErrors {
    pub translation: f64,
    pub rotation: f64,
    pub articulation: f64,
}

impl BlockErrors {
    pub fn max(&self) -> f64 {
        self.translation.max(self.rotation).max(self.articulation)
    }

    fn merge(self, other: BlockErrors) -> BlockErrors {
        BlockErrors {
            translation: self.translation.max(other.translation),
            rotation: self.rotation.max(other.rotation),
            articulation: self.articulation.max(other.articulation),
        }
    }
}

pub fn compare(analytic: &[[f64; TANGENT_DIM]], numeric: &[[f64; TANGENT_DIM]]) -> BlockErrors {
    let mut out = BlockErrors::default();
    for (a, n) in analytic.iter().zip(numeric) {
        for k in 0..TANGENT_DIM {
            let e = relative_error(a[k], n[k]);
            let slot = match k {
                0..=2 => &mut out.translation,
                3..=5 => &mut out.rotation,
                _ => &mut out.articulation,
            };
            *slot = slot.max(e);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub step: f64,
    pub per_pose: Vec<BlockErrors>,
    pub worst: BlockErrors,
}

/// Checks the Jacobian at `poses` random in-limit poses against noisy,
/// partially confident observations of nearby poses.
pub fn run(
    model: &HandModel,
    rig: &Rig,
    poses: usize,
    seed: u64,
    step: f64,
    exec: Execution,
) -> Result<GradcheckReport> {
    let mut synth = SynthConfig {
        pixel_sigma: 3.0,
        ..SynthConfig::default()
    };
    synth.confidence.decay_px = 4.0;
    let ranges = synth.validate(model)?;
    let config = SolverConfig::default();
    let per_pose = par::map_range(exec, poses, |i| -> Result<BlockErrors> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let pose = sample_pose(&ranges, &mut rng);
        let observed = sample_pose(&ranges, &mut rng);
        let frame = observe_pose(model, rig, &observed, i as u64, &synth, &mut rng)?;
        let problem = Problem::new(model, rig, &frame.observations, &config)?;
        let analytic = evaluate_jacobian(&problem, &pose);
        let numeric = central_difference_jacobian(model, rig, &frame.observations, &pose, &config, step)?;
        Ok(compare(&analytic.rows, &numeric))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst = per_pose.iter().fold(BlockErrors::default(), |acc, e| acc.merge(*e));
    Ok(GradcheckReport { step, per_pose, worst })
}
