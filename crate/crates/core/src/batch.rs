//! Multi-frame drivers: independent per-frame solves and per-hand tracks.

use std::collections::HashMap;

use crate::camera::Rig;
use crate::error::Result;
use crate::kinematics::{mirror_model, HandModel, Handedness};
use crate::par::{self, Execution};
use crate::pipeline::{estimate_frame, route_handedness, FrameInput, PipelineConfig, TrackState};
use crate::solver::SolveResult;

/// Left and right skeletons; one is usually the mirror of the other.
#[derive(Clone, Debug, PartialEq)]
pub struct HandModels {
    pub left: HandModel,
    pub right: HandModel,
}

impl HandModels {
    pub fn from_model(model: HandModel) -> Self {
        let mirrored = mirror_model(&model);
        match model.handedness() {
            Handedness::Left => HandModels {
                left: model,
                right: mirrored,
            },
            Handedness::Right => HandModels {
                left: mirrored,
                right: model,
            },
        }
    }

    pub fn route(&self, frame: &FrameInput) -> Result<&HandModel> {
        route_handedness(&self.left, &self.right, frame)
    }
}

#[derive(Debug)]
pub struct FrameOutcome {
    pub frame_id: u64,
    pub hand_id: String,
    pub handedness: Option<Handedness>,
    pub result: Result<SolveResult>,
}

fn outcome(frame: &FrameInput, result: Result<SolveResult>) -> FrameOutcome {
    FrameOutcome {
        frame_id: frame.frame_id,
        hand_id: frame.hand_id().unwrap_or_default().to_string(),
        handedness: frame.handedness(),
        result,
    }
}

/// Solves every frame on its own from a cold start.
pub fn solve_independent(
    models: &HandModels,
    rig: &Rig,
    frames: &[FrameInput],
    config: &PipelineConfig,
    exec: Execution,
) -> Vec<FrameOutcome> {
    par::map(exec, frames, |frame| {
        let result = models
            .route(frame)
            .and_then(|model| estimate_frame(model, rig, frame, &TrackState::new(), config))
            .map(|(r, _)| r);
        outcome(frame, result)
    })
}

/// Tracks each hand through its frames in input order; different hands run
/// concurrently. Outcomes come back in input order.
pub fn track(
    models: &HandModels,
    rig: &Rig,
    frames: &[FrameInput],
    config: &PipelineConfig,
    exec: Execution,
) -> Vec<FrameOutcome> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, f) in frames.iter().enumerate() {
        let id = f.hand_id().unwrap_or_default();
        groups
            .entry(id)
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(i);
    }
    let tracks: Vec<Vec<usize>> = order.iter().map(|id| groups.remove(id).unwrap_or_default()).collect();

    let solved = par::map(exec, &tracks, |indices| {
        let mut state = TrackState::new();
        indices
            .iter()
            .map(|&i| {
                let frame = &frames[i];
                let result = models
                    .route(frame)
                    .and_then(|model| estimate_frame(model, rig, frame, &state, config));
                let result = match result {
                    Ok((r, next)) => {
                        state = next;
                        Ok(r)
                    }
                    Err(e) => Err(e),
                };
                (i, outcome(frame, result))
            })
            .collect::<Vec<_>>()
    });

    let mut slots: Vec<Option<FrameOutcome>> = (0..frames.len()).map(|_| None).collect();
    for (i, o) in solved.into_iter().flatten() {
        slots[i] = Some(o);
    }
    slots.into_iter().map(|o| o.expect("every frame solved once")).collect()
}
