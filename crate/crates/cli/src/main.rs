//! `handpose`: synthesize datasets, fit hand poses, score them, and check
//! the solver's derivatives.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use handpose::gradcheck;
use handpose::io::{self, Dataset, FrameRecord, PoseRecord};
use handpose::metrics::{default_thresholds, EvalFrame};
use handpose::synth::{default_rig, generate_independent, generate_sequence};
use handpose::{
    solve_independent, track, Execution, FrameInput, HandModel, HandModels, Handedness, MetricsReport,
    PipelineConfig, Rig, SynthConfig,
};

#[derive(Parser)]
#[command(name = "handpose", version, about = "Multi-view 3D hand pose estimation from 2D keypoints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Fit poses to every frame of a dataset directory.
    Solve(SolveArgs),
    /// Score solved poses against ground truth.
    Eval(EvalArgs),
    /// Compare the analytic Jacobian with finite differences.
    Gradcheck(GradcheckArgs),
    /// Write the built-in hand model to a file.
    Model(ModelArgs),
}

#[derive(Args)]
struct Common {
    /// Hand model file (left or right). Defaults to the built-in left hand.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Camera rig file.
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn rig(&self) -> Result<Option<Rig>> {
        self.rig.as_deref().map(|p| io::read_rig(p).map_err(Into::into)).transpose()
    }

    fn model(&self) -> Result<Option<HandModel>> {
        self.model.as_deref().map(|p| io::read_model(p).map_err(Into::into)).transpose()
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Synthetic data configuration. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory to write.
    #[arg(long)]
    output: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configuration's frame count.
    #[arg(long)]
    frames: Option<usize>,
    /// Overrides the configuration's pixel noise.
    #[arg(long)]
    sigma: Option<f64>,
    /// Use the built-in two-camera rig instead of the single camera.
    #[arg(long)]
    stereo: bool,
    /// Sample every frame independently instead of a random walk.
    #[arg(long)]
    independent: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset directory.
    #[arg(long)]
    input: PathBuf,
    /// Directory for the poses table.
    #[arg(long)]
    output: PathBuf,
    /// Minimum keypoint confidence.
    #[arg(long)]
    threshold: Option<f64>,
    /// Solve every frame from a cold start.
    #[arg(long)]
    no_tracking: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `solve`.
    #[arg(long)]
    input: PathBuf,
    /// Dataset directory with ground truth.
    #[arg(long)]
    truth: PathBuf,
    /// Directory for the metric tables.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 50)]
    poses: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Central-difference step along each tangent direction.
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    /// Use the built-in two-camera rig when no rig file is given.
    #[arg(long)]
    stereo: bool,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "left")]
    handedness: Handedness,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Model(a) => model(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => io::read_synth_config(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(frames) = args.frames {
        config.frames = frames;
    }
    if let Some(sigma) = args.sigma {
        config.pixel_sigma = sigma;
    }
    let model = args.common.model()?.unwrap_or_else(HandModel::default_left);
    let rig = args.common.rig()?.unwrap_or_else(|| default_rig(args.stereo));
    let frames = if args.independent {
        generate_independent(&model, &rig, &config, args.common.exec())?
    } else {
        generate_sequence(&model, &rig, &config)?
    };
    let records = io::records_from_synthetic(&model, &frames)?;
    let n = records.len();
    io::write_dataset(
        &args.output,
        &Dataset {
            rig,
            model: Some(model),
            records,
        },
    )?;
    println!("wrote {n} frames to {}", args.output.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let dataset = load_dataset(&args.input, args.common.rig()?)?;
    if dataset.records.is_empty() {
        bail!("no frames in {}", args.input.display());
    }
    let model = match args.common.model()? {
        Some(m) => m,
        None => dataset.model.clone().unwrap_or_else(HandModel::default_left),
    };
    let mut config = PipelineConfig {
        tracking: !args.no_tracking,
        ..PipelineConfig::default()
    };
    if let Some(t) = args.threshold {
        config.solver.confidence_threshold = t;
    }
    if let Some(n) = args.max_iterations {
        config.solver.max_iterations = n;
    }
    config.validate()?;

    let frames: Vec<FrameInput> = dataset.records.iter().map(FrameRecord::to_frame_input).collect();
    let models = HandModels::from_model(model);
    let outcomes = if config.tracking {
        track(&models, &dataset.rig, &frames, &config, args.common.exec())
    } else {
        solve_independent(&models, &dataset.rig, &frames, &config, args.common.exec())
    };

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for (outcome, rec) in outcomes.iter().zip(&dataset.records) {
        records.push(match &outcome.result {
            Ok(r) => PoseRecord::from_result(rec.frame_id, &rec.hand_id, rec.handedness, r),
            Err(e) => {
                failed += 1;
                eprintln!("frame {} hand `{}`: {e}", rec.frame_id, rec.hand_id);
                PoseRecord::failed(rec.frame_id, &rec.hand_id, rec.handedness)
            }
        });
    }
    std::fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    io::write_poses(&io::poses_path(&args.output), &records)?;

    let converged = outcomes
        .iter()
        .filter(|o| matches!(&o.result, Ok(r) if r.termination.is_converged()))
        .count();
    println!(
        "solved {} frames: {converged} converged, {failed} failed; poses in {}",
        records.len(),
        io::poses_path(&args.output).display()
    );
    Ok(())
}

fn load_dataset(dir: &Path, rig: Option<Rig>) -> Result<Dataset> {
    if !dir.join(io::OBSERVATIONS_FILE).is_file() {
        bail!("no frames: {} has no {}", dir.display(), io::OBSERVATIONS_FILE);
    }
    Ok(match rig {
        Some(rig) => io::read_dataset_with_rig(dir, rig)?,
        None => io::read_dataset(dir)?,
    })
}

fn eval(args: EvalArgs) -> Result<()> {
    let poses = io::read_poses(&io::poses_path(&args.input))?;
    let truth = io::read_dataset(&args.truth)?;
    if poses.is_empty() {
        bail!("no frames in {}", io::poses_path(&args.input).display());
    }
    if poses.len() != truth.records.len() {
        let i = poses.len().min(truth.records.len());
        match (poses.get(i), truth.records.get(i)) {
            (Some(p), _) => bail!("frame {} hand `{}` has no ground-truth record", p.frame_id, p.hand_id),
            (_, Some(t)) => bail!("frame {} hand `{}` has no solved pose", t.frame_id, t.hand_id),
            _ => unreachable!("lengths differ"),
        }
    }
    let mut frames = Vec::with_capacity(poses.len());
    for (p, t) in poses.iter().zip(&truth.records) {
        if (p.frame_id, &p.hand_id) != (t.frame_id, &t.hand_id) {
            bail!(
                "frame id mismatch: poses have frame {} hand `{}` where ground truth has frame {} hand `{}`",
                p.frame_id,
                p.hand_id,
                t.frame_id,
                t.hand_id
            );
        }
        let Some(truth) = t.truth else {
            bail!("frame {} hand `{}` has no ground truth", t.frame_id, t.hand_id);
        };
        frames.push(EvalFrame {
            frame_id: p.frame_id,
            hand_id: p.hand_id.clone(),
            estimated: p.estimate().copied(),
            truth,
        });
    }
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let report = handpose::metrics::evaluate(&frames, &default_thresholds(), exec)?;
    io::write_metrics(&args.output, &report)?;
    print_summary(&report);
    Ok(())
}

fn print_summary(report: &MetricsReport) {
    let [x, y, z] = report.per_axis_mae;
    println!("frames            {}", report.frames.len() + report.failed_frames);
    println!("failed            {}", report.failed_frames);
    println!("mean error        {:.3} mm", report.mean_error_mm);
    println!("aligned error     {:.3} mm", report.aligned_mean_error_mm);
    println!("per-axis MAE      x {x:.3}  y {y:.3}  z {z:.3} mm");
    for (c, a) in report.threshold_curve.iter().zip(&report.aligned_threshold_curve) {
        if c.threshold_mm % 10.0 == 0.0 {
            println!(
                "  <= {:>5.1} mm     {:>6.1}%   aligned {:>6.1}%",
                c.threshold_mm,
                100.0 * c.fraction,
                100.0 * a.fraction
            );
        }
    }
}

fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let model = args.common.model()?.unwrap_or_else(HandModel::default_left);
    let rig = args.common.rig()?.unwrap_or_else(|| default_rig(args.stereo));
    let report = gradcheck::run(&model, &rig, args.poses, args.seed, args.step, args.common.exec())?;
    let w = report.worst;
    println!("poses             {}", report.per_pose.len());
    println!("step              {:e}", report.step);
    println!("translation       {:.3e}", w.translation);
    println!("rotation          {:.3e}", w.rotation);
    println!("articulation      {:.3e}", w.articulation);
    if w.max() >= args.tolerance {
        bail!("worst relative error {:.3e} exceeds {:.1e}", w.max(), args.tolerance);
    }
    println!("ok (< {:.1e})", args.tolerance);
    Ok(())
}

fn model(args: ModelArgs) -> Result<()> {
    let model = HandModel::default_for(args.handedness);
    io::write_model(&args.output, &model)?;
    println!("wrote {} hand model to {}", args.handedness, args.output.display());
    Ok(())
}
