use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use handpose::synth::{default_rig, generate_independent, generate_sequence};
use handpose::{solve_independent, track, Execution, FrameInput, HandModel, HandModels, PipelineConfig, SynthConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn independent_frames(model: &HandModel) -> Vec<FrameInput> {
    let cfg = SynthConfig {
        frames: 64,
        seed: 5,
        pixel_sigma: 1.0,
        ..SynthConfig::default()
    };
    generate_independent(model, &default_rig(true), &cfg, Execution::Parallel)
        .unwrap()
        .into_iter()
        .map(|(_, f)| f)
        .collect()
}

/// Eight hands with 32 frames each, interleaved as a multi-hand stream.
fn multi_hand_stream(model: &HandModel) -> Vec<FrameInput> {
    let hands: Vec<Vec<FrameInput>> = (0..8u64)
        .map(|h| {
            let cfg = SynthConfig {
                frames: 32,
                seed: 100 + h,
                pixel_sigma: 1.0,
                hand_id: format!("hand{h}"),
                ..SynthConfig::default()
            };
            generate_sequence(model, &default_rig(true), &cfg)
                .unwrap()
                .into_iter()
                .map(|(_, f)| f)
                .collect()
        })
        .collect();
    (0..32).flat_map(|i| hands.iter().map(move |h| h[i].clone())).collect()
}

fn bench(c: &mut Criterion) {
    let model = HandModel::default_left();
    let models = HandModels::from_model(model.clone());
    let rig = default_rig(true);
    let config = PipelineConfig::default();

    let frames = independent_frames(&model);
    let mut group = c.benchmark_group("solve_independent_64_frames");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_independent(&models, &rig, &frames, &config, exec))
        });
    }
    group.finish();

    let stream = multi_hand_stream(&model);
    let mut group = c.benchmark_group("track_8_hands_32_frames");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| track(&models, &rig, &stream, &config, exec))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench
}
criterion_main!(benches);
