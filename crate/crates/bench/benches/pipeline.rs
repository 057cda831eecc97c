use std::hint::black_box;

use com_core::demo::{emg_to_force, RawEmgTrace};
use com_core::dsl::{interpret, parse_program, InterpretOptions};
use com_core::plan::{parse_plan, similarity};
use com_core::sim::{ObjectState, Thresholds, WorldState};
use com_core::Hand;
use criterion::{criterion_group, criterion_main, Criterion};

fn signals(c: &mut Criterion) {
    let channels: Vec<Vec<f64>> = (0..8)
        .map(|k| (0..2000).map(|j| ((j * 31 + k * 7) % 97) as f64 / 97.0).collect())
        .collect();
    let emg = RawEmgTrace::new(channels, 200.0).unwrap();
    c.bench_function("emg_to_force 10 s @ 60 Hz", |b| {
        b.iter(|| emg_to_force(black_box(&emg), 60.0, 600).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let line = |i: usize| format!("Grasp(right, item_{}, {})\nTwist(right, clockwise, 90)", i % 7, i % 100);
    let a: String = (0..200).map(line).collect::<Vec<_>>().join("\n");
    let b: String = (50..250).map(line).collect::<Vec<_>>().join("\n");
    let (pa, pb) = (parse_plan(&a).unwrap().plan, parse_plan(&b).unwrap().plan);
    c.bench_function("similarity 400-step plans", |bench| {
        bench.iter(|| similarity(black_box(&pa), black_box(&pb)).unwrap())
    });
}

fn programs(c: &mut Criterion) {
    let source = "from skills import Hit\nfor _ in range(20):\n    for _ in range(40):\n        Hit('drum', 80)\n        Hit('drum', 20)\n";
    let world = WorldState::new(Thresholds::default())
        .with_object("drum", ObjectState::at([0.5, 0.0, 0.0]))
        .with_gripper(Hand::Left, [0.3, 0.2, 0.1])
        .with_gripper(Hand::Right, [0.3, -0.2, 0.1]);
    let options = InterpretOptions { max_unrolled: 10_000, ..InterpretOptions::default() };
    c.bench_function("parse and interpret 1600 calls", |b| {
        b.iter(|| {
            let program = parse_program(black_box(source)).unwrap();
            let mut w = world.clone();
            interpret(&program, &mut w, &options).unwrap()
        })
    });
}

criterion_group!(benches, signals, metrics, programs);
criterion_main!(benches);
