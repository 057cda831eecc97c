use com_core::backend::serialize_series;
use com_core::demo::{emg_to_force, normalize_series, MultimodalDemo, RawEmgTrace, RecordingManifest};
use com_core::dsl::{interpret, parse_program, Arg, InterpretOptions, Program, Stmt};
use com_core::plan::{longest_common_substring, parse_plan};
use com_core::sim::{ObjectState, RegistryLocator, SkillCall, Thresholds, WorldState};
use com_core::skills::{BoundArgs, TargetRef};
use com_core::{Direction, Hand, Skill};
use proptest::prelude::*;

fn emg_oracle(channels: &[Vec<f64>], sr: f64, fr: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            (0..channels[0].len())
                .filter(|&j| {
                    let t = j as f64 / sr;
                    t >= i as f64 / fr && t < (i + 1) as f64 / fr
                })
                .flat_map(|j| channels.iter().map(move |c| c[j]))
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
                .unwrap_or(0.0)
        })
        .collect()
}

fn lcs_oracle(a: &[u8], b: &[u8]) -> usize {
    (0..a.len())
        .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
        .map(|(i, j)| a[i..].iter().zip(&b[j..]).take_while(|(x, y)| x == y).count())
        .max()
        .unwrap_or(0)
}

const HANDS: [&str; 2] = ["left", "right"];
const OBJECTS: [&str; 5] = ["cup", "red_block", "lid", "drawer", "sponge"];

fn plan_line() -> impl Strategy<Value = String> {
    let hand = prop::sample::select(&HANDS[..]);
    let object = prop::sample::select(&OBJECTS[..]);
    let force = 0u8..=100;
    (0usize..9, hand, object, force, prop::bool::ANY, 1u32..720).prop_map(|(k, h, o, f, cw, deg)| {
        match k {
            0 => format!("Grasp({h}, {o}, {f})"),
            1 => format!("Release({h})"),
            2 => format!("Twist({h}, {}, {deg})", if cw { "clockwise" } else { "counterclockwise" }),
            3 => format!("Move_to({h}, {o}, {f})"),
            4 => format!("Insert({h}, {o}, {f})"),
            5 => format!("Push_towards({h}, {o}, {f})"),
            6 => format!("Hit({o}, {f})"),
            7 => format!("Press({h}, {o}, {f})"),
            _ => format!("Wipe({h}, {o})"),
        }
    })
}

fn arg() -> impl Strategy<Value = Arg> {
    prop_oneof![
        "[a-z_ '\\\\]{1,8}".prop_map(Arg::Str),
        (-1000i64..1000).prop_map(Arg::Int),
        "[a-z_]{1,8}".prop_map(|s| Arg::Find(vec![Arg::Str(s)])),
    ]
}

fn call() -> impl Strategy<Value = Stmt> {
    (prop::sample::select(&["Grasp", "Release", "Hit", "Twist"][..]), prop::collection::vec(arg(), 0..4))
        .prop_map(|(s, args)| Stmt::Call { skill: s.into(), args, line: 0 })
}

fn stmts(depth: u32) -> BoxedStrategy<Vec<Stmt>> {
    if depth == 0 {
        return prop::collection::vec(call(), 1..4).boxed();
    }
    let looped = (1u64..50, stmts(depth - 1)).prop_map(|(count, body)| Stmt::Loop { count, body, line: 0 });
    prop::collection::vec(prop_oneof![call(), looped], 1..4).boxed()
}

fn program() -> impl Strategy<Value = Program> {
    (prop::collection::vec(prop::sample::select(&["Grasp", "Hit", "Twist"][..]), 0..3), stmts(2)).prop_map(
        |(imports, body)| Program {
            imports: imports.into_iter().map(String::from).collect(),
            body,
        },
    )
}

/// `Hit('drum', f)` calls in loops; every call succeeds on the drum world.
fn drum_stmts(depth: u32) -> BoxedStrategy<Vec<Stmt>> {
    let hit = (0i64..=100).prop_map(|f| Stmt::Call {
        skill: "Hit".into(),
        args: vec![Arg::Str("drum".into()), Arg::Int(f)],
        line: 0,
    });
    if depth == 0 {
        return prop::collection::vec(hit, 1..4).boxed();
    }
    let looped = (1u64..6, drum_stmts(depth - 1)).prop_map(|(count, body)| Stmt::Loop { count, body, line: 0 });
    prop::collection::vec(prop_oneof![hit, looped], 1..4).boxed()
}

fn count_calls(body: &[Stmt]) -> u64 {
    body.iter()
        .map(|s| match s {
            Stmt::Call { .. } => 1,
            Stmt::Loop { count, body, .. } => count * count_calls(body),
        })
        .sum()
}

fn drum_world() -> WorldState {
    WorldState::new(Thresholds::default())
        .with_object("drum", ObjectState::at([0.5, 0.0, 0.0]))
        .with_gripper(Hand::Left, [0.3, 0.2, 0.1])
        .with_gripper(Hand::Right, [0.3, -0.2, 0.1])
}

fn skill_call() -> impl Strategy<Value = SkillCall> {
    const SKILLS: [Skill; 6] = [Skill::Grasp, Skill::Release, Skill::Twist, Skill::MoveTo, Skill::Insert, Skill::PushTowards];
    (
        prop::sample::select(&SKILLS[..]),
        prop::sample::select(&Hand::BOTH[..]),
        prop::option::of(prop::sample::select(&["cap", "bottle", "plug", "strip"][..])),
        0i64..=100,
        prop::bool::ANY,
    )
        .prop_map(|(skill, hand, target, force, cw)| SkillCall {
            skill,
            args: BoundArgs {
                hand: Some(hand),
                target: target.map(|t| TargetRef::Name(t.into())),
                direction: Some(if cw { Direction::Clockwise } else { Direction::Counterclockwise }),
                degrees: Some(90.0),
                force: Some(force),
            },
        })
}

fn cluttered_world() -> WorldState {
    WorldState::new(Thresholds::default())
        .with_object("cap", ObjectState::at([0.5, 0.0, 0.0]))
        .with_object("bottle", ObjectState::at([0.5, 0.03, 0.0]))
        .with_object("plug", ObjectState::at([0.3, 0.0, 0.0]))
        .with_object("strip", ObjectState::at([0.32, 0.0, 0.0]))
        .with_gripper(Hand::Left, [0.5, 0.0, 0.0])
        .with_gripper(Hand::Right, [0.3, 0.0, 0.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emg_matches_window_max(
        n in 2usize..40,
        extra in 0usize..10,
        seed in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let (sr, fr) = (200.0, 30.0);
        let len = (n as f64 / fr * sr).ceil() as usize + extra;
        let channels: Vec<Vec<f64>> = (0..8)
            .map(|c| (0..len).map(|j| ((j * 7 + c * 13) as f64 * seed[c]).sin().abs()).collect())
            .collect();
        let emg = RawEmgTrace::new(channels.clone(), sr).unwrap();
        prop_assert_eq!(emg_to_force(&emg, fr, n).unwrap().values, emg_oracle(&channels, sr, fr, n));
    }

    #[test]
    fn normalize_spans_unit_interval(values in prop::collection::vec(-1e6f64..1e6, 1..100)) {
        let out = normalize_series(&values).unwrap();
        prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            prop_assert_eq!(out.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(out.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        } else {
            prop_assert!(out.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn manifest_round_trips(forces in prop::collection::vec(0.0f64..1.0, 2..30), rate in 1.0f64..60.0) {
        let frames: Vec<serde_json::Value> = forces
            .iter()
            .enumerate()
            .map(|(i, f)| serde_json::json!({
                "index": i, "timestamp_s": i as f64 / rate, "image": format!("{i:04}.png"), "force": f
            }))
            .collect();
        let manifest: RecordingManifest = serde_json::from_value(serde_json::json!({
            "frame_rate_hz": rate, "image_dir": "img", "frames": frames, "force_source": "precomputed"
        })).unwrap();
        let demo = MultimodalDemo::from_manifest(manifest).unwrap();
        let again = MultimodalDemo::from_manifest(demo.to_manifest()).unwrap();
        prop_assert_eq!(again, demo);
    }

    #[test]
    fn serialized_series_within_half_cent(values in prop::collection::vec(-10.0f64..10.0, 1..20)) {
        let text = serialize_series("force", &values).unwrap();
        let body = text.strip_prefix("force: ").unwrap();
        let parsed: Vec<f64> = body.split(", ").map(|s| s.parse().unwrap()).collect();
        prop_assert_eq!(parsed.len(), values.len());
        for (p, v) in parsed.iter().zip(&values) {
            prop_assert!((p - v).abs() <= 0.005 + 1e-12, "{} vs {}", p, v);
        }
    }

    #[test]
    fn similarity_matches_lcs_oracle(
        a in prop::collection::vec(0u8..4, 0..30),
        b in prop::collection::vec(0u8..4, 0..30),
    ) {
        prop_assert_eq!(longest_common_substring(&a, &b), lcs_oracle(&a, &b));
    }

    #[test]
    fn plan_render_is_a_fixed_point(lines in prop::collection::vec(plan_line(), 1..12)) {
        let first = parse_plan(&lines.join("\n")).unwrap();
        prop_assert!(first.diagnostics.is_empty(), "{:?}", first.diagnostics);
        let rendered = first.plan.render();
        let second = parse_plan(&rendered).unwrap();
        prop_assert_eq!(&second.plan, &first.plan);
        prop_assert_eq!(second.plan.render(), rendered);
    }

    #[test]
    fn dsl_print_is_a_fixed_point(program in program()) {
        let text = program.to_string();
        let parsed = parse_program(&text).unwrap();
        prop_assert_eq!(&parsed, &program);
        prop_assert_eq!(parsed.to_string(), text);
    }

    #[test]
    fn unrolled_calls_match_counter(body in drum_stmts(2)) {
        let program = Program { imports: vec![], body };
        let expected = count_calls(&program.body);
        prop_assert_eq!(program.unrolled_len(), expected as u128);
        let mut world = drum_world();
        let run = interpret(&program, &mut world, &InterpretOptions::default()).unwrap();
        prop_assert_eq!(run.trace.events.len() as u64, expected);
        let steps: Vec<usize> = run.trace.events.iter().map(|e| e.step).collect();
        prop_assert!(steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interpretation_is_deterministic(body in drum_stmts(2)) {
        let program = Program { imports: vec![], body };
        let options = InterpretOptions::default();
        let (mut w1, mut w2) = (drum_world(), drum_world());
        let a = interpret(&program, &mut w1, &options).unwrap();
        let b = interpret(&program, &mut w2, &options).unwrap();
        prop_assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
        prop_assert_eq!(w1, w2);
    }

    #[test]
    fn attachments_stay_consistent(calls in prop::collection::vec(skill_call(), 1..30)) {
        let mut world = cluttered_world();
        for (step, call) in calls.iter().enumerate() {
            let before = world.clone();
            let event = world.apply(call, step, &RegistryLocator);
            prop_assert!(world.attachment_consistent(), "after {}", event);
            if event.outcome != com_core::sim::Outcome::Ok {
                prop_assert!(event.deltas.is_empty());
                prop_assert_eq!(&world, &before);
            }
        }
    }
}
