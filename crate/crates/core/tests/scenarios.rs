use visionweb::agents::{Agent, NoisyOracleAgent, OracleAgent, PrematureClickerAgent};
use visionweb::distill::{
    collect_stage2, eval_move_or_click, gen_stage1_samples, label_action, plan_stage1_sample, Stage1Config,
    Stage2Config,
};
use visionweb::env::{hit_test, Action, TaskSpec, Viewport};
use visionweb::protocol::{texts, Part, Role};
use visionweb::runner::{episode_seed, initial_cursor_for, run_benchmark, success_rate};
use visionweb::synthetic::{generate_tasks, GenSpec, SpanF, SpanU, SyntheticBackend};

#[test]
fn thousand_tasks_respect_the_distance_range() {
    let spec = GenSpec {
        seed: 1234,
        cursor_distance: SpanF::new(200.0, 400.0),
        ..GenSpec::default()
    };
    let tasks = generate_tasks(&spec, 1000).unwrap();
    assert_eq!(tasks.len(), 1000);
    for g in &tasks {
        let b = g.task.target_bbox;
        let cx = b.x as f64 + b.w as f64 / 2.0;
        let cy = b.y as f64 + b.h as f64 / 2.0;
        let d = ((g.initial_cursor.x - cx).powi(2) + (g.initial_cursor.y - cy).powi(2)).sqrt();
        assert!((200.0 - 1e-9..=400.0 + 1e-9).contains(&d), "{}: distance {d}", g.task.task_id);
        assert!(spec.viewport.contains(g.initial_cursor.x, g.initial_cursor.y));
    }
}

#[test]
fn zero_distance_starts_on_the_center() {
    let spec = GenSpec {
        seed: 5,
        cursor_distance: SpanF::new(0.0, 0.0),
        ..GenSpec::default()
    };
    for g in generate_tasks(&spec, 50).unwrap() {
        let b = g.task.target_bbox;
        assert_eq!(g.initial_cursor.point(), (b.x as f64 + b.w as f64 / 2.0, b.y as f64 + b.h as f64 / 2.0));
        assert_eq!(label_action(g.initial_cursor.point(), &b), Action::MouseClick);
    }
}

fn big_target_tasks(seed: u64, n: u64) -> (Viewport, Vec<TaskSpec>) {
    let vp = Viewport::new(400, 300).unwrap();
    let spec = GenSpec {
        seed,
        viewport: vp,
        element_count: SpanU::new(1, 3),
        target_width: SpanU::new(120, 220),
        target_height: SpanU::new(60, 160),
        ..GenSpec::default()
    };
    (vp, generate_tasks(&spec, n).unwrap().into_iter().map(|g| g.task).collect())
}

#[test]
fn premature_clicker_scores_the_share_of_lucky_starts() {
    let (vp, tasks) = big_target_tasks(17, 40);
    let mut backend = SyntheticBackend::new(vp);
    let config = visionweb::protocol::RunConfig {
        repetitions: 5,
        seed: 99,
        ..Default::default()
    };
    let run = run_benchmark(&mut backend, &mut PrematureClickerAgent::new(), &tasks, &config, None).unwrap();
    assert!(run.exclusions.is_empty());

    // brute-force count over the same seeded starting positions
    let mut lucky = 0u64;
    for (i, t) in tasks.iter().enumerate() {
        for rep in 0..config.repetitions {
            let c = initial_cursor_for(episode_seed(config.seed, i as u64, rep), vp);
            lucky += hit_test(&t.target_bbox, (c.x, c.y)) as u64;
        }
    }
    let s = success_rate(&run.records).unwrap();
    assert_eq!(s.n, 200);
    assert_eq!(s.successes, lucky);
    assert!(lucky > 0, "fixture should produce some lucky starts");
}

#[test]
fn stage1_class_balance_tracks_click_fraction() {
    let cfg = Stage1Config::balanced(GenSpec {
        seed: 31,
        cursor_distance: SpanF::new(0.0, 600.0),
        ..GenSpec::default()
    });
    let n = 10_000u64;
    let mut clicks = 0u64;
    for i in 0..n {
        let (g, cursor) = plan_stage1_sample(&cfg, i).unwrap();
        clicks += hit_test(&g.task.target_bbox, cursor) as u64;
    }
    let share = clicks as f64 / n as f64;
    assert!((share - 0.5).abs() <= 0.02, "click share {share}");
}

#[test]
fn always_click_accuracy_equals_click_share() {
    let cfg = Stage1Config::balanced(GenSpec {
        seed: 8,
        ..GenSpec::default()
    });
    let samples = gen_stage1_samples(&cfg, 120).unwrap();
    let clicks = samples
        .iter()
        .filter(|s| s.meta.hint.unwrap().correct_action == Action::MouseClick)
        .count();
    let acc = eval_move_or_click(&mut PrematureClickerAgent::new(), &samples);
    assert_eq!(acc, clicks as f64 / 120.0);
    assert!((acc - 0.5).abs() < 0.15);
    assert_eq!(eval_move_or_click(&mut OracleAgent::new(), &samples), 1.0);
}

#[test]
fn stage2_emits_one_sample_per_step_of_successful_episodes() {
    let (vp, tasks) = big_target_tasks(3, 12);
    let cfg = Stage2Config {
        step_quota: 4,
        repetitions: 2,
        seed: 11,
        ..Stage2Config::default()
    };
    let make = || NoisyOracleAgent::new(70.0, 5);

    let mut backend = SyntheticBackend::new(vp);
    let records = run_benchmark(&mut backend, &mut make(), &tasks, &cfg.teacher_config(), None)
        .unwrap()
        .records;
    let expected: u32 = records.iter().filter(|r| r.success).map(|r| r.steps_used).sum();
    assert!(records.iter().any(|r| !r.success), "fixture should include failures");

    let samples = collect_stage2(&mut backend, &mut make(), &tasks, &cfg).unwrap();
    assert_eq!(samples.len() as u32, expected);

    let guidance = Part::Text(texts().guidance.clone());
    for s in &samples {
        assert!(s.student_messages.iter().all(|m| !m.parts.contains(&guidance)));
        assert!(s.teacher_messages.iter().any(|m| m.parts.contains(&guidance)));
        assert!(s.teacher_messages.iter().all(|m| m.role != Role::Assistant));
        let history = s.student_messages.iter().filter(|m| m.role == Role::Assistant).count();
        assert_eq!(history as u32, s.meta.step);
    }
    assert!(samples.iter().any(|s| s.meta.step == 0));
}

#[test]
fn infra_failures_are_tallied_separately() {
    struct Flaky(u32);
    impl Agent for Flaky {
        fn name(&self) -> String {
            "flaky".into()
        }
        fn respond(&mut self, _: &[visionweb::protocol::Message]) -> Result<String, visionweb::agents::AgentError> {
            self.0 += 1;
            if self.0.is_multiple_of(3) {
                Err(visionweb::agents::AgentError::HttpError(503))
            } else {
                Ok("<think>x</think><ipython_cell>mouse_click()</ipython_cell>".into())
            }
        }
    }
    let (vp, tasks) = big_target_tasks(4, 10);
    let mut backend = SyntheticBackend::new(vp);
    let config = visionweb::protocol::RunConfig {
        repetitions: 3,
        ..Default::default()
    };
    let run = run_benchmark(&mut backend, &mut Flaky(0), &tasks, &config, None).unwrap();
    let failures = run.n_infra_failures();
    assert!(failures > 0);
    let s = success_rate(&run.records).unwrap();
    assert_eq!(s.n as usize, run.records.len() - failures);
    assert!(run.records.iter().filter(|r| r.infra_failure).all(|r| !r.success));
}
