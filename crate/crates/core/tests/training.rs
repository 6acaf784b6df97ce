use oscdamp::control::{PssParams, ScsConfig};
use oscdamp::drl::{Checkpoint, DdpgConfig};
use oscdamp::env::{DampingEnv, EigenSource, EnvConfig};
use oscdamp::grid::data::three_machine;
use oscdamp::grid::GridModel;
use oscdamp::training::{greedy_action, TrainConfig, Trainer};
use oscdamp::Scalar;
use proptest::prelude::*;

fn env<S: Scalar>(eigen_source: EigenSource) -> DampingEnv<S> {
    let model: GridModel<S> = three_machine().build_model().unwrap();
    let config = EnvConfig {
        episode_length: 4,
        action_repeat: 20,
        eigen_source,
        k_max: 5.0,
        ..EnvConfig::default()
    };
    let scs = ScsConfig::new(S::lit(0.01), [S::one(); 3], model.reference()).unwrap();
    let pss = vec![PssParams::default(); model.p()];
    DampingEnv::new(model, config, &pss, scs).unwrap()
}

fn train_config(max_episodes: usize) -> TrainConfig {
    TrainConfig {
        max_episodes,
        batch_size: 4,
        buffer_capacity: 32,
        checkpoint_every: 2,
        agent: DdpgConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..DdpgConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn zero_episodes_leaves_the_initial_agent_untouched() {
    let mut t = Trainer::<f64>::new(env(EigenSource::Exact), train_config(0), 3).unwrap();
    let before = t.checkpoint().to_json();
    t.train(|_| panic!("no checkpoint is due")).unwrap();
    assert_eq!(t.episodes_done(), 0);
    assert_eq!(t.checkpoint().to_json(), before);
}

#[test]
fn same_seed_gives_the_same_run() {
    let run = |seed| {
        let mut t = Trainer::<f64>::new(env(EigenSource::Exact), train_config(3), seed).unwrap();
        t.train(|_| Ok(())).unwrap();
        t.checkpoint().to_json()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn resuming_through_json_matches_the_uninterrupted_run() {
    for source in [EigenSource::Exact, EigenSource::Dmd] {
        let mut full = Trainer::<f64>::new(env(source), train_config(5), 11).unwrap();
        let mut saved = Vec::new();
        full.train(|t| {
            saved.push(t.checkpoint().to_json());
            Ok(())
        })
        .unwrap();
        assert_eq!(saved.len(), 2);

        let ck = Checkpoint::from_json(&saved[0]).unwrap();
        let mut resumed = Trainer::<f64>::resume(env(source), train_config(5), &ck).unwrap();
        assert_eq!(resumed.episodes_done(), 2);
        resumed.train(|_| Ok(())).unwrap();
        assert_eq!(resumed.log(), full.log());
        assert_eq!(resumed.total_steps(), full.total_steps());
        assert_eq!(resumed.checkpoint().to_json(), full.checkpoint().to_json(), "{source:?}");
    }
}

#[test]
fn checkpoints_arrive_on_schedule() {
    let mut t = Trainer::<f64>::new(env(EigenSource::Exact), train_config(5), 1).unwrap();
    let mut at = Vec::new();
    t.train(|t| {
        at.push(t.episodes_done());
        Ok(())
    })
    .unwrap();
    assert_eq!(at, vec![2, 4]);
    let log: Vec<usize> = t.log().iter().map(|e| e.episode).collect();
    assert_eq!(log, vec![1, 2, 3, 4, 5]);
}

#[test]
fn single_precision_training_runs_and_acts_in_range() {
    let mut t = Trainer::<f32>::new(env(EigenSource::Exact), train_config(2), 2).unwrap();
    t.train(|_| Ok(())).unwrap();
    let obs = t.env.reset(0).unwrap();
    let a = greedy_action(t.agent(), &obs).unwrap();
    assert_eq!(a.len(), t.env.action_dim());
    assert!(a.iter().all(|x| x.abs() <= 1.0));
}

#[test]
fn invalid_training_settings_are_rejected() {
    let mut c = train_config(1);
    c.batch_size = 64;
    assert!(Trainer::<f64>::new(env(EigenSource::Exact), c, 0).is_err());
    let mut c = train_config(1);
    c.checkpoint_every = 0;
    assert!(c.validate().is_err());
}

#[test]
fn schedules_hit_their_endpoints() {
    let c = train_config(11);
    assert_eq!(c.exploration_std(0), c.noise_start);
    assert!((c.exploration_std(10) - c.noise_end).abs() < 1e-15);
    assert_eq!(c.per_beta(0), c.per_beta_start);
    assert!((c.per_beta(10) - c.per_beta_end).abs() < 1e-15);
    // Past the last episode the schedule holds its final value.
    assert_eq!(c.exploration_std(50), c.exploration_std(10));
}

proptest! {
    #[test]
    fn schedules_move_monotonically_between_their_endpoints(n in 2usize..500, e in 0usize..600) {
        let c = train_config(n);
        let (lo, hi) = (c.noise_end.min(c.noise_start), c.noise_end.max(c.noise_start));
        let s = c.exploration_std(e);
        prop_assert!(s >= lo - 1e-15 && s <= hi + 1e-15);
        prop_assert!(c.exploration_std(e + 1) <= s + 1e-15);
        prop_assert!(c.per_beta(e + 1) >= c.per_beta(e) - 1e-15);
    }
}
