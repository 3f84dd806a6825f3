use proptest::prelude::*;
use tddyn_core::game::GameParams;
use tddyn_core::harness::csv::{format_real, parse_csv, render_csv};
use tddyn_core::harness::run_parallel;
use tddyn_core::introspection::{sweep_intro, IntroSweepConfig};
use tddyn_core::replicator::{sweep_rm, RmConfig, RmSweepConfig};
use tddyn_core::wright_fisher::{sweep_wf, WfConfig, WfSweepConfig};

proptest! {
    #[test]
    fn reals_survive_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn parallel_results_keep_grid_order(items in prop::collection::vec(any::<u32>(), 0..60), threads in 1usize..5) {
        let out = run_parallel(&items, threads, |i, &v| Ok::<_, String>((i, v)));
        let expected: Vec<_> = items.iter().copied().enumerate().map(Ok).collect();
        prop_assert_eq!(out, expected);
    }
}

#[test]
fn rm_sweep_is_thread_independent_and_round_trips() {
    let base = RmConfig::new(GameParams::new(2, 30, 2).unwrap(), 0.0);
    let run = |threads| render_csv(&sweep_rm(&[2, 5, 10], &[0.0, 0.3, 0.7], &base, threads));
    let one = run(1);
    assert_eq!(one, run(3));
    let parsed = parse_csv(&one).unwrap();
    let cfg: RmSweepConfig = parsed.metadata.config_as().unwrap();
    assert_eq!(cfg.rewards, vec![2, 5, 10]);
    assert_eq!(parsed.rows.len(), 9);
}

#[test]
fn wf_sweep_is_thread_independent_and_round_trips() {
    let mut base = WfConfig::new(GameParams::classic(), 0.0, 1, 1.0, 77);
    base.generations = 50;
    base.population_size = 40;
    let run = |threads| {
        render_csv(&sweep_wf(&[0.01, 0.5], &[1, 10], &[0.5, 1.0], 3, &base, threads).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    let parsed = parse_csv(&one).unwrap();
    let cfg: WfSweepConfig = parsed.metadata.config_as().unwrap();
    assert_eq!(cfg.base_seed, 77);
    assert_eq!(cfg.replicates, 3);
    assert_eq!(parsed.metadata.seed, Some(77));
    assert_eq!(parsed.rows.len(), 24);
}

#[test]
fn intro_sweep_is_thread_independent_and_round_trips() {
    let g = GameParams::new(2, 12, 2).unwrap();
    let run = |threads| render_csv(&sweep_intro(&[2, 5], &[0.0, 0.5, 1.0], &g, threads));
    let one = run(1);
    assert_eq!(one, run(2));
    let parsed = parse_csv(&one).unwrap();
    let cfg: IntroSweepConfig = parsed.metadata.config_as().unwrap();
    assert_eq!(cfg.betas, vec![0.0, 0.5, 1.0]);
    let avg = parsed.column("average_claim").unwrap();
    assert_eq!(avg[0].parse::<f64>().unwrap(), 7.0);
}
