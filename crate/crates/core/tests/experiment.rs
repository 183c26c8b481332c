use lossycs::config::{parse_experiment, parse_topology_record};
use lossycs::experiment::{
    ceiling_probe, equivalence_test, monotonicity_violations, parse_grid_csv, run_cell, run_grid, Axis, CeilingSpec,
    ExperimentConfig, Solver, TopologyKind,
};
use lossycs::topology::Topology;

fn fast(mut c: ExperimentConfig) -> ExperimentConfig {
    c.n = 40;
    c.s = 2;
    c.solver = Solver::Omp;
    c
}

#[test]
fn tree_success_saturates_at_relay_ceiling() {
    let mut base = fast(ExperimentConfig::star(vec![1.0], vec![1]));
    base.trials = 300;
    base.seed = 61;
    let report = ceiling_probe(&CeilingSpec {
        base,
        kind: TopologyKind::Tree,
        r: 1,
        k_values: (5..=40).step_by(5).collect(),
        p: 1.0,
        q: 0.7,
    })
    .unwrap();
    assert!((report.ceiling - 0.7).abs() < 1e-15);
    assert!(!report.exceeds, "max excess {} sigma", report.max_excess_sigmas);
    let gap = (report.plateau - report.ceiling).abs();
    assert!(
        gap <= 3.0 * report.plateau_stderr.max(0.02),
        "plateau {}",
        report.plateau
    );
}

#[test]
fn serial_success_stays_below_branch_ceiling() {
    let mut base = fast(ExperimentConfig::star(vec![1.0], vec![1]));
    base.trials = 200;
    base.seed = 62;
    let report = ceiling_probe(&CeilingSpec {
        base,
        kind: TopologyKind::Serial,
        r: 3,
        k_values: vec![4, 8, 16, 32],
        p: 0.6,
        q: 1.0,
    })
    .unwrap();
    assert!((report.ceiling - (1.0 - 0.4f64.powi(3))).abs() < 1e-12);
    assert!(!report.exceeds);
}

#[test]
fn star_grid_trends_up_in_p_and_m() {
    let mut c = fast(ExperimentConfig::star(
        vec![0.3, 0.5, 0.7, 0.9],
        vec![6, 12, 18, 24, 30],
    ));
    c.trials = 150;
    c.seed = 63;
    let grid = run_grid(&c).unwrap();
    let v = monotonicity_violations(&grid, 3.0);
    assert!(v.is_empty(), "{v:?}");
    assert!(grid.cell(3, 4).probability() > grid.cell(0, 0).probability());
}

#[test]
fn runs_are_reproducible() {
    let mut c = fast(ExperimentConfig::star(vec![0.5, 1.0], vec![10, 20]));
    c.trials = 30;
    c.seed = 64;
    let a = run_grid(&c).unwrap();
    let b = run_grid(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(&run_cell(&c, 1, 0).unwrap(), a.cell(1, 0));
    c.workers = Some(2);
    assert_eq!(run_grid(&c).unwrap().to_csv(), a.to_csv());
    c.seed = 65;
    assert_ne!(run_grid(&c).unwrap().cells, a.cells);
}

#[test]
fn independent_seeds_give_statistically_equal_grids() {
    let mut c = fast(ExperimentConfig::star(vec![0.6, 0.9], vec![10, 16, 22]));
    c.trials = 150;
    c.seed = 66;
    let a = run_grid(&c).unwrap();
    c.seed = 67;
    let b = run_grid(&c).unwrap();
    let report = equivalence_test(&a, &b, 4.0).unwrap();
    assert!(report.violations.is_empty(), "{report:?}");
}

#[test]
fn json_config_round_trips() {
    let cfg = parse_experiment(
        "topology = serial\nR = 2:6:2\nK = 5\np_grid = 0.5,0.75,1\nN = 60\ns = 4\ntrials = 12\nseed = 3\n\
         lambda_policy = relative:0.02\nsigma = 0.01\nthreshold = 0.05\n",
    )
    .unwrap();
    assert_eq!(cfg.template.axis, Axis::R);
    assert_eq!(cfg.template.values, vec![2, 4, 6]);
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(parse_experiment(&json).unwrap(), cfg);
}

#[test]
fn grid_csv_round_trips() {
    let mut c = fast(ExperimentConfig::star(vec![0.4, 0.8], vec![8, 16, 24]));
    c.trials = 10;
    let grid = run_grid(&c).unwrap();
    let back = parse_grid_csv(&grid.to_csv(), Axis::M).unwrap();
    assert_eq!(back.p_values, grid.p_values);
    assert_eq!(back.y_values, grid.y_values);
    assert_eq!(back.probabilities(), grid.probabilities());
}

#[test]
fn topology_records() {
    let rec = parse_topology_record("topology = tree\nR = 3\nK = 4\np = 0.9\nq = 0.5\n").unwrap();
    assert_eq!(rec.topology, Topology::tree(3, 4).unwrap());
    assert_eq!((rec.params.p, rec.params.q), (0.9, 0.5));
    let star = parse_topology_record("topology=star\nm=12\np=1").unwrap();
    assert_eq!(star.topology.measurements(), 12);
    for bad in [
        "topology=star\np=0.5",
        "topology=tree\nR=2\np=0.5",
        "topology=star\nm=4\np=2",
        "topology=star\nm=4\np=0.5\nzzz=1",
    ] {
        assert!(parse_topology_record(bad).unwrap_err().is_config(), "{bad}");
    }
}
