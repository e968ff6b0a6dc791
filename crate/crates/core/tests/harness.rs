use nrm_core::harness::{
    dual_convergence_experiment, estimate_regret, fit_growth, myopic_decay_experiment, regret_cell, PolicyEntry,
};
use nrm_core::model::InstanceSpec;
use nrm_core::policies::{EstimatorConfig, PolicyKind};
use nrm_core::Error;

fn entry(kind: PolicyKind) -> PolicyEntry {
    PolicyEntry::new(kind.id(), EstimatorConfig::new(kind))
}

#[test]
fn greedy_regret_matches_order_statistics() {
    // With uniform(0,1) rewards and C = T/2 = k, the hindsight value is the
    // sum of the top k order statistics, Σ_{i≤k} (T+1−i)/(T+1), while greedy
    // collects the first k rewards, k/2 in expectation.
    let t = 1000usize;
    let k = 500.0;
    let tf = t as f64;
    let exact = k * (2.0 * tf - k + 1.0) / (2.0 * (tf + 1.0)) - k / 2.0;
    let spec = InstanceSpec::single_resource_uniform(0.5, t).unwrap();
    let row = regret_cell(&spec, &[entry(PolicyKind::Greedy)], t, 500, 11).unwrap().remove(0);
    assert!(
        (row.mean - exact).abs() <= 3.0 * row.stderr,
        "{} ± {} vs {exact}",
        row.mean,
        row.stderr
    );
    // Unit demand with integral capacity: the LP is integral.
    let (m, _) = row.vs_integer.unwrap();
    assert!((m - row.mean).abs() <= 1e-9 * row.mean);
    assert_eq!(row.solver_failures, 0);
}

#[test]
fn tables_do_not_depend_on_the_worker_count() {
    let spec = InstanceSpec::degenerate_triangle(0.1, 1).unwrap();
    let policies = [entry(PolicyKind::Log2Fluid), entry(PolicyKind::LogDual), entry(PolicyKind::StaticBidprice)];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_regret(&spec, &policies, &[200, 100], 12, 5).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    // Rows are grouped by policy, horizons ascending.
    let order: Vec<(&str, usize)> = one.rows.iter().map(|r| (r.policy.as_str(), r.horizon)).collect();
    assert_eq!(
        order,
        vec![
            ("log2_fluid", 100),
            ("log2_fluid", 200),
            ("log_dual", 100),
            ("log_dual", 200),
            ("static_bidprice", 100),
            ("static_bidprice", 200),
        ]
    );
    assert_eq!(one.rows_for("log_dual").count(), 2);
}

#[test]
fn policies_share_sample_paths() {
    // Common random numbers: the benchmark is identical across policies in a cell.
    let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
    let rows = regret_cell(
        &spec,
        &[entry(PolicyKind::Greedy), entry(PolicyKind::ResolvePlain)],
        300,
        20,
        3,
    )
    .unwrap();
    assert_eq!(rows[0].benchmark, rows[1].benchmark);
    assert!(rows.iter().all(|r| r.mean >= 0.0));
}

#[test]
fn growth_fit_reads_the_table() {
    let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
    let table = estimate_regret(&spec, &[entry(PolicyKind::Greedy)], &[100, 200, 400, 800], 40, 9).unwrap();
    let fit = fit_growth(&table, "greedy").unwrap();
    // Greedy's regret is linear in T.
    assert!((fit.exponent - 1.0).abs() < 0.15, "exponent {}", fit.exponent);
    assert!(fit_growth(&table, "missing").is_err());
}

#[test]
fn dual_convergence_is_centred_on_the_population_dual() {
    let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
    let rows = dual_convergence_experiment(&spec, &[0.5], &[1000, 250], 40, 2).unwrap();
    assert_eq!(rows.iter().map(|r| r.s).collect::<Vec<_>>(), vec![250, 1000]);
    for r in &rows {
        assert_eq!(r.population_dual, vec![0.5]);
        assert!(r.mean > 0.0 && r.mean < 0.05);
        assert_eq!(r.replications, 40);
    }
    assert!(rows[1].mean < rows[0].mean);
}

#[test]
fn myopic_rows_reproduce_the_closed_form() {
    let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
    let rows = myopic_decay_experiment(&spec, 1.0, &[250, 500], 4, 1).unwrap();
    for r in rows {
        let exact = 0.125 / (r.s as f64 - 1.0);
        assert!((r.mean - exact).abs() < 1e-9, "s={}: {}", r.s, r.mean);
        assert!(r.stderr.abs() < 1e-9);
    }
}

#[test]
fn single_replication_is_rejected() {
    let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
    let err = regret_cell(&spec, &[entry(PolicyKind::Greedy)], 100, 1, 0).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
