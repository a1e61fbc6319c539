//! Task dispatch: each experiment reads a validated config, runs the
//! matching solver, and writes results.csv / results.json (plus the figure
//! CSV its sweep distills into).

use crate::config::{ExperimentConfig, TaskKind};
use crate::output::{emit_figure_data, fmt_list, fmt_sig, write_file, Figure, FigureRecords, Table};
use crate::CliError;
use contractq::cost::MonitoringCostSpec;
use contractq::env::discrete_grid_env;
use contractq::oracle::{
    brute_force_bipartition_2d, brute_force_single, DiscreteInstance, TwoAgentInstance,
};
use contractq::partition::{
    optimize_bipartition, optimize_cutoffs_single, ContractSolution, PartitionSpec,
};
use contractq::sweep::{group_index_sweep, multitask_sweep, scale_sweep};
use contractq::utility::Utility;
use serde_json::json;
use std::path::Path;

pub fn run(cfg: &ExperimentConfig, digest: &str) -> Result<(), CliError> {
    let dir = Path::new(&cfg.output.directory).to_path_buf();
    match cfg.task {
        TaskKind::SolveSingle => solve_single(cfg, &dir, digest),
        TaskKind::ScaleSweep => run_scale_sweep(cfg, &dir, digest),
        TaskKind::GroupIndex => run_group_index(cfg, &dir, digest),
        TaskKind::MultitaskSweep => run_multitask(cfg, &dir, digest),
        TaskKind::RandomChannel => run_channel(cfg, &dir, digest),
        TaskKind::Verify => run_verify(cfg, &dir, digest),
    }
}

fn want_csv(cfg: &ExperimentConfig) -> bool {
    !matches!(cfg.output.format.as_deref(), Some("json"))
}

fn want_json(cfg: &ExperimentConfig) -> bool {
    !matches!(cfg.output.format.as_deref(), Some("csv"))
}

fn effort_cost(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    cfg.solver
        .effort_cost
        .ok_or_else(|| CliError::Config("solver.effort_cost required".into()))
}

fn n_cells(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    cfg.solver
        .n_cells
        .ok_or_else(|| CliError::Config("solver.n_cells required".into()))
}

fn mu(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    cfg.cost
        .mu
        .ok_or_else(|| CliError::Config("cost.mu required".into()))
}

fn solution_row(sol: &ContractSolution) -> Vec<String> {
    let cutoffs = match &sol.partition {
        PartitionSpec::Cutoffs { cutoffs } => fmt_list(cutoffs),
        PartitionSpec::Line(line) => format!(
            "line:{};{};{}",
            fmt_sig(line.normal[0]),
            fmt_sig(line.normal[1]),
            fmt_sig(line.offset)
        ),
        PartitionSpec::Product { cutoffs1, cutoffs2 } => {
            format!("{}|{}", fmt_list(cutoffs1), fmt_list(cutoffs2))
        }
        PartitionSpec::WeightedScore { weights, cutoffs } => {
            format!("{}|{}", fmt_list(weights), fmt_list(cutoffs))
        }
    };
    let wages = sol
        .wages
        .iter()
        .map(|w| fmt_list(&w.wages))
        .collect::<Vec<_>>()
        .join("|");
    vec![
        sol.cells.len().to_string(),
        cutoffs,
        wages,
        fmt_sig(sol.incentive_cost),
        fmt_sig(sol.monitoring_cost),
        fmt_sig(sol.mu),
        fmt_sig(sol.total_cost),
    ]
}

fn solve_single(cfg: &ExperimentConfig, dir: &Path, digest: &str) -> Result<(), CliError> {
    let env = cfg.scalar_env()?;
    let u = cfg.utility()?;
    let spec = cfg.cost_spec(mu(cfg)?)?;
    let sol = optimize_cutoffs_single(&env, &u, effort_cost(cfg)?, n_cells(cfg)?, &spec)
        .map_err(CliError::solver)?;
    sol.validate().map_err(CliError::solver)?;

    if want_csv(cfg) {
        let mut t = Table::new(&[
            "n_cells",
            "cutoffs",
            "wages",
            "incentive_cost",
            "monitoring_cost",
            "mu",
            "total_cost",
        ]);
        t.meta(format!("config digest {digest}"));
        t.row(solution_row(&sol));
        write_file(dir, "results.csv", &t.to_csv())?;
    }
    if want_json(cfg) {
        let doc = json!({
            "config_digest": digest,
            "task": "solve-single",
            "solution": sol,
        });
        write_file(dir, "results.json", &pretty(&doc)?)?;
    }
    Ok(())
}

fn run_scale_sweep(cfg: &ExperimentConfig, dir: &Path, digest: &str) -> Result<(), CliError> {
    let env = cfg.scalar_env()?;
    let u = cfg.utility()?;
    let grid = cfg.cost.mu_grid.clone().expect("validated");
    let spec = cfg.cost_spec(0.0)?;
    let rows =
        scale_sweep(&env, &u, effort_cost(cfg)?, &spec, &grid).map_err(CliError::solver)?;

    if want_csv(cfg) {
        let info_col = if cfg.cost.kind == "entropy-bits" {
            "entropy_bits"
        } else {
            "f_of_n"
        };
        let mut t = Table::new(&["mu", "n_star", "expected_wage", info_col, "total"]);
        t.meta(format!("config digest {digest}"));
        for r in &rows {
            t.row(vec![
                fmt_sig(r.mu),
                r.n_star.to_string(),
                fmt_sig(r.expected_wage),
                fmt_sig(r.information),
                fmt_sig(r.total_cost),
            ]);
        }
        write_file(dir, "results.csv", &t.to_csv())?;
        let fig = emit_figure_data(&FigureRecords::ScaleSweep(&rows), Figure::Fig1, digest)?;
        write_file(dir, "fig1.csv", &fig)?;
    }
    if want_json(cfg) {
        let doc = json!({
            "config_digest": digest,
            "task": "scale-sweep",
            "rows": rows,
        });
        write_file(dir, "results.json", &pretty(&doc)?)?;
    }
    Ok(())
}

fn run_group_index(cfg: &ExperimentConfig, dir: &Path, digest: &str) -> Result<(), CliError> {
    let env2 = cfg.product_env()?;
    let u = cfg.utility()?;
    let costs = cfg
        .solver
        .effort_costs
        .ok_or_else(|| CliError::Config("solver.effort_costs required".into()))?;
    let grid = cfg.cost.mu_grid.clone().expect("validated");
    let spec = cfg.cost_spec(0.0)?;
    let rows = group_index_sweep(&env2, (&u, &u), (costs[0], costs[1]), &spec, &grid)
        .map_err(CliError::solver)?;

    if want_csv(cfg) {
        let mut t = Table::new(&["mu", "index", "group_total", "individual_total"]);
        t.meta(format!("config digest {digest}"));
        for r in &rows {
            t.row(vec![
                fmt_sig(r.mu),
                fmt_sig(r.index),
                fmt_sig(r.group_total),
                fmt_sig(r.individual_total),
            ]);
        }
        write_file(dir, "results.csv", &t.to_csv())?;
        let fig = emit_figure_data(&FigureRecords::GroupIndex(&rows), Figure::Fig4, digest)?;
        write_file(dir, "fig4.csv", &fig)?;
    }
    if want_json(cfg) {
        let doc = json!({
            "config_digest": digest,
            "task": "group-index",
            "rows": rows,
        });
        write_file(dir, "results.json", &pretty(&doc)?)?;
    }
    Ok(())
}

fn run_multitask(cfg: &ExperimentConfig, dir: &Path, digest: &str) -> Result<(), CliError> {
    let (env, sigma2_sq, costs) = cfg.multitask_env()?;
    let u = cfg.utility()?;
    let spec = cfg.cost_spec(mu(cfg)?)?;
    let grid = cfg.solver.sigma1_grid.clone().expect("validated");
    let rows = multitask_sweep(
        &grid,
        sigma2_sq,
        costs,
        &u,
        &spec,
        n_cells(cfg)?,
        env.resolution,
    );

    if want_csv(cfg) {
        let mut t = Table::new(&[
            "sigma1_sq",
            "status",
            "ratio",
            "total_cost",
            "direction",
            "consistency_angle",
        ]);
        t.meta(format!("config digest {digest}"));
        for r in &rows {
            match &r.outcome {
                Ok(sol) => t.row(vec![
                    fmt_sig(r.sigma1_sq),
                    "ok".into(),
                    fmt_sig(sol.ratio),
                    fmt_sig(sol.solution.total_cost),
                    fmt_list(&sol.direction),
                    fmt_sig(sol.consistency_angle),
                ]),
                Err(e) => t.row(vec![
                    fmt_sig(r.sigma1_sq),
                    format!("error: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]),
            }
        }
        write_file(dir, "results.csv", &t.to_csv())?;
        let fig = emit_figure_data(&FigureRecords::Multitask(&rows), Figure::Fig5, digest)?;
        write_file(dir, "fig5.csv", &fig)?;
    }
    if want_json(cfg) {
        let rows_json: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| match &r.outcome {
                Ok(sol) => json!({"sigma1_sq": r.sigma1_sq, "solution": sol}),
                Err(e) => json!({"sigma1_sq": r.sigma1_sq, "error": e.to_string()}),
            })
            .collect();
        let doc = json!({
            "config_digest": digest,
            "task": "multitask-sweep",
            "rows": rows_json,
        });
        write_file(dir, "results.json", &pretty(&doc)?)?;
    }
    Ok(())
}

fn run_channel(cfg: &ExperimentConfig, dir: &Path, digest: &str) -> Result<(), CliError> {
    let env = cfg.scalar_env()?;
    let u = cfg.utility()?;
    let m = cfg.solver.grid_size.unwrap_or(201);
    let (zs, ps) = contractq::channel::quantile_grid(&env, m);
    let mu = mu(cfg)?;
    let sol = contractq::channel::solve_channel(
        &zs,
        &ps,
        &u,
        effort_cost(cfg)?,
        mu,
        cfg.cost.k,
        cfg.solver.seed,
    )
    .map_err(CliError::solver)?;

    if want_csv(cfg) {
        let mut t = Table::new(&[
            "mu",
            "grid_size",
            "categories",
            "expected_wage",
            "mi_nats",
            "mi_bits",
            "total_cost",
            "iterations",
            "wages",
        ]);
        t.meta(format!("config digest {digest}"));
        t.row(vec![
            fmt_sig(mu),
            m.to_string(),
            sol.channel.q.len().to_string(),
            fmt_sig(sol.expected_wage),
            fmt_sig(sol.mutual_information_nats),
            fmt_sig(sol.mutual_information_bits),
            fmt_sig(sol.total_cost),
            sol.iterations.to_string(),
            fmt_list(&sol.wages),
        ]);
        write_file(dir, "results.csv", &t.to_csv())?;

        // channel matrix: rows = categories, columns = grid points
        let mut ch = Table::new(
            &std::iter::once("category".to_string())
                .chain(zs.iter().map(|z| format!("z={}", fmt_sig(*z))))
                .collect::<Vec<_>>()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
        );
        ch.meta(format!("config digest {digest}"));
        for (n, row) in sol.channel.q.iter().enumerate() {
            let mut cells = vec![n.to_string()];
            cells.extend(row.iter().map(|v| fmt_sig(*v)));
            ch.row(cells);
        }
        write_file(dir, "channel.csv", &ch.to_csv())?;
    }
    if want_json(cfg) {
        let doc = json!({
            "config_digest": digest,
            "task": "random-channel",
            "solution": sol,
        });
        write_file(dir, "results.json", &pretty(&doc)?)?;
    }
    Ok(())
}

/// Oracle spot checks: optimizer totals against exhaustive minima.
fn run_verify(cfg: &ExperimentConfig, dir: &Path, digest: &str) -> Result<(), CliError> {
    let u = Utility::sqrt();
    let spec = MonitoringCostSpec::linear_rating_scale(cfg.cost.mu.unwrap_or(0.0), cfg.cost.k)
        .map_err(CliError::solver)?;
    let env = cfg.scalar_env()?;

    let mut t = Table::new(&["check", "oracle_cost", "optimizer_cost", "rel_err", "pass"]);
    t.meta(format!("config digest {digest}"));
    let mut all_ok = true;

    for n in [2usize, 3] {
        let inst =
            DiscreteInstance::from_env_quantiles(&env, 12, n, Utility::sqrt(), 1.0, spec.clone())
                .map_err(CliError::solver)?;
        let oracle = brute_force_single(&inst).map_err(CliError::solver)?;
        let grid_env = discrete_grid_env(inst.atoms.clone()).map_err(CliError::solver)?;
        let sol = optimize_cutoffs_single(&grid_env, &u, 1.0, n, &spec).map_err(CliError::solver)?;
        let rel = (sol.total_cost - oracle.cost).abs() / oracle.cost;
        let pass = rel < 1e-3 && oracle.is_interval;
        all_ok &= pass;
        t.row(vec![
            format!("single_score_n{n}"),
            fmt_sig(oracle.cost),
            fmt_sig(sol.total_cost),
            fmt_sig(rel),
            pass.to_string(),
        ]);
    }

    let atoms = vec![
        (-1.0 / 3.0, 1.0 / 3.0),
        (0.0, 1.0 / 3.0),
        (1.0 / 3.0, 1.0 / 3.0),
    ];
    let inst2 = TwoAgentInstance {
        atoms1: atoms.clone(),
        atoms2: atoms.clone(),
        utils: (Utility::sqrt(), Utility::sqrt()),
        costs: (1.0, 1.0),
        spec: spec.clone(),
    };
    let oracle2 = brute_force_bipartition_2d(&inst2).map_err(CliError::solver)?;
    let env2 = contractq::env::ProductEnv::new(
        discrete_grid_env(atoms.clone()).map_err(CliError::solver)?,
        discrete_grid_env(atoms).map_err(CliError::solver)?,
    );
    let sol2 =
        optimize_bipartition(&env2, (&u, &u), (1.0, 1.0), &spec).map_err(CliError::solver)?;
    let rel2 = (sol2.total_cost - oracle2.cost).abs() / oracle2.cost;
    let pass2 = rel2 < 1e-3 && oracle2.is_halfplane_consistent;
    all_ok &= pass2;
    t.row(vec![
        "two_agent_3x3".into(),
        fmt_sig(oracle2.cost),
        fmt_sig(sol2.total_cost),
        fmt_sig(rel2),
        pass2.to_string(),
    ]);

    if want_csv(cfg) {
        write_file(dir, "results.csv", &t.to_csv())?;
    }
    if want_json(cfg) {
        let doc = json!({
            "config_digest": digest,
            "task": "verify",
            "pass": all_ok,
        });
        write_file(dir, "results.json", &pretty(&doc)?)?;
    }
    if !all_ok {
        return Err(CliError::Solver(
            "verification found optimizer/oracle disagreement".into(),
        ));
    }
    Ok(())
}

fn pretty(doc: &serde_json::Value) -> Result<String, CliError> {
    serde_json::to_string_pretty(doc).map_err(|e| CliError::Io(e.to_string()))
}
