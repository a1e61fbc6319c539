//! Experiment configuration: one strict JSON document per run. Unknown keys
//! are rejected and a seed is mandatory — every stochastic component
//! (multistart draws, channel initialization) derives from it.

use contractq::cost::MonitoringCostSpec;
use contractq::env::{
    discrete_grid_env, multi_task_env, normal_signal_env, uniform_z_env, DeviationCosts,
    MultiTaskEnv, ProductEnv, ZEnv,
};
use contractq::utility::Utility;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    SolveSingle,
    ScaleSweep,
    GroupIndex,
    MultitaskSweep,
    RandomChannel,
    Verify,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::SolveSingle => "solve-single",
            TaskKind::ScaleSweep => "scale-sweep",
            TaskKind::GroupIndex => "group-index",
            TaskKind::MultitaskSweep => "multitask-sweep",
            TaskKind::RandomChannel => "random-channel",
            TaskKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelBlock {
    UniformZ {
        lo: f64,
        hi: f64,
    },
    NormalSignal {
        sigma_sq: f64,
    },
    DiscreteGrid {
        atoms: Vec<(f64, f64)>,
    },
    Product {
        agent1: Box<ModelBlock>,
        agent2: Box<ModelBlock>,
    },
    MultiTask {
        sigma1_sq: f64,
        sigma2_sq: f64,
        costs: DeviationCostsBlock,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationCostsBlock {
    pub c01: f64,
    pub c10: f64,
    pub c00: f64,
    pub c11: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UtilityBlock {
    Sqrt,
    Cara { gamma: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    /// "rating-scale" or "entropy-bits"
    pub kind: String,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub mu_grid: Option<Vec<f64>>,
    pub k: usize,
    /// Optional explicit rating-scale table f(1)..f(K); defaults to f(N)=N.
    #[serde(default)]
    pub table: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// Deterministic seed for every stochastic component.
    pub seed: u64,
    #[serde(default)]
    pub n_cells: Option<usize>,
    #[serde(default)]
    pub effort_cost: Option<f64>,
    #[serde(default)]
    pub effort_costs: Option<[f64; 2]>,
    /// sigma1^2 grid for multitask sweeps.
    #[serde(default)]
    pub sigma1_grid: Option<Vec<f64>>,
    /// Score-grid size for the random channel (default 201).
    #[serde(default)]
    pub grid_size: Option<usize>,
    /// Quadrature nodes per axis (default 256).
    #[serde(default)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: String,
    /// "csv", "json", or "both" (default).
    #[serde(default)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub model: ModelBlock,
    pub utility: UtilityBlock,
    pub cost: CostBlock,
    pub solver: SolverBlock,
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn parse(raw: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(raw).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match self.output.format.as_deref() {
            None | Some("csv") | Some("json") | Some("both") => {}
            Some(other) => {
                return Err(CliError::Config(format!(
                    "output.format must be csv|json|both, got {other}"
                )))
            }
        }
        match self.cost.kind.as_str() {
            "rating-scale" | "entropy-bits" => {}
            other => {
                return Err(CliError::Config(format!(
                    "cost.kind must be rating-scale|entropy-bits, got {other}"
                )))
            }
        }
        let needs_grid = matches!(self.task, TaskKind::ScaleSweep | TaskKind::GroupIndex);
        if needs_grid {
            match &self.cost.mu_grid {
                Some(g) if !g.is_empty() => {
                    if g.windows(2).any(|w| w[1] < w[0]) {
                        return Err(CliError::Config("cost.mu_grid must be sorted".into()));
                    }
                }
                _ => {
                    return Err(CliError::Config(format!(
                        "task {} needs a nonempty cost.mu_grid",
                        self.task.name()
                    )))
                }
            }
        } else if self.cost.mu.is_none() && !matches!(self.task, TaskKind::Verify) {
            return Err(CliError::Config(format!(
                "task {} needs cost.mu",
                self.task.name()
            )));
        }
        if matches!(self.task, TaskKind::MultitaskSweep)
            && self
                .solver
                .sigma1_grid
                .as_ref()
                .is_none_or(|g| g.is_empty())
        {
            return Err(CliError::Config(
                "multitask-sweep needs a nonempty solver.sigma1_grid".into(),
            ));
        }
        Ok(())
    }

    pub fn utility(&self) -> Result<Utility, CliError> {
        match &self.utility {
            UtilityBlock::Sqrt => Ok(Utility::sqrt()),
            UtilityBlock::Cara { gamma } => {
                Utility::cara(*gamma).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    pub fn cost_spec(&self, mu: f64) -> Result<MonitoringCostSpec, CliError> {
        let spec = match self.cost.kind.as_str() {
            "entropy-bits" => MonitoringCostSpec::entropy_bits(mu, self.cost.k),
            _ => match &self.cost.table {
                Some(table) => MonitoringCostSpec::new(
                    contractq::cost::CostKind::RatingScale { table: table.clone() },
                    mu,
                    self.cost.k,
                ),
                None => MonitoringCostSpec::linear_rating_scale(mu, self.cost.k),
            },
        };
        spec.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn scalar_env(&self) -> Result<ZEnv, CliError> {
        let env = build_scalar(&self.model)?;
        Ok(match self.solver.resolution {
            Some(r) => env.with_resolution(r),
            None => env,
        })
    }

    pub fn product_env(&self) -> Result<ProductEnv, CliError> {
        match &self.model {
            ModelBlock::Product { agent1, agent2 } => {
                let env = ProductEnv::new(build_scalar(agent1)?, build_scalar(agent2)?);
                Ok(match self.solver.resolution {
                    Some(r) => env.with_resolution(r),
                    None => env,
                })
            }
            _ => Err(CliError::Config(format!(
                "task {} needs a product model",
                self.task.name()
            ))),
        }
    }

    pub fn multitask_env(&self) -> Result<(MultiTaskEnv, f64, DeviationCosts), CliError> {
        match &self.model {
            ModelBlock::MultiTask {
                sigma1_sq,
                sigma2_sq,
                costs,
            } => {
                let dc = DeviationCosts {
                    c01: costs.c01,
                    c10: costs.c10,
                    c00: costs.c00,
                    c11: costs.c11,
                };
                let env = multi_task_env(*sigma1_sq, *sigma2_sq, dc)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let env = match self.solver.resolution {
                    Some(r) => env.with_resolution(r),
                    None => env,
                };
                Ok((env, *sigma2_sq, dc))
            }
            _ => Err(CliError::Config(format!(
                "task {} needs a multi-task model",
                self.task.name()
            ))),
        }
    }
}

fn build_scalar(model: &ModelBlock) -> Result<ZEnv, CliError> {
    match model {
        ModelBlock::UniformZ { lo, hi } => {
            uniform_z_env(*lo, *hi).map_err(|e| CliError::Config(e.to_string()))
        }
        ModelBlock::NormalSignal { sigma_sq } => {
            normal_signal_env(*sigma_sq).map_err(|e| CliError::Config(e.to_string()))
        }
        ModelBlock::DiscreteGrid { atoms } => {
            discrete_grid_env(atoms.clone()).map_err(|e| CliError::Config(e.to_string()))
        }
        other => Err(CliError::Config(format!(
            "expected a scalar environment, got {other:?}"
        ))),
    }
}
