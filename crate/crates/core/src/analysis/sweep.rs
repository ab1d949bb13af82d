use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::formulas::{
    expected_tokens, ops_factor, optimal_gamma, walltime_factor, AnalysisError, DEFAULT_GAMMA_MAX,
};
use crate::report::Table;

/// The six `(alpha, gamma)` settings of the speed/operations trade-off table.
pub const TABLE1_ROWS: [(f64, usize); 6] =
    [(0.6, 2), (0.7, 3), (0.8, 2), (0.8, 5), (0.9, 2), (0.9, 10)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Expected tokens per step over (alpha, gamma).
    Fig2Tokens,
    /// Walltime-optimal gamma over (c, alpha).
    Fig3OptGamma,
    /// Speedup and operations factor over (alpha, gamma) with c = c_hat = 0.
    Fig4SpeedupOps,
    /// Operations and speed for the fixed six settings.
    Table1,
}

impl FromStr for SweepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" | "fig2_tokens" | "tokens" => Ok(Self::Fig2Tokens),
            "fig3" | "fig3_optgamma" | "optgamma" => Ok(Self::Fig3OptGamma),
            "fig4" | "fig4_speedup_ops" | "speedup-ops" => Ok(Self::Fig4SpeedupOps),
            "table1" => Ok(Self::Table1),
            other => Err(format!("unknown sweep kind {other:?} (fig2, fig3, fig4, table1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub gammas: Vec<usize>,
    pub cs: Vec<f64>,
    pub gamma_max: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            alphas: (0..100).map(|i| i as f64 / 100.0).collect(),
            gammas: vec![1, 2, 3, 5, 7, 10],
            cs: vec![0.01, 0.02, 0.05, 0.1],
            gamma_max: DEFAULT_GAMMA_MAX,
        }
    }
}

fn require_non_empty<T>(name: &'static str, v: &[T]) -> Result<(), AnalysisError> {
    if v.is_empty() {
        return Err(AnalysisError::EmptyGrid(name));
    }
    Ok(())
}

pub fn sweep(kind: SweepKind, grid: &SweepGrid) -> Result<Table, AnalysisError> {
    match kind {
        SweepKind::Fig2Tokens => {
            require_non_empty("alphas", &grid.alphas)?;
            require_non_empty("gammas", &grid.gammas)?;
            let mut t = Table::new(["alpha", "gamma", "expected_tokens"]);
            for &a in &grid.alphas {
                for &g in &grid.gammas {
                    t.push(vec![a.into(), g.into(), expected_tokens(a, g)?.into()]);
                }
            }
            Ok(t)
        }
        SweepKind::Fig3OptGamma => {
            require_non_empty("alphas", &grid.alphas)?;
            require_non_empty("cs", &grid.cs)?;
            let mut t = Table::new(["c", "alpha", "optimal_gamma", "walltime_factor", "saturated"]);
            for &c in &grid.cs {
                for &a in &grid.alphas {
                    let opt = optimal_gamma(a, c, grid.gamma_max)?;
                    t.push(vec![c.into(), a.into(), opt.gamma.into(), opt.factor.into(), opt.saturated.into()]);
                }
            }
            Ok(t)
        }
        SweepKind::Fig4SpeedupOps => {
            require_non_empty("alphas", &grid.alphas)?;
            require_non_empty("gammas", &grid.gammas)?;
            let mut t = Table::new(["alpha", "gamma", "speedup", "ops_factor"]);
            for &a in &grid.alphas {
                for &g in &grid.gammas {
                    t.push(vec![
                        a.into(),
                        g.into(),
                        walltime_factor(a, g, 0.0)?.into(),
                        ops_factor(a, g, 0.0)?.into(),
                    ]);
                }
            }
            Ok(t)
        }
        SweepKind::Table1 => {
            let mut t = Table::new(["alpha", "gamma", "operations", "speed"]);
            for (a, g) in TABLE1_ROWS {
                t.push(vec![
                    a.into(),
                    g.into(),
                    ops_factor(a, g, 0.0)?.into(),
                    walltime_factor(a, g, 0.0)?.into(),
                ]);
            }
            Ok(t)
        }
    }
}
