use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analysis::{memory_access_factor, ops_factor, walltime_factor, CostModel};
use crate::engine::{decode, DecodeResult, SpecConfig};
use crate::models::LanguageModel;
use crate::report::Table;

/// Accounting for one decoding run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub emitted_tokens: usize,
    pub steps: usize,
    pub accepted: usize,
    pub trials: usize,
    pub drafted: usize,
    pub target_calls: usize,
    pub target_prefixes: usize,
    pub draft_calls: usize,
    pub total_cost: f64,
    /// Smallest and largest tokens-per-cost ratio of any single step, in units of `1/T`.
    pub min_step_speedup: f64,
    pub max_step_speedup: f64,
}

impl RunStats {
    fn from_result(seed: u64, result: &DecodeResult, cost: &CostModel) -> Self {
        let mut s = RunStats {
            seed,
            emitted_tokens: result.tokens.len(),
            steps: result.traces.len(),
            accepted: 0,
            trials: 0,
            drafted: 0,
            target_calls: result.totals.target_calls,
            target_prefixes: result.totals.target_prefixes,
            draft_calls: result.totals.draft_calls,
            total_cost: 0.0,
            min_step_speedup: f64::INFINITY,
            max_step_speedup: 0.0,
        };
        for trace in &result.traces {
            let c = trace.cost(cost);
            s.total_cost += c;
            s.accepted += trace.accepted_n;
            s.trials += trace.acceptance_trials();
            s.drafted += trace.drafted.len();
            let ratio = trace.kept as f64 * cost.unit_cost / c;
            s.min_step_speedup = s.min_step_speedup.min(ratio);
            s.max_step_speedup = s.max_step_speedup.max(ratio);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub gamma: usize,
    pub cost: CostModel,
    pub runs: Vec<RunStats>,
    pub emitted_tokens: usize,
    pub total_cost: f64,
    /// Cost of standard decoding for the same number of tokens.
    pub standard_cost: f64,
    pub empirical_speedup: f64,
    /// Acceptance rate measured from the traces.
    pub alpha_hat: f64,
    pub theoretical_speedup: f64,
    /// `|empirical - theoretical| / theoretical`.
    pub relative_gap: f64,
    /// Target prefixes plus `c_hat` per drafted token, per emitted token.
    pub empirical_ops: f64,
    pub theoretical_ops: f64,
    pub memory_factor: f64,
}

/// One decoding run of `n_tokens` tokens charged against `cost`.
pub fn simulate_walltime<P, Q>(
    target: &P,
    draft: &Q,
    cost: &CostModel,
    config: &SpecConfig,
    n_tokens: usize,
) -> Result<SimReport, HarnessError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    simulate_walltime_runs(target, draft, cost, config, n_tokens, 1)
}

/// `runs` independent decoding runs of `n_tokens` each; run `i` uses seed
/// `config.seed + i`. Runs execute in parallel and are aggregated in order.
pub fn simulate_walltime_runs<P, Q>(
    target: &P,
    draft: &Q,
    cost: &CostModel,
    config: &SpecConfig,
    n_tokens: usize,
    runs: usize,
) -> Result<SimReport, HarnessError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    cost.validate()?;
    if n_tokens == 0 || runs == 0 {
        return Err(HarnessError::InvalidParameter("n_tokens and runs must be positive".into()));
    }
    let mut run_config = config.clone();
    run_config.max_new_tokens = n_tokens;
    run_config.stop_token = None;

    let stats = (0..runs as u64)
        .into_par_iter()
        .map(|i| -> Result<RunStats, HarnessError> {
            let mut cfg = run_config.clone();
            cfg.seed = config.seed.wrapping_add(i);
            let result = decode(target, draft, &[], &cfg)?;
            Ok(RunStats::from_result(cfg.seed, &result, cost))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let emitted: usize = stats.iter().map(|s| s.emitted_tokens).sum();
    let total_cost: f64 = stats.iter().map(|s| s.total_cost).sum();
    let accepted: usize = stats.iter().map(|s| s.accepted).sum();
    let trials: usize = stats.iter().map(|s| s.trials).sum();
    let drafted: usize = stats.iter().map(|s| s.drafted).sum();
    let prefixes: usize = stats.iter().map(|s| s.target_prefixes).sum();

    let gamma = config.gamma;
    let alpha_hat = if trials == 0 { 1.0 } else { accepted as f64 / trials as f64 };
    let standard_cost = emitted as f64 * cost.unit_cost;
    let empirical_speedup = standard_cost / total_cost;
    let theoretical_speedup = walltime_factor(alpha_hat, gamma, cost.c)?;
    Ok(SimReport {
        gamma,
        cost: *cost,
        runs: stats,
        emitted_tokens: emitted,
        total_cost,
        standard_cost,
        empirical_speedup,
        alpha_hat,
        theoretical_speedup,
        relative_gap: (empirical_speedup - theoretical_speedup).abs() / theoretical_speedup,
        empirical_ops: (prefixes as f64 + cost.c_hat * drafted as f64) / emitted as f64,
        theoretical_ops: ops_factor(alpha_hat, gamma, cost.c_hat)?,
        memory_factor: memory_access_factor(alpha_hat, gamma)?,
    })
}

/// Exp/Emp table with one row per labelled report; the gap is in percent.
pub fn exp_emp_table(rows: &[(String, SimReport)]) -> Table {
    let mut table = Table::new(["task", "gamma", "alpha", "c", "exp", "emp", "gap_pct"]);
    for (task, r) in rows {
        table.push(vec![
            task.clone().into(),
            r.gamma.into(),
            r.alpha_hat.into(),
            r.cost.c.into(),
            r.theoretical_speedup.into(),
            r.empirical_speedup.into(),
            (100.0 * r.relative_gap).into(),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::stateless_pair_for_alpha;
    use crate::models::NGramModel;
    use crate::rng::Stream;

    #[test]
    fn same_model_free_draft_gives_gamma_plus_one() {
        let mut rng = Stream::new(2);
        let m = NGramModel::random(2, 5, 0.1, 1.0, &mut rng).unwrap();
        let config = SpecConfig::default().with_gamma(3);
        let r = simulate_walltime(&m, &m, &CostModel::new(0.0, 0.0), &config, 4000).unwrap();
        assert_eq!(r.alpha_hat, 1.0);
        assert!((r.empirical_speedup - 4.0).abs() < 1e-12);
        assert_eq!(r.theoretical_speedup, 4.0);
    }

    #[test]
    fn stateless_matches_theory() {
        let p = crate::distmath::Distribution::new(vec![0.8, 0.2]).unwrap();
        let q = crate::distmath::Distribution::new(vec![0.5, 0.5]).unwrap();
        let (p, q) = (crate::models::StatelessModel::new(p), crate::models::StatelessModel::new(q));
        let config = SpecConfig::default().with_gamma(3).with_seed(9);
        let r = simulate_walltime(&p, &q, &CostModel::new(0.02, 0.02), &config, 10_000).unwrap();
        assert!((r.alpha_hat - 0.7).abs() < 0.02);
        assert!(r.relative_gap < 0.02, "{r:?}");
    }

    #[test]
    fn step_speedup_bounds() {
        let (p, q) = stateless_pair_for_alpha(0.6).unwrap();
        let cost = CostModel::new(0.1, 0.1);
        let config = SpecConfig::default().with_gamma(4).with_seed(3);
        let r = simulate_walltime_runs(&p, &q, &cost, &config, 2000, 3).unwrap();
        assert_eq!(r.runs.len(), 3);
        assert_eq!(r.emitted_tokens, 6000);
        for run in &r.runs {
            assert!(run.max_step_speedup <= 5.0 / 1.4 + 1e-12);
            assert!(run.min_step_speedup >= 1.0 / 1.4 - 1e-12);
        }
        let t = exp_emp_table(&[("stateless".into(), r)]);
        assert_eq!(t.rows.len(), 1);
    }
}
