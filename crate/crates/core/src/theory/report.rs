use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{
    generalization_bound, min_lfs, mv_error_bound, mv_error_exact, simulate_mv_error, TheoryInputs,
};
use super::channel::{verify_rcgan_tv_chain, ChainEntry, FiniteJoint, MvComparison};
use super::hellinger::{hellinger_tv_study, HellingerSummary};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryGrid {
    pub m_values: Vec<usize>,
    /// Accuracy margins α; the LF error rate is `½ - α`.
    pub alpha_values: Vec<f64>,
    /// LF error rates ε_λ for the minimum-LF and multiplier checks.
    pub lf_errors: Vec<f64>,
    /// Channel flip rates for the TV chain.
    pub channel_eps: Vec<f64>,
    pub mc_trials: usize,
    pub joints: usize,
    pub max_support: usize,
    pub hellinger_pairs: usize,
    pub seed: u64,
    pub generalization: Option<TheoryInputs>,
}

impl Default for TheoryGrid {
    fn default() -> Self {
        Self {
            m_values: vec![3, 7, 15],
            alpha_values: vec![0.1, 0.2, 0.3],
            lf_errors: vec![0.1, 0.2, 0.3, 0.4],
            channel_eps: (1..=9).map(|i| i as f64 * 0.05).collect(),
            mc_trials: 100_000,
            joints: 200,
            max_support: 32,
            hellinger_pairs: 1000,
            seed: 0,
            generalization: Some(TheoryInputs {
                rademacher: 0.05,
                n1: 10_000,
                n2: 1000,
                delta: 0.05,
                c_g: 1.0,
                k: 4,
                d: 2,
                m: 12,
                alpha_margin: 0.25,
                loss_bound: 1.0,
            }),
        }
    }
}

impl TheoryGrid {
    pub fn empty() -> Self {
        Self {
            m_values: Vec::new(),
            alpha_values: Vec::new(),
            lf_errors: Vec::new(),
            channel_eps: Vec::new(),
            mc_trials: 0,
            joints: 0,
            max_support: 1,
            hellinger_pairs: 0,
            seed: 0,
            generalization: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvRow {
    pub m: usize,
    pub alpha: f64,
    pub lf_error: f64,
    pub hoeffding: f64,
    pub exact: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    pub bound_holds: bool,
    pub mc_within_3se: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinLfsRow {
    pub lf_error: f64,
    pub m: usize,
    pub hoeffding: f64,
    pub exact: f64,
    /// Exact MV error at `m` does not exceed ε_λ.
    pub holds: bool,
    pub multiplier: MvComparison,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub checks: usize,
    pub violations: usize,
    pub max_tv_clean: f64,
    pub failures: Vec<ChainEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub mv: Vec<MvRow>,
    pub min_lfs: Vec<MinLfsRow>,
    pub chain: ChainSummary,
    pub hellinger: Option<HellingerSummary>,
    pub generalization_bound: Option<f64>,
    /// Inputs refused by validation; the rest of the grid still runs.
    pub rejected: Vec<String>,
    pub passed: bool,
}

pub fn run_theory(grid: &TheoryGrid) -> Result<TheoryReport> {
    let mut rejected = Vec::new();
    let mut mv = Vec::new();
    let mut cell = 0u64;
    for &m in &grid.m_values {
        for &alpha in &grid.alpha_values {
            cell += 1;
            if !(alpha > 0.0 && alpha <= 0.5) {
                rejected.push(format!("alpha {alpha}: must lie in (0, 1/2]"));
                continue;
            }
            let lf_error = 0.5 - alpha;
            let exact = mv_error_exact(m, lf_error);
            let hoeffding = mv_error_bound(m, alpha);
            let sim = simulate_mv_error(
                m,
                lf_error,
                grid.mc_trials.max(1000),
                grid.seed.wrapping_add(cell * 7919),
            )?;
            mv.push(MvRow {
                m,
                alpha,
                lf_error,
                hoeffding,
                exact,
                mc_mean: sim.mean,
                mc_std_error: sim.std_error,
                bound_holds: exact <= hoeffding,
                mc_within_3se: (sim.mean - exact).abs() <= 3.0 * sim.std_error,
            });
        }
    }

    let mut min_rows = Vec::new();
    let mut valid_lf_errors = Vec::new();
    for &e in &grid.lf_errors {
        match min_lfs(e) {
            Ok(m) => {
                let exact = mv_error_exact(m, e);
                let bound = mv_error_bound(m, 0.5 - e);
                let mv_multiplier = 1.0 / (1.0 - 2.0 * bound);
                let single_multiplier = 1.0 / (1.0 - 2.0 * e);
                min_rows.push(MinLfsRow {
                    lf_error: e,
                    m,
                    hoeffding: bound,
                    exact,
                    holds: exact <= e && bound <= e,
                    multiplier: MvComparison {
                        m,
                        lf_error: e,
                        mv_multiplier,
                        single_multiplier,
                        holds: mv_multiplier <= single_multiplier,
                    },
                });
                valid_lf_errors.push((m, e));
            }
            Err(err) => rejected.push(format!("lf_error {e}: {err}")),
        }
    }

    let mut chain = ChainSummary::default();
    let mut channel_eps = Vec::new();
    for &e in &grid.channel_eps {
        if (0.0..0.5).contains(&e) {
            channel_eps.push(e);
        } else {
            rejected.push(format!("channel eps {e}: must lie in [0, 1/2)"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed ^ 0xc4a1);
    for _ in 0..grid.joints {
        let s = rng.random_range(1..=grid.max_support.max(1));
        let p = FiniteJoint::random(s, &mut rng);
        let q = FiniteJoint::random(s, &mut rng);
        let runs = channel_eps
            .iter()
            .map(|&e| (e, None))
            .chain(valid_lf_errors.iter().map(|&(m, e)| (e, Some((m, e)))));
        for (e, with_mv) in runs {
            let entry = verify_rcgan_tv_chain(&p, &q, e, with_mv)?;
            chain.checks += 1;
            chain.max_tv_clean = chain.max_tv_clean.max(entry.tv_clean);
            if !entry.holds {
                chain.violations += 1;
                chain.failures.push(entry);
            }
        }
    }

    let hellinger = if grid.hellinger_pairs > 0 {
        Some(hellinger_tv_study(
            grid.hellinger_pairs,
            grid.max_support,
            grid.seed ^ 0x4e11,
        )?)
    } else {
        None
    };
    let generalization_bound = match &grid.generalization {
        Some(t) => match generalization_bound(t) {
            Ok(v) => Some(v),
            Err(err) => {
                rejected.push(format!("generalization inputs: {err}"));
                None
            }
        },
        None => None,
    };

    let passed = mv.iter().all(|r| r.bound_holds && r.mc_within_3se)
        && min_rows.iter().all(|r| r.holds && r.multiplier.holds)
        && chain.violations == 0
        && hellinger.as_ref().is_none_or(|h| h.chain_violations == 0);
    Ok(TheoryReport {
        mv,
        min_lfs: min_rows,
        chain,
        hellinger,
        generalization_bound,
        rejected,
        passed,
    })
}

impl TheoryReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "majority vote error");
        let _ = writeln!(
            s,
            "{:>4} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10}  ok",
            "m", "alpha", "eps_lf", "hoeffding", "exact", "mc", "mc_se"
        );
        for r in &self.mv {
            let _ = writeln!(
                s,
                "{:>4} {:>6.3} {:>8.3} {:>10.6} {:>10.6} {:>10.6} {:>10.6}  {}",
                r.m,
                r.alpha,
                r.lf_error,
                r.hoeffding,
                r.exact,
                r.mc_mean,
                r.mc_std_error,
                yes(r.bound_holds && r.mc_within_3se)
            );
        }
        let _ = writeln!(s, "\nminimum LF count");
        let _ = writeln!(
            s,
            "{:>8} {:>5} {:>10} {:>10} {:>10} {:>10}  ok",
            "eps_lf", "m", "hoeffding", "exact", "mult_mv", "mult_one"
        );
        for r in &self.min_lfs {
            let _ = writeln!(
                s,
                "{:>8.3} {:>5} {:>10.6} {:>10.6} {:>10.6} {:>10.6}  {}",
                r.lf_error,
                r.m,
                r.hoeffding,
                r.exact,
                r.multiplier.mv_multiplier,
                r.multiplier.single_multiplier,
                yes(r.holds && r.multiplier.holds)
            );
        }
        let _ = writeln!(
            s,
            "\nTV chain: {} checks, {} violations",
            self.chain.checks, self.chain.violations
        );
        if let Some(h) = &self.hellinger {
            let _ = writeln!(
                s,
                "\nHellinger/TV over {} pairs (D = sum (sqrt p - sqrt q)^2, H = sqrt D)",
                h.pairs
            );
            for r in &h.inequalities {
                let _ = writeln!(
                    s,
                    "  {:<10} {:<30} violations {:>5}  max excess {:+.3e}",
                    r.reading, r.inequality, r.violations, r.max_excess
                );
            }
            let universal = if h.universal_readings.is_empty() {
                "none".to_string()
            } else {
                h.universal_readings.join(", ")
            };
            let _ = writeln!(s, "  holds universally: {universal}");
            let _ = writeln!(
                s,
                "  D <= 2 TV and TV <= sqrt(D) sqrt(1 - D/4): {} violations",
                h.chain_violations
            );
        }
        if let Some(b) = self.generalization_bound {
            let _ = writeln!(s, "\ngeneralization bound: {b:.10}");
        }
        for r in &self.rejected {
            let _ = writeln!(s, "rejected: {r}");
        }
        let _ = writeln!(
            s,
            "\n{}",
            if self.passed {
                "all checks passed"
            } else {
                "CHECKS FAILED"
            }
        );
        s
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "NO"
    }
}
