//! Upper bounds on `E[T]` and the dominating sequence behind them.
//!
//! The general bound is
//! `E[T] <= m₁(λ₁) + m₂(λ₂) + (n₀ G₀ + m)(1 + γ)/γ`,
//! where `m_l(λ_l)` are the expected first hitting times of `C`, `G` the
//! dominating sequence with sum `m`, and `(γ, n₀)` the regularity
//! certificate. For birth-death pairs dominated by a reflected random walk
//! with down-probability `p` it is compared with the earlier second-moment
//! bound `E₁ = μ̂₂/γ + μ̂₁/γ²`; the first-moment bound there reads
//! `E₂ = μ̂₁(1 + γ)/γ`.
//!
//! `μ̂₂ = (2p-1)⁻¹(2 + 8(1-p)/(1-4p)) + 2/(2p-1) + 1`, which simplifies to
//! `12/(4p-1) + 1`; the middle fraction is negative for every admissible `p`.
//! It enters only through `E₁` and the identity `E₂ = (E₁ - μ̂₂/γ)(1 + γ)γ`.

use serde::{Deserialize, Serialize};

use crate::domination::{
    self, check_condition_a, check_gamma, estimate_renewal_tails, gamma0, gamma_analytic,
    random_walk_domination, ConditionAReport, DominatingSequence, RegularityCertificate,
    SE_MULTIPLIER,
};
use crate::error::{Error, Result, ResultExt};
use crate::exact::{self, hitting_time_distribution, product_tail};
use crate::kernel::{birth_death_schedule, BirthDeathSpec, KernelSchedule};
use crate::report::{Bound, Estimate};
use crate::simulate::{
    dirac, estimate_et, map_traces, mean_and_se, survival_curve, EtEstimate, SimulationPlan,
    TailPoint,
};

/// `m₁ + m₂ + (n₀ G₀ + m)(1 + γ)/γ`.
pub fn theorem1_bound(m1: f64, m2: f64, n0: usize, g0: f64, m: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    for (name, v) in [("m1", m1), ("m2", m2), ("G0", g0), ("m", m)] {
        if v.is_nan() || v < 0.0 {
            return Err(Error::domain(format!("{name} = {v} must be nonnegative")));
        }
    }
    Ok(m1 + m2 + (n0 as f64 * g0 + m) * (1.0 + gamma) / gamma)
}

/// `(1 - γ)^n`, the geometric bound on `P(τ_trials > n)`.
pub fn trial_tail_bound(gamma: f64, n: usize) -> f64 {
    (1.0 - gamma).powi(n as i32)
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.5 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("p = {p} must lie in (1/2, 1)")))
    }
}

/// `μ̂₁ = 2/(2p-1) + 1`.
pub fn mu_hat_1(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(2.0 / (2.0 * p - 1.0) + 1.0)
}

/// `μ̂₂ = (2p-1)⁻¹(2 + 8(1-p)/(1-4p)) + 2/(2p-1) + 1`.
pub fn mu_hat_2(p: f64) -> Result<f64> {
    check_p(p)?;
    let d = 2.0 * p - 1.0;
    Ok((2.0 + 8.0 * (1.0 - p) / (1.0 - 4.0 * p)) / d + 2.0 / d + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentBound {
    pub e1: f64,
    pub mu_hat_1: f64,
    pub mu_hat_2: f64,
}

/// `E₁ = μ̂₂/γ + μ̂₁/γ²`.
pub fn e1_bound(p: f64, gamma: f64) -> Result<SecondMomentBound> {
    check_gamma(gamma)?;
    let (mu1, mu2) = (mu_hat_1(p)?, mu_hat_2(p)?);
    Ok(SecondMomentBound {
        e1: mu2 / gamma + mu1 / (gamma * gamma),
        mu_hat_1: mu1,
        mu_hat_2: mu2,
    })
}

/// `E₂ = μ̂₁(1 + γ)/γ`.
pub fn e2_bound(p: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(mu_hat_1(p)? * (1.0 + gamma) / gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `γ(1 + γ) < 1` and `E₂ < E₁`.
    E2Tighter,
    /// `γ(1 + γ) < 1` yet `E₂ >= E₁`.
    E2NotTighter,
    /// `γ(1 + γ) >= 1`: the identity gives no ordering.
    Withheld,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub p: f64,
    pub gamma: f64,
    pub e1: f64,
    pub e2: f64,
    pub mu_hat_1: f64,
    pub mu_hat_2: f64,
    /// `|E₂ - (E₁ - μ̂₂/γ)(1 + γ)γ|`.
    pub identity_residual: f64,
    pub verdict: Verdict,
}

pub fn compare_bounds(p: f64, gamma: f64) -> Result<Comparison> {
    let first = e1_bound(p, gamma)?;
    let e2 = e2_bound(p, gamma)?;
    let via_identity = (first.e1 - first.mu_hat_2 / gamma) * (1.0 + gamma) * gamma;
    let verdict = if gamma * (1.0 + gamma) >= 1.0 {
        Verdict::Withheld
    } else if e2 < first.e1 {
        Verdict::E2Tighter
    } else {
        Verdict::E2NotTighter
    };
    Ok(Comparison {
        p,
        gamma,
        e1: first.e1,
        e2,
        mu_hat_1: first.mu_hat_1,
        mu_hat_2: first.mu_hat_2,
        identity_residual: (e2 - via_identity).abs(),
        verdict,
    })
}

/// Monte Carlo table `P̂(S_k = j, τ_trials >= k)` for `j <= max_j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    /// `table[k][j]`.
    pub table: Vec<Vec<f64>>,
}

impl TrialStats {
    pub fn new(table: Vec<Vec<f64>>) -> Self {
        TrialStats { table }
    }

    /// `a_j = Σ_{k<=j} P(S_k = j, τ >= k)` for `j = 0..=max_j`.
    pub fn column_sums(&self, max_j: usize) -> Vec<f64> {
        let mut a = vec![0.0; max_j + 1];
        for (k, row) in self.table.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(max_j + 1) {
                if k <= j {
                    a[j] += v;
                }
            }
        }
        a
    }
}

/// `Ŝ′_n = Σ_{j=0}^{n} G_{n-j-n₀} Σ_{k=0}^{j} P(S_k = j, τ >= k)`, `n = 0..=n_max`.
pub fn s_hat_prime(
    g: &DominatingSequence,
    n0: usize,
    stats: &TrialStats,
    n_max: usize,
) -> Vec<f64> {
    let a = stats.column_sums(n_max);
    (0..=n_max)
        .map(|n| {
            (0..=n)
                .map(|j| g.at(n as i64 - j as i64 - n0 as i64) * a[j])
                .sum()
        })
        .collect()
}

/// [`s_hat_prime`] plus the term `G_{n-n₀}` for the first trial.
///
/// Decomposing `{T′ > n}` by the last trial endpoint at or before `n`
/// includes the case where even the first endpoint `S_0` exceeds `n`; it
/// corresponds to `k = -1` with `S_{-1} = 0`, probability one, and is bounded
/// by `G_{n-n₀}`. Without it the sum is zero at `n = 0` while `P(T′ > 0) = 1`.
pub fn s_hat_prime_dominating(
    g: &DominatingSequence,
    n0: usize,
    stats: &TrialStats,
    n_max: usize,
) -> Vec<f64> {
    s_hat_prime(g, n0, stats, n_max)
        .into_iter()
        .enumerate()
        .map(|(n, s)| s + g.at(n as i64 - n0 as i64))
        .collect()
}

/// Trial-sequence statistics of a plan whose chains both start in `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimates {
    pub n_paths: usize,
    pub censored: usize,
    pub stats: TrialStats,
    /// `P̂(T′ > n)`.
    pub t_prime_tail: Vec<TailPoint>,
    /// `P̂(τ_trials > n)`.
    pub trial_tail: Vec<TailPoint>,
    /// Paths checked for `T <= θ₀¹ + Σ_n B_n 1{τ_trials > n}`.
    pub pathwise_checked: usize,
    pub pathwise_violations: usize,
    /// Violations of `T <= θ₀¹ + θ₀² + T′`.
    pub general_violations: usize,
}

struct PathTrials {
    s: Vec<usize>,
    tau_trials: Option<usize>,
    t_prime: Option<usize>,
    eq10: Option<bool>,
    general: Option<bool>,
}

/// Simulates `plan` and tabulates the trial statistics up to `max_j` and the
/// trial-count tail up to `max_trials`.
pub fn estimate_trial_statistics(
    plan: &SimulationPlan,
    max_j: usize,
    max_trials: usize,
) -> Result<TrialEstimates> {
    let rows = map_traces(plan, |_, tr| {
        let (th1, th2) = tr.theta0();
        let tp = tr.trials.t_prime();
        let checks = match (tr.t, th1, th2, tp) {
            (Some(t), Some(a), Some(b), Some(tp)) => (Some(t <= a + tp), Some(t <= a + b + tp)),
            _ => (None, None),
        };
        PathTrials {
            s: tr.trials.s.clone(),
            tau_trials: tr.trials.tau_trials,
            t_prime: tp,
            eq10: checks.0,
            general: checks.1,
        }
    })?;
    let n = rows.len() as f64;
    let max_k = rows.iter().map(|r| r.s.len()).max().unwrap_or(0);
    let mut table = vec![vec![0.0; max_j + 1]; max_k];
    for r in &rows {
        for (k, &s) in r.s.iter().enumerate() {
            if s <= max_j {
                table[k][s] += 1.0;
            }
        }
    }
    for row in &mut table {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    let censored = rows.iter().filter(|r| r.tau_trials.is_none()).count();
    let t_primes: Vec<usize> = rows.iter().filter_map(|r| r.t_prime).collect();
    let taus: Vec<usize> = rows.iter().filter_map(|r| r.tau_trials).collect();
    let checked = rows.iter().filter(|r| r.eq10.is_some()).count();
    Ok(TrialEstimates {
        n_paths: rows.len(),
        censored,
        stats: TrialStats::new(table),
        t_prime_tail: survival_curve(&t_primes, censored, max_j),
        trial_tail: survival_curve(&taus, censored, max_trials),
        pathwise_checked: checked,
        pathwise_violations: rows.iter().filter(|r| r.eq10 == Some(false)).count(),
        general_violations: rows.iter().filter(|r| r.general == Some(false)).count(),
    })
}

/// Mean first hitting time of one chain, exact when the chain is small.
pub fn first_hitting_mean(
    schedule: &KernelSchedule,
    initial: &[f64],
    horizon: usize,
    exact_cap: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    if schedule.size() <= exact_cap {
        let law = hitting_time_distribution(schedule, initial, horizon)?;
        return Ok(law.expectation);
    }
    let space = schedule.space().clone();
    let hits: Vec<Option<usize>> = {
        use rayon::prelude::*;
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let rng = crate::seed::path_rng(seed, i, 0);
                let mut w = crate::simulate::ChainWalker::new(schedule, initial, rng);
                if space.in_target(w.state()) {
                    return Some(0);
                }
                (1..=horizon).find(|_| {
                    w.step();
                    w.in_target()
                })
            })
            .collect()
    };
    if hits.iter().any(Option::is_none) {
        return Err(Error::domain(
            "first hitting time censored at the horizon; cannot estimate its mean",
        ));
    }
    let (mean, se) = mean_and_se(hits.iter().map(|h| h.unwrap() as f64), hits.len());
    Ok(Estimate::mc(mean, se))
}

fn conservative_upper(e: &Estimate) -> f64 {
    match (e.upper, e.se) {
        (Some(Bound::Finite(u)), _) => u,
        (Some(Bound::Unbounded), _) => f64::INFINITY,
        (None, Some(se)) => e.value + SE_MULTIPLIER * se,
        (None, None) => e.value,
    }
}

/// Knobs of the bound pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    /// Length of `Ŝ′` and of the `T′` survival curve.
    pub s_hat_len: usize,
    /// Largest `n` for the trial-tail check.
    pub trial_tail_len: usize,
    /// Largest single-chain / product state count handled by the exact oracle.
    pub exact_cap: usize,
    /// Paths per start time for the empirical dominating-sequence check;
    /// zero skips the check.
    pub condition_a_paths: usize,
    pub condition_a_horizon: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            s_hat_len: 200,
            trial_tail_len: 50,
            exact_cap: exact::DEFAULT_PRODUCT_CAP,
            condition_a_paths: 10_000,
            condition_a_horizon: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTailCheck {
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    /// `Ê[T] - 3·SE <= E_bound`.
    pub soundness: bool,
    /// Lower end of the exact `E[T]` bracket is at most `E_bound`.
    pub exact_soundness: Option<bool>,
    /// `n` where `P̂(τ_trials > n) > (1-γ)^n + 3·SE`.
    pub trial_tail_violations: Vec<usize>,
    /// `n` where `Ŝ′_n` (with the first-trial term) falls below `P̂(T′ > n) - 3·SE`.
    pub s_hat_violations: Vec<usize>,
    /// Same check for the double sum without the first-trial term.
    pub s_hat_double_sum_violations: Vec<usize>,
    pub pathwise_violations: usize,
    pub condition_a: Option<bool>,
}

impl Checks {
    /// Every check that is meant to hold does.
    pub fn all_pass(&self) -> bool {
        self.soundness
            && self.exact_soundness != Some(false)
            && self.trial_tail_violations.is_empty()
            && self.s_hat_violations.is_empty()
            && self.pathwise_violations == 0
            && self.condition_a != Some(false)
    }
}

/// Every input and output of the bound, serializable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub m1: Estimate,
    pub m2: Estimate,
    pub n0: usize,
    pub g0: Estimate,
    pub m: Estimate,
    pub gamma: Estimate,
    pub certificate: RegularityCertificate,
    pub e_bound: Estimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    pub mc_et: EtEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_et: Option<Estimate>,
    /// Both chains restarted in `C`; the source of `Ŝ′`.
    pub trials: TrialEstimates,
    pub s_hat_prime: Vec<f64>,
    pub s_hat_prime_double_sum: Vec<f64>,
    pub trial_tail_check: Vec<TrialTailCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_a: Option<Vec<ConditionAReport>>,
    pub checks: Checks,
}

/// Plan restarted with both chains at their smallest target state.
fn restarted_in_target(plan: &SimulationPlan) -> SimulationPlan {
    let mut p = plan.clone();
    p.initial1 = dirac(p.schedule1.size(), p.schedule1.space().target()[0]);
    p.initial2 = dirac(p.schedule2.size(), p.schedule2.space().target()[0]);
    p
}

fn supported_in_target(schedule: &KernelSchedule, initial: &[f64]) -> bool {
    initial
        .iter()
        .enumerate()
        .all(|(x, &w)| w == 0.0 || schedule.space().in_target(x))
}

/// Assembles the bound for an arbitrary chain pair from a dominating
/// sequence and a regularity certificate, and checks it against Monte Carlo
/// and, when small enough, the exact oracle.
pub fn bound_report(
    plan: &SimulationPlan,
    g: &DominatingSequence,
    certificate: &RegularityCertificate,
    comparison_p: Option<f64>,
    settings: &ReportSettings,
) -> Result<BoundReport> {
    plan.validate()?;
    let m_total = g
        .m()
        .ok_or_else(|| Error::domain("dominating sequence has no certified tail bound"))?;
    let hit_seed = crate::seed::derive_seed(plan.master_seed, 17);
    let m1 = first_hitting_mean(
        &plan.schedule1,
        &plan.initial1,
        plan.horizon,
        settings.exact_cap,
        plan.n_paths,
        hit_seed,
    )
    .context("first hitting time of chain 1")?;
    let m2 = first_hitting_mean(
        &plan.schedule2,
        &plan.initial2,
        plan.horizon,
        settings.exact_cap,
        plan.n_paths,
        hit_seed ^ 1,
    )
    .context("first hitting time of chain 2")?;
    let (m1_up, m2_up) = (conservative_upper(&m1), conservative_upper(&m2));
    if !m1_up.is_finite() || !m2_up.is_finite() {
        return Err(Error::domain(
            "expected first hitting time is not certified finite within the horizon",
        ));
    }
    let gamma = certificate.gamma;
    let n0 = certificate.n0;
    let e_bound = theorem1_bound(m1_up, m2_up, n0, g.g0(), m_total, gamma)?;
    let comparison = comparison_p.map(|p| compare_bounds(p, gamma)).transpose()?;

    let mut sim = plan.clone();
    sim.n0 = n0;
    let mc_et = estimate_et(&sim, false).context("Monte Carlo estimate of E[T]")?;
    let se = mc_et.mean.se.unwrap_or(0.0);
    let soundness = mc_et.mean.value - SE_MULTIPLIER * se <= e_bound;

    let exact_et = if plan.schedule1.size() * plan.schedule2.size() <= settings.exact_cap {
        Some(
            product_tail(
                &plan.schedule1,
                &plan.schedule2,
                &plan.initial1,
                &plan.initial2,
                plan.horizon,
                settings.exact_cap,
            )?
            .expectation,
        )
    } else {
        None
    };
    let exact_soundness = exact_et.map(|e| e.value <= e_bound);

    let trial_plan = if supported_in_target(&plan.schedule1, &plan.initial1)
        && supported_in_target(&plan.schedule2, &plan.initial2)
    {
        sim.clone()
    } else {
        restarted_in_target(&sim)
    };
    let trials =
        estimate_trial_statistics(&trial_plan, settings.s_hat_len, settings.trial_tail_len)
            .context("trial statistics")?;
    let s_hat = s_hat_prime_dominating(g, n0, &trials.stats, settings.s_hat_len);
    let s_hat_double = s_hat_prime(g, n0, &trials.stats, settings.s_hat_len);
    let below = |s: &[f64]| -> Vec<usize> {
        trials
            .t_prime_tail
            .iter()
            .filter(|pt| s[pt.n] < pt.p - SE_MULTIPLIER * pt.se)
            .map(|pt| pt.n)
            .collect()
    };
    let s_hat_violations = below(&s_hat);
    let s_hat_double_sum_violations = below(&s_hat_double);
    let trial_tail_check: Vec<TrialTailCheck> = trials
        .trial_tail
        .iter()
        .map(|pt| TrialTailCheck {
            n: pt.n,
            estimate: pt.p,
            se: pt.se,
            bound: trial_tail_bound(gamma, pt.n),
        })
        .collect();
    let trial_tail_violations = trial_tail_check
        .iter()
        .filter(|c| c.estimate > c.bound + SE_MULTIPLIER * c.se)
        .map(|c| c.n)
        .collect();

    let condition_a = if settings.condition_a_paths > 0 {
        let mut reports = Vec::new();
        for (i, s) in [&plan.schedule1, &plan.schedule2].into_iter().enumerate() {
            let t_grid: Vec<usize> = (0..s.tail_start() + s.tail_period()).collect();
            let surface = estimate_renewal_tails(
                s,
                &t_grid,
                s.space().target(),
                settings.condition_a_horizon,
                settings.condition_a_paths,
                crate::seed::derive_seed(plan.master_seed, 100 + i as u64),
            )?;
            reports.push(check_condition_a(&surface, g));
        }
        Some(reports)
    } else {
        None
    };

    let checks = Checks {
        soundness,
        exact_soundness,
        trial_tail_violations,
        s_hat_violations,
        s_hat_double_sum_violations,
        pathwise_violations: trials.pathwise_violations,
        condition_a: condition_a.as_ref().map(|r| r.iter().all(|c| c.pass)),
    };
    Ok(BoundReport {
        m1,
        m2,
        n0,
        g0: Estimate::analytic(g.g0()),
        m: Estimate::analytic(m_total),
        gamma: Estimate::analytic(gamma),
        certificate: certificate.clone(),
        e_bound: Estimate::analytic(e_bound),
        comparison,
        mc_et,
        exact_et,
        trials,
        s_hat_prime: s_hat,
        s_hat_prime_double_sum: s_hat_double,
        trial_tail_check,
        condition_a,
        checks,
    })
}

/// A pair of birth-death chains and Monte Carlo settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathPlan {
    pub chain1: BirthDeathSpec,
    pub chain2: BirthDeathSpec,
    pub initial1: Vec<f64>,
    pub initial2: Vec<f64>,
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
}

/// Inputs of the birth-death bound derived from the walk parameter `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathInputs {
    pub p: f64,
    pub sup_alpha_variance: f64,
    pub gamma0: f64,
    pub mu_hat: f64,
    pub domination: DominatingSequence,
    pub certificate: RegularityCertificate,
}

/// Checks `p(1-p) >= sup α(1-α)` and downward drift, then builds the random
/// walk dominating sequence and the analytic `γ`. `mu_hat` defaults to
/// `μ̂₁ = 2/(2p-1) + 1`.
pub fn birth_death_inputs(
    chain1: &BirthDeathSpec,
    chain2: &BirthDeathSpec,
    p: f64,
    n_terms: usize,
    mu_hat: Option<f64>,
) -> Result<BirthDeathInputs> {
    let domination = random_walk_domination(p, n_terms)?;
    let sup = chain1.sup_alpha_variance().max(chain2.sup_alpha_variance());
    if !domination::domination_valid_for(p, sup) {
        return Err(Error::domain(format!(
            "p(1-p) = {} is below sup α(1-α) = {sup}; the walk does not dominate the chains",
            p * (1.0 - p)
        )));
    }
    let drift = chain1.inf_interior_alpha().min(chain2.inf_interior_alpha());
    if drift < 0.5 {
        return Err(Error::domain(format!(
            "down-probability {drift} below 1/2 away from the origin; the walk comparison needs downward drift"
        )));
    }
    let g0 = gamma0(chain1.inf_alpha0(), chain2.inf_alpha0())?;
    let mu_hat = match mu_hat {
        Some(m) => m,
        None => mu_hat_1(p)?,
    };
    let certificate = gamma_analytic(g0, mu_hat)?;
    Ok(BirthDeathInputs {
        p,
        sup_alpha_variance: sup,
        gamma0: g0,
        mu_hat,
        domination,
        certificate,
    })
}

impl BirthDeathPlan {
    pub fn simulation_plan(&self) -> Result<SimulationPlan> {
        Ok(SimulationPlan {
            schedule1: birth_death_schedule(&self.chain1).context("chain 1")?,
            schedule2: birth_death_schedule(&self.chain2).context("chain 2")?,
            initial1: self.initial1.clone(),
            initial2: self.initial2.clone(),
            horizon: self.horizon,
            n_paths: self.n_paths,
            master_seed: self.seed,
            n0: 0,
        })
    }
}

/// The whole birth-death pipeline: domination check, `G`, analytic `γ`,
/// exact `m₁`/`m₂`, the bound, `E₁`/`E₂`, `Ŝ′` and Monte Carlo checks.
pub fn full_report(
    plan: &BirthDeathPlan,
    p: f64,
    n_terms: usize,
    mu_hat: Option<f64>,
    settings: &ReportSettings,
) -> Result<(BirthDeathInputs, BoundReport)> {
    let inputs = birth_death_inputs(&plan.chain1, &plan.chain2, p, n_terms, mu_hat)?;
    let sim = plan.simulation_plan()?;
    let report = bound_report(
        &sim,
        &inputs.domination,
        &inputs.certificate,
        Some(p),
        settings,
    )?;
    Ok((inputs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn theorem1_examples() {
        assert_abs_diff_eq!(theorem1_bound(0.0, 0.0, 0, 1.0, 2.0, 0.5).unwrap(), 6.0);
        assert_abs_diff_eq!(theorem1_bound(3.0, 4.0, 2, 1.5, 5.0, 0.25).unwrap(), 47.0);
        assert_abs_diff_eq!(theorem1_bound(0.0, 0.0, 0, 1.0, 3.7, 1.0).unwrap(), 7.4);
        assert!(theorem1_bound(0.0, 0.0, 0, 1.0, 2.0, 0.0).is_err());
        assert!(theorem1_bound(0.0, 0.0, 0, 1.0, 2.0, -0.5).is_err());
    }

    #[test]
    fn trial_tail_examples() {
        assert_eq!(trial_tail_bound(1.0, 1), 0.0);
        assert_eq!(trial_tail_bound(1.0, 7), 0.0);
        assert_eq!(trial_tail_bound(0.5, 3), 0.125);
        assert_eq!(trial_tail_bound(0.3, 0), 1.0);
    }

    #[test]
    fn birth_death_constants() {
        let b = e1_bound(0.75, 0.1).unwrap();
        assert_abs_diff_eq!(b.mu_hat_1, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.mu_hat_2, 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.e1, 570.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e2_bound(0.75, 0.1).unwrap(), 55.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e2_bound(0.75, 1.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e2_bound(0.75, 0.0625).unwrap(), 85.0, epsilon = 1e-12);
        assert!(e1_bound(0.5, 0.1).is_err());
        assert!(e1_bound(0.75, 0.0).is_err());
        assert!(e1_bound(0.5 + 1e-9, 0.1).unwrap().e1 > 1e9);
    }

    #[test]
    fn mu_hat_2_closed_form() {
        // The expression simplifies to 12/(4p - 1) + 1.
        for &p in &[0.55, 0.6, 0.75, 0.9, 0.99] {
            assert_abs_diff_eq!(
                mu_hat_2(p).unwrap(),
                12.0 / (4.0 * p - 1.0) + 1.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn comparison_identity_and_verdicts() {
        let c = compare_bounds(0.75, 0.1).unwrap();
        assert!(c.identity_residual <= 1e-12);
        assert_eq!(c.verdict, Verdict::E2Tighter);
        assert_eq!(
            compare_bounds(0.75, 1.0).unwrap().verdict,
            Verdict::Withheld
        );
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert_eq!(
            compare_bounds(0.6, golden * 0.999).unwrap().verdict,
            Verdict::E2Tighter
        );
    }

    #[test]
    fn s_hat_prime_examples() {
        let g = DominatingSequence::new(vec![1.0, 0.5, 0.25, 0.1], None).unwrap();
        let stats = TrialStats::new(vec![vec![0.0, 1.0, 0.0, 0.0]]);
        let s = s_hat_prime(&g, 0, &stats, 3);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 1.0);
        assert_eq!(s[2], 0.5);
        let d = s_hat_prime_dominating(&g, 0, &stats, 3);
        assert_eq!(d[0], 1.0);
        assert_eq!(d[1], 1.5);

        let zero = TrialStats::new(vec![vec![0.0; 4]; 3]);
        assert!(s_hat_prime(&g, 0, &zero, 3).iter().all(|&v| v == 0.0));

        let flat = DominatingSequence::new(vec![2.0; 6], None).unwrap();
        let stats = TrialStats::new(vec![
            vec![0.0, 0.2, 0.1, 0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.4, 0.1, 0.0, 0.2],
        ]);
        let a = stats.column_sums(5);
        let s = s_hat_prime(&flat, 1, &stats, 5);
        let mut acc = 0.0;
        for n in 0..=5 {
            acc += a[n];
            assert_abs_diff_eq!(s[n], 2.0 * acc, epsilon = 1e-12);
        }
    }

    #[test]
    fn drift_and_variance_preconditions() {
        let good = BirthDeathSpec::constant(0.75, 10);
        assert!(birth_death_inputs(&good, &good, 0.75, 100, None).is_ok());
        let wide = BirthDeathSpec::constant(0.7, 10);
        let e = birth_death_inputs(&wide, &good, 0.75, 100, None).unwrap_err();
        assert!(e.to_string().contains("sup"));
        let up = BirthDeathSpec::constant(0.2, 10);
        assert!(birth_death_inputs(&up, &good, 0.75, 100, None).is_err());
        assert!(birth_death_inputs(&good, &good, 0.5, 100, None).is_err());
    }
}
