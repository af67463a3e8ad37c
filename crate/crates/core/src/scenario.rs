//! Config-driven runs: a versioned JSON scenario in, a JSON report and
//! optional CSV tables out.
//!
//! ```
//! use simrenew::scenario::{run, RunOptions, Scenario, Subcommand};
//!
//! let sc = Scenario::from_json(r#"{
//!     "version": 1,
//!     "name": "two-state",
//!     "chains": [
//!         {"kind": "explicit", "states": 2, "tail": {"kind": "constant", "matrices": [[0.5, 0.5], [0.5, 0.5]]}},
//!         {"kind": "birth_death", "tail": {"kind": "constant", "alphas": 0.75}, "cap": 4}
//!     ],
//!     "initial": [1, 0],
//!     "horizon": 500,
//!     "n_paths": 2000,
//!     "seed": 1
//! }"#).unwrap();
//! let out = run(Subcommand::Simulate, &sc, &RunOptions::default()).unwrap();
//! assert_eq!(out.exit_code, 0);
//! assert_eq!(out.report["result"]["mean"]["provenance"], "mc");
//! ```

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{
    birth_death_inputs, bound_report, compare_bounds, BoundReport, Comparison, ReportSettings,
};
use crate::domination::{
    check_condition_a, estimate_gamma, estimate_renewal_tails, random_walk_domination,
    ConditionBReading, Conditioning, DominatingSequence, GammaGrid, RegularityCertificate,
};
use crate::error::{Error, Result as ModelResult, ResultExt};
use crate::exact::{hitting_time_distribution, product_tail};
use crate::kernel::{
    birth_death_schedule, validate_schedule, AlphaRow, AlphaTail, BirthDeathSpec, KernelSchedule,
    Matrix, StateSpace, Tail,
};
use crate::seed::{derive_seed, with_workers};
use crate::simulate::{check_distribution, dirac, estimate_et, SimulationPlan};

pub const SCHEMA_VERSION: u32 = 1;

/// Report field holding the wall-clock time; ignored by [`comparable`].
pub const TIMESTAMP_FIELD: &str = "generated_at_unix";

pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const STATISTICAL: i32 = 2;
    pub const CONFIG: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG,
            RunError::Model(e) => match e.root() {
                Error::AllCensored { .. } => exit::STATISTICAL,
                _ => exit::VALIDATION,
            },
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "matrices", rename_all = "snake_case")]
pub enum MatrixTail {
    Constant(Vec<Vec<f64>>),
    Periodic(Vec<Vec<Vec<f64>>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainConfig {
    /// Transition matrices given row by row; `body[t]` is `P_t`.
    Explicit {
        states: usize,
        #[serde(default = "default_target")]
        target_set: Vec<usize>,
        #[serde(default)]
        body: Vec<Vec<Vec<f64>>>,
        tail: MatrixTail,
    },
    BirthDeath(BirthDeathSpec),
}

fn default_target() -> Vec<usize> {
    vec![0]
}

impl ChainConfig {
    /// Schedule without the stochasticity checks, so that `validate` can list
    /// every violation.
    fn build_unvalidated(&self) -> ModelResult<KernelSchedule> {
        match self {
            ChainConfig::Explicit {
                states,
                target_set,
                body,
                tail,
            } => {
                let space = StateSpace::new(*states, target_set.iter().copied())?;
                let body = body
                    .iter()
                    .map(|m| Matrix::from_rows(m))
                    .collect::<ModelResult<Vec<_>>>()?;
                let tail = match tail {
                    MatrixTail::Constant(m) => Tail::Constant(Matrix::from_rows(m)?),
                    MatrixTail::Periodic(ms) => Tail::Periodic(
                        ms.iter()
                            .map(|m| Matrix::from_rows(m))
                            .collect::<ModelResult<Vec<_>>>()?,
                    ),
                };
                Ok(KernelSchedule::new_unvalidated(space, body, tail))
            }
            ChainConfig::BirthDeath(spec) => birth_death_schedule(spec),
        }
    }

    fn build(&self) -> ModelResult<KernelSchedule> {
        let s = self.build_unvalidated()?;
        let report = validate_schedule(&s);
        if report.is_valid() {
            Ok(s)
        } else {
            Err(Error::InvalidSchedule(report))
        }
    }

    fn birth_death(&self) -> Option<&BirthDeathSpec> {
        match self {
            ChainConfig::BirthDeath(s) => Some(s),
            ChainConfig::Explicit { .. } => None,
        }
    }
}

/// A start state or a full initial law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    State(usize),
    Distribution(Vec<f64>),
}

impl InitialConfig {
    fn resolve(&self, size: usize) -> ModelResult<Vec<f64>> {
        let v = match self {
            InitialConfig::State(x) if *x < size => dirac(size, *x),
            InitialConfig::State(x) => {
                return Err(Error::InvalidDistribution(format!(
                    "start state {x} outside 0..{size}"
                )))
            }
            InitialConfig::Distribution(v) => v.clone(),
        };
        check_distribution(&v, size)?;
        Ok(v)
    }
}

fn default_n_terms() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DominationConfig {
    /// Return-time tails of the reflected ±1 walk with down-probability `p`.
    RandomWalk {
        p: f64,
        #[serde(default = "default_n_terms")]
        n_terms: usize,
    },
    /// A user-supplied nonincreasing sequence and a bound on its tail sum.
    Given { values: Vec<f64>, tail_bound: f64 },
}

impl DominationConfig {
    fn build(&self) -> ModelResult<DominatingSequence> {
        match self {
            DominationConfig::RandomWalk { p, n_terms } => random_walk_domination(*p, *n_terms),
            DominationConfig::Given { values, tail_bound } => {
                DominatingSequence::new(values.clone(), Some(*tail_bound))
            }
        }
    }

    fn p(&self) -> Option<f64> {
        match self {
            DominationConfig::RandomWalk { p, .. } => Some(*p),
            DominationConfig::Given { .. } => None,
        }
    }
}

/// Where `γ` comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSource {
    /// `γ₀^{μ̂/γ₀}` for birth-death pairs; `mu_hat` defaults to `2/(2p-1) + 1`.
    Analytic {
        #[serde(default)]
        mu_hat: Option<f64>,
    },
    /// Monte Carlo over the `condition_check` grid; the smaller certificate
    /// of the two chains wins.
    Empirical,
    Given {
        gamma: f64,
        n0: usize,
    },
}

impl Default for GammaSource {
    fn default() -> Self {
        GammaSource::Analytic { mu_hat: None }
    }
}

/// Grids for the empirical condition checkers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionCheckConfig {
    /// Start / base times; defaults to every time up to one full tail period.
    pub t_grid: Option<Vec<usize>>,
    pub lag_grid: Vec<usize>,
    pub horizon: usize,
    pub n_paths: usize,
    pub n0_candidate: usize,
    pub reading: ConditionBReading,
    pub conditioning: Conditioning,
}

impl Default for ConditionCheckConfig {
    fn default() -> Self {
        ConditionCheckConfig {
            t_grid: None,
            lag_grid: (1..=20).collect(),
            horizon: 200,
            n_paths: 10_000,
            n0_candidate: 0,
            reading: ConditionBReading::BaseTime,
            conditioning: Conditioning::StartInState,
        }
    }
}

impl ConditionCheckConfig {
    fn t_grid_for(&self, s: &KernelSchedule) -> Vec<usize> {
        self.t_grid
            .clone()
            .unwrap_or_else(|| (0..s.tail_start() + s.tail_period()).collect())
    }

    fn gamma_grid(&self, s: &KernelSchedule) -> GammaGrid {
        GammaGrid {
            n0_candidate: self.n0_candidate,
            t_grid: self.t_grid_for(s),
            lag_grid: self.lag_grid.clone(),
            n_paths: self.n_paths,
            reading: self.reading,
            conditioning: self.conditioning.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub p_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for reports; the command line overrides it.
    pub dir: Option<String>,
}

/// A complete, versioned run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub chains: [ChainConfig; 2],
    pub initial: [InitialConfig; 2],
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Threshold used when building the renewal trial sequence.
    #[serde(default)]
    pub n0: usize,
    #[serde(default)]
    pub domination: Option<DominationConfig>,
    #[serde(default)]
    pub gamma: GammaSource,
    #[serde(default)]
    pub condition_check: ConditionCheckConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub report: ReportSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    /// Parses and checks the schema version; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        if sc.version != SCHEMA_VERSION {
            return Err(RunError::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                sc.version
            )));
        }
        if sc.name.is_empty() {
            return Err(RunError::Config("name must be nonempty".into()));
        }
        Ok(sc)
    }

    /// The birth-death example with `α ≡ β ≡ 0.75`, `p = 0.75`, both chains
    /// started at the origin.
    pub fn birth_death_example() -> Self {
        let chain = ChainConfig::BirthDeath(BirthDeathSpec {
            alpha_table: Vec::new(),
            tail: AlphaTail::Constant(AlphaRow::Uniform(0.75)),
            cap: 50,
        });
        Scenario {
            version: SCHEMA_VERSION,
            name: "birth-death-0.75".into(),
            chains: [chain.clone(), chain],
            initial: [InitialConfig::State(0), InitialConfig::State(0)],
            horizon: 5000,
            n_paths: 100_000,
            seed: 20_240_601,
            n0: 0,
            domination: Some(DominationConfig::RandomWalk {
                p: 0.75,
                n_terms: default_n_terms(),
            }),
            gamma: GammaSource::default(),
            condition_check: ConditionCheckConfig::default(),
            compare: None,
            report: ReportSettings::default(),
            output: OutputConfig::default(),
        }
    }

    fn resolve(&self) -> ModelResult<Resolved> {
        let s1 = self.chains[0].build().context("chain 1")?;
        let s2 = self.chains[1].build().context("chain 2")?;
        let i1 = self.initial[0]
            .resolve(s1.size())
            .context("initial law of chain 1")?;
        let i2 = self.initial[1]
            .resolve(s2.size())
            .context("initial law of chain 2")?;
        if self.horizon == 0 || self.n_paths == 0 {
            return Err(Error::domain("horizon and n_paths must be positive"));
        }
        Ok(Resolved {
            plan: SimulationPlan {
                schedule1: s1,
                schedule2: s2,
                initial1: i1,
                initial2: i2,
                horizon: self.horizon,
                n_paths: self.n_paths,
                master_seed: self.seed,
                n0: self.n0,
            },
        })
    }

    fn birth_death_pair(&self) -> Option<(&BirthDeathSpec, &BirthDeathSpec)> {
        Some((self.chains[0].birth_death()?, self.chains[1].birth_death()?))
    }
}

struct Resolved {
    plan: SimulationPlan,
}

impl Resolved {
    fn schedules(&self) -> [&KernelSchedule; 2] {
        [&self.plan.schedule1, &self.plan.schedule2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Validate,
    Simulate,
    Exact,
    ConditionCheck,
    Bound,
    Compare,
    ReproduceBirthDeath,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Validate => "validate",
            Subcommand::Simulate => "simulate",
            Subcommand::Exact => "exact",
            Subcommand::ConditionCheck => "condition-check",
            Subcommand::Bound => "bound",
            Subcommand::Compare => "compare",
            Subcommand::ReproduceBirthDeath => "reproduce-sec3",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide. Never changes the results.
    pub workers: usize,
    pub seed: Option<u64>,
}

/// Plot-ready rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File-name suffix.
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    pub tables: Vec<Table>,
    pub diagnostics: Vec<String>,
}

/// Drops the timestamp so that two reports can be compared byte for byte.
pub fn comparable(report: &Value) -> Value {
    let mut v = report.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove(TIMESTAMP_FIELD);
    }
    v
}

struct Body {
    result: Value,
    tables: Vec<Table>,
    diagnostics: Vec<String>,
    failed: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs one subcommand. Model errors come back as `Err`; statistical check
/// failures come back as an `Outcome` with exit code 2.
pub fn run(sub: Subcommand, scenario: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut sc = scenario.clone();
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    let body = with_workers(opts.workers, || -> Result<Body> {
        match sub {
            Subcommand::Validate => Ok(validate(&sc)),
            Subcommand::Simulate => simulate(&sc),
            Subcommand::Exact => exact(&sc),
            Subcommand::ConditionCheck => condition_check(&sc),
            Subcommand::Bound | Subcommand::ReproduceBirthDeath => bound(&sc),
            Subcommand::Compare => compare(&sc),
        }
    })?;
    let exit_code = if body.failed {
        if sub == Subcommand::Validate {
            exit::VALIDATION
        } else {
            exit::STATISTICAL
        }
    } else {
        exit::OK
    };
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "subcommand": sub.name(),
        TIMESTAMP_FIELD: now,
        "status": if body.failed { "failed" } else { "ok" },
        "diagnostics": body.diagnostics,
        "config": to_value(&sc),
        "result": body.result,
    });
    Ok(Outcome {
        exit_code,
        report,
        tables: body.tables,
        diagnostics: body.diagnostics,
    })
}

fn validate(sc: &Scenario) -> Body {
    let mut diagnostics = Vec::new();
    let mut chains = Vec::new();
    let mut sizes = Vec::new();
    for (i, c) in sc.chains.iter().enumerate() {
        match c.build_unvalidated() {
            Ok(s) => {
                let report = validate_schedule(&s);
                for v in &report.violations {
                    diagnostics.push(format!("chain {}: {v}", i + 1));
                }
                sizes.push(Some(s.size()));
                chains.push(json!({
                    "states": s.size(),
                    "target": s.space().target(),
                    "tail_start": s.tail_start(),
                    "tail_period": s.tail_period(),
                    "valid": report.is_valid(),
                    "violations": report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                }));
            }
            Err(e) => {
                diagnostics.push(format!("chain {}: {e}", i + 1));
                sizes.push(None);
                chains.push(json!({ "valid": false, "error": e.to_string() }));
            }
        }
    }
    for (i, (init, size)) in sc.initial.iter().zip(&sizes).enumerate() {
        if let Some(size) = size {
            if let Err(e) = init.resolve(*size) {
                diagnostics.push(format!("initial law of chain {}: {e}", i + 1));
            }
        }
    }
    if sc.horizon == 0 || sc.n_paths == 0 {
        diagnostics.push("horizon and n_paths must be positive".into());
    }
    let mut domination = Value::Null;
    if let Some(d) = &sc.domination {
        match d.build() {
            Err(e) => diagnostics.push(format!("dominating sequence: {e}")),
            Ok(g) => {
                domination = json!({ "g0": g.g0(), "m": g.m() });
                if let (Some((a, b)), Some(p)) = (sc.birth_death_pair(), d.p()) {
                    let mu = match sc.gamma {
                        GammaSource::Analytic { mu_hat } => mu_hat,
                        _ => None,
                    };
                    if let Err(e) = birth_death_inputs(a, b, p, 2, mu) {
                        diagnostics.push(format!("birth-death bound: {e}"));
                    }
                }
            }
        }
    }
    if let GammaSource::Given { gamma, n0 } = sc.gamma {
        if let Err(e) = RegularityCertificate::given(gamma, n0) {
            diagnostics.push(format!("gamma: {e}"));
        }
    }
    let valid = diagnostics.is_empty();
    Body {
        result: json!({ "valid": valid, "chains": chains, "domination": domination }),
        tables: Vec::new(),
        diagnostics,
        failed: !valid,
    }
}

fn simulate(sc: &Scenario) -> Result<Body> {
    let r = sc.resolve()?;
    let mut est = estimate_et(&r.plan, true)?;
    let paths = est.paths.take().unwrap_or_default();
    let mut t = Table::new(
        "paths",
        &[
            "path_id",
            "T",
            "theta0_1",
            "theta0_2",
            "tau_trials",
            "censored",
        ],
    );
    for p in &paths {
        t.push(vec![
            p.path_id.to_string(),
            opt(p.t),
            opt(p.theta0_1),
            opt(p.theta0_2),
            opt(p.tau_trials),
            p.censored.to_string(),
        ]);
    }
    let mut tail = Table::new("tail", &["n", "p", "se"]);
    for pt in &est.tail {
        tail.push(vec![pt.n.to_string(), pt.p.to_string(), pt.se.to_string()]);
    }
    let mut diagnostics = Vec::new();
    if est.lower_bound_only {
        diagnostics.push(format!(
            "{} of {} paths censored at the horizon; the mean is a lower bound",
            est.censored, est.n_paths
        ));
    }
    Ok(Body {
        result: to_value(&est),
        tables: vec![t, tail],
        diagnostics,
        failed: false,
    })
}

fn exact(sc: &Scenario) -> Result<Body> {
    let r = sc.resolve()?;
    let p = &r.plan;
    let h1 = hitting_time_distribution(&p.schedule1, &p.initial1, p.horizon).context("chain 1")?;
    let h2 = hitting_time_distribution(&p.schedule2, &p.initial2, p.horizon).context("chain 2")?;
    let prod = product_tail(
        &p.schedule1,
        &p.schedule2,
        &p.initial1,
        &p.initial2,
        p.horizon,
        sc.report.exact_cap,
    )?;
    let mut hitting = Table::new("hitting", &["chain", "n", "mass", "survival"]);
    for (c, law) in [&h1, &h2].into_iter().enumerate() {
        for (n, (m, s)) in law.table.mass.iter().zip(&law.survival).enumerate() {
            hitting.push(vec![
                (c + 1).to_string(),
                n.to_string(),
                m.to_string(),
                s.to_string(),
            ]);
        }
    }
    let mut product = Table::new("product", &["n", "mass", "survival"]);
    for (n, (m, s)) in prod.table.mass.iter().zip(&prod.survival).enumerate() {
        product.push(vec![n.to_string(), m.to_string(), s.to_string()]);
    }
    let mut diagnostics = Vec::new();
    if prod.certificate.is_none() {
        diagnostics.push("no tail contraction certified; E[T] upper end is unbounded".into());
    }
    Ok(Body {
        result: json!({ "hitting": [h1, h2], "product": prod }),
        tables: vec![hitting, product],
        diagnostics,
        failed: false,
    })
}

fn condition_check(sc: &Scenario) -> Result<Body> {
    let r = sc.resolve()?;
    let cc = &sc.condition_check;
    let g = sc
        .domination
        .as_ref()
        .map(DominationConfig::build)
        .transpose()?;
    let mut tails = Table::new("renewal_tails", &["chain", "t", "n", "g", "se", "argmax"]);
    let mut grid = Table::new(
        "gamma_grid",
        &[
            "chain",
            "base",
            "lag",
            "state",
            "observations",
            "estimate",
            "se",
        ],
    );
    let mut chains = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failed = false;
    for (c, s) in r.schedules().into_iter().enumerate() {
        let surface = estimate_renewal_tails(
            s,
            &cc.t_grid_for(s),
            s.space().target(),
            cc.horizon,
            cc.n_paths,
            derive_seed(sc.seed, 200 + c as u64),
        )
        .context(format!("chain {}", c + 1))?;
        for row in &surface.rows {
            for n in 0..row.g.len() {
                tails.push(vec![
                    (c + 1).to_string(),
                    row.t.to_string(),
                    n.to_string(),
                    row.g[n].to_string(),
                    row.se[n].to_string(),
                    row.argmax[n].to_string(),
                ]);
            }
        }
        let cond_a = g.as_ref().map(|g| check_condition_a(&surface, g));
        if let Some(a) = &cond_a {
            if !a.pass {
                failed = true;
                diagnostics.push(format!(
                    "chain {}: renewal tails exceed the dominating sequence at {} points",
                    c + 1,
                    a.flags.len()
                ));
            }
        }
        let gamma = estimate_gamma(s, &cc.gamma_grid(s), derive_seed(sc.seed, 300 + c as u64))
            .context(format!("chain {}", c + 1))?;
        for pt in gamma.points.iter().chain(&gamma.flagged) {
            grid.push(vec![
                (c + 1).to_string(),
                pt.base.to_string(),
                pt.lag.to_string(),
                opt(pt.state),
                pt.observations.to_string(),
                pt.estimate.to_string(),
                pt.se.to_string(),
            ]);
        }
        if gamma.certificate.is_none() {
            diagnostics.push(format!(
                "chain {}: no positive regularity constant certified (smallest estimate {})",
                c + 1,
                gamma.min_estimate
            ));
        }
        chains.push(json!({
            "renewal_tails": surface,
            "condition_a": cond_a,
            "gamma": gamma,
        }));
    }
    Ok(Body {
        result: json!({ "chains": chains }),
        tables: vec![tails, grid],
        diagnostics,
        failed,
    })
}

/// `γ` for the pair from the configured source.
fn certificate(sc: &Scenario, r: &Resolved, p: Option<f64>) -> Result<RegularityCertificate> {
    match &sc.gamma {
        GammaSource::Given { gamma, n0 } => Ok(RegularityCertificate::given(*gamma, *n0)?),
        GammaSource::Analytic { mu_hat } => {
            let ((a, b), p) = sc.birth_death_pair().zip(p).ok_or_else(|| {
                Error::domain(
                    "analytic gamma needs two birth-death chains and a random-walk domination",
                )
            })?;
            Ok(birth_death_inputs(a, b, p, 2, *mu_hat)?.certificate)
        }
        GammaSource::Empirical => {
            let cc = &sc.condition_check;
            let mut best: Option<RegularityCertificate> = None;
            for (c, s) in r.schedules().into_iter().enumerate() {
                let est =
                    estimate_gamma(s, &cc.gamma_grid(s), derive_seed(sc.seed, 300 + c as u64))?;
                let cert = est.certificate.ok_or_else(|| {
                    Error::domain(format!(
                        "chain {}: no positive regularity constant certified",
                        c + 1
                    ))
                })?;
                if best.as_ref().is_none_or(|b| cert.gamma < b.gamma) {
                    best = Some(cert);
                }
            }
            Ok(best.expect("two chains"))
        }
    }
}

fn bound(sc: &Scenario) -> Result<Body> {
    let r = sc.resolve()?;
    let dom = sc
        .domination
        .as_ref()
        .ok_or_else(|| Error::domain("the bound needs a domination section"))?;
    let p = dom.p();
    let g = match (sc.birth_death_pair(), p) {
        (Some((a, b)), Some(p)) => {
            let n_terms = match dom {
                DominationConfig::RandomWalk { n_terms, .. } => *n_terms,
                DominationConfig::Given { .. } => unreachable!(),
            };
            birth_death_inputs(a, b, p, n_terms, None)?.domination
        }
        _ => dom.build()?,
    };
    let cert = certificate(sc, &r, p)?;
    let report = bound_report(&r.plan, &g, &cert, p, &sc.report)?;
    let (tables, diagnostics) = bound_tables(&report);
    let failed = !report.checks.all_pass();
    let headline = json!({
        "e_bound": report.e_bound.value,
        "e1": report.comparison.map(|c| c.e1),
        "e2": report.comparison.map(|c| c.e2),
        "verdict": report.comparison.map(|c| c.verdict),
        "mc_et": report.mc_et.mean,
        "exact_et": report.exact_et,
        "gamma": cert.gamma,
    });
    Ok(Body {
        result: json!({ "summary": headline, "report": report }),
        tables,
        diagnostics,
        failed,
    })
}

fn bound_tables(report: &BoundReport) -> (Vec<Table>, Vec<String>) {
    let mut s = Table::new(
        "s_hat",
        &[
            "n",
            "s_hat_prime",
            "s_hat_prime_double_sum",
            "t_prime_tail",
            "se",
        ],
    );
    for pt in &report.trials.t_prime_tail {
        s.push(vec![
            pt.n.to_string(),
            report.s_hat_prime[pt.n].to_string(),
            report.s_hat_prime_double_sum[pt.n].to_string(),
            pt.p.to_string(),
            pt.se.to_string(),
        ]);
    }
    let mut tt = Table::new("trial_tail", &["n", "estimate", "se", "bound"]);
    for c in &report.trial_tail_check {
        tt.push(vec![
            c.n.to_string(),
            c.estimate.to_string(),
            c.se.to_string(),
            c.bound.to_string(),
        ]);
    }
    let mut diagnostics = Vec::new();
    let ch = &report.checks;
    if !ch.soundness {
        diagnostics.push(format!(
            "Monte Carlo E[T] = {} (SE {}) exceeds the bound {}",
            report.mc_et.mean.value,
            report.mc_et.mean.se.unwrap_or(0.0),
            report.e_bound.value
        ));
    }
    if ch.exact_soundness == Some(false) {
        diagnostics.push("exact E[T] exceeds the bound".into());
    }
    if !ch.trial_tail_violations.is_empty() {
        diagnostics.push(format!(
            "trial-count tail above (1-gamma)^n at n = {:?}",
            ch.trial_tail_violations
        ));
    }
    if !ch.s_hat_violations.is_empty() {
        diagnostics.push(format!(
            "dominating sum below the T' tail at n = {:?}",
            ch.s_hat_violations
        ));
    }
    if ch.pathwise_violations > 0 {
        diagnostics.push(format!(
            "{} paths violate the pathwise bound",
            ch.pathwise_violations
        ));
    }
    if ch.condition_a == Some(false) {
        diagnostics.push("renewal tails exceed the dominating sequence".into());
    }
    if report.mc_et.lower_bound_only {
        diagnostics.push(format!(
            "{} paths censored; Monte Carlo mean is a lower bound",
            report.mc_et.censored
        ));
    }
    (vec![s, tt], diagnostics)
}

fn compare(sc: &Scenario) -> Result<Body> {
    let points: Vec<(f64, f64)> = match &sc.compare {
        Some(c) => c
            .p_grid
            .iter()
            .flat_map(|&p| c.gamma_grid.iter().map(move |&g| (p, g)))
            .collect(),
        None => {
            let r = sc.resolve()?;
            let p = sc
                .domination
                .as_ref()
                .and_then(DominationConfig::p)
                .ok_or_else(|| {
                    Error::domain("compare needs a p grid or a random-walk domination")
                })?;
            vec![(p, certificate(sc, &r, Some(p))?.gamma)]
        }
    };
    let rows = points
        .iter()
        .map(|&(p, g)| compare_bounds(p, g))
        .collect::<ModelResult<Vec<Comparison>>>()?;
    let mut t = Table::new(
        "compare",
        &[
            "p",
            "gamma",
            "e1",
            "e2",
            "mu_hat_1",
            "mu_hat_2",
            "identity_residual",
            "verdict",
        ],
    );
    let mut diagnostics = Vec::new();
    let mut failed = false;
    for c in &rows {
        let verdict = to_value(&c.verdict).as_str().unwrap_or("").to_string();
        t.push(vec![
            c.p.to_string(),
            c.gamma.to_string(),
            c.e1.to_string(),
            c.e2.to_string(),
            c.mu_hat_1.to_string(),
            c.mu_hat_2.to_string(),
            c.identity_residual.to_string(),
            verdict,
        ]);
        if c.identity_residual > 1e-12 * c.e1.abs().max(1.0) {
            failed = true;
            diagnostics.push(format!(
                "identity residual {} at p = {}, gamma = {}",
                c.identity_residual, c.p, c.gamma
            ));
        }
    }
    Ok(Body {
        result: json!({ "comparisons": rows }),
        tables: vec![t],
        diagnostics,
        failed,
    })
}

/// The certificate a `bound` run would use, for callers that only want `γ`.
pub fn resolved_certificate(sc: &Scenario) -> Result<RegularityCertificate> {
    let r = sc.resolve()?;
    let p = sc.domination.as_ref().and_then(DominationConfig::p);
    certificate(sc, &r, p)
}
