//! Run orchestration: resolve the configuration, solve every cluster,
//! optionally validate against the Monte Carlo oracle, and persist the
//! artifact set atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cellrate::asymptotics::{solve_group_rates, PowerAllocation, SinrCoupling, WeightOrder};
use cellrate::fairness::{
    solve_all_clusters, ClusterRateReport, FairnessOptions, UtilityRegistry, UtilitySpec,
};
use cellrate::montecarlo::{validate_rates, ValidationRow};
use cellrate::scenario::{Scenario, ScenarioConfig};

use crate::registry::ScenarioRegistry;

/// Exit codes of the `run` subcommand.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

/// On-disk run configuration; every field can also be set (or overridden)
/// on the command line.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Path to a scenario JSON file (exclusive with `scenario_name`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_path: Option<PathBuf>,
    /// Name of a built-in scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_name: Option<String>,
    /// Fairness mode: `pfs`, `hfs` or `weighted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Utility scale constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_c: Option<f64>,
    /// Per-group weights for `weighted` mode (global group order).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stat_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    /// SINR fixed-point coupling: `coupled` (default) or `shared`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr_coupling: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_validate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 = rayon default).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl RunConfig {
    /// Later (command-line) values win over configuration-file values.
    pub fn overlay(mut self, over: RunConfig) -> RunConfig {
        macro_rules! take {
            ($f:ident) => {
                if over.$f.is_some() {
                    self.$f = over.$f;
                }
            };
        }
        take!(scenario_path);
        take!(scenario_name);
        take!(mode);
        take!(utility_c);
        take!(weights);
        take!(gap_tol);
        take!(stat_tol);
        take!(max_outer);
        take!(sinr_coupling);
        take!(mc_validate);
        take!(mc_draws);
        take!(mc_n);
        take!(seed);
        take!(out_dir);
        take!(jobs);
        self
    }
}

/// Fully resolved settings, echoed verbatim into the run summary.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub scenario_name: Option<String>,
    pub scenario_path: Option<PathBuf>,
    pub mode: String,
    pub utility_c: f64,
    pub weights: Option<Vec<f64>>,
    pub gap_tol: f64,
    pub stat_tol: f64,
    pub max_outer: usize,
    pub sinr_coupling: String,
    pub mc_validate: bool,
    pub mc_draws: usize,
    pub mc_n: Vec<usize>,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Serialize)]
struct ClusterSummary {
    cluster_id: usize,
    num_groups: usize,
    utility_nats: f64,
    dual_nats: f64,
    relative_gap: f64,
    stationarity: f64,
    iterations: usize,
    converged: bool,
    diagnostics: Vec<String>,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    version: String,
    config: ResolvedConfig,
    scenario: ScenarioConfig,
    warnings: Vec<String>,
    clusters: Vec<ClusterSummary>,
    total_utility_nats: f64,
    min_rate_bits: f64,
    max_rate_bits: f64,
    all_converged: bool,
    validation_rows_failed: Option<usize>,
}

pub enum RunError {
    Config(String),
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Solver(_) => EXIT_SOLVER,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Solver(m) => m,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, RunError> {
    Err(RunError::Config(msg.into()))
}

/// Execute a run; returns the process exit code.
pub fn run(file_config: RunConfig, cli_config: RunConfig) -> Result<i32, RunError> {
    let merged = file_config.overlay(cli_config);

    let out_dir = match &merged.out_dir {
        Some(d) => d.clone(),
        None => return config_err("an output directory is required (--out)"),
    };
    let registry = ScenarioRegistry::standard();
    let (scenario_config, default_mode) = match (&merged.scenario_name, &merged.scenario_path) {
        (Some(name), None) => match registry.get(name) {
            Some(entry) => (entry.config(), Some(entry.default_mode.to_string())),
            None => {
                return config_err(format!(
                    "unknown scenario '{name}'; run `cellrate list-scenarios`"
                ))
            }
        },
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| {
                RunError::Config(format!("cannot read scenario file {}: {e}", path.display()))
            })?;
            let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| {
                RunError::Config(format!("invalid scenario JSON {}: {e}", path.display()))
            })?;
            (config, None)
        }
        (Some(_), Some(_)) => {
            return config_err("give either a scenario name or a scenario file, not both")
        }
        (None, None) => return config_err("a scenario is required (--scenario or --config)"),
    };

    let mode = merged
        .mode
        .clone()
        .or(default_mode)
        .unwrap_or_else(|| "pfs".to_string());
    let coupling_name = merged
        .sinr_coupling
        .clone()
        .unwrap_or_else(|| "coupled".to_string());
    let coupling = match SinrCoupling::parse(&coupling_name) {
        Some(c) => c,
        None => return config_err(format!("unknown SINR coupling '{coupling_name}'")),
    };
    let resolved = ResolvedConfig {
        scenario_name: merged.scenario_name.clone(),
        scenario_path: merged.scenario_path.clone(),
        mode: mode.clone(),
        utility_c: merged.utility_c.unwrap_or(1.0),
        weights: merged.weights.clone(),
        gap_tol: merged.gap_tol.unwrap_or(1e-3),
        stat_tol: merged.stat_tol.unwrap_or(5e-4),
        max_outer: merged.max_outer.unwrap_or(2000),
        sinr_coupling: coupling_name,
        mc_validate: merged.mc_validate.unwrap_or(false),
        mc_draws: merged.mc_draws.unwrap_or(500),
        mc_n: merged.mc_n.clone().unwrap_or_else(|| vec![1, 2, 4]),
        seed: merged.seed.unwrap_or(1),
        jobs: merged.jobs.unwrap_or(0),
    };

    if resolved.jobs > 0 {
        // A dedicated pool would also work, but the global one keeps the
        // nested cluster/suffix parallelism in one place.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.jobs)
            .build_global();
    }

    let scenario = Scenario::new(scenario_config)
        .map_err(|e| RunError::Config(format!("scenario rejected: {e}")))?;
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    if let Some(w) = &resolved.weights {
        if w.len() != scenario.num_groups() {
            return config_err(format!(
                "{} weights given for {} groups",
                w.len(),
                scenario.num_groups()
            ));
        }
    }

    let utility_spec = UtilitySpec {
        kind: mode.clone(),
        c: resolved.utility_c,
        weights: resolved.weights.clone(),
    };
    let utility = UtilityRegistry::standard()
        .create(&utility_spec)
        .map_err(|e| RunError::Config(e.to_string()))?;

    let fairness_opts = FairnessOptions {
        gap_tol: resolved.gap_tol,
        stat_tol: resolved.stat_tol,
        max_outer: resolved.max_outer,
        solver: cellrate::asymptotics::SolverOptions {
            coupling,
            ..cellrate::asymptotics::SolverOptions::default()
        },
        ..FairnessOptions::default()
    };

    let clusters = scenario.cluster_problems();
    let reports = solve_all_clusters(&clusters, utility.as_ref(), &fairness_opts)
        .map_err(|e| RunError::Solver(format!("solver failed: {e}")))?;

    // Optional Monte Carlo validation at the reported operating point: the
    // final decode order with the reported powers.
    let mut validation: Option<Vec<ValidationRow>> = None;
    if resolved.mc_validate {
        let mut rows = Vec::new();
        for (cluster, report) in clusters.iter().zip(&reports) {
            let order = WeightOrder::new(&report.mu)
                .map_err(|e| RunError::Solver(format!("bad final prices: {e}")))?;
            let powers = PowerAllocation { powers: report.powers.clone() };
            let asym = solve_group_rates(cluster, &order, &powers, &fairness_opts.solver)
                .map_err(|e| RunError::Solver(format!("rate evaluation failed: {e}")))?;
            let seed = mix_seed(resolved.seed, cluster.cluster_id);
            let cluster_rows = validate_rates(
                cluster,
                &order,
                &powers,
                &asym,
                &resolved.mc_n,
                resolved.mc_draws,
                seed,
            )
            .map_err(|e| RunError::Solver(format!("validation failed: {e}")))?;
            rows.extend(cluster_rows);
        }
        rows.sort_by_key(|a| (a.group_id, a.n));
        validation = Some(rows);
    }

    // Assemble artifacts in memory first; only a fully solved run writes.
    let rates_csv = rates_csv(&scenario, &clusters, &reports);
    let validation_csv = validation.as_ref().map(|rows| validation_csv(rows));
    let rows_failed = validation
        .as_ref()
        .map(|rows| rows.iter().filter(|r| !r.pass).count());

    let mut all_rates_bits: Vec<f64> = Vec::new();
    for rep in &reports {
        all_rates_bits.extend(rep.rates_bits());
    }
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: scenario.config().clone(),
        warnings: scenario.warnings().to_vec(),
        clusters: reports
            .iter()
            .map(|r| ClusterSummary {
                cluster_id: r.cluster_id,
                num_groups: r.group_ids.len(),
                utility_nats: r.utility_value,
                dual_nats: r.dual_value,
                relative_gap: r.gap,
                stationarity: r.stationarity,
                iterations: r.iterations,
                converged: r.converged,
                diagnostics: r.diagnostics.clone(),
            })
            .collect(),
        total_utility_nats: reports.iter().map(|r| r.utility_value).sum(),
        min_rate_bits: all_rates_bits.iter().cloned().fold(f64::MAX, f64::min),
        max_rate_bits: all_rates_bits.iter().cloned().fold(f64::MIN, f64::max),
        all_converged: reports.iter().all(|r| r.converged),
        validation_rows_failed: rows_failed,
        config: resolved,
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| RunError::Solver(format!("summary serialization failed: {e}")))?;

    write_artifacts(&out_dir, &rates_csv, &summary_json, validation_csv.as_deref())
        .map_err(|e| RunError::Solver(format!("writing artifacts failed: {e}")))?;

    for rep in &reports {
        println!(
            "cluster {}: {} in {} iterations (gap {:.2e}, stationarity {:.2e})",
            rep.cluster_id,
            if rep.converged { "converged" } else { "NOT converged" },
            rep.iterations,
            rep.gap,
            rep.stationarity
        );
    }
    println!(
        "wrote {}",
        out_dir.join("rates.csv").display()
    );

    if !summary.all_converged {
        eprintln!("error: at least one cluster did not converge");
        return Ok(EXIT_SOLVER);
    }
    if let Some(failed) = rows_failed {
        if failed > 0 {
            eprintln!("error: {failed} validation row(s) outside tolerance");
            return Ok(EXIT_VALIDATION);
        }
    }
    Ok(EXIT_OK)
}

fn mix_seed(seed: u64, cluster_id: usize) -> u64 {
    seed ^ (cluster_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn rates_csv(
    scenario: &Scenario,
    clusters: &[cellrate::scenario::ClusterProblem],
    reports: &[ClusterRateReport],
) -> String {
    let mut rows: Vec<(usize, f64, f64, usize, f64, f64)> = Vec::new();
    for (cluster, rep) in clusters.iter().zip(reports) {
        let bits = rep.rates_bits();
        for (local, &g) in rep.group_ids.iter().enumerate() {
            let pos = scenario.config().group_list[g].position_km;
            rows.push((g, pos[0], pos[1], cluster.cluster_id, rep.powers[local], bits[local]));
        }
    }
    rows.sort_by_key(|r| r.0);
    let mut out = String::from("group_id,x_km,y_km,cluster_id,q_k,rate_bits\n");
    for (g, x, y, cl, q, r) in rows {
        out.push_str(&format!("{g},{x},{y},{cl},{q},{r}\n"));
    }
    out
}

fn validation_csv(rows: &[ValidationRow]) -> String {
    let mut out = String::from(
        "group_id,n,rate_asymptotic_bits,rate_empirical_bits,stderr_bits,abs_delta,rel_delta,pass\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.group_id,
            r.n,
            r.rate_asymptotic_bits,
            r.rate_empirical_bits,
            r.stderr_bits,
            r.abs_delta,
            r.rel_delta,
            r.pass
        ));
    }
    out
}

/// Stage every artifact in a temporary directory next to the target and
/// rename into place, so a failed run leaves no partial artifact set.
fn write_artifacts(
    out_dir: &Path,
    rates_csv: &str,
    summary_json: &str,
    validation_csv: Option<&str>,
) -> std::io::Result<()> {
    fs::create_dir_all(out_dir)?;
    let stage = tempfile::Builder::new()
        .prefix(".cellrate-stage-")
        .tempdir_in(out_dir)?;
    let mut pending = vec![
        ("rates.csv", rates_csv),
        ("summary.json", summary_json),
    ];
    if let Some(v) = validation_csv {
        pending.push(("validation.csv", v));
    }
    for (name, content) in &pending {
        let mut f = fs::File::create(stage.path().join(name))?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    for (name, _) in &pending {
        fs::rename(stage.path().join(name), out_dir.join(name))?;
    }
    Ok(())
}
