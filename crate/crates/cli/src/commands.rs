//! The `run`, `sweep`, `validate` and `tomo` commands. Each returns the
//! artifacts it produced so callers decide where and whether to write them.

use serde::Serialize;
use teleport_sim::analysis::{
    self, AnalyzerBasis, ProbabilityTable, ReconstructionResult, Report, Shots, TomographyData, TomographySetting,
    TomographySummary, OUTCOMES, SCHEMA_VERSION,
};
use teleport_sim::experiment::{self, Apparatus, Scenario, ScenarioResult, SetupConfig, SweepRow};
use teleport_sim::validate::{self, SuiteOptions, SuiteReport};

use crate::config::{Format, RunConfig, SweepParameter, TomographyTarget};
use crate::CliError;

/// Files a command wants written, in output order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(&'static str, Vec<u8>)>,
    /// Human-readable summary for the terminal.
    pub summary: Vec<String>,
}

impl Artifacts {
    fn push(&mut self, name: &'static str, text: String) {
        self.files.push((name, text.into_bytes()));
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::Serialize(e.to_string()))
}

fn csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    analysis::write_csv(rows).map_err(|e| CliError::Serialize(e.to_string()))
}

fn evaluate(config: &RunConfig, setup: &SetupConfig, scenario: &Scenario) -> Result<ScenarioResult, CliError> {
    let id = scenario.id();
    let mut result = experiment::run_scenario(setup, scenario).map_err(CliError::physics(format!("scenario {id}")))?;
    if config.leading_order.enabled {
        let lo = experiment::leading_order(setup, scenario, &config.leading_order.couplings)
            .map_err(CliError::physics(format!("scenario {id} (leading order)")))?;
        result.leading_order = Some(lo);
    }
    Ok(result)
}

/// Evaluates every configured scenario and builds the report.
pub fn run(config: &RunConfig) -> Result<Artifacts, CliError> {
    let setup = config.setup();
    let mut results = Vec::new();
    let mut sweep = Vec::new();
    for scenario in &config.scenarios {
        match scenario {
            Scenario::CouplingRatioSweep { ratios } => {
                sweep = experiment::coupling_ratio_sweep(&setup, ratios, &config.leading_order.couplings)
                    .map_err(CliError::physics("scenario coupling_ratio_sweep"))?;
            }
            s => results.push(evaluate(config, &setup, s)?),
        }
    }
    let baseline = if config.baseline.trials > 0 {
        let target = Apparatus::build(&setup).and_then(|a| a.target()).map_err(CliError::physics("baseline"))?;
        Some(analysis::classical_baseline(&target, config.baseline.trials, config.seed).map_err(CliError::physics("baseline"))?)
    } else {
        None
    };
    let report = analysis::report(&results, baseline, sweep, Vec::new()).map_err(CliError::physics("report"))?;
    let mut out = Artifacts::default();
    for row in &report.scenarios {
        let lo = row.leading_order_fidelity.map(|f| format!("  leading-order F = {f:.6}")).unwrap_or_default();
        out.summary.push(format!("{:<36} F = {:.6}{lo}  P = {:.3e}  {}", row.scenario, row.fidelity, row.probability, row.verdict));
    }
    if let Some(b) = baseline {
        out.summary.push(format!("random-polarization baseline {:.6} (analytic {})", b.monte_carlo, b.analytic));
    }
    write_report(&report, config.format, &mut out)?;
    Ok(out)
}

fn write_report(report: &Report, format: Format, out: &mut Artifacts) -> Result<(), CliError> {
    if format.json() {
        out.push("report.json", report.to_json().map_err(CliError::physics("report"))? + "\n");
    }
    if format.csv() {
        out.push("report.csv", report.to_csv().map_err(CliError::physics("report"))?);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTableRow {
    pub schema_version: u32,
    pub parameter: &'static str,
    pub value: f64,
    pub scenario: String,
    pub fidelity: f64,
    pub fidelity_error: Option<f64>,
    pub probability: f64,
    pub vacuum_weight: f64,
}

/// One row per grid point, sorted by the swept value.
pub fn sweep_rows(config: &RunConfig) -> Result<Vec<SweepTableRow>, CliError> {
    let spec = config.sweep.as_ref().ok_or_else(|| CliError::Config("`sweep`: section missing".into()))?;
    let setup = config.setup();
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let name = spec.parameter.name();
    let row = |value: f64, scenario: String, fidelity: f64, fidelity_error: Option<f64>, probability: f64, vacuum_weight: f64| {
        SweepTableRow { schema_version: SCHEMA_VERSION, parameter: name, value, scenario, fidelity, fidelity_error, probability, vacuum_weight }
    };
    match spec.parameter {
        SweepParameter::CouplingRatio => {
            let rows: Vec<SweepRow> = experiment::coupling_ratio_sweep(&setup, &values, &config.leading_order.couplings)
                .map_err(CliError::physics("coupling ratio sweep"))?;
            Ok(rows
                .into_iter()
                .map(|r| row(r.ratio, Scenario::Threefold.id(), r.fidelity, Some(r.fidelity_error), r.probability, r.vacuum_weight))
                .collect())
        }
        SweepParameter::Coupling => {
            let app = Apparatus::build(&setup).map_err(CliError::physics("sweep"))?;
            values
                .into_iter()
                .map(|g| {
                    let (g1, g2) = setup.couplings_at(g);
                    let p = app.evaluate(&spec.scenario, g1, g2).map_err(CliError::physics(format!("sweep at coupling {g}")))?;
                    Ok(row(g, spec.scenario.id(), p.fidelity, None, p.probability, p.vacuum_weight))
                })
                .collect()
        }
        SweepParameter::InputPolarizationDeg => values
            .into_iter()
            .map(|deg| {
                let s = SetupConfig { input_polarization: deg.to_radians(), ..setup.clone() };
                let r = evaluate(config, &s, &spec.scenario)?;
                let (f, e) = match &r.leading_order {
                    Some(lo) => (lo.fidelity.value, Some(lo.fidelity.error)),
                    None => (r.point.fidelity, None),
                };
                Ok(row(deg, spec.scenario.id(), f, e, r.point.probability, r.point.vacuum_weight))
            })
            .collect(),
    }
}

pub fn sweep(config: &RunConfig) -> Result<Artifacts, CliError> {
    let rows = sweep_rows(config)?;
    let mut out = Artifacts::default();
    for r in &rows {
        out.summary.push(format!("{} = {:<10} F = {:.6}  P = {:.3e}  vacuum = {:.4}", r.parameter, r.value, r.fidelity, r.probability, r.vacuum_weight));
    }
    if config.format.csv() {
        out.push("sweep.csv", csv(&rows)?);
    }
    if config.format.json() {
        out.push("sweep.json", json(&rows)?);
    }
    Ok(out)
}

/// Runs the invariant suite. Failing checks are part of the result.
pub fn validate(config: &RunConfig, perturb_beamsplitter: bool) -> Result<(SuiteReport, Artifacts), CliError> {
    let options = SuiteOptions { seed: config.seed, perturb_beamsplitter, skip_oracle: false };
    let report = validate::run_suite(&config.setup(), options).map_err(CliError::physics("invariant suite"))?;
    let mut out = Artifacts::default();
    out.summary.extend(report.checks.iter().map(|c| c.to_string()));
    out.summary.push(format!("{} of {} checks passed in {:.2} s", report.checks.iter().filter(|c| c.passed).count(), report.checks.len(), report.seconds));
    if config.format.json() {
        out.push("validate.json", json(&report)?);
    }
    Ok((report, out))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyRow {
    pub schema_version: u32,
    pub basis: AnalyzerBasis,
    pub outcome: &'static str,
    pub probability: f64,
    pub count: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots_per_setting: Option<u64>,
    pub vacuum_weight_estimate: f64,
    pub multiphoton_leakage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_to_truth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_distance_to_truth: Option<f64>,
    /// Overlap of the estimate with the intended polarization state.
    pub teleportation_fidelity: f64,
    /// Row-major `[re, im]` entries in the order vacuum, V, H.
    pub rho_hat: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyDocument {
    pub schema_version: u32,
    pub scenario: String,
    pub state: TomographyTarget,
    pub true_vacuum_weight: f64,
    pub exact: ReconstructionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<ReconstructionSummary>,
    /// Report-compatible digest of the sampled (or exact) reconstruction.
    pub summary: TomographySummary,
}

fn summarize(r: &ReconstructionResult, shots: Option<u64>, target: &teleport_sim::fock::StateVector) -> Result<ReconstructionSummary, CliError> {
    let dense = r.rho_hat.to_dense();
    let sector_target = target.embed(r.rho_hat.space()).map_err(CliError::physics("tomography"))?.0;
    let teleportation_fidelity = r.rho_hat.fidelity_pure(&sector_target).map_err(CliError::physics("tomography"))?;
    Ok(ReconstructionSummary {
        shots_per_setting: shots,
        vacuum_weight_estimate: r.vacuum_weight_estimate,
        multiphoton_leakage: r.multiphoton_leakage,
        fidelity_to_truth: r.fidelity_to_truth,
        trace_distance_to_truth: r.trace_distance_to_truth,
        teleportation_fidelity,
        rho_hat: (0..dense.nrows()).map(|i| (0..dense.ncols()).map(|j| [dense[(i, j)].re, dense[(i, j)].im]).collect()).collect(),
    })
}

/// Tomography of beam 3 for the configured scenario.
pub fn tomo(config: &RunConfig) -> Result<(TomographyDocument, Artifacts), CliError> {
    let setup = config.setup();
    let spec = &config.tomography;
    let scenario = &spec.scenario;
    let ctx = || format!("tomography of {}", scenario.id());
    let app = Apparatus::build(&setup).map_err(CliError::physics(ctx()))?;
    let target = app.target().map_err(CliError::physics(ctx()))?;
    let rho3 = match spec.state {
        TomographyTarget::Finite => experiment::run_scenario(&setup, scenario).map_err(CliError::physics(ctx()))?.point.rho3,
        TomographyTarget::LeadingOrder => {
            experiment::leading_order(&setup, scenario, &config.leading_order.couplings).map_err(CliError::physics(ctx()))?.rho3
        }
    };
    let shots = spec.shots.map_or(Shots::Exact, Shots::Count);
    let settings: Vec<TomographySetting> = AnalyzerBasis::ALL.iter().map(|&basis| TomographySetting { basis, shots, seed: config.seed }).collect();
    let table: ProbabilityTable = analysis::tomography_probabilities(&rho3, &settings).map_err(CliError::physics(ctx()))?;
    let exact = analysis::reconstruct(&TomographyData::Exact(table.clone()), Some(&rho3)).map_err(CliError::physics(ctx()))?;
    let counts = match spec.shots {
        Some(n) => Some(analysis::sample_counts(&table, n, config.seed).map_err(CliError::physics(ctx()))?),
        None => None,
    };
    let sampled = match &counts {
        Some(c) => Some(analysis::reconstruct(&TomographyData::Counts(c.clone()), Some(&rho3)).map_err(CliError::physics(ctx()))?),
        None => None,
    };
    let best = sampled.as_ref().unwrap_or(&exact);
    let doc = TomographyDocument {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.id(),
        state: spec.state,
        true_vacuum_weight: rho3.entry(0, 0).re,
        exact: summarize(&exact, None, &target)?,
        sampled: sampled.as_ref().map(|s| summarize(s, spec.shots, &target)).transpose()?,
        summary: TomographySummary {
            scenario: scenario.id(),
            shots: spec.shots,
            vacuum_weight_estimate: best.vacuum_weight_estimate,
            multiphoton_leakage: best.multiphoton_leakage,
            fidelity_to_truth: best.fidelity_to_truth,
        },
    };
    let mut rows = Vec::new();
    for (k, row) in table.rows.iter().enumerate() {
        for (o, name) in OUTCOMES.iter().enumerate() {
            rows.push(TomographyRow {
                schema_version: SCHEMA_VERSION,
                basis: row.basis,
                outcome: name,
                probability: row.probabilities[o],
                count: counts.as_ref().map(|c| c.rows[k].counts[o]),
            });
        }
    }
    let mut out = Artifacts::default();
    out.summary.push(format!("true vacuum weight {:.6}", doc.true_vacuum_weight));
    out.summary.push(format!("exact reconstruction: vacuum weight {:.6}, teleportation fidelity {:.6}", doc.exact.vacuum_weight_estimate, doc.exact.teleportation_fidelity));
    if let Some(s) = &doc.sampled {
        out.summary.push(format!(
            "{} shots per setting: vacuum weight {:.6}, teleportation fidelity {:.6}",
            s.shots_per_setting.unwrap_or(0),
            s.vacuum_weight_estimate,
            s.teleportation_fidelity
        ));
    }
    if config.format.csv() {
        out.push("tomography.csv", csv(&rows)?);
    }
    if config.format.json() {
        out.push("tomography.json", json(&doc)?);
    }
    Ok((doc, out))
}
