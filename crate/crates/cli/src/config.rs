//! Run configuration: one TOML document, strictly parsed. Angles are given
//! in degrees.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use teleport_sim::experiment::{DetectorSet, Preparation, Scenario, SetupConfig, DEFAULT_LEADING_ORDER_COUPLINGS};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetupSection {
    pub coupling_i: f64,
    pub coupling_ii: f64,
    pub input_polarization_deg: f64,
    pub preparation: Preparation,
    pub detectors: DetectorSet,
    pub bob_analyzer_angle_deg: Option<f64>,
    pub cutoff: usize,
    pub beamsplitter_phase_deg: f64,
}

impl Default for SetupSection {
    fn default() -> Self {
        let d = SetupConfig::default();
        Self {
            coupling_i: d.coupling_i,
            coupling_ii: d.coupling_ii,
            input_polarization_deg: d.input_polarization.to_degrees(),
            preparation: d.preparation,
            detectors: d.detectors,
            bob_analyzer_angle_deg: None,
            cutoff: d.cutoff,
            beamsplitter_phase_deg: d.beamsplitter_phase.to_degrees(),
        }
    }
}

impl SetupSection {
    pub fn to_setup(&self) -> SetupConfig {
        SetupConfig {
            coupling_i: self.coupling_i,
            coupling_ii: self.coupling_ii,
            input_polarization: self.input_polarization_deg.to_radians(),
            preparation: self.preparation,
            detectors: self.detectors,
            bob_analyzer_angle: self.bob_analyzer_angle_deg.map(f64::to_radians),
            cutoff: self.cutoff,
            beamsplitter_phase: self.beamsplitter_phase_deg.to_radians(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeadingOrderSection {
    pub enabled: bool,
    /// Values of the larger coupling, strictly decreasing.
    pub couplings: Vec<f64>,
}

impl Default for LeadingOrderSection {
    fn default() -> Self {
        Self { enabled: true, couplings: DEFAULT_LEADING_ORDER_COUPLINGS.to_vec() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `coupling_ii / coupling_i`, leading-order threefold fidelity.
    CouplingRatio,
    /// Larger coupling at fixed ratio, finite-coupling fidelity.
    Coupling,
    /// Input polarization angle, leading-order fidelity.
    InputPolarizationDeg,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::CouplingRatio => "coupling_ratio",
            SweepParameter::Coupling => "coupling",
            SweepParameter::InputPolarizationDeg => "input_polarization_deg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Ignored for `coupling_ratio`, which always uses the threefold event.
    #[serde(default = "threefold")]
    pub scenario: Scenario,
}

fn threefold() -> Scenario {
    Scenario::Threefold
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographyTarget {
    /// The coupling-extrapolated conditional state.
    #[default]
    LeadingOrder,
    /// The conditional state at the configured couplings.
    Finite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    pub scenario: Scenario,
    pub state: TomographyTarget,
    /// Shots per analyzer setting; exact probabilities are always reported.
    pub shots: Option<u64>,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self { scenario: Scenario::Threefold, state: TomographyTarget::default(), shots: Some(100_000) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    /// Monte Carlo trials; 0 reports the analytic value only.
    pub trials: u64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { trials: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub setup: SetupSection,
    pub scenarios: Vec<Scenario>,
    pub leading_order: LeadingOrderSection,
    pub baseline: BaselineSection,
    pub sweep: Option<SweepSection>,
    pub tomography: TomographySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("results"),
            format: Format::Both,
            setup: SetupSection::default(),
            scenarios: vec![Scenario::Threefold, Scenario::Fourfold],
            leading_order: LeadingOrderSection::default(),
            baseline: BaselineSection::default(),
            sweep: None,
            tomography: TomographySection::default(),
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

impl RunConfig {
    /// Parses and validates a TOML document. `origin` labels error messages.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn setup(&self) -> SetupConfig {
        self.setup.to_setup()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.setup().validate().map_err(|e| match &e {
            teleport_sim::Error::InvalidParameter { name, .. } => {
                let key = name.replace("input_polarization", "input_polarization_deg").replace("bob_analyzer_angle", "bob_analyzer_angle_deg").replace("beamsplitter_phase", "beamsplitter_phase_deg");
                invalid(&format!("setup.{key}"), e)
            }
            _ => invalid("setup", e),
        })?;
        for (name, spec) in [
            ("p", self.setup.detectors.p),
            ("f1", self.setup.detectors.f1),
            ("f2", self.setup.detectors.f2),
            ("d1", self.setup.detectors.d1),
            ("d2", self.setup.detectors.d2),
        ] {
            if !(spec.efficiency > 0.0 && spec.efficiency <= 1.0) {
                return Err(invalid(&format!("setup.detectors.{name}.efficiency"), format!("{} must lie in (0, 1]", spec.efficiency)));
            }
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate().map_err(|e| invalid(&format!("scenarios[{i}]"), e))?;
        }
        let lo = &self.leading_order.couplings;
        if lo.len() < 3 || lo.iter().any(|g| !(g.is_finite() && *g > 0.0 && *g < 1.0)) || lo.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("leading_order.couplings", "need at least three couplings in (0, 1), strictly decreasing"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() || sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(invalid("sweep.values", "must be a nonempty list of finite numbers"));
            }
            let bounded = match sweep.parameter {
                SweepParameter::CouplingRatio => sweep.values.iter().all(|v| *v > 0.0),
                SweepParameter::Coupling => sweep.values.iter().all(|v| *v > 0.0 && *v < 1.0),
                SweepParameter::InputPolarizationDeg => true,
            };
            if !bounded {
                let reason = match sweep.parameter {
                    SweepParameter::Coupling => "couplings must lie in (0, 1)",
                    _ => "ratios must be positive",
                };
                return Err(invalid("sweep.values", reason));
            }
            sweep.scenario.validate().map_err(|e| invalid("sweep.scenario", e))?;
            if matches!(sweep.scenario, Scenario::CouplingRatioSweep { .. }) {
                return Err(invalid("sweep.scenario", "use `parameter = \"coupling_ratio\"` instead"));
            }
        }
        self.tomography.scenario.validate().map_err(|e| invalid("tomography.scenario", e))?;
        if self.tomography.shots == Some(0) {
            return Err(invalid("tomography.shots", "must be at least 1"));
        }
        Ok(())
    }
}

/// Reads a config file; `None` gives the documented defaults.
pub fn parse_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_toml(&text, &p.display().to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_toml("", "test").unwrap();
        assert_eq!(c, RunConfig::default());
        let s = c.setup();
        assert_eq!((s.coupling_i, s.coupling_ii, s.cutoff), (0.02, 0.02, 6));
        assert!((s.input_polarization - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_coupling_names_the_key() {
        let e = RunConfig::from_toml("[setup]\ncoupling_i = 1.5\n", "test").unwrap_err().to_string();
        assert!(e.contains("setup.coupling_i") && e.contains("(0, 1)"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let e = RunConfig::from_toml("[setup]\ncoupling = 0.1\n", "test").unwrap_err().to_string();
        assert!(e.contains("coupling") && e.contains("unknown field"), "{e}");
        let e = RunConfig::from_toml("seeed = 3\n", "test").unwrap_err().to_string();
        assert!(e.contains("seeed"), "{e}");
        let e = RunConfig::from_toml("[[scenarios]]\nkind = \"fourfold\"\nn = 2\n", "test").unwrap_err().to_string();
        assert!(e.contains("n"), "{e}");
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"
seed = 11
out = "out"
format = "csv"

[setup]
coupling_i = 0.01
coupling_ii = 0.03
input_polarization_deg = 30.0
preparation = "analyzer_before_p"
cutoff = 8

[setup.detectors.p]
kind = { cascade = { stages = 4 } }
efficiency = 0.9

[[scenarios]]
kind = "threefold_number_resolved_p"
n = 1

[[scenarios]]
kind = "threefold_qnd_bob"
n = 1

[sweep]
parameter = "coupling_ratio"
values = [1, 2, 4, 8]

[tomography]
shots = 1000
state = "finite"
"#;
        let c = RunConfig::from_toml(text, "test").unwrap();
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.scenarios[0], Scenario::ThreefoldNumberResolvedP { n: 1 });
        assert_eq!(c.setup.detectors.p.efficiency, 0.9);
        assert_eq!(c.sweep.as_ref().unwrap().values, vec![1.0, 2.0, 4.0, 8.0]);
        let again = RunConfig::from_toml(&toml::to_string(&c).unwrap(), "test").unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(RunConfig::from_toml("[sweep]\nparameter = \"coupling_ratio\"\nvalues = []\n", "t").is_err());
        assert!(RunConfig::from_toml("[leading_order]\ncouplings = [0.01, 0.02, 0.04]\n", "t").is_err());
        assert!(RunConfig::from_toml("[sweep]\nparameter = \"coupling\"\nvalues = [1.2]\n", "t").is_err());
    }
}
