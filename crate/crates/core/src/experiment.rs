//! The two-source teleportation apparatus and its coincidence scenarios.
//!
//! Source I emits pairs into beams 1 and 4, source II into beams 2 and 3.
//! The input photon is prepared on beam 1 (heralded by detector `p` on
//! beam 4), interferes with beam 2 on a balanced beamsplitter watched by
//! `f1` and `f2`, and the teleported photon leaves in beam 3. Bob's analyzer
//! (a polarization rotator and a polarizing beamsplitter into ancilla beam
//! `A0`) feeds `d1` on `3H` and `d2` on `A0V`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::detection::{measure_retained, qnd_total_number, Detector, DetectorKind, DetectorModel, Outcome, OutcomePattern};
use crate::error::{Error, Result};
use crate::extrapolate::{richardson, Extrapolated};
use crate::fock::{Beam, DensityOperator, FockSpace, ModeLabel, StateVector};
use crate::optics::{beamsplitter_beams, pbs, polarizer, rotator, Circuit};
use crate::sources::{spdc_coefficients, spdc_state_from, SpdcParams, TRUNCATION_LIMIT};
use crate::C64;

/// Couplings used for leading-order extrapolation unless overridden.
pub const DEFAULT_LEADING_ORDER_COUPLINGS: [f64; 3] = [0.04, 0.02, 0.01];

pub const POLARIZER_LOSS: Beam = Beam::Loss(0);
pub const BOB_ANCILLA: Beam = Beam::Ancilla(0);

/// How the input state on beam 1 is prepared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// A polarizer on beam 1 at the input angle; `p` heralds on beam 4.
    #[default]
    PolarizerOnBeam1,
    /// A polarizer on beam 4 at the input angle plus 90 degrees in front of
    /// `p`, projecting beam 1 through the source entanglement.
    AnalyzerBeforeP,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    #[serde(default = "unit")]
    pub efficiency: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self { kind: DetectorKind::Threshold, efficiency: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSet {
    pub p: DetectorSpec,
    pub f1: DetectorSpec,
    pub f2: DetectorSpec,
    pub d1: DetectorSpec,
    pub d2: DetectorSpec,
}

/// Physical configuration. Angles are in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    /// Source I strength (beams 1 and 4).
    pub coupling_i: f64,
    /// Source II strength (beams 2 and 3).
    pub coupling_ii: f64,
    pub input_polarization: f64,
    pub preparation: Preparation,
    pub detectors: DetectorSet,
    /// Polarization sent to `d1`; defaults to the input polarization.
    pub bob_analyzer_angle: Option<f64>,
    pub cutoff: usize,
    /// Phase of the central beamsplitter.
    pub beamsplitter_phase: f64,
}

impl Default for SetupConfig {
    fn default() -> Self {
        Self {
            coupling_i: 0.02,
            coupling_ii: 0.02,
            input_polarization: FRAC_PI_4,
            preparation: Preparation::default(),
            detectors: DetectorSet::default(),
            bob_analyzer_angle: None,
            cutoff: 6,
            beamsplitter_phase: 0.0,
        }
    }
}

impl SetupConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("coupling_i", self.coupling_i), ("coupling_ii", self.coupling_ii)] {
            if !(g.is_finite() && g > 0.0 && g < 1.0) {
                return Err(Error::InvalidParameter { name, value: g, reason: "must lie in (0, 1)" });
            }
        }
        if self.cutoff < 4 {
            return Err(Error::InvalidParameter {
                name: "cutoff",
                value: self.cutoff as f64,
                reason: "must be at least 4 so that two pairs are representable",
            });
        }
        for (name, a) in [
            ("input_polarization", self.input_polarization),
            ("bob_analyzer_angle", self.bob_analyzer_angle.unwrap_or(0.0)),
            ("beamsplitter_phase", self.beamsplitter_phase),
        ] {
            if !a.is_finite() {
                return Err(Error::InvalidParameter { name, value: a, reason: "must be finite" });
            }
        }
        Ok(())
    }

    /// Both couplings rescaled so the larger equals `g`, keeping their ratio.
    pub fn couplings_at(&self, g: f64) -> (f64, f64) {
        let m = self.coupling_i.max(self.coupling_ii);
        (g * self.coupling_i / m, g * self.coupling_ii / m)
    }
}

/// A conditioning scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawScenario")]
pub enum Scenario {
    /// `p`, `f1`, `f2` and exactly one of `d1`, `d2` fire.
    Fourfold,
    /// `p`, `f1` and `f2` fire; beam 3 is left undetected.
    Threefold,
    /// Threefold with a number-resolving `p` reading `n`.
    ThreefoldNumberResolvedP { n: usize },
    /// Threefold with `p` replaced by a cascade of `stages` threshold
    /// detectors, exactly one of which fires.
    ThreefoldCascadeP { stages: usize },
    /// Threefold followed by a non-demolition projection of beam 3 onto
    /// total photon number `n`.
    ThreefoldQndBob { n: usize },
    CouplingRatioSweep { ratios: Vec<f64> },
}

/// Flat record used to parse scenarios strictly: every key must belong to
/// the named kind.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: String,
    n: Option<usize>,
    stages: Option<usize>,
    ratios: Option<Vec<f64>>,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = String;

    fn try_from(raw: RawScenario) -> std::result::Result<Self, String> {
        let RawScenario { kind, n, stages, ratios } = raw;
        let (scenario, allowed): (Scenario, &[&str]) = match kind.as_str() {
            "fourfold" => (Scenario::Fourfold, &[]),
            "threefold" => (Scenario::Threefold, &[]),
            "threefold_number_resolved_p" => (Scenario::ThreefoldNumberResolvedP { n: n.ok_or("missing field `n`")? }, &["n"]),
            "threefold_cascade_p" => (Scenario::ThreefoldCascadeP { stages: stages.ok_or("missing field `stages`")? }, &["stages"]),
            "threefold_qnd_bob" => (Scenario::ThreefoldQndBob { n: n.ok_or("missing field `n`")? }, &["n"]),
            "coupling_ratio_sweep" => {
                (Scenario::CouplingRatioSweep { ratios: ratios.clone().ok_or("missing field `ratios`")? }, &["ratios"])
            }
            other => return Err(format!("unknown scenario kind `{other}`")),
        };
        for (key, present) in [("n", n.is_some()), ("stages", stages.is_some()), ("ratios", ratios.is_some())] {
            if present && !allowed.contains(&key) {
                return Err(format!("unknown field `{key}` for scenario kind `{kind}`"));
            }
        }
        Ok(scenario)
    }
}

impl Scenario {
    pub fn id(&self) -> String {
        match self {
            Scenario::Fourfold => "fourfold".into(),
            Scenario::Threefold => "threefold".into(),
            Scenario::ThreefoldNumberResolvedP { n } => format!("threefold_number_resolved_p(n={n})"),
            Scenario::ThreefoldCascadeP { stages } => format!("threefold_cascade_p(stages={stages})"),
            Scenario::ThreefoldQndBob { n } => format!("threefold_qnd_bob(n={n})"),
            Scenario::CouplingRatioSweep { .. } => "coupling_ratio_sweep".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::ThreefoldCascadeP { stages: 0 } => {
                Err(Error::InvalidParameter { name: "stages", value: 0.0, reason: "a cascade needs at least one stage" })
            }
            Scenario::CouplingRatioSweep { ratios } => {
                if ratios.is_empty() || ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    Err(Error::InvalidInput("sweep ratios must be a nonempty list of positive finite numbers".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Beam-3 state and statistics for one scenario at one coupling point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPoint {
    pub couplings: (f64, f64),
    pub rho3: DensityOperator,
    pub probability: f64,
    pub fidelity: f64,
    pub vacuum_weight: f64,
    pub single_photon_weight: f64,
    pub multiphoton_weight: f64,
    /// Weight removed by truncating the source state.
    pub truncation_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadingOrder {
    pub couplings: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub fidelity: Extrapolated,
    /// Element-wise extrapolation of the conditional beam-3 state.
    pub rho3: DensityOperator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioResult {
    pub scenario: String,
    pub point: ScenarioPoint,
    pub leading_order: Option<LeadingOrder>,
}

/// The assembled apparatus for one configuration.
#[derive(Clone, Debug)]
pub struct Apparatus {
    config: SetupConfig,
    space: FockSpace,
    circuit: Circuit,
    bob: Circuit,
    detectors: Vec<Detector>,
}

impl Apparatus {
    pub fn build(config: &SetupConfig) -> Result<Self> {
        config.validate()?;
        let mut modes: Vec<ModeLabel> = Beam::PRINCIPAL.iter().flat_map(|b| b.modes()).collect();
        modes.extend(POLARIZER_LOSS.modes());
        modes.extend(BOB_ANCILLA.modes());
        let space = FockSpace::new(modes, config.cutoff)?;

        let theta = config.input_polarization.rem_euclid(PI);
        let prep = match config.preparation {
            Preparation::PolarizerOnBeam1 => polarizer(theta, Beam::One.modes(), POLARIZER_LOSS.modes())?,
            Preparation::AnalyzerBeforeP => polarizer(theta + FRAC_PI_2, Beam::Four.modes(), POLARIZER_LOSS.modes())?,
        };
        let circuit = Circuit::new(vec![prep, beamsplitter_beams(0.5, config.beamsplitter_phase, Beam::One, Beam::Two)?]);
        circuit.validate(&space)?;

        let beta = config.bob_analyzer_angle.unwrap_or(theta);
        let [a, b] = Beam::Three.modes();
        let [c, d] = BOB_ANCILLA.modes();
        let bob = Circuit::new(vec![rotator(-beta, Beam::Three)?, pbs([a, b, c, d])?]);
        bob.validate(&space)?;

        let ds = &config.detectors;
        let detectors = vec![
            Detector::new("p", DetectorModel::on_beam(ds.p.kind, ds.p.efficiency, Beam::Four)?),
            Detector::new("f1", DetectorModel::on_beam(ds.f1.kind, ds.f1.efficiency, Beam::One)?),
            Detector::new("f2", DetectorModel::on_beam(ds.f2.kind, ds.f2.efficiency, Beam::Two)?),
            Detector::new("d1", DetectorModel::on_mode(ds.d1.kind, ds.d1.efficiency, Beam::Three.h())?),
            Detector::new("d2", DetectorModel::on_mode(ds.d2.kind, ds.d2.efficiency, BOB_ANCILLA.v())?),
        ];
        Ok(Self { config: config.clone(), space, circuit, bob, detectors })
    }

    pub fn config(&self) -> &SetupConfig {
        &self.config
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// Preparation and central beamsplitter, in order.
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Bob's analyzer in front of `d1` and `d2`.
    pub fn bob_circuit(&self) -> &Circuit {
        &self.bob
    }

    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    pub fn detector(&self, id: &str) -> Result<&Detector> {
        self.detectors.iter().find(|d| d.id == id).ok_or_else(|| Error::UnknownDetector(id.into()))
    }

    /// Space of the output beam.
    pub fn beam3_space(&self) -> Result<FockSpace> {
        self.space.subspace(&Beam::Three.modes())
    }

    /// The state the apparatus is meant to teleport, on the beam-3 space.
    pub fn target(&self) -> Result<StateVector> {
        let s = self.beam3_space()?;
        let (sin, cos) = self.config.input_polarization.rem_euclid(PI).sin_cos();
        StateVector::from_occupations(&s, [(&[1u8, 0][..], C64::new(cos, 0.0)), (&[0u8, 1][..], C64::new(sin, 0.0))])?.normalize()
    }

    /// Joint output of both sources at the given couplings, truncated to the
    /// cutoff and renormalized, with the total discarded weight.
    pub fn source_state(&self, g1: f64, g2: f64) -> Result<(StateVector, f64)> {
        let pairs = self.space.cutoff() / 2;
        let mut kept = 1.0;
        let mut parts = Vec::new();
        for (g, beams) in [(g1, (Beam::One, Beam::Four)), (g2, (Beam::Two, Beam::Three))] {
            let params = SpdcParams::new(g, pairs, beams)?;
            let coeffs = spdc_coefficients(&params)?;
            kept *= 1.0 - coeffs.discarded_weight;
            let local = FockSpace::new(vec![beams.0.h(), beams.0.v(), beams.1.h(), beams.1.v()], 2 * pairs)?;
            parts.push(spdc_state_from(&params, &coeffs, &local)?);
        }
        let joint = parts[0].tensor(&parts[1])?;
        let (embedded, dropped) = joint.embed(&self.space)?;
        kept *= 1.0 - dropped;
        let discarded = 1.0 - kept;
        if discarded > TRUNCATION_LIMIT {
            return Err(Error::TruncationWeight { weight: discarded, limit: TRUNCATION_LIMIT });
        }
        Ok((embedded.normalize()?, discarded))
    }

    /// Source state propagated through the preparation and the central
    /// beamsplitter.
    pub fn output_state(&self, g1: f64, g2: f64) -> Result<(StateVector, f64)> {
        let (psi, w) = self.source_state(g1, g2)?;
        Ok((self.circuit.apply(&psi)?, w))
    }

    fn p_model(&self, scenario: &Scenario) -> Result<Detector> {
        let base = self.detector("p")?;
        let kind = match *scenario {
            Scenario::ThreefoldNumberResolvedP { .. } => DetectorKind::NumberResolving,
            Scenario::ThreefoldCascadeP { stages } => DetectorKind::Cascade { stages },
            _ => return Ok(base.clone()),
        };
        Ok(Detector::new("p", DetectorModel::on_beam(kind, base.model.efficiency, Beam::Four)?))
    }

    /// Evaluates a single-state scenario with the sources at `(g1, g2)`.
    pub fn evaluate(&self, scenario: &Scenario, g1: f64, g2: f64) -> Result<ScenarioPoint> {
        scenario.validate()?;
        let p_outcome = match *scenario {
            Scenario::ThreefoldNumberResolvedP { n } => Outcome::Count(n),
            Scenario::ThreefoldCascadeP { .. } => Outcome::Clicks(1),
            Scenario::CouplingRatioSweep { .. } => return Err(Error::IncompatibleScenario(scenario.id())),
            _ => Outcome::Click,
        };
        let mut detectors = self.detectors.clone();
        detectors[0] = self.p_model(scenario)?;
        let herald = [("p", p_outcome), ("f1", Outcome::Click), ("f2", Outcome::Click)];

        let (psi, truncation_weight) = self.output_state(g1, g2)?;
        let keep = Beam::Three.modes();
        let (unnormalized, qnd) = match scenario {
            Scenario::Fourfold => {
                let mut psi = self.bob.apply(&psi)?;
                let patterns: Vec<OutcomePattern> = [(Outcome::Click, Outcome::NoClick), (Outcome::NoClick, Outcome::Click)]
                    .into_iter()
                    .map(|(o1, o2)| OutcomePattern::new(herald.into_iter().chain([("d1", o1), ("d2", o2)])))
                    .collect();
                psi = measure_retained(&psi, &patterns, &detectors)?;
                for t in self.bob.transforms()?.iter().rev() {
                    psi = t.inverse().apply(&psi)?;
                }
                (DensityOperator::reduced_from_pure(&psi, &keep)?, None)
            }
            Scenario::ThreefoldQndBob { n } => {
                let psi = measure_retained(&psi, &[OutcomePattern::new(herald)], &detectors)?;
                (DensityOperator::reduced_from_pure(&psi, &keep)?, Some(*n))
            }
            _ => {
                let psi = measure_retained(&psi, &[OutcomePattern::new(herald)], &detectors)?;
                (DensityOperator::reduced_from_pure(&psi, &keep)?, None)
            }
        };
        let mut probability = unnormalized.trace();
        if probability < crate::detection::ZERO_PROBABILITY {
            return Err(Error::ZeroProbability { pattern: scenario.id(), probability });
        }
        let (mut rho3, _) = unnormalized.normalize()?;
        if let Some(n) = qnd {
            let c = qnd_total_number(&rho3, Beam::Three, n)?;
            probability *= c.probability;
            rho3 = c.state;
        }
        point_from(&self.target()?, rho3, probability, (g1, g2), truncation_weight)
    }
}

pub(crate) fn point_from(
    target: &StateVector,
    rho3: DensityOperator,
    probability: f64,
    couplings: (f64, f64),
    truncation_weight: f64,
) -> Result<ScenarioPoint> {
    let rho3 = rho3.symmetrize()?;
    let fidelity = rho3.fidelity_pure(target)?;
    let dist = rho3.photon_number_distribution();
    let vacuum_weight = dist[0].clamp(0.0, 1.0);
    let single_photon_weight = dist.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0);
    let multiphoton_weight = dist.iter().skip(2).sum::<f64>().clamp(0.0, 1.0);
    Ok(ScenarioPoint {
        couplings,
        rho3,
        probability,
        fidelity,
        vacuum_weight,
        single_photon_weight,
        multiphoton_weight,
        truncation_weight,
    })
}

/// Runs a scenario at the configured couplings.
pub fn run_scenario(config: &SetupConfig, scenario: &Scenario) -> Result<ScenarioResult> {
    let app = Apparatus::build(config)?;
    let point = app.evaluate(scenario, config.coupling_i, config.coupling_ii)?;
    Ok(ScenarioResult { scenario: scenario.id(), point, leading_order: None })
}

/// Extrapolates the fidelity and the beam-3 state to vanishing coupling.
/// Each entry of `couplings` is the larger of the two source strengths, the
/// configured ratio between them being held fixed.
pub fn leading_order(config: &SetupConfig, scenario: &Scenario, couplings: &[f64]) -> Result<LeadingOrder> {
    let app = Apparatus::build(config)?;
    leading_order_with(couplings, |g| {
        let (g1, g2) = config.couplings_at(g);
        app.evaluate(scenario, g1, g2).map(|p| (p.fidelity, p.rho3))
    })
}

pub(crate) fn leading_order_with(
    couplings: &[f64],
    mut eval: impl FnMut(f64) -> Result<(f64, DensityOperator)>,
) -> Result<LeadingOrder> {
    let mut fidelities = Vec::with_capacity(couplings.len());
    let mut states = Vec::with_capacity(couplings.len());
    for &g in couplings {
        let (f, rho) = eval(g)?;
        fidelities.push(f);
        states.push(rho);
    }
    let fidelity = richardson(couplings, &fidelities)?;
    let rho3 = extrapolate_state(couplings, &states)?;
    Ok(LeadingOrder { couplings: couplings.to_vec(), fidelities, fidelity, rho3 })
}

fn extrapolate_state(couplings: &[f64], states: &[DensityOperator]) -> Result<DensityOperator> {
    let space = states[0].space().clone();
    let mut support: Vec<(usize, usize)> = states.iter().flat_map(|s| s.iter().map(|(k, _)| k)).collect();
    support.sort_unstable();
    support.dedup();
    let mut entries = Vec::with_capacity(support.len());
    for (i, j) in support {
        let re: Vec<f64> = states.iter().map(|s| s.entry(i, j).re).collect();
        let im: Vec<f64> = states.iter().map(|s| s.entry(i, j).im).collect();
        let v = C64::new(crate::extrapolate::neville_at_zero(couplings, &re)?, crate::extrapolate::neville_at_zero(couplings, &im)?);
        entries.push(((i, j), v));
    }
    Ok(DensityOperator::from_entries(&space, entries))
}

/// One row of a coupling-ratio sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `coupling_ii / coupling_i`.
    pub ratio: f64,
    /// Leading-order fidelity.
    pub fidelity: f64,
    pub fidelity_error: f64,
    /// Threefold event probability at the configured coupling scale.
    pub probability: f64,
    pub vacuum_weight: f64,
}

/// Leading-order threefold fidelity as a function of the coupling ratio.
/// The stronger source is held at the larger configured coupling; rows are
/// sorted by ratio.
pub fn coupling_ratio_sweep(config: &SetupConfig, ratios: &[f64], couplings: &[f64]) -> Result<Vec<SweepRow>> {
    Scenario::CouplingRatioSweep { ratios: ratios.to_vec() }.validate()?;
    let scale = config.coupling_i.max(config.coupling_ii);
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|r| {
            let (g1, g2) = if r >= 1.0 { (scale / r, scale) } else { (scale, scale * r) };
            let c = SetupConfig { coupling_i: g1, coupling_ii: g2, ..config.clone() };
            let lo = leading_order(&c, &Scenario::Threefold, couplings)?;
            let point = Apparatus::build(&c)?.evaluate(&Scenario::Threefold, g1, g2)?;
            Ok(SweepRow {
                ratio: r,
                fidelity: lo.fidelity.value,
                fidelity_error: lo.fidelity.error,
                probability: point.probability,
                vacuum_weight: point.vacuum_weight,
            })
        })
        .collect()
}

/// Largest difference of the leading-order fidelity across input angles.
pub fn input_independence_check(config: &SetupConfig, scenario: &Scenario, angles: &[f64], couplings: &[f64]) -> Result<f64> {
    if angles.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 input angles, got {}", angles.len())));
    }
    let mut values = Vec::with_capacity(angles.len());
    for &theta in angles {
        let c = SetupConfig { input_polarization: theta, ..config.clone() };
        values.push(leading_order(&c, scenario, couplings)?.fidelity.value);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}
