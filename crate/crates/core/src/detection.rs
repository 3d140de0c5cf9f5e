//! Photodetectors as POVMs and the conditioning engine.
//!
//! Every detector model here responds only to the total photon number on its
//! watched modes, so each POVM element is diagonal in the number basis and is
//! stored as a response table `P(outcome | n)`. Efficiency `eta` is the
//! response of an ideal detector behind a beamsplitter of transmissivity
//! `eta` to a discarded loss mode, which thins `n` photons binomially.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{Beam, DensityOperator, FockOperator, FockSpace, ModeLabel, StateVector};
use crate::optics::beamsplitter;
use crate::C64;

/// Probabilities below this are treated as structurally zero.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorKind {
    Threshold,
    NumberResolving,
    /// The input is split evenly over `stages` threshold detectors and the
    /// outcome is the number that fire.
    Cascade { stages: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub kind: DetectorKind,
    pub efficiency: f64,
    pub polarization_sensitive: bool,
    pub watched: Vec<ModeLabel>,
}

impl DetectorModel {
    /// Polarization-insensitive detector on both modes of `beam`.
    pub fn on_beam(kind: DetectorKind, efficiency: f64, beam: Beam) -> Result<Self> {
        let d = Self { kind, efficiency, polarization_sensitive: false, watched: beam.modes().to_vec() };
        d.validate()?;
        Ok(d)
    }

    /// Detector behind a polarizing element, watching a single mode.
    pub fn on_mode(kind: DetectorKind, efficiency: f64, mode: ModeLabel) -> Result<Self> {
        let d = Self { kind, efficiency, polarization_sensitive: true, watched: vec![mode] };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter { name: "efficiency", value: self.efficiency, reason: "must lie in [0, 1]" });
        }
        if let DetectorKind::Cascade { stages } = self.kind {
            if stages == 0 {
                return Err(Error::InvalidParameter { name: "stages", value: 0.0, reason: "a cascade needs at least one stage" });
            }
        }
        let ok = match (self.polarization_sensitive, self.watched.as_slice()) {
            (true, [_]) => true,
            (false, [h, v]) => h.beam == v.beam && *h == h.beam.h() && *v == v.beam.v(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedModes(format!(
                "a {} detector watches {}",
                if self.polarization_sensitive { "polarization-sensitive" } else { "polarization-insensitive" },
                if self.polarization_sensitive { "one mode" } else { "the H and V modes of one beam" }
            )))
        }
    }

    /// Every outcome this model can report when at most `max_photons` arrive.
    pub fn outcomes(&self, max_photons: usize) -> Vec<Outcome> {
        match self.kind {
            DetectorKind::Threshold => vec![Outcome::NoClick, Outcome::Click],
            DetectorKind::NumberResolving => (0..=max_photons).map(Outcome::Count).collect(),
            DetectorKind::Cascade { stages } => (0..=stages.min(max_photons)).map(Outcome::Clicks).collect(),
        }
    }

    /// Whether `outcome` is a valid reading. `click` and `no_click` are valid
    /// for every kind and mean that at least one, or no, photon registered.
    pub fn accepts(&self, outcome: Outcome) -> bool {
        match (self.kind, outcome) {
            (_, Outcome::Click | Outcome::NoClick) => true,
            (DetectorKind::NumberResolving, Outcome::Count(_)) => true,
            (DetectorKind::Cascade { stages }, Outcome::Clicks(c)) => c <= stages,
            _ => false,
        }
    }

    /// `P(outcome | n photons on the watched modes)` for `n = 0..=max_photons`.
    pub fn response(&self, outcome: Outcome, max_photons: usize) -> Result<Vec<f64>> {
        if !self.accepts(outcome) {
            return Err(Error::InvalidOutcome { detector: format!("{:?}", self.kind), outcome: outcome.to_string() });
        }
        let eta = self.efficiency;
        Ok((0..=max_photons)
            .map(|n| match outcome {
                Outcome::NoClick => (1.0 - eta).powi(n as i32),
                Outcome::Click => 1.0 - (1.0 - eta).powi(n as i32),
                Outcome::Count(k) => thinning(n, k, eta),
                Outcome::Clicks(c) => {
                    let DetectorKind::Cascade { stages } = self.kind else { unreachable!() };
                    (c..=n).map(|m| thinning(n, m, eta) * cascade_clicks(m, stages, c)).sum()
                }
            })
            .collect())
    }
}

/// Binomial thinning: probability that `k` of `n` photons survive.
fn thinning(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    binomial(n, k) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that `m` photons spread uniformly over `k` ideal threshold
/// detectors fire exactly `c` of them: `C(k, c) c! S(m, c) / k^m`.
fn cascade_clicks(m: usize, k: usize, c: usize) -> f64 {
    if c > k || c > m {
        return 0.0;
    }
    // Stirling numbers of the second kind, row m
    let mut s = vec![0.0f64; c + 1];
    s[0] = 1.0;
    for _ in 0..m {
        for j in (1..=c).rev() {
            s[j] = j as f64 * s[j] + s[j - 1];
        }
        s[0] = 0.0;
    }
    let falling: f64 = (0..c).map(|i| (k - i) as f64).product();
    falling * s[c] / (k as f64).powi(m as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    NoClick,
    Click,
    /// Number-resolving reading.
    Count(usize),
    /// Number of cascade stages that fired.
    Clicks(usize),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::NoClick => write!(f, "no_click"),
            Outcome::Click => write!(f, "click"),
            Outcome::Count(n) => write!(f, "n={n}"),
            Outcome::Clicks(c) => write!(f, "clicks={c}"),
        }
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unrecognized detector outcome `{s}`"));
        match s {
            "no_click" => Ok(Outcome::NoClick),
            "click" => Ok(Outcome::Click),
            _ => {
                if let Some(n) = s.strip_prefix("n=") {
                    n.parse().map(Outcome::Count).map_err(|_| bad())
                } else if let Some(c) = s.strip_prefix("clicks=") {
                    c.parse().map(Outcome::Clicks).map_err(|_| bad())
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One element of a detector's POVM, as its photon-number response.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmElement {
    pub outcome: Outcome,
    /// `response[n]` is the outcome probability given `n` watched photons.
    pub response: Vec<f64>,
}

impl PovmElement {
    /// The element as a diagonal operator on `space`, which must contain the
    /// watched modes.
    pub fn operator(&self, model: &DetectorModel, space: &FockSpace) -> Result<FockOperator> {
        let pos = space.positions(&model.watched)?;
        Ok(FockOperator::diagonal(space, |occ| {
            let n: usize = pos.iter().map(|&p| occ[p] as usize).sum();
            C64::new(self.response.get(n).copied().unwrap_or(0.0), 0.0)
        }))
    }
}

/// Full outcome set of `model` for up to `max_photons` watched photons.
pub fn povm(model: &DetectorModel, max_photons: usize) -> Result<Vec<PovmElement>> {
    model.validate()?;
    model
        .outcomes(max_photons)
        .into_iter()
        .map(|o| Ok(PovmElement { outcome: o, response: model.response(o, max_photons)? }))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub id: String,
    pub model: DetectorModel,
}

impl Detector {
    pub fn new(id: impl Into<String>, model: DetectorModel) -> Self {
        Self { id: id.into(), model }
    }
}

/// Required outcomes by detector id. Detectors not named are summed over.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomePattern {
    pub assignments: BTreeMap<String, Outcome>,
}

impl OutcomePattern {
    pub fn new<'a>(pairs: impl IntoIterator<Item = (&'a str, Outcome)>) -> Self {
        Self { assignments: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }
}

impl fmt::Display for OutcomePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.assignments.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, "}}")
    }
}

/// A conditional state and the probability of the event that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioned {
    pub state: DensityOperator,
    pub probability: f64,
}

/// Compiled event: the diagonal POVM weight of a union of disjoint patterns
/// as a function of the occupation vector.
struct EventWeight {
    /// For each pattern, the (watched positions, response table) of each
    /// assigned detector.
    terms: Vec<Vec<(Vec<usize>, Vec<f64>)>>,
}

impl EventWeight {
    fn compile(space: &FockSpace, patterns: &[OutcomePattern], detectors: &[Detector]) -> Result<Self> {
        check_disjoint(detectors)?;
        let mut terms = Vec::with_capacity(patterns.len());
        for pattern in patterns {
            let mut t = Vec::new();
            for (id, &outcome) in &pattern.assignments {
                let d = detectors.iter().find(|d| &d.id == id).ok_or_else(|| Error::UnknownDetector(id.clone()))?;
                d.model.validate()?;
                if !d.model.accepts(outcome) {
                    return Err(Error::InvalidOutcome { detector: id.clone(), outcome: outcome.to_string() });
                }
                t.push((space.positions(&d.model.watched)?, d.model.response(outcome, space.cutoff())?));
            }
            terms.push(t);
        }
        Ok(Self { terms })
    }

    fn weight(&self, occ: &[u8]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.iter()
                    .map(|(pos, resp)| resp[pos.iter().map(|&p| occ[p] as usize).sum::<usize>()])
                    .product::<f64>()
            })
            .sum()
    }
}

fn check_disjoint(detectors: &[Detector]) -> Result<()> {
    for (i, a) in detectors.iter().enumerate() {
        for b in &detectors[..i] {
            if a.id == b.id || a.model.watched.iter().any(|m| b.model.watched.contains(m)) {
                return Err(Error::DetectorOverlap(b.id.clone(), a.id.clone()));
            }
        }
    }
    Ok(())
}

/// Modes left after removing every watched mode and every loss mode.
fn remaining_modes(space: &FockSpace, detectors: &[Detector]) -> Vec<ModeLabel> {
    space
        .modes()
        .iter()
        .copied()
        .filter(|m| !m.beam.is_loss() && !detectors.iter().any(|d| d.model.watched.contains(m)))
        .collect()
}

fn finish(unnormalized: DensityOperator, pattern: &dyn fmt::Display) -> Result<Conditioned> {
    let probability = unnormalized.trace();
    if probability < ZERO_PROBABILITY {
        return Err(Error::ZeroProbability { pattern: pattern.to_string(), probability });
    }
    let (state, _) = unnormalized.normalize()?;
    Ok(Conditioned { state, probability })
}

/// Applies the pattern's POVM elements, traces out watched and loss modes,
/// and returns the normalized conditional state with the pattern
/// probability.
pub fn condition(rho: &DensityOperator, pattern: &OutcomePattern, detectors: &[Detector]) -> Result<Conditioned> {
    let space = rho.space();
    let w = EventWeight::compile(space, std::slice::from_ref(pattern), detectors)?;
    let weights: Vec<f64> = (0..space.dim()).map(|i| w.weight(&space.occupation(i))).collect();
    let entries = rho.iter().filter_map(|((i, j), v)| {
        let s = (weights[i] * weights[j]).sqrt();
        (s > 0.0).then_some(((i, j), v * s))
    });
    let weighted = DensityOperator::from_entries(space, entries);
    let keep = remaining_modes(space, detectors);
    let reduced = if keep.len() == space.num_modes() { weighted } else { reduced_or_scalar(&weighted, &keep)? };
    finish(reduced, pattern)
}

fn reduced_or_scalar(rho: &DensityOperator, keep: &[ModeLabel]) -> Result<DensityOperator> {
    if keep.is_empty() {
        let s = FockSpace::new(Vec::new(), rho.space().cutoff())?;
        return Ok(DensityOperator::from_entries(&s, [((0, 0), C64::new(rho.trace(), 0.0))]));
    }
    rho.partial_trace(keep)
}

/// `sqrt(E) |psi>` for the event made of the union of `patterns`, leaving
/// every mode in place. The squared norm of the result is the event
/// probability.
pub fn measure_retained(psi: &StateVector, patterns: &[OutcomePattern], detectors: &[Detector]) -> Result<StateVector> {
    let w = EventWeight::compile(psi.space(), patterns, detectors)?;
    Ok(psi.map_diagonal(|occ| C64::new(w.weight(occ).sqrt(), 0.0)))
}

/// Pure-state counterpart of [`condition`] that never forms the global
/// density operator. The result lives on `keep`, or on the remaining modes
/// when `keep` is `None`.
pub fn condition_pure(
    psi: &StateVector,
    pattern: &OutcomePattern,
    detectors: &[Detector],
    keep: Option<&[ModeLabel]>,
) -> Result<Conditioned> {
    let weighted = measure_retained(psi, std::slice::from_ref(pattern), detectors)?;
    let default_keep;
    let keep = match keep {
        Some(k) => k,
        None => {
            default_keep = remaining_modes(psi.space(), detectors);
            &default_keep
        }
    };
    let reduced = if keep.is_empty() {
        let s = FockSpace::new(Vec::new(), psi.space().cutoff())?;
        DensityOperator::from_entries(&s, [((0, 0), C64::new(weighted.norm_sqr(), 0.0))])
    } else {
        DensityOperator::reduced_from_pure(&weighted, keep)?
    };
    finish(reduced, pattern)
}

/// Non-destructive projection onto total photon number `n` in `beam`. The
/// beam's modes are retained.
pub fn qnd_total_number(rho: &DensityOperator, beam: Beam, n: usize) -> Result<Conditioned> {
    let space = rho.space();
    let pos = space.positions(&beam.modes())?;
    let hit = |i: usize| -> bool {
        let occ = space.occupation(i);
        pos.iter().map(|&p| occ[p] as usize).sum::<usize>() == n
    };
    let entries = rho.iter().filter(|&((i, j), _)| hit(i) && hit(j));
    let projected = DensityOperator::from_entries(space, entries);
    finish(projected, &format!("{{qnd({beam}): n={n}}}"))
}

/// Sends each of `modes` through a beamsplitter of transmissivity `eta` into
/// a fresh vacuum loss mode, then discards the loss modes.
pub fn loss_channel(rho: &DensityOperator, modes: &[ModeLabel], eta: f64) -> Result<DensityOperator> {
    let space = rho.space();
    space.positions(modes)?;
    let mut extended = space.modes().to_vec();
    let mut fresh = (0u8..=u8::MAX).map(Beam::Loss).filter(|b| !space.modes().iter().any(|m| m.beam == *b));
    let mut elements = Vec::with_capacity(modes.len());
    for &m in modes {
        let loss = fresh.next().ok_or_else(|| Error::InvalidInput("no free loss beam".into()))?.h();
        extended.push(loss);
        elements.push(beamsplitter(eta, 0.0, [m, loss])?);
    }
    let big = FockSpace::new(extended, space.cutoff())?;
    let mut out = rho.embed(&big)?;
    for e in elements {
        out = e.transform()?.lift(&big)?.apply_density(&out)?;
    }
    out.partial_trace(space.modes())
}
