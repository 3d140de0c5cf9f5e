//! Tomography of the output beam, the random-polarization baseline, and
//! report generation.
//!
//! Tomography works on the vacuum plus single-photon sector of beam 3. Each
//! setting is a polarization analyzer (HV, diagonal or circular) followed by
//! a polarizing beamsplitter and photon counting on both ports, with four
//! outcomes: no photon, one photon in the first port, one photon in the
//! second port, and a flagged multiphoton event. Photon counting cannot
//! reveal coherences between vacuum and one photon, so the inversion
//! recovers the number-block-diagonal part of the state: the vacuum weight
//! and the 2x2 single-photon polarization block.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ScenarioResult, SweepRow};
use crate::fock::{Beam, DensityOperator, FockSpace, StateVector};
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

/// Fidelity margin above the baseline required to count as exceeding it.
pub const BASELINE_MARGIN: f64 = 1e-3;

/// Analytic mean fidelity of a uniformly random polarization state.
pub const CLASSICAL_BASELINE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerBasis {
    Hv,
    Diagonal,
    Circular,
}

impl AnalyzerBasis {
    pub const ALL: [AnalyzerBasis; 3] = [AnalyzerBasis::Hv, AnalyzerBasis::Diagonal, AnalyzerBasis::Circular];

    /// Polarization amplitudes `(H, V)` routed to the first and second port.
    pub fn ports(self) -> [[C64; 2]; 2] {
        let s = FRAC_1_SQRT_2;
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            AnalyzerBasis::Hv => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
            AnalyzerBasis::Diagonal => [[r(s), r(s)], [r(s), r(-s)]],
            AnalyzerBasis::Circular => [[r(s), C64::new(0.0, s)], [r(s), C64::new(0.0, -s)]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    /// Infinite statistics: use Born probabilities directly.
    Exact,
    Count(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographySetting {
    pub basis: AnalyzerBasis,
    pub shots: Shots,
    pub seed: u64,
}

/// Outcome order within a setting.
pub const OUTCOMES: [&str; 4] = ["no_click", "first_port", "second_port", "multiphoton"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingProbabilities {
    pub basis: AnalyzerBasis,
    /// Indexed as [`OUTCOMES`].
    pub probabilities: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub rows: Vec<SettingProbabilities>,
    /// Whether the settings determine the vacuum and single-photon blocks.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub basis: AnalyzerBasis,
    pub counts: [u64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub rows: Vec<SettingCounts>,
}

fn is_complete(bases: &[AnalyzerBasis]) -> bool {
    AnalyzerBasis::ALL.iter().all(|b| bases.contains(b))
}

/// Born probabilities of each setting's outcomes for a beam-3 state.
pub fn tomography_probabilities(rho3: &DensityOperator, settings: &[TomographySetting]) -> Result<ProbabilityTable> {
    rho3.require_normalized()?;
    let space = rho3.space();
    let modes = Beam::Three.modes();
    if space.modes() != modes {
        return Err(Error::InvalidInput("tomography expects a state on the H and V modes of beam 3 only".into()));
    }
    let vac = rho3.entry(0, 0).re;
    let (h, v) = (space.index_of(&[1, 0])?, space.index_of(&[0, 1])?);
    let block = [[rho3.entry(h, h), rho3.entry(h, v)], [rho3.entry(v, h), rho3.entry(v, v)]];
    let single = (block[0][0] + block[1][1]).re;
    let multi = (1.0 - vac - single).max(0.0);
    let rows = settings
        .iter()
        .map(|s| {
            let ports = s.basis.ports();
            let p = ports.map(|e| {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        acc += e[a].conj() * block[a][b] * e[b];
                    }
                }
                acc.re.max(0.0)
            });
            SettingProbabilities { basis: s.basis, probabilities: [vac, p[0], p[1], multi] }
        })
        .collect();
    Ok(ProbabilityTable { rows, complete: is_complete(&settings.iter().map(|s| s.basis).collect::<Vec<_>>()) })
}

/// Multinomial counts per setting, drawn from one seeded generator in
/// setting order.
pub fn sample_counts(table: &ProbabilityTable, shots: u64, seed: u64) -> Result<CountTable> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let mut counts = [0u64; 4];
            let mut left = shots;
            let mut mass = 1.0;
            for k in 0..4 {
                if k == 3 || left == 0 {
                    counts[k] = left;
                    left = 0;
                    continue;
                }
                let p = (row.probabilities[k] / mass).clamp(0.0, 1.0);
                let draw = Binomial::new(left, p).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(&mut rng);
                counts[k] = draw;
                left -= draw;
                mass -= row.probabilities[k];
                if mass <= 0.0 {
                    counts[k] += left;
                    left = 0;
                    mass = 1.0;
                }
            }
            Ok(SettingCounts { basis: row.basis, counts })
        })
        .collect::<Result<_>>()?;
    Ok(CountTable { rows })
}

impl CountTable {
    /// Relative frequencies.
    pub fn frequencies(&self) -> ProbabilityTable {
        let rows: Vec<SettingProbabilities> = self
            .rows
            .iter()
            .map(|r| {
                let n: u64 = r.counts.iter().sum();
                SettingProbabilities { basis: r.basis, probabilities: r.counts.map(|c| c as f64 / n.max(1) as f64) }
            })
            .collect();
        let bases: Vec<AnalyzerBasis> = rows.iter().map(|r| r.basis).collect();
        ProbabilityTable { rows, complete: is_complete(&bases) }
    }

    pub fn shots(&self) -> u64 {
        self.rows.iter().map(|r| r.counts.iter().sum::<u64>()).sum()
    }
}

/// Tomographic data: exact probabilities or sampled counts.
#[derive(Clone, Debug, PartialEq)]
pub enum TomographyData {
    Exact(ProbabilityTable),
    Counts(CountTable),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    /// Estimate on the vacuum plus single-photon sector (cutoff 1).
    pub rho_hat: DensityOperator,
    pub vacuum_weight_estimate: f64,
    /// Estimated weight outside the reconstructed sector.
    pub multiphoton_leakage: f64,
    /// Uhlmann fidelity to the supplied truth restricted to the sector.
    pub fidelity_to_truth: Option<f64>,
    /// Trace distance to the supplied truth restricted to the sector.
    pub trace_distance_to_truth: Option<f64>,
    /// `None` for exact probabilities.
    pub shots_used: Option<u64>,
}

/// The space the reconstruction lives on.
pub fn sector_space() -> FockSpace {
    FockSpace::new(Beam::Three.modes().to_vec(), 1).expect("two distinct modes")
}

/// Restricts a beam-3 state to the vacuum plus single-photon sector and
/// renormalizes.
pub fn restrict_to_sector(rho3: &DensityOperator) -> Result<DensityOperator> {
    let sector = sector_space();
    let space = rho3.space();
    let map: Vec<Option<usize>> = (0..space.dim())
        .map(|i| {
            let occ = space.occupation(i);
            sector.index_of(&occ).ok()
        })
        .collect();
    let entries = rho3.iter().filter_map(|((i, j), v)| Some(((map[i]?, map[j]?), v)));
    let restricted = DensityOperator::from_entries(&sector, entries);
    Ok(restricted.normalize()?.0)
}

/// Linear inversion of the number-block-diagonal parameters followed by
/// positivity repair (eigenvalue clipping and trace renormalization).
pub fn reconstruct(data: &TomographyData, truth: Option<&DensityOperator>) -> Result<ReconstructionResult> {
    let (table, shots_used) = match data {
        TomographyData::Exact(t) => (t.clone(), None),
        TomographyData::Counts(c) => (c.frequencies(), Some(c.shots())),
    };
    // unknowns: vacuum, rho_HH, rho_VV, Re rho_HV, Im rho_HV
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut leakage = 0.0;
    for row in &table.rows {
        a.push([1.0, 0.0, 0.0, 0.0, 0.0]);
        b.push(row.probabilities[0]);
        for (port, e) in row.basis.ports().iter().enumerate() {
            // <e|rho|e> = |eH|^2 rHH + |eV|^2 rVV + 2 Re(conj(eH) eV rHV)
            let x = e[0].conj() * e[1];
            a.push([0.0, e[0].norm_sqr(), e[1].norm_sqr(), 2.0 * x.re, -2.0 * x.im]);
            b.push(row.probabilities[port + 1]);
        }
        leakage += row.probabilities[3];
    }
    let multiphoton_leakage = if table.rows.is_empty() { 0.0 } else { leakage / table.rows.len() as f64 };
    let design = DMatrix::from_fn(a.len(), 5, |r, c| a[r][c]);
    let rhs = nalgebra::DVector::from_vec(b);
    let svd = design.svd(true, true);
    let scale = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * scale.max(1.0)).count();
    if rank < 5 {
        return Err(Error::SingularInversion { rank, needed: 5 });
    }
    let x = svd.solve(&rhs, 1e-12).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let hv = C64::new(x[3], x[4]);
    let raw = DMatrix::from_row_slice(
        3,
        3,
        &[
            C64::new(x[0], 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(x[1], 0.0),
            hv,
            C64::new(0.0, 0.0),
            hv.conj(),
            C64::new(x[2], 0.0),
        ],
    );
    let fixed = project_to_states(&raw);
    // sector basis order: vacuum, |0,1> (V), |1,0> (H)
    let sector = sector_space();
    let (iv, ih) = (sector.index_of(&[0, 1])?, sector.index_of(&[1, 0])?);
    let order = [0usize, ih, iv];
    let mut m = DMatrix::<C64>::zeros(3, 3);
    for r in 0..3 {
        for c in 0..3 {
            m[(order[r], order[c])] = fixed[(r, c)];
        }
    }
    let rho_hat = DensityOperator::from_dense(&sector, &m)?;
    let vacuum_weight_estimate = rho_hat.entry(0, 0).re;
    let (fidelity_to_truth, trace_distance_to_truth) = match truth {
        Some(t) => {
            let t = restrict_to_sector(t)?;
            (Some(uhlmann_fidelity(&rho_hat.to_dense(), &t.to_dense())), Some(trace_distance(&rho_hat.to_dense(), &t.to_dense())))
        }
        None => (None, None),
    };
    Ok(ReconstructionResult { rho_hat, vacuum_weight_estimate, multiphoton_leakage, fidelity_to_truth, trace_distance_to_truth, shots_used })
}

/// Clips negative eigenvalues of a Hermitian matrix and rescales to unit
/// trace.
fn project_to_states(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let n = m.nrows();
    let mut out = DMatrix::<C64>::zeros(n, n);
    if total <= 0.0 {
        out[(0, 0)] = C64::new(1.0, 0.0);
        return out;
    }
    for (k, &l) in clipped.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * C64::new(l / total, 0.0);
    }
    out
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0));
    let mut out = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * C64::new(l.max(0.0).sqrt(), 0.0);
    }
    out
}

/// `(Tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn uhlmann_fidelity(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let s = psd_sqrt(a);
    let inner = &s * b * &s;
    let eig = SymmetricEigen::new((&inner + inner.adjoint()) * C64::new(0.5, 0.0));
    let t: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    (t * t).min(1.0)
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let d = a - b;
    let eig = SymmetricEigen::new((&d + d.adjoint()) * C64::new(0.5, 0.0));
    0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub analytic: f64,
    pub monte_carlo: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Mean fidelity of uniformly random polarization states with `phi`, a
/// single-photon polarization state on beam 3.
pub fn classical_baseline(phi: &StateVector, trials: u64, seed: u64) -> Result<Baseline> {
    phi.require_normalized()?;
    let space = phi.space();
    if space.modes() != Beam::Three.modes() {
        return Err(Error::InvalidInput("baseline expects a state on the H and V modes of beam 3".into()));
    }
    let (h, v) = (phi.amplitude_of(&[1, 0])?, phi.amplitude_of(&[0, 1])?);
    if (h.norm_sqr() + v.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("baseline expects a single-photon state".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..trials {
        // uniform on the Bloch sphere
        let z: f64 = rng.random_range(-1.0..=1.0);
        let az: f64 = rng.random_range(0.0..2.0 * PI);
        let c = ((1.0 + z) / 2.0).sqrt();
        let s = ((1.0 - z) / 2.0).sqrt();
        let overlap = h.conj() * c + v.conj() * C64::from_polar(s, az);
        sum += overlap.norm_sqr();
    }
    Ok(Baseline { analytic: CLASSICAL_BASELINE, monte_carlo: sum / trials as f64, trials, seed })
}

/// One scenario row of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub coupling_i: f64,
    pub coupling_ii: f64,
    pub fidelity: f64,
    pub probability: f64,
    pub vacuum_weight: f64,
    pub multiphoton_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leading_order_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leading_order_error: Option<f64>,
    pub baseline: f64,
    pub exceeds_baseline: bool,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographySummary {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub vacuum_weight_estimate: f64,
    pub multiphoton_leakage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_to_truth: Option<f64>,
}

/// Machine-readable summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub baseline: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_monte_carlo: Option<Baseline>,
    pub scenarios: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub tomography: Vec<TomographySummary>,
}

/// Flat CSV row; one per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub schema_version: u32,
    pub scenario: String,
    pub coupling_i: f64,
    pub coupling_ii: f64,
    pub fidelity: f64,
    pub leading_order_fidelity: Option<f64>,
    pub leading_order_error: Option<f64>,
    pub probability: f64,
    pub vacuum_weight: f64,
    pub multiphoton_weight: f64,
    pub baseline: f64,
    pub exceeds_baseline: bool,
}

/// Builds a report, comparing each scenario (at leading order when
/// available) against the random-polarization baseline.
pub fn report(
    results: &[ScenarioResult],
    baseline: Option<Baseline>,
    sweep: Vec<SweepRow>,
    tomography: Vec<TomographySummary>,
) -> Result<Report> {
    if results.is_empty() && sweep.is_empty() {
        return Err(Error::InvalidInput("a report needs at least one result".into()));
    }
    let scenarios = results
        .iter()
        .map(|r| {
            let lo = r.leading_order.as_ref().map(|l| l.fidelity);
            let f = lo.map_or(r.point.fidelity, |e| e.value);
            let exceeds = f > CLASSICAL_BASELINE + BASELINE_MARGIN;
            ReportRow {
                scenario: r.scenario.clone(),
                coupling_i: r.point.couplings.0,
                coupling_ii: r.point.couplings.1,
                fidelity: r.point.fidelity,
                probability: r.point.probability,
                vacuum_weight: r.point.vacuum_weight,
                multiphoton_weight: r.point.multiphoton_weight,
                leading_order_fidelity: lo.map(|e| e.value),
                leading_order_error: lo.map(|e| e.error),
                baseline: CLASSICAL_BASELINE,
                exceeds_baseline: exceeds,
                verdict: if exceeds { "exceeds classical baseline" } else { "does not exceed classical baseline" }.into(),
            }
        })
        .collect();
    Ok(Report { schema_version: SCHEMA_VERSION, baseline: CLASSICAL_BASELINE, baseline_monte_carlo: baseline, scenarios, sweep, tomography })
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.scenarios
            .iter()
            .map(|r| CsvRow {
                schema_version: self.schema_version,
                scenario: r.scenario.clone(),
                coupling_i: r.coupling_i,
                coupling_ii: r.coupling_ii,
                fidelity: r.fidelity,
                leading_order_fidelity: r.leading_order_fidelity,
                leading_order_error: r.leading_order_error,
                probability: r.probability,
                vacuum_weight: r.vacuum_weight,
                multiphoton_weight: r.multiphoton_weight,
                baseline: r.baseline,
                exceeds_baseline: r.exceeds_baseline,
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.csv_rows())
    }
}

/// Serializes rows with a header line.
pub fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}
