//! Brute-force reference implementation of the apparatus.
//!
//! Shares no numerical code with the sparse pipeline: the basis is
//! enumerated explicitly, passive optics are lifted through matrix
//! permanents, each source is a product of two dense two-mode squeezers
//! exponentiated by Hermitian eigendecomposition, detector responses come
//! from explicit loss-and-splitter networks, and conditioning forms the full
//! dense density matrix before tracing. Only practical at small cutoffs.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::detection::{DetectorKind, Outcome};
use crate::error::{Error, Result};
use crate::experiment::{DetectorSpec, Preparation, Scenario, SetupConfig};
use crate::extrapolate::{richardson, Extrapolated};
use crate::fock::{Beam, ModeLabel};
use crate::sources::TRUNCATION_LIMIT;
use crate::C64;

/// Mode positions watched by one detector and its response to each local
/// occupation.
type ResponseTable = (Vec<usize>, HashMap<Vec<u8>, f64>);

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Ryser's formula.
pub fn permanent(a: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    if n == 0 {
        return ONE;
    }
    let mut total = ZERO;
    for subset in 1u32..(1 << n) {
        let mut prod = ONE;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                if subset & (1 << j) != 0 {
                    row += a[(i, j)];
                }
            }
            prod *= row;
        }
        let sign = if (n - subset.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Every occupation vector over `m` modes with at most `c` photons.
fn enumerate(m: usize, c: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, m: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=left {
            prefix.push(k as u8);
            rec(prefix, m, left - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), m, c, &mut out);
    out
}

struct Basis {
    modes: Vec<ModeLabel>,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    by_total: Vec<Vec<usize>>,
}

impl Basis {
    fn new(modes: Vec<ModeLabel>, cutoff: usize) -> Self {
        let states = enumerate(modes.len(), cutoff);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let mut by_total = vec![Vec::new(); cutoff + 1];
        for (i, s) in states.iter().enumerate() {
            by_total[s.iter().map(|&n| n as usize).sum::<usize>()].push(i);
        }
        Self { modes, states, index, by_total }
    }

    fn dim(&self) -> usize {
        self.states.len()
    }

    fn pos(&self, m: ModeLabel) -> usize {
        self.modes.iter().position(|&x| x == m).expect("mode in oracle basis")
    }
}

/// Transition amplitude `<out| U |in>` of the second-quantized mode unitary
/// `u` (columns are the images of input modes).
fn transition(u: &DMatrix<C64>, input: &[u8], output: &[u8]) -> C64 {
    let cols: Vec<usize> = input.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize)).collect();
    let rows: Vec<usize> = output.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize)).collect();
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| u[(rows[r], cols[c])]);
    let norm: f64 = input.iter().chain(output).map(|&n| factorial(n as usize)).product();
    permanent(&sub) / norm.sqrt()
}

fn apply_unitary(u: &DMatrix<C64>, basis: &Basis, psi: &DVector<C64>) -> DVector<C64> {
    let n = u.nrows();
    // modes the unitary leaves alone cannot change occupation
    let idle: Vec<usize> = (0..n)
        .filter(|&k| (0..n).all(|r| u[(r, k)] == if r == k { ONE } else { ZERO } && u[(k, r)] == if r == k { ONE } else { ZERO }))
        .collect();
    let mut out = DVector::zeros(basis.dim());
    for (j, &a) in psi.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        let input = &basis.states[j];
        let total: usize = input.iter().map(|&n| n as usize).sum();
        for &i in &basis.by_total[total] {
            let output = &basis.states[i];
            if idle.iter().any(|&k| output[k] != input[k]) {
                continue;
            }
            let t = transition(u, input, output);
            if t != ZERO {
                out[i] += t * a;
            }
        }
    }
    out
}

/// Pair amplitudes `c_n` of `exp(g (a^dag b^dag - a b)) |0,0>` from a dense
/// two-mode Fock matrix.
fn squeezer_amplitudes(g: f64, levels: usize) -> Vec<f64> {
    let cutoff = 2 * levels;
    let states = enumerate(2, cutoff);
    let index: HashMap<Vec<u8>, usize> = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let d = states.len();
    // H = i g (a^dag b^dag - a b) is Hermitian and exp(-i H) is the squeezer
    let mut h = DMatrix::<C64>::zeros(d, d);
    for (j, s) in states.iter().enumerate() {
        if (s[0] + s[1]) as usize + 2 <= cutoff {
            let i = index[&vec![s[0] + 1, s[1] + 1]];
            let amp = g * (((s[0] as f64) + 1.0) * ((s[1] as f64) + 1.0)).sqrt();
            h[(i, j)] += C64::new(0.0, amp);
            h[(j, i)] += C64::new(0.0, -amp);
        }
    }
    let eig = h.symmetric_eigen();
    let v = &eig.eigenvectors;
    let vac = index[&vec![0, 0]];
    (0..=levels)
        .map(|n| {
            let i = index[&vec![n as u8, n as u8]];
            let mut a = ZERO;
            for k in 0..d {
                a += v[(i, k)] * C64::from_polar(1.0, -eig.eigenvalues[k]) * v[(vac, k)].conj();
            }
            a.re
        })
        .collect()
}

/// Amplitudes of one source over `(iH, iV, jH, jV)`, keeping at most
/// `max_pairs` pairs, renormalized, with the discarded weight.
fn source_terms(g: f64, max_pairs: usize) -> (Vec<([u8; 4], f64)>, f64) {
    let levels = max_pairs + 6;
    // the pair generator splits into two commuting squeezers,
    // (iH, jV) with strength g and (iV, jH) with strength -g
    let a = squeezer_amplitudes(g, levels);
    let b = squeezer_amplitudes(-g, levels);
    let mut terms = Vec::new();
    let mut kept = 0.0;
    for n in 0..=max_pairs {
        for m in 0..=max_pairs - n {
            let c = a[n] * b[m];
            kept += c * c;
            terms.push(([n as u8, m as u8, m as u8, n as u8], c));
        }
    }
    let s = kept.sqrt();
    (terms.into_iter().map(|(o, c)| (o, c / s)).collect(), 1.0 - kept)
}

fn embed_4x4(u: &mut DMatrix<C64>, idx: [usize; 4], m: [[C64; 4]; 4]) {
    for r in 0..4 {
        for c in 0..4 {
            u[(idx[r], idx[c])] = m[r][c];
        }
    }
}

fn embed_2x2(u: &mut DMatrix<C64>, idx: [usize; 2], m: [[C64; 2]; 2]) {
    for r in 0..2 {
        for c in 0..2 {
            u[(idx[r], idx[c])] = m[r][c];
        }
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A detector as an explicit network: each watched mode passes a loss
/// beamsplitter and a `k`-port discrete Fourier splitter onto `k` ideal
/// stages. Returns `P(outcome | watched occupation)` for every occupation up
/// to `cutoff`.
fn detector_table(spec: &DetectorSpec, watched: usize, cutoff: usize, outcome: Outcome) -> HashMap<Vec<u8>, f64> {
    let k = match spec.kind {
        DetectorKind::Cascade { stages } => stages,
        _ => 1,
    };
    let eta = spec.efficiency;
    // single-mode network on [input, ancilla 1..k-1, loss]
    let size = k + 1;
    let mut loss = DMatrix::<C64>::identity(size, size);
    loss[(0, 0)] = re(eta.sqrt());
    loss[(k, 0)] = re((1.0 - eta).sqrt());
    loss[(0, k)] = re(-(1.0 - eta).sqrt());
    loss[(k, k)] = re(eta.sqrt());
    let mut dft = DMatrix::<C64>::identity(size, size);
    for r in 0..k {
        for c in 0..k {
            dft[(r, c)] = C64::from_polar(1.0 / (k as f64).sqrt(), TAU * (r * c) as f64 / k as f64);
        }
    }
    let net = dft * loss;
    // distribution of stage occupations for n photons entering one mode
    let single: Vec<Vec<(Vec<u8>, f64)>> = (0..=cutoff)
        .map(|n| {
            let mut input = vec![0u8; size];
            input[0] = n as u8;
            enumerate(size, n)
                .into_iter()
                .filter(|o| o.iter().map(|&x| x as usize).sum::<usize>() == n)
                .map(|o| {
                    let p = transition(&net, &input, &o).norm_sqr();
                    (o[..k].to_vec(), p)
                })
                .collect()
        })
        .collect();
    let registers = |stages: &[u8]| -> bool {
        match outcome {
            Outcome::Click => stages.iter().any(|&x| x > 0),
            Outcome::NoClick => stages.iter().all(|&x| x == 0),
            Outcome::Count(c) => stages.iter().map(|&x| x as usize).sum::<usize>() == c,
            Outcome::Clicks(c) => stages.iter().filter(|&&x| x > 0).count() == c,
        }
    };
    let mut table = HashMap::new();
    for occ in enumerate(watched, cutoff) {
        let p = if watched == 1 {
            single[occ[0] as usize].iter().filter(|(s, _)| registers(s)).map(|(_, p)| p).sum()
        } else {
            let mut p = 0.0;
            for (sh, ph) in &single[occ[0] as usize] {
                for (sv, pv) in &single[occ[1] as usize] {
                    let joint: Vec<u8> = sh.iter().zip(sv).map(|(a, b)| a + b).collect();
                    if registers(&joint) {
                        p += ph * pv;
                    }
                }
            }
            p
        };
        table.insert(occ, p);
    }
    table
}

/// Scalar results of one oracle evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct OraclePoint {
    pub probability: f64,
    pub fidelity: f64,
    pub vacuum_weight: f64,
    /// Beam-3 state in the basis `beam3_basis`.
    pub rho3: DMatrix<C64>,
    /// Occupations `(H, V)` labelling the rows of `rho3`.
    pub beam3_basis: Vec<(u8, u8)>,
}

/// Evaluates a scenario by dense enumeration with the sources at `(g1, g2)`.
pub fn evaluate(config: &SetupConfig, scenario: &Scenario, g1: f64, g2: f64) -> Result<OraclePoint> {
    config.validate()?;
    scenario.validate()?;
    let cutoff = config.cutoff;
    let mut modes: Vec<ModeLabel> = Beam::PRINCIPAL.iter().flat_map(|b| b.modes()).collect();
    modes.extend(Beam::Loss(0).modes());
    modes.extend(Beam::Ancilla(0).modes());
    let basis = Basis::new(modes, cutoff);
    let p = |m: ModeLabel| basis.pos(m);

    // sources
    let pairs = cutoff / 2;
    let (s1, w1) = source_terms(g1, pairs);
    let (s2, w2) = source_terms(g2, pairs);
    let idx1 = [p(Beam::One.h()), p(Beam::One.v()), p(Beam::Four.h()), p(Beam::Four.v())];
    let idx2 = [p(Beam::Two.h()), p(Beam::Two.v()), p(Beam::Three.h()), p(Beam::Three.v())];
    let mut psi = DVector::<C64>::zeros(basis.dim());
    let mut kept = 0.0;
    for (o1, c1) in &s1 {
        for (o2, c2) in &s2 {
            let mut occ = vec![0u8; basis.modes.len()];
            for k in 0..4 {
                occ[idx1[k]] += o1[k];
                occ[idx2[k]] += o2[k];
            }
            if let Some(&i) = basis.index.get(&occ) {
                psi[i] += re(c1 * c2);
                kept += (c1 * c2).powi(2);
            }
        }
    }
    let discarded = 1.0 - (1.0 - w1) * (1.0 - w2) * kept;
    if discarded > TRUNCATION_LIMIT {
        return Err(Error::TruncationWeight { weight: discarded, limit: TRUNCATION_LIMIT });
    }
    psi /= re(kept.sqrt());

    // preparation and central beamsplitter, as one mode unitary
    let n = basis.modes.len();
    let theta = config.input_polarization.rem_euclid(PI);
    let (pol_angle, pol_beam) = match config.preparation {
        Preparation::PolarizerOnBeam1 => (theta, Beam::One),
        Preparation::AnalyzerBeforeP => (theta + PI / 2.0, Beam::Four),
    };
    let (s, c) = pol_angle.sin_cos();
    let pass = [[re(c * c), re(c * s)], [re(c * s), re(s * s)]];
    let block = [[re(s * s), re(-c * s)], [re(-c * s), re(c * c)]];
    let mut polarizer = DMatrix::<C64>::identity(n, n);
    let mut m4 = [[ZERO; 4]; 4];
    for r in 0..2 {
        for col in 0..2 {
            m4[r][col] = pass[r][col];
            m4[r + 2][col + 2] = pass[r][col];
            m4[r][col + 2] = block[r][col];
            m4[r + 2][col] = block[r][col];
        }
    }
    embed_4x4(&mut polarizer, [p(pol_beam.h()), p(pol_beam.v()), p(Beam::Loss(0).h()), p(Beam::Loss(0).v())], m4);
    let phi = config.beamsplitter_phase;
    let t = 0.5f64.sqrt();
    let mut splitter = DMatrix::<C64>::identity(n, n);
    for pol in [0, 1] {
        let a = p(Beam::One.modes()[pol]);
        let b = p(Beam::Two.modes()[pol]);
        embed_2x2(&mut splitter, [a, b], [[re(t), -C64::from_polar(t, -phi)], [C64::from_polar(t, phi), re(t)]]);
    }
    let psi = apply_unitary(&(splitter * polarizer), &basis, &psi);

    // detectors
    let d = &config.detectors;
    let p_spec = match *scenario {
        Scenario::ThreefoldNumberResolvedP { .. } => DetectorSpec { kind: DetectorKind::NumberResolving, efficiency: d.p.efficiency },
        Scenario::ThreefoldCascadeP { stages } => DetectorSpec { kind: DetectorKind::Cascade { stages }, efficiency: d.p.efficiency },
        _ => d.p,
    };
    let p_outcome = match *scenario {
        Scenario::ThreefoldNumberResolvedP { n } => Outcome::Count(n),
        Scenario::ThreefoldCascadeP { .. } => Outcome::Clicks(1),
        Scenario::CouplingRatioSweep { .. } => return Err(Error::IncompatibleScenario(scenario.id())),
        _ => Outcome::Click,
    };
    let herald: Vec<ResponseTable> = vec![
        (vec![p(Beam::Four.h()), p(Beam::Four.v())], detector_table(&p_spec, 2, cutoff, p_outcome)),
        (vec![p(Beam::One.h()), p(Beam::One.v())], detector_table(&d.f1, 2, cutoff, Outcome::Click)),
        (vec![p(Beam::Two.h()), p(Beam::Two.v())], detector_table(&d.f2, 2, cutoff, Outcome::Click)),
    ];
    let weigh = |tables: &[ResponseTable], occ: &[u8]| -> f64 {
        tables.iter().map(|(pos, t)| t[&pos.iter().map(|&q| occ[q]).collect::<Vec<u8>>()]).product()
    };

    let beam3 = [p(Beam::Three.h()), p(Beam::Three.v())];
    let (weights, psi) = match scenario {
        Scenario::Fourfold => {
            let beta = config.bob_analyzer_angle.unwrap_or(theta);
            let (sb, cb) = beta.sin_cos();
            let mut rot = DMatrix::<C64>::identity(n, n);
            embed_2x2(&mut rot, beam3, [[re(cb), re(sb)], [re(-sb), re(cb)]]);
            let mut split = DMatrix::<C64>::identity(n, n);
            let anc_v = p(Beam::Ancilla(0).v());
            let i = C64::new(0.0, 1.0);
            split[(beam3[1], beam3[1])] = ZERO;
            split[(anc_v, anc_v)] = ZERO;
            split[(anc_v, beam3[1])] = i;
            split[(beam3[1], anc_v)] = i;
            let bob = split * rot;
            let d1_click = detector_table(&d.d1, 1, cutoff, Outcome::Click);
            let d1_none = detector_table(&d.d1, 1, cutoff, Outcome::NoClick);
            let d2_click = detector_table(&d.d2, 1, cutoff, Outcome::Click);
            let d2_none = detector_table(&d.d2, 1, cutoff, Outcome::NoClick);
            let analyzed = apply_unitary(&bob, &basis, &psi);
            let weighted = DVector::from_iterator(
                basis.dim(),
                analyzed.iter().enumerate().map(|(k, &a)| {
                    let occ = &basis.states[k];
                    let x = occ[beam3[0]];
                    let y = occ[anc_v];
                    let w = weigh(&herald, occ)
                        * (d1_click[&vec![x]] * d2_none[&vec![y]] + d1_none[&vec![x]] * d2_click[&vec![y]]);
                    a * w.sqrt()
                }),
            );
            let back = apply_unitary(&bob.adjoint(), &basis, &weighted);
            (vec![1.0; basis.dim()], back)
        }
        _ => {
            let w: Vec<f64> = basis.states.iter().map(|occ| weigh(&herald, occ)).collect();
            (w, psi)
        }
    };

    // full density matrix, conditioned, then traced down to beam 3
    let dim = basis.dim();
    let rho = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj() * (weights[i] * weights[j]).sqrt());
    let b3: Vec<(u8, u8)> = enumerate(2, cutoff).into_iter().map(|o| (o[0], o[1])).collect();
    let b3_index: HashMap<(u8, u8), usize> = b3.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let rest = |occ: &[u8]| -> Vec<u8> {
        occ.iter().enumerate().filter(|(k, _)| !beam3.contains(k)).map(|(_, &x)| x).collect()
    };
    let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for (i, occ) in basis.states.iter().enumerate() {
        groups.entry(rest(occ)).or_default().push(i);
    }
    let mut rho3 = DMatrix::<C64>::zeros(b3.len(), b3.len());
    for members in groups.values() {
        for &i in members {
            for &j in members {
                let a = b3_index[&(basis.states[i][beam3[0]], basis.states[i][beam3[1]])];
                let b = b3_index[&(basis.states[j][beam3[0]], basis.states[j][beam3[1]])];
                rho3[(a, b)] += rho[(i, j)];
            }
        }
    }
    let mut probability = rho3.trace().re;
    if probability < crate::detection::ZERO_PROBABILITY {
        return Err(Error::ZeroProbability { pattern: scenario.id(), probability });
    }
    rho3 /= re(probability);
    if let Scenario::ThreefoldQndBob { n: want } = *scenario {
        for (a, &(h, v)) in b3.iter().enumerate() {
            for (b, &(h2, v2)) in b3.iter().enumerate() {
                if (h + v) as usize != want || (h2 + v2) as usize != want {
                    rho3[(a, b)] = ZERO;
                }
            }
        }
        let q = rho3.trace().re;
        if q < crate::detection::ZERO_PROBABILITY {
            return Err(Error::ZeroProbability { pattern: scenario.id(), probability: probability * q });
        }
        probability *= q;
        rho3 /= re(q);
    }
    let (st, ct) = theta.sin_cos();
    let target = DVector::from_iterator(
        b3.len(),
        b3.iter().map(|&o| match o {
            (1, 0) => re(ct),
            (0, 1) => re(st),
            _ => ZERO,
        }),
    );
    let fidelity = (target.adjoint() * &rho3 * &target)[(0, 0)].re;
    let vacuum_weight = rho3[(b3_index[&(0, 0)], b3_index[&(0, 0)])].re;
    Ok(OraclePoint { probability, fidelity, vacuum_weight, rho3, beam3_basis: b3 })
}

/// Leading-order fidelity from oracle evaluations, scaled as in
/// [`crate::experiment::leading_order`].
pub fn leading_order(config: &SetupConfig, scenario: &Scenario, couplings: &[f64]) -> Result<Extrapolated> {
    let values = couplings
        .iter()
        .map(|&g| {
            let (g1, g2) = config.couplings_at(g);
            evaluate(config, scenario, g1, g2).map(|p| p.fidelity)
        })
        .collect::<Result<Vec<f64>>>()?;
    richardson(couplings, &values)
}
