//! Passive linear-optical elements.
//!
//! Every element is a unitary on mode space, lifted to the truncated Fock
//! space by second quantization. Mode-space matrices act on single-photon
//! amplitude vectors: column `k` of the matrix is the image of a photon
//! entering mode `k`, so a creation operator maps as
//! `a_k^dag -> sum_j U[j, k] a_j^dag`. With this orientation the lift is a
//! homomorphism, `lift(U V) = lift(U) lift(V)`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Beam, FockOperator, FockSpace, ModeLabel, NormFlag, StateVector};
use crate::C64;

const UNITARY_TOL: f64 = 1e-12;

/// A unitary on an ordered list of modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTransform {
    modes: Vec<ModeLabel>,
    matrix: DMatrix<C64>,
}

impl ModeTransform {
    pub fn new(modes: Vec<ModeLabel>, matrix: DMatrix<C64>) -> Result<Self> {
        check_distinct(&modes)?;
        if matrix.nrows() != modes.len() || matrix.ncols() != modes.len() {
            return Err(Error::LengthMismatch { expected: modes.len(), got: matrix.nrows() });
        }
        let t = Self { modes, matrix };
        let defect = t.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::InvalidInput(format!("mode transform is not unitary (defect {defect:e})")));
        }
        Ok(t)
    }

    pub fn identity(modes: Vec<ModeLabel>) -> Result<Self> {
        let n = modes.len();
        Self::new(modes, DMatrix::identity(n, n))
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.modes.len();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n);
        g.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Self {
        Self { modes: self.modes.clone(), matrix: self.matrix.adjoint() }
    }

    /// Extends the transform to a larger mode list, acting as identity on the
    /// added modes.
    pub fn embed(&self, modes: &[ModeLabel]) -> Result<Self> {
        check_distinct(modes)?;
        let pos: Vec<usize> = self
            .modes
            .iter()
            .map(|m| modes.iter().position(|x| x == m).ok_or(Error::ModeNotInSpace(*m)))
            .collect::<Result<_>>()?;
        let mut matrix = DMatrix::identity(modes.len(), modes.len());
        for (a, &pa) in pos.iter().enumerate() {
            for (b, &pb) in pos.iter().enumerate() {
                matrix[(pa, pb)] = self.matrix[(a, b)];
            }
        }
        Ok(Self { modes: modes.to_vec(), matrix })
    }

    /// `self * rhs`: apply `rhs` first. Both are embedded on the union of
    /// their modes (this transform's modes first).
    pub fn then_after(&self, rhs: &Self) -> Result<Self> {
        let mut modes = self.modes.clone();
        for m in &rhs.modes {
            if !modes.contains(m) {
                modes.push(*m);
            }
        }
        let a = self.embed(&modes)?;
        let b = rhs.embed(&modes)?;
        Ok(Self { modes, matrix: a.matrix * b.matrix })
    }

    /// Applies the lifted unitary to a state without forming the Fock-space
    /// matrix.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let space = psi.space();
        let pos = space.positions(&self.modes)?;
        let mut cache: HashMap<Vec<u8>, Vec<(Vec<u8>, C64)>> = HashMap::new();
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        let mut occ = vec![0u8; space.num_modes()];
        for (i, a) in psi.iter() {
            occ.copy_from_slice(&space.occupation(i));
            let sub: Vec<u8> = pos.iter().map(|&p| occ[p]).collect();
            if sub.iter().all(|&n| n == 0) {
                *acc.entry(i).or_default() += a;
                continue;
            }
            let image = cache.entry(sub).or_insert_with_key(|sub| expand_monomial(&self.matrix, sub));
            for (out, c) in image.iter() {
                for (k, &p) in pos.iter().enumerate() {
                    occ[p] = out[k];
                }
                *acc.entry(space.index_of(&occ)?).or_default() += a * c;
            }
        }
        let flag = psi.flag();
        let out = StateVector::from_parts(space.clone(), acc, NormFlag::Unnormalized);
        Ok(if flag == NormFlag::Normalized { out.mark_normalized_if_unit() } else { out })
    }

    /// The Fock-space operator of this transform on `space`.
    pub fn lift(&self, space: &FockSpace) -> Result<FockOperator> {
        space.positions(&self.modes)?;
        FockOperator::from_basis_images(space, |j| self.apply(&StateVector::basis(space, &space.occupation(j))?))
    }
}

/// Image of `prod_k (a_k^dag)^{n_k} / sqrt(n_k!) |0>` under the transform, as
/// normalized Fock amplitudes over the transform's modes.
fn expand_monomial(u: &DMatrix<C64>, sub: &[u8]) -> Vec<(Vec<u8>, C64)> {
    let d = sub.len();
    let mut poly: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
    poly.insert(vec![0; d], C64::new(1.0, 0.0));
    for (k, &n) in sub.iter().enumerate() {
        for _ in 0..n {
            let mut next: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
            for (mono, c) in &poly {
                for j in 0..d {
                    let ujk = u[(j, k)];
                    if ujk == C64::default() {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[j] += 1;
                    *next.entry(m).or_default() += c * ujk;
                }
            }
            poly = next;
        }
    }
    let in_norm: f64 = sub.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
    poly.into_iter()
        .map(|(m, c)| {
            let out_norm: f64 = m.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
            (m, c * (out_norm / in_norm))
        })
        .filter(|(_, c)| c.norm() > 0.0)
        .collect()
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

fn check_distinct(modes: &[ModeLabel]) -> Result<()> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(Error::DuplicateMode(*m));
        }
    }
    Ok(())
}

/// Kinds of passive element. Angles are in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementKind {
    /// Acts on a mode pair `[a, b]`, or polarization-independently on two
    /// beams given as `[aH, aV, bH, bV]`.
    Beamsplitter { transmissivity: f64, phase: f64 },
    /// `[aH, aV, bH, bV]`: H is transmitted, V is reflected into the other
    /// beam with a factor `i`.
    Pbs,
    /// `[H, V]` of one beam. Retardance `pi` is a half-wave plate, `pi/2` a
    /// quarter-wave plate.
    Waveplate { angle: f64, retardance: f64 },
    /// Any number of modes, each picking up `exp(i angle)`.
    PhaseShift { angle: f64 },
    /// `[H, V, lossH, lossV]`: passes linear polarization at `angle` and
    /// routes the orthogonal component into the loss modes.
    Polarizer { angle: f64 },
    /// `[H, V]`: rotates linear polarization by `angle`.
    Rotator { angle: f64 },
}

/// An element bound to the modes it acts on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSpec {
    #[serde(flatten)]
    pub kind: ElementKind,
    pub modes: Vec<ModeLabel>,
}

/// General beamsplitter on a mode pair. The single-photon map is
/// `[[sqrt T, -e^{-i phase} sqrt(1-T)], [e^{i phase} sqrt(1-T), sqrt T]]`
/// (columns are input modes), so a photon in `a` leaves as
/// `sqrt T |a> + e^{i phase} sqrt(1-T) |b>`.
pub fn beamsplitter(transmissivity: f64, phase: f64, modes: [ModeLabel; 2]) -> Result<ElementSpec> {
    let e = ElementSpec { kind: ElementKind::Beamsplitter { transmissivity, phase }, modes: modes.to_vec() };
    e.transform()?;
    Ok(e)
}

/// Polarization-independent beamsplitter between two beams.
pub fn beamsplitter_beams(transmissivity: f64, phase: f64, a: Beam, b: Beam) -> Result<ElementSpec> {
    let e = ElementSpec {
        kind: ElementKind::Beamsplitter { transmissivity, phase },
        modes: vec![a.h(), a.v(), b.h(), b.v()],
    };
    e.transform()?;
    Ok(e)
}

pub fn pbs(modes: [ModeLabel; 4]) -> Result<ElementSpec> {
    let e = ElementSpec { kind: ElementKind::Pbs, modes: modes.to_vec() };
    e.transform()?;
    Ok(e)
}

pub fn waveplate(angle: f64, retardance: f64, beam: Beam) -> Result<ElementSpec> {
    let e = ElementSpec { kind: ElementKind::Waveplate { angle, retardance }, modes: beam.modes().to_vec() };
    e.transform()?;
    Ok(e)
}

pub fn half_wave_plate(angle: f64, beam: Beam) -> Result<ElementSpec> {
    waveplate(angle, std::f64::consts::PI, beam)
}

pub fn quarter_wave_plate(angle: f64, beam: Beam) -> Result<ElementSpec> {
    waveplate(angle, std::f64::consts::FRAC_PI_2, beam)
}

pub fn phase_shift(angle: f64, modes: &[ModeLabel]) -> Result<ElementSpec> {
    let e = ElementSpec { kind: ElementKind::PhaseShift { angle }, modes: modes.to_vec() };
    e.transform()?;
    Ok(e)
}

pub fn rotator(angle: f64, beam: Beam) -> Result<ElementSpec> {
    let e = ElementSpec { kind: ElementKind::Rotator { angle }, modes: beam.modes().to_vec() };
    e.transform()?;
    Ok(e)
}

/// Linear polarizer on `beam`, dumping the blocked component into `loss`.
pub fn polarizer(angle: f64, beam: [ModeLabel; 2], loss: [ModeLabel; 2]) -> Result<ElementSpec> {
    let e = ElementSpec { kind: ElementKind::Polarizer { angle }, modes: vec![beam[0], beam[1], loss[0], loss[1]] };
    e.transform()?;
    Ok(e)
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn rotation(angle: f64) -> DMatrix<C64> {
    let (s, co) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

fn bs_block(t: f64, phase: f64) -> DMatrix<C64> {
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
    DMatrix::from_row_slice(2, 2, &[c(st), -C64::from_polar(sr, -phase), C64::from_polar(sr, phase), c(st)])
}

impl ElementSpec {
    /// Validates the element and returns its mode-space unitary.
    pub fn transform(&self) -> Result<ModeTransform> {
        let n = self.modes.len();
        let need = |k: usize, what: &str| -> Result<()> {
            if n == k {
                Ok(())
            } else {
                Err(Error::MalformedModes(format!("{what} needs {k} modes, got {n}")))
            }
        };
        let finite = |name: &'static str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value: v, reason: "must be finite" })
            }
        };
        let matrix = match self.kind {
            ElementKind::Beamsplitter { transmissivity, phase } => {
                if !(0.0..=1.0).contains(&transmissivity) {
                    return Err(Error::InvalidParameter {
                        name: "transmissivity",
                        value: transmissivity,
                        reason: "must lie in [0, 1]",
                    });
                }
                finite("phase", phase)?;
                let b = bs_block(transmissivity, phase);
                match n {
                    2 => b,
                    4 => {
                        // [aH, aV, bH, bV]: the same 2x2 on (aH, bH) and (aV, bV)
                        let mut m = DMatrix::zeros(4, 4);
                        for (x, y) in [(0usize, 2usize), (1, 3)] {
                            m[(x, x)] = b[(0, 0)];
                            m[(x, y)] = b[(0, 1)];
                            m[(y, x)] = b[(1, 0)];
                            m[(y, y)] = b[(1, 1)];
                        }
                        m
                    }
                    _ => return Err(Error::MalformedModes(format!("beamsplitter needs 2 or 4 modes, got {n}"))),
                }
            }
            ElementKind::Pbs => {
                need(4, "pbs")?;
                self.require_two_beams()?;
                let i = C64::new(0.0, 1.0);
                let mut m = DMatrix::zeros(4, 4);
                m[(0, 0)] = c(1.0);
                m[(2, 2)] = c(1.0);
                m[(3, 1)] = i;
                m[(1, 3)] = i;
                m
            }
            ElementKind::Waveplate { angle, retardance } => {
                need(2, "waveplate")?;
                finite("angle", angle)?;
                finite("retardance", retardance)?;
                let mut d = DMatrix::identity(2, 2);
                d[(1, 1)] = C64::from_polar(1.0, retardance);
                rotation(angle) * d * rotation(-angle)
            }
            ElementKind::PhaseShift { angle } => {
                if n == 0 {
                    return Err(Error::MalformedModes("phase shift needs at least one mode".into()));
                }
                finite("angle", angle)?;
                DMatrix::identity(n, n) * C64::from_polar(1.0, angle)
            }
            ElementKind::Rotator { angle } => {
                need(2, "rotator")?;
                finite("angle", angle)?;
                rotation(angle)
            }
            ElementKind::Polarizer { angle } => {
                need(4, "polarizer")?;
                finite("angle", angle)?;
                let (s, co) = angle.sin_cos();
                let p = DMatrix::from_row_slice(2, 2, &[c(co * co), c(co * s), c(co * s), c(s * s)]);
                let b = DMatrix::identity(2, 2) - &p;
                let mut m = DMatrix::zeros(4, 4);
                m.view_mut((0, 0), (2, 2)).copy_from(&p);
                m.view_mut((2, 2), (2, 2)).copy_from(&p);
                m.view_mut((0, 2), (2, 2)).copy_from(&b);
                m.view_mut((2, 0), (2, 2)).copy_from(&b);
                m
            }
        };
        ModeTransform::new(self.modes.clone(), matrix)
    }

    fn require_two_beams(&self) -> Result<()> {
        let m = &self.modes;
        use crate::fock::Polarization::{H, V};
        let ok = m[0].pol == H
            && m[1].pol == V
            && m[2].pol == H
            && m[3].pol == V
            && m[0].beam == m[1].beam
            && m[2].beam == m[3].beam
            && m[0].beam != m[2].beam;
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedModes("expected [aH, aV, bH, bV] for two distinct beams".into()))
        }
    }

    /// Loss modes owned by this element (only polarizers own any).
    pub fn loss_modes(&self) -> &[ModeLabel] {
        match self.kind {
            ElementKind::Polarizer { .. } => &self.modes[2..],
            _ => &[],
        }
    }
}

/// An ordered list of elements; the first element acts first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub elements: Vec<ElementSpec>,
}

impl Circuit {
    pub fn new(elements: Vec<ElementSpec>) -> Self {
        Self { elements }
    }

    /// Checks every element against `space` and that no polarizer's loss
    /// modes are touched by any other element.
    pub fn validate(&self, space: &FockSpace) -> Result<()> {
        for e in &self.elements {
            e.transform()?;
            space.positions(&e.modes)?;
        }
        for (i, e) in self.elements.iter().enumerate() {
            for &loss in e.loss_modes() {
                for (j, other) in self.elements.iter().enumerate() {
                    if i != j && other.modes.contains(&loss) {
                        return Err(Error::LossModeCollision(loss));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn transforms(&self) -> Result<Vec<ModeTransform>> {
        self.elements.iter().map(ElementSpec::transform).collect()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.validate(psi.space())?;
        let mut out = psi.clone();
        for t in self.transforms()? {
            out = t.apply(&out)?;
        }
        Ok(out)
    }

    /// Product of all elements as one transform on `modes`.
    pub fn mode_transform(&self, modes: &[ModeLabel]) -> Result<ModeTransform> {
        let mut acc = ModeTransform::identity(modes.to_vec())?;
        for t in self.transforms()? {
            acc = t.embed(modes)?.then_after(&acc)?;
        }
        Ok(acc)
    }
}

/// Fock-space unitary of a whole circuit: the ordered product of the lifted
/// elements.
pub fn compose(circuit: &Circuit, space: &FockSpace) -> Result<FockOperator> {
    circuit.validate(space)?;
    let mut acc = FockOperator::identity(space);
    for t in circuit.transforms()? {
        acc = t.lift(space)?.mul(&acc)?;
    }
    Ok(acc)
}
