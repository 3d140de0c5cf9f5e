use std::collections::BTreeMap;
use std::fmt;

use super::{FockSpace, ModeLabel, PRUNE_THRESHOLD};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormFlag {
    Normalized,
    Unnormalized,
}

/// A pure state as a sparse amplitude map over basis indices.
///
/// Amplitudes with magnitude below [`PRUNE_THRESHOLD`] are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    amps: BTreeMap<usize, C64>,
    flag: NormFlag,
}

const NORM_TOL: f64 = 1e-12;

impl StateVector {
    pub fn zero(space: &FockSpace) -> Self {
        Self { space: space.clone(), amps: BTreeMap::new(), flag: NormFlag::Unnormalized }
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(0, C64::new(1.0, 0.0));
        Self { space: space.clone(), amps, flag: NormFlag::Normalized }
    }

    /// The unit-norm Fock basis state with the given per-mode photon counts.
    pub fn basis(space: &FockSpace, occupation: &[u8]) -> Result<Self> {
        let idx = space.index_of(occupation)?;
        let mut amps = BTreeMap::new();
        amps.insert(idx, C64::new(1.0, 0.0));
        Ok(Self { space: space.clone(), amps, flag: NormFlag::Normalized })
    }

    /// Collects `(index, amplitude)` pairs, summing duplicates. The result is
    /// flagged unnormalized.
    pub fn from_amplitudes(space: &FockSpace, amps: impl IntoIterator<Item = (usize, C64)>) -> Self {
        let mut map: BTreeMap<usize, C64> = BTreeMap::new();
        for (i, a) in amps {
            assert!(i < space.dim(), "basis index {i} out of range");
            *map.entry(i).or_default() += a;
        }
        map.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Self { space: space.clone(), amps: map, flag: NormFlag::Unnormalized }
    }

    pub fn from_occupations<'a>(
        space: &FockSpace,
        terms: impl IntoIterator<Item = (&'a [u8], C64)>,
    ) -> Result<Self> {
        let mut pairs = Vec::new();
        for (occ, a) in terms {
            pairs.push((space.index_of(occ)?, a));
        }
        Ok(Self::from_amplitudes(space, pairs))
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn flag(&self) -> NormFlag {
        self.flag
    }

    /// Iterates stored `(index, amplitude)` pairs in basis order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.amps.iter().map(|(&i, &a)| (i, a))
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps.get(&index).copied().unwrap_or_default()
    }

    pub fn amplitude_of(&self, occupation: &[u8]) -> Result<C64> {
        Ok(self.amplitude(self.space.index_of(occupation)?))
    }

    /// Number of stored (nonzero) amplitudes.
    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n < PRUNE_THRESHOLD {
            return Err(Error::Unnormalized(n));
        }
        let mut out = self.scale(C64::new(1.0 / n, 0.0));
        out.flag = NormFlag::Normalized;
        Ok(out)
    }

    /// Requires the normalized flag and a unit norm.
    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::Unnormalized(self.norm()))
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        let amps = self
            .amps
            .iter()
            .map(|(&i, &a)| (i, a * c))
            .filter(|(_, a)| a.norm() >= PRUNE_THRESHOLD)
            .collect();
        let flag = if self.flag == NormFlag::Normalized && (c.norm() - 1.0).abs() <= NORM_TOL {
            NormFlag::Normalized
        } else {
            NormFlag::Unnormalized
        };
        Self { space: self.space.clone(), amps, flag }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self::from_amplitudes(&self.space, self.iter().chain(other.iter())))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        let (small, large, conj_small) = if self.amps.len() <= other.amps.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = C64::default();
        for (&i, &a) in &small.amps {
            if let Some(&b) = large.amps.get(&i) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// Tensor product with a state on a disjoint set of modes.
    ///
    /// The result lives on the concatenated mode list with cutoff equal to the
    /// sum of the two cutoffs, so no term is lost.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        for m in other.space.modes() {
            if self.space.contains(*m) {
                return Err(Error::OverlappingModes(*m));
            }
        }
        let mut modes = self.space.modes().to_vec();
        modes.extend_from_slice(other.space.modes());
        let space = FockSpace::new(modes, self.space.cutoff() + other.space.cutoff())?;
        let na = self.space.num_modes();
        let mut occ = vec![0u8; space.num_modes()];
        let mut amps = BTreeMap::new();
        for (&i, &a) in &self.amps {
            self.space.occupation_into(i, &mut occ[..na]);
            for (&j, &b) in &other.amps {
                other.space.occupation_into(j, &mut occ[na..]);
                let v = a * b;
                if v.norm() >= PRUNE_THRESHOLD {
                    amps.insert(space.rank_unchecked(&occ), v);
                }
            }
        }
        let flag = if self.flag == NormFlag::Normalized && other.flag == NormFlag::Normalized {
            NormFlag::Normalized
        } else {
            NormFlag::Unnormalized
        };
        Ok(Self { space, amps, flag })
    }

    /// Re-expresses the state on `target`, which must contain every mode of
    /// this state. Extra target modes are vacuum. Terms above the target
    /// cutoff are dropped; their total weight is returned alongside the
    /// (unrenormalized) result.
    pub fn embed(&self, target: &FockSpace) -> Result<(Self, f64)> {
        let pos = target.positions(self.space.modes())?;
        let mut src = vec![0u8; self.space.num_modes()];
        let mut occ = vec![0u8; target.num_modes()];
        let mut amps = BTreeMap::new();
        let mut dropped = 0.0;
        for (&i, &a) in &self.amps {
            self.space.occupation_into(i, &mut src);
            let total: usize = src.iter().map(|&n| n as usize).sum();
            if total > target.cutoff() {
                dropped += a.norm_sqr();
                continue;
            }
            occ.iter_mut().for_each(|n| *n = 0);
            for (k, &p) in pos.iter().enumerate() {
                occ[p] = src[k];
            }
            amps.insert(target.rank_unchecked(&occ), a);
        }
        let flag = if dropped == 0.0 { self.flag } else { NormFlag::Unnormalized };
        Ok((Self { space: target.clone(), amps, flag }, dropped))
    }

    /// Applies a creation operator on `mode`. Fails if any term would exceed
    /// the cutoff.
    pub fn create(&self, mode: ModeLabel) -> Result<Self> {
        let p = self.space.require_position(mode)?;
        let mut occ = vec![0u8; self.space.num_modes()];
        let mut out = Vec::with_capacity(self.amps.len());
        for (&i, &a) in &self.amps {
            self.space.occupation_into(i, &mut occ);
            let total: usize = occ.iter().map(|&n| n as usize).sum();
            if total + 1 > self.space.cutoff() {
                return Err(Error::CutoffExceeded { total: total + 1, cutoff: self.space.cutoff() });
            }
            let n = occ[p] as f64;
            occ[p] += 1;
            out.push((self.space.rank_unchecked(&occ), a * (n + 1.0).sqrt()));
        }
        Ok(Self::from_amplitudes(&self.space, out))
    }

    pub fn annihilate(&self, mode: ModeLabel) -> Result<Self> {
        let p = self.space.require_position(mode)?;
        let mut occ = vec![0u8; self.space.num_modes()];
        let mut out = Vec::with_capacity(self.amps.len());
        for (&i, &a) in &self.amps {
            self.space.occupation_into(i, &mut occ);
            if occ[p] == 0 {
                continue;
            }
            let n = occ[p] as f64;
            occ[p] -= 1;
            out.push((self.space.rank_unchecked(&occ), a * n.sqrt()));
        }
        Ok(Self::from_amplitudes(&self.space, out))
    }

    /// Multiplies each amplitude by a function of its occupation vector.
    pub fn map_diagonal(&self, mut f: impl FnMut(&[u8]) -> C64) -> Self {
        let mut occ = vec![0u8; self.space.num_modes()];
        let amps = self.amps.iter().filter_map(|(&i, &a)| {
            self.space.occupation_into(i, &mut occ);
            let v = a * f(&occ);
            (v.norm() >= PRUNE_THRESHOLD).then_some((i, v))
        });
        Self { space: self.space.clone(), amps: amps.collect(), flag: NormFlag::Unnormalized }
    }

    /// Rebuilds the amplitude map after a change of basis index; used by
    /// operators that permute or expand basis states.
    pub(crate) fn from_parts(space: FockSpace, amps: BTreeMap<usize, C64>, flag: NormFlag) -> Self {
        let mut amps = amps;
        amps.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Self { space, amps, flag }
    }

    pub(crate) fn mark_normalized_if_unit(mut self) -> Self {
        if self.is_normalized() {
            self.flag = NormFlag::Normalized;
        }
        self
    }
}

/// Plain-text listing: one line per stored amplitude,
/// `|mode=count,...> re im`, listing only occupied modes (`|vac>` for the
/// vacuum), in basis order.
impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {:?} {:?}", self.space, self.flag)?;
        for (&i, a) in &self.amps {
            writeln!(f, "{} {:+.15e} {:+.15e}", ket_label(&self.space, i), a.re, a.im)?;
        }
        Ok(())
    }
}

pub(crate) fn ket_label(space: &FockSpace, index: usize) -> String {
    let occ = space.occupation(index);
    let parts: Vec<String> = space
        .modes()
        .iter()
        .zip(&occ)
        .filter(|(_, &n)| n > 0)
        .map(|(m, n)| format!("{m}={n}"))
        .collect();
    if parts.is_empty() {
        "|vac>".into()
    } else {
        format!("|{}>", parts.join(","))
    }
}
