use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{DensityOperator, FockSpace, ModeLabel, NormFlag, StateVector, PRUNE_THRESHOLD};
use crate::error::{Error, Result};
use crate::C64;

/// A general linear operator on a truncated Fock space, stored by columns:
/// column `j` lists the nonzero entries `(i, O[i, j])`, i.e. the image of
/// basis state `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    space: FockSpace,
    cols: Vec<Vec<(usize, C64)>>,
}

impl FockOperator {
    pub fn identity(space: &FockSpace) -> Self {
        let cols = (0..space.dim()).map(|j| vec![(j, C64::new(1.0, 0.0))]).collect();
        Self { space: space.clone(), cols }
    }

    /// Builds the operator column by column from the image of each basis
    /// state.
    pub fn from_basis_images(space: &FockSpace, mut image: impl FnMut(usize) -> Result<StateVector>) -> Result<Self> {
        let mut cols = Vec::with_capacity(space.dim());
        for j in 0..space.dim() {
            let v = image(j)?;
            if v.space() != space {
                return Err(Error::SpaceMismatch);
            }
            cols.push(v.iter().collect());
        }
        Ok(Self { space: space.clone(), cols })
    }

    /// Diagonal operator whose entry on each basis state is a function of
    /// its occupation vector.
    pub fn diagonal(space: &FockSpace, mut f: impl FnMut(&[u8]) -> C64) -> Self {
        let cols = (0..space.dim())
            .map(|j| {
                let v = f(&space.occupation(j));
                if v.norm() >= PRUNE_THRESHOLD {
                    vec![(j, v)]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Self { space: space.clone(), cols }
    }

    /// Total photon number on the given modes.
    pub fn number(space: &FockSpace, modes: &[ModeLabel]) -> Result<Self> {
        let pos = space.positions(modes)?;
        Ok(Self::diagonal(space, |occ| C64::new(pos.iter().map(|&p| occ[p] as f64).sum(), 0.0)))
    }

    /// `|psi><psi|`.
    pub fn projector(psi: &StateVector) -> Self {
        let space = psi.space().clone();
        let mut cols = vec![Vec::new(); space.dim()];
        for (j, b) in psi.iter() {
            cols[j] = psi.iter().map(|(i, a)| (i, a * b.conj())).collect();
        }
        Self { space, cols }
    }

    pub fn from_dense(space: &FockSpace, m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(Error::LengthMismatch { expected: space.dim(), got: m.nrows() });
        }
        let cols = (0..m.ncols())
            .map(|j| (0..m.nrows()).filter(|&i| m[(i, j)].norm() >= PRUNE_THRESHOLD).map(|i| (i, m[(i, j)])).collect())
            .collect();
        Ok(Self { space: space.clone(), cols })
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.space.dim();
        let mut m = DMatrix::zeros(d, d);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.cols[j].iter().find(|(r, _)| *r == i).map(|&(_, v)| v).unwrap_or_default()
    }

    pub fn column(&self, j: usize) -> &[(usize, C64)] {
        &self.cols[j]
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        for (j, b) in psi.iter() {
            for &(i, v) in &self.cols[j] {
                *acc.entry(i).or_default() += v * b;
            }
        }
        let out = StateVector::from_parts(self.space.clone(), acc, NormFlag::Unnormalized);
        Ok(if psi.flag() == NormFlag::Normalized { out.mark_normalized_if_unit() } else { out })
    }

    /// `O rho O^dag`. The trace flag of the result reflects its actual trace.
    pub fn apply_density(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for ((i, j), v) in rho.iter() {
            for &(k, a) in &self.cols[i] {
                for &(l, b) in &self.cols[j] {
                    *acc.entry((k, l)).or_default() += a * v * b.conj();
                }
            }
        }
        Ok(DensityOperator::from_map(&self.space, acc))
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.space != rhs.space {
            return Err(Error::SpaceMismatch);
        }
        let cols = rhs
            .cols
            .iter()
            .map(|col| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for &(k, b) in col {
                    for &(i, a) in &self.cols[k] {
                        *acc.entry(i).or_default() += a * b;
                    }
                }
                acc.into_iter().filter(|(_, v)| v.norm() >= PRUNE_THRESHOLD).collect()
            })
            .collect();
        Ok(Self { space: self.space.clone(), cols })
    }

    pub fn adjoint(&self) -> Self {
        let mut cols = vec![Vec::new(); self.space.dim()];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                cols[i].push((j, v.conj()));
            }
        }
        for c in &mut cols {
            c.sort_by_key(|&(i, _)| i);
        }
        Self { space: self.space.clone(), cols }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.combine(rhs, 1.0)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.combine(rhs, -1.0)
    }

    fn combine(&self, rhs: &Self, sign: f64) -> Result<Self> {
        if self.space != rhs.space {
            return Err(Error::SpaceMismatch);
        }
        let cols = self
            .cols
            .iter()
            .zip(&rhs.cols)
            .map(|(a, b)| {
                let mut acc: BTreeMap<usize, C64> = a.iter().copied().collect();
                for &(i, v) in b {
                    *acc.entry(i).or_default() += v * sign;
                }
                acc.into_iter().collect()
            })
            .collect();
        Ok(Self { space: self.space.clone(), cols })
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.cols.iter().flatten().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        Ok(self.sub(rhs)?.max_abs())
    }

    /// `max |O^dag O - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.adjoint().mul(self).expect("same space");
        g.max_abs_diff(&Self::identity(&self.space)).expect("same space")
    }

    /// `max |[A, B]|` entrywise.
    pub fn commutator_norm(&self, rhs: &Self) -> Result<f64> {
        self.mul(rhs)?.max_abs_diff(&rhs.mul(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Beam;

    #[test]
    fn identity_and_vacuum_projector() {
        let s = FockSpace::new(vec![Beam::One.h()], 2).unwrap();
        let vac = StateVector::vacuum(&s);
        let one = StateVector::basis(&s, &[1]).unwrap();
        let plus = vac.add(&one).unwrap().normalize().unwrap();

        assert_eq!(FockOperator::identity(&s).apply(&plus).unwrap(), plus);

        let p0 = FockOperator::projector(&vac);
        let out = p0.apply(&vac).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-15);

        let out = p0.apply(&plus).unwrap();
        assert!((out.norm_sqr() - 0.5).abs() < 1e-15);
        assert_eq!(out.flag(), NormFlag::Unnormalized);

        let rho = DensityOperator::from_pure(&plus);
        let cond = p0.apply_density(&rho).unwrap();
        assert!((cond.trace() - 0.5).abs() < 1e-15);
        assert_eq!(cond.flag(), crate::fock::TraceFlag::Subnormalized(cond.trace()));
        let (n, w) = cond.normalize().unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert!((n.entry(0, 0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let a = FockSpace::new(vec![Beam::One.h()], 2).unwrap();
        let b = FockSpace::new(vec![Beam::Two.h()], 2).unwrap();
        let op = FockOperator::identity(&a);
        assert_eq!(op.apply(&StateVector::vacuum(&b)), Err(Error::SpaceMismatch));
    }
}
