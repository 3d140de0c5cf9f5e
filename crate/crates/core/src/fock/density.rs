use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use super::state::ket_label;
use super::{FockSpace, ModeLabel, StateVector, PRUNE_THRESHOLD};
use crate::error::{Error, Result};
use crate::C64;

const TRACE_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceFlag {
    Normalized,
    /// Carries the trace of the operator, the weight of whatever event
    /// produced it.
    Subnormalized(f64),
}

/// A density operator as a sparse map `(row, col) -> entry` in basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    space: FockSpace,
    entries: BTreeMap<(usize, usize), C64>,
    flag: TraceFlag,
}

impl DensityOperator {
    pub fn from_pure(psi: &StateVector) -> Self {
        let mut entries = BTreeMap::new();
        for (i, a) in psi.iter() {
            for (j, b) in psi.iter() {
                let v = a * b.conj();
                if v.norm() >= PRUNE_THRESHOLD {
                    entries.insert((i, j), v);
                }
            }
        }
        Self::with_flag_from_trace(psi.space().clone(), entries)
    }

    pub fn from_entries(space: &FockSpace, entries: impl IntoIterator<Item = ((usize, usize), C64)>) -> Self {
        let mut map: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (k, v) in entries {
            *map.entry(k).or_default() += v;
        }
        Self::from_map(space, map)
    }

    pub(crate) fn from_map(space: &FockSpace, mut entries: BTreeMap<(usize, usize), C64>) -> Self {
        entries.retain(|_, v| v.norm() >= PRUNE_THRESHOLD);
        Self::with_flag_from_trace(space.clone(), entries)
    }

    fn with_flag_from_trace(space: FockSpace, entries: BTreeMap<(usize, usize), C64>) -> Self {
        let mut rho = Self { space, entries, flag: TraceFlag::Normalized };
        let t = rho.trace();
        if (t - 1.0).abs() > TRACE_TOL {
            rho.flag = TraceFlag::Subnormalized(t);
        }
        rho
    }

    /// Dense matrix on the full basis. Only sensible for small spaces.
    pub fn from_dense(space: &FockSpace, m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(Error::LengthMismatch { expected: space.dim(), got: m.nrows() });
        }
        let entries = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| ((i, j), m[(i, j)])));
        Ok(Self::from_entries(space, entries))
    }

    /// Convex (or general real-weighted) combination of operators on one space.
    pub fn mixture(terms: &[(f64, &DensityOperator)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::InvalidInput("mixture of no operators".into()));
        };
        let space = first.space.clone();
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (w, rho) in terms {
            if rho.space != space {
                return Err(Error::SpaceMismatch);
            }
            for (k, v) in rho.iter() {
                *acc.entry(k).or_default() += v * *w;
            }
        }
        Ok(Self::from_map(&space, acc))
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn flag(&self) -> TraceFlag {
        self.flag
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), C64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.entries.get(&(i, j)).copied().unwrap_or_default()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn trace(&self) -> f64 {
        self.entries.iter().filter(|((i, j), _)| i == j).map(|(_, v)| v.re).sum()
    }

    /// Rescales to unit trace, returning the operator and its former trace.
    pub fn normalize(&self) -> Result<(Self, f64)> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::Unnormalized(t));
        }
        let entries = self.entries.iter().map(|(&k, &v)| (k, v / t)).collect();
        Ok((Self { space: self.space.clone(), entries, flag: TraceFlag::Normalized }, t))
    }

    pub fn scale(&self, w: f64) -> Self {
        let entries = self.entries.iter().map(|(&k, &v)| (k, v * w)).collect();
        Self::from_map(&self.space, entries)
    }

    pub fn require_normalized(&self) -> Result<()> {
        let t = self.trace();
        if (t - 1.0).abs() > 1e-10 {
            return Err(Error::Unnormalized(t));
        }
        Ok(())
    }

    /// `max |M - M^dag|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|(&(i, j), &v)| (v - self.entry(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL
    }

    /// Replaces the operator with `(M + M^dag)/2`. Fails when the correction
    /// exceeds the drift bound, which signals a logic error rather than
    /// rounding.
    pub fn symmetrize(&self) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect > DRIFT_TOL {
            return Err(Error::HermiticityDrift(defect));
        }
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (&(i, j), &v) in &self.entries {
            *acc.entry((i, j)).or_default() += v * 0.5;
            *acc.entry((j, i)).or_default() += v.conj() * 0.5;
        }
        let mut out = Self::from_map(&self.space, acc);
        if matches!(self.flag, TraceFlag::Normalized) && (out.trace() - 1.0).abs() <= TRACE_TOL {
            out.flag = TraceFlag::Normalized;
        }
        Ok(out)
    }

    /// Indices that carry at least one stored entry, sorted.
    pub fn support(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.entries.keys().flat_map(|&(i, j)| [i, j]).collect();
        set.into_iter().collect()
    }

    /// Dense matrix restricted to the support, with the support indices.
    pub fn to_dense_support(&self) -> (Vec<usize>, DMatrix<C64>) {
        let support = self.support();
        let pos: HashMap<usize, usize> = support.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut m = DMatrix::zeros(support.len(), support.len());
        for (&(i, j), &v) in &self.entries {
            m[(pos[&i], pos[&j])] = v;
        }
        (support, m)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.space.dim();
        let mut m = DMatrix::zeros(d, d);
        for (&(i, j), &v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    /// Eigenpairs on the support of the operator, eigenvalues sorted in
    /// descending order. Basis directions outside the support carry exactly
    /// zero eigenvalue and are not listed.
    pub fn eigendecompose(&self) -> Result<Vec<(f64, StateVector)>> {
        let defect = self.hermiticity_defect();
        if defect > DRIFT_TOL {
            return Err(Error::NonHermitian(defect));
        }
        let (support, m) = self.to_dense_support();
        if support.is_empty() {
            return Ok(Vec::new());
        }
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        Ok(order
            .into_iter()
            .map(|k| {
                let col = eig.eigenvectors.column(k);
                let v = StateVector::from_amplitudes(&self.space, support.iter().zip(col.iter()).map(|(&i, &a)| (i, a)));
                (eig.eigenvalues[k], v.mark_normalized_if_unit())
            })
            .collect())
    }

    /// Smallest eigenvalue, counting the implicit zeros outside the support.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = self.eigendecompose()?;
        let min = eig.last().map(|(l, _)| *l).unwrap_or(0.0);
        Ok(if eig.len() < self.space.dim() { min.min(0.0) } else { min })
    }

    pub fn is_positive(&self) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -POSITIVITY_TOL)
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|(&(i, j), &v)| (v * self.entry(j, i)).re).sum()
    }

    /// `<phi|rho|phi>` for a normalized pure state and a unit-trace operator.
    pub fn fidelity_pure(&self, phi: &StateVector) -> Result<f64> {
        if phi.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        phi.require_normalized()?;
        self.require_normalized()?;
        let f = self.expectation_pure(phi);
        if f.im.abs() > 1e-10 {
            return Err(Error::NonHermitian(f.im.abs()));
        }
        Ok(f.re.clamp(0.0, 1.0))
    }

    /// `<phi|rho|phi>` without normalization checks.
    pub fn expectation_pure(&self, phi: &StateVector) -> C64 {
        let mut acc = C64::default();
        for ((i, j), v) in self.iter() {
            let a = phi.amplitude(i);
            if a == C64::default() {
                continue;
            }
            acc += a.conj() * v * phi.amplitude(j);
        }
        acc
    }

    /// Trace weight per total photon number, index = photon number.
    pub fn photon_number_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.space.cutoff() + 1];
        for (&(i, j), &v) in &self.entries {
            if i == j {
                out[self.space.photon_number(i)] += v.re;
            }
        }
        out
    }

    /// Re-expresses the operator on `target`, which must contain every mode
    /// of this space and admit its cutoff. Extra modes are vacuum.
    pub fn embed(&self, target: &FockSpace) -> Result<Self> {
        if target.cutoff() < self.space.cutoff() {
            return Err(Error::CutoffExceeded { total: self.space.cutoff(), cutoff: target.cutoff() });
        }
        let pos = target.positions(self.space.modes())?;
        let mut src = vec![0u8; self.space.num_modes()];
        let mut occ = vec![0u8; target.num_modes()];
        let mut map = |i: usize| {
            self.space.occupation_into(i, &mut src);
            occ.iter_mut().for_each(|n| *n = 0);
            for (k, &p) in pos.iter().enumerate() {
                occ[p] = src[k];
            }
            target.rank_unchecked(&occ)
        };
        let entries: BTreeMap<(usize, usize), C64> = self.entries.iter().map(|(&(i, j), &v)| ((map(i), map(j)), v)).collect();
        Ok(Self { space: target.clone(), entries, flag: self.flag })
    }

    /// Traces out every mode not in `keep`. The result lives on the kept
    /// modes (in this operator's order) with the same cutoff.
    pub fn partial_trace(&self, keep: &[ModeLabel]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidInput("partial trace must keep at least one mode".into()));
        }
        let target = self.space.subspace(keep)?;
        let kept = self.space.positions(target.modes())?;
        let traced: Vec<usize> = (0..self.space.num_modes()).filter(|p| !kept.contains(p)).collect();
        let mut oi = vec![0u8; self.space.num_modes()];
        let mut oj = vec![0u8; self.space.num_modes()];
        let mut ki = vec![0u8; kept.len()];
        let mut kj = vec![0u8; kept.len()];
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (&(i, j), &v) in &self.entries {
            self.space.occupation_into(i, &mut oi);
            self.space.occupation_into(j, &mut oj);
            if traced.iter().any(|&p| oi[p] != oj[p]) {
                continue;
            }
            for (k, &p) in kept.iter().enumerate() {
                ki[k] = oi[p];
                kj[k] = oj[p];
            }
            *acc.entry((target.rank_unchecked(&ki), target.rank_unchecked(&kj))).or_default() += v;
        }
        let mut out = Self::from_map(&target, acc);
        if matches!(self.flag, TraceFlag::Normalized) && (out.trace() - 1.0).abs() <= TRACE_TOL {
            out.flag = TraceFlag::Normalized;
        }
        Ok(out)
    }

    /// Reduced operator of a pure state on `keep`, without forming the
    /// global density operator.
    pub fn reduced_from_pure(psi: &StateVector, keep: &[ModeLabel]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidInput("partial trace must keep at least one mode".into()));
        }
        let space = psi.space();
        let target = space.subspace(keep)?;
        let kept = space.positions(target.modes())?;
        let traced: Vec<usize> = (0..space.num_modes()).filter(|p| !kept.contains(p)).collect();
        let mut groups: BTreeMap<Vec<u8>, Vec<(usize, C64)>> = BTreeMap::new();
        let mut occ = vec![0u8; space.num_modes()];
        let mut k = vec![0u8; kept.len()];
        for (i, a) in psi.iter() {
            space.occupation_into(i, &mut occ);
            let rest: Vec<u8> = traced.iter().map(|&p| occ[p]).collect();
            for (n, &p) in kept.iter().enumerate() {
                k[n] = occ[p];
            }
            groups.entry(rest).or_default().push((target.rank_unchecked(&k), a));
        }
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for terms in groups.values() {
            for &(i, a) in terms {
                for &(j, b) in terms {
                    *acc.entry((i, j)).or_default() += a * b.conj();
                }
            }
        }
        Ok(Self::from_map(&target, acc))
    }
}

/// Plain-text listing: one line per stored entry, `<bra| |ket> re im`.
impl fmt::Display for DensityOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {:?} {:?}", self.space, self.flag)?;
        for (&(i, j), v) in &self.entries {
            writeln!(
                f,
                "{} {} {:+.15e} {:+.15e}",
                ket_label(&self.space, i),
                ket_label(&self.space, j),
                v.re,
                v.im
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Beam;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn singlet() -> StateVector {
        // (|H>_1|V>_2 - |V>_1|H>_2)/sqrt2 on modes 1H,1V,2H,2V
        let s = FockSpace::new(vec![Beam::One.h(), Beam::One.v(), Beam::Two.h(), Beam::Two.v()], 2).unwrap();
        StateVector::from_occupations(
            &s,
            [(&[1u8, 0, 0, 1][..], C64::new(FRAC_1_SQRT_2, 0.0)), (&[0u8, 1, 1, 0][..], C64::new(-FRAC_1_SQRT_2, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn singlet_reduces_to_maximally_mixed_polarization() {
        let psi = singlet();
        let rho = DensityOperator::from_pure(&psi);
        let red = rho.partial_trace(&Beam::One.modes()).unwrap();
        // brute-force 4x4 reduction: rho_1[a,b] = sum_c psi[a,c] psi*[b,c]
        let amp = |a: usize, c: usize| -> f64 {
            match (a, c) {
                (0, 1) => FRAC_1_SQRT_2,
                (1, 0) => -FRAC_1_SQRT_2,
                _ => 0.0,
            }
        };
        let s1 = red.space().clone();
        let h = s1.index_of(&[1, 0]).unwrap();
        let v = s1.index_of(&[0, 1]).unwrap();
        for (a, ia) in [(0, h), (1, v)] {
            for (b, ib) in [(0, h), (1, v)] {
                let want: f64 = (0..2).map(|c| amp(a, c) * amp(b, c)).sum();
                assert!((red.entry(ia, ib).re - want).abs() < 1e-15);
            }
        }
        let eig = red.eigendecompose().unwrap();
        assert_eq!(eig.len(), 2);
        assert!((eig[0].0 - 0.5).abs() < 1e-12 && (eig[1].0 - 0.5).abs() < 1e-12);

        let fast = DensityOperator::reduced_from_pure(&psi, &Beam::One.modes()).unwrap();
        assert_eq!(fast, red);
    }

    #[test]
    fn keep_everything_is_identity() {
        let psi = singlet();
        let rho = DensityOperator::from_pure(&psi);
        assert_eq!(rho.partial_trace(psi.space().modes()).unwrap(), rho);
        assert!(matches!(rho.partial_trace(&[Beam::Three.h()]), Err(Error::NotSubset(_))));
    }

    #[test]
    fn product_state_factorizes() {
        let a = FockSpace::new(Beam::One.modes().to_vec(), 2).unwrap();
        let b = FockSpace::new(Beam::Two.modes().to_vec(), 2).unwrap();
        let pa = StateVector::from_occupations(&a, [(&[1u8, 0][..], C64::new(0.6, 0.0)), (&[0u8, 1][..], C64::new(0.0, 0.8))])
            .unwrap();
        let pb = StateVector::from_occupations(&b, [(&[0u8, 0][..], C64::new(0.8, 0.0)), (&[2u8, 0][..], C64::new(0.6, 0.0))])
            .unwrap();
        let rho = DensityOperator::from_pure(&pa.tensor(&pb).unwrap());
        let red = rho.partial_trace(&Beam::One.modes()).unwrap();
        let want = DensityOperator::from_pure(&pa.embed(red.space()).unwrap().0);
        assert!(red.iter().all(|((i, j), v)| (v - want.entry(i, j)).norm() < 1e-14));
        assert_eq!(red.nnz(), want.nnz());
    }

    #[test]
    fn fidelity_examples() {
        let s = FockSpace::new(Beam::Three.modes().to_vec(), 2).unwrap();
        let vac = StateVector::vacuum(&s);
        let phi = StateVector::from_occupations(&s, [(&[1u8, 0][..], C64::new(0.6, 0.0)), (&[0u8, 1][..], C64::new(0.0, 0.8))])
            .unwrap();
        let pphi = DensityOperator::from_pure(&phi);
        assert!((pphi.fidelity_pure(&phi).unwrap() - 1.0).abs() < 1e-12);

        let mix = DensityOperator::mixture(&[(0.5, &DensityOperator::from_pure(&vac)), (0.5, &pphi)]).unwrap();
        assert!((mix.fidelity_pure(&phi).unwrap() - 0.5).abs() < 1e-12);
        let eig = mix.eigendecompose().unwrap();
        assert!((eig[0].0 - 0.5).abs() < 1e-12 && (eig[1].0 - 0.5).abs() < 1e-12);
        assert!(eig[2..].iter().all(|(l, _)| l.abs() < 1e-12));

        // maximally mixed polarization: F = 1/2 for any single-photon polarization
        let h = StateVector::basis(&s, &[1, 0]).unwrap();
        let v = StateVector::basis(&s, &[0, 1]).unwrap();
        let mm = DensityOperator::mixture(&[(0.5, &DensityOperator::from_pure(&h)), (0.5, &DensityOperator::from_pure(&v))])
            .unwrap();
        for t in [0.0, 0.3, 1.1, 2.5] {
            let p = StateVector::from_occupations(
                &s,
                [(&[1u8, 0][..], C64::new(f64::cos(t), 0.0)), (&[0u8, 1][..], C64::from_polar(f64::sin(t), 0.7))],
            )
            .unwrap();
            assert!((mm.fidelity_pure(&p).unwrap() - 0.5).abs() < 1e-12);
        }

        let sub = pphi.scale(0.5);
        assert!(matches!(sub.fidelity_pure(&phi), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn eigendecomposition_rejects_non_hermitian() {
        let s = FockSpace::new(vec![Beam::One.h()], 1).unwrap();
        let rho = DensityOperator::from_entries(&s, [((0, 1), C64::new(1.0, 0.0)), ((0, 0), C64::new(1.0, 0.0))]);
        assert!(matches!(rho.eigendecompose(), Err(Error::NonHermitian(_))));
        assert!(matches!(rho.symmetrize(), Err(Error::HermiticityDrift(_))));
    }
}
