use std::fmt;
use std::sync::Arc;

use super::mode::ModeLabel;
use crate::error::{Error, Result};

/// Photon counts, one entry per mode in the declared mode order.
pub type Occupation = Vec<u8>;

/// A multimode Fock space truncated by total photon number.
///
/// The basis is every occupation vector whose entries sum to at most
/// `cutoff`, ordered lexicographically in the declared mode order (the first
/// mode is the most significant digit). Indices are computed by combinatorial
/// ranking, so no lookup table is held.
///
/// Cloning is cheap; spaces compare equal when their modes and cutoff agree.
#[derive(Clone)]
pub struct FockSpace {
    inner: Arc<Inner>,
}

struct Inner {
    modes: Vec<ModeLabel>,
    cutoff: usize,
    // counts[r][b]: number of occupation vectors over r modes with sum <= b.
    counts: Vec<Vec<usize>>,
}

impl FockSpace {
    pub fn new(modes: Vec<ModeLabel>, cutoff: usize) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::DuplicateMode(*m));
            }
        }
        if cutoff > u8::MAX as usize {
            return Err(Error::InvalidParameter {
                name: "cutoff",
                value: cutoff as f64,
                reason: "photon counts are stored as u8",
            });
        }
        let m = modes.len();
        let mut counts = vec![vec![0usize; cutoff + 1]; m + 1];
        counts[0].fill(1);
        for r in 1..=m {
            let mut acc = 0usize;
            for b in 0..=cutoff {
                // vectors of length r with sum <= b = sum over the first entry's value
                acc += counts[r - 1][b];
                counts[r][b] = acc;
            }
        }
        Ok(Self { inner: Arc::new(Inner { modes, cutoff, counts }) })
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.inner.modes
    }

    pub fn num_modes(&self) -> usize {
        self.inner.modes.len()
    }

    pub fn cutoff(&self) -> usize {
        self.inner.cutoff
    }

    pub fn dim(&self) -> usize {
        self.count(self.num_modes(), self.cutoff())
    }

    fn count(&self, remaining: usize, budget: usize) -> usize {
        self.inner.counts[remaining][budget]
    }

    pub fn position(&self, mode: ModeLabel) -> Option<usize> {
        self.inner.modes.iter().position(|&m| m == mode)
    }

    pub fn require_position(&self, mode: ModeLabel) -> Result<usize> {
        self.position(mode).ok_or(Error::ModeNotInSpace(mode))
    }

    pub fn positions(&self, modes: &[ModeLabel]) -> Result<Vec<usize>> {
        modes.iter().map(|&m| self.require_position(m)).collect()
    }

    pub fn contains(&self, mode: ModeLabel) -> bool {
        self.position(mode).is_some()
    }

    /// Basis index of an occupation vector.
    pub fn index_of(&self, occupation: &[u8]) -> Result<usize> {
        let m = self.num_modes();
        if occupation.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: occupation.len() });
        }
        let total: usize = occupation.iter().map(|&n| n as usize).sum();
        if total > self.cutoff() {
            return Err(Error::CutoffExceeded { total, cutoff: self.cutoff() });
        }
        Ok(self.rank_unchecked(occupation))
    }

    /// Ranking without validation; callers guarantee length and cutoff.
    pub(crate) fn rank_unchecked(&self, occupation: &[u8]) -> usize {
        let m = self.num_modes();
        let mut idx = 0;
        let mut budget = self.cutoff();
        for (k, &n) in occupation.iter().enumerate() {
            let rem = m - k - 1;
            for v in 0..n as usize {
                idx += self.count(rem, budget - v);
            }
            budget -= n as usize;
        }
        idx
    }

    /// Occupation vector of a basis index.
    ///
    /// # Panics
    /// If `index >= self.dim()`.
    pub fn occupation(&self, index: usize) -> Occupation {
        let mut out = vec![0u8; self.num_modes()];
        self.occupation_into(index, &mut out);
        out
    }

    pub(crate) fn occupation_into(&self, mut index: usize, out: &mut [u8]) {
        assert!(index < self.dim(), "basis index {index} out of range {}", self.dim());
        let m = self.num_modes();
        let mut budget = self.cutoff();
        for k in 0..m {
            let rem = m - k - 1;
            let mut v = 0usize;
            loop {
                let c = self.count(rem, budget - v);
                if index < c {
                    break;
                }
                index -= c;
                v += 1;
            }
            out[k] = v as u8;
            budget -= v;
        }
    }

    /// Total photon number of a basis state.
    pub fn photon_number(&self, index: usize) -> usize {
        self.occupation(index).iter().map(|&n| n as usize).sum()
    }

    /// A space over a subset of this space's modes (kept in this space's
    /// order) with the same cutoff.
    pub fn subspace(&self, keep: &[ModeLabel]) -> Result<Self> {
        for &m in keep {
            self.require_position(m).map_err(|_| Error::NotSubset(m))?;
        }
        let modes = self.modes().iter().copied().filter(|m| keep.contains(m)).collect();
        Self::new(modes, self.cutoff())
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.modes().to_vec(), cutoff)
    }

    pub fn same_modes(&self, other: &Self) -> bool {
        self.modes() == other.modes()
    }
}

impl PartialEq for FockSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.cutoff == other.inner.cutoff && self.inner.modes == other.inner.modes)
    }
}

impl Eq for FockSpace {}

impl fmt::Debug for FockSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let modes: Vec<String> = self.modes().iter().map(|m| m.to_string()).collect();
        write!(f, "FockSpace[{}; cutoff {}]", modes.join(","), self.cutoff())
    }
}
