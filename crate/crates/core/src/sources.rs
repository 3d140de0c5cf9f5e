//! Type-II down-conversion sources.
//!
//! A source acting on beams `i` and `j` is the unitary
//! `exp(g (K^dag - K))` with pair-creation operator
//! `K^dag = a_iH^dag a_jV^dag - a_iV^dag a_jH^dag`, applied to vacuum. Its
//! output is `sum_n A_n chi_n`, where `chi_n` is the normalized `n`-pair state
//! `(K^dag)^n |0>` and `chi_1` is the polarization singlet.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Beam, FockSpace, NormFlag, StateVector};
use crate::C64;

/// Largest discarded weight a truncated source may report.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

/// Extra ladder levels carried beyond the kept pairs when exponentiating.
const LADDER_PADDING: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdcParams {
    pub coupling: f64,
    pub max_pairs: usize,
    pub beams: (Beam, Beam),
}

impl SpdcParams {
    pub fn new(coupling: f64, max_pairs: usize, beams: (Beam, Beam)) -> Result<Self> {
        let p = Self { coupling, max_pairs, beams };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling.is_finite() && (0.0..1.0).contains(&self.coupling)) {
            return Err(Error::InvalidParameter {
                name: "coupling",
                value: self.coupling,
                reason: "must lie in [0, 1), the perturbative regime",
            });
        }
        if self.beams.0 == self.beams.1 {
            return Err(Error::MalformedModes(format!("source beams must differ, got {} twice", self.beams.0)));
        }
        Ok(())
    }
}

/// Pair-number amplitudes `A_0 .. A_max_pairs` after truncation and
/// renormalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdcCoefficients {
    pub amplitudes: Vec<f64>,
    /// Weight of the pair numbers above `max_pairs` before renormalization.
    pub discarded_weight: f64,
}

/// Normalized `n`-pair states `chi_0 .. chi_levels-1` on `space`, together
/// with the ladder norms `alpha_n = |K^dag chi_n|`.
fn pair_ladder(space: &FockSpace, beams: (Beam, Beam), levels: usize) -> Result<(Vec<StateVector>, Vec<f64>)> {
    let (i, j) = beams;
    let mut chi = vec![StateVector::vacuum(space)];
    let mut alpha = Vec::with_capacity(levels);
    for _ in 1..levels {
        let prev = chi.last().expect("ladder starts at vacuum");
        let up = prev.create(j.v())?.create(i.h())?.add(&prev.create(j.h())?.create(i.v())?.scale(C64::new(-1.0, 0.0)))?;
        let a = up.norm();
        alpha.push(a);
        chi.push(up.normalize()?);
    }
    Ok((chi, alpha))
}

/// Pair-number amplitudes by exponentiating the generator restricted to the
/// pair ladder, where it is tridiagonal with entries `+-g alpha_n`.
pub fn spdc_coefficients(params: &SpdcParams) -> Result<SpdcCoefficients> {
    params.validate()?;
    let levels = params.max_pairs + 1 + LADDER_PADDING;
    let local = FockSpace::new(vec![params.beams.0.h(), params.beams.0.v(), params.beams.1.h(), params.beams.1.v()], 2 * (levels - 1))?;
    let (_, alpha) = pair_ladder(&local, params.beams, levels)?;
    let g = params.coupling;
    let mut gen = DMatrix::<f64>::zeros(levels, levels);
    for (n, &a) in alpha.iter().enumerate() {
        gen[(n + 1, n)] = g * a;
        gen[(n, n + 1)] = -g * a;
    }
    let u = gen.exp();
    let full: Vec<f64> = (0..levels).map(|n| u[(n, 0)]).collect();
    let kept = &full[..=params.max_pairs];
    let kept_weight: f64 = kept.iter().map(|a| a * a).sum();
    let discarded_weight = (1.0 - kept_weight).max(0.0);
    if discarded_weight > TRUNCATION_LIMIT {
        return Err(Error::TruncationWeight { weight: discarded_weight, limit: TRUNCATION_LIMIT });
    }
    let s = kept[0].signum() / kept_weight.sqrt();
    Ok(SpdcCoefficients { amplitudes: kept.iter().map(|a| a * s).collect(), discarded_weight })
}

/// Source output on `space`, which must hold both polarizations of both
/// beams and admit `max_pairs` pairs.
pub fn spdc_state(params: &SpdcParams, space: &FockSpace) -> Result<StateVector> {
    let coeffs = spdc_coefficients(params)?;
    spdc_state_from(params, &coeffs, space)
}

pub(crate) fn spdc_state_from(params: &SpdcParams, coeffs: &SpdcCoefficients, space: &FockSpace) -> Result<StateVector> {
    let (i, j) = params.beams;
    space.positions(&[i.h(), i.v(), j.h(), j.v()])?;
    if 2 * params.max_pairs > space.cutoff() {
        return Err(Error::CutoffExceeded { total: 2 * params.max_pairs, cutoff: space.cutoff() });
    }
    let (chi, _) = pair_ladder(space, params.beams, params.max_pairs + 1)?;
    let mut psi = StateVector::zero(space);
    for (a, c) in coeffs.amplitudes.iter().zip(&chi) {
        psi = psi.add(&c.scale(C64::new(*a, 0.0)))?;
    }
    let psi = psi.normalize()?;
    debug_assert_eq!(psi.flag(), NormFlag::Normalized);
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(g: f64, n: usize) -> SpdcParams {
        SpdcParams::new(g, n, (Beam::One, Beam::Four)).unwrap()
    }

    #[test]
    fn zero_coupling_is_vacuum() {
        let c = spdc_coefficients(&params(0.0, 3)).unwrap();
        assert_eq!(c.amplitudes[0], 1.0);
        assert!(c.amplitudes[1..].iter().all(|&a| a == 0.0));
        let space = FockSpace::new([Beam::One.modes(), Beam::Four.modes()].concat(), 6).unwrap();
        let psi = spdc_state(&params(0.0, 3), &space).unwrap();
        assert_eq!(psi.support_len(), 1);
        assert!((psi.amplitude(0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coupling_guard() {
        assert!(SpdcParams::new(1.0, 2, (Beam::One, Beam::Four)).is_err());
        assert!(SpdcParams::new(-0.1, 2, (Beam::One, Beam::Four)).is_err());
        assert!(SpdcParams::new(f64::NAN, 2, (Beam::One, Beam::Four)).is_err());
        assert!(SpdcParams::new(0.1, 2, (Beam::One, Beam::One)).is_err());
        // a strong source cannot be represented with one pair
        assert!(matches!(spdc_coefficients(&params(0.5, 1)), Err(Error::TruncationWeight { .. })));
    }

    #[test]
    fn closed_form_agreement() {
        // the singlet squeezer has A_n = sqrt(n+1) tanh^n g / cosh^2 g
        let g: f64 = 0.2;
        let c = spdc_coefficients(&params(g, 8)).unwrap();
        for (n, a) in c.amplitudes.iter().enumerate() {
            let want = ((n + 1) as f64).sqrt() * g.tanh().powi(n as i32) / g.cosh().powi(2);
            assert!((a - want).abs() < 1e-9, "n = {n}: {a} vs {want}");
        }
    }
}
