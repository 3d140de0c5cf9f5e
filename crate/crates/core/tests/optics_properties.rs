use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teleport_sim::experiment::{Apparatus, SetupConfig};
use teleport_sim::fock::{Beam, FockOperator, FockSpace, StateVector};
use teleport_sim::optics::{self, compose, Circuit, ModeTransform};
use teleport_sim::validate::random_unitary;

fn two_beams(cutoff: usize) -> FockSpace {
    FockSpace::new([Beam::One.modes(), Beam::Two.modes()].concat(), cutoff).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lift_is_a_homomorphism(seed in any::<u64>(), i in 0usize..4, j in 0usize..4) {
        prop_assume!(i != j);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = two_beams(4);
        let modes = space.modes().to_vec();
        let u = ModeTransform::new(vec![modes[i], modes[j]], random_unitary(2, &mut rng)).unwrap();
        let v = ModeTransform::new(vec![modes[j], modes[(j + 1) % 4]], random_unitary(2, &mut rng)).unwrap();
        let lhs = u.then_after(&v).unwrap().lift(&space).unwrap();
        let rhs = u.lift(&space).unwrap().mul(&v.lift(&space).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn lifted_unitaries_conserve_number_and_stay_unitary(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = two_beams(4);
        let u = ModeTransform::new(space.modes().to_vec(), random_unitary(4, &mut rng)).unwrap().lift(&space).unwrap();
        let n = FockOperator::number(&space, space.modes()).unwrap();
        prop_assert!(u.commutator_norm(&n).unwrap() <= 1e-12);
        prop_assert!(u.unitarity_defect() <= 1e-10);
    }

    #[test]
    fn elements_lift_to_unitaries(t in 0.0f64..=1.0, phase in 0.0f64..(2.0 * PI), angle in -PI..PI, retardance in 0.0f64..(2.0 * PI)) {
        let space = FockSpace::new([Beam::One.modes(), Beam::Two.modes(), Beam::Loss(0).modes()].concat(), 3).unwrap();
        let elements = [
            optics::beamsplitter_beams(t, phase, Beam::One, Beam::Two).unwrap(),
            optics::waveplate(angle, retardance, Beam::One).unwrap(),
            optics::polarizer(angle, Beam::Two.modes(), Beam::Loss(0).modes()).unwrap(),
            optics::phase_shift(phase, &[Beam::Two.v()]).unwrap(),
        ];
        for e in elements {
            let t = e.transform().unwrap();
            prop_assert!(t.unitarity_defect() <= 1e-12);
            prop_assert!(t.lift(&space).unwrap().unitarity_defect() <= 1e-10);
        }
    }

    #[test]
    fn element_then_inverse_is_identity(t in 0.0f64..=1.0, phase in 0.0f64..(2.0 * PI)) {
        let space = two_beams(3);
        let bs = optics::beamsplitter_beams(t, phase, Beam::One, Beam::Two).unwrap().transform().unwrap();
        let round = bs.inverse().lift(&space).unwrap().mul(&bs.lift(&space).unwrap()).unwrap();
        prop_assert!(round.max_abs_diff(&FockOperator::identity(&space)).unwrap() <= 1e-12);
    }
}

#[test]
fn full_apparatus_conserves_photon_number_on_every_basis_state() {
    let config = SetupConfig { cutoff: 4, ..SetupConfig::default() };
    let app = Apparatus::build(&config).unwrap();
    let mut elements = app.circuit().elements.clone();
    elements.extend(app.bob_circuit().elements.iter().cloned());
    let space = app.space();
    let u = compose(&Circuit::new(elements), space).unwrap();
    for j in 0..space.dim() {
        let n = space.photon_number(j);
        for &(i, _) in u.column(j) {
            assert_eq!(space.photon_number(i), n, "basis state {j} leaks into {i}");
        }
    }
    assert!(u.unitarity_defect() <= 1e-12);
}

#[test]
fn diagonal_photon_splits_evenly_at_a_pbs() {
    let modes = [Beam::One.h(), Beam::One.v(), Beam::Two.h(), Beam::Two.v()];
    let space = FockSpace::new(modes.to_vec(), 1).unwrap();
    let photon = StateVector::from_amplitudes(
        &space,
        [(space.index_of(&[1, 0, 0, 0]).unwrap(), FRAC_1_SQRT_2.into()), (space.index_of(&[0, 1, 0, 0]).unwrap(), FRAC_1_SQRT_2.into())],
    )
    .normalize()
    .unwrap();
    let out = optics::pbs(modes).unwrap().transform().unwrap().apply(&photon).unwrap();
    let transmitted = out.amplitude_of(&[1, 0, 0, 0]).unwrap().norm_sqr();
    let reflected = out.amplitude_of(&[0, 0, 0, 1]).unwrap().norm_sqr();
    assert!((transmitted - 0.5).abs() < 1e-12 && (reflected - 0.5).abs() < 1e-12);
    assert!((out.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn half_wave_plate_rotates_horizontal_to_diagonal() {
    let space = FockSpace::new(Beam::One.modes().to_vec(), 1).unwrap();
    let h = StateVector::basis(&space, &[1, 0]).unwrap();
    let out = optics::half_wave_plate(FRAC_PI_4 / 2.0, Beam::One).unwrap().transform().unwrap().apply(&h).unwrap();
    let (a, b) = (out.amplitude_of(&[1, 0]).unwrap(), out.amplitude_of(&[0, 1]).unwrap());
    assert!((a.norm_sqr() - 0.5).abs() < 1e-12 && (b.norm_sqr() - 0.5).abs() < 1e-12);
    assert!(((a.conj() * b).re - 0.5).abs() < 1e-12);
}

#[test]
fn quarter_wave_plate_makes_circular_light() {
    let space = FockSpace::new(Beam::One.modes().to_vec(), 1).unwrap();
    let h = StateVector::basis(&space, &[1, 0]).unwrap();
    let out = optics::quarter_wave_plate(FRAC_PI_4, Beam::One).unwrap().transform().unwrap().apply(&h).unwrap();
    let (a, b) = (out.amplitude_of(&[1, 0]).unwrap(), out.amplitude_of(&[0, 1]).unwrap());
    assert!((a.norm_sqr() - 0.5).abs() < 1e-12);
    // relative phase of +-pi/2 between H and V
    assert!((a.conj() * b).re.abs() < 1e-12 && ((a.conj() * b).im.abs() - 0.5).abs() < 1e-12);
}

#[test]
fn balanced_splitter_squared_matches_matrix_product() {
    let bs = optics::beamsplitter_beams(0.5, 0.0, Beam::One, Beam::Two).unwrap().transform().unwrap();
    let sq = bs.then_after(&bs).unwrap();
    let expected = bs.matrix() * bs.matrix();
    assert!((sq.matrix() - expected).iter().all(|z| z.norm() < 1e-15));
}
