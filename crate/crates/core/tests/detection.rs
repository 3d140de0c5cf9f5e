use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teleport_sim::detection::{
    condition, loss_channel, povm, qnd_total_number, Detector, DetectorKind, DetectorModel, Outcome, OutcomePattern,
};
use teleport_sim::fock::{Beam, DensityOperator, FockOperator, FockSpace, StateVector};
use teleport_sim::optics::{self, ModeTransform};
use teleport_sim::validate::{random_density, random_unitary};
use teleport_sim::{Error, C64};

fn kind(k: u8) -> DetectorKind {
    match k {
        0 => DetectorKind::Threshold,
        1 => DetectorKind::NumberResolving,
        s => DetectorKind::Cascade { stages: s as usize - 1 },
    }
}

fn dense_diff(a: &DensityOperator, b: &DensityOperator) -> f64 {
    (a.to_dense() - b.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Tr(E rho)` for a diagonal POVM element.
fn expectation(e: &FockOperator, rho: &DensityOperator) -> f64 {
    (0..rho.space().dim()).map(|i| (e.get(i, i) * rho.entry(i, i)).re).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn povm_elements_sum_to_identity(k in 0u8..6, eta in 0.0f64..=1.0, sensitive in any::<bool>()) {
        let model = if sensitive {
            DetectorModel::on_mode(kind(k), eta, Beam::Four.h()).unwrap()
        } else {
            DetectorModel::on_beam(kind(k), eta, Beam::Four).unwrap()
        };
        let space = FockSpace::new(Beam::Four.modes().to_vec(), 5).unwrap();
        let mut sum = FockOperator::diagonal(&space, |_| C64::new(0.0, 0.0));
        for e in povm(&model, 5).unwrap() {
            prop_assert!(e.response.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
            sum = sum.add(&e.operator(&model, &space).unwrap()).unwrap();
        }
        prop_assert!(sum.max_abs_diff(&FockOperator::identity(&space)).unwrap() <= 1e-10);
    }

    #[test]
    fn outcome_probabilities_sum_to_one(seed in any::<u64>(), k in 0u8..6, eta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = FockSpace::new([Beam::One.modes(), Beam::Two.modes()].concat(), 4).unwrap();
        let rho = random_density(&space, &mut rng).unwrap();
        let model = DetectorModel::on_beam(kind(k), eta, Beam::One).unwrap();
        let total: f64 = povm(&model, 4).unwrap().iter().map(|e| expectation(&e.operator(&model, &space).unwrap(), &rho)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn conditioning_order_does_not_matter(seed in any::<u64>(), eta in 0.3f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = FockSpace::new([Beam::One.modes(), Beam::Two.modes(), Beam::Three.modes()].concat(), 3).unwrap();
        let rho = random_density(&space, &mut rng).unwrap();
        let a = Detector::new("a", DetectorModel::on_beam(DetectorKind::Threshold, eta, Beam::One).unwrap());
        let b = Detector::new("b", DetectorModel::on_beam(DetectorKind::NumberResolving, eta, Beam::Two).unwrap());
        let both = OutcomePattern::new([("a", Outcome::Click), ("b", Outcome::Count(1))]);
        let joint_ab = condition(&rho, &both, &[a.clone(), b.clone()]).unwrap();
        let joint_ba = condition(&rho, &both, &[b.clone(), a.clone()]).unwrap();
        prop_assert!(dense_diff(&joint_ab.state, &joint_ba.state) <= 1e-10);

        let first_a = condition(&rho, &OutcomePattern::new([("a", Outcome::Click)]), std::slice::from_ref(&a)).unwrap();
        let then_b = condition(&first_a.state, &OutcomePattern::new([("b", Outcome::Count(1))]), std::slice::from_ref(&b)).unwrap();
        let first_b = condition(&rho, &OutcomePattern::new([("b", Outcome::Count(1))]), std::slice::from_ref(&b)).unwrap();
        let then_a = condition(&first_b.state, &OutcomePattern::new([("a", Outcome::Click)]), std::slice::from_ref(&a)).unwrap();
        prop_assert!(dense_diff(&then_b.state, &joint_ab.state) <= 1e-10);
        prop_assert!(dense_diff(&then_a.state, &joint_ab.state) <= 1e-10);
        prop_assert!((first_a.probability * then_b.probability - joint_ab.probability).abs() <= 1e-10);
        prop_assert!((first_b.probability * then_a.probability - joint_ab.probability).abs() <= 1e-10);
    }

    #[test]
    fn efficiencies_compose(seed in any::<u64>(), e1 in 0.2f64..=1.0, e2 in 0.2f64..=1.0, k in 0u8..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = FockSpace::new([Beam::One.modes(), Beam::Two.modes()].concat(), 3).unwrap();
        let rho = random_density(&space, &mut rng).unwrap();
        let outcome = match kind(k) {
            DetectorKind::NumberResolving => Outcome::Count(1),
            DetectorKind::Cascade { .. } => Outcome::Clicks(1),
            DetectorKind::Threshold => Outcome::Click,
        };
        let pattern = OutcomePattern::new([("d", outcome)]);
        let lossy = loss_channel(&rho, &Beam::One.modes(), e1).unwrap();
        let two_step = condition(&lossy, &pattern, &[Detector::new("d", DetectorModel::on_beam(kind(k), e2, Beam::One).unwrap())]).unwrap();
        let one_step = condition(&rho, &pattern, &[Detector::new("d", DetectorModel::on_beam(kind(k), e1 * e2, Beam::One).unwrap())]).unwrap();
        prop_assert!((two_step.probability - one_step.probability).abs() <= 1e-10);
        prop_assert!(dense_diff(&two_step.state, &one_step.state) <= 1e-10);

        let twice = loss_channel(&loss_channel(&rho, &Beam::One.modes(), e1).unwrap(), &Beam::One.modes(), e2).unwrap();
        let once = loss_channel(&rho, &Beam::One.modes(), e1 * e2).unwrap();
        prop_assert!(dense_diff(&twice, &once) <= 1e-10);
    }

    #[test]
    fn qnd_projection_commutes_with_polarization_rotations(seed in any::<u64>(), n in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = FockSpace::new(Beam::Three.modes().to_vec(), 3).unwrap();
        let rho = random_density(&space, &mut rng).unwrap();
        let u = ModeTransform::new(Beam::Three.modes().to_vec(), random_unitary(2, &mut rng)).unwrap().lift(&space).unwrap();
        let before = qnd_total_number(&u.apply_density(&rho).unwrap(), Beam::Three, n).unwrap();
        let after = qnd_total_number(&rho, Beam::Three, n).unwrap();
        prop_assert!((before.probability - after.probability).abs() <= 1e-10);
        prop_assert!(dense_diff(&before.state, &u.apply_density(&after.state).unwrap()) <= 1e-10);
    }
}

#[test]
fn threshold_examples() {
    let space = FockSpace::new(Beam::One.modes().to_vec(), 2).unwrap();
    let vac = DensityOperator::from_pure(&StateVector::vacuum(&space));
    let one = DensityOperator::from_pure(&StateVector::basis(&space, &[1, 0]).unwrap());
    let ideal = [Detector::new("d", DetectorModel::on_beam(DetectorKind::Threshold, 1.0, Beam::One).unwrap())];
    let half = [Detector::new("d", DetectorModel::on_beam(DetectorKind::Threshold, 0.5, Beam::One).unwrap())];
    let click = OutcomePattern::new([("d", Outcome::Click)]);
    let none = OutcomePattern::new([("d", Outcome::NoClick)]);
    assert!((condition(&vac, &none, &ideal).unwrap().probability - 1.0).abs() < 1e-15);
    assert!(matches!(condition(&vac, &click, &ideal), Err(Error::ZeroProbability { .. })));
    assert!((condition(&one, &click, &ideal).unwrap().probability - 1.0).abs() < 1e-15);
    assert!((condition(&one, &click, &half).unwrap().probability - 0.5).abs() < 1e-15);
}

#[test]
fn cascade_of_two_splits_a_photon_pair() {
    let m = Beam::One.h();
    let space = FockSpace::new(vec![m], 2).unwrap();
    let two = DensityOperator::from_pure(&StateVector::basis(&space, &[2]).unwrap());
    let det = [Detector::new("c", DetectorModel::on_mode(DetectorKind::Cascade { stages: 2 }, 1.0, m).unwrap())];
    let both = condition(&two, &OutcomePattern::new([("c", Outcome::Clicks(2))]), &det).unwrap();
    assert!((both.probability - 0.5).abs() < 1e-15);

    // brute force: each photon independently takes either output port
    let bs = optics::beamsplitter(0.5, 0.0, [m, Beam::Ancilla(0).h()]).unwrap().transform().unwrap();
    let out_space = FockSpace::new(vec![m, Beam::Ancilla(0).h()], 2).unwrap();
    let out = bs.apply(&StateVector::basis(&out_space, &[2, 0]).unwrap()).unwrap();
    assert!((out.amplitude_of(&[1, 1]).unwrap().norm_sqr() - both.probability).abs() < 1e-15);
}

#[test]
fn overlapping_detectors_are_rejected() {
    let space = FockSpace::new(Beam::One.modes().to_vec(), 2).unwrap();
    let rho = DensityOperator::from_pure(&StateVector::vacuum(&space));
    let det = [
        Detector::new("a", DetectorModel::on_beam(DetectorKind::Threshold, 1.0, Beam::One).unwrap()),
        Detector::new("b", DetectorModel::on_mode(DetectorKind::Threshold, 1.0, Beam::One.v()).unwrap()),
    ];
    let r = condition(&rho, &OutcomePattern::new([("a", Outcome::NoClick)]), &det);
    assert!(matches!(r, Err(Error::DetectorOverlap(_, _))));
}
