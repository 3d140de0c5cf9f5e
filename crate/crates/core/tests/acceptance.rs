//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teleport_sim::analysis::{
    classical_baseline, reconstruct, sample_counts, tomography_probabilities, AnalyzerBasis, Shots, TomographyData,
    TomographySetting, CLASSICAL_BASELINE,
};
use teleport_sim::detection::qnd_total_number;
use teleport_sim::experiment::{
    coupling_ratio_sweep, input_independence_check, leading_order, Apparatus, Scenario, SetupConfig, DEFAULT_LEADING_ORDER_COUPLINGS,
};
use teleport_sim::fock::{Beam, DensityOperator, StateVector};
use teleport_sim::optics::ModeTransform;
use teleport_sim::validate::{random_unitary, run_suite, scenarios, SuiteOptions};
use teleport_sim::{oracle, Result};

const LO: [f64; 3] = DEFAULT_LEADING_ORDER_COUPLINGS;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn config() -> SetupConfig {
    SetupConfig::default()
}

fn lo_fidelity(c: &SetupConfig, s: &Scenario) -> Result<f64> {
    Ok(leading_order(c, s, &LO)?.fidelity.value)
}

fn dense_lo(c: &SetupConfig, s: &Scenario) -> Result<f64> {
    Ok(oracle::leading_order(&SetupConfig { cutoff: 4, ..c.clone() }, s, &LO)?.value)
}

fn threefold_half(start: Instant) -> Result<Outcome> {
    let c = config();
    let app = Apparatus::build(&c)?;
    let lo = leading_order(&c, &Scenario::Threefold, &LO)?;
    let target = app.target()?;
    let vac = StateVector::vacuum(lo.rho3.space());
    let eig = lo.rho3.eigendecompose()?;
    let mut weights = (0.0, 0.0, 0.0);
    for (l, v) in &eig {
        let fv = vac.inner(v)?.norm_sqr();
        let ft = target.inner(v)?.norm_sqr();
        if fv > 0.5 {
            weights.0 += l;
        } else if ft > 0.5 {
            weights.1 += l;
        } else {
            weights.2 += l.abs();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let f = lo.fidelity.value;
    let ok = (f - 0.5).abs() <= 1e-3 && (weights.0 - 0.5).abs() <= 1e-3 && (weights.1 - 0.5).abs() <= 1e-3 && weights.2 <= 1e-3 && secs < 10.0;
    outcome(ok, format!("F={f:.7} eigenweights vacuum={:.7} target={:.7} other={:.1e} in {secs:.2}s (cutoff {})", weights.0, weights.1, weights.2, c.cutoff))
}

fn fourfold_unity(start: Instant) -> Result<Outcome> {
    let f = lo_fidelity(&config(), &Scenario::Fourfold)?;
    let secs = start.elapsed().as_secs_f64();
    outcome((f - 1.0).abs() <= 1e-3 && secs < 10.0, format!("F={f:.7} in {secs:.2}s"))
}

fn baseline_equality(_: Instant) -> Result<Outcome> {
    let c = config();
    let f = lo_fidelity(&c, &Scenario::Threefold)?;
    let b = classical_baseline(&Apparatus::build(&c)?.target()?, 1_000_000, 7)?;
    let (da, dm) = (f - b.analytic, f - b.monte_carlo);
    outcome(
        b.analytic == CLASSICAL_BASELINE && da.abs() <= 1e-3 && dm.abs() <= 3e-3,
        format!("F - analytic = {da:.2e}, F - monte carlo = {dm:.2e} ({} trials)", b.trials),
    )
}

fn number_resolution(_: Instant) -> Result<Outcome> {
    let c = config();
    let nr = lo_fidelity(&c, &Scenario::ThreefoldNumberResolvedP { n: 1 })?;
    let mut ours = Vec::new();
    let mut worst: f64 = 0.0;
    for k in [1usize, 2, 4] {
        let s = Scenario::ThreefoldCascadeP { stages: k };
        let f = lo_fidelity(&c, &s)?;
        worst = worst.max((f - dense_lo(&c, &s)?).abs());
        ours.push(f);
    }
    let increasing = ours.windows(2).all(|w| w[1] > w[0]);
    outcome(
        (nr - 1.0).abs() <= 1e-3 && increasing && worst <= 1e-6,
        format!("number-resolved F={nr:.7}; cascade k=1,2,4 F={:.6},{:.6},{:.6}; oracle max |dF|={worst:.1e}", ours[0], ours[1], ours[2]),
    )
}

fn qnd_at_bob(_: Instant) -> Result<Outcome> {
    let c = config();
    let f = lo_fidelity(&c, &Scenario::ThreefoldQndBob { n: 1 })?;
    // the projection must commute with any polarization rotation of beam 3
    let rho = leading_order(&c, &Scenario::Threefold, &LO)?.rho3.normalize()?.0;
    let space = rho.space().clone();
    let target = DensityOperator::from_pure(&Apparatus::build(&c)?.target()?);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let u = ModeTransform::new(Beam::Three.modes().to_vec(), random_unitary(2, &mut rng))?.lift(&space)?;
        let before = qnd_total_number(&u.apply_density(&rho)?, Beam::Three, 1)?;
        let after = qnd_total_number(&rho, Beam::Three, 1)?;
        let rotated_after = u.apply_density(&after.state)?;
        let d = (before.state.to_dense() - rotated_after.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(d).max((before.probability - after.probability).abs());
        // fidelity with the rotated target is unchanged
        let rotated_target = u.apply_density(&target)?;
        let f_rot = (before.state.to_dense() * rotated_target.to_dense()).trace().re;
        let f_ref = (after.state.to_dense() * target.to_dense()).trace().re;
        worst = worst.max((f_rot - f_ref).abs());
    }
    outcome((f - 1.0).abs() <= 1e-3 && worst <= 1e-8, format!("F={f:.7}; rotation max deviation {worst:.1e} over 16 random rotations"))
}

fn coupling_ratio(_: Instant) -> Result<Outcome> {
    let c = config();
    let rows = coupling_ratio_sweep(&c, &[1.0, 2.0, 4.0, 8.0], &LO)?;
    let f: Vec<f64> = rows.iter().map(|r| r.fidelity).collect();
    let scale = c.coupling_i.max(c.coupling_ii);
    let mut worst: f64 = 0.0;
    for row in &rows[1..] {
        let rc = SetupConfig { coupling_i: scale / row.ratio, coupling_ii: scale, ..c.clone() };
        worst = worst.max((row.fidelity - dense_lo(&rc, &Scenario::Threefold)?).abs());
    }
    let increasing = f.windows(2).all(|w| w[1] > w[0]);
    outcome(
        increasing && (f[0] - 0.5).abs() <= 1e-3 && worst <= 1e-6,
        format!("r=1,2,4,8 F={:.6},{:.6},{:.6},{:.6}; oracle max |dF|={worst:.1e}", f[0], f[1], f[2], f[3]),
    )
}

fn input_independence(_: Instant) -> Result<Outcome> {
    let angles: Vec<f64> = [0.0f64, 22.5, 45.0, 67.5, 90.0].iter().map(|d| d.to_radians()).collect();
    let three = input_independence_check(&config(), &Scenario::Threefold, &angles, &LO)?;
    let four = input_independence_check(&config(), &Scenario::Fourfold, &angles, &LO)?;
    outcome(three <= 1e-6 && four <= 1e-6, format!("spread threefold {three:.1e}, fourfold {four:.1e}"))
}

fn tomography(_: Instant) -> Result<Outcome> {
    let rho = leading_order(&config(), &Scenario::Threefold, &LO)?.rho3;
    let settings: Vec<TomographySetting> =
        AnalyzerBasis::ALL.iter().map(|&basis| TomographySetting { basis, shots: Shots::Exact, seed: 0 }).collect();
    let table = tomography_probabilities(&rho, &settings)?;
    let exact = reconstruct(&TomographyData::Exact(table.clone()), Some(&rho))?.vacuum_weight_estimate;
    let sampled = reconstruct(&TomographyData::Counts(sample_counts(&table, 100_000, 2024)?), Some(&rho))?.vacuum_weight_estimate;
    outcome(
        (exact - 0.5).abs() <= 1e-6 && (sampled - 0.5).abs() <= 0.01,
        format!("vacuum weight exact {exact:.9}, 1e5 shots {sampled:.5}"),
    )
}

fn oracle_equivalence(_: Instant) -> Result<Outcome> {
    let c = SetupConfig { cutoff: 4, coupling_i: 0.05, coupling_ii: 0.03, input_polarization: PI / 7.0, ..config() };
    let app = Apparatus::build(&c)?;
    let (mut dp, mut df, mut dp_rel) = (0.0f64, 0.0f64, 0.0f64);
    for s in scenarios() {
        let a = app.evaluate(&s, c.coupling_i, c.coupling_ii)?;
        let b = oracle::evaluate(&c, &s, c.coupling_i, c.coupling_ii)?;
        dp = dp.max((a.probability - b.probability).abs());
        dp_rel = dp_rel.max((a.probability - b.probability).abs() / b.probability);
        df = df.max((a.fidelity - b.fidelity).abs()).max((a.vacuum_weight - b.vacuum_weight).abs());
    }
    outcome(
        dp.max(df) <= 1e-10,
        format!("{} scenarios at cutoff 4: max |dP|={dp:.1e} (relative {dp_rel:.1e}), max |dF|={df:.1e}", scenarios().len()),
    )
}

fn invariant_suite(_: Instant) -> Result<Outcome> {
    let report = run_suite(&config(), SuiteOptions { seed: 1, ..SuiteOptions::default() })?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    outcome(
        report.all_passed() && report.seconds < 60.0,
        format!("{} checks, failing: {:?}, {:.2}s", report.checks.len(), failed, report.seconds),
    )
}

type Criterion = (&'static str, fn(Instant) -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("threefold fidelity is one half", threefold_half),
        ("fourfold fidelity is one", fourfold_unity),
        ("threefold equals the classical baseline", baseline_equality),
        ("number resolution at p restores fidelity", number_resolution),
        ("QND at Bob restores fidelity", qnd_at_bob),
        ("coupling ratio raises fidelity", coupling_ratio),
        ("fidelity is independent of the input", input_independence),
        ("tomography detects the vacuum admixture", tomography),
        ("sparse pipeline matches the dense oracle", oracle_equivalence),
        ("structural invariant suite", invariant_suite),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match run(start) {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {}: {name}: {detail} [{:.2}s]", k + 1, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
