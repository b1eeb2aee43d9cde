use std::f64::consts::PI;

use aces_core::channels::{damping_measurement_model, symmetrize_confusion_via_twirl, ConfusionMatrix, PauliChannel};
use aces_core::circuits::{inject_coherent_error, Circuit, GateOp};
use aces_core::pauli::PauliString;
use aces_core::simulator::{
    apply_confusion, estimate_confusion, mem_mitigate, run_exact, run_shots, Experiment, GateKey, NoiseModel,
    OutcomeDistribution,
};
use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn body(cz: usize) -> Circuit {
    let mut c = Circuit::new(2);
    c.push(GateOp::sqrt_x(0)).push(GateOp::sqrt_x(1));
    for _ in 0..cz {
        c.push(GateOp::s(0)).push(GateOp::cz(0, 1)).push(GateOp::sqrt_x(1));
    }
    c
}

fn noisy_model() -> NoiseModel {
    let mut nm = aces_core::models::device_table();
    let (_, conf) = damping_measurement_model(0.1, 1.0).unwrap();
    nm.set_readout(1, conf).unwrap();
    nm
}

#[test]
fn per_shot_twirl_matches_exact_twirl() {
    let c = inject_coherent_error(&body(3), 0.3, 1).unwrap();
    let exp = Experiment::from_circuit(&c).unwrap();
    let nm = noisy_model();
    let exact = run_exact(&exp, &nm, true).unwrap();
    let n = 10_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mc = run_shots(&exp, &nm, n, &mut rng, true).unwrap();
    let tvd = mc.total_variation(&exact);
    assert!(tvd < 5.0 / (n as f64).sqrt(), "tvd {tvd}");
    // the untwirled distribution is genuinely different here
    assert!(run_exact(&exp, &nm, false).unwrap().total_variation(&exact) > 0.02);
}

#[test]
fn twirled_rz_equals_planted_phase_flip() {
    let theta = 0.07 * 2.0 * PI;
    let s = (theta / 2.0).sin().powi(2);
    let base = aces_core::models::device_table();
    // independent oracle: compose the CZ channel with an explicit IZ flip
    let mut rates = vec![0.0; 15];
    rates[PauliString::from_index(2, 3).index() - 1] = s;
    let flip = PauliChannel::from_error_rates(2, &rates).unwrap();
    let key = GateKey::cz(0, 1);
    let planted_cz = base.gate(&key).unwrap().compose(&flip).unwrap();
    let planted = base.clone().with_gate(key, planted_cz).unwrap();

    let c = body(4);
    let injected = Experiment::from_circuit(&inject_coherent_error(&c, theta, 1).unwrap()).unwrap();
    let plain = Experiment::from_circuit(&c).unwrap();
    let a = run_exact(&injected, &base, true).unwrap();
    let b = run_exact(&plain, &planted, true).unwrap();
    for (x, y) in a.probs.iter().zip(&b.probs) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
}

#[test]
fn prepared_pauli_round_trips_without_noise() {
    let nm = NoiseModel::noiseless(2).unwrap();
    let empty = Circuit::new(2);
    for p in PauliString::non_identity(2) {
        let (exp, sign) = Experiment::pauli_measurement(&empty, &p, &p).unwrap();
        let d = run_exact(&exp, &nm, false).unwrap();
        let mask = (0..2).filter(|&q| p.get(q) != aces_core::pauli::Pauli::I).fold(0, |m, q| m | (1 << (1 - q)));
        assert_abs_diff_eq!(sign.to_f64() * d.parity_expectation(mask), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn mem_inverts_readout_exactly() {
    let ideal = OutcomeDistribution::new(vec![0, 1], vec![0.5, 0.1, 0.15, 0.25]).unwrap();
    let confs = [ConfusionMatrix::bit_flip(0.02).unwrap(), ConfusionMatrix::bit_flip(0.05).unwrap()];
    let noisy = apply_confusion(&ideal, &confs).unwrap();
    let back = mem_mitigate(&noisy, &ConfusionMatrix::tensor(&confs), false).unwrap();
    for (x, y) in back.probs.iter().zip(&ideal.probs) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
}

#[test]
fn measurement_twirl_symmetrizes_damping() {
    let (ptm, conf) = damping_measurement_model(0.1, 1.0).unwrap();
    // oracle: average of C and its bit-flipped conjugate
    let m = conf.matrix();
    let sym = symmetrize_confusion_via_twirl(&ptm).unwrap();
    for t in 0..2 {
        for o in 0..2 {
            let want = 0.5 * (m[(t, o)] + m[(1 - t, 1 - o)]);
            assert_abs_diff_eq!(sym.get(t, o), want, epsilon = 1e-12);
        }
    }
    let mut nm = NoiseModel::noiseless(1).unwrap();
    nm.set_readout(0, conf).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = estimate_confusion(&nm, &[0], 10_000, &mut rng, false).unwrap();
    let tw = estimate_confusion(&nm, &[0], 10_000, &mut rng, true).unwrap();
    assert!(raw.asymmetry() > 0.08, "{}", raw.asymmetry());
    assert!(tw.asymmetry() < 0.012, "{}", tw.asymmetry());
}

#[test]
fn prep_flip_scales_z_expectation() {
    let mut nm = NoiseModel::noiseless(1).unwrap();
    nm.set_prep_flip(0, 0.1).unwrap();
    let exp = Experiment::from_circuit(&Circuit::new(1)).unwrap();
    let d = run_exact(&exp, &nm, false).unwrap();
    assert_abs_diff_eq!(d.probs[1], 0.1, epsilon = 1e-12);
}
