use aces_core::channels::PauliChannel;
use aces_core::rb::{depolarizing_rb_alpha, fidelity_irb, run_rb_experiment, RbConfig};
use aces_core::simulator::{GateKey, NoiseModel};
use approx::assert_abs_diff_eq;

#[test]
fn noiseless_rb_survives() {
    let nm = NoiseModel::noiseless(2).unwrap();
    let cfg = RbConfig {
        qubits: vec![0, 1],
        depths: vec![1, 5, 10],
        circuits_per_depth: 3,
        shots: 100,
        interleave: true,
    };
    let r = run_rb_experiment(&nm, &cfg, 1).unwrap();
    assert!(r.mean.iter().all(|&m| (m - 1.0).abs() < 1e-12), "{:?}", r.mean);
}

#[test]
fn depolarizing_irb_recovers_cz_fidelity() {
    let lam_1q = 0.998;
    let lam_cz = 0.97;
    let mut nm = NoiseModel::new(2).unwrap();
    for q in 0..2 {
        let ch = PauliChannel::depolarizing(1, (1.0 - lam_1q) / 4.0).unwrap();
        nm.set_gate(GateKey::SqrtX(q), ch.clone()).unwrap();
        nm.set_gate(GateKey::S(q), ch).unwrap();
    }
    nm.set_gate(GateKey::cz(0, 1), PauliChannel::depolarizing(2, (1.0 - lam_cz) / 16.0).unwrap())
        .unwrap();
    let mut cfg = RbConfig {
        qubits: vec![0, 1],
        depths: vec![1, 3, 6, 10, 15, 25],
        circuits_per_depth: 10,
        shots: 256,
        interleave: false,
    };
    let reference = run_rb_experiment(&nm, &cfg, 4).unwrap();
    cfg.interleave = true;
    let int = run_rb_experiment(&nm, &cfg, 5).unwrap();
    let f = fidelity_irb(int.fit.alpha, reference.fit.alpha).unwrap();
    // a depolarizing channel with eigenvalue λ has fidelity 1 − ¾(1 − λ)
    let planted = 1.0 - 0.75 * (1.0 - lam_cz);
    assert!((f - planted).abs() < 0.005, "{f} vs {planted}");
    // reference decay agrees with the group-averaged prediction
    let want = depolarizing_rb_alpha(2, lam_1q, lam_cz);
    assert_abs_diff_eq!(reference.fit.alpha, want, epsilon = 0.01);
}
