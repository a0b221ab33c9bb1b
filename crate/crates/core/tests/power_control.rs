use hetnet_core::channel::draw_channels;
use hetnet_core::downlink::{
    mu_fixed_point, optimal_rho, rzf_device_powers, rzf_power_from_weights, rzf_total_power_at, solve_dl,
};
use hetnet_core::montecarlo::{run_trials, run_ul_trials};
use hetnet_core::precoding::{instantaneous_dl_sinr, projector, zf_precoder};
use hetnet_core::{
    DeviceKind, DlTargets, LinkLayout, NulledSca, Scheme, ServedDevice, solve_ul_fixed_point, UlOptions,
};

fn device(kind: DeviceKind, id: usize, gamma: f64, tau_sq: f64, gain: f64) -> ServedDevice {
    ServedDevice {
        kind,
        id,
        gamma,
        tau_sq,
        gain,
        azimuth: 0.0,
    }
}

fn two_plus_one(n: usize, tau_sq: f64) -> LinkLayout {
    LinkLayout {
        n_antennas: n,
        noise_w: 1e-13,
        served: vec![
            device(DeviceKind::Mue, 0, 2.0, tau_sq, 3e-12),
            device(DeviceKind::Sca, 1, 7.0, 0.0, 4e-11),
        ],
        nulled: vec![NulledSca {
            id: 0,
            gain_bs: 2e-11,
            gain_access: 1e-9,
            cross: vec![5e-12, 1e-13],
            gamma_s: 10.84,
            azimuth: 0.0,
        }],
    }
}

#[test]
fn uplink_small_instance_meets_targets() {
    let layout = two_plus_one(512, 0.0);
    let ul = solve_ul_fixed_point(&layout, UlOptions::default()).unwrap();
    assert!(ul.feasible);
    let st = run_ul_trials(&layout, &ul, 200, 4).unwrap();
    assert!(st.ul_device_err < 0.05, "{}", st.ul_device_err);
    assert!((st.ul_ratio_mean - 1.0).abs() < 0.05);
}

#[test]
fn uplink_powers_grow_with_csi_error() {
    let mut last = vec![0.0; 2];
    for tau_sq in [0.0, 0.1, 0.3, 0.5] {
        let ul = solve_ul_fixed_point(&two_plus_one(64, tau_sq), UlOptions::default()).unwrap();
        assert!(ul.feasible);
        assert!(ul.powers[0] > last[0], "τ² = {tau_sq}");
        last = ul.powers.clone();
    }
}

#[test]
fn powers_scale_with_noise() {
    let base = two_plus_one(64, 0.2);
    let loud = LinkLayout {
        noise_w: base.noise_w * 10.0,
        ..base.clone()
    };
    let a = solve_ul_fixed_point(&base, UlOptions::default()).unwrap();
    let b = solve_ul_fixed_point(&loud, UlOptions::default()).unwrap();
    for (x, y) in a.powers.iter().zip(&b.powers).chain(a.sca_dl_powers.iter().zip(&b.sca_dl_powers)) {
        assert!((y / x - 10.0).abs() < 1e-6, "{x:e} {y:e}");
    }
    for scheme in [Scheme::Rzf, Scheme::Zf, Scheme::Stc] {
        let pa = solve_dl(&DlTargets::from_layout(&base).unwrap(), scheme).unwrap().total_power;
        let pb = solve_dl(&DlTargets::from_layout(&loud).unwrap(), scheme).unwrap().total_power;
        assert!((pb / pa - 10.0).abs() < 1e-9);
    }
}

fn targets(seed: u64) -> DlTargets {
    // a deterministic spread of targets and gains
    let k = 40;
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64
    };
    let gammas: Vec<f64> = (0..k).map(|_| 0.5 + 3.0 * next()).collect();
    let tau: Vec<f64> = (0..k).map(|i| if i < 30 { 0.1 } else { 0.0 }).collect();
    let gains: Vec<f64> = (0..k).map(|_| 1e-12 * (1.0 + 50.0 * next())).collect();
    let is_mue = (0..k).map(|i| i < 30).collect();
    DlTargets::new(gammas, tau, gains, is_mue, 0.3, 0.05, 4e-14).unwrap()
}

#[test]
fn optimal_regularizer_minimizes_power() {
    for seed in 0..5 {
        let t = targets(seed);
        let rho = optimal_rho(t.gamma_bar, t.c, t.c_s).unwrap();
        let mu = mu_fixed_point(t.c, t.c_s, rho).unwrap();
        assert!((mu / t.gamma_bar - 1.0).abs() < 1e-12);
        let at_opt = rzf_total_power_at(&t, rho).unwrap().unwrap();
        for f in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
            if let Some(p) = rzf_total_power_at(&t, rho * f).unwrap() {
                assert!(p > at_opt, "seed {seed}, factor {f}");
            }
        }
        // the closed form at the optimum
        let closed = t.c * t.noise_w * t.a / (rho * t.gamma_bar - t.c * t.b);
        assert!((closed / at_opt - 1.0).abs() < 1e-10);
    }
}

#[test]
fn weights_reproduce_total_at_any_regularizer() {
    let t = targets(9);
    let rho_star = optimal_rho(t.gamma_bar, t.c, t.c_s).unwrap();
    for f in [0.7, 1.0, 1.6] {
        let rho = rho_star * f;
        let total = rzf_total_power_at(&t, rho).unwrap().unwrap();
        let mu = mu_fixed_point(t.c, t.c_s, rho).unwrap();
        let p = rzf_device_powers(&t, mu, total);
        let back = rzf_power_from_weights(&t, rho, &p).unwrap();
        assert!((back / total - 1.0).abs() < 1e-10, "factor {f}");
    }
}

#[test]
fn scheme_ordering() {
    let t = targets(2);
    let rzf = solve_dl(&t, Scheme::Rzf).unwrap().total_power;
    let zf = solve_dl(&t, Scheme::Zf).unwrap().total_power;
    assert!(rzf < zf);
    // with perfect CSI and large targets the regularizer vanishes and RZF becomes ZF
    let high = DlTargets::new(vec![1e4; 10], vec![0.0; 10], vec![1e-12; 10], vec![true; 10], 0.2, 0.1, 1e-13).unwrap();
    let a = solve_dl(&high, Scheme::Rzf).unwrap().total_power;
    let b = solve_dl(&high, Scheme::Zf).unwrap().total_power;
    assert!((a / b - 1.0).abs() < 1e-3);
}

#[test]
fn exact_zero_forcing_with_perfect_csi() {
    let n = 40;
    let served: Vec<ServedDevice> = (0..30)
        .map(|k| device(DeviceKind::Mue, k, 0.5 + 0.1 * k as f64, 0.0, 1e-12 * (1.0 + k as f64)))
        .collect();
    let nulled = (0..6)
        .map(|s| NulledSca {
            id: s,
            gain_bs: 1e-11,
            gain_access: 1e-9,
            cross: vec![1e-13; 30],
            gamma_s: 10.0,
            azimuth: 0.0,
        })
        .collect();
    let layout = LinkLayout {
        n_antennas: n,
        noise_w: 1e-13,
        served,
        nulled,
    };
    let powers: Vec<f64> = layout.served.iter().map(|d| d.gamma * layout.noise_w).collect();
    for trial in 0..20 {
        let ch = draw_channels(&layout, 1, trial, None).unwrap();
        let t = projector(&ch.h_nulled).unwrap();
        let (v, _) = zf_precoder(&ch.h_hat, &t).unwrap();
        let (sinr, _) = instantaneous_dl_sinr(&ch.h, &v, &powers, layout.noise_w);
        for (s, d) in sinr.iter().zip(&layout.served) {
            assert!((s / d.gamma - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn downlink_simulation_matches_analytic_power() {
    let layout = two_plus_one(256, 0.1);
    let ul = solve_ul_fixed_point(&layout, UlOptions::default()).unwrap();
    let dl = solve_dl(&DlTargets::from_layout(&layout).unwrap(), Scheme::Rzf).unwrap();
    let res = run_trials(&layout, Some(&ul), Some(&dl), None, 2, 0, 100).unwrap();
    let mean_power = res.iter().map(|r| r.dl_power).sum::<f64>() / res.len() as f64;
    assert!((mean_power / dl.total_power - 1.0).abs() < 0.05);
    assert!(res.iter().all(|r| r.nulling_residual < 1e-8));
}
