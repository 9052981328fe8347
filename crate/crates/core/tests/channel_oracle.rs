//! Statistical checks of the channel model and the arm-mean oracle against
//! independent references.

use d2d_bandit::channel::{db_to_linear, draw_channel, draw_large_scale, path_loss_db, ChannelConfig, LargeScaleGains};
use d2d_bandit::metrics::{estimate_arm_means, ArmMeansOracle, LogSchedule, MetricsAccumulator};
use d2d_bandit::phy::{arbitrate, PhyConfig, RewardModel};
use d2d_bandit::seeds;
use d2d_bandit::topology::generate_topology;

/// Adaptive Simpson quadrature.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn gain(distance_m: f64) -> f64 {
    db_to_linear(-path_loss_db(distance_m).unwrap())
}

/// Expected normalized reward of a lone D2D pair on a single CU with
/// exponential fading on all four links, by nested one-dimensional integrals.
///
/// With a = P_c L_cB / gamma and b = noise at the BS, the granted power P
/// satisfies P(P > p) = exp(-b/a) / (1 + L_dB p / a) below P_max, with an
/// atom at P_max. Given P = p, the D2D SINR S exceeds z with probability
/// exp(-z s / (p L_d)) / (1 + k z / (p L_d)), s = D2D noise, k = P_c L_cd,
/// and E[min(B log2(1+S) / r_norm, 1)] is the integral of that tail against
/// B / (r_norm ln2 (1+z)) up to the saturation SINR.
fn quadrature_mean(l: &LargeScaleGains, phy: &PhyConfig) -> f64 {
    let (l_cb, l_db, l_d, l_cd) = (l.cu_bs[0], l.d2d_bs[0], l.d2d_link[0], l.cu_d2d[0]);
    let a = phy.p_c * l_cb / phy.gamma_tgt;
    let b = phy.noise_bs;
    let s = phy.noise_d2d;
    let k = phy.p_c * l_cd;
    let z_cap = 2f64.powf(phy.r_norm / phy.bandwidth) - 1.0;
    let scale = phy.bandwidth / (phy.r_norm * std::f64::consts::LN_2);

    // z = e^t - 1 turns dz / (1 + z) into dt.
    let reward_given_power = |p: f64| -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let tail = |t: f64| {
            let z = t.exp_m1();
            (-z * s / (p * l_d)).exp() / (1.0 + k * z / (p * l_d))
        };
        scale * simpson(&tail, 0.0, (1.0 + z_cap).ln(), 1e-12)
    };

    let granted = (-b / a).exp();
    let density = |p: f64| granted * (l_db / a) / (1.0 + l_db * p / a).powi(2);
    // p = P_max x^2 concentrates nodes near zero power.
    let body = simpson(
        &|x: f64| {
            let p = phy.p_max * x * x;
            reward_given_power(p) * density(p) * 2.0 * phy.p_max * x
        },
        0.0,
        1.0,
        1e-10,
    );
    let atom = granted / (1.0 + l_db * phy.p_max / a);
    body + atom * reward_given_power(phy.p_max)
}

#[test]
fn single_cu_oracle_matches_quadrature() {
    let phy = PhyConfig::default();
    let cfg = ChannelConfig {
        shadowing_std_db: 0.0,
        ..ChannelConfig::default()
    };
    let cases = [
        // (CU-BS, D2D tx-BS, D2D link, CU to D2D rx) in meters
        (150.0, 200.0, 30.0, 226.7),
        (240.0, 60.0, 45.0, 120.0),
        (80.0, 230.0, 10.0, 40.0),
    ];
    for (d_cb, d_db, d_d, d_cd) in cases {
        let large = LargeScaleGains {
            n_cu: 1,
            n_d2d: 1,
            cu_bs: vec![gain(d_cb)],
            d2d_bs: vec![gain(d_db)],
            d2d_link: vec![gain(d_d)],
            cu_d2d: vec![gain(d_cd)],
        };
        let exact = quadrature_mean(&large, &phy);
        let mc = estimate_arm_means(&large, &phy, &cfg, 100_000, 2024, RewardModel::Normalized).unwrap();
        let (mean, se) = (mc.mu(0, 0), mc.stderr(0, 0));
        assert!(se > 0.0);
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "distances {:?}: monte carlo {mean} +- {se}, quadrature {exact}",
            (d_cb, d_db, d_d, d_cd)
        );
        assert!(exact > 0.01 && exact < 0.99, "case should exercise an interior mean, got {exact}");
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn fading_is_stationary_across_windows() {
    let topo = generate_topology(20, 5, 250.0, 50.0, 99).unwrap();
    let cfg = ChannelConfig::default();
    let large = draw_large_scale(&topo, &cfg).unwrap();
    let fading = seeds::derive(7, seeds::FADING, 0);
    let window = 10_000u64;
    let critical = 1.628 * (2.0 / window as f64).sqrt();
    let collect = |start: u64, pick: &dyn Fn(&d2d_bandit::channel::ChannelDraw) -> f64| -> Vec<f64> {
        (start..start + window)
            .map(|n| pick(&draw_channel(&large, &cfg, fading, n)))
            .collect()
    };
    let links: [(&str, &dyn Fn(&d2d_bandit::channel::ChannelDraw) -> f64); 3] = [
        ("g_d", &|c| c.g_d(2)),
        ("g_cB", &|c| c.g_cb(11)),
        ("g_cd", &|c| c.g_cd(4, 1)),
    ];
    for (name, pick) in links {
        let d = ks_statistic(collect(1, pick), collect(50_001, pick));
        assert!(d < critical, "{name}: KS statistic {d} >= {critical}");
    }
}

#[test]
fn best_arm_player_has_vanishing_regret() {
    // One pair always on its oracle-best CU never collides, so its def2
    // regret per subframe averages to zero.
    let phy = PhyConfig::default();
    let cfg = ChannelConfig::default();
    let topo = generate_topology(5, 1, 250.0, 50.0, 31).unwrap();
    let large = draw_large_scale(&topo, &cfg).unwrap();
    let oracle: ArmMeansOracle =
        estimate_arm_means(&large, &phy, &cfg, 200_000, 5, RewardModel::Normalized).unwrap();
    let best = oracle.best_arm[0];
    let horizon = 2_000u64;
    let per_run: Vec<f64> = (0..50u64)
        .map(|r| {
            let fading = seeds::derive(seeds::run_seed(topo.seed, r), seeds::FADING, 0);
            let schedule = LogSchedule { every: horizon, head: 0, horizon };
            let mut acc = MetricsAccumulator::new(oracle.clone(), phy, schedule, false, false, 0);
            for n in 1..=horizon {
                let ch = draw_channel(&large, &cfg, fading, n);
                acc.push(&arbitrate(n, vec![best], &ch, &phy, RewardModel::Normalized).unwrap()).unwrap();
            }
            acc.finish().regret_def2.last().copied().unwrap() / horizon as f64
        })
        .collect();
    let n = per_run.len() as f64;
    let mean = per_run.iter().sum::<f64>() / n;
    let var = per_run.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // run noise plus the oracle's own estimation error
    let se = (var / n + oracle.stderr(0, best).powi(2)).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean per-subframe regret {mean}, 3 se = {}", 3.0 * se);
}
