//! End-to-end acceptance suite. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stdout (not captured by the harness) and then asserts.
//!
//! The reference-scale experiment (4 policies x 10 topologies x 50 runs x
//! 10^5 subframes) is computed once and shared by criteria 1 and 5 to 9.

use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use d2d_bandit::channel::ChannelDraw;
use d2d_bandit::harness::{emit_outputs, run_experiment, Experiment, ExperimentConfig, MeanSe, PolicyAggregate};
use d2d_bandit::phy::{allocate_power, cu_sinr, PhyConfig};
use d2d_bandit::policies::{
    build_policy, exp3_probabilities, exp3_update, lcb_index, ucb1_index, PolicyConfig, PolicyKind,
};

fn report(n: u32, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn reference() -> &'static Experiment {
    static REFERENCE: OnceLock<Experiment> = OnceLock::new();
    REFERENCE.get_or_init(|| {
        let start = std::time::Instant::now();
        let e = run_experiment(&ExperimentConfig::default(), workers()).expect("reference experiment runs");
        let mut out = std::io::stdout().lock();
        let _ = writeln!(
            out,
            "reference experiment: {} runs in {:.0} s on {} worker(s)",
            e.records.len(),
            start.elapsed().as_secs_f64(),
            workers()
        );
        e
    })
}

fn agg(e: &Experiment, kind: PolicyKind) -> &PolicyAggregate {
    e.aggregate(kind).expect("policy present")
}

fn combined_se(a: MeanSe, b: MeanSe) -> f64 {
    (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

/// `a - b` in units of the combined standard error.
fn z_gap(a: MeanSe, b: MeanSe) -> f64 {
    let se = combined_se(a, b);
    if se == 0.0 {
        return if a.mean > b.mean { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    (a.mean - b.mean) / se
}

fn mean_collision(e: &Experiment, kind: PolicyKind) -> MeanSe {
    agg(e, kind).mean_collision_pct(&e.records_of(kind))
}

const INDEX_POLICIES: [PolicyKind; 3] = [PolicyKind::MpUcb1, PolicyKind::Dlf, PolicyKind::KthUcb1];
const MULTI: [PolicyKind; 4] = [PolicyKind::MpUcb1, PolicyKind::Dlf, PolicyKind::KthUcb1, PolicyKind::Exp3];

#[test]
fn criterion_01_cu_protection() {
    let e = reference();
    let (mut reuses, mut bad) = (0, 0);
    for kind in MULTI {
        let c = agg(e, kind).checks;
        reuses += c.reuses;
        bad += c.unprotected_reuses;
    }
    let pass = bad == 0 && reuses > 0;
    report(1, pass, &format!("{reuses} power-allocated reuses, {bad} with CU SINR more than 1 ulp below target"));
    assert!(pass);
}

/// Largest power keeping the CU at the SINR target, found by bisection on
/// the SINR constraint itself, then capped and gated as the BS does.
fn bisection_power(phy: &PhyConfig, g_cb: f64, g_db: f64) -> f64 {
    let sinr = |p: f64| phy.p_c * g_cb / (phy.noise_bs + p * g_db);
    if !(phy.p_c * g_cb / phy.noise_bs > phy.gamma_tgt) {
        return 0.0;
    }
    let mut hi = 1.0;
    while sinr(hi) >= phy.gamma_tgt {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sinr(mid) >= phy.gamma_tgt {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.min(phy.p_max)
}

#[test]
fn criterion_02_power_allocation_oracle() {
    let phy = PhyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut worst, mut granted, mut capped, mut refused) = (0.0f64, 0, 0, 0);
    let tuples = 10_000;
    for _ in 0..tuples {
        // log-uniform gains spanning the cell's path-loss range and deep fades
        let g_cb = 10f64.powf(rng.random_range(-16.0..-7.0));
        let g_db = 10f64.powf(rng.random_range(-16.0..-7.0));
        let ch = ChannelDraw {
            subframe: 0,
            n_d2d: 1,
            cu_bs: vec![g_cb],
            d2d_bs: vec![g_db],
            d2d_link: vec![1e-9],
            cu_d2d: vec![1e-12],
        };
        let got = allocate_power(0, 0, &ch, false, &phy);
        let want = bisection_power(&phy, g_cb, g_db);
        let err = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(err);
        if got == 0.0 {
            refused += 1;
        } else if got == phy.p_max {
            capped += 1;
        } else {
            granted += 1;
            assert!(cu_sinr(0, 0, got, &ch, &phy) >= phy.gamma_tgt);
        }
    }
    let pass = worst <= 1e-9 && granted > 0 && capped > 0 && refused > 0;
    report(
        2,
        pass,
        &format!("{tuples} tuples ({granted} interior, {capped} capped, {refused} refused), max relative error {worst:.3e}"),
    );
    assert!(pass);
}

fn close12(x: f64, want: f64) -> bool {
    (x - want).abs() <= 5e-13 * want.abs().max(1e-300)
}

#[test]
fn criterion_03_index_tables() {
    let mut misses = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !close12(got, want) {
            misses.push(format!("{name}: {got} vs {want}"));
        }
    };
    // (mean, count, subframe, ucb, lcb)
    let table = [
        (0.5, 10, 100, 1.45970518243761624, -0.459705182437616242),
        (0.9, 1, 21, 3.36759901026217104, -1.567599010262171),
        (0.25, 400, 100_000, 0.48992629560940406, 0.0100737043905959396),
        (0.0, 3, 7, 1.13897911864245439, -1.13897911864245439),
        (1.0, 50, 2000, 1.55139468476009387, 0.448605315239906131),
    ];
    for (m, y, n, u, l) in table {
        check("ucb1", ucb1_index(m, y, n).unwrap(), u);
        check("lcb", lcb_index(m, y, n).unwrap(), l);
    }
    let p = exp3_probabilities(&[2.0, 1.0, 1.0], 0.01).unwrap();
    check("p[0]", p[0], 0.498333333333333333);
    check("p[1]", p[1], 0.250833333333333333);
    let p = exp3_probabilities(&[1.0, 3.0, 5.0, 7.0], 0.1).unwrap();
    for (got, want) in p.iter().zip([0.08125, 0.19375, 0.30625, 0.41875]) {
        check("p4", *got, want);
    }
    let p = exp3_probabilities(&[1.0; 20], 0.01).unwrap();
    check("p20", p[7], 0.05);

    let mut w = vec![1.0; 20];
    exp3_update(&mut w, 3, 1.0, &[0.05; 20], 0.01).unwrap();
    check("w20", w[3], 1.01005016708416806);
    let mut w = vec![2.0, 1.0, 1.0];
    exp3_update(&mut w, 0, 1.0, &[0.66, 0.17, 0.17], 0.01).unwrap();
    check("w3", w[0], 2.01012656069863957);
    let mut w = vec![1.5, 1.0, 1.0, 1.0];
    exp3_update(&mut w, 0, 0.5, &[0.2, 0.3, 0.3, 0.2], 0.1).unwrap();
    check("w4", w[0], 1.59674168837678914);

    let pass = misses.is_empty();
    report(3, pass, &format!("26 table entries, {} outside 12 significant digits {misses:?}", misses.len()));
    assert!(pass);
}

#[test]
fn criterion_04_single_player_ucb1() {
    let means = [0.9, 0.5, 0.1];
    let (t_short, t_long) = (10_000u64, 100_000u64);
    let mut good = 0;
    let mut worst_ratio = 1.0f64;
    let mut worst_fraction = 1.0f64;
    for seed in 0..100u64 {
        let mut cfg = PolicyConfig::new(PolicyKind::Ucb1);
        cfg.seed = seed;
        let mut p = build_policy(&cfg, 0, 1, 3).unwrap();
        let mut env = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let (mut pseudo, mut at_short) = (0.0, 0.0);
        for n in 1..=t_long {
            let a = p.select(n).unwrap();
            let x = if env.random::<f64>() < means[a] { 1.0 } else { 0.0 };
            p.observe(a, x).unwrap();
            pseudo += means[0] - means[a];
            if n == t_short {
                at_short = pseudo;
            }
        }
        let r_short = at_short / (t_short as f64).ln();
        let r_long = pseudo / (t_long as f64).ln();
        let ratio = r_long / r_short;
        let fraction = p.state().counts[0] as f64 / t_long as f64;
        if (ratio - 1.0).abs() <= 0.2 && fraction > 0.95 {
            good += 1;
        }
        if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = ratio;
        }
        worst_fraction = worst_fraction.min(fraction);
    }
    let pass = good >= 95;
    report(
        4,
        pass,
        &format!("{good}/100 seeds within +-20% and >95% best-arm pulls (worst ratio {worst_ratio:.3}, worst fraction {worst_fraction:.4})"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_initialization_and_ranks() {
    let e = reference();
    let mut init_collisions = 0;
    let mut rank_violations = 0;
    for kind in INDEX_POLICIES {
        init_collisions += agg(e, kind).checks.init_collisions;
    }
    for kind in [PolicyKind::Dlf, PolicyKind::KthUcb1] {
        rank_violations += agg(e, kind).checks.rank_violations;
    }
    let subframes: u64 = e.config.horizon * e.config.total_runs();
    let pass = init_collisions == 0 && rank_violations == 0;
    report(
        5,
        pass,
        &format!(
            "{init_collisions} collisions in subframes 1..N_C over {} index-policy runs, {rank_violations} non-permutation rank vectors over {} ranked subframes",
            3 * e.config.total_runs(),
            2 * subframes
        ),
    );
    assert!(pass);
}

fn def3_ordering(e: &Experiment) -> (bool, String) {
    let kth = agg(e, PolicyKind::KthUcb1).final_regret_def3().unwrap();
    let dlf = agg(e, PolicyKind::Dlf).final_regret_def3().unwrap();
    let z = z_gap(kth, dlf);
    (
        z > 2.0,
        format!(
            "kth-UCB1 {:.1} +- {:.1} vs DLF {:.1} +- {:.1} (gap {z:.2} combined se)",
            kth.mean, kth.stderr, dlf.mean, dlf.stderr
        ),
    )
}

#[test]
fn criterion_06_ranked_regret_ordering() {
    let (reference_ok, reference_detail) = def3_ordering(reference());
    let ci = ExperimentConfig {
        horizon: 20_000,
        mc_topologies: 10,
        mc_runs_per_topology: 3,
        policy: vec![PolicyKind::Dlf, PolicyKind::KthUcb1],
        ..ExperimentConfig::default()
    };
    let start = std::time::Instant::now();
    let (ci_ok, ci_detail) = def3_ordering(&run_experiment(&ci, workers()).unwrap());
    let ci_secs = start.elapsed().as_secs_f64();
    let pass = reference_ok && ci_ok && ci_secs < 600.0;
    report(
        6,
        pass,
        &format!("reference scale: {reference_detail}; reduced profile ({ci_secs:.0} s): {ci_detail}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_collision_ordering() {
    let e = reference();
    let [mp, dlf, kth, exp3] = MULTI.map(|k| mean_collision(e, k));
    let gaps = [
        ("kth-UCB1 - DLF", z_gap(kth, dlf)),
        ("DLF - MP-UCB1", z_gap(dlf, mp)),
        ("DLF - Exp3", z_gap(dlf, exp3)),
        ("kth-UCB1 - Exp3", z_gap(kth, exp3)),
    ];
    let pass = gaps.iter().all(|g| g.1 > 2.0);
    report(
        7,
        pass,
        &format!(
            "collision % MP-UCB1 {:.3}, DLF {:.3}, kth-UCB1 {:.3}, Exp3 {:.3}; gaps in combined se {:?}",
            mp.mean,
            dlf.mean,
            kth.mean,
            exp3.mean,
            gaps.map(|g| format!("{} {:.2}", g.0, g.1))
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_throughput_claims() {
    let e = reference();
    let mp = agg(e, PolicyKind::MpUcb1).long_run_tput_d2d;
    let a_ok = MULTI[1..].iter().all(|&k| mp.mean >= agg(e, k).long_run_tput_d2d.mean);
    let b_ok = MULTI
        .iter()
        .all(|&k| agg(e, k).long_run_tput_d2d.mean > agg(e, k).long_run_tput_cu.mean);
    let slopes: Vec<(PolicyKind, MeanSe)> = MULTI.iter().map(|&k| (k, agg(e, k).cu_tput_slope)).collect();
    let c_ok = slopes.iter().all(|(_, s)| s.mean.abs() <= 2.0 * s.stderr);
    let table: Vec<String> = MULTI
        .iter()
        .map(|&k| {
            let a = agg(e, k);
            format!("{k} d2d {:.0} cu {:.0}", a.long_run_tput_d2d.mean, a.long_run_tput_cu.mean)
        })
        .collect();
    let slope_text: Vec<String> = slopes
        .iter()
        .map(|(k, s)| format!("{k} {:.3e} +- {:.3e}", s.mean, s.stderr))
        .collect();
    let pass = a_ok && b_ok && c_ok;
    report(
        8,
        pass,
        &format!("(a) {a_ok} (b) {b_ok} (c) {c_ok}; long-run bit/s {table:?}; CU slope bit/s per subframe {slope_text:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_fairness() {
    let e = reference();
    let fair = |k: PolicyKind| -> Vec<f64> { agg(e, k).fairness_pct.iter().map(|m| m.mean).collect() };
    let spread = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let spreads: Vec<(PolicyKind, f64)> = MULTI.iter().map(|&k| (k, spread(&fair(k)))).collect();
    let equal_ok = spreads.iter().all(|s| s.1 < 5.0);
    let mp = fair(PolicyKind::MpUcb1);
    let (dlf, kth) = (fair(PolicyKind::Dlf), fair(PolicyKind::KthUcb1));
    let higher_ok = (0..mp.len()).all(|d| mp[d] > dlf[d] && mp[d] > kth[d]);
    let pass = equal_ok && higher_ok;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join("/");
    report(
        9,
        pass,
        &format!(
            "max pairwise spread {:?} (equal opportunity {equal_ok}); per-player MP-UCB1 {} DLF {} kth-UCB1 {} (MP-UCB1 higher {higher_ok})",
            spreads.iter().map(|(k, s)| format!("{k} {s:.1}")).collect::<Vec<_>>(),
            fmt(&mp),
            fmt(&dlf),
            fmt(&kth)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let cfg = ExperimentConfig {
        horizon: 20_000,
        mc_topologies: 3,
        mc_runs_per_topology: 3,
        master_seed: 2718,
        ..ExperimentConfig::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut snapshots = Vec::new();
    for (dir, w) in dirs.iter().zip([1, workers().max(2)]) {
        let e = run_experiment(&cfg, w).unwrap();
        let files = emit_outputs(&e, dir.path(), false).unwrap();
        let mut bytes: Vec<(String, Vec<u8>)> = files
            .iter()
            .filter(|f| f.extension().is_some_and(|x| x == "csv"))
            .map(|f| (f.display().to_string(), std::fs::read(dir.path().join(f)).unwrap()))
            .collect();
        bytes.sort();
        snapshots.push(bytes);
    }
    let n = snapshots[0].len();
    let pass = n > 0 && snapshots[0] == snapshots[1];
    report(10, pass, &format!("{n} CSV files byte-identical across two executions with different worker counts: {pass}"));
    assert!(pass);
}
