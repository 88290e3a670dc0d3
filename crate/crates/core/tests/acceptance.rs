//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantities (visible under `--nocapture`).
//!
//! Every tolerance is pinned here. Statistical criteria compare ensemble
//! means against closed-form bounds at bound + 3 standard errors.

use flocksim::analysis::{
    aggregate, bound_phi, bound_psi1, bound_psi2, centralized_longrun_lower, cohesion,
    distance_to_opt, ensemble, group_mean, hitting_time, ks_two_sample, mean_half_sq_to,
    transient_u_bound,
};
use flocksim::config::{
    preset, CentralizedInit, EngineKind, ExperimentConfig, InitSpec, Mode, ObjectiveSpec,
    SdeSettings, TopologySpec,
};
use flocksim::csv_io::ensemble_csv_string;
use flocksim::engine::{run_event_replicate, synchronous_flocking_round};
use flocksim::objective::{
    ackley_objective, double_well_objective, gradient_check, lognorm_objective,
    quadratic_objective,
};
use flocksim::potential::{Potential, Repulsion};
use flocksim::sde::gibbs_mean_marginal;
use flocksim::stochastic::{Purpose, RngStreams, SamplingTimeModel, TimingKind};
use flocksim::topology::{laplacian, make_topology, quadratic_form_lower_bound_check, TopologyKind};
use rand::Rng;

/// The statistical criteria are CPU-heavy (rayon ensembles) and criterion 9
/// paces real threads against the wall clock; running them one at a time
/// keeps both the runtimes and the timing fidelity stable.
static GATE: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(std::sync::PoisonError::into_inner)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Criterion 1: long-run ensemble cohesion against psi2*(10) + 3 SE on the
/// quad-bounds preset (kappa=1, K10, a=1, b=0, sigma^2=450, step 0.02),
/// R = 200, horizon >= 10 time constants, runtime under a minute.
///
/// psi2* is exactly tight for a quadratic objective on a complete graph, so
/// the check runs on the preset's continuum-limit engine (the process the
/// cohesion analysis bounds). The discrete event engine is reported
/// alongside: its stationary cohesion carries the Euler-type inflation
/// 2/(2 - gamma_tilde (kappa + a lambda2)) ~ 1.12, which a tight bound
/// cannot absorb at step size 0.02.
#[test]
fn criterion_1_cohesion_bound_psi2() {
    let _quiet = serial();
    let started = std::time::Instant::now();
    let cfg = preset("quad-bounds").unwrap();
    assert!(cfg.horizon >= 10.0 / 2.0, "horizon must cover 10 time constants");
    let stats = ensemble(&cfg, 200).unwrap();
    let (mean, se) = stats.longrun_vbar().unwrap();
    let psi2 = bound_psi2(
        0.0,
        90.0,
        2,
        cfg.noise.sigma * (cfg.gamma_tilde * cfg.timing.mean).sqrt(),
        1.0 / cfg.timing.mean,
        10,
        1.0,
        1.0,
        10.0,
    )
    .unwrap();
    assert!((psi2 - 0.3682).abs() < 1e-4);
    let threshold = psi2 + 3.0 * se;
    let ok = mean <= threshold;
    let secs = started.elapsed().as_secs_f64();

    let mut event_cfg = cfg.clone();
    event_cfg.engine = EngineKind::Event;
    let (ev_mean, _) = ensemble(&event_cfg, 200).unwrap().longrun_vbar().unwrap();
    println!(
        "[criterion 1] {} - long-run E[V_bar] = {mean:.4} (SE {se:.4}) vs psi2* + 3SE = {threshold:.4}; \
         runtime {secs:.1}s (discrete event engine: {ev_mean:.4}, expected ~{:.4} from step-size inflation)",
        status(ok),
        psi2 * 2.0 / (2.0 - 0.02 * 11.0)
    );
    assert!(secs < 60.0, "runtime target exceeded: {secs:.1}s");
    assert!(ok, "long-run E[V_bar] = {mean:.4} exceeds psi2*(10) + 3 SE = {threshold:.4}");
}

/// Criterion 2: long-run E[U] <= phi*(10) + 3 SE and the transient E[U]
/// curve below the closed-form right-hand side at every recorded time.
/// Holds on both the continuum engine and the discrete event engine (the
/// group-mean contraction is weak, so discretization bias is ~1%).
#[test]
fn criterion_2_convergence_bound_phi() {
    let _quiet = serial();
    let cfg = preset("quad-bounds").unwrap();
    let mut event_cfg = cfg.clone();
    event_cfg.engine = EngineKind::Event;
    let (ev_mean, ev_se) = ensemble(&event_cfg, 200).unwrap().longrun_u().unwrap();
    assert!(
        ev_mean <= 0.45 + 3.0 * ev_se,
        "event engine long-run E[U] = {ev_mean:.4} > 0.45 + 3 SE"
    );
    let stats = ensemble(&cfg, 200).unwrap();
    let (mean, se) = stats.longrun_u().unwrap();
    let tau = cfg.noise.sigma * (cfg.gamma_tilde * cfg.timing.mean).sqrt();
    let gt = 1.0 / cfg.timing.mean;
    let phi = bound_phi(2, tau, gt, 1.0, 1.0, 1.0, 10.0, 10).unwrap();
    assert!((phi - 0.45).abs() < 1e-12);
    let threshold = phi + 3.0 * se;
    let longrun_ok = mean <= threshold;

    // Transient: E[U](t) <= e^{-2 kappa gt Gamma~ t}[U0 + ((mu-kappa)/(a l2)) V0]
    //            + phi (1 - e^{...}) + 3 SE(t).
    let rate = 2.0 * 1.0 * gt * cfg.gamma_tilde;
    let u0 = stats.mean_u0().unwrap();
    let v0 = stats.mean_vbar0();
    let useries = stats.u.as_ref().unwrap();
    let mut transient_ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (r, &t) in stats.times.iter().enumerate() {
        let bound = transient_u_bound(t, u0, v0, phi, rate, 1.0, 1.0, 1.0, 10.0);
        let excess = useries.mean[r] - (bound + 3.0 * useries.se(r));
        worst = worst.max(excess);
        if excess > 0.0 {
            transient_ok = false;
        }
    }
    println!(
        "[criterion 2] {} - long-run E[U] = {mean:.4} (SE {se:.4}) vs phi* + 3SE = {threshold:.4}; transient worst excess {worst:.4}",
        status(longrun_ok && transient_ok)
    );
    assert!(longrun_ok, "long-run E[U] = {mean:.4} > {threshold:.4}");
    assert!(transient_ok, "transient curve exceeded the bound by {worst:.4}");
}

/// Criterion 3: noise-reduction scaling phi* ~ 1/N. With a lambda2
/// proportional to N (complete graphs, a = 1), the long-run E[U] ratio
/// between N = 4 and N = 16 lies in [2.5, 6.5].
#[test]
fn criterion_3_noise_reduction_scaling() {
    let _quiet = serial();
    let mut cfg = preset("quad-bounds").unwrap();
    cfg.horizon = 8.0;
    let mut ratios = Vec::new();
    for engine in [EngineKind::Sde, EngineKind::Event] {
        cfg.engine = engine;
        let mut means = Vec::new();
        for n in [4usize, 16] {
            cfg.topology = TopologySpec { n, kind: TopologyKind::Complete };
            let stats = ensemble(&cfg, 200).unwrap();
            means.push(stats.longrun_u().unwrap().0);
        }
        ratios.push(means[0] / means[1]);
    }
    let ok = ratios.iter().all(|r| (2.5..=6.5).contains(r));
    println!(
        "[criterion 3] {} - E[U] ratio N=4 over N=16: sde {:.2}, event {:.2} (target 4, window [2.5, 6.5])",
        status(ok),
        ratios[0],
        ratios[1]
    );
    assert!(ok, "ratios {ratios:?} outside [2.5, 6.5]");
}

/// Criterion 4: centralized long-run lower bound
/// E[G] >= m sigma^2 Gamma / (4 mu N) - 3 SE on the quadratic preset.
#[test]
fn criterion_4_centralized_lower_bound() {
    let _quiet = serial();
    let mut cfg = preset("quad-bounds").unwrap();
    cfg.mode = Mode::Centralized;
    let bound = centralized_longrun_lower(2, cfg.noise.sigma, cfg.gamma.unwrap(), 1.0, 10).unwrap();
    assert!((bound - 0.45).abs() < 1e-12);
    let mut lines = Vec::new();
    let mut ok = true;
    for engine in [EngineKind::Sde, EngineKind::Event] {
        cfg.engine = engine;
        let stats = ensemble(&cfg, 200).unwrap();
        let (mean, se) = stats.longrun_u().unwrap();
        let threshold = bound - 3.0 * se;
        ok &= mean >= threshold;
        lines.push(format!("{engine:?}: E[G] = {mean:.4} vs {threshold:.4}"));
    }
    println!("[criterion 4] {} - centralized long-run {}", status(ok), lines.join("; "));
    assert!(ok, "{}", lines.join("; "));
}

fn proportional_crossing_config() -> ExperimentConfig {
    let mut cfg = preset("quad-bounds").unwrap();
    // The real-time comparison is about the implementable discrete schemes.
    cfg.engine = EngineKind::Event;
    cfg.topology = TopologySpec { n: 30, kind: TopologyKind::Complete };
    cfg.timing = SamplingTimeModel::new(TimingKind::Constant, 0.04, 0.0).unwrap();
    cfg.gamma_tilde = 0.02;
    cfg.gamma = None;
    cfg.proportional_step = true;
    cfg.beta = Some(1.5);
    cfg.horizon = 12.0;
    cfg.record_interval = Some(0.04);
    cfg
}

/// Criterion 5: with the proportional-step policy (Gamma/dt constant,
/// beta = 1.5, N = 30), the flocking scheme beats the centralized scheme in
/// real time after the transient, with non-overlapping 95% CIs.
#[test]
fn criterion_5_proposition_crossing() {
    let _quiet = serial();
    let mut cfg = proportional_crossing_config();
    cfg.mode = Mode::Flocking;
    let fl = ensemble(&cfg, 200).unwrap();
    cfg.mode = Mode::Centralized;
    let ce = ensemble(&cfg, 200).unwrap();

    // E[||x - x*||^2] = 2 E[U]; CIs scale the same way.
    let (fl_mean, fl_se) = fl.longrun_u().unwrap();
    let (ce_mean, ce_se) = ce.longrun_u().unwrap();
    let fl_hi = 2.0 * (fl_mean + 1.96 * fl_se);
    let ce_lo = 2.0 * (ce_mean - 1.96 * ce_se);
    let ok = fl_hi < ce_lo;
    println!(
        "[criterion 5] {} - flocking E[|x-x*|^2] = {:.3} (CI hi {fl_hi:.3}) < centralized {:.3} (CI lo {ce_lo:.3})",
        status(ok),
        2.0 * fl_mean,
        2.0 * ce_mean
    );
    assert!(ok, "CIs overlap: flocking hi {fl_hi:.4}, centralized lo {ce_lo:.4}");
}

/// Criterion 6: ball-hitting times on the first experiment's presets. Both
/// schemes hit B_0.1(x*) in at least 95/100 replicates, with mean hitting
/// times within 50% of each other.
#[test]
fn criterion_6_hitting_times() {
    let _quiet = serial();
    let fl = ensemble(&preset("fig1-flocking").unwrap(), 100).unwrap();
    let ce = ensemble(&preset("fig1-centralized").unwrap(), 100).unwrap();
    let (fl_mean, fl_sd, fl_hits) = fl.hit_stats().unwrap();
    let (ce_mean, ce_sd, ce_hits) = ce.hit_stats().unwrap();
    let ratio = fl_mean.max(ce_mean) / fl_mean.min(ce_mean);
    let ok = fl_hits >= 95 && ce_hits >= 95 && ratio <= 1.5;
    println!(
        "[criterion 6] {} - hit times: flocking ({fl_mean:.1}, {fl_sd:.1}) {fl_hits}/100, centralized ({ce_mean:.1}, {ce_sd:.1}) {ce_hits}/100, ratio {ratio:.2}",
        status(ok)
    );
    assert!(fl_hits >= 95, "flocking hit only {fl_hits}/100");
    assert!(ce_hits >= 95, "centralized hit only {ce_hits}/100");
    assert!(ratio <= 1.5, "means differ by more than 50%: ratio {ratio:.2}");
}

/// Criterion 7: Ackley case 1. The flocking group mean reaches distance 1 of
/// the global optimum by t = 60 s in at least 8/10 replicates; the
/// centralized iterate stays trapped (distance > 1) in at least 8/10.
#[test]
fn criterion_7_ackley_case1() {
    let _quiet = serial();
    let fl_cfg = preset("ackley-case1-flocking").unwrap();
    let mut fl_near = 0;
    for r in 0..10 {
        let trace = flocksim::run_experiment(&fl_cfg, r).unwrap();
        let last = trace.records() - 1;
        let d = (2.0 * trace.u.as_ref().unwrap()[last]).sqrt();
        if d < 1.0 {
            fl_near += 1;
        }
    }
    let ce_cfg = preset("ackley-case1-centralized").unwrap();
    let mut ce_far = 0;
    for r in 0..10 {
        let trace = flocksim::run_experiment(&ce_cfg, r).unwrap();
        let last = trace.records() - 1;
        let d = (2.0 * trace.u.as_ref().unwrap()[last]).sqrt();
        if d > 1.0 {
            ce_far += 1;
        }
    }
    let ok = fl_near >= 8 && ce_far >= 8;
    println!(
        "[criterion 7] {} - flocking within 1 of optimum: {fl_near}/10; centralized trapped: {ce_far}/10",
        status(ok)
    );
    assert!(fl_near >= 8, "flocking reached the optimum in only {fl_near}/10");
    assert!(ce_far >= 8, "centralized escaped in {}/10", 10 - ce_far);
}

/// Criterion 8: Gibbs limit of the group mean. A long flocking SDE run with
/// strong attraction matches pi*(ybar) in total variation (<= 0.1) for a
/// double well, and the quadratic case reproduces the pi* Gaussian variance
/// sigma^2 Gamma~/(2 N kappa) within 10%.
#[test]
fn criterion_8_gibbs_limit() {
    let _quiet = serial();
    // Double well, m=1, N=3, complete graph, a=100.
    let cfg = ExperimentConfig {
        objective: ObjectiveSpec::DoubleWell,
        potential: Potential::linear(100.0),
        topology: TopologySpec { n: 3, kind: TopologyKind::Complete },
        mode: Mode::Flocking,
        engine: EngineKind::Sde,
        gamma_tilde: 1.0,
        gamma: None,
        proportional_step: false,
        timing: SamplingTimeModel::new(TimingKind::Constant, 1.0, 0.0).unwrap(),
        beta: None,
        noise: flocksim::stochastic::NoiseModel { sigma: 2.0f64.sqrt() },
        init: InitSpec { lo: vec![-1.5], hi: vec![1.5], centralized: CentralizedInit::Center },
        horizon: 800.0,
        record_interval: Some(0.05),
        replicates: 48,
        seed: 99,
        record_per_thread: false,
        hit_radius: None,
        stop_on_hit: false,
        sde: SdeSettings { dt: Some(0.002), burn_in_frac: 0.2 },
        parallel: Default::default(),
    };
    let mut samples = Vec::new();
    for r in 0..cfg.replicates {
        let trace = flocksim::run_experiment(&cfg, r).unwrap();
        let skip = (trace.records() as f64 * cfg.sde.burn_in_frac) as usize;
        for rec in skip..trace.records() {
            samples.push(trace.xbar_at(rec)[0]);
        }
    }
    let objective = double_well_objective();
    let density =
        gibbs_mean_marginal(&objective, 3, cfg.noise.sigma, cfg.gamma_tilde, &[-2.2], &[2.2])
            .unwrap();
    let tv = flocksim::sde::empirical_vs_gibbs(&samples, &density, 50).unwrap();
    let tv_ok = tv <= 0.1;

    // Quadratic variance check.
    let quad_cfg = ExperimentConfig {
        objective: ObjectiveSpec::Quadratic { m: 1, kappa: 1.0, center: None },
        potential: Potential::linear(5.0),
        init: InitSpec { lo: vec![-1.0], hi: vec![1.0], centralized: CentralizedInit::Center },
        horizon: 1500.0,
        record_interval: Some(0.1),
        replicates: 12,
        seed: 17,
        ..cfg.clone()
    };
    let mut ybars = Vec::new();
    for r in 0..quad_cfg.replicates {
        let trace = flocksim::run_experiment(&quad_cfg, r).unwrap();
        let skip = (trace.records() as f64 * quad_cfg.sde.burn_in_frac) as usize;
        for rec in skip..trace.records() {
            ybars.push(trace.xbar_at(rec)[0]);
        }
    }
    let mean = ybars.iter().sum::<f64>() / ybars.len() as f64;
    let var = ybars.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ybars.len() as f64;
    let target = quad_cfg.noise.sigma.powi(2) * quad_cfg.gamma_tilde / (2.0 * 3.0 * 1.0);
    let var_ok = (var - target).abs() / target <= 0.10;
    println!(
        "[criterion 8] {} - double-well TV = {tv:.3} (<= 0.1); quadratic var = {var:.4} vs {target:.4}",
        status(tv_ok && var_ok)
    );
    assert!(tv_ok, "TV distance {tv:.3} > 0.1");
    assert!(var_ok, "variance {var:.4} outside 10% of {target:.4}");
}

/// Criterion 9: structural invariant suites.
#[test]
fn criterion_9_structural_invariants() {
    let _quiet = serial();
    let mut rng = RngStreams::new(4242).stream(0, Purpose::Init);

    // Gradient finite-difference checks at 1e-5 relative error.
    for obj in [
        lognorm_objective(2),
        quadratic_objective(2, 1.3, vec![0.4, -0.6]).unwrap(),
        ackley_objective(),
    ] {
        let (lo, hi) = obj.test_box;
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..obj.dim()).map(|_| rng.gen_range(lo..hi)).collect())
            .collect();
        let err = gradient_check(&obj, &pts, 1e-5).unwrap();
        assert!(err <= 1e-5, "gradient FD error {err}");
    }

    // Laplacian spectra: K_N has lambda2 = N within 1e-9 and Tr = N(N-1).
    for n in [3usize, 10, 32] {
        let s = laplacian(&make_topology(TopologyKind::Complete, n).unwrap());
        assert!((s.lambda2 - n as f64).abs() < 1e-9);
        assert!((s.trace - (n * (n - 1)) as f64).abs() < 1e-9);
    }

    // Spectral quadratic-form bound on 1000 random zero-column-sum matrices
    // per graph family.
    for g in [
        make_topology(TopologyKind::Complete, 8).unwrap(),
        make_topology(TopologyKind::Ring, 9).unwrap(),
        make_topology(TopologyKind::RandomKNeighbors { k: 3, seed: 5 }, 12).unwrap(),
    ] {
        let s = laplacian(&g);
        let n = g.n();
        for _ in 0..1000 {
            let mut e = ndarray::Array2::<f64>::zeros((n, 2));
            for c in 0..2 {
                let mut col: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                for v in &mut col {
                    *v -= mean;
                }
                let resid: f64 = col.iter().sum();
                col[0] -= resid;
                for (i, v) in col.iter().enumerate() {
                    e[[i, c]] = *v;
                }
            }
            assert!(quadratic_form_lower_bound_check(&s, &e).unwrap());
        }
    }

    // g is exactly odd and grad J = -g.
    let pot = Potential::new(4.0, Repulsion::Gaussian(800.0));
    for _ in 0..1000 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let gx = pot.eval_g(&x);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let gn = pot.eval_g(&neg);
        assert!(gx.iter().zip(&gn).all(|(a, b)| *a == -*b));
        let h = 1e-6;
        for d in 0..2 {
            let mut xp = x.clone();
            xp[d] += h;
            let jp = pot.eval_j(&xp);
            xp[d] = x[d] - h;
            let jm = pot.eval_j(&xp);
            let fd = (jp - jm) / (2.0 * h);
            assert!((fd + gx[d]).abs() / 1.0f64.max(gx[d].abs()) < 1e-5);
        }
    }

    // F = V + U decomposition to 1e-12.
    for _ in 0..200 {
        let n = 6;
        let m = 2;
        let flat: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xstar = vec![0.3, -0.8];
        let f = mean_half_sq_to(&flat, n, m, &xstar);
        let v = cohesion(&flat, n, m);
        let u = distance_to_opt(&group_mean(&flat, n, m), &xstar);
        assert!((f - (v + u)).abs() < 1e-12);
    }

    // Synchronous-mode coupling cancellation to 1e-12.
    let obj = lognorm_objective(2);
    let pot = Potential::new(1.5, Repulsion::Gaussian(3.0));
    let g = make_topology(TopologyKind::Complete, 5).unwrap();
    let neighbors = g.neighbor_lists();
    let solutions: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let noises: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let updated = synchronous_flocking_round(&solutions, &neighbors, &obj, &pot, 0.05, &noises);
    for d in 0..2 {
        let old_mean: f64 = solutions.iter().map(|s| s[d]).sum::<f64>() / 5.0;
        let new_mean: f64 = updated.iter().map(|s| s[d]).sum::<f64>() / 5.0;
        let grad_mean: f64 = solutions.iter().map(|s| obj.gradient(s)[d]).sum::<f64>() / 5.0;
        let noise_mean: f64 = noises.iter().map(|s| s[d]).sum::<f64>() / 5.0;
        let expect = old_mean + 0.05 * (-grad_mean + noise_mean);
        assert!((new_mean - expect).abs() < 1e-12);
    }

    // Engine determinism: byte-identical CSV from identical (config, seed).
    let mut det_cfg = preset("quad-bounds").unwrap();
    det_cfg.engine = EngineKind::Event;
    det_cfg.horizon = 1.0;
    let bounds = flocksim::bound_report(&det_cfg).unwrap();
    let run_csv = || {
        let traces: Vec<_> = (0..3)
            .map(|r| run_event_replicate(&det_cfg, r).unwrap())
            .collect();
        ensemble_csv_string(&det_cfg, &traces, &bounds).unwrap()
    };
    assert_eq!(run_csv(), run_csv(), "CSV must be byte-identical");

    // Publication board: no torn reads under concurrent stress.
    let dim = 8;
    let board = flocksim::parallel::SharedBoard::new(&[vec![0.0; dim]]);
    std::thread::scope(|scope| {
        let board = &board;
        scope.spawn(move || {
            let mut v = vec![0.0; dim];
            for k in 1..=250_000u64 {
                for (d, slot) in v.iter_mut().enumerate() {
                    *slot = k as f64 * 1000.0 + d as f64 * 7.0;
                }
                board.publish(0, &v, k);
            }
        });
        for _ in 0..4 {
            scope.spawn(move || {
                let mut buf = vec![0.0; dim];
                for _ in 0..250_000 {
                    let step = board.snapshot_read(0, &mut buf);
                    if step == 0 {
                        continue;
                    }
                    let k = (buf[0] / 1000.0).round();
                    for (d, &val) in buf.iter().enumerate() {
                        assert_eq!(val, k * 1000.0 + d as f64 * 7.0, "torn read");
                    }
                }
            });
        }
    });

    // Cross-engine equivalence: KS distance between long-run U samples of
    // the two engines below the 5% critical value, and the parallel mean
    // inside the event engine's 95% CI.
    let mut ks_cfg = preset("quad-bounds").unwrap();
    ks_cfg.engine = EngineKind::Event;
    ks_cfg.horizon = 4.0;
    ks_cfg.parallel.time_scale = 50.0;
    let ev = ensemble(&ks_cfg, 100).unwrap();
    ks_cfg.engine = EngineKind::Parallel;
    let par_samples: Vec<f64> = (0..100)
        .map(|r| {
            let tr = flocksim::run_experiment(&ks_cfg, r).unwrap();
            let stats = aggregate(&ks_cfg, std::slice::from_ref(&tr));
            stats.summaries[0].longrun_u.unwrap()
        })
        .collect();
    let ev_samples: Vec<f64> = ev.summaries.iter().filter_map(|s| s.longrun_u).collect();
    let (d, crit) = ks_two_sample(&ev_samples, &par_samples);
    assert!(d <= crit, "KS distance {d:.3} above critical value {crit:.3}");
    let (ev_mean, ev_se) = ev.longrun_u().unwrap();
    let par30 = &par_samples[..30];
    let par_mean = par30.iter().sum::<f64>() / 30.0;
    let par_var = par30.iter().map(|v| (v - par_mean) * (v - par_mean)).sum::<f64>() / 29.0;
    let par_se = (par_var / 30.0).sqrt();
    assert!(
        (par_mean - ev_mean).abs() <= 1.96 * (ev_se + par_se),
        "parallel 30-replicate mean {par_mean:.4} does not overlap the event CI around {ev_mean:.4}"
    );

    println!(
        "[criterion 9] PASS - FD gradients, spectra, quadratic-form bound, odd g, grad J = -g, F = V + U, synchronous cancellation, deterministic CSV, torn-read stress, cross-engine KS (D = {d:.3} <= {crit:.3})"
    );
}

/// Criterion 10: psi1*(N) and psi2*(N) approach b/(4a) on complete graphs;
/// at N = 10^6 both sit within 1%.
#[test]
fn criterion_10_psi_limits() {
    let _quiet = serial();
    let (a, c) = (4.0, 800.0);
    let b = c / std::f64::consts::E;
    let n = 1_000_000usize;
    let nf = n as f64;
    let (tau, gt) = (0.3, 50.0);
    let target = b / (4.0 * a);
    let psi1 = bound_psi1(1.0, a, nf, b, nf * (nf - 1.0), 2, tau, gt, n).unwrap();
    let psi2 = bound_psi2(b, nf * (nf - 1.0), 2, tau, gt, n, 1.0, a, nf).unwrap();
    let ok = (psi1 - target).abs() / target < 0.01 && (psi2 - target).abs() / target < 0.01;
    println!(
        "[criterion 10] {} - psi1*(1e6) = {psi1:.4}, psi2*(1e6) = {psi2:.4}, b/(4a) = {target:.4}",
        status(ok)
    );
    assert!(ok);
}

/// Hitting-time plumbing used by criterion 6 behaves on edge cases.
#[test]
fn hitting_time_edge_cases_on_presets() {
    let _quiet = serial();
    let mut cfg = preset("quad-bounds").unwrap();
    cfg.horizon = 0.2;
    cfg.noise.sigma = 0.0;
    let trace = run_event_replicate(&cfg, 0).unwrap();
    assert_eq!(hitting_time(&trace, &[0.0, 0.0], 1e-6), None);
    assert_eq!(hitting_time(&trace, &[0.0, 0.0], 1e6), Some(0.0));
}
