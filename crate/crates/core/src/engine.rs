//! Deterministic discrete-event simulator of the three discrete-time schemes:
//! asynchronous flocking, centralized N-sample-average, and independent
//! threads.
//!
//! Events are (completion time, thread id) pairs on a priority queue;
//! simultaneous completions are processed in ascending thread id. A thread
//! reading neighbor j at its event time sees j's latest solution completed
//! strictly before that time: updates that complete at the same instant see
//! each other's pre-update solutions, which preserves the exact cancellation
//! of coupling terms in the group-mean update under constant equal sampling
//! times (the adjacency is symmetric and g is odd).

use crate::config::{CentralizedInit, EngineKind, ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::potential::Potential;
use crate::stochastic::{Purpose, RngStreams, SamplingTimeModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Solutions whose norm exceeds this abort the replicate.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// Where and when a replicate diverged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub time: f64,
    pub thread: usize,
}

/// Time-indexed records of one replicate, sampled-and-held on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub mode: Mode,
    /// Number of state-carrying entities (N for flocking/independent, 1 for
    /// the centralized iterate).
    pub n_states: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    /// Group mean per record, flattened records x dim.
    pub xbar: Vec<f64>,
    /// Cohesion V-bar per record (zero in centralized mode).
    pub vbar: Vec<f64>,
    /// Half squared distance of the group mean to the optimum, when known.
    pub u: Option<Vec<f64>>,
    /// Objective value at the group mean.
    pub f_xbar: Vec<f64>,
    /// Full per-thread solutions, flattened records x n_states x dim.
    pub per_thread: Option<Vec<f64>>,
    pub diverged: Option<Divergence>,
    /// Virtual-time speedup factor, for traces from the parallel runtime.
    pub time_scale: Option<f64>,
}

impl Trace {
    pub fn records(&self) -> usize {
        self.times.len()
    }

    pub fn xbar_at(&self, r: usize) -> &[f64] {
        &self.xbar[r * self.dim..(r + 1) * self.dim]
    }

    pub fn per_thread_at(&self, r: usize) -> Option<&[f64]> {
        self.per_thread
            .as_ref()
            .map(|p| &p[r * self.n_states * self.dim..(r + 1) * self.n_states * self.dim])
    }
}

/// One flocking update from a neighbor snapshot:
/// x + step * (-grad f(x) + noise + sum_j g(x - x_j)).
pub fn flocking_update(
    x: &[f64],
    neighbor_solutions: &[&[f64]],
    objective: &Objective,
    potential: &Potential,
    step: f64,
    noise: &[f64],
) -> Vec<f64> {
    let m = x.len();
    let mut u = objective.gradient(x);
    for v in u.iter_mut() {
        *v = -*v;
    }
    for (uv, nv) in u.iter_mut().zip(noise) {
        *uv += nv;
    }
    let mut diff = vec![0.0; m];
    let mut g = vec![0.0; m];
    for snap in neighbor_solutions {
        for i in 0..m {
            diff[i] = x[i] - snap[i];
        }
        potential.eval_g_into(&diff, &mut g);
        for i in 0..m {
            u[i] += g[i];
        }
    }
    let mut out = vec![0.0; m];
    for i in 0..m {
        out[i] = x[i] + step * u[i];
    }
    out
}

/// One independent-thread update (the flocking scheme without coupling).
pub fn independent_update(x: &[f64], objective: &Objective, step: f64, noise: &[f64]) -> Vec<f64> {
    flocking_update(x, &[], objective, &Potential::linear(0.0), step, noise)
}

/// One centralized update: x + step * (-grad f(x) + avg_noise), where
/// avg_noise is the average of N per-thread samples.
pub fn centralized_update(x: &[f64], objective: &Objective, step: f64, avg_noise: &[f64]) -> Vec<f64> {
    let grad = objective.gradient(x);
    x.iter()
        .zip(grad.iter())
        .zip(avg_noise)
        .map(|((xi, gi), ni)| xi + step * (-gi + ni))
        .collect()
}

/// Forced-synchronous test mode: every thread updates from the same common
/// snapshot. With a symmetric adjacency and odd g the coupling terms cancel
/// exactly in the group-mean update.
pub fn synchronous_flocking_round(
    solutions: &[Vec<f64>],
    neighbors: &[Vec<usize>],
    objective: &Objective,
    potential: &Potential,
    step: f64,
    noises: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    solutions
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let snaps: Vec<&[f64]> = neighbors[i].iter().map(|&j| solutions[j].as_slice()).collect();
            flocking_update(x, &snaps, objective, potential, step, &noises[i])
        })
        .collect()
}

fn finite_and_bounded(x: &[f64]) -> bool {
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    norm2.is_finite() && norm2.sqrt() <= DIVERGENCE_NORM
}

struct Event {
    time: f64,
    id: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.id == other.id
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // BinaryHeap is a max-heap; reverse so earliest time pops first, ties by
    // ascending id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Uniform draw over the init box; a degenerate box consumes no randomness.
fn draw_init(lo: &[f64], hi: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| if a == b { a } else { rng.gen_range(a..b) })
        .collect()
}

/// Completion time of event number `count` (1-based). Constant timing uses
/// count * mean directly so event times align exactly with the record grid
/// instead of accumulating rounding drift.
pub(crate) fn next_event_time(
    timing: &SamplingTimeModel,
    count: u64,
    current: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    match timing.kind {
        crate::stochastic::TimingKind::Constant => count as f64 * timing.mean,
        _ => current + timing.draw(rng),
    }
}

struct Recorder<'c> {
    cfg: &'c ExperimentConfig,
    objective: &'c Objective,
    dim: usize,
    n_states: usize,
    grid: f64,
    total_records: usize,
    next: usize,
    trace: Trace,
    stopped: bool,
}

impl<'c> Recorder<'c> {
    fn new(cfg: &'c ExperimentConfig, objective: &'c Objective, n_states: usize) -> Self {
        let grid = cfg.record_interval_effective();
        let total_records = (cfg.horizon / grid + 1e-9).floor() as usize + 1;
        let dim = objective.dim();
        let trace = Trace {
            mode: cfg.mode,
            n_states,
            dim,
            times: Vec::with_capacity(total_records.min(1 << 20)),
            xbar: Vec::new(),
            vbar: Vec::new(),
            u: objective.optimum.as_ref().map(|_| Vec::new()),
            f_xbar: Vec::new(),
            per_thread: cfg.record_per_thread.then(Vec::new),
            diverged: None,
            time_scale: None,
        };
        Recorder { cfg, objective, dim, n_states, grid, total_records, next: 0, trace, stopped: false }
    }

    fn next_time(&self) -> Option<f64> {
        if self.next < self.total_records {
            Some(self.next as f64 * self.grid)
        } else {
            None
        }
    }

    /// Emits one record from flattened solutions; returns false when the run
    /// should stop (grid exhausted or hit-ball reached).
    fn emit(&mut self, t: f64, solutions: &[f64]) -> bool {
        let m = self.dim;
        let n = self.n_states;
        let mut xbar = vec![0.0; m];
        for s in 0..n {
            for i in 0..m {
                xbar[i] += solutions[s * m + i];
            }
        }
        for v in xbar.iter_mut() {
            *v /= n as f64;
        }
        let mut vbar = 0.0;
        for s in 0..n {
            let mut d2 = 0.0;
            for i in 0..m {
                let d = solutions[s * m + i] - xbar[i];
                d2 += d * d;
            }
            vbar += 0.5 * d2;
        }
        vbar /= n as f64;

        self.trace.times.push(t);
        self.trace.vbar.push(vbar);
        self.trace.f_xbar.push(self.objective.value(&xbar));
        let mut hit = false;
        if let (Some(u), Some(xstar)) = (self.trace.u.as_mut(), self.objective.optimum.as_ref()) {
            let d2: f64 = xbar.iter().zip(xstar).map(|(a, b)| (a - b) * (a - b)).sum();
            u.push(0.5 * d2);
            if let Some(radius) = self.cfg.hit_radius {
                hit = d2.sqrt() < radius;
            }
        }
        if let Some(p) = self.trace.per_thread.as_mut() {
            p.extend_from_slice(solutions);
        }
        self.trace.xbar.extend_from_slice(&xbar);
        self.next += 1;
        if self.cfg.stop_on_hit && hit {
            self.stopped = true;
            return false;
        }
        self.next < self.total_records
    }

    /// Emits every grid point strictly before `t`.
    fn catch_up(&mut self, t: f64, solutions: &[f64]) -> bool {
        while let Some(tr) = self.next_time() {
            if tr < t {
                if !self.emit(tr, solutions) {
                    return false;
                }
            } else {
                return true;
            }
        }
        false
    }

    fn finish(mut self, solutions: &[f64], diverged: Option<Divergence>) -> Trace {
        if let Some(d) = diverged {
            // Mark the divergence with a final record of the last good state.
            self.trace.diverged = Some(d);
            if !self.stopped {
                let t = d.time;
                self.emit(t, solutions);
            }
        } else if !self.stopped {
            while let Some(tr) = self.next_time() {
                if !self.emit(tr, solutions) {
                    break;
                }
            }
        }
        self.trace
    }
}

/// Runs the replicate with the engine selected in the config.
pub fn run_experiment(cfg: &ExperimentConfig, replicate: usize) -> Result<Trace> {
    cfg.validate().map_err(Error::Config)?;
    match cfg.engine {
        EngineKind::Event => run_event_replicate(cfg, replicate),
        EngineKind::Parallel => crate::parallel::run_parallel(cfg, replicate),
        EngineKind::Sde => crate::sde::run_sde_trace(cfg, replicate),
    }
}

/// Runs replicate 0 of the config on its configured engine.
pub fn run(cfg: &ExperimentConfig) -> Result<Trace> {
    run_experiment(cfg, 0)
}

/// Discrete-event engine for one replicate.
pub fn run_event_replicate(cfg: &ExperimentConfig, replicate: usize) -> Result<Trace> {
    let objective = cfg.objective.build()?;
    let streams = RngStreams::new(cfg.seed).replicate(replicate);
    match cfg.mode {
        Mode::Centralized => run_centralized(cfg, &objective, &streams),
        Mode::Flocking | Mode::Independent => run_threaded(cfg, &objective, &streams),
    }
}

fn run_centralized(
    cfg: &ExperimentConfig,
    objective: &Objective,
    streams: &RngStreams,
) -> Result<Trace> {
    let n = cfg.n_threads();
    let m = objective.dim();
    let gamma = cfg
        .resolved_gamma()?
        .expect("validated: centralized mode has a step size");
    let timing: SamplingTimeModel = cfg.centralized_timing()?;

    let mut init_rng = streams.stream(0, Purpose::Init);
    let mut x = match cfg.init.centralized {
        CentralizedInit::Center => cfg
            .init
            .lo
            .iter()
            .zip(&cfg.init.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect::<Vec<f64>>(),
        CentralizedInit::Random => draw_init(&cfg.init.lo, &cfg.init.hi, &mut init_rng),
    };

    let mut noise_rng = streams.stream(0, Purpose::Noise);
    let mut timing_rng = streams.stream(0, Purpose::Timing);

    let mut rec = Recorder::new(cfg, objective, 1);
    let mut count: u64 = 1;
    let mut t = next_event_time(&timing, count, 0.0, &mut timing_rng);
    let mut sample = vec![0.0; m];
    let mut avg = vec![0.0; m];
    let mut diverged = None;

    while t <= cfg.horizon {
        if !rec.catch_up(t, &x) {
            break;
        }
        avg.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n {
            cfg.noise.draw_into(&mut sample, &mut noise_rng);
            for (a, s) in avg.iter_mut().zip(&sample) {
                *a += s;
            }
        }
        for a in avg.iter_mut() {
            *a /= n as f64;
        }
        let next = centralized_update(&x, objective, gamma, &avg);
        if !finite_and_bounded(&next) {
            diverged = Some(Divergence { time: t, thread: 0 });
            break;
        }
        x = next;
        count += 1;
        t = next_event_time(&timing, count, t, &mut timing_rng);
    }
    Ok(rec.finish(&x, diverged))
}

fn run_threaded(
    cfg: &ExperimentConfig,
    objective: &Objective,
    streams: &RngStreams,
) -> Result<Trace> {
    let graph = cfg.topology.build()?;
    if cfg.mode == Mode::Flocking && !graph.is_connected_bfs() {
        return Err(Error::Topology(
            "flocking mode requires a connected topology".into(),
        ));
    }
    let n = cfg.n_threads();
    let m = objective.dim();
    let neighbors = graph.neighbor_lists();
    let coupling = cfg.mode == Mode::Flocking;
    let potential = if coupling { cfg.potential } else { Potential::linear(0.0) };

    // Flat state buffers; `prev` holds each thread's previous solution so
    // same-instant completions read the pre-update value.
    let mut solutions = vec![0.0; n * m];
    let mut prev = vec![0.0; n * m];
    let mut completed_at = vec![0.0f64; n];

    let mut noise_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| streams.stream(i, Purpose::Noise)).collect();
    let mut timing_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| streams.stream(i, Purpose::Timing)).collect();

    for i in 0..n {
        let mut init_rng = streams.stream(i, Purpose::Init);
        let x0 = draw_init(&cfg.init.lo, &cfg.init.hi, &mut init_rng);
        solutions[i * m..(i + 1) * m].copy_from_slice(&x0);
        prev[i * m..(i + 1) * m].copy_from_slice(&x0);
    }

    let mut event_counts = vec![1u64; n];
    let mut heap = BinaryHeap::with_capacity(n);
    for (i, rng) in timing_rngs.iter_mut().enumerate() {
        heap.push(Event { time: next_event_time(&cfg.timing, 1, 0.0, rng), id: i });
    }

    let mut rec = Recorder::new(cfg, objective, n);
    let mut noise = vec![0.0; m];
    let mut diverged = None;

    while let Some(Event { time: t, id: i }) = heap.pop() {
        if t > cfg.horizon {
            break;
        }
        if !rec.catch_up(t, &solutions) {
            break;
        }

        cfg.noise.draw_into(&mut noise, &mut noise_rngs[i]);
        let x_i = &solutions[i * m..(i + 1) * m];
        let next = if coupling {
            let snaps: Vec<&[f64]> = neighbors[i]
                .iter()
                .map(|&j| {
                    // Strictly-before snapshot rule: a solution completed at
                    // exactly t is not yet readable at t.
                    if completed_at[j] < t {
                        &solutions[j * m..(j + 1) * m]
                    } else {
                        &prev[j * m..(j + 1) * m]
                    }
                })
                .collect();
            flocking_update(x_i, &snaps, objective, &potential, cfg.gamma_tilde, &noise)
        } else {
            flocking_update(x_i, &[], objective, &potential, cfg.gamma_tilde, &noise)
        };
        if !finite_and_bounded(&next) {
            diverged = Some(Divergence { time: t, thread: i });
            break;
        }
        prev[i * m..(i + 1) * m].copy_from_slice(&solutions[i * m..(i + 1) * m]);
        solutions[i * m..(i + 1) * m].copy_from_slice(&next);
        completed_at[i] = t;

        event_counts[i] += 1;
        heap.push(Event {
            time: next_event_time(&cfg.timing, event_counts[i], t, &mut timing_rngs[i]),
            id: i,
        });
    }
    Ok(rec.finish(&solutions, diverged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, ObjectiveSpec};
    use crate::objective::{lognorm_objective, quadratic_objective};
    use crate::stochastic::TimingKind;

    fn tiny_quad_config() -> ExperimentConfig {
        let mut cfg = preset("quad-bounds").unwrap();
        cfg.horizon = 0.5;
        cfg.replicates = 2;
        cfg
    }

    #[test]
    fn flocking_update_reduces_to_gradient_descent_when_together() {
        // All threads at the same point with zero noise: coupling vanishes.
        let obj = quadratic_objective(1, 1.0, vec![0.0]).unwrap();
        let pot = Potential::linear(1.0);
        let x = [1.0];
        let same = [1.0];
        let out = flocking_update(&x, &[&same, &same], &obj, &pot, 0.1, &[0.0]);
        assert!((out[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn flocking_update_hand_example_two_threads() {
        // f = 0, sigma = 0, a = 1, x1 = 1, x2 = -1, step 0.1: x1 -> 0.8.
        // A zero objective is emulated by a noise term cancelling -grad f.
        let obj = quadratic_objective(1, 1.0, vec![0.0]).unwrap();
        let pot = Potential::linear(1.0);
        let neighbor = [-1.0];
        let x = [1.0];
        // -grad f = -x for kappa=1; cancel it by adding it back through noise.
        let noise = [1.0];
        let out = flocking_update(&x, &[&neighbor[..]], &obj, &pot, 0.1, &noise);
        assert!((out[0] - 0.8).abs() < 1e-15, "got {}", out[0]);
    }

    #[test]
    fn single_thread_flocking_is_gradient_descent() {
        let obj = quadratic_objective(1, 1.0, vec![0.0]).unwrap();
        let pot = Potential::linear(1.0);
        let out = flocking_update(&[1.0], &[], &obj, &pot, 0.1, &[0.0]);
        assert!((out[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn centralized_noise_averaging_variance() {
        // 1e5 steps of pure noise against a flat objective: increments have
        // variance ~ gamma^2 sigma^2 / N per dimension.
        let mut cfg = preset("quad-bounds").unwrap();
        cfg.objective = ObjectiveSpec::Quadratic { m: 1, kappa: 1e-12, center: None };
        cfg.mode = Mode::Centralized;
        cfg.init = crate::config::InitSpec {
            lo: vec![0.0],
            hi: vec![0.0],
            centralized: CentralizedInit::Center,
        };
        cfg.horizon = 2000.0;
        cfg.record_interval = Some(0.02);
        let trace = run_event_replicate(&cfg, 0).unwrap();
        let xs: Vec<f64> = (0..trace.records()).map(|r| trace.xbar_at(r)[0]).collect();
        let incs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let n = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / n;
        let var = incs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expect = 0.02f64.powi(2) * 450.0 / 10.0;
        assert!(
            (var - expect).abs() / expect < 0.02,
            "var {var} vs expected {expect}"
        );
    }

    #[test]
    fn horizon_zero_gives_initial_record_only() {
        let mut cfg = tiny_quad_config();
        cfg.horizon = 0.0;
        let trace = run_event_replicate(&cfg, 0).unwrap();
        assert_eq!(trace.records(), 1);
        assert_eq!(trace.times[0], 0.0);
        // Initial cohesion comes from the init box spread.
        assert!(trace.vbar[0] > 0.0);
    }

    #[test]
    fn traces_are_deterministic() {
        let cfg = tiny_quad_config();
        let a = run_event_replicate(&cfg, 3).unwrap();
        let b = run_event_replicate(&cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicates_differ() {
        let cfg = tiny_quad_config();
        let a = run_event_replicate(&cfg, 0).unwrap();
        let b = run_event_replicate(&cfg, 1).unwrap();
        assert_ne!(a.xbar, b.xbar);
    }

    #[test]
    fn flocking_with_zero_coupling_equals_independent() {
        let mut cfg = tiny_quad_config();
        cfg.potential = Potential::linear(0.0);
        cfg.horizon = 1.0;
        let fl = run_event_replicate(&cfg, 0).unwrap();
        cfg.mode = Mode::Independent;
        let ind = run_event_replicate(&cfg, 0).unwrap();
        assert_eq!(fl.xbar, ind.xbar);
        assert_eq!(fl.vbar, ind.vbar);
        assert_eq!(fl.per_thread, ind.per_thread);
    }

    #[test]
    fn centralized_n1_equals_independent_n1() {
        let mut cfg = tiny_quad_config();
        cfg.topology = crate::config::TopologySpec {
            n: 2,
            kind: crate::topology::TopologyKind::Complete,
        };
        // Make a degenerate init box so both modes start at the same point
        // without consuming randomness.
        cfg.init = crate::config::InitSpec {
            lo: vec![5.0, 5.0],
            hi: vec![5.0, 5.0],
            centralized: CentralizedInit::Center,
        };
        cfg.horizon = 1.0;

        // N = 1 is below the topology minimum, so emulate it: centralized
        // with n=1 samples is the same as one independent thread. Compare a
        // 1-thread independent run against centralized with topology n
        // forced by construction.
        let obj = cfg.objective.build().unwrap();
        let streams = RngStreams::new(cfg.seed).replicate(0);
        // Manual single-thread runs, shared stream:
        let mut noise_rng = streams.stream(0, Purpose::Noise);
        let mut x_c = vec![5.0, 5.0];
        let mut noise = vec![0.0; 2];
        for _ in 0..10 {
            cfg.noise.draw_into(&mut noise, &mut noise_rng);
            x_c = centralized_update(&x_c, &obj, 0.02, &noise);
        }
        let mut noise_rng = streams.stream(0, Purpose::Noise);
        let mut x_i = vec![5.0, 5.0];
        for _ in 0..10 {
            cfg.noise.draw_into(&mut noise, &mut noise_rng);
            x_i = flocking_update(&x_i, &[], &obj, &Potential::linear(0.0), 0.02, &noise);
        }
        assert_eq!(x_c, x_i);
    }

    #[test]
    fn event_times_per_thread_strictly_increase() {
        let mut cfg = tiny_quad_config();
        cfg.timing = SamplingTimeModel::new(TimingKind::Exponential, 0.02, 0.0).unwrap();
        cfg.record_per_thread = true;
        cfg.horizon = 1.0;
        // Indirect check: run succeeds and records are on a strictly
        // increasing grid.
        let trace = run_event_replicate(&cfg, 0).unwrap();
        for w in trace.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn synchronous_round_cancellation() {
        // Coupling terms cancel in the group mean to floating-point accuracy.
        let obj = lognorm_objective(2);
        let pot = Potential::new(1.5, crate::potential::Repulsion::Gaussian(3.0));
        let g = crate::topology::make_topology(crate::topology::TopologyKind::Ring, 6).unwrap();
        let neighbors = g.neighbor_lists();
        let mut rng = RngStreams::new(5).stream(0, Purpose::Init);
        let solutions: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let noises: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let step = 0.05;
        let updated = synchronous_flocking_round(&solutions, &neighbors, &obj, &pot, step, &noises);

        let n = 6.0;
        for d in 0..2 {
            let old_mean: f64 = solutions.iter().map(|s| s[d]).sum::<f64>() / n;
            let new_mean: f64 = updated.iter().map(|s| s[d]).sum::<f64>() / n;
            let grad_mean: f64 = solutions.iter().map(|s| obj.gradient(s)[d]).sum::<f64>() / n;
            let noise_mean: f64 = noises.iter().map(|s| s[d]).sum::<f64>() / n;
            let expect = old_mean + step * (-grad_mean + noise_mean);
            assert!(
                (new_mean - expect).abs() < 1e-12,
                "coupling failed to cancel: {new_mean} vs {expect}"
            );
        }
    }

    #[test]
    fn divergence_is_reported_not_dropped() {
        let mut cfg = tiny_quad_config();
        // A step far above 2/kappa blows up the quadratic scheme.
        cfg.gamma_tilde = 1e6;
        cfg.noise.sigma = 0.0;
        cfg.potential = Potential::linear(1e6);
        cfg.horizon = 10.0;
        let trace = run_event_replicate(&cfg, 0).unwrap();
        assert!(trace.diverged.is_some());
        let last = trace.records() - 1;
        assert!(trace.xbar_at(last).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn stop_on_hit_truncates_trace() {
        let mut cfg = tiny_quad_config();
        cfg.noise.sigma = 0.0;
        cfg.hit_radius = Some(1.0);
        cfg.stop_on_hit = true;
        cfg.horizon = 50.0;
        let trace = run_event_replicate(&cfg, 0).unwrap();
        let last = trace.records() - 1;
        let u = trace.u.as_ref().unwrap();
        assert!((2.0 * u[last]).sqrt() < 1.0);
        assert!(trace.times[last] < 50.0);
    }
}
