//! Genuinely multithreaded asynchronous runtime: N workers update their
//! solutions on their own clocks and publish to a shared board with wait-free
//! reads. Statistically equivalent to the discrete-event engine, not
//! bit-reproducible.

use crate::config::{ExperimentConfig, Mode};
use crate::engine::{flocking_update, Divergence, Trace, DIVERGENCE_NORM};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::stochastic::{Purpose, RngStreams};
use std::sync::atomic::{fence, AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

struct Slot {
    /// Seqlock counter: odd while a publish is in flight.
    seq: AtomicU64,
    /// Owning worker's step count at the last publish.
    step: AtomicU64,
    /// Solution components as f64 bit patterns.
    data: Vec<AtomicU64>,
}

/// N published solution slots. Each slot is written only by its owning
/// worker; readers never see a torn vector: a read either returns a complete
/// previously-published (solution, step) pair or retries.
pub struct SharedBoard {
    dim: usize,
    slots: Vec<Slot>,
}

impl SharedBoard {
    /// Creates the board with every slot published at step 0.
    pub fn new(init: &[Vec<f64>]) -> Self {
        let dim = init.first().map_or(0, |v| v.len());
        let slots = init
            .iter()
            .map(|sol| Slot {
                seq: AtomicU64::new(0),
                step: AtomicU64::new(0),
                data: sol.iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            })
            .collect();
        SharedBoard { dim, slots }
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// Publishes a new (solution, step) pair for slot `i`.
    ///
    /// Contract: only the owning worker calls this for its slot; concurrent
    /// publishes to one slot are a usage error.
    pub fn publish(&self, i: usize, solution: &[f64], step: u64) {
        let slot = &self.slots[i];
        let s = slot.seq.load(Ordering::Relaxed);
        slot.seq.store(s + 1, Ordering::Relaxed);
        // The release fence keeps the odd marker visible before any data
        // write reaches another core.
        fence(Ordering::Release);
        for (cell, v) in slot.data.iter().zip(solution) {
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
        slot.step.store(step, Ordering::Relaxed);
        slot.seq.store(s + 2, Ordering::Release);
    }

    /// Step count of the latest publish to slot `j` (may race a publish in
    /// flight; use [`SharedBoard::snapshot_read`] for a consistent pair).
    pub fn step_count(&self, j: usize) -> u64 {
        self.slots[j].step.load(Ordering::Acquire)
    }

    /// Reads a consistent (solution, step) snapshot of slot `j` into `out`.
    /// Wait-free for the writer; the reader retries while a publish is in
    /// flight. Staleness is at most one in-flight update of the owner.
    pub fn snapshot_read(&self, j: usize, out: &mut [f64]) -> u64 {
        debug_assert_eq!(out.len(), self.dim);
        let slot = &self.slots[j];
        loop {
            let s1 = slot.seq.load(Ordering::Acquire);
            if s1 & 1 == 1 {
                std::hint::spin_loop();
                continue;
            }
            for (o, cell) in out.iter_mut().zip(&slot.data) {
                *o = f64::from_bits(cell.load(Ordering::Relaxed));
            }
            let step = slot.step.load(Ordering::Relaxed);
            fence(Ordering::Acquire);
            let s2 = slot.seq.load(Ordering::Relaxed);
            if s1 == s2 {
                return step;
            }
        }
    }
}

/// Sleep-then-spin wait until the deadline; coarse sleeping first so heavily
/// oversubscribed hosts still make progress.
fn wait_until(deadline: Instant) {
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let remaining = deadline - now;
        if remaining > Duration::from_micros(300) {
            std::thread::sleep(remaining - Duration::from_micros(200));
        } else if remaining > Duration::from_micros(50) {
            std::thread::yield_now();
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Runs one replicate on real threads: N workers plus one sampler recording
/// the board on the virtual-time grid.
pub fn run_parallel(cfg: &ExperimentConfig, replicate: usize) -> Result<Trace> {
    if cfg.mode == Mode::Centralized {
        return Err(Error::Config(vec![
            "engine: centralized mode is not available under the parallel engine".into(),
        ]));
    }
    let objective = cfg.objective.build()?;
    let graph = cfg.topology.build()?;
    if cfg.mode == Mode::Flocking && !graph.is_connected_bfs() {
        return Err(Error::Topology("flocking mode requires a connected topology".into()));
    }
    let n = cfg.n_threads();
    let m = objective.dim();
    let neighbors = graph.neighbor_lists();
    let potential = if cfg.mode == Mode::Flocking {
        cfg.potential
    } else {
        Potential::linear(0.0)
    };
    let streams = RngStreams::new(cfg.seed).replicate(replicate);
    let scale = cfg.parallel.time_scale;

    let init: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut rng = streams.stream(i, Purpose::Init);
            cfg.init
                .lo
                .iter()
                .zip(&cfg.init.hi)
                .map(|(&a, &b)| if a == b { a } else { rand::Rng::gen_range(&mut rng, a..b) })
                .collect()
        })
        .collect();

    let board = SharedBoard::new(&init);
    let stop = AtomicBool::new(false);
    let divergence: Mutex<Option<Divergence>> = Mutex::new(None);

    let grid = cfg.record_interval_effective();
    let total_records = (cfg.horizon / grid + 1e-9).floor() as usize + 1;
    let start = Instant::now();

    let mut records: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total_records);

    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        std::thread::scope(|scope| {
            for i in 0..n {
                let board = &board;
                let stop = &stop;
                let divergence = &divergence;
                let objective = &objective;
                let potential = &potential;
                let neighbor_ids = &neighbors[i];
                let init_i = init[i].clone();
                let streams_i = streams;
                let cfg = &*cfg;
                scope.spawn(move || {
                    let mut noise_rng = streams_i.stream(i, Purpose::Noise);
                    let mut timing_rng = streams_i.stream(i, Purpose::Timing);
                    let mut x = init_i;
                    let mut noise = vec![0.0; m];
                    let mut snaps: Vec<Vec<f64>> = neighbor_ids.iter().map(|_| vec![0.0; m]).collect();
                    let mut step: u64 = 0;
                    let mut t_virtual =
                        crate::engine::next_event_time(&cfg.timing, 1, 0.0, &mut timing_rng);
                    while t_virtual <= cfg.horizon && !stop.load(Ordering::Relaxed) {
                        wait_until(start + Duration::from_secs_f64(t_virtual / scale));
                        for (buf, &j) in snaps.iter_mut().zip(neighbor_ids) {
                            board.snapshot_read(j, buf);
                        }
                        cfg.noise.draw_into(&mut noise, &mut noise_rng);
                        let snap_refs: Vec<&[f64]> = snaps.iter().map(|s| s.as_slice()).collect();
                        let next = flocking_update(
                            &x,
                            &snap_refs,
                            objective,
                            potential,
                            cfg.gamma_tilde,
                            &noise,
                        );
                        let norm2: f64 = next.iter().map(|v| v * v).sum();
                        if !norm2.is_finite() || norm2.sqrt() > DIVERGENCE_NORM {
                            *divergence.lock().unwrap() =
                                Some(Divergence { time: t_virtual, thread: i });
                            stop.store(true, Ordering::Relaxed);
                            break;
                        }
                        x = next;
                        step += 1;
                        board.publish(i, &x, step);
                        t_virtual = crate::engine::next_event_time(
                            &cfg.timing,
                            step + 1,
                            t_virtual,
                            &mut timing_rng,
                        );
                    }
                });
            }

            // Sampler: record the board at each virtual grid time except the
            // last; the final record is taken from the quiesced board after
            // the workers join, so it reflects every completion up to the
            // horizon exactly.
            //
            // Constant timing makes the completion count at virtual time t
            // deterministic (floor(t / dt)); waiting for the counts keeps
            // records faithful to the virtual grid even when the host
            // scheduler delays workers past their wall deadlines.
            let constant = cfg.timing.kind == crate::stochastic::TimingKind::Constant;
            let mut buf = vec![0.0; m];
            for r in 0..total_records.saturating_sub(1) {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let t = r as f64 * grid;
                wait_until(start + Duration::from_secs_f64(t / scale));
                if constant {
                    let expected = (t / cfg.timing.mean + 1e-9).floor() as u64;
                    let give_up = Instant::now() + Duration::from_secs(30);
                    'counts: while !stop.load(Ordering::Relaxed) && Instant::now() < give_up {
                        for j in 0..n {
                            if board.step_count(j) < expected {
                                std::thread::yield_now();
                                continue 'counts;
                            }
                        }
                        break;
                    }
                }
                let mut flat = Vec::with_capacity(n * m);
                for j in 0..n {
                    board.snapshot_read(j, &mut buf);
                    flat.extend_from_slice(&buf);
                }
                records.push((t, flat));
                if cfg.stop_on_hit {
                    if let (Some(radius), Some(xstar)) = (cfg.hit_radius, objective.optimum.as_ref())
                    {
                        let last = &records.last().unwrap().1;
                        let xbar = crate::analysis::group_mean(last, n, m);
                        let d2: f64 =
                            xbar.iter().zip(xstar).map(|(a, b)| (a - b) * (a - b)).sum();
                        if d2.sqrt() < radius {
                            stop.store(true, Ordering::Relaxed);
                            break;
                        }
                    }
                }
            }
        });
    }));
    if let Err(panic) = outcome {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        return Err(Error::WorkerPanic(msg));
    }

    let diverged = divergence.into_inner().unwrap();
    if diverged.is_none() && !stop.load(Ordering::Relaxed) && records.len() + 1 == total_records {
        let t = (total_records - 1) as f64 * grid;
        let mut buf = vec![0.0; m];
        let mut flat = Vec::with_capacity(n * m);
        for j in 0..n {
            board.snapshot_read(j, &mut buf);
            flat.extend_from_slice(&buf);
        }
        records.push((t, flat));
    }
    let mut trace = Trace {
        mode: cfg.mode,
        n_states: n,
        dim: m,
        times: Vec::with_capacity(records.len()),
        xbar: Vec::new(),
        vbar: Vec::new(),
        u: objective.optimum.as_ref().map(|_| Vec::new()),
        f_xbar: Vec::new(),
        per_thread: cfg.record_per_thread.then(Vec::new),
        diverged,
        time_scale: Some(scale),
    };
    for (t, flat) in &records {
        let xbar = crate::analysis::group_mean(flat, n, m);
        trace.times.push(*t);
        trace.vbar.push(crate::analysis::cohesion(flat, n, m));
        trace.f_xbar.push(objective.value(&xbar));
        if let (Some(u), Some(xstar)) = (trace.u.as_mut(), objective.optimum.as_ref()) {
            u.push(crate::analysis::distance_to_opt(&xbar, xstar));
        }
        if let Some(p) = trace.per_thread.as_mut() {
            p.extend_from_slice(flat);
        }
        trace.xbar.extend_from_slice(&xbar);
    }
    Ok(trace)
}
