//! Continuum-limit verification: Euler-Maruyama integration of the limiting
//! diffusions and Gibbs stationary-density checks.

use crate::config::{CentralizedInit, ExperimentConfig, Mode};
use crate::engine::{Divergence, Trace, DIVERGENCE_NORM};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::potential::Potential;
use crate::stochastic::{Purpose, RngStreams};
use crate::topology::Graph;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Drift callback: writes the drift at the given state into the output slice.
pub type DriftFn = Box<dyn Fn(&[f64], &mut [f64]) + Sync + Send>;

/// Unnormalized log-density callback.
pub type LogDensityFn = Box<dyn Fn(&[f64]) -> f64 + Sync + Send>;

/// A diffusion dY = drift(Y) dt + scale dB with isotropic noise.
pub struct SdeSystem {
    pub dim: usize,
    pub drift: DriftFn,
    pub scale: f64,
}

impl SdeSystem {
    pub fn drift_at(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.drift)(y, &mut out);
        out
    }
}

/// A recorded sample path: `states` holds records x dim, row-major.
#[derive(Debug, Clone)]
pub struct SdePath {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
}

impl SdePath {
    pub fn records(&self) -> usize {
        self.times.len()
    }

    pub fn state_at(&self, r: usize) -> &[f64] {
        &self.states[r * self.dim..(r + 1) * self.dim]
    }
}

/// Euler-Maruyama integration from y0 to t_end, recording the initial state
/// and every `record_stride`-th step thereafter.
pub fn euler_maruyama(
    sys: &SdeSystem,
    y0: &[f64],
    dt: f64,
    t_end: f64,
    rng: &mut ChaCha8Rng,
    record_stride: usize,
) -> Result<SdePath> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("sde dt must be > 0, got {dt}")));
    }
    if t_end < 0.0 {
        return Err(Error::Parameter(format!("sde horizon must be >= 0, got {t_end}")));
    }
    let stride = record_stride.max(1);
    let steps = (t_end / dt + 1e-9).floor() as usize;
    let dim = sys.dim;
    let mut y = y0.to_vec();
    let mut drift = vec![0.0; dim];
    let sqrt_dt = dt.sqrt();

    let mut path = SdePath {
        dim,
        times: Vec::with_capacity(steps / stride + 2),
        states: Vec::with_capacity((steps / stride + 2) * dim),
    };
    path.times.push(0.0);
    path.states.extend_from_slice(&y);

    for k in 1..=steps {
        (sys.drift)(&y, &mut drift);
        for i in 0..dim {
            let xi: f64 = StandardNormal.sample(rng);
            y[i] += drift[i] * dt + sys.scale * sqrt_dt * xi;
        }
        let norm2: f64 = y.iter().map(|v| v * v).sum();
        if !norm2.is_finite() || norm2.sqrt() > DIVERGENCE_NORM {
            return Err(Error::Diverged { time: k as f64 * dt, thread: 0 });
        }
        if k % stride == 0 {
            path.times.push(k as f64 * dt);
            path.states.extend_from_slice(&y);
        }
    }
    Ok(path)
}

/// Total interaction energy of the stacked state:
/// H(y) = sum_i f(y_i) + (1/2) sum_i sum_{j != i} alpha_ij J(||y_i - y_j||).
pub fn stacked_energy(y: &[f64], objective: &Objective, potential: &Potential, graph: &Graph) -> f64 {
    let n = graph.n();
    let m = objective.dim();
    debug_assert_eq!(y.len(), n * m);
    let mut h = 0.0;
    for i in 0..n {
        h += objective.value(&y[i * m..(i + 1) * m]);
    }
    let mut diff = vec![0.0; m];
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.has_edge(i, j) {
                for d in 0..m {
                    diff[d] = y[i * m + d] - y[j * m + d];
                }
                h += potential.eval_j(&diff);
            }
        }
    }
    h
}

/// The stacked N*m-dimensional flocking diffusion in its natural time scale:
/// drift_i = [-grad f(y_i) + sum_j alpha_ij g(y_i - y_j)] * gamma_rate,
/// diffusion scale tau * gamma_rate. The drift equals -gamma_rate * grad H.
pub fn flocking_sde_system(
    objective: &Objective,
    potential: &Potential,
    graph: &Graph,
    tau: f64,
    gamma_rate: f64,
) -> Result<SdeSystem> {
    if !graph.is_connected_bfs() {
        return Err(Error::Topology("flocking SDE requires a connected topology".into()));
    }
    let n = graph.n();
    let m = objective.dim();
    let neighbors = graph.neighbor_lists();
    let obj = objective.clone();
    let pot = *potential;
    let drift = move |y: &[f64], out: &mut [f64]| {
        let mut grad = vec![0.0; m];
        let mut diff = vec![0.0; m];
        let mut g = vec![0.0; m];
        for i in 0..n {
            let yi = &y[i * m..(i + 1) * m];
            obj.gradient_into(yi, &mut grad);
            for d in 0..m {
                out[i * m + d] = -grad[d];
            }
            for &j in &neighbors[i] {
                for d in 0..m {
                    diff[d] = yi[d] - y[j * m + d];
                }
                pot.eval_g_into(&diff, &mut g);
                for d in 0..m {
                    out[i * m + d] += g[d];
                }
            }
            for d in 0..m {
                out[i * m + d] *= gamma_rate;
            }
        }
    };
    Ok(SdeSystem { dim: n * m, drift: Box::new(drift), scale: tau * gamma_rate })
}

/// Single-iterate limit of the centralized scheme:
/// dy = -grad f(y) gamma dt + tau_n gamma dB.
pub fn centralized_sde_system(objective: &Objective, tau_n: f64, gamma_rate: f64) -> SdeSystem {
    let m = objective.dim();
    let obj = objective.clone();
    let drift = move |y: &[f64], out: &mut [f64]| {
        obj.gradient_into(y, out);
        for v in out.iter_mut() {
            *v = -*v * gamma_rate;
        }
    };
    SdeSystem { dim: m, drift: Box::new(drift), scale: tau_n * gamma_rate }
}

/// Normalized density over a box, evaluated from an unnormalized log-density
/// by tensor-grid Simpson quadrature.
pub struct GibbsDensity {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub normalization: f64,
    log_unnorm: LogDensityFn,
}

impl GibbsDensity {
    pub fn pdf(&self, y: &[f64]) -> f64 {
        ((self.log_unnorm)(y)).exp() / self.normalization
    }

    /// Integral of the normalized density over its own box; should be 1
    /// within quadrature accuracy.
    pub fn normalization_check(&self) -> f64 {
        simpson_integrate(&|y| self.pdf(y), &self.lo, &self.hi, panels_for_dim(self.dim))
    }
}

fn panels_for_dim(dim: usize) -> usize {
    match dim {
        1 => 2048,
        2 => 256,
        3 => 64,
        _ => 32,
    }
}

/// Tensor-product Simpson rule over the box; `panels` per dimension must be
/// even.
fn simpson_integrate(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], panels: usize) -> f64 {
    let dim = lo.len();
    let n = panels + 1;
    let h: Vec<f64> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (b - a) / panels as f64)
        .collect();
    let weight_1d = |idx: usize| -> f64 {
        if idx == 0 || idx == panels {
            1.0
        } else if idx % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut sum = 0.0;
    let total = n.pow(dim as u32);
    let mut point = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for d in 0..dim {
            let idx = rem % n;
            rem /= n;
            point[d] = lo[d] + idx as f64 * h[d];
            w *= weight_1d(idx);
        }
        sum += w * f(&point);
    }
    let cell: f64 = h.iter().map(|hd| hd / 3.0).product();
    sum * cell
}

fn mass_capture_ratio(
    log_unnorm: &(dyn Fn(&[f64]) -> f64 + Sync + Send),
    lo: &[f64],
    hi: &[f64],
) -> f64 {
    let dim = lo.len();
    let panels = panels_for_dim(dim);
    let f = |y: &[f64]| (log_unnorm(y)).exp();
    let inner = simpson_integrate(&f, lo, hi, panels);
    // Doubled box around the same center.
    let mut lo2 = vec![0.0; dim];
    let mut hi2 = vec![0.0; dim];
    for d in 0..dim {
        let c = 0.5 * (lo[d] + hi[d]);
        let half = hi[d] - c;
        lo2[d] = c - 2.0 * half;
        hi2[d] = c + 2.0 * half;
    }
    let outer = simpson_integrate(&f, &lo2, &hi2, panels);
    if outer <= 0.0 {
        return 0.0;
    }
    inner / outer
}

fn normalize_density(log_unnorm: LogDensityFn, lo: Vec<f64>, hi: Vec<f64>) -> Result<GibbsDensity> {
    let dim = lo.len();
    let captured = mass_capture_ratio(log_unnorm.as_ref(), &lo, &hi);
    if captured < 0.99 {
        return Err(Error::MassCapture { captured });
    }
    let f = |y: &[f64]| (log_unnorm(y)).exp();
    let k = simpson_integrate(&f, &lo, &hi, panels_for_dim(dim));
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Parameter(format!("non-finite normalization constant {k}")));
    }
    Ok(GibbsDensity { dim, lo, hi, normalization: k, log_unnorm })
}

/// Joint Gibbs density of the stacked flocking diffusion over a box:
/// pi(y) = exp(-2 H(y) / temperature) / K with temperature tau^2 gamma_rate.
/// Desk-scale quadrature: stacked dimension N*m must be at most 4.
pub fn gibbs_joint(
    objective: &Objective,
    potential: &Potential,
    graph: &Graph,
    tau: f64,
    gamma_rate: f64,
    lo: &[f64],
    hi: &[f64],
) -> Result<GibbsDensity> {
    let dim = graph.n() * objective.dim();
    if dim > 4 {
        return Err(Error::Parameter(format!(
            "joint Gibbs quadrature is limited to stacked dimension <= 4, got {dim}"
        )));
    }
    if lo.len() != dim || hi.len() != dim {
        return Err(Error::Parameter("box dimension mismatch".into()));
    }
    let temperature = tau * tau * gamma_rate;
    if !(temperature > 0.0) {
        return Err(Error::Parameter("gibbs needs tau^2 gamma > 0".into()));
    }
    let obj = objective.clone();
    let pot = *potential;
    let g = graph.clone();
    let log =
        move |y: &[f64]| -> f64 { -2.0 * stacked_energy(y, &obj, &pot, &g) / temperature };
    normalize_density(Box::new(log), lo.to_vec(), hi.to_vec())
}

/// Limiting density of the group mean as the attraction grows unbounded:
/// pi*(ybar) = exp(-2 N f(ybar) / (sigma^2 gamma_tilde_step)) / K. This is
/// also the centralized N-sample limit, which is the noise-reduction
/// statement.
pub fn gibbs_mean_marginal(
    objective: &Objective,
    n: usize,
    sigma: f64,
    gamma_tilde_step: f64,
    lo: &[f64],
    hi: &[f64],
) -> Result<GibbsDensity> {
    let m = objective.dim();
    if lo.len() != m || hi.len() != m {
        return Err(Error::Parameter("box dimension mismatch".into()));
    }
    let temperature = sigma * sigma * gamma_tilde_step;
    if !(temperature > 0.0) {
        return Err(Error::Parameter("gibbs needs sigma^2 gamma_tilde > 0".into()));
    }
    let obj = objective.clone();
    let nf = n as f64;
    let log = move |y: &[f64]| -> f64 { -2.0 * nf * obj.value(y) / temperature };
    normalize_density(Box::new(log), lo.to_vec(), hi.to_vec())
}

/// Total-variation distance between a 1-d sample and a 1-d density,
/// using `bins` equal-width bins over the density's box. Samples outside the
/// box form an extra bin with theoretical mass 1 - (box mass).
pub fn empirical_vs_gibbs(samples: &[f64], density: &GibbsDensity, bins: usize) -> Result<f64> {
    if density.dim != 1 {
        return Err(Error::Parameter(
            "histogram TV comparison is defined for 1-d densities".into(),
        ));
    }
    if samples.len() < 100 * bins {
        return Err(Error::TooFewSamples { got: samples.len(), need: 100 * bins });
    }
    let (lo, hi) = (density.lo[0], density.hi[0]);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &s in samples {
        if s < lo || s >= hi {
            outside += 1;
        } else {
            let idx = (((s - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    let total = samples.len() as f64;
    // Theoretical bin masses by fine Simpson quadrature per bin.
    let mut theory = vec![0.0; bins];
    let mut mass_in_box = 0.0;
    for (b, th) in theory.iter_mut().enumerate() {
        let a = lo + b as f64 * width;
        let c = a + width;
        *th = simpson_integrate(&|y| density.pdf(y), &[a], &[c], 32);
        mass_in_box += *th;
    }
    let mut tv = (outside as f64 / total - (1.0 - mass_in_box)).abs();
    for b in 0..bins {
        tv += (counts[b] as f64 / total - theory[b]).abs();
    }
    Ok(0.5 * tv)
}

/// Runs the SDE engine for one replicate, producing a trace on the same
/// simulated-time axis as the discrete engines.
///
/// The flocking diffusion in simulated time has per-particle drift
/// (gamma_tilde/dt_tilde) [-grad f + coupling] and diffusion scale
/// sigma gamma_tilde / sqrt(dt_tilde); the centralized limit uses the
/// N-sample-average constants.
pub fn run_sde_trace(cfg: &ExperimentConfig, replicate: usize) -> Result<Trace> {
    let objective = cfg.objective.build()?;
    let m = objective.dim();
    let streams = RngStreams::new(cfg.seed).replicate(replicate);
    let mut rng = streams.stream(0, Purpose::Noise);
    let dt = cfg.sde_dt_effective();

    let (sys, y0, n_states) = match cfg.mode {
        Mode::Centralized => {
            let gamma = cfg
                .resolved_gamma()?
                .ok_or_else(|| Error::Config(vec!["gamma: required for centralized sde".into()]))?;
            let timing = cfg.centralized_timing()?;
            let n = cfg.n_threads();
            // Time change to simulated seconds: the drift picks up a factor
            // gamma/dt and the noise std becomes sigma*gamma/sqrt(N dt).
            let gamma_rate = 1.0 / timing.mean;
            let mut sys = centralized_sde_system(&objective, 0.0, gamma_rate * gamma);
            sys.scale = cfg.noise.sigma * gamma / (n as f64 * timing.mean).sqrt();
            let mut init_rng = streams.stream(0, Purpose::Init);
            let y0 = match cfg.init.centralized {
                CentralizedInit::Center => cfg
                    .init
                    .lo
                    .iter()
                    .zip(&cfg.init.hi)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
                CentralizedInit::Random => draw_box(&cfg.init.lo, &cfg.init.hi, &mut init_rng),
            };
            (sys, y0, 1usize)
        }
        Mode::Flocking | Mode::Independent => {
            let graph = cfg.topology.build()?;
            let n = graph.n();
            let potential = if cfg.mode == Mode::Flocking {
                cfg.potential
            } else {
                Potential::linear(0.0)
            };
            let tau = cfg.noise.sigma * (cfg.gamma_tilde * cfg.timing.mean).sqrt();
            let gamma_rate = 1.0 / cfg.timing.mean;
            // x-time drift multiplies by gamma_tilde, noise by sqrt(gamma_tilde).
            let mut sys = flocking_sde_system(
                &objective,
                &potential,
                &graph,
                tau,
                gamma_rate * cfg.gamma_tilde,
            )?;
            sys.scale = cfg.noise.sigma * cfg.gamma_tilde / cfg.timing.mean.sqrt();
            let mut y0 = vec![0.0; n * m];
            for i in 0..n {
                let mut init_rng = streams.stream(i, Purpose::Init);
                let x0 = draw_box(&cfg.init.lo, &cfg.init.hi, &mut init_rng);
                y0[i * m..(i + 1) * m].copy_from_slice(&x0);
            }
            (sys, y0, n)
        }
    };

    let grid = cfg.record_interval_effective();
    let stride = (grid / dt + 0.5).round().max(1.0) as usize;
    let path = match euler_maruyama(&sys, &y0, dt, cfg.horizon, &mut rng, stride) {
        Ok(p) => p,
        Err(Error::Diverged { time, thread }) => {
            return Ok(diverged_trace(cfg, &objective, n_states, time, thread))
        }
        Err(e) => return Err(e),
    };

    Ok(path_to_trace(cfg, &objective, n_states, &path))
}

fn draw_box(lo: &[f64], hi: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| if a == b { a } else { rng.gen_range(a..b) })
        .collect()
}

fn diverged_trace(
    cfg: &ExperimentConfig,
    objective: &Objective,
    n_states: usize,
    time: f64,
    thread: usize,
) -> Trace {
    Trace {
        mode: cfg.mode,
        n_states,
        dim: objective.dim(),
        times: Vec::new(),
        xbar: Vec::new(),
        vbar: Vec::new(),
        u: objective.optimum.as_ref().map(|_| Vec::new()),
        f_xbar: Vec::new(),
        per_thread: cfg.record_per_thread.then(Vec::new),
        diverged: Some(Divergence { time, thread }),
        time_scale: None,
    }
}

fn path_to_trace(
    cfg: &ExperimentConfig,
    objective: &Objective,
    n_states: usize,
    path: &SdePath,
) -> Trace {
    let m = objective.dim();
    let records = path.records();
    let mut trace = Trace {
        mode: cfg.mode,
        n_states,
        dim: m,
        times: path.times.clone(),
        xbar: Vec::with_capacity(records * m),
        vbar: Vec::with_capacity(records),
        u: objective.optimum.as_ref().map(|_| Vec::with_capacity(records)),
        f_xbar: Vec::with_capacity(records),
        per_thread: cfg.record_per_thread.then(|| Vec::with_capacity(records * n_states * m)),
        diverged: None,
        time_scale: None,
    };
    for r in 0..records {
        let state = path.state_at(r);
        let xbar = crate::analysis::group_mean(state, n_states, m);
        let vbar = crate::analysis::cohesion(state, n_states, m);
        trace.vbar.push(vbar);
        trace.f_xbar.push(objective.value(&xbar));
        if let (Some(u), Some(xstar)) = (trace.u.as_mut(), objective.optimum.as_ref()) {
            u.push(crate::analysis::distance_to_opt(&xbar, xstar));
        }
        if let Some(p) = trace.per_thread.as_mut() {
            p.extend_from_slice(state);
        }
        trace.xbar.extend_from_slice(&xbar);
    }
    trace
}
