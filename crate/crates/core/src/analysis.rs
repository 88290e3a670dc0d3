//! Metrics, ensemble statistics, hitting times, and the closed-form bound
//! calculators with their plumbing.

use crate::config::ExperimentConfig;
use crate::engine::{run_experiment, Trace};
use crate::error::{Error, Result};
use crate::topology::laplacian;
use rayon::prelude::*;

/// Mean of the per-thread solutions in a flattened n x m block.
pub fn group_mean(per_thread: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut xbar = vec![0.0; m];
    for s in 0..n {
        for i in 0..m {
            xbar[i] += per_thread[s * m + i];
        }
    }
    for v in xbar.iter_mut() {
        *v /= n as f64;
    }
    xbar
}

/// Cohesion V-bar = (1/N) sum_i (1/2)||x_i - x_bar||^2.
pub fn cohesion(per_thread: &[f64], n: usize, m: usize) -> f64 {
    let xbar = group_mean(per_thread, n, m);
    let mut v = 0.0;
    for s in 0..n {
        let mut d2 = 0.0;
        for i in 0..m {
            let d = per_thread[s * m + i] - xbar[i];
            d2 += d * d;
        }
        v += 0.5 * d2;
    }
    v / n as f64
}

/// U = (1/2)||x_bar - x*||^2.
pub fn distance_to_opt(xbar: &[f64], xstar: &[f64]) -> f64 {
    0.5 * xbar
        .iter()
        .zip(xstar)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

/// F-bar = (1/N) sum_i (1/2)||x_i - x*||^2, which decomposes as V-bar + U.
pub fn mean_half_sq_to(per_thread: &[f64], n: usize, m: usize, target: &[f64]) -> f64 {
    let mut f = 0.0;
    for s in 0..n {
        let mut d2 = 0.0;
        for i in 0..m {
            let d = per_thread[s * m + i] - target[i];
            d2 += d * d;
        }
        f += 0.5 * d2;
    }
    f / n as f64
}

/// Long-run cohesion bound under a bounded gradient (eta):
/// psi1*(N) = (1/(2 a l2)) [sqrt(eta^2/(4 a l2) + b|TrL|/(2N)
///            + m tau^2 gt (N-1)/(2N)) + sqrt(eta^2/(4 a l2))]^2.
#[allow(clippy::too_many_arguments)]
pub fn bound_psi1(
    eta: f64,
    a: f64,
    lambda2: f64,
    b: f64,
    tr_l: f64,
    m: usize,
    tau: f64,
    gamma_tilde_rate: f64,
    n: usize,
) -> Result<f64> {
    let al2 = a * lambda2;
    if !(al2 > 0.0) {
        return Err(Error::BoundAssumption(format!(
            "psi1 needs a*lambda2 > 0, got {al2}"
        )));
    }
    let nf = n as f64;
    let c4 = eta * eta / (4.0 * al2);
    let c3 = c4
        + b * tr_l.abs() / (2.0 * nf)
        + m as f64 * tau * tau * gamma_tilde_rate * (nf - 1.0) / (2.0 * nf);
    Ok((c3.sqrt() + c4.sqrt()).powi(2) / (2.0 * al2))
}

/// Long-run cohesion bound under strong convexity (kappa):
/// psi2*(N) = [b|TrL| + m tau^2 gt (N-1)] / (4N(kappa + a l2)).
#[allow(clippy::too_many_arguments)]
pub fn bound_psi2(
    b: f64,
    tr_l: f64,
    m: usize,
    tau: f64,
    gamma_tilde_rate: f64,
    n: usize,
    kappa: f64,
    a: f64,
    lambda2: f64,
) -> Result<f64> {
    let denom = kappa + a * lambda2;
    if !(denom > 0.0) {
        return Err(Error::BoundAssumption(format!(
            "psi2 needs kappa + a*lambda2 > 0, got {denom}"
        )));
    }
    let nf = n as f64;
    Ok(
        (b * tr_l.abs() + m as f64 * tau * tau * gamma_tilde_rate * (nf - 1.0))
            / (4.0 * nf * denom),
    )
}

/// Long-run convergence bound for the group mean:
/// phi*(N) = (m tau^2 gt / (4 kappa N)) [1 + (mu - kappa)(N-1)/(a l2)].
#[allow(clippy::too_many_arguments)]
pub fn bound_phi(
    m: usize,
    tau: f64,
    gamma_tilde_rate: f64,
    kappa: f64,
    mu: f64,
    a: f64,
    lambda2: f64,
    n: usize,
) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::BoundAssumption(format!("phi needs kappa > 0, got {kappa}")));
    }
    let al2 = a * lambda2;
    if !(al2 > 0.0) {
        return Err(Error::BoundAssumption(format!("phi needs a*lambda2 > 0, got {al2}")));
    }
    if mu < kappa {
        return Err(Error::BoundAssumption(format!(
            "phi needs mu >= kappa, got mu={mu}, kappa={kappa}"
        )));
    }
    let nf = n as f64;
    Ok(m as f64 * tau * tau * gamma_tilde_rate / (4.0 * kappa * nf)
        * (1.0 + (mu - kappa) * (nf - 1.0) / al2))
}

/// Transient convergence bound evaluated at simulated time t:
/// e^{-rate t} [U0 + (mu-kappa)/(a l2) V0] + phi* (1 - e^{-rate t}),
/// where rate = 2 kappa gamma_tilde_rate * gamma_tilde_step.
#[allow(clippy::too_many_arguments)]
pub fn transient_u_bound(
    t: f64,
    u0: f64,
    vbar0: f64,
    phi_star: f64,
    rate: f64,
    kappa: f64,
    mu: f64,
    a: f64,
    lambda2: f64,
) -> f64 {
    let decay = (-rate * t).exp();
    decay * (u0 + (mu - kappa) / (a * lambda2) * vbar0) + phi_star * (1.0 - decay)
}

/// Long-run lower bound of the centralized scheme: m sigma^2 Gamma / (4 mu N).
pub fn centralized_longrun_lower(m: usize, sigma: f64, gamma_step: f64, mu: f64, n: usize) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::BoundAssumption(format!("lower bound needs mu > 0, got {mu}")));
    }
    Ok(m as f64 * sigma * sigma * gamma_step / (4.0 * mu * n as f64))
}

/// First record time at which the trace's group mean enters the open ball of
/// the given radius around `center`; None if it never does.
pub fn hitting_time(trace: &Trace, center: &[f64], radius: f64) -> Option<f64> {
    assert!(radius > 0.0, "radius must be positive");
    for r in 0..trace.records() {
        let x = trace.xbar_at(r);
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2.sqrt() < radius {
            return Some(trace.times[r]);
        }
    }
    None
}

/// Every closed-form bound applicable to a configuration, along with the
/// constants that fed it. A bound is reported only when its assumption
/// constants are declared by the objective.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub n: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub lambda2: f64,
    pub tr_l: f64,
    pub tau: f64,
    pub gamma_tilde_rate: f64,
    pub eta: Option<f64>,
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
    pub psi1: Option<f64>,
    pub psi2: Option<f64>,
    pub phi: Option<f64>,
    pub centralized_lower: Option<f64>,
    /// Convergence-rate factor 2 kappa gamma_tilde_rate gamma_tilde_step.
    pub rate: Option<f64>,
}

impl BoundReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("bound.n = {}\n", self.n));
        s.push_str(&format!("bound.m = {}\n", self.m));
        s.push_str(&format!("bound.a = {}\n", self.a));
        s.push_str(&format!("bound.b = {}\n", self.b));
        s.push_str(&format!("bound.lambda2 = {}\n", self.lambda2));
        s.push_str(&format!("bound.tr_l = {}\n", self.tr_l));
        s.push_str(&format!("bound.tau = {}\n", self.tau));
        s.push_str(&format!("bound.gamma_tilde_rate = {}\n", self.gamma_tilde_rate));
        let opt = |name: &str, v: Option<f64>| match v {
            Some(x) => format!("bound.{name} = {x}\n"),
            None => format!("bound.{name} = undeclared\n"),
        };
        s.push_str(&opt("eta", self.eta));
        s.push_str(&opt("kappa", self.kappa));
        s.push_str(&opt("mu", self.mu));
        s.push_str(&opt("psi1_star", self.psi1));
        s.push_str(&opt("psi2_star", self.psi2));
        s.push_str(&opt("phi_star", self.phi));
        s.push_str(&opt("centralized_lower", self.centralized_lower));
        s.push_str(&opt("rate", self.rate));
        s
    }
}

/// Computes every applicable bound for the configuration.
pub fn bound_report(cfg: &ExperimentConfig) -> Result<BoundReport> {
    let obj = cfg.objective.build()?;
    let graph = cfg.topology.build()?;
    let lap = laplacian(&graph);
    let n = cfg.n_threads();
    let m = obj.dim();
    let a = cfg.potential.a;
    let b = cfg.potential.repulsion_bound();
    let tau = cfg.noise.sigma * (cfg.gamma_tilde * cfg.timing.mean).sqrt();
    let gamma_tilde_rate = 1.0 / cfg.timing.mean;

    let psi1 = obj
        .eta
        .and_then(|eta| bound_psi1(eta, a, lap.lambda2, b, lap.trace, m, tau, gamma_tilde_rate, n).ok());
    let psi2 = obj
        .kappa
        .and_then(|k| bound_psi2(b, lap.trace, m, tau, gamma_tilde_rate, n, k, a, lap.lambda2).ok());
    let phi = match (obj.kappa, obj.mu) {
        (Some(k), Some(mu)) => bound_phi(m, tau, gamma_tilde_rate, k, mu, a, lap.lambda2, n).ok(),
        _ => None,
    };
    let centralized_lower = match (obj.mu, cfg.resolved_gamma()?) {
        (Some(mu), Some(gamma)) => centralized_longrun_lower(m, cfg.noise.sigma, gamma, mu, n).ok(),
        _ => None,
    };
    let rate = obj.kappa.map(|k| 2.0 * k * gamma_tilde_rate * cfg.gamma_tilde);
    Ok(BoundReport {
        n,
        m,
        a,
        b,
        lambda2: lap.lambda2,
        tr_l: lap.trace,
        tau,
        gamma_tilde_rate,
        eta: obj.eta,
        kappa: obj.kappa,
        mu: obj.mu,
        psi1,
        psi2,
        phi,
        centralized_lower,
        rate,
    })
}

/// Per-record mean/sd/count across replicates for one metric.
#[derive(Debug, Clone, Default)]
pub struct MetricSeries {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub count: Vec<usize>,
}

impl MetricSeries {
    fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let mut mean = Vec::with_capacity(columns.len());
        let mut sd = Vec::with_capacity(columns.len());
        let mut count = Vec::with_capacity(columns.len());
        for col in columns {
            let n = col.len();
            let mu = col.iter().sum::<f64>() / n.max(1) as f64;
            let var = if n > 1 {
                col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            mean.push(mu);
            sd.push(var.sqrt());
            count.push(n);
        }
        MetricSeries { mean, sd, count }
    }

    /// Standard error of the mean at a record index.
    pub fn se(&self, r: usize) -> f64 {
        self.sd[r] / (self.count[r].max(1) as f64).sqrt()
    }

    /// Half-width of the 95% confidence interval at a record index.
    pub fn ci95(&self, r: usize) -> f64 {
        1.96 * self.se(r)
    }
}

/// Per-replicate scalar summaries over the long-run window.
#[derive(Debug, Clone)]
pub struct ReplicateSummary {
    pub longrun_u: Option<f64>,
    pub longrun_vbar: Option<f64>,
    pub hit_time: Option<f64>,
    pub diverged: bool,
    pub u0: Option<f64>,
    pub vbar0: f64,
}

/// Aggregated ensemble statistics over R seeded replicates.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub u: Option<MetricSeries>,
    pub vbar: MetricSeries,
    pub f_xbar: MetricSeries,
    pub replicates: usize,
    pub diverged_count: usize,
    pub summaries: Vec<ReplicateSummary>,
}

/// Fraction of the horizon treated as the long-run window (final 25%).
pub const LONGRUN_WINDOW: f64 = 0.75;

fn longrun_mean(times: &[f64], values: &[f64], horizon: f64) -> Option<f64> {
    let cutoff = LONGRUN_WINDOW * horizon;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, v) in times.iter().zip(values) {
        if *t >= cutoff {
            sum += v;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Runs R seeded replicates of the config and aggregates them per record
/// time. Replicates run concurrently; results are deterministic because each
/// replicate owns derived substreams.
pub fn ensemble(cfg: &ExperimentConfig, replicates: usize) -> Result<EnsembleStats> {
    if replicates < 2 {
        return Err(Error::Parameter(format!(
            "ensemble needs R >= 2 replicates, got {replicates}"
        )));
    }
    let traces: Vec<Trace> = (0..replicates)
        .into_par_iter()
        .map(|r| run_experiment(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, &traces))
}

/// Aggregates already-produced traces (used by the CLI so the CSV and the
/// summary come from the same runs).
pub fn aggregate(cfg: &ExperimentConfig, traces: &[Trace]) -> EnsembleStats {
    let max_records = traces.iter().map(|t| t.records()).max().unwrap_or(0);
    let grid = cfg.record_interval_effective();
    let times: Vec<f64> = (0..max_records).map(|r| r as f64 * grid).collect();
    let has_u = traces.iter().all(|t| t.u.is_some());

    type MetricGetter<'a> = &'a dyn Fn(&Trace, usize) -> f64;
    type MetricPresent<'a> = &'a dyn Fn(&Trace) -> bool;
    let collect_metric = |get: MetricGetter, present: MetricPresent| {
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(traces.len()); max_records];
        for tr in traces {
            if !present(tr) {
                continue;
            }
            for (r, col) in cols.iter_mut().enumerate().take(tr.records()) {
                col.push(get(tr, r));
            }
        }
        MetricSeries::from_columns(cols)
    };

    let u = has_u.then(|| collect_metric(&|t, r| t.u.as_ref().unwrap()[r], &|t| t.u.is_some()));
    let vbar = collect_metric(&|t, r| t.vbar[r], &|_| true);
    let f_xbar = collect_metric(&|t, r| t.f_xbar[r], &|_| true);

    let mut summaries = Vec::with_capacity(traces.len());
    let mut diverged_count = 0;
    for tr in traces {
        if tr.diverged.is_some() {
            diverged_count += 1;
        }
        let hit_time = match (cfg.hit_radius, cfg.objective.build().ok().and_then(|o| o.optimum)) {
            (Some(radius), Some(center)) => hitting_time(tr, &center, radius),
            _ => None,
        };
        summaries.push(ReplicateSummary {
            longrun_u: tr
                .u
                .as_ref()
                .and_then(|u| longrun_mean(&tr.times, u, cfg.horizon)),
            longrun_vbar: longrun_mean(&tr.times, &tr.vbar, cfg.horizon),
            hit_time,
            diverged: tr.diverged.is_some(),
            u0: tr.u.as_ref().and_then(|u| u.first().copied()),
            vbar0: tr.vbar.first().copied().unwrap_or(0.0),
        });
    }

    EnsembleStats {
        times,
        u,
        vbar,
        f_xbar,
        replicates: traces.len(),
        diverged_count,
        summaries,
    }
}

fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, (var / n).sqrt()))
}

impl EnsembleStats {
    /// Mean and standard error of the per-replicate long-run U averages.
    pub fn longrun_u(&self) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self.summaries.iter().filter_map(|s| s.longrun_u).collect();
        mean_se(&vals)
    }

    /// Mean and standard error of the per-replicate long-run V-bar averages.
    pub fn longrun_vbar(&self) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self.summaries.iter().filter_map(|s| s.longrun_vbar).collect();
        mean_se(&vals)
    }

    /// (mean, sd, hit count) of hitting times over replicates that hit.
    pub fn hit_stats(&self) -> Option<(f64, f64, usize)> {
        let vals: Vec<f64> = self.summaries.iter().filter_map(|s| s.hit_time).collect();
        let (mean, se) = mean_se(&vals)?;
        let sd = se * (vals.len() as f64).sqrt();
        Some((mean, sd, vals.len()))
    }

    pub fn mean_u0(&self) -> Option<f64> {
        let vals: Vec<f64> = self.summaries.iter().filter_map(|s| s.u0).collect();
        mean_se(&vals).map(|(m, _)| m)
    }

    pub fn mean_vbar0(&self) -> f64 {
        let vals: Vec<f64> = self.summaries.iter().map(|s| s.vbar0).collect();
        mean_se(&vals).map(|(m, _)| m).unwrap_or(0.0)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic and its 5% asymptotic critical
/// value c(0.05) sqrt((n+m)/(nm)), c(0.05) = 1.358.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.total_cmp(v));
    ys.sort_by(|u, v| u.total_cmp(v));
    let (n, m) = (xs.len(), ys.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    let crit = 1.358 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    (d, crit)
}
