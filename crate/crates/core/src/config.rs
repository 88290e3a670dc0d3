//! Experiment configuration: the full parameterization of a run, TOML
//! parsing/serialization with strict key checking, and the preset library.

use crate::error::{Error, Result};
use crate::objective::{
    ackley_objective, double_well_objective, lognorm_objective, quadratic_objective, Objective,
};
use crate::potential::{Potential, Repulsion};
use crate::stochastic::{overhead_sampling_time, NoiseModel, SamplingTimeModel, TimingKind};
use crate::topology::{make_topology, Graph, TopologyKind};
use serde::{Deserialize, Serialize};

/// Which discrete-time scheme the experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Asynchronous single-sample threads coupled through the potential.
    Flocking,
    /// One shared iterate per step using the average of N gradient samples.
    Centralized,
    /// Flocking scheme with the coupling term removed.
    Independent,
}

/// Which execution engine produces the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Deterministic discrete-event simulator.
    Event,
    /// Genuinely multithreaded runtime over a shared publication board.
    Parallel,
    /// Euler-Maruyama integration of the continuum-limit dynamics.
    Sde,
}

/// Objective selection, referenced by name plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Lognorm {
        m: usize,
    },
    Quadratic {
        m: usize,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Ackley,
    DoubleWell,
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective> {
        match self {
            ObjectiveSpec::Lognorm { m } => {
                if *m < 1 {
                    return Err(Error::Parameter("objective.lognorm.m must be >= 1".into()));
                }
                Ok(lognorm_objective(*m))
            }
            ObjectiveSpec::Quadratic { m, kappa, center } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; *m]);
                quadratic_objective(*m, *kappa, c)
            }
            ObjectiveSpec::Ackley => Ok(ackley_objective()),
            ObjectiveSpec::DoubleWell => Ok(double_well_objective()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::Lognorm { m } => *m,
            ObjectiveSpec::Quadratic { m, .. } => *m,
            ObjectiveSpec::Ackley => 2,
            ObjectiveSpec::DoubleWell => 1,
        }
    }
}

/// Communication topology selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Number of threads N.
    pub n: usize,
    pub kind: TopologyKind,
}

impl TopologySpec {
    pub fn build(&self) -> Result<Graph> {
        make_topology(self.kind, self.n)
    }
}

/// How the centralized scheme's single iterate is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CentralizedInit {
    /// Center of the init box (default).
    #[default]
    Center,
    /// Uniform draw from the init box, like the flocking threads.
    Random,
}

/// Per-thread i.i.d. uniform initialization box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub centralized: CentralizedInit,
}

/// Settings for the SDE engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSettings {
    /// Euler-Maruyama step; defaults to one tenth of the base sampling time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Fraction of each path discarded before stationary comparisons.
    #[serde(default = "default_burn_in")]
    pub burn_in_frac: f64,
}

fn default_burn_in() -> f64 {
    0.2
}

impl Default for SdeSettings {
    fn default() -> Self {
        SdeSettings { dt: None, burn_in_frac: default_burn_in() }
    }
}

/// Settings for the multithreaded runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelSettings {
    /// Virtual seconds simulated per wall-clock second. Large factors shrink
    /// wall time but squeeze the per-step interval below what the host
    /// scheduler can pace; keep the scaled sampling time above ~0.3 ms.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
}

fn default_time_scale() -> f64 {
    50.0
}

impl Default for ParallelSettings {
    fn default() -> Self {
        ParallelSettings { time_scale: default_time_scale() }
    }
}

/// Full parameterization of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub potential: Potential,
    pub topology: TopologySpec,
    pub mode: Mode,
    pub engine: EngineKind,
    /// Flocking step size.
    pub gamma_tilde: f64,
    /// Centralized step size; derived from the proportional policy when
    /// `proportional_step` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// When set, the centralized step size follows gamma/dt = gamma_tilde/dt_tilde.
    #[serde(default)]
    pub proportional_step: bool,
    /// Single-sample timing model (mean is the base sampling time).
    pub timing: SamplingTimeModel,
    /// Synchronization-overhead exponent for the centralized scheme:
    /// dt = N^(1/beta) * dt_tilde. Absent means no overhead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub noise: NoiseModel,
    pub init: InitSpec,
    /// Simulated-seconds horizon.
    pub horizon: f64,
    /// Recording grid spacing; defaults to the centralized/base sampling time,
    /// whichever is smaller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_interval: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Record full per-thread solutions at every grid point.
    #[serde(default)]
    pub record_per_thread: bool,
    /// Ball radius around the optimum used for hitting-time summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_radius: Option<f64>,
    /// Stop a replicate at the first record inside the hit ball.
    #[serde(default)]
    pub stop_on_hit: bool,
    #[serde(default)]
    pub sde: SdeSettings,
    #[serde(default)]
    pub parallel: ParallelSettings,
}

impl ExperimentConfig {
    /// Number of threads N.
    pub fn n_threads(&self) -> usize {
        self.topology.n
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// Timing model of the centralized scheme (overhead applied when beta set).
    pub fn centralized_timing(&self) -> Result<SamplingTimeModel> {
        match self.beta {
            Some(beta) => overhead_sampling_time(&self.timing, self.n_threads(), beta),
            None => Ok(self.timing),
        }
    }

    /// Centralized step size after applying the proportional-step policy.
    pub fn resolved_gamma(&self) -> Result<Option<f64>> {
        if self.proportional_step {
            let dt = self.centralized_timing()?.mean;
            Ok(Some(self.gamma_tilde * dt / self.timing.mean))
        } else {
            Ok(self.gamma)
        }
    }

    pub fn record_interval_effective(&self) -> f64 {
        match self.record_interval {
            Some(r) => r,
            None => {
                let dt = self
                    .centralized_timing()
                    .map(|t| t.mean)
                    .unwrap_or(self.timing.mean);
                self.timing.mean.min(dt)
            }
        }
    }

    pub fn sde_dt_effective(&self) -> f64 {
        self.sde.dt.unwrap_or(self.timing.mean * 0.1)
    }

    /// Validates every field, returning the full list of violations.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let m = self.objective.dim();
        if let Err(e) = self.objective.build() {
            errs.push(format!("objective: {e}"));
        }
        if self.topology.n < 2 {
            errs.push(format!("topology.n: need >= 2 threads, got {}", self.topology.n));
        }
        if let TopologyKind::RandomKNeighbors { k, .. } = self.topology.kind {
            if k >= self.topology.n {
                errs.push(format!(
                    "topology.kind: random_k_neighbors needs k < n, got k={k}, n={}",
                    self.topology.n
                ));
            }
        }
        if !(self.gamma_tilde > 0.0) {
            errs.push(format!("gamma_tilde: must be > 0, got {}", self.gamma_tilde));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                errs.push(format!("gamma: must be > 0, got {g}"));
            }
        }
        if let Some(beta) = self.beta {
            if !(beta > 1.0) {
                errs.push(format!("beta: overhead exponent must be > 1, got {beta}"));
            }
        }
        if !(self.timing.mean > 0.0) {
            errs.push(format!("timing.mean: must be > 0, got {}", self.timing.mean));
        }
        if self.timing.dispersion < 0.0 {
            errs.push(format!(
                "timing.dispersion: must be >= 0, got {}",
                self.timing.dispersion
            ));
        }
        if self.noise.sigma < 0.0 {
            errs.push(format!("noise.sigma: must be >= 0, got {}", self.noise.sigma));
        }
        if self.potential.a < 0.0 {
            errs.push(format!("potential.a: must be >= 0, got {}", self.potential.a));
        }
        if let Repulsion::Gaussian(c) = self.potential.repulsion {
            if !(c > 0.0) {
                errs.push(format!("potential.repulsion: gaussian c must be > 0, got {c}"));
            }
        }
        if self.init.lo.len() != m || self.init.hi.len() != m {
            errs.push(format!(
                "init: box must have dimension {m}, got lo={}, hi={}",
                self.init.lo.len(),
                self.init.hi.len()
            ));
        } else {
            for i in 0..m {
                if self.init.lo[i] > self.init.hi[i] {
                    errs.push(format!(
                        "init: lo[{i}]={} exceeds hi[{i}]={}",
                        self.init.lo[i], self.init.hi[i]
                    ));
                }
            }
        }
        if !(self.horizon >= 0.0) {
            errs.push(format!("horizon: must be >= 0, got {}", self.horizon));
        }
        if let Some(r) = self.record_interval {
            if !(r > 0.0) {
                errs.push(format!("record_interval: must be > 0, got {r}"));
            }
        }
        if self.replicates == 0 {
            errs.push("replicates: must be >= 1".into());
        }
        if self.mode == Mode::Centralized {
            if self.engine == EngineKind::Parallel {
                errs.push("engine: centralized mode is not available under the parallel engine".into());
            }
            if self.gamma.is_none() && !self.proportional_step {
                errs.push("gamma: centralized mode needs gamma or proportional_step".into());
            }
        }
        if let Some(r) = self.hit_radius {
            if !(r > 0.0) {
                errs.push(format!("hit_radius: must be > 0, got {r}"));
            }
        }
        if self.stop_on_hit && self.hit_radius.is_none() {
            errs.push("stop_on_hit: requires hit_radius".into());
        }
        if let Some(dt) = self.sde.dt {
            if !(dt > 0.0) {
                errs.push(format!("sde.dt: must be > 0, got {dt}"));
            }
        }
        if !(self.sde.burn_in_frac >= 0.0 && self.sde.burn_in_frac < 1.0) {
            errs.push(format!(
                "sde.burn_in_frac: must be in [0, 1), got {}",
                self.sde.burn_in_frac
            ));
        }
        if !(self.parallel.time_scale > 0.0) {
            errs.push(format!(
                "parallel.time_scale: must be > 0, got {}",
                self.parallel.time_scale
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn validated(self) -> Result<Self> {
        self.validate().map_err(Error::Config)?;
        Ok(self)
    }

    /// Parses a TOML config file; unknown keys are rejected.
    pub fn parse_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validated()
    }

    pub fn parse_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Canonical TOML form.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Returns one of the named preset experiments.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig1-flocking" => fig1(Mode::Flocking),
        "fig1-centralized" => fig1(Mode::Centralized),
        "ackley-case1-flocking" => ackley_case1(Mode::Flocking),
        "ackley-case1-centralized" => ackley_case1(Mode::Centralized),
        "ackley-case2-flocking" => ackley_case2(Mode::Flocking),
        "ackley-case2-centralized" => ackley_case2(Mode::Centralized),
        "quad-bounds" => quad_bounds(),
        other => {
            return Err(Error::Config(vec![format!(
                "unknown preset '{other}'; expected one of fig1-centralized, fig1-flocking, \
                 ackley-case1-centralized, ackley-case1-flocking, ackley-case2-centralized, \
                 ackley-case2-flocking, quad-bounds"
            )]))
        }
    };
    cfg.validated()
}

pub const PRESET_NAMES: [&str; 7] = [
    "fig1-centralized",
    "fig1-flocking",
    "ackley-case1-centralized",
    "ackley-case1-flocking",
    "ackley-case2-centralized",
    "ackley-case2-flocking",
    "quad-bounds",
];

/// Minimization of ln(||x||^2 + 1) with sigma^2 = 450 noise: 10 fully
/// connected threads vs the 10-sample average, 0.02 s per step.
fn fig1(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        objective: ObjectiveSpec::Lognorm { m: 2 },
        potential: Potential::linear(1.0),
        topology: TopologySpec { n: 10, kind: TopologyKind::Complete },
        mode,
        engine: EngineKind::Event,
        gamma_tilde: 0.02,
        gamma: Some(0.02),
        proportional_step: false,
        timing: SamplingTimeModel { kind: TimingKind::Constant, mean: 0.02, dispersion: 0.0 },
        beta: None,
        noise: NoiseModel { sigma: 450.0_f64.sqrt() },
        init: InitSpec {
            lo: vec![35.0, 35.0],
            hi: vec![45.0, 45.0],
            centralized: CentralizedInit::Random,
        },
        horizon: 8000.0,
        record_interval: Some(0.2),
        replicates: 100,
        seed: 7,
        record_per_thread: false,
        hit_radius: Some(0.1),
        stop_on_hit: true,
        sde: SdeSettings::default(),
        parallel: ParallelSettings::default(),
    }
}

/// Ackley, 20 threads, strong short-range repulsion (a=4, c=800), 8 random
/// neighbors, beta=5 overhead, sigma=5, 60 s horizon, 10 replicates.
fn ackley_case1(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        objective: ObjectiveSpec::Ackley,
        potential: Potential::new(4.0, Repulsion::Gaussian(800.0)),
        topology: TopologySpec { n: 20, kind: TopologyKind::RandomKNeighbors { k: 8, seed: 1 } },
        mode,
        engine: EngineKind::Event,
        gamma_tilde: 0.01,
        gamma: Some(0.018),
        proportional_step: false,
        timing: SamplingTimeModel { kind: TimingKind::Constant, mean: 0.01, dispersion: 0.0 },
        beta: Some(5.0),
        noise: NoiseModel { sigma: 5.0 },
        init: InitSpec {
            lo: vec![10.0, 10.0],
            hi: vec![15.0, 15.0],
            centralized: CentralizedInit::Random,
        },
        horizon: 60.0,
        record_interval: Some(0.05),
        replicates: 10,
        seed: 11,
        record_per_thread: false,
        hit_radius: Some(1.0),
        stop_on_hit: false,
        sde: SdeSettings::default(),
        parallel: ParallelSettings::default(),
    }
}

/// Ackley, 30 threads, weak repulsion (a=3, c=0.01), sigma=35, beta=1.5,
/// 36 s horizon, 10 replicates.
fn ackley_case2(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        objective: ObjectiveSpec::Ackley,
        potential: Potential::new(3.0, Repulsion::Gaussian(0.01)),
        topology: TopologySpec { n: 30, kind: TopologyKind::RandomKNeighbors { k: 8, seed: 2 } },
        mode,
        engine: EngineKind::Event,
        gamma_tilde: 0.04,
        gamma: Some(0.184),
        proportional_step: false,
        timing: SamplingTimeModel { kind: TimingKind::Constant, mean: 0.04, dispersion: 0.0 },
        beta: Some(1.5),
        noise: NoiseModel { sigma: 35.0 },
        init: InitSpec {
            lo: vec![10.0, 10.0],
            hi: vec![12.0, 12.0],
            centralized: CentralizedInit::Random,
        },
        horizon: 36.0,
        record_interval: Some(0.1),
        replicates: 10,
        seed: 13,
        record_per_thread: false,
        hit_radius: Some(1.0),
        stop_on_hit: false,
        sde: SdeSettings::default(),
        parallel: ParallelSettings::default(),
    }
}

/// Bound-verification workhorse: quadratic kappa=1 on K10 with a=1, no
/// repulsion, sigma^2=450, step 0.02. Runs the continuum-limit engine at a
/// fine step, which is the process the cohesion/convergence bounds describe;
/// select `--engine event` to exercise the discrete scheme itself.
fn quad_bounds() -> ExperimentConfig {
    ExperimentConfig {
        objective: ObjectiveSpec::Quadratic { m: 2, kappa: 1.0, center: None },
        potential: Potential::linear(1.0),
        topology: TopologySpec { n: 10, kind: TopologyKind::Complete },
        mode: Mode::Flocking,
        engine: EngineKind::Sde,
        gamma_tilde: 0.02,
        gamma: Some(0.02),
        proportional_step: false,
        timing: SamplingTimeModel { kind: TimingKind::Constant, mean: 0.02, dispersion: 0.0 },
        beta: None,
        noise: NoiseModel { sigma: 450.0_f64.sqrt() },
        init: InitSpec {
            lo: vec![10.0, 10.0],
            hi: vec![15.0, 15.0],
            centralized: CentralizedInit::Center,
        },
        horizon: 6.0,
        record_interval: Some(0.02),
        replicates: 200,
        seed: 1,
        record_per_thread: false,
        hit_radius: None,
        stop_on_hit: false,
        sde: SdeSettings { dt: Some(2e-4), burn_in_frac: 0.2 },
        parallel: ParallelSettings::default(),
    }
}
