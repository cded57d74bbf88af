//! Experiment configuration: one flat TOML file with a section per module,
//! every field defaulted, CLI flags overriding file values.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use trapsim_core::conditional::{ConditionalOptions, EventParamsA, EventParamsB};
use trapsim_core::sausage::SupMode;
use trapsim_core::trapfield::{KillMode, SimParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub lambda: f64,
    pub a: f64,
    /// 0 means the per-command default rule (kill-detection rule for
    /// survival, path-statistics rule for conditional/trend).
    pub n_steps: usize,
    /// 0 means the default window rule.
    pub window_halfwidth: f64,
    pub buffer_mult: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            lambda: 0.5,
            a: 0.1,
            n_steps: 0,
            window_halfwidth: 0.0,
            buffer_mult: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub t_grid: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            t_grid: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub n_direct: usize,
    pub n_outer: usize,
    pub m_inner: usize,
    pub n_boot: usize,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection {
            n_direct: 100_000,
            n_outer: 10_000,
            m_inner: 512,
            n_boot: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventASection {
    pub kappa: f64,
    pub epsilon: f64,
    pub k_diff: f64,
    pub c3_grid: Vec<f64>,
    pub default_c3: f64,
}

impl Default for EventASection {
    fn default() -> Self {
        EventASection {
            kappa: 0.5,
            epsilon: 0.5,
            k_diff: 1.0,
            c3_grid: vec![0.5, 1.0, 2.0],
            default_c3: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventBSection {
    pub epsilon: f64,
    pub k_diff: f64,
    pub f_exponent: f64,
}

impl Default for EventBSection {
    fn default() -> Self {
        EventBSection {
            epsilon: 0.5,
            k_diff: 0.5,
            f_exponent: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSection {
    /// "naive" or "bridge".
    pub kill_mode: String,
    /// Bridge-excess-corrected suprema inside the annealed weight.
    pub sup_correction: bool,
    pub debias: bool,
    pub greedy_b_scan: bool,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection {
            kill_mode: "bridge".into(),
            sup_correction: true,
            debias: false,
            greedy_b_scan: false,
        }
    }
}

/// Budgets for the `validate` oracle suite, sized to finish in about a
/// minute; the acceptance suite re-runs the expensive checks at full scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub lambda: f64,
    pub a: f64,
    pub t: f64,
    pub n_direct: usize,
    pub n_outer: usize,
    pub m_inner: usize,
    pub n_range: usize,
    pub n_confinement: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            lambda: 0.5,
            a: 0.1,
            t: 1.0,
            n_direct: 20_000,
            n_outer: 3_000,
            m_inner: 256,
            n_range: 100_000,
            n_confinement: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<String>,
    pub sim: SimSection,
    pub grid: GridSection,
    pub budgets: BudgetSection,
    pub event_a: EventASection,
    pub event_b: EventBSection,
    pub modes: ModeSection,
    pub validate: ValidateSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok(cfg)
    }
}

/// Fully resolved settings after CLI overrides, with the provenance hash.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub threads: usize,
    pub output_dir: PathBuf,
    pub cfg: ExperimentConfig,
    pub config_hash: String,
    pub version: String,
}

impl Resolved {
    pub fn new(
        mut cfg: ExperimentConfig,
        seed: Option<u64>,
        threads: Option<usize>,
        out: Option<PathBuf>,
        mode: Option<String>,
        debias: bool,
    ) -> Result<Self> {
        if let Some(s) = seed {
            cfg.seed = Some(s);
        }
        if let Some(n) = threads {
            cfg.threads = Some(n);
        }
        if let Some(dir) = &out {
            cfg.output_dir = Some(dir.display().to_string());
        }
        if let Some(m) = mode {
            cfg.modes.kill_mode = m;
        }
        if debias {
            cfg.modes.debias = true;
        }
        kill_mode_of(&cfg.modes.kill_mode)?; // reject bad values early
        if cfg.grid.t_grid.is_empty() {
            anyhow::bail!("t_grid must be non-empty");
        }

        let seed = cfg.seed.unwrap_or(0x7261_7073);
        let threads = cfg.threads.unwrap_or(0);
        let output_dir = PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| "out".into()));
        // Thread count and output location don't affect any number; keep
        // them out of the provenance hash.
        let hashed = ExperimentConfig {
            threads: None,
            output_dir: None,
            ..cfg.clone()
        };
        let canonical = toml::to_string(&hashed).expect("config serializes");
        let config_hash = hex::encode(&Sha256::digest(canonical.as_bytes())[..6]);
        Ok(Resolved {
            seed,
            threads,
            output_dir,
            cfg,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    pub fn kill_mode(&self) -> KillMode {
        kill_mode_of(&self.cfg.modes.kill_mode).expect("validated at resolve time")
    }

    pub fn sup_mode(&self) -> SupMode {
        if self.cfg.modes.sup_correction {
            SupMode::BridgeCorrected
        } else {
            SupMode::Grid
        }
    }

    pub fn conditional_options(&self) -> ConditionalOptions {
        ConditionalOptions {
            // Self-normalized ratios cancel the constant part of the grid
            // bias, so the conditional pipeline keeps plain grid sups.
            sup_mode: SupMode::Grid,
            debias: self.cfg.modes.debias,
            greedy_b: self.cfg.modes.greedy_b_scan,
        }
    }

    fn sim_params_base(&self, t: f64) -> Result<SimParams> {
        let s = &self.cfg.sim;
        let mut p = SimParams::new(s.lambda, s.a, t)?;
        p.buffer_mult = s.buffer_mult;
        p.window_halfwidth = if s.window_halfwidth > 0.0 {
            s.window_halfwidth
        } else {
            p.default_window()
        };
        Ok(p)
    }

    /// Simulation parameters at horizon `t`, with the kill-detection grid
    /// rule unless the config pins `n_steps`.
    pub fn sim_params_kill(&self, t: f64) -> Result<SimParams> {
        let mut p = self.sim_params_base(t)?;
        if self.cfg.sim.n_steps > 0 {
            p = p.with_n_steps(self.cfg.sim.n_steps);
        }
        p.validate()?;
        Ok(p)
    }

    /// Parameters for weight-only pipelines: the trap radius plays no role
    /// there, so the grid follows `dt <= t/1024`.
    pub fn sim_params_paths(&self, t: f64) -> Result<SimParams> {
        let mut p = self.sim_params_base(t)?;
        p.n_steps = if self.cfg.sim.n_steps > 0 {
            self.cfg.sim.n_steps
        } else {
            p.default_n_steps_paths()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn event_a(&self) -> Result<EventParamsA> {
        Ok(EventParamsA::new(
            self.cfg.event_a.kappa,
            self.cfg.event_a.epsilon,
            self.cfg.event_a.k_diff,
        )?)
    }

    pub fn event_b(&self) -> Result<EventParamsB> {
        Ok(EventParamsB::new(
            self.cfg.event_b.epsilon,
            self.cfg.event_b.k_diff,
            self.cfg.event_b.f_exponent,
        )?)
    }
}

fn kill_mode_of(name: &str) -> Result<KillMode> {
    match name {
        "naive" => Ok(KillMode::Naive),
        "bridge" => Ok(KillMode::Bridge),
        other => anyhow::bail!("unknown kill mode {other:?} (use naive|bridge)"),
    }
}
