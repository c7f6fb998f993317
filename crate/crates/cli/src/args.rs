use std::path::PathBuf;

use careloop::config::FileConfig;
use careloop::diagnosis::{BackendKind, Fallback};
use careloop::experiment::Condition;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "careloop",
    version,
    about = "Elderly-care simulation with auditable closed-loop policy adaptation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one condition for one seed; prints the final mean loneliness.
    Run {
        #[arg(long)]
        condition: Option<Condition>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run conditions x seeds; writes results.csv, summary.json, pairwise.json.
    Suite {
        /// Comma-separated seeds [file: run.seeds] (default: 300,400,500,600)
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated conditions [file: run.conditions] (default: all five)
        #[arg(long, value_delimiter = ',')]
        conditions: Option<Vec<Condition>>,
    },
    /// One-factor-at-a-time sweep of the closed-loop thresholds and cap.
    Sensitivity {
        /// Comma-separated seeds [file: run.seeds] (default: 300,400)
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Recompute summary.json and pairwise.json from a results.csv.
    Stats {
        #[arg(long)]
        results: PathBuf,
    },
    /// Replay an audit log against the controller; exits 2 on any mismatch.
    Verify {
        #[arg(long)]
        audit: PathBuf,
    },
    /// Write per-day trajectory CSVs for plotting.
    Export {
        #[arg(long, value_delimiter = ',')]
        conditions: Option<Vec<Condition>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Heuristic,
    Llm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FallbackArg {
    SkipAgent,
    UseHeuristic,
}

/// Flags shared by every subcommand. Each overrides the config-file key
/// named in its help text.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON or TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [file: run.output_dir] (default: out)
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Population size [file: run.n_agents]
    #[arg(long, global = true)]
    pub n_agents: Option<usize>,
    /// Simulated days [file: run.days]
    #[arg(long, global = true)]
    pub days: Option<u32>,
    /// Use Welch's t-test instead of the pooled-variance test [file: run.t_test = "welch"]
    #[arg(long, global = true)]
    pub welch: bool,

    /// [file: control.risk_threshold]
    #[arg(long, global = true)]
    pub risk_threshold: Option<f64>,
    /// [file: control.priority_threshold]
    #[arg(long, global = true)]
    pub priority_threshold: Option<f64>,
    /// [file: control.update_cap]
    #[arg(long, global = true)]
    pub update_cap: Option<f64>,
    /// [file: control.theta_t_step]
    #[arg(long, global = true)]
    pub theta_t_step: Option<f64>,
    /// [file: control.theta_p_step]
    #[arg(long, global = true)]
    pub theta_p_step: Option<f64>,
    /// [file: control.social_gain]
    #[arg(long, global = true)]
    pub social_gain: Option<f64>,

    /// [file: backend.kind]
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// [file: backend.endpoint_url]
    #[arg(long, global = true)]
    pub endpoint_url: Option<String>,
    /// [file: backend.model_name]
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// [file: backend.temperature]
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// [file: backend.timeout_ms]
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// [file: backend.max_retries]
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// [file: backend.fallback]
    #[arg(long, global = true, value_enum)]
    pub fallback: Option<FallbackArg>,
    /// Diagnose every agent, not only those above the loneliness cutoff [file: backend.diagnose_all]
    #[arg(long, global = true)]
    pub diagnose_all: bool,
    /// Leave raw model responses out of audit logs [file: backend.store_raw_responses = false]
    #[arg(long, global = true)]
    pub no_raw_responses: bool,
}

impl CommonArgs {
    /// Applies flags on top of `file`; flags win.
    pub fn apply(&self, mut file: FileConfig) -> FileConfig {
        macro_rules! set {
            ($flag:expr => $slot:expr) => {
                if let Some(v) = $flag.clone() {
                    $slot = v;
                }
            };
        }
        if let Some(dir) = &self.output_dir {
            file.run.output_dir = Some(dir.clone());
        }
        set!(self.n_agents => file.run.n_agents);
        set!(self.days => file.run.days);
        if self.welch {
            file.run.t_test = careloop::stats::TTestKind::Welch;
        }
        let c = &mut file.control;
        set!(self.risk_threshold => c.risk_threshold);
        set!(self.priority_threshold => c.priority_threshold);
        set!(self.update_cap => c.update_cap);
        set!(self.theta_t_step => c.theta_t_step);
        set!(self.theta_p_step => c.theta_p_step);
        set!(self.social_gain => c.social_gain);
        let b = &mut file.backend;
        if let Some(kind) = self.backend {
            b.kind = match kind {
                BackendArg::Heuristic => BackendKind::Heuristic,
                BackendArg::Llm => BackendKind::Llm,
            };
        }
        set!(self.endpoint_url => b.endpoint_url);
        set!(self.model => b.model_name);
        set!(self.temperature => b.temperature);
        set!(self.timeout_ms => b.timeout_ms);
        set!(self.max_retries => b.max_retries);
        if let Some(f) = self.fallback {
            b.fallback = match f {
                FallbackArg::SkipAgent => Fallback::SkipAgent,
                FallbackArg::UseHeuristic => Fallback::UseHeuristic,
            };
        }
        if self.diagnose_all {
            b.diagnose_all = true;
        }
        if self.no_raw_responses {
            b.store_raw_responses = false;
        }
        file
    }
}
