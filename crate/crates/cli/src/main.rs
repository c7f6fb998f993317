mod args;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use careloop::audit::{config_hash, read_file, replay_verify, AuditError, Verdict};
use careloop::config::FileConfig;
use careloop::diagnosis::{DiagnosisBackend, DiagnosisError};
use careloop::experiment::{
    pairwise_from_groups, read_results_csv, run_condition, run_suite, sensitivity_sweep, summarize, summarize_groups,
    write_pairwise_json, write_results_csv, write_sensitivity_csv, write_summary_json, write_trajectory_csv, Condition,
    Experiment, RunError, DEFAULT_COMPARISONS, HOLDOUT_SEEDS,
};
use clap::Parser;

use args::{Cli, Command};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum Failure {
    /// Bad flags, bad config, unreadable inputs.
    Usage(String),
    /// An audit log failed replay or integrity checks.
    Verification(String),
    /// The model backend could not be reached.
    Backend(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Backend(m) => m,
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Backend {
                source: DiagnosisError::BackendUnavailable { .. },
                ..
            } => Failure::Backend(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

struct Resolved {
    file: FileConfig,
    exp: Experiment,
    out_dir: PathBuf,
}

fn resolve(cli: &Cli) -> Result<Resolved, Failure> {
    let file = match &cli.common.config {
        Some(path) => FileConfig::load(path).map_err(usage)?,
        None => FileConfig::default(),
    };
    let file = cli.common.apply(file);
    file.control.validate().map_err(usage)?;
    file.dynamics.validate().map_err(usage)?;
    let backend = DiagnosisBackend::from_config(file.backend.clone()).map_err(usage)?;
    let out_dir = file.run.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let exp = Experiment {
        n_agents: file.run.n_agents,
        days: file.run.days,
        dynamics: file.dynamics,
        control: file.control,
        backend,
        audit_dir: None,
    };
    Ok(Resolved { file, exp, out_dir })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| usage(format!("cannot create {}: {e}", path.display())))
}

fn trajectory_path(dir: &Path, condition: Condition, seed: u64) -> PathBuf {
    dir.join(format!("trajectory_{condition}_{seed}.csv"))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let Resolved { file, mut exp, out_dir } = resolve(&cli)?;
    match cli.command {
        Command::Run { condition, seed } => {
            let condition = condition
                .or(file.run.condition)
                .ok_or_else(|| usage("run needs --condition (or run.condition in the config file)"))?;
            let seed = seed
                .or(file.run.seed)
                .ok_or_else(|| usage("run needs --seed (or run.seed in the config file)"))?;
            exp.audit_dir = condition.uses_diagnosis().then(|| out_dir.clone());
            fs::create_dir_all(&out_dir).map_err(usage)?;
            let result = run_condition(condition, seed, &exp)?;
            let path = trajectory_path(&out_dir, condition, seed);
            write_trajectory_csv(&result, create(&path)?).map_err(usage)?;
            println!("condition            {condition}");
            println!("seed                 {seed}");
            println!("final_mean_loneliness {:.6}", result.final_mean_loneliness);
            println!("visits               {}", result.visit_count);
            println!("llm_calls            {}", result.llm_call_count);
            println!("trajectory           {}", path.display());
            if let Some(audit) = &result.audit_path {
                println!("audit                {}", audit.display());
            }
        }

        Command::Suite { seeds, conditions } => {
            let seeds = seeds
                .or(file.run.seeds.clone())
                .unwrap_or_else(|| HOLDOUT_SEEDS.to_vec());
            let conditions = conditions
                .or(file.run.conditions.clone())
                .unwrap_or_else(|| Condition::ALL.to_vec());
            exp.audit_dir = Some(out_dir.join("audit"));
            fs::create_dir_all(out_dir.join("audit")).map_err(usage)?;
            let suite = run_suite(&conditions, &seeds, &exp);
            if let Some(f) = suite.failures.iter().find(|f| f.backend_unavailable) {
                return Err(Failure::Backend(format!(
                    "{} seed {}: {}",
                    f.condition, f.seed, f.error
                )));
            }
            for f in &suite.failures {
                eprintln!("warning: {} seed {} failed: {}", f.condition, f.seed, f.error);
            }
            write_results_csv(&suite.runs, create(&out_dir.join("results.csv"))?).map_err(usage)?;
            let summary = summarize(&suite);
            write_summary_json(&summary, create(&out_dir.join("summary.json"))?).map_err(usage)?;
            let pairs = careloop::experiment::pairwise(&suite, file.run.t_test);
            write_pairwise_json(&pairs, create(&out_dir.join("pairwise.json"))?).map_err(usage)?;
            print_summary(&summary);
            print_pairs(&pairs);
            if !suite.failures.is_empty() {
                return Err(usage(format!("{} run(s) failed", suite.failures.len())));
            }
        }

        Command::Sensitivity { seeds } => {
            let seeds = seeds.or(file.run.seeds.clone()).unwrap_or_else(|| vec![300, 400]);
            let rows = sensitivity_sweep(&exp.control, &seeds, &exp)?;
            write_sensitivity_csv(&rows, create(&out_dir.join("sensitivity.csv"))?).map_err(usage)?;
            println!(
                "{:<20} {:>6} {:>8} {:>8} {:>8} {:>8}  replay",
                "parameter", "value", "mean", "sd", "min", "max"
            );
            for r in &rows {
                let value = r.value.map_or("-".to_string(), |v| format!("{v:.2}"));
                let sd = r.sd.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:<20} {:>6} {:>8.4} {:>8} {:>8.4} {:>8.4}  {} ({:+.1}%)",
                    r.parameter,
                    value,
                    r.mean,
                    sd,
                    r.min,
                    r.max,
                    if r.replay_identical { "identical" } else { "differs" },
                    r.delta_pct
                );
            }
        }

        Command::Stats { results } => {
            let f = File::open(&results).map_err(|e| usage(format!("cannot open {}: {e}", results.display())))?;
            let rows = read_results_csv(f).map_err(usage)?;
            let groups: Vec<(Condition, Vec<f64>)> = Condition::ALL
                .iter()
                .map(|&c| {
                    (
                        c,
                        rows.iter()
                            .filter(|r| r.condition == c)
                            .map(|r| r.final_mean_loneliness)
                            .collect(),
                    )
                })
                .collect();
            let summary = summarize_groups(&groups);
            let pairs = pairwise_from_groups(&groups, &DEFAULT_COMPARISONS, file.run.t_test);
            write_summary_json(&summary, create(&out_dir.join("summary.json"))?).map_err(usage)?;
            write_pairwise_json(&pairs, create(&out_dir.join("pairwise.json"))?).map_err(usage)?;
            print_summary(&summary);
            print_pairs(&pairs);
        }

        Command::Verify { audit } => {
            let records = read_file(&audit).map_err(|e| match e {
                AuditError::Io { .. } => usage(e),
                other => Failure::Verification(other.to_string()),
            })?;
            let expected_hash = config_hash(&exp.control, &exp.dynamics);
            if records.iter().any(|r| r.config_hash != expected_hash) {
                eprintln!("warning: log was written under a different configuration; replaying with the current one");
            }
            match replay_verify(&records, &exp.control) {
                Verdict::Verified { records } => println!("verified: {records} decision(s) reproduced exactly"),
                Verdict::NotReplayable {
                    condition,
                    raw_proposals,
                } => {
                    println!("not replayable: {condition} decisions come from a model, not from rules");
                    println!("raw proposals attached ({}):", raw_proposals.len());
                    for p in raw_proposals {
                        println!("  {p}");
                    }
                }
                Verdict::Mismatches(ms) => {
                    for m in &ms {
                        eprintln!("mismatch at record {} (day {}):", m.index, m.day);
                        eprintln!(
                            "  recorded   {}",
                            serde_json::to_string(&m.recorded).unwrap_or_default()
                        );
                        match &m.recomputed {
                            Some(d) => eprintln!("  recomputed {}", serde_json::to_string(d).unwrap_or_default()),
                            None => eprintln!("  recomputed (condition has no controller)"),
                        }
                    }
                    let days: Vec<String> = ms.iter().map(|m| m.day.to_string()).collect();
                    return Err(Failure::Verification(format!(
                        "{} mismatching decision(s), first on day {} (days: {})",
                        ms.len(),
                        ms[0].day,
                        days.join(", ")
                    )));
                }
            }
        }

        Command::Export { conditions, seeds } => {
            let seeds = seeds
                .or(file.run.seeds.clone())
                .unwrap_or_else(|| HOLDOUT_SEEDS.to_vec());
            let conditions = conditions
                .or(file.run.conditions.clone())
                .unwrap_or_else(|| Condition::ALL.to_vec());
            let suite = run_suite(&conditions, &seeds, &exp);
            if let Some(f) = suite.failures.first() {
                return Err(if f.backend_unavailable {
                    Failure::Backend(f.error.clone())
                } else {
                    usage(&f.error)
                });
            }
            for r in &suite.runs {
                let path = trajectory_path(&out_dir, r.condition, r.seed);
                write_trajectory_csv(r, create(&path)?).map_err(usage)?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn print_summary(summary: &[careloop::experiment::ConditionSummary]) {
    println!(
        "{:<14} {:>3} {:>8} {:>8} {:>8} {:>8}",
        "condition", "n", "mean", "sd", "min", "max"
    );
    for s in summary {
        let sd = s.sd.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<14} {:>3} {:>8.4} {:>8} {:>8.4} {:>8.4}",
            s.condition.name(),
            s.n,
            s.mean,
            sd,
            s.min,
            s.max
        );
    }
}

fn print_pairs(pairs: &[careloop::experiment::PairwiseComparison]) {
    if pairs.is_empty() {
        return;
    }
    println!();
    println!(
        "{:<28} {:>8} {:>8} {:>8} {:>9}",
        "comparison", "diff", "improv%", "d", "p"
    );
    let opt = |x: Option<f64>, prec: usize| x.map_or("-".to_string(), |v| format!("{v:.prec$}"));
    for p in pairs {
        println!(
            "{:<28} {:>8.4} {:>8} {:>8} {:>9}",
            format!("{} vs {}", p.a, p.b),
            p.mean_diff,
            opt(p.improvement_pct, 1),
            opt(p.cohens_d, 2),
            opt(p.p_value, 4)
        );
    }
}
