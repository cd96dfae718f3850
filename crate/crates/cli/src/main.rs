use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lingmark_core::pipeline::{
    run_experiment, run_features, run_ingest, run_report, run_stats, PipelineError, RunConfig,
};
use lingmark_core::synth::{write_corpus, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "lingmark",
    version,
    about = "Linguistic marker analysis of CHAT transcripts"
)]
struct Cli {
    /// Plain-text `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat gaps and skipped inputs as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, identify and clean a directory of .cha files.
    Ingest {
        input: Option<PathBuf>,
        /// TSV of `path<TAB>label` overriding directory-derived labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        skip_bad: bool,
    },
    /// Tag the cleaned corpus and build feature matrices.
    Features {
        /// Comma-separated: raw, pos_enhanced, pos_only.
        #[arg(long)]
        representation: Option<String>,
    },
    /// Train and evaluate classifiers.
    Experiment {
        /// Comma-separated: lr, rf.
        #[arg(long)]
        model: Option<String>,
        /// Comma-separated: transcript_split, subject_cv.
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Group comparison with Mann-Whitney U and Cliff's delta.
    Stats {
        /// Comma-separated: transcript, subject.
        #[arg(long)]
        level: Option<String>,
    },
    /// Assemble report.md from existing artifacts.
    Report,
    /// Run ingest, features, experiment, stats and report in order.
    Run { input: Option<PathBuf> },
    /// Write a synthetic labelled corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long)]
        effect_scale: Option<f64>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        let text = std::fs::read_to_string(p).map_err(|e| {
            PipelineError::Usage(format!("cannot read config {}: {e}", p.display()))
        })?;
        cfg.apply_text(&text)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if cli.strict {
        cfg.strict = true;
    }
    for kv in &cli.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| PipelineError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    match &cli.command {
        Command::Ingest {
            input,
            labels,
            skip_bad,
        } => {
            if let Some(i) = input {
                cfg.input = Some(i.clone());
            }
            if let Some(l) = labels {
                cfg.labels = Some(l.clone());
            }
            cfg.skip_bad |= *skip_bad;
        }
        Command::Run { input: Some(i) } => cfg.input = Some(i.clone()),
        Command::Features {
            representation: Some(r),
        } => cfg.set("representations", r)?,
        Command::Experiment { model, protocol } => {
            if let Some(m) = model {
                cfg.set("models", m)?;
            }
            if let Some(p) = protocol {
                cfg.set("protocols", p)?;
            }
        }
        Command::Stats { level: Some(l) } => cfg.set("stats_levels", l)?,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth(
    cli: &Cli,
    out: &Path,
    subjects: Option<usize>,
    sessions: Option<usize>,
    scale: Option<f64>,
) -> Result<(), PipelineError> {
    let mut sc = SynthConfig::default();
    if let Some(s) = cli.seed {
        sc.seed = s;
    }
    if let Some(n) = subjects {
        sc.n_subjects = n;
    }
    if let Some(n) = sessions {
        sc.sessions_per_subject = n;
    }
    if let Some(e) = scale {
        sc.effect_scale = e;
    }
    if sc.n_subjects < 2
        || sc.sessions_per_subject == 0
        || sc.effect_scale.is_nan()
        || sc.effect_scale < 0.0
    {
        return Err(PipelineError::Usage(
            "synth needs at least 2 subjects, 1 session and a non-negative effect scale".into(),
        ));
    }
    let files = write_corpus(&sc, out).map_err(|e| PipelineError::Io {
        path: out.to_path_buf(),
        message: e.to_string(),
    })?;
    println!("wrote {} transcripts to {}", files.len(), out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Command::Synth {
        out,
        subjects,
        sessions,
        effect_scale,
    } = &cli.command
    {
        return synth(cli, out, *subjects, *sessions, *effect_scale);
    }
    let cfg = build_config(cli)?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let ingest = |cfg: &RunConfig| -> Result<(), PipelineError> {
        let s = run_ingest(cfg)?;
        println!(
            "ingested {} transcripts from {} subjects ({} skipped)",
            s.total_transcripts,
            s.subjects.values().sum::<usize>(),
            s.skipped.len()
        );
        Ok(())
    };
    let features = |cfg: &RunConfig| -> Result<(), PipelineError> {
        let s = run_features(cfg)?;
        println!("annotation X rate {:.4}", s.annotation.x_rate);
        for m in &s.matrices {
            println!(
                "{}: {} rows x {} features",
                m.representation,
                m.rows,
                m.feature_names.len()
            );
        }
        Ok(())
    };
    let experiment = |cfg: &RunConfig| -> Result<(), PipelineError> {
        for r in run_experiment(cfg)?.runs {
            let acc = r
                .metrics
                .iter()
                .find(|m| m.0 == "accuracy")
                .expect("accuracy reported");
            println!(
                "{} {} {}: accuracy {:.4} ± {:.4}",
                r.representation,
                r.model.as_str(),
                r.protocol.as_str(),
                acc.1,
                acc.2
            );
        }
        Ok(())
    };
    let stats = |cfg: &RunConfig| -> Result<(), PipelineError> {
        for t in run_stats(cfg)?.tables {
            let sig = t.rows.iter().filter(|r| r.p_adjusted < 0.05).count();
            println!(
                "{:?} level: {} features, {} with p_adj < 0.05",
                t.level,
                t.rows.len(),
                sig
            );
        }
        Ok(())
    };
    let report = |cfg: &RunConfig| -> Result<(), PipelineError> {
        let s = run_report(cfg)?;
        for g in &s.gaps {
            eprintln!("warning: report input missing: {}", g.display());
        }
        println!("report written to {}", s.path.display());
        Ok(())
    };
    match &cli.command {
        Command::Ingest { .. } => ingest(&cfg),
        Command::Features { .. } => features(&cfg),
        Command::Experiment { .. } => experiment(&cfg),
        Command::Stats { .. } => stats(&cfg),
        Command::Report => report(&cfg),
        Command::Run { .. } => {
            ingest(&cfg)?;
            features(&cfg)?;
            experiment(&cfg)?;
            stats(&cfg)?;
            report(&cfg)
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
