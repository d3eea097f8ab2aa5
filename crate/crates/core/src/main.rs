use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use anchor_assign::ingest::{hex_digest, load_scenario, Scenario};
use anchor_assign::pipeline::{self, RunState, RunSummary, Stage};
use anchor_assign::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(
    name = "anchor-assign",
    version,
    about = "Assign residence and workplace cells to a synthetic population"
)]
struct Args {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Last stage to run.
    #[arg(long, default_value = "report", value_parser = parse_stage)]
    stage: Stage,
    /// Output directory or run_summary.json of an earlier partial run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Worker threads for the parallel stages (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    gravity_mask: Option<Switch>,
    #[arg(long)]
    distance_exponent: Option<f64>,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn apply_overrides(scenario: &mut Scenario, args: &Args) -> anchor_assign::Result<()> {
    let mut tag = Vec::new();
    if let Some(seed) = args.seed {
        scenario.config.seed = seed;
        tag.push(format!("seed={seed}"));
    }
    if let Some(m) = args.gravity_mask {
        scenario.config.stages.gravity_mask = matches!(m, Switch::On);
        tag.push(format!("gravity_mask={m:?}"));
    }
    if let Some(e) = args.distance_exponent {
        scenario.config.distance_exponent = e;
        tag.push(format!("distance_exponent={e}"));
    }
    if !tag.is_empty() {
        scenario.config.validate()?;
        let joined = format!("{}|{}", scenario.config_hash, tag.join("|"));
        scenario.config_hash = hex_digest(joined.as_bytes());
    }
    Ok(())
}

fn execute(args: &Args, threads: usize) -> anchor_assign::Result<(Scenario, RunState)> {
    let mut scenario = load_scenario(&args.config)?;
    apply_overrides(&mut scenario, args)?;
    let mut state = match &args.resume {
        Some(path) => pipeline::load_checkpoint(&scenario, path)?,
        None => RunState::fresh(&scenario),
    };
    if let Err(e) = pipeline::advance(&scenario, &mut state, args.stage) {
        let mut summary = RunSummary::new(&scenario, &state, threads);
        summary.status = "failed".into();
        summary.error = Some(e.to_string());
        let _ = pipeline::write_summary(&summary, &args.out);
        return Err(e);
    }
    pipeline::write_outputs(&scenario, &state, &args.out, threads)?;
    Ok((scenario, state))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!(
                "{{\"error\":\"thread_pool\",\"message\":{:?}}}",
                e.to_string()
            );
            return ExitCode::FAILURE;
        }
    };
    let threads = pool.current_num_threads();
    match pool.install(|| execute(&args, threads)) {
        Ok((_, state)) => {
            log::info!(
                "completed stage {} for {} persons, outputs in {}",
                state.completed,
                state.persons.len(),
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
