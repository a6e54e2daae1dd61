use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psig_core::pipeline::{write_all_or_nothing, write_run, FileWriter};
use psig_core::{grid_search, Config, Error, ErrorKind, InvertedIndex, Prepared, Result};

/// Probabilistic signature-based entity resolution.
#[derive(Parser)]
#[command(name = "psig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve the configured sources into clusters and links.
    Resolve(Common),
    /// Grid-search (a, b, rho, tau) against the configured ground truth.
    Tune(Common),
    /// Generate a synthetic dataset from the config's [synth] section.
    Synth(Common),
    /// Write the pruned inverted index as `key, p, ids` rows.
    IndexDump(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Invariant => 4,
    }
}

fn load_config(path: &Path) -> Result<Config> {
    Config::load(path).map_err(|e| match e {
        Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
        other => other,
    })
}

fn out_dir(common: &Common, config: &Config) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn resolve(common: &Common) -> Result<()> {
    let config = load_config(&common.config)?;
    let pipeline = config.pipeline()?;
    for w in pipeline.templates.warnings() {
        log::warn!("{w}");
    }
    let run = psig_core::resolve(&pipeline)?;
    let dir = out_dir(common, &config);
    write_run(&run, &dir)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    run.report
        .write_tsv(&mut out)
        .map_err(|e| Error::io("stdout", e))?;
    if let Some(m) = run.report.metrics {
        writeln!(
            out,
            "precision {:.4}  recall {:.4}  f-measure {:.4}",
            m.precision, m.recall, m.f_measure
        )
        .map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

fn tune(common: &Common) -> Result<()> {
    let config = load_config(&common.config)?;
    let pipeline = config.pipeline()?;
    let truth_path = pipeline
        .truth
        .clone()
        .ok_or_else(|| Error::Config("tune needs a [truth] section".into()))?;
    let grid = pipeline
        .grid
        .clone()
        .ok_or_else(|| Error::Config("tune needs a [grid] section".into()))?;
    let prepared = Prepared::load(&pipeline)?;
    let truth = prepared.load_truth(&truth_path)?;
    let result = grid_search(&prepared, &grid, &pipeline.params, &truth)?;
    let best = *result.best_row();
    let best_config = config
        .with_params(best.a, best.b, best.rho, best.tau)
        .to_toml()?;

    let dir = out_dir(common, &config);
    let rows = &result.rows;
    let mut files: Vec<FileWriter<'_>> = vec![
        (
            "grid_results.csv",
            Box::new(move |w| psig_core::eval::write_grid(rows, w).map_err(std::io::Error::other)),
        ),
        (
            "best_config.toml",
            Box::new(|w| w.write_all(best_config.as_bytes())),
        ),
    ];
    write_all_or_nothing(&dir, &mut files)?;
    println!(
        "best: a={} b={} rho={} tau={}  precision {:.4}  recall {:.4}  f-measure {:.4}",
        best.a,
        best.b,
        best.rho,
        best.tau,
        best.metrics.precision,
        best.metrics.recall,
        best.metrics.f_measure
    );
    Ok(())
}

fn synth(common: &Common) -> Result<()> {
    let config = load_config(&common.config)?;
    let params = config
        .synth
        .ok_or_else(|| Error::Config("synth needs a [synth] section".into()))?;
    let data = psig_core::generate_synthetic(&params)?;
    let dir = out_dir(common, &config);
    for path in data.write(&dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn index_dump(common: &Common) -> Result<()> {
    let config = load_config(&common.config)?;
    let pipeline = config.pipeline()?;
    let prepared = Prepared::load(&pipeline)?;
    let params = &pipeline.params;
    let index = InvertedIndex::from_postings(
        &prepared.postings,
        &params.model()?,
        params.rho,
        params.k_cap,
    )?;
    let dir = out_dir(common, &config);
    let index_ref = &index;
    let mut files: Vec<FileWriter<'_>> =
        vec![("index.tsv", Box::new(move |mut w| index_ref.dump(&mut w)))];
    write_all_or_nothing(&dir, &mut files)?;
    let stats = index.stats();
    println!(
        "{} keys kept, {} pruned (max recurrence {}), {} extractions skipped",
        index.len(),
        stats.keys_pruned_by_rho,
        index.max_recurrence(),
        stats.skipped_extractions
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Resolve(c) | Command::Tune(c) | Command::Synth(c) | Command::IndexDump(c) => c,
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Resolve(c) => resolve(c),
        Command::Tune(c) => tune(c),
        Command::Synth(c) => synth(c),
        Command::IndexDump(c) => index_dump(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
