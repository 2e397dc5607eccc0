//! `lmpfa-pricer`: price two-asset options and run error studies from the command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lmpfa_core::assembly::assemble_operator;
use lmpfa_core::harness::{
    build_reference, dump_surface, parse_config_text, run_table_with, write_table_outputs, RunConfig, RunOptions,
};
use lmpfa_core::timestepper::{solve, TsvDiagnostics};

#[derive(Parser, Debug)]
#[command(name = "lmpfa-pricer", version, about = "Two-asset option pricer on L-MPFA finite volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and report the price at S1 = S2 = K.
    Price(Flags),
    /// Run an error study over grids and schemes.
    Table(Flags),
    /// Write the assembled spatial operator as `row col value` triplets.
    DumpMatrix(Flags),
}

/// Run flags; each also works as a `key=value` line in the config file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Config file of key=value lines keyed by flag name
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interior node counts, comma separated
    #[arg(long)]
    grid: Option<String>,
    /// Time steps, one value or one per grid
    #[arg(long)]
    steps: Option<String>,
    /// Time-stepping weight in [0.5, 1]
    #[arg(long)]
    theta: Option<String>,
    /// Scheme names, comma separated, or "all"
    #[arg(long)]
    scheme: Option<String>,
    /// european or american
    #[arg(long)]
    option: Option<String>,
    /// Penalty strength
    #[arg(long)]
    beta: Option<String>,
    /// Penalty power k (the penalty uses exponent 1/k)
    #[arg(long)]
    kpow: Option<String>,
    /// basket-put or call-on-max
    #[arg(long)]
    payoff: Option<String>,
    /// analytic, stored:<path> or self:<Nref>,<Mref>
    #[arg(long)]
    reference: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Recorded in the manifest
    #[arg(long)]
    seed: Option<String>,
}

impl Flags {
    fn pairs(&self) -> BTreeMap<String, String> {
        let fields = [
            ("grid", &self.grid),
            ("steps", &self.steps),
            ("theta", &self.theta),
            ("scheme", &self.scheme),
            ("option", &self.option),
            ("beta", &self.beta),
            ("kpow", &self.kpow),
            ("payoff", &self.payoff),
            ("reference", &self.reference),
            ("out", &self.out),
            ("seed", &self.seed),
        ];
        fields.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }

    /// Config file values first, command-line flags on top.
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                RunOptions::from_pairs(&parse_config_text(&text)?)
                    .with_context(|| format!("in config {}", path.display()))?
            }
            None => RunOptions::default(),
        };
        let flags = RunOptions::from_pairs(&self.pairs())?;
        Ok(base.merged(flags).resolve()?)
    }
}

fn single(config: &RunConfig, what: &str) -> Result<()> {
    if config.grids.len() != 1 || config.schemes.len() != 1 {
        bail!("{what} takes a single grid and a single scheme");
    }
    Ok(())
}

fn out_dir(config: &RunConfig) -> Result<Option<&Path>> {
    match &config.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn price(config: &RunConfig) -> Result<()> {
    single(config, "price")?;
    let (n, scheme) = (config.grids[0], config.schemes[0]);
    let grid = config.grid(n)?;
    let time = config.time_grid(config.steps_for(0))?;
    let dir = out_dir(config)?;
    let solution = match dir {
        Some(dir) => {
            let path = dir.join("diagnostics.tsv");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut sink = TsvDiagnostics(BufWriter::new(file));
            writeln!(sink.0, "step\tnewton_iterations\tresidual\tmin_excess")?;
            let s = solve(&config.spec, scheme, &grid, &time, &config.settings, Some(&mut sink))?;
            sink.0.flush()?;
            s
        }
        None => solve(&config.spec, scheme, &grid, &time, &config.settings, None)?,
    };
    if let Some(dir) = dir {
        dump_surface(&solution.surface, &dir.join("surface.txt"))?;
        let manifest = lmpfa_core::harness::manifest(config, None);
        fs::write(dir.join("manifest.json"), format!("{manifest:#}\n"))?;
    }
    let k = config.spec.market.strike;
    println!("{}", solution.surface.interpolate(k, k));
    Ok(())
}

fn table(config: &RunConfig) -> Result<()> {
    let reference = build_reference(config)?;
    let table = run_table_with(config, &reference)?;
    match out_dir(config)? {
        Some(dir) => write_table_outputs(config, &table, dir)?,
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn dump_matrix(config: &RunConfig) -> Result<()> {
    single(config, "dump-matrix")?;
    let (n, scheme) = (config.grids[0], config.schemes[0]);
    let grid = config.grid(n)?;
    let op = assemble_operator(scheme, &grid, &config.spec)?;
    match out_dir(config)? {
        Some(dir) => {
            let path = dir.join("matrix.txt");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            op.write_dump(scheme, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            op.write_dump(scheme, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Price(f) => price(&f.resolve()?),
        Command::Table(f) => table(&f.resolve()?),
        Command::DumpMatrix(f) => dump_matrix(&f.resolve()?),
    }
}
