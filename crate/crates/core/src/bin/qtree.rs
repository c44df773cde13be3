use clap::{Args, Parser, Subcommand};
use qtree::forward::RhoGridSpec;
use qtree::graphfile::GraphFile;
use qtree::pipeline::{compare, read_recovered, run_forward, run_inverse, PipelineError};
use qtree::sheaf_inverse::{SolverConfig, Type2};
use qtree::weyl::WeylSamples;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Weyl matrices of quantum trees and recovery of their edge potentials.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the Weyl matrix of a tree with known potentials.
    Forward {
        /// Graph file with a potential on every edge.
        #[arg(long)]
        graph: PathBuf,
        /// Number of spectral parameters.
        #[arg(long = "K", default_value_t = 180)]
        k: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        alpha_max: f64,
        #[arg(long, default_value_t = 0.1)]
        im_offset: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV of Weyl samples.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover every edge potential from Weyl samples and the topology.
    Invert {
        /// Graph file; only lengths, structure and leaf order are used.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        weyl: PathBuf,
        /// Directory for `edge_<id>.csv` files and `report.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Compare recovered potentials with reference ones.
    Compare {
        #[arg(long)]
        recovered: PathBuf,
        /// Graph file with the reference potentials.
        #[arg(long)]
        reference: PathBuf,
        /// Directory for per-edge curve CSVs and `errors.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long = "N", default_value_t = 9)]
    n: usize,
    /// Interior truncation order (defaults to N).
    #[arg(long = "Nc")]
    n_c: Option<usize>,
    #[arg(long = "KD", default_value_t = 100)]
    k_d: usize,
    #[arg(long = "KN", default_value_t = 100)]
    k_n: usize,
    #[arg(long, default_value_t = 200)]
    xm_points: usize,
    #[arg(long, default_value = "none")]
    use_type2: Type2,
    #[arg(long, default_value_t = 1e-12)]
    drop_threshold: f64,
    #[arg(long)]
    fit_degree: Option<usize>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let base = SolverConfig::default();
        SolverConfig {
            n: self.n,
            n_c: self.n_c.unwrap_or(self.n),
            k_d: self.k_d,
            k_n: self.k_n,
            xm_points: self.xm_points,
            use_type2: self.use_type2,
            drop_threshold: self.drop_threshold,
            fit_degree: self.fit_degree.unwrap_or(base.fit_degree),
            ..base
        }
    }
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn forward(graph: &Path, grid: RhoGridSpec, out: &Path) -> Result<(), Failure> {
    let file = GraphFile::load(graph).map_err(PipelineError::from)?;
    if !file.has_potentials() {
        return Err(Failure::Input(format!("{}: every edge needs a potential", graph.display())));
    }
    let samples = run_forward(&file, &grid)?;
    write(out, &samples.to_csv())?;
    eprintln!("wrote {} samples of a {}x{} Weyl matrix to {}", samples.len(), samples.dim(), samples.dim(), out.display());
    Ok(())
}

fn invert(graph: &Path, weyl: &Path, out: &Path, cfg: &SolverConfig) -> Result<(), Failure> {
    let tree = GraphFile::load(graph).map_err(PipelineError::from)?.graph().map_err(PipelineError::from)?;
    let text = std::fs::read_to_string(weyl).map_err(|e| Failure::Input(format!("cannot read {}: {e}", weyl.display())))?;
    let samples = WeylSamples::from_csv(&text).map_err(|e| Failure::Input(format!("{}: {e}", weyl.display())))?;
    match run_inverse(&tree, &samples, cfg, None) {
        Ok(run) => {
            run.write(out)?;
            eprintln!(
                "recovered {} edges in {:.2?}; results in {}",
                run.potentials.len(),
                run.report.wall_time,
                out.display()
            );
            Ok(())
        }
        Err(failure) => {
            std::fs::create_dir_all(out).map_err(|e| Failure::Input(format!("cannot create {}: {e}", out.display())))?;
            write(&out.join("report.json"), &failure.report.to_json())?;
            Err(failure.error.into())
        }
    }
}

fn compare_cmd(recovered: &Path, reference: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let rec = read_recovered(recovered)?;
    let file = GraphFile::load(reference).map_err(PipelineError::from)?;
    let (errors, curves) = compare(&rec, &file)?;
    let mut table = String::from("edge,max_abs_error,max_rel_error\n");
    for e in &errors {
        table.push_str(&format!("{},{},{}\n", e.edge, e.max_abs, e.max_rel));
    }
    print!("{table}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))?;
        write(&dir.join("errors.csv"), &table)?;
        for (edge, csv) in curves {
            write(&dir.join(format!("curve_{edge}.csv")), &csv)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Forward {
            graph,
            k,
            alpha_min,
            alpha_max,
            im_offset,
            seed,
            out,
        } => {
            let grid = RhoGridSpec {
                count: *k,
                alpha_min: *alpha_min,
                alpha_max: *alpha_max,
                im_offset: *im_offset,
                seed: *seed,
            };
            forward(graph, grid, out)
        }
        Command::Invert { graph, weyl, out, solver } => invert(graph, weyl, out, &solver.config()),
        Command::Compare { recovered, reference, out } => compare_cmd(recovered, reference, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
