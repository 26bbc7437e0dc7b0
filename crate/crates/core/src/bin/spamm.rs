use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spamm::bench::{
    calibrate_tau, generate, load_matrix, multiply_matrices, save_matrix, sweep, write_ratios,
    write_reports, CalibrationRange, GeneratorKind, GeneratorSpec, MarketLayout, RunOptions,
    Scenario, Workload,
};
use spamm::numeric::{Granularity, LeafKernel};
use spamm::reference::{dense_multiply_single, max_norm_error};
use spamm::symbolic::LeafStore;
use spamm::{DenseMatrix, Result};

#[derive(Parser)]
#[command(
    name = "spamm",
    version,
    about = "Sparse approximate matrix multiply on quadtrees"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic matrix as a MatrixMarket file.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_layout, default_value = "array")]
        layout: MarketLayout,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multiply MatrixMarket files and report timing and error.
    Multiply {
        a: PathBuf,
        /// Right operand; defaults to A.
        b: Option<PathBuf>,
        /// Matrix added with weight beta; defaults to zero.
        #[arg(long = "c-in")]
        c_in: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, default_value = "spamm4")]
        scenario: Scenario,
        #[command(flatten)]
        run: RunArgs,
        /// Result file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report CSV; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare SpAMM of A*A against a double-precision product.
    Verify {
        a: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, value_delimiter = ',', default_values = ["fine4", "coarse16"])]
        granularity: Vec<Granularity>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark scenarios over sizes and tolerances, CSV output.
    Bench {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, value_delimiter = ',', default_values = ["1e-8"])]
        tau: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["spamm4", "spamm16", "spamm-dense-leaf", "dense-single", "dense-double"])]
        scenario: Vec<Scenario>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Coarse-to-fine ratio CSV.
        #[arg(long)]
        ratios: Option<PathBuf>,
    },
    /// Find the largest tolerance meeting an error target, per granularity.
    SweepTau {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, default_value_t = 1e-6)]
        target: f64,
        #[arg(long, value_delimiter = ',', default_values = ["fine4", "coarse16"])]
        granularity: Vec<Granularity>,
        #[arg(long = "tau-min", default_value_t = 1e-12)]
        tau_min: f64,
        #[arg(long = "tau-max", default_value_t = 1e-2)]
        tau_max: f64,
        #[arg(long, default_value_t = 8)]
        iterations: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, default_value = "blocked-decay")]
    kind: GeneratorKind,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, value_delimiter = ',', default_values = ["5", "15"])]
    blocks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_symmetrize: bool,
}

impl GenArgs {
    fn spec(&self, n: usize) -> GeneratorSpec {
        GeneratorSpec {
            kind: self.kind,
            n,
            lambda: self.lambda,
            c: self.c,
            blocks: self.blocks.clone(),
            seed: self.seed,
            symmetrize: !self.no_symmetrize,
        }
    }
}

#[derive(Args)]
struct SourceArgs {
    /// Input MatrixMarket file; generator flags are ignored when set.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values = ["1024"])]
    n: Vec<usize>,
    #[command(flatten)]
    gen: GenArgs,
}

impl SourceArgs {
    fn sizes(&self) -> Result<Vec<usize>> {
        match &self.input {
            Some(p) => Ok(vec![load_matrix::<f32>(p)?.rows()]),
            None => Ok(self.n.clone()),
        }
    }

    fn matrix(&self, n: usize) -> Result<DenseMatrix<f32>> {
        match &self.input {
            Some(p) => load_matrix(p),
            None => generate(&self.gen.spec(n)),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f32,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Run symbolic and numeric phases on the rayon pool.
    #[arg(long)]
    parallel: bool,
    /// Resolve leaves through the hashed key store.
    #[arg(long)]
    hashed: bool,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            alpha: self.alpha,
            beta: self.beta,
            repeats: self.repeats,
            parallel: self.parallel,
            store: if self.hashed {
                LeafStore::Map
            } else {
                LeafStore::Array
            },
        }
    }
}

fn parse_layout(s: &str) -> std::result::Result<MarketLayout, String> {
    match s {
        "array" => Ok(MarketLayout::Array),
        "coordinate" => Ok(MarketLayout::Coordinate),
        _ => Err(format!(
            "unknown layout '{s}', expected array or coordinate"
        )),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            gen,
            n,
            layout,
            out,
        } => {
            let m = generate(&gen.spec(n))?;
            save_matrix(&out, &m, layout)?;
            eprintln!("wrote {n}x{n} {} matrix to {}", gen.kind, out.display());
        }
        Command::Multiply {
            a,
            b,
            c_in,
            tau,
            scenario,
            run,
            out,
            report,
        } => {
            let am: DenseMatrix<f32> = load_matrix(&a)?;
            let bm = match &b {
                Some(p) => load_matrix(p)?,
                None => am.clone(),
            };
            let cm = c_in.as_ref().map(load_matrix::<f32>).transpose()?;
            let (c, rep) = multiply_matrices(&am, &bm, cm.as_ref(), scenario, tau, &run.options())?;
            if let Some(p) = &out {
                save_matrix(p, &c, MarketLayout::Array)?;
            }
            let mut w = sink(report.as_deref())?;
            write_reports(&mut w, &[rep])?;
            w.flush()?;
        }
        Command::Verify {
            a,
            tau,
            granularity,
            out,
        } => {
            let am: DenseMatrix<f32> = load_matrix(&a)?;
            let w = Workload::new(am, 1.0, 0.0)?;
            let opts = RunOptions::default();
            let mut sinkw = sink(out.as_deref())?;
            writeln!(sinkw, "method,tau,max_norm_error,row,col,products4")?;
            let single = dense_multiply_single(w.dense(), w.dense(), 1.0, 0.0, None)?;
            let e = max_norm_error(&single, w.oracle())?;
            writeln!(
                sinkw,
                "dense-single,{tau},{:e},{},{},",
                e.max_abs, e.location.0, e.location.1
            )?;
            for g in granularity {
                let (c, counters, _) = w.spamm(tau, LeafKernel::Micro(g), &opts)?;
                let e = max_norm_error(&c.to_dense(), w.oracle())?.with_run(tau, Some(g));
                writeln!(
                    sinkw,
                    "{g},{tau},{:e},{},{},{}",
                    e.max_abs, e.location.0, e.location.1, counters.products4
                )?;
            }
            sinkw.flush()?;
        }
        Command::Bench {
            src,
            tau,
            scenario,
            run,
            out,
            ratios,
        } => {
            let ns = src.sizes()?;
            let res = sweep(|n| src.matrix(n), &ns, &tau, &scenario, &run.options())?;
            let mut w = sink(out.as_deref())?;
            write_reports(&mut w, &res.rows)?;
            w.flush()?;
            if let Some(p) = ratios {
                write_ratios(BufWriter::new(File::create(p)?), &res.ratios)?;
            }
        }
        Command::SweepTau {
            src,
            target,
            granularity,
            tau_min,
            tau_max,
            iterations,
            run,
            out,
        } => {
            let range = CalibrationRange {
                lo: tau_min,
                hi: tau_max,
                iterations,
            };
            let opts = run.options();
            let mut w = sink(out.as_deref())?;
            writeln!(w, "granularity,n,target,tau,max_norm_error,products4,met")?;
            for n in src.sizes()? {
                let work = Workload::new(src.matrix(n)?, opts.alpha, opts.beta)?;
                for &g in &granularity {
                    let c = calibrate_tau(&work, g, target, range, &opts)?;
                    writeln!(
                        w,
                        "{g},{},{target:e},{:e},{:e},{},{}",
                        c.n, c.tau, c.max_norm_error, c.products4, c.met
                    )?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
