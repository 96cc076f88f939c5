//! Command line driver: bounds, word, invertible, spectrum.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use gnorm::decide::{
    decide_invertibility, run_norm_bounds, spectrum_interval, BoundsConfig, InvertibilityVerdict,
    DEFAULT_INVERTIBILITY_TOL,
};
use gnorm::presentation::Presentation;
use gnorm::ring::RingElement;
use gnorm::wordprob::{decide_word, Verdict};
use gnorm::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gnorm",
    about = "Certified bounds on C*-norms of group ring elements",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-sided norm bounds with certificates
    Bounds(BoundsArgs),
    /// Decide whether a word represents the identity
    Word(WordArgs),
    /// Decide invertibility in the universal group C*-algebra
    Invertible(InvertibleArgs),
    /// Enclose the spectrum endpoints of a self-adjoint element
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Presentation file (generators:/relators:/class: lines)
    #[arg(long)]
    presentation: PathBuf,
    /// Treat the group as amenable: report the reduced norm
    #[arg(long)]
    amenable: bool,
    /// Stop once upper − lower is at most this
    #[arg(long)]
    target_gap: Option<f64>,
    /// SDP hierarchy levels (repeatable); default: radius and radius+1
    #[arg(long)]
    levels: Vec<usize>,
    /// Largest moment index 2n
    #[arg(long)]
    moments: Option<usize>,
    /// Dimension of random unitary tuples for representation lower bounds
    #[arg(long)]
    rep_dim: Option<usize>,
    /// Random representation trials
    #[arg(long)]
    trials: Option<usize>,
    /// RNG seed; fixed seed, fixed output
    #[arg(long)]
    seed: Option<u64>,
    /// Abstract step budget shared by all engines
    #[arg(long)]
    budget_steps: Option<u64>,
}

impl EngineArgs {
    fn config(&self) -> BoundsConfig {
        let mut c = BoundsConfig::default();
        c.amenable = self.amenable;
        if let Some(g) = self.target_gap {
            c.target_gap = g;
        }
        if !self.levels.is_empty() {
            c.levels = self.levels.clone();
        }
        if let Some(n) = self.moments {
            c.moment_n_max = n;
        }
        if let Some(d) = self.rep_dim {
            c.rep_dim = d;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(b) = self.budget_steps {
            c.budget_steps = b;
        }
        c
    }

    fn load(&self) -> Result<Arc<Presentation>, Error> {
        let text = std::fs::read_to_string(&self.presentation)
            .map_err(|e| Error::Invalid(format!("{}: {e}", self.presentation.display())))?;
        Ok(Arc::new(Presentation::parse(&text)?))
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Element of the integral group ring, e.g. "2 + x - y^-1 + x*y"
    #[arg(long)]
    element: String,
    /// Write the full report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the bound sequences as CSV (index,p_n,q_n)
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct WordArgs {
    /// Presentation file
    #[arg(long)]
    presentation: PathBuf,
    /// Word in the generators, e.g. "x*y*x^-1*y^-1"
    #[arg(long)]
    word: String,
    /// Search budget in steps
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
}

#[derive(Args)]
struct InvertibleArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    element: String,
    /// Non-invertibility tolerance
    #[arg(long, default_value_t = DEFAULT_INVERTIBILITY_TOL)]
    tol: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    element: String,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bounds(args) => run_bounds(args),
        Command::Word(args) => run_word(args),
        Command::Invertible(args) => run_invertible(args),
        Command::Spectrum(args) => run_spectrum(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run_bounds(args: BoundsArgs) -> Result<ExitCode, Error> {
    let p = args.engine.load()?;
    let a = RingElement::parse(&args.element, p)?;
    let config = args.engine.config();
    let report = run_norm_bounds(&a, &config)?;

    println!("element:   {}", report.element);
    println!("norm kind: {:?}", report.norm_kind);
    println!(
        "lower:     {:.12}  upper: {:.12}  gap: {:.3e}",
        report.best_lower(),
        report.best_upper(),
        report.gap
    );
    println!("steps:     {}", report.steps_used);
    for note in &report.annotations {
        println!("note:      {note}");
    }
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json()?)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv())
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    }
    if report.gap > config.target_gap {
        return Ok(ExitCode::from(EXIT_BUDGET));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_word(args: WordArgs) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(&args.presentation)
        .map_err(|e| Error::Invalid(format!("{}: {e}", args.presentation.display())))?;
    let p = Presentation::parse(&text)?;
    let w = p.parse_word(&args.word)?;
    let verdict = decide_word(&w, &p, args.budget)?;
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    match verdict {
        Verdict::Exhausted { .. } => Ok(ExitCode::from(EXIT_BUDGET)),
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn run_invertible(args: InvertibleArgs) -> Result<ExitCode, Error> {
    let p = args.engine.load()?;
    let a = RingElement::parse(&args.element, p)?;
    let config = args.engine.config();
    let verdict = decide_invertibility(&a, &config, args.tol)?;
    match &verdict {
        InvertibilityVerdict::Invertible { bound, .. } => {
            println!("invertible: certified ‖Λ−a*a‖ ≤ {bound} < Λ");
        }
        InvertibilityVerdict::NotInvertibleWithinTolerance { lower, tol, .. } => {
            println!("not invertible within tolerance: lower {lower} ≥ Λ − {tol}");
        }
        InvertibilityVerdict::Unknown { lower, upper, .. } => {
            println!("unknown: ‖Λ−a*a‖ ∈ [{lower}, {upper}]");
        }
    }
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&verdict)?)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    }
    match verdict {
        InvertibilityVerdict::Unknown { .. } => Ok(ExitCode::from(EXIT_BUDGET)),
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn run_spectrum(args: SpectrumArgs) -> Result<ExitCode, Error> {
    let p = args.engine.load()?;
    let a = RingElement::parse(&args.element, p)?;
    let config = args.engine.config();
    let enc = spectrum_interval(&a, &config)?;
    println!("mu1 in [{:.12}, {:.12}]", enc.mu1.0, enc.mu1.1);
    println!("mu2 in [{:.12}, {:.12}]", enc.mu2.0, enc.mu2.1);
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&enc)?)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(ExitCode::SUCCESS)
}
