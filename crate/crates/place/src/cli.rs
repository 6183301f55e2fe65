use std::path::PathBuf;
use std::str::FromStr;

use bearing_core::trial::run_trial;
use bearing_core::Method;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{default_workers, RunConfig};
use crate::error::RunError;
use crate::io::{self, fmt_f64};
use crate::report;
use crate::sweep::{run_sweep, GridSpec, SweepResult, TrialRow};

#[derive(Debug, Parser)]
#[command(name = "bearing-place", version, about = "Sequential sensor placement for bearing-only localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its records.
    Trial(TrialArgs),
    /// Run both methods over a grid of (M, R, sigma, seed).
    Sweep(SweepArgs),
    /// Summarize a results directory written by `sweep`.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dopt,
    Maxent,
    Both,
}

impl MethodArg {
    fn method(self) -> Option<Method> {
        match self {
            MethodArg::Dopt => Some(Method::DoptBaseline),
            MethodArg::Maxent => Some(Method::MaxEnt),
            MethodArg::Both => None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Sequential iterations T.
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Particles per source N.
    #[arg(long, default_value_t = 1000)]
    pub particles: usize,
    /// Accuracy budget epsilon (domain units).
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Random projection directions L.
    #[arg(long, default_value_t = 50)]
    pub projections: usize,
    /// Optimizer restarts K.
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    /// Worker threads (defaults to the available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrialArgs {
    #[arg(long, default_value_t = 3)]
    pub sources: usize,
    #[arg(long, default_value_t = 10)]
    pub sensors: usize,
    /// Bearing noise standard deviation in degrees.
    #[arg(long, default_value_t = 8.0)]
    pub sigma_deg: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Source counts, e.g. `3..10` or `3,5,8` [default: 3..10].
    #[arg(long)]
    pub sources: Option<List<usize>>,
    /// Sensor counts [default: 3..10].
    #[arg(long)]
    pub sensors: Option<List<usize>>,
    /// Noise levels in degrees [default: 8,15].
    #[arg(long)]
    pub sigma_deg: Option<List<f64>>,
    /// Seeds [default: 1..20].
    #[arg(long)]
    pub seeds: Option<List<u64>>,
    /// Small grid: M in {3,5}, R in {3,10}, both noise levels, seeds 1..5.
    #[arg(long, conflicts_with_all = ["sources", "sensors", "seeds"])]
    pub quick: bool,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Results directory.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

/// Comma-separated values or an inclusive integer range `a..b`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

pub trait ListItem: FromStr + Copy {
    fn range(a: Self, b: Self) -> Option<Vec<Self>>;
}

macro_rules! int_item {
    ($($t:ty),*) => {$(
        impl ListItem for $t {
            fn range(a: Self, b: Self) -> Option<Vec<Self>> {
                (a <= b).then(|| (a..=b).collect())
            }
        }
    )*};
}
int_item!(usize, u64);

impl ListItem for f64 {
    fn range(_: Self, _: Self) -> Option<Vec<Self>> {
        None
    }
}

impl<T: ListItem> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |part: &str| format!("cannot parse {part:?}");
        if let Some((a, b)) = s.split_once("..") {
            let a = a.trim().parse().map_err(|_| bad(a))?;
            let b = b.trim().parse().map_err(|_| bad(b))?;
            return T::range(a, b).map(List).ok_or_else(|| format!("bad range {s:?}"));
        }
        let items = s
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| bad(p)))
            .collect::<Result<Vec<T>, _>>()?;
        Ok(List(items))
    }
}

impl TrialArgs {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            sources: vec![self.sources],
            sensors: vec![self.sensors],
            sigma_deg: vec![self.sigma_deg],
            seeds: vec![self.seed],
            method: self.method.method(),
            ..self.shared.config()
        }
    }
}

impl SweepArgs {
    pub fn config(&self) -> RunConfig {
        let template = self.shared.config();
        let grid = if self.quick {
            GridSpec::quick(template.grid().template)
        } else {
            GridSpec::full(template.grid().template)
        };
        RunConfig {
            sources: self.sources.clone().map_or(grid.sources, |l| l.0),
            sensors: self.sensors.clone().map_or(grid.sensors, |l| l.0),
            sigma_deg: self.sigma_deg.clone().map_or(grid.sigma_deg, |l| l.0),
            seeds: self.seeds.clone().map_or(grid.seeds, |l| l.0),
            method: None,
            ..template
        }
    }
}

impl Shared {
    fn config(&self) -> RunConfig {
        RunConfig {
            iterations: self.iterations,
            particles: self.particles,
            epsilon: self.epsilon,
            projections: self.projections,
            restarts: self.restarts,
            workers: self.workers.unwrap_or_else(default_workers),
            out: self.out.clone(),
            ..RunConfig::default()
        }
    }
}

/// Runs one trial per selected method. Returns the printed summary lines.
pub fn cmd_trial(config: &RunConfig) -> Result<Vec<String>, RunError> {
    config.validate()?;
    if config.sources.len() != 1 || config.sensors.len() != 1 || config.sigma_deg.len() != 1 || config.seeds.len() != 1 {
        return Err(RunError::config("trial", "takes a single scenario"));
    }
    io::ensure_dir(&config.out)?;
    config.write(&config.out)?;
    let point = config.grid().points()[0];
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for method in config.methods() {
        let scenario = config.scenario(point.sources, point.sensors, point.sigma_deg, point.seed, method);
        let record = run_trial(&scenario)?;
        io::write_trial_record(&config.out, &record)?;
        lines.push(format!(
            "{:<6} seed {} final_rmse {}",
            method.as_str(),
            record.seed,
            fmt_f64(record.final_rmse())
        ));
        rows.push(TrialRow::from_record(&point, &record));
    }
    io::write_sweep(&config.out, &SweepResult::from_trials(rows))?;
    Ok(lines)
}

pub fn cmd_sweep(config: &RunConfig) -> Result<SweepResult, RunError> {
    config.validate()?;
    if config.method.is_some() {
        return Err(RunError::config("method", "a sweep always runs both methods"));
    }
    io::ensure_dir(&config.out)?;
    config.write(&config.out)?;
    let sweep = run_sweep(&config.grid(), config.workers)?;
    io::write_sweep(&config.out, &sweep)?;
    Ok(sweep)
}

pub fn cmd_report(dir: &std::path::Path) -> Result<String, RunError> {
    let sweep = report::load_and_refresh(dir)?;
    Ok(format!(
        "{}\n{}",
        report::format_table(&sweep),
        report::format_savings(&sweep.savings())
    ))
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Trial(args) => cmd_trial(&args.config()).map(|lines| {
            for l in lines {
                println!("{l}");
            }
        }),
        Command::Sweep(args) => {
            let config = args.config();
            eprintln!(
                "sweeping {} paired trials on {} workers",
                config.grid().trial_count(),
                config.workers
            );
            cmd_sweep(&config).map(|sweep| {
                print!("{}", report::format_table(&sweep));
                println!("results in {}", config.out.display());
            })
        }
        Command::Report(args) => cmd_report(&args.out).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_syntax() {
        assert_eq!("3..10".parse::<List<usize>>().unwrap().0, (3..=10).collect::<Vec<_>>());
        assert_eq!("3,5, 8".parse::<List<usize>>().unwrap().0, vec![3, 5, 8]);
        assert_eq!("8,15".parse::<List<f64>>().unwrap().0, vec![8.0, 15.0]);
        assert!("5..3".parse::<List<usize>>().is_err());
        assert!("1..2".parse::<List<f64>>().is_err());
        assert!("x".parse::<List<u64>>().is_err());
    }

    #[test]
    fn sweep_defaults_are_the_full_grid() {
        let cli = Cli::try_parse_from(["bearing-place", "sweep"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!() };
        let c = args.config();
        assert_eq!(c.grid().trial_count(), 2560);
        assert_eq!(c.sigma_deg, vec![8.0, 15.0]);
        assert_eq!(c.seeds, (1..=20).collect::<Vec<_>>());
    }

    #[test]
    fn quick_preset() {
        let cli = Cli::try_parse_from(["bearing-place", "sweep", "--quick"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!() };
        let c = args.config();
        assert_eq!(c.sources, vec![3, 5]);
        assert_eq!(c.sensors, vec![3, 10]);
        assert_eq!(c.seeds.len(), 5);
        assert!(Cli::try_parse_from(["bearing-place", "sweep", "--quick", "--sources", "4"]).is_err());
    }

    #[test]
    fn trial_flags() {
        let cli = Cli::try_parse_from([
            "bearing-place", "trial", "--sources", "4", "--sensors", "10", "--sigma-deg", "8", "--seed", "1",
            "--method", "maxent", "--epsilon", "1e9",
        ])
        .unwrap();
        let Command::Trial(args) = cli.command else { panic!() };
        let c = args.config();
        assert_eq!(c.sources, vec![4]);
        assert_eq!(c.method, Some(Method::MaxEnt));
        assert_eq!(c.epsilon, 1e9);
        assert_eq!(c.iterations, 10);
    }
}
