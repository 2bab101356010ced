//! Command-line front end behind the `scmpp` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::check::{check_model_fit, CheckResult};
use crate::error::{Error, Result};
use crate::estimation::{fit_process, BudgetSchedule, DeltaSpec, FitConfig, FitResult, StartsConfig, Strategy};
use crate::io::{self, RunConfig};
use crate::likelihood::QuadratureSchedule;
use crate::marks::{
    read_raster_dir, scale_rasters, train_marks_for_pattern, EdgeCorrection, Engine, FeatureConfig, Metric, RasterGrid,
    TrainedMarkModel,
};
use crate::pattern::{MarkedPattern, Window};
use crate::plot;
use crate::simulation::{fit_time_mapping, simulate_mpp, MarkMode, MarkSource};
use crate::summaries::{summaries, EstimatorOptions, FgCorrection, SummaryKind};

#[derive(Debug, Parser)]
#[command(name = "scmpp", version, about = "Self-correcting marked point processes: fit, simulate, check")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, env = "LDM_SEED")]
    pub seed: Option<u64>,
    /// Zero wall-clock fields so reruns are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Worker threads; 1 runs everything serially.
    #[arg(long, global = true)]
    pub num_cores: Option<usize>,
    /// Report stage progress on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// JSON run configuration; flags override its blocks.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the self-correcting process parameters.
    Fit(FitArgs),
    /// Train the location-dependent mark model.
    TrainMark(TrainMarkArgs),
    /// Simulate a marked realization from a fit.
    Simulate(SimulateArgs),
    /// Global envelope check of a fitted model.
    Check(CheckArgs),
    /// Summary curves of a pattern or realization.
    Summaries(SummariesArgs),
    /// Render a check result, realization or pattern as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Point CSV with columns x, y, size and optionally secondary.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Observation window `x_min,x_max,y_min,y_max`.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Local,
    GlobalLocal,
    MultiresGlobalLocal,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Local => Strategy::Local,
            StrategyArg::GlobalLocal => Strategy::GlobalLocal,
            StrategyArg::MultiresGlobalLocal => Strategy::MultiresGlobalLocal,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Mapping exponent, or a comma-separated list to search.
    #[arg(long, alias = "delta-list")]
    pub delta: Option<String>,
    /// Grid schedule JSON.
    #[arg(long)]
    pub grids: Option<PathBuf>,
    /// Optimizer budget JSON.
    #[arg(long)]
    pub budgets: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub global_restarts: Option<usize>,
    #[arg(long)]
    pub local_starts: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Gbt,
    Rf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Rmse,
    Mae,
    Rsq,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EdgeArg {
    None,
    Toroidal,
    Truncation,
}

impl From<EdgeArg> for EdgeCorrection {
    fn from(e: EdgeArg) -> Self {
        match e {
            EdgeArg::None => EdgeCorrection::None,
            EdgeArg::Toroidal => EdgeCorrection::Toroidal,
            EdgeArg::Truncation => EdgeCorrection::Truncation,
        }
    }
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    /// Directory of ASCII grid covariates.
    #[arg(long)]
    pub rasters: Option<PathBuf>,
    /// Standardize each raster to mean 0 and sd 1 before use.
    #[arg(long)]
    pub scale_rasters: bool,
}

#[derive(Debug, Args)]
pub struct TrainMarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub rasters: RasterArgs,
    /// Mapping exponent; taken from `--fit` when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Competition radius.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum)]
    pub edge_correction: Option<EdgeArg>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub tuning_grid_size: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MarkArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Trained mark model; marks come from the time-to-size map when omitted.
    #[arg(long)]
    pub mark: Option<PathBuf>,
    #[command(flatten)]
    pub rasters: RasterArgs,
    /// Skip the spatio-temporal interaction thinning.
    #[arg(long)]
    pub no_thinning: bool,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum)]
    pub edge_correction: Option<EdgeArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub marks: MarkArgs,
    /// Conditioning location `x,y`.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Realization CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FgArg {
    Km,
    Rs,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Comma-separated subset of L,F,G,J,E,V.
    #[arg(long)]
    pub statistics: Option<String>,
    #[arg(long, value_enum)]
    pub fg_correction: Option<FgArg>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub n_r: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub marks: MarkArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long)]
    pub n_sim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Keep every simulated curve in the output.
    #[arg(long)]
    pub save_sims: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummariesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Simulated realization CSV instead of `--data`.
    #[arg(long, conflicts_with = "data")]
    pub realization: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Curve table CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Check result JSON to draw as envelope panels.
    #[arg(long)]
    pub check: Option<PathBuf>,
    /// Realization CSV to draw with its mark histogram.
    #[arg(long)]
    pub realization: Option<PathBuf>,
    /// Observed pattern; drawn alone or as the histogram reference.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` and runs the command; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command line, on `--num-cores` threads when given.
pub fn execute(cli: &Cli) -> Result<()> {
    match cli.num_cores {
        Some(0) => Err(Error::invalid("--num-cores must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Option<RunConfig>,
}

impl Ctx<'_> {
    fn stage(&self, name: &str, done: usize, total: usize) {
        if self.cli.verbose {
            eprintln!("stage={name} done={done}/{total}");
        }
    }

    fn warn(&self, warnings: &[String]) {
        for w in warnings {
            eprintln!("warning: {w}");
        }
    }

    fn window(&self, flag: Option<&str>) -> Result<Option<Window>> {
        match flag {
            Some(s) => io::parse_window(s).map(Some),
            None => Ok(self.config.as_ref().and_then(|c| c.window)),
        }
    }

    fn data_path(&self, flag: Option<&Path>) -> Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.config.as_ref().and_then(|c| c.data.clone()))
            .ok_or_else(|| Error::invalid("no data file given (--data or config `data`)"))
    }

    fn pattern(&self, args: &DataArgs) -> Result<MarkedPattern> {
        let path = self.data_path(args.data.as_deref())?;
        let (pattern, warnings) = io::read_pattern_csv(&path, self.window(args.window.as_deref())?)?;
        self.warn(&warnings);
        Ok(pattern)
    }

    fn rasters(&self, args: &RasterArgs) -> Result<Vec<RasterGrid>> {
        let dir = args.rasters.clone().or_else(|| self.config.as_ref().and_then(|c| c.rasters.clone()));
        let Some(dir) = dir else {
            return Ok(Vec::new());
        };
        let rasters = read_raster_dir(&dir)?;
        if args.scale_rasters {
            scale_rasters(&rasters)
        } else {
            Ok(rasters)
        }
    }

    fn write_json<T: serde::Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        io::write_json(path, value)
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let ctx = Ctx { cli, config };
    match &cli.command {
        Command::Fit(a) => fit(&ctx, a),
        Command::TrainMark(a) => train_mark(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Check(a) => check(&ctx, a),
        Command::Summaries(a) => summaries_cmd(&ctx, a),
        Command::Plot(a) => plot_cmd(&ctx, a),
    }
}

fn parse_delta(s: &str) -> Result<DeltaSpec> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad delta value `{v}`"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(match values.as_slice() {
        [d] => DeltaSpec::Single(*d),
        _ => DeltaSpec::List(values),
    })
}

fn fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    ctx.stage("read_data", 0, 3);
    let pattern = ctx.pattern(&a.data)?;
    let base = ctx.config.as_ref().and_then(|c| c.fit.clone());
    let schedule: QuadratureSchedule = match (&a.grids, &base) {
        (Some(p), _) => io::read_json(p)?,
        (None, Some(b)) => b.schedule.clone(),
        (None, None) => return Err(Error::invalid("no grid schedule given (--grids or config `fit`)")),
    };
    let delta = match (&a.delta, &base) {
        (Some(s), _) => parse_delta(s)?,
        (None, Some(b)) => b.delta.clone(),
        (None, None) => return Err(Error::invalid("no mapping exponent given (--delta or config `fit`)")),
    };
    let strategy = a.strategy.map(Strategy::from).or(base.as_ref().map(|b| b.strategy)).unwrap_or(Strategy::GlobalLocal);
    let mut config = match base {
        Some(b) => FitConfig { schedule, delta, strategy, ..b },
        None => FitConfig::new(schedule, strategy, delta),
    };
    if let Some(p) = &a.budgets {
        config.budgets = io::read_json::<BudgetSchedule>(p)?;
    }
    let starts: &mut StartsConfig = &mut config.starts;
    if let Some(n) = a.global_restarts {
        starts.global_restarts = n;
    }
    if let Some(n) = a.local_starts {
        starts.local_starts = n;
    }
    if let Some(s) = ctx.cli.seed {
        starts.seed = s;
    }
    ctx.stage("fit", 1, 3);
    let mut result = fit_process(&pattern, &config)?;
    if ctx.cli.deterministic {
        result.elapsed = 0.0;
    }
    ctx.warn(&result.diagnostics);
    ctx.write_json(&a.out, &result)?;
    ctx.stage("write", 3, 3);
    Ok(())
}

fn train_mark(ctx: &Ctx, a: &TrainMarkArgs) -> Result<()> {
    ctx.stage("read_data", 0, 3);
    let pattern = ctx.pattern(&a.data)?;
    let rasters = ctx.rasters(&a.rasters)?;
    let block = ctx.config.as_ref().and_then(|c| c.train_mark.clone());
    let delta = match (a.delta, &a.fit, &block) {
        (Some(d), _, _) => d,
        (None, Some(p), _) => io::read_json::<FitResult>(p)?.selected_delta,
        (None, None, Some(b)) => b.features.delta,
        _ => return Err(Error::invalid("no mapping exponent given (--delta, --fit or config `train_mark`)")),
    };
    let radius = a
        .radius
        .or(block.as_ref().map(|b| b.features.radius))
        .ok_or_else(|| Error::invalid("no competition radius given (--radius or config `train_mark`)"))?;
    let edge_correction = a
        .edge_correction
        .map(EdgeCorrection::from)
        .or(block.as_ref().map(|b| b.features.edge_correction))
        .unwrap_or_default();
    let features = FeatureConfig { delta, radius, edge_correction };
    let mut train = block.map(|b| b.train).unwrap_or_default();
    if let Some(e) = a.engine {
        train.engine = match e {
            EngineArg::Gbt => Engine::GradientBoostedTrees,
            EngineArg::Rf => Engine::RandomForest,
        };
    }
    if let Some(k) = a.cv_folds {
        train.cv_folds = k;
    }
    if let Some(n) = a.tuning_grid_size {
        train.tuning_grid_size = n;
    }
    if let Some(m) = a.metric {
        train.metric = match m {
            MetricArg::Rmse => Metric::Rmse,
            MetricArg::Mae => Metric::Mae,
            MetricArg::Rsq => Metric::Rsq,
        };
    }
    if let Some(s) = ctx.cli.seed {
        train.seed = s;
    }
    ctx.stage("train", 1, 3);
    let model = train_marks_for_pattern(&pattern, &rasters, &features, &train)?;
    ctx.warn(&model.warnings);
    ctx.write_json(&a.out, &model)?;
    ctx.stage("write", 3, 3);
    Ok(())
}

struct Loaded {
    fit: FitResult,
    model: Option<TrainedMarkModel>,
    rasters: Vec<RasterGrid>,
}

impl Loaded {
    fn read(ctx: &Ctx, a: &MarkArgs) -> Result<Self> {
        let fit: FitResult = io::read_json(&a.fit)?;
        let model = a.mark.as_deref().map(io::read_json::<TrainedMarkModel>).transpose()?;
        Ok(Loaded { fit, model, rasters: ctx.rasters(&a.rasters)? })
    }

    fn source(&self) -> Result<MarkSource<'_>> {
        Ok(match &self.model {
            Some(model) => MarkSource::Model { model, rasters: &self.rasters },
            None => MarkSource::Mapping(fit_time_mapping(&self.fit)?),
        })
    }

    fn mode(&self) -> MarkMode {
        if self.model.is_some() {
            MarkMode::MarkModel
        } else {
            MarkMode::TimeToSize
        }
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("expected `x,y`, got `{s}`")))?;
    match v.as_slice() {
        [x, y] => Ok((*x, *y)),
        _ => Err(Error::invalid(format!("expected `x,y`, got `{s}`"))),
    }
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    ctx.stage("read", 0, 3);
    let loaded = Loaded::read(ctx, &a.marks)?;
    let mut config = ctx.config.as_ref().and_then(|c| c.simulate.clone()).unwrap_or_default();
    config.mark_mode = loaded.mode();
    if let Some(s) = &a.anchor {
        config.anchor = Some(parse_pair(s)?);
    }
    if a.marks.no_thinning {
        config.thinning = false;
    }
    config.radius = a.marks.radius.or(config.radius);
    config.edge_correction = a.marks.edge_correction.map(EdgeCorrection::from).or(config.edge_correction);
    if let Some(s) = ctx.cli.seed {
        config.seed = s;
    }
    ctx.stage("simulate", 1, 3);
    let real = simulate_mpp(&loaded.fit, loaded.source()?, &config)?;
    io::write_realization(&real, &a.out)?;
    if let Some(p) = &a.plot {
        let reference: Option<Vec<f64>> = loaded.fit.data.as_ref().map(|d| d.points.iter().map(|p| p.size).collect());
        io::write_text(p, &plot::realization_svg(&real, reference.as_deref()))?;
    }
    ctx.stage("write", 3, 3);
    Ok(())
}

fn parse_statistics(s: &str) -> Result<Vec<SummaryKind>> {
    s.split(',').map(|k| SummaryKind::parse(k.trim())).collect()
}

fn estimator(base: EstimatorOptions, a: &EstimatorArgs) -> EstimatorOptions {
    EstimatorOptions {
        n_r: a.n_r.unwrap_or(base.n_r),
        r_max: a.r_max.or(base.r_max),
        fg_correction: match a.fg_correction {
            Some(FgArg::Km) => FgCorrection::Km,
            Some(FgArg::Rs) => FgCorrection::Rs,
            None => base.fg_correction,
        },
        bandwidth: base.bandwidth,
    }
}

fn check(ctx: &Ctx, a: &CheckArgs) -> Result<()> {
    ctx.stage("read", 0, 3);
    let loaded = Loaded::read(ctx, &a.marks)?;
    let mut options = ctx.config.as_ref().and_then(|c| c.check.clone()).unwrap_or_default();
    options.estimator = estimator(options.estimator, &a.estimator);
    if let Some(s) = &a.estimator.statistics {
        options.statistics = parse_statistics(s)?;
    }
    if let Some(n) = a.n_sim {
        options.n_sim = n;
    }
    if let Some(alpha) = a.alpha {
        options.alpha = alpha;
    }
    if a.marks.no_thinning {
        options.thinning = false;
    }
    options.radius = a.marks.radius.or(options.radius);
    options.edge_correction = a.marks.edge_correction.map(EdgeCorrection::from).or(options.edge_correction);
    options.save_sims |= a.save_sims;
    options.mark_mode = loaded.mode();
    if let Some(s) = ctx.cli.seed {
        options.seed = s;
    }
    ctx.stage("check", 1, 3);
    let result: CheckResult = check_model_fit(&loaded.fit, loaded.source()?, &options)?;
    ctx.warn(&result.warnings);
    ctx.write_json(&a.out, &result)?;
    if let Some(p) = &a.plot {
        io::write_text(p, &plot::envelope_svg(&result)?)?;
    }
    if ctx.cli.verbose {
        eprintln!("combined p={}", io::fmt_f64(result.combined_p()));
    }
    ctx.stage("write", 3, 3);
    Ok(())
}

fn summaries_cmd(ctx: &Ctx, a: &SummariesArgs) -> Result<()> {
    let pattern = match &a.realization {
        Some(p) => crate::check::realization_pattern(&io::read_realization(p)?),
        None => ctx.pattern(&a.data)?,
    };
    let base = ctx.config.as_ref().and_then(|c| c.summaries).unwrap_or_default();
    let options = estimator(base, &a.estimator);
    let kinds = match &a.estimator.statistics {
        Some(s) => parse_statistics(s)?,
        None => SummaryKind::ALL.to_vec(),
    };
    ctx.stage("summaries", 0, 1);
    let curves = summaries(&pattern, &kinds, &options)?;
    io::write_text(&a.out, &io::curves_to_csv(&curves))?;
    ctx.stage("summaries", 1, 1);
    Ok(())
}

fn plot_cmd(ctx: &Ctx, a: &PlotArgs) -> Result<()> {
    let svg = if let Some(p) = &a.check {
        plot::envelope_svg(&io::read_json::<CheckResult>(p)?)?
    } else if let Some(p) = &a.realization {
        let real = io::read_realization(p)?;
        let reference = match a.data.data {
            Some(_) => Some(ctx.pattern(&a.data)?.points.iter().map(|p| p.size).collect::<Vec<_>>()),
            None => None,
        };
        plot::realization_svg(&real, reference.as_deref())
    } else {
        let pattern = ctx.pattern(&a.data)?;
        let marks: Vec<f64> = pattern.points.iter().map(|p| p.size).collect();
        plot::pattern_svg(&pattern.locations(), &marks, &pattern.window, "observed pattern")
    };
    io::write_text(&a.out, &svg)
}
