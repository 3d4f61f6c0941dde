use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use diqcert::eat::{sweep, Axis, EatSweepResult, SweepLists};
use diqcert::edq::{EdqDocument, EdqError, Stage};
use diqcert::ingest::{parse_data_config, parse_data_dir, EberData, IngestError};
use diqcert::npa::{GuessTarget, NpaError};
use diqcert::solver::default_solver;
use diqcert::tradeoff::{
    calculate_mintradeoff, DiameterConvention, EntropyType, HabTable, MinTradeoffInfo, MinTradeoffRequest,
    TradeoffError, UseCase,
};

/// Device-independent randomness and key-rate certification.
///
/// Set QCERT_SOLVER to an external solver command to replace the built-in
/// interior-point method.
#[derive(Parser)]
#[command(name = "diqcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the .dat files named by a data configuration.
    ParseData(ParseDataArgs),
    /// Compute a min-tradeoff function from a certificate.
    Mintradeoff(MintradeoffArgs),
    /// Sweep finite-size rates over parameter lists.
    Rates(RatesArgs),
    /// Export a 2D net-gain grid from a sweep.
    PlotData(PlotDataArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Check a data configuration or an .edq file.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ParseDataArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory with .dat files; defaults to the configured one.
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Expressions to evaluate on the counts (repeatable).
    #[arg(long = "expression")]
    expressions: Vec<String>,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntropyArg {
    Min,
    Vn,
}

#[derive(Clone, Copy, ValueEnum)]
enum UseCaseArg {
    Rng,
    Qkd,
}

#[derive(Clone, Copy, ValueEnum)]
enum GuessArg {
    Joint,
    Alice,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiameterArg {
    QuantumRange,
    FullSimplex,
}

#[derive(Args)]
struct MintradeoffArgs {
    /// Parsed data; supplies the scenario and, without --value, the certificate values.
    #[arg(long)]
    eber: Option<PathBuf>,
    /// Certificate expression (repeatable).
    #[arg(long = "certificate", required = true)]
    certificates: Vec<String>,
    /// Certificate value, one per --certificate.
    #[arg(long = "value", allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    a_config: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    b_config: Vec<usize>,
    /// Spot setting as x,y.
    #[arg(long, default_value = "0,0")]
    spot: String,
    #[arg(long, value_enum, default_value = "min")]
    entropy: EntropyArg,
    #[arg(long, value_enum, default_value = "rng")]
    use_case: UseCaseArg,
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    m_radau: usize,
    /// H(A|B) table, e.g. "(0,2):0.01".
    #[arg(long)]
    hab: Option<String>,
    #[arg(long, value_enum)]
    guess: Option<GuessArg>,
    #[arg(long, value_enum, default_value = "quantum-range")]
    diameter: DiameterArg,
    /// Confidence for error bars of values taken from --eber.
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    #[arg(long, default_value = "")]
    nickname: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    mt: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    chunk_time: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    events_per_sec: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1e-12")]
    eps_s: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.99")]
    p_omega: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    switch_delay: Vec<f64>,
    /// Largest k in the grid beta = 2^-k.
    #[arg(long, default_value_t = 40)]
    beta_max_exponent: u32,
    #[arg(long)]
    subtract_consumption: bool,
    /// Lower t by the certificate error bars (default: when present).
    #[arg(long)]
    derate: Option<bool>,
    /// Events per second of the parsed data, used when --events-per-sec is absent.
    #[arg(long)]
    eber: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotDataArgs {
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long, allow_hyphen_values = true, default_value = "-log-beta")]
    x: String,
    #[arg(long, allow_hyphen_values = true, default_value = "gamma")]
    y: String,
    /// Output file; .json writes JSON, anything else CSV. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Directory where results are written as .edq files.
    #[arg(long)]
    state_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, conflicts_with = "edq")]
    config: Option<PathBuf>,
    #[arg(long)]
    edq: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<EdqError> for CliError {
    fn from(e: EdqError) -> Self {
        match e {
            EdqError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<TradeoffError> for CliError {
    fn from(e: TradeoffError) -> Self {
        match e {
            TradeoffError::Relaxation(NpaError::Unsolved { .. } | NpaError::Solver(_)) | TradeoffError::BadDual(_) => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn save(stage: Stage, nickname: &str, out: &Path) -> Result<(), CliError> {
    EdqDocument::new(stage, nickname).save(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn parse_spot(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Validation(format!("spot setting '{text}' must look like 2,0"));
    let (x, y) = text.trim().trim_matches(|c| c == '(' || c == ')').split_once(',').ok_or_else(bad)?;
    Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

fn parse_data(args: ParseDataArgs) -> Result<(), CliError> {
    let config = parse_data_config(&read(&args.config)?)?;
    let dir = args.dir.unwrap_or_else(|| PathBuf::from(&config.directory_with_datafiles));
    let counts = parse_data_dir(&config, &dir)?;
    let report = counts.report.clone();
    let mut eber = EberData::new(config, counts)?;
    for e in &args.expressions {
        eber.add_expression(e, args.confidence)?;
    }
    println!(
        "files: {}, accepted rows: {}, ignored by metadata: {}, unknown tags: {}, short rows: {}",
        report.files.len(),
        report.accepted_rows,
        report.ignored_metadata,
        report.unknown_tag,
        report.short_rows
    );
    println!("events per second: {}", eber.events_per_second);
    for s in &eber.expressions {
        println!("{} = {} +/- {} (confidence {})", s.expression, s.value, s.half_width, s.confidence);
    }
    let nickname = eber.config.setup_nickname.clone();
    save(Stage::EberData(Box::new(eber)), &nickname, &args.out)
}

fn build_request(args: &MintradeoffArgs) -> Result<MinTradeoffRequest, CliError> {
    let eber = args
        .eber
        .as_deref()
        .map(|p| EdqDocument::load(p)?.into_eber_data().map_err(CliError::from))
        .transpose()?;
    let (a_config, b_config) = match &eber {
        Some(e) if args.a_config.is_empty() => (e.config.a_config.clone(), e.config.b_config.clone()),
        _ => (args.a_config.clone(), args.b_config.clone()),
    };
    if a_config.is_empty() || b_config.is_empty() {
        return Err(CliError::Validation("give --eber or both --a-config and --b-config".into()));
    }
    let (values, half_widths) = if !args.values.is_empty() {
        if args.values.len() != args.certificates.len() {
            return Err(CliError::Validation("give one --value per --certificate".into()));
        }
        (args.values.clone(), Vec::new())
    } else if let Some(mut e) = eber.clone() {
        let mut values = Vec::new();
        let mut widths = Vec::new();
        for c in &args.certificates {
            let s = e.add_expression(c, args.confidence)?;
            values.push(s.value);
            widths.push(s.half_width);
        }
        (values, widths)
    } else {
        return Err(CliError::Validation("give --value or --eber".into()));
    };
    let mut req = MinTradeoffRequest::new(args.certificates.clone(), values, a_config, b_config);
    req.half_widths = half_widths;
    req.spot_setting = parse_spot(&args.spot)?;
    req.relaxation_level = args.level;
    req.m_radau = args.m_radau;
    req.entropy_type = match args.entropy {
        EntropyArg::Min => EntropyType::MinEntropy,
        EntropyArg::Vn => EntropyType::VonNeumann,
    };
    req.use_case = match args.use_case {
        UseCaseArg::Rng => UseCase::RandomnessGeneration,
        UseCaseArg::Qkd => UseCase::KeyDistribution,
    };
    if let Some(h) = &args.hab {
        req.hab = h.parse::<HabTable>()?;
    }
    req.guess = args.guess.map(|g| match g {
        GuessArg::Joint => GuessTarget::Joint,
        GuessArg::Alice => GuessTarget::Alice,
    });
    req.diameter_convention = match args.diameter {
        DiameterArg::QuantumRange => DiameterConvention::QuantumRange,
        DiameterArg::FullSimplex => DiameterConvention::FullSimplex,
    };
    req.setup_nickname = match &eber {
        Some(e) if args.nickname.is_empty() => e.config.setup_nickname.clone(),
        _ => args.nickname.clone(),
    };
    if let Some(e) = &eber {
        req.additional_data = e.config.additional_data_dict.clone();
    }
    Ok(req)
}

fn mintradeoff(args: MintradeoffArgs) -> Result<(), CliError> {
    let req = build_request(&args)?;
    req.validate()?;
    let info = calculate_mintradeoff(&req, default_solver().as_ref())?;
    print_tradeoff(&info);
    match &args.out {
        Some(out) => save(Stage::MinTradeoff(Box::new(info.clone())), &info.setup_nickname, out),
        None => Ok(()),
    }
}

fn print_tradeoff(info: &MinTradeoffInfo) {
    println!("asymptotic keyrate: {}", info.asymptotic_keyrate);
    println!("certificate value: {}", info.certificate_value);
    println!("constant: {}", info.constant);
    for (c, l) in info.certificates.iter().zip(&info.coefficients) {
        println!("coefficient of {}: {}", c.expression, l);
    }
    println!("f range over the quantum set: [{}, {}]", info.profile.quantum_min, info.profile.quantum_max);
}

fn rates(args: RatesArgs) -> Result<(), CliError> {
    let info = EdqDocument::load(&args.mt)?.into_min_tradeoff()?;
    let events = if !args.events_per_sec.is_empty() {
        args.events_per_sec.clone()
    } else if let Some(p) = &args.eber {
        vec![EdqDocument::load(p)?.into_eber_data()?.events_per_second]
    } else {
        return Err(CliError::Validation("give --events-per-sec or --eber".into()));
    };
    if args.beta_max_exponent == 0 {
        return Err(CliError::Validation("--beta-max-exponent must be at least 1".into()));
    }
    let lists = SweepLists {
        chunk_time: args.chunk_time,
        events_per_second: events,
        eps_s: args.eps_s,
        p_omega: args.p_omega,
        gamma: args.gamma,
        switch_delay: args.switch_delay,
        beta_exponents: (1..=args.beta_max_exponent).collect(),
        subtract_consumption: args.subtract_consumption,
        derate_by_error_bar: args.derate,
    };
    let result = sweep(&info, &lists).map_err(|e| CliError::Validation(e.to_string()))?;
    print_sweep(&result);
    match &args.out {
        Some(out) => save(Stage::SweepResult(Box::new(result)), &info.setup_nickname, out),
        None => Ok(()),
    }
}

fn print_sweep(result: &EatSweepResult) {
    println!("asymptotic keyrate: {}", result.asymptotic_keyrate);
    println!("net gain per second: {}", result.net_gain_per_second());
    println!("combinations: {}", result.best_per_combination.len());
    let dict = serde_json::Value::Object(result.parameters_dict());
    println!("{}", serde_json::to_string_pretty(&dict).expect("parameters serialize"));
}

fn plot_data(args: PlotDataArgs) -> Result<(), CliError> {
    let result = EdqDocument::load(&args.sweep)?.into_sweep()?;
    let x: Axis = args.x.parse().map_err(CliError::Validation)?;
    let y: Axis = args.y.parse().map_err(CliError::Validation)?;
    let grid = result.grid(x, y);
    let json = args.out.as_deref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let text = if json {
        serde_json::to_string_pretty(&grid).expect("grid serializes")
    } else {
        grid.to_csv().map_err(|e| CliError::Io(e.to_string()))?
    };
    match &args.out {
        Some(out) => {
            std::fs::write(out, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
            println!("wrote {}", out.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let addr = format!("{}:{}", args.bind, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime
        .block_on(diqcert_service::serve(&addr, args.state_dir.as_deref()))
        .map_err(|e| CliError::Io(format!("{addr}: {e}")))
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    match (args.config, args.edq) {
        (Some(path), None) => {
            let config = parse_data_config(&read(&path)?)?;
            println!(
                "ok: data config '{}', AS={} BS={} AO={} BO={}",
                config.setup_nickname, config.a_settings, config.b_settings, config.ao, config.bo
            );
        }
        (None, Some(path)) => {
            let doc = EdqDocument::load(&path)?;
            if let Stage::Certificate(req) = &doc.stage {
                req.validate()?;
            }
            println!("ok: {} document, version {}", doc.stage.kind(), doc.version);
        }
        _ => return Err(CliError::Validation("give --config or --edq".into())),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::ParseData(a) => parse_data(a),
        Command::Mintradeoff(a) => mintradeoff(a),
        Command::Rates(a) => rates(a),
        Command::PlotData(a) => plot_data(a),
        Command::Serve(a) => serve(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
