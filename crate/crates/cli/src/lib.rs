//! The `ctx` command line: `ingest`, `query` and `serve`.

use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ctxscope_core::build::{DEFAULT_MAX_TERMS, DEFAULT_SEED};
use ctxscope_core::index::DEFAULT_BACKGROUND_SAMPLE;
use ctxscope_core::projector::DEFAULT_DIMS;
use ctxscope_core::query::DEFAULT_DISPLAY;
use ctxscope_core::{build_index_file, relate, storage, BuildOptions, BuildReport, Error, KindSet, Stopwords};
use ctxscope_server::{router, ApiError, AppState, LoadedIndex, RelateRequest, RouterOptions, ServerError};

/// Environment variable that overrides `serve --index`.
pub const INDEX_ENV: &str = "CTXSCOPE_INDEX";

#[derive(Debug, Parser)]
#[command(name = "ctx", version, about = "Random-projection context networks over bibliographic records")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a JSON-lines corpus and print the build report.
    Ingest(IngestArgs),
    /// Run one query against an index.
    Query(QueryArgs),
    /// Serve the HTTP API until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIMS)]
    pub dims: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// One stop word per line; `#` starts a comment.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BACKGROUND_SAMPLE)]
    pub background_sample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Tsv,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    pub text: String,
    #[arg(long)]
    pub index: PathBuf,
    /// Comma list of kinds to display: term, author, journal, dewey (or t, a, j, d).
    #[arg(long, value_parser = parse_types)]
    pub types: Option<KindSet>,
    #[arg(short, default_value_t = DEFAULT_DISPLAY)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origin; repeat for several. Any origin when omitted.
    #[arg(long = "cors-origin")]
    pub cors_origins: Vec<String>,
}

fn parse_types(s: &str) -> Result<KindSet, String> {
    KindSet::parse_list(s).map_err(|e| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    /// 0 ok, 1 IO or system failure, 2 user error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) | CliError::File { source: e, .. } => match e {
                Error::EmptyQuery { .. }
                | Error::NoSignal
                | Error::InvalidConfig(_)
                | Error::UnknownEntity(_)
                | Error::InactiveEntity(_) => 2,
                _ => 1,
            },
        }
    }
}

fn at(path: &std::path::Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |source| CliError::File { path: path.to_path_buf(), source }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        CliError::Usage(e.message)
    }
}

impl From<ServerError> for CliError {
    fn from(e: ServerError) -> Self {
        match e {
            ServerError::Core(e) => CliError::Core(e),
            ServerError::Io(e) => CliError::Io(e),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    match cli.command {
        Command::Ingest(args) => run_ingest(&args, &mut stdout.lock()).map(drop),
        Command::Query(args) => run_query(&args, &mut stdout.lock()),
        Command::Serve(args) => {
            let index = std::env::var_os(INDEX_ENV).map(PathBuf::from).or(args.index.clone());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(run_serve(ServeArgs { index, ..args }))
        }
    }
}

pub fn ingest_options(args: &IngestArgs) -> Result<BuildOptions, CliError> {
    let stopwords = match &args.stopwords {
        Some(path) => Stopwords::from_file(path).map_err(at(path))?,
        None => Stopwords::english(),
    };
    Ok(BuildOptions {
        dims: args.dims,
        max_terms: args.max_terms,
        seed: args.seed,
        background_sample: args.background_sample,
        stopwords,
        ..Default::default()
    })
}

pub fn run_ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<BuildReport, CliError> {
    let opts = ingest_options(args)?;
    if !args.input.is_file() {
        return Err(at(&args.input)(Error::Io(io::Error::new(io::ErrorKind::NotFound, "input not readable"))));
    }
    let report = build_index_file(&args.input, &args.out, &opts)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(report)
}

pub fn run_query(args: &QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let request = RelateRequest::new(args.text.clone(), args.types, args.k, None)?;
    let index = storage::load(&args.index).map_err(at(&args.index))?;
    let network = relate(&index, &request.input, &Stopwords::english(), &request.options())?;
    match args.format {
        Format::Json => writeln!(out, "{}", network.to_json())?,
        Format::Dot => write!(out, "{}", network.to_dot())?,
        Format::Tsv => write!(out, "{}", network.to_tsv())?,
    }
    Ok(())
}

/// Serves until SIGINT or SIGTERM. SIGHUP reloads the index file.
pub async fn run_serve(args: ServeArgs) -> Result<(), CliError> {
    let path = args
        .index
        .clone()
        .ok_or_else(|| CliError::Usage(format!("no index given (use --index or {INDEX_ENV})")))?;
    let state = Arc::new(AppState::new(Some(LoadedIndex::from_file(&path).map_err(at(&path))?)));
    let opts = RouterOptions { static_dir: args.static_dir.clone(), cors_origins: args.cors_origins.clone() };
    let app = router(state.clone(), &opts)?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], args.port))).await?;
    println!("listening on http://{}", listener.local_addr()?);

    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut hangup = signal(SignalKind::hangup())?;
        tokio::spawn(async move {
            while hangup.recv().await.is_some() {
                match state.reload(&path) {
                    Ok(()) => eprintln!("reloaded {}", path.display()),
                    Err(e) => eprintln!("reload of {} failed, keeping current index: {e}", path.display()),
                }
            }
        });
    }
    ctxscope_server::serve(listener, app, shutdown_signal()).await?;
    Ok(())
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {},
        _ = terminate => {},
    }
}
