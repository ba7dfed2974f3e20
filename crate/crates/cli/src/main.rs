mod overrides;
mod report;

use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lipsync_core::audio::parse_wav;
use lipsync_core::classifier::{
    calibrate, DEFAULT_SHARPENING_EXPONENT, DEFAULT_SILENCE_RMS_THRESHOLD,
    DEFAULT_SMOOTHING_TIME_CONSTANT,
};
use lipsync_core::pipeline::{analyze_clip, ingest_wav};
use lipsync_core::track::bake;
use lipsync_core::{AudioClip, ClassifierError, MfccConfig, PhonemeProfile, PipelineError};
use lipsync_server::{Server, ServerConfig, ServerError};

use overrides::MfccOverrides;

#[derive(Debug, Parser)]
#[command(name = "lipsync", version, about = "Audio-driven viseme weights for avatar lip sync")]
struct Cli {
    /// JSON file of MFCC parameter overrides.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Log debug detail to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a phoneme profile from labelled example recordings.
    Calibrate {
        /// Two or more LABEL=WAV pairs.
        #[arg(value_name = "LABEL=WAV", required = true)]
        pairs: Vec<String>,
        #[arg(short, long, value_name = "PROFILE")]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SILENCE_RMS_THRESHOLD)]
        silence_threshold: f64,
        #[arg(long, default_value_t = DEFAULT_SHARPENING_EXPONENT)]
        sharpening: f64,
        /// Smoothing time constant in seconds.
        #[arg(long, default_value_t = DEFAULT_SMOOTHING_TIME_CONSTANT)]
        smoothing: f64,
    },
    /// Bake a WAV file into a `.viseme.json` track.
    Bake {
        audio: PathBuf,
        profile: PathBuf,
        #[arg(short, long, value_name = "TRACK")]
        output: PathBuf,
    },
    /// Print per-frame rms, top phoneme and weights.
    Analyze {
        audio: PathBuf,
        profile: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the WebSocket/HTTP service until interrupted.
    Serve {
        #[arg(long, env = "LIPSYNC_LISTEN", default_value = lipsync_server::app::DEFAULT_LISTEN)]
        listen: SocketAddr,
        /// Directory of `*.json` profiles.
        #[arg(long, env = "LIPSYNC_PROFILE_DIR")]
        profile_dir: Option<PathBuf>,
        #[arg(long, env = "LIPSYNC_MAX_SESSIONS", default_value_t = lipsync_server::app::DEFAULT_MAX_SESSIONS)]
        max_sessions: usize,
        /// Built viewer bundle to serve at `/`.
        #[arg(long, env = "LIPSYNC_VIEWER_DIR")]
        viewer_dir: Option<PathBuf>,
        /// Profile id selected on connect; defaults to the first id.
        #[arg(long, env = "LIPSYNC_DEFAULT_PROFILE")]
        default_profile: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

/// A reported failure and its exit status.
#[derive(Debug)]
enum Failure {
    /// Bad arguments or unreadable/invalid input.
    Input(String),
    /// Valid input that could not be processed.
    Processing(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Processing(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Processing(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn init_logging(verbose: bool) {
    let default = if verbose { "debug" } else { "info" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(false)
        .init();
}

fn run(cli: Cli) -> Result<(), Failure> {
    let overrides = match &cli.config {
        Some(path) => Some(MfccOverrides::load(path).map_err(Failure::Input)?),
        None => None,
    };
    match cli.command {
        Command::Calibrate {
            pairs,
            output,
            silence_threshold,
            sharpening,
            smoothing,
        } => cmd_calibrate(&pairs, &output, overrides.as_ref(), silence_threshold, sharpening, smoothing),
        Command::Bake { audio, profile, output } => cmd_bake(&audio, &profile, &output, overrides.as_ref()),
        Command::Analyze { audio, profile, format } => cmd_analyze(&audio, &profile, format, overrides.as_ref()),
        Command::Serve {
            listen,
            profile_dir,
            max_sessions,
            viewer_dir,
            default_profile,
        } => cmd_serve(ServerConfig {
            listen,
            profile_dir,
            max_sessions,
            viewer_dir,
            default_profile,
        }),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_profile(path: &Path, overrides: Option<&MfccOverrides>) -> Result<PhonemeProfile, Failure> {
    let profile = PhonemeProfile::from_json(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    if let Some(o) = overrides {
        if !o.agrees_with(&profile.mfcc_config) {
            return Err(Failure::Input(format!(
                "--config disagrees with the MFCC configuration stored in {}",
                path.display()
            )));
        }
    }
    Ok(profile)
}

fn load_wav(path: &Path) -> Result<(Vec<u8>, AudioClip), Failure> {
    let bytes = read(path)?;
    let clip = parse_wav(&bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok((bytes, clip))
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::Processing(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn parse_pair(pair: &str) -> Result<(String, PathBuf), Failure> {
    match pair.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_owned(), PathBuf::from(path))),
        _ => Err(Failure::Input(format!("expected LABEL=WAV, got {pair:?}"))),
    }
}

fn cmd_calibrate(
    pairs: &[String],
    output: &Path,
    overrides: Option<&MfccOverrides>,
    silence_threshold: f64,
    sharpening: f64,
    smoothing: f64,
) -> Result<(), Failure> {
    if pairs.len() < 2 {
        return Err(Failure::Input(format!(
            "calibrate needs at least two LABEL=WAV pairs, got {}\n\nUsage: lipsync calibrate <LABEL=WAV>... --output <PROFILE>",
            pairs.len()
        )));
    }
    let config = overrides.map_or_else(MfccConfig::default, |o| o.apply(&MfccConfig::default()));
    config.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let mut clips = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let (label, path) = parse_pair(pair)?;
        let (_, clip) = load_wav(&path)?;
        clips.push((label, clip));
    }
    let mut profile = calibrate(&clips, &config, silence_threshold).map_err(|e| match e {
        ClassifierError::DuplicateLabel(_) | ClassifierError::TooFewLabels(_) => Failure::Input(e.to_string()),
        other => Failure::Processing(other.to_string()),
    })?;
    profile.sharpening_exponent = sharpening;
    profile.smoothing_time_constant = smoothing;
    profile.validate().map_err(|e| Failure::Input(e.to_string()))?;
    write_atomic(output, &profile.to_json())?;
    for t in &profile.templates {
        println!("{}\t{} voiced frames", t.label, t.sample_count);
    }
    println!("wrote {}", output.display());
    Ok(())
}

fn processing(e: PipelineError) -> Failure {
    Failure::Processing(e.to_string())
}

fn cmd_bake(audio: &Path, profile: &Path, output: &Path, overrides: Option<&MfccOverrides>) -> Result<(), Failure> {
    let profile = load_profile(profile, overrides)?;
    let (bytes, _) = load_wav(audio)?;
    let track = bake(&bytes, &profile).map_err(processing)?;
    write_atomic(output, &track.serialize())?;
    println!(
        "{} frames, {:.3} s -> {}",
        track.frames.len(),
        track.duration(),
        output.display()
    );
    Ok(())
}

fn cmd_analyze(
    audio: &Path,
    profile: &Path,
    format: Format,
    overrides: Option<&MfccOverrides>,
) -> Result<(), Failure> {
    let profile = load_profile(profile, overrides)?;
    let (bytes, _) = load_wav(audio)?;
    let clip = ingest_wav(&bytes, profile.mfcc_config.sample_rate)
        .map_err(|e| Failure::Input(format!("{}: {e}", audio.display())))?;
    let analysis = analyze_clip(&clip, &profile).map_err(processing)?;
    let rows = report::rows(&analysis);
    let text = match format {
        Format::Json => report::to_json(&rows),
        Format::Table => report::to_table(&rows, &profile.labels()),
    };
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| Failure::Processing(format!("cannot write report: {e}")))
}

fn cmd_serve(config: ServerConfig) -> Result<(), Failure> {
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::Processing(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let server = Server::bind(config).await.map_err(|e| match e {
            ServerError::Io(_) => Failure::Processing(e.to_string()),
            other => Failure::Input(other.to_string()),
        })?;
        let addr = server
            .local_addr()
            .map_err(|e| Failure::Processing(e.to_string()))?;
        tracing::info!("listening on http://{addr}");
        server
            .run(shutdown_signal())
            .await
            .map_err(|e| Failure::Processing(e.to_string()))?;
        tracing::info!("shut down");
        Ok(())
    })
}

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => {
                let _ = interrupt.await;
                return;
            }
        };
        tokio::select! {
            _ = interrupt => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = interrupt.await;
    }
}
