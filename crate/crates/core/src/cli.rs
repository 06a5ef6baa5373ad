//! The `gptsm` command line.
//!
//! ```text
//! gptsm render  [OPTIONS] [INPUT]      render one method (gp, ngp, wf)
//! gptsm compare [OPTIONS] [INPUT]      GP and NGP side by side as HTML
//! gptsm cache stats|verify [--cache]   inspect the response cache
//! ```
//!
//! Exit codes: 0 success, 1 I/O, storage or offline-cache errors, 2 usage.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cache_store::{self, CacheStore, DEFAULT_CACHE_DIR, ENTRIES_FILE};
use crate::candidate_scoring::DEFAULT_TARGET_LENGTH_RATIO;
use crate::compression_engine::{EngineError, DEFAULT_MAX_ROUNDS};
use crate::llm_gateway::{
    Gateway, GatewayError, HashEmbedder, HttpChat, HttpConfig, HttpEmbeddings, MockChat, MockScript,
    OfflineBackend, DEFAULT_API_KEY_ENV, DEFAULT_MAX_IN_FLIGHT, DEFAULT_SAMPLE_COUNT, DEFAULT_TEMPERATURE,
};
use crate::pipeline::{self, PipelineConfig, PipelineOutput};
use crate::renderers::{render, render_compare_html, AnsiColors, Format, RenderPlan, Theme};
use crate::saliency_map::{Method, DEFAULT_FLOOR};
use crate::text_model::{segment, Document};

#[derive(Parser, Debug)]
#[command(name = "gptsm", version, about = "Grammar-preserving text saliency rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a document with one method.
    Render(RenderArgs),
    /// Render GP-TSM and NGP-TSM side by side in one HTML page.
    Compare(RunArgs),
    /// Inspect the response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand, Debug)]
enum CacheAction {
    /// Print the number of entries and the store size.
    Stats(CacheArgs),
    /// Re-digest every entry and report corrupt lines.
    Verify(CacheArgs),
}

#[derive(Args, Debug)]
struct CacheArgs {
    #[arg(long, default_value = DEFAULT_CACHE_DIR)]
    cache: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Gp,
    Ngp,
    Wf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Html,
    Ansi,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ThemeArg {
    Light,
    Dark,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Gp)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Html)]
    format: FormatArg,
    /// Faded-word fraction for the wf method (default 0.5).
    #[arg(long)]
    wf_target: Option<f64>,
    /// For the wf method: run GP first and match its faded fraction.
    #[arg(long)]
    wf_match_gp: bool,
    /// Use the 256-color palette instead of 24-bit color for ANSI output.
    #[arg(long)]
    ansi_256: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Input file, or `-` for stdin.
    #[arg(default_value = "-")]
    input: String,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT, value_parser = parse_positive)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS, value_parser = clap::value_parser!(u32).range(1..))]
    max_rounds: u32,
    /// Minimum opacity, in (0, 1).
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    /// Target length of each round relative to the previous one, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_TARGET_LENGTH_RATIO)]
    target_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, default_value = "gpt-4")]
    chat_model: String,
    #[arg(long, default_value = "all-MiniLM-L6-v2")]
    embed_model: String,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    /// Base URL of the embeddings endpoint (defaults to --base-url).
    #[arg(long)]
    embed_base_url: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    /// Scripted mock backend (JSON script file) instead of the network.
    #[arg(long, conflicts_with = "echo")]
    mock: Option<PathBuf>,
    /// Mock backend that returns every paragraph unchanged.
    #[arg(long)]
    echo: bool,
    #[arg(long, default_value = DEFAULT_CACHE_DIR)]
    cache: PathBuf,
    #[arg(long)]
    no_cache: bool,
    /// Never touch the network; every response must come from the cache.
    #[arg(long)]
    offline: bool,
    /// Maximum concurrent requests and paragraphs.
    #[arg(long, default_value_t = DEFAULT_MAX_IN_FLIGHT)]
    concurrency: usize,
    #[arg(long, value_enum, default_value_t = ThemeArg::Light)]
    theme: ThemeArg,
    /// CSS font-family for HTML output.
    #[arg(long)]
    font: Option<String>,
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::new(1, format!("{context}: {e}"))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_with_io(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Render(args) => cmd_render(&args, stdin, stdout, stderr),
        Command::Compare(args) => cmd_compare(&args, stdin, stdout, stderr),
        Command::Cache { action } => cmd_cache(&action, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

pub fn main() -> ! {
    let code = run_with_io(
        std::env::args_os(),
        &mut std::io::stdin().lock(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code)
}

fn read_input(input: &str, stdin: &mut dyn Read) -> Result<String, CliError> {
    let mut buf = Vec::new();
    if input == "-" {
        stdin.read_to_end(&mut buf).map_err(|e| CliError::io("reading stdin", e))?;
    } else {
        buf = std::fs::read(input).map_err(|e| CliError::io(format!("reading {input}"), e))?;
    }
    String::from_utf8(buf).map_err(|_| CliError::new(1, format!("{input} is not valid UTF-8")))
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(format!("writing {}", p.display()), e)),
        None => stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::io("writing stdout", e)),
    }
}

fn validate(args: &RunArgs) -> Result<(), CliError> {
    if !(args.floor > 0.0 && args.floor < 1.0) {
        return Err(CliError::new(2, format!("--floor must lie in (0, 1), got {}", args.floor)));
    }
    if !(args.target_ratio > 0.0 && args.target_ratio <= 1.0) {
        return Err(CliError::new(
            2,
            format!("--target-ratio must lie in (0, 1], got {}", args.target_ratio),
        ));
    }
    if args.temperature.is_nan() || args.temperature < 0.0 {
        return Err(CliError::new(2, "--temperature must be non-negative"));
    }
    if args.offline && args.no_cache && args.mock.is_none() && !args.echo {
        return Err(CliError::new(2, "--offline needs the cache or a mock backend"));
    }
    Ok(())
}

fn build_gateway(args: &RunArgs) -> Result<Gateway, CliError> {
    let embed_base = args.embed_base_url.clone().unwrap_or_else(|| args.base_url.clone());
    let mut gw = if let Some(path) = &args.mock {
        let script = MockScript::load(path).map_err(|e| CliError::new(1, e.to_string()))?;
        Gateway::new(Arc::new(MockChat::Scripted(script)), Arc::new(HashEmbedder::default()))
    } else if args.echo {
        Gateway::echo()
    } else if args.offline {
        let populated = args.cache.join(ENTRIES_FILE).metadata().map(|m| m.len() > 0).unwrap_or(false);
        if !populated {
            return Err(CliError::new(
                1,
                format!(
                    "offline run needs a warmed cache, but {} has no entries",
                    args.cache.display()
                ),
            ));
        }
        let chat = OfflineBackend {
            id: args.chat_model.clone(),
            cache: args.cache.clone(),
        };
        let embed = OfflineBackend {
            id: args.embed_model.clone(),
            cache: args.cache.clone(),
        };
        Gateway::new(Arc::new(chat), Arc::new(embed))
    } else {
        let to_err = |e: GatewayError| CliError::new(1, e.to_string());
        let chat = HttpChat::new(
            HttpConfig::new(&args.base_url).with_key_from_env(&args.api_key_env),
            &args.chat_model,
        )
        .map_err(to_err)?;
        let embed = HttpEmbeddings::new(
            HttpConfig::new(embed_base).with_key_from_env(&args.api_key_env),
            &args.embed_model,
        )
        .map_err(to_err)?;
        Gateway::new(Arc::new(chat), Arc::new(embed))
    };
    if !args.no_cache {
        let store = CacheStore::open(&args.cache).map_err(|e| CliError::new(1, e.to_string()))?;
        gw = gw.with_cache(Arc::new(store));
    }
    Ok(gw.with_max_in_flight(args.concurrency))
}

fn pipeline_config(args: &RunArgs, method: Method) -> PipelineConfig {
    let mut cfg = PipelineConfig::for_method(method);
    cfg.engine.sample_count = args.samples;
    cfg.engine.max_rounds = args.max_rounds;
    cfg.engine.temperature = args.temperature;
    cfg.engine.scoring.target_length_ratio = args.target_ratio;
    cfg.opacity.floor = args.floor;
    cfg.workers = args.concurrency.max(1);
    cfg
}

fn theme(args: &RunArgs) -> Theme {
    let mut t = match args.theme {
        ThemeArg::Light => Theme::default(),
        ThemeArg::Dark => Theme::dark(),
    };
    t.font_family = args.font.clone();
    t
}

fn run_method(
    gw: Option<&Gateway>,
    doc: &Document,
    cfg: &PipelineConfig,
    stderr: &mut dyn Write,
) -> Result<PipelineOutput, CliError> {
    let echo;
    let gw = match gw {
        Some(g) => g,
        None => {
            echo = Gateway::echo();
            &echo
        }
    };
    let out = pipeline::run(gw, doc, cfg).map_err(|e| CliError::new(1, format!("internal error: {e}")))?;
    let mut offline_miss = None;
    for f in &out.failures {
        if let EngineError::Gateway(GatewayError::OfflineMiss { cache }) = &f.error {
            offline_miss.get_or_insert_with(|| cache.clone());
        }
        let _ = writeln!(
            stderr,
            "warning: paragraph {} rendered without fading: {}",
            f.paragraph_index + 1,
            f.error
        );
    }
    if let Some(cache) = offline_miss {
        return Err(CliError::new(
            1,
            format!("offline run missed the cache at {}", cache.display()),
        ));
    }
    Ok(out)
}

fn cmd_render(
    args: &RenderArgs,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let run = &args.run;
    validate(run)?;
    if let Some(t) = args.wf_target {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::new(2, format!("--wf-target must lie in (0, 1), got {t}")));
        }
    }
    let source = read_input(&run.input, stdin)?;
    let doc = segment(&source);
    let method = match args.method {
        MethodArg::Gp => Method::GpTsm,
        MethodArg::Ngp => Method::NgpTsm,
        MethodArg::Wf => Method::WfTsm,
    };
    let needs_llm = method != Method::WfTsm || args.wf_match_gp;
    let gw = if needs_llm && doc.non_empty_paragraphs().next().is_some() {
        Some(build_gateway(run)?)
    } else {
        None
    };

    let mut cfg = pipeline_config(run, method);
    if method == Method::WfTsm {
        cfg.opacity.wf_faded_fraction_target = args.wf_target;
        if args.wf_match_gp && gw.is_some() {
            let gp = run_method(gw.as_ref(), &doc, &pipeline_config(run, Method::GpTsm), stderr)?;
            cfg.opacity.wf_faded_fraction_target = Some(gp.faded_fraction);
        }
    }
    let out = run_method(gw.as_ref(), &doc, &cfg, stderr)?;

    let format = match args.format {
        FormatArg::Html => Format::Html,
        FormatArg::Ansi => Format::Ansi,
        FormatArg::Json => Format::Json,
    };
    let plan = RenderPlan::new(&doc, &out.map)
        .with_theme(theme(run))
        .with_ansi(if args.ansi_256 {
            AnsiColors::Xterm256
        } else {
            AnsiColors::TrueColor
        });
    write_output(run.output.as_deref(), &render(&plan, format), stdout)
}

fn cmd_compare(
    args: &RunArgs,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    validate(args)?;
    let source = read_input(&args.input, stdin)?;
    let doc = segment(&source);
    let gw = if doc.non_empty_paragraphs().next().is_some() {
        Some(build_gateway(args)?)
    } else {
        None
    };
    let gp = run_method(gw.as_ref(), &doc, &pipeline_config(args, Method::GpTsm), stderr)?;
    let ngp = run_method(gw.as_ref(), &doc, &pipeline_config(args, Method::NgpTsm), stderr)?;
    let left = RenderPlan::new(&doc, &gp.map).with_theme(theme(args));
    let right = RenderPlan::new(&doc, &ngp.map).with_theme(theme(args));
    let html = render_compare_html(("GP-TSM", &left), ("NGP-TSM", &right));
    write_output(args.output.as_deref(), &html, stdout)
}

fn cmd_cache(action: &CacheAction, stdout: &mut dyn Write) -> Result<(), CliError> {
    let out_err = |e| CliError::io("writing stdout", e);
    match action {
        CacheAction::Stats(a) => {
            let (entries, bytes) = if a.cache.join(ENTRIES_FILE).exists() {
                let store = CacheStore::open(&a.cache).map_err(|e| CliError::new(1, e.to_string()))?;
                let s = store.stats();
                (s.entries, s.bytes)
            } else {
                (0, 0)
            };
            writeln!(stdout, "{entries} entries, {bytes} bytes in {}", a.cache.display()).map_err(out_err)
        }
        CacheAction::Verify(a) => {
            let report = cache_store::verify(&a.cache).map_err(|e| CliError::new(1, e.to_string()))?;
            if report.is_ok() {
                writeln!(stdout, "ok: {} entries verified in {}", report.entries, a.cache.display())
                    .map_err(out_err)
            } else {
                let file = a.cache.join(ENTRIES_FILE);
                let lines: Vec<String> = report
                    .bad_lines
                    .iter()
                    .map(|(n, why)| format!("{}:{n}: {why}", file.display()))
                    .collect();
                Err(CliError::new(
                    1,
                    format!("{} corrupt line(s)\n{}", lines.len(), lines.join("\n")),
                ))
            }
        }
    }
}
