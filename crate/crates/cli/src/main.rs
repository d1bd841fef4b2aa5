use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use odbg_core::dap::mock::{MockAdapter, MockScript};
use odbg_core::dap::LaunchConfig;
use odbg_core::snapshot::{load_snapshot, SnapshotHeap};
use odbg_core::{build_diagram, layout, to_svg, to_xml};
use odbg_server::{serve, ServerConfig, SourceSpec, DEFAULT_PORT};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "odbg", version, about = "Visual debugger: object diagrams of a paused program")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve a debug session to WebSocket clients at /debug.
    Serve {
        /// snapshot:<path>, trace:<path>, dap-tcp:<host>:<port> or dap-exec:<command line>
        #[arg(long)]
        source: SourceSpec,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Link hops followed from the stack frame's locals on every stop.
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// JSON launch configuration for debug adapter sources.
        #[arg(long)]
        launch_config: Option<PathBuf>,
        /// Directory of static files served under /.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Write the object diagram of a heap snapshot as XML or SVG.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, value_enum)]
        format: Format,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stack frame id; the top frame when omitted.
        #[arg(long)]
        frame: Option<String>,
    },
    /// Run a scripted debug adapter on standard input and output.
    #[command(hide = true)]
    MockAdapter {
        #[arg(long)]
        script: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Xml,
    Svg,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

async fn export(input: &Path, depth: usize, format: Format, frame: Option<&str>) -> Result<String> {
    let snapshot = load_snapshot(&read(input)?).with_context(|| format!("loading {}", input.display()))?;
    let frame = match frame {
        Some(id) => id.to_string(),
        None => snapshot
            .top_frame()
            .map(|f| f.id.clone())
            .ok_or_else(|| anyhow!("{} has no stack frames", input.display()))?,
    };
    let state = build_diagram(&mut SnapshotHeap::new(snapshot), &frame, depth).await?;
    Ok(match format {
        Format::Xml => to_xml(&state.diagram)?,
        Format::Svg => to_svg(&layout(&state.diagram, &state.frame_node_id)?)?,
    })
}

async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Export {
            input,
            depth,
            format,
            out,
            frame,
        } => {
            let text = export(&input, depth, format, frame.as_deref()).await?;
            match out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    stdout.write_all(text.as_bytes())?;
                    stdout.flush()?;
                }
            }
        }
        Command::Serve {
            source,
            port,
            host,
            depth,
            launch_config,
            ui_dir,
        } => {
            let mut config = ServerConfig::new(source);
            config.addr = SocketAddr::new(host, port);
            config.depth = depth;
            config.ui_dir = ui_dir;
            if let Some(path) = launch_config {
                config.launch = serde_json::from_str::<LaunchConfig>(&read(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?;
            }
            let server = serve(config).await?;
            eprintln!("listening on ws://{}/debug", server.local_addr());
            tokio::select! {
                result = server.wait() => result?,
                _ = tokio::signal::ctrl_c() => {}
            }
        }
        Command::MockAdapter { script } => {
            let script = MockScript::parse(&read(&script)?)?;
            let report = MockAdapter::new(script)
                .run(tokio::io::stdin(), tokio::io::stdout())
                .await;
            for violation in &report.violations {
                tracing::warn!("{violation}");
            }
            if !report.violations.is_empty() {
                return Err(anyhow!("{} script violations", report.violations.len()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
