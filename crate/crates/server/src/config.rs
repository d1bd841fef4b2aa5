use std::fmt;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::str::FromStr;

use odbg_core::dap::LaunchConfig;

pub const DEFAULT_PORT: u16 = 8071;

/// Where stops come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// One heap snapshot, shown as a single stop.
    Snapshot(PathBuf),
    /// Recorded session replayed one entry per `step`.
    Trace(PathBuf),
    /// Debug adapter listening on `host:port`.
    DapTcp(String),
    /// Debug adapter started as a child process speaking on stdio.
    DapExec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("source must be one of snapshot:<path>, trace:<path>, dap-tcp:<host:port>, dap-exec:<command>; got `{0}`")]
pub struct SourceSpecError(String);

impl FromStr for SourceSpec {
    type Err = SourceSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| SourceSpecError(s.to_string()))?;
        if rest.is_empty() {
            return Err(SourceSpecError(s.to_string()));
        }
        match kind {
            "snapshot" => Ok(SourceSpec::Snapshot(rest.into())),
            "trace" => Ok(SourceSpec::Trace(rest.into())),
            "dap-tcp" => Ok(SourceSpec::DapTcp(rest.to_string())),
            "dap-exec" => Ok(SourceSpec::DapExec(rest.to_string())),
            _ => Err(SourceSpecError(s.to_string())),
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Snapshot(p) => write!(f, "snapshot:{}", p.display()),
            SourceSpec::Trace(p) => write!(f, "trace:{}", p.display()),
            SourceSpec::DapTcp(a) => write!(f, "dap-tcp:{a}"),
            SourceSpec::DapExec(c) => write!(f, "dap-exec:{c}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub source: SourceSpec,
    /// Visualization depth applied on every stop.
    pub depth: usize,
    /// Used only for adapter sources.
    pub launch: LaunchConfig,
    /// Static files served under `/`.
    pub ui_dir: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(source: SourceSpec) -> Self {
        Self {
            addr: SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), DEFAULT_PORT),
            source,
            depth: 1,
            launch: LaunchConfig::default(),
            ui_dir: None,
        }
    }
}
