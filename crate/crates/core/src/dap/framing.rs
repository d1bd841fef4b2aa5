//! `Content-Length` message framing used by debug adapters.

use tokio::io::{AsyncRead, AsyncReadExt};
use tokio::sync::mpsc;

use super::protocol::ProtocolMessage;

const MAX_HEADER_BYTES: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FramingError {
    #[error("header block has no Content-Length")]
    MissingContentLength,
    #[error("invalid Content-Length `{0}`")]
    InvalidContentLength(String),
    #[error("malformed header line `{0}`")]
    MalformedHeader(String),
    #[error("header block exceeds {MAX_HEADER_BYTES} bytes")]
    HeaderTooLong,
    #[error("stream ended inside a message")]
    Truncated,
    #[error("message body is not a protocol message: {0}")]
    InvalidBody(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub fn encode_frame(body: &[u8]) -> Vec<u8> {
    let mut out = format!("Content-Length: {}\r\n\r\n", body.len()).into_bytes();
    out.extend_from_slice(body);
    out
}

/// Incremental decoder: feed arbitrary byte chunks, pull complete bodies.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn has_partial(&self) -> bool {
        !self.buf.is_empty()
    }

    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        let Some(header_end) = self.buf.windows(4).position(|w| w == b"\r\n\r\n") else {
            if self.buf.len() > MAX_HEADER_BYTES {
                return Err(FramingError::HeaderTooLong);
            }
            return Ok(None);
        };
        if header_end > MAX_HEADER_BYTES {
            return Err(FramingError::HeaderTooLong);
        }
        let header = String::from_utf8_lossy(&self.buf[..header_end]).into_owned();
        let mut length = None;
        for line in header.split("\r\n") {
            let Some((name, value)) = line.split_once(':') else {
                return Err(FramingError::MalformedHeader(line.to_string()));
            };
            if name.trim().eq_ignore_ascii_case("content-length") {
                let value = value.trim();
                length = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| FramingError::InvalidContentLength(value.to_string()))?,
                );
            }
        }
        let length = length.ok_or(FramingError::MissingContentLength)?;
        let body_start = header_end + 4;
        if self.buf.len() < body_start + length {
            return Ok(None);
        }
        let body = self.buf[body_start..body_start + length].to_vec();
        self.buf.drain(..body_start + length);
        Ok(Some(body))
    }
}

pub fn parse_message(body: &[u8]) -> Result<ProtocolMessage, FramingError> {
    serde_json::from_slice(body).map_err(|e| FramingError::InvalidBody(e.to_string()))
}

/// Reads frames until EOF or the first error, forwarding decoded messages.
/// The channel closing without an error means the peer closed cleanly.
pub(crate) async fn pump_frames<R>(
    mut reader: R,
    tx: mpsc::UnboundedSender<Result<ProtocolMessage, FramingError>>,
) where
    R: AsyncRead + Unpin,
{
    let mut decoder = FrameDecoder::new();
    let mut chunk = vec![0u8; 8192];
    loop {
        let n = match reader.read(&mut chunk).await {
            Ok(n) => n,
            Err(e) => {
                let _ = tx.send(Err(FramingError::Io(e.to_string())));
                return;
            }
        };
        if n == 0 {
            if decoder.has_partial() {
                let _ = tx.send(Err(FramingError::Truncated));
            }
            return;
        }
        decoder.push(&chunk[..n]);
        loop {
            match decoder.next_frame() {
                Ok(Some(body)) => {
                    let msg = parse_message(&body);
                    let failed = msg.is_err();
                    if tx.send(msg).is_err() || failed {
                        return;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            }
        }
    }
}
