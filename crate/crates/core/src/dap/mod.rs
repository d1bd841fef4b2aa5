//! Debug Adapter Protocol client: a live [`HeapSource`](crate::heap::HeapSource)
//! over a paused program.

mod framing;
mod heap_view;
pub mod mock;
mod protocol;
mod session;
mod transport;

pub use framing::{encode_frame, parse_message, FrameDecoder, FramingError};
pub use heap_view::{BoundHeapView, HeapView};
pub use protocol::{Event, ProtocolMessage, Request, Response, Variable};
pub use session::{
    DapError, DapSession, LaunchConfig, RequestKind, ResumeKind, RunState, SourceBreakpoints,
    DEFAULT_TIMEOUT,
};
pub use transport::Transport;
