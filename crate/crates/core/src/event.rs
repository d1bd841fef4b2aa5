/// Debugger notification driving diagram rebuilds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DebugEvent {
    /// Execution paused (breakpoint hit or step completed). Heap state is
    /// readable until the next resume.
    Stopped {
        reason: String,
        thread_id: Option<i64>,
    },
    Continued,
    Terminated,
}

impl DebugEvent {
    pub fn is_stopped(&self) -> bool {
        matches!(self, DebugEvent::Stopped { .. })
    }
}
