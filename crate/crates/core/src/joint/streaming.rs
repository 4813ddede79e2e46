use crate::ir::{DepGraph, Rrt};

/// Pipeline depth given to streaming operations unless overridden.
pub const DEFAULT_STREAM_DEPTH: u32 = 2;

/// Gives every variable-latency node without incoming edges zero latency and
/// no unit usage. Outgoing delays are kept. Returns the rewritten graph and
/// the ids of the streaming nodes.
pub fn apply_streaming_opt(g: &DepGraph) -> (DepGraph, Vec<String>) {
    let mut out = g.clone();
    let mut streaming = Vec::new();
    for (v, node) in out.nodes.iter_mut().enumerate() {
        if node.variable_latency && !g.edges.iter().any(|e| e.dst == v) {
            node.rrt = Rrt::empty(node.rrt.num_units());
            streaming.push(node.id.clone());
        }
    }
    (out, streaming)
}
