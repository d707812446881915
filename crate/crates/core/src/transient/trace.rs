use serde::Serialize;

use super::integrator::{Recorder, Snapshot};
use super::network::DriveSpec;

/// Equidistant time series of selected nodes.
///
/// `current[j]` is the total series current leaving node `nodes[j]` through its
/// SQUID branch, or the load current for the last node.
#[derive(Debug, Clone, Serialize)]
pub struct TransientTrace {
    pub dt: f64,
    pub t_start: f64,
    pub n_cells: usize,
    pub nodes: Vec<usize>,
    pub voltage: Vec<Vec<f64>>,
    pub current: Vec<Vec<f64>>,
    /// Current entering node 0 from the source side.
    pub port_current: Vec<f64>,
    pub drive: DriveSpec,
}

impl TransientTrace {
    pub fn n_samples(&self) -> usize {
        self.port_current.len()
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.n_samples() as f64 * self.dt
    }

    /// Series index of node `n`, if it was recorded.
    pub fn slot(&self, node: usize) -> Option<usize> {
        self.nodes.iter().position(|&x| x == node)
    }
}

/// Stores full time series for a set of nodes (all nodes when `nodes` is `None`).
pub struct TraceRecorder {
    trace: TransientTrace,
    requested: Option<Vec<usize>>,
}

impl TraceRecorder {
    pub fn new(drive: DriveSpec, nodes: Option<Vec<usize>>) -> Self {
        Self {
            trace: TransientTrace {
                dt: 0.0,
                t_start: 0.0,
                n_cells: 0,
                nodes: Vec::new(),
                voltage: Vec::new(),
                current: Vec::new(),
                port_current: Vec::new(),
                drive,
            },
            requested: nodes,
        }
    }

    pub fn into_trace(self) -> TransientTrace {
        self.trace
    }
}

impl Recorder for TraceRecorder {
    fn start(&mut self, n_nodes: usize, n_samples: usize, dt: f64, t_start: f64) {
        let nodes = self
            .requested
            .clone()
            .unwrap_or_else(|| (0..n_nodes).collect());
        let tr = &mut self.trace;
        tr.dt = dt;
        tr.t_start = t_start;
        tr.n_cells = n_nodes - 1;
        tr.voltage = vec![vec![0.0; n_samples]; nodes.len()];
        tr.current = vec![vec![0.0; n_samples]; nodes.len()];
        tr.port_current = vec![0.0; n_samples];
        tr.nodes = nodes;
    }

    fn record(&mut self, sample: usize, snap: &Snapshot<'_>) {
        let tr = &mut self.trace;
        let last = snap.voltage.len() - 1;
        for (j, &node) in tr.nodes.iter().enumerate() {
            tr.voltage[j][sample] = snap.voltage[node];
            tr.current[j][sample] = if node == last {
                snap.load_current
            } else {
                snap.branch_current[node]
            };
        }
        tr.port_current[sample] = snap.port_current;
    }
}
