//! Connected components, distance transforms and morphometric measurements.

pub mod components;
pub mod edt;
pub mod metrics;

pub use components::{connected_components, Connectivity, ComponentApply, ComponentInfo, ComponentOp, ComponentTable, KeyMode, UnionFind};
pub use edt::{edt, edt_squared, Edt};
pub use metrics::{label_metrics, label_metrics_chunked, LabelMetric, LabelMetrics, MetricsTable};
