//! Budget-aware Z-chunk planning and execution.

pub mod budget;
pub mod exec;
pub mod plan;

pub use budget::{parse_bytes, profile_budget, ComputeBackend, HostBackend, MemoryBudget, DEFAULT_FRACTION};
pub use exec::{
    budget_for_interior, execute_chunked, execute_chunked_with, execute_reduce, execute_two_pass, execute_whole, run_local, run_reduce,
    run_rows, run_two_pass, single_chunk_budget, Chunk, ChunkReduce, ExecOptions, ExecutionReport, LocalOperator, RowOperator,
    TwoPassOperator,
};
pub use plan::{plan_chunks, plan_for_slices, ChunkPlan, ChunkSpec, OpProfile};
