//! Text formats, benchmark harness and CLI support on top of `mpgemm-core`.

pub mod bench;
pub mod error;
pub mod hexfloat;
pub mod mpmat;
#[cfg(feature = "openblas")]
pub mod openblas;
pub mod record;

pub use bench::{run_gemm_bench, run_lu_bench, BackendKind, BenchConfig, Outcome};
pub use error::{BenchError, FormatError};
pub use mpgemm_core;
pub use record::{emit_csv, emit_plotdata, Algo, BenchRecord, Precision};
