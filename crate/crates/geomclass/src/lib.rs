//! File formats, benchmark loaders and the `geomclass` command line on top
//! of [`geomclass_core`].

pub mod benchmark;
pub mod canonical;
pub mod cli;
pub mod dataset;
pub mod geojson;
pub mod modelfile;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod wkt;

pub use benchmark::{load_benchmark, BenchmarkAdapter};
pub use dataset::{DataError, Dataset, DatasetManifest};
pub use parallel::Parallel;
