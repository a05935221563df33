//! Perturbation histograms and the sketches drawn from them.

mod apply;
mod histogram;
mod topn;

pub use apply::{apply_sketch, sketch_sweep, Applied, SketchSweep, SweepRow};
pub use histogram::{build_histogram, Bin, PerturbationHistogram, HISTOGRAM_VERSION};
pub use topn::{top_n, top_n_pairs, Sketch, SketchEntry};
