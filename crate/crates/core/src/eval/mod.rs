//! Evaluation harness: label histograms, smoothed KL reports, seeded
//! synthetic sampling and plot-ready CSV output.

mod counts;
mod plot;
mod report;
mod sample;

pub use counts::{load_counts, parse_counts_csv, parse_counts_json, LabelCounts};
pub use plot::{emit_plot_data, write_output, PlotJob};
pub use report::{kl_report, KlOptions, KlReport, KlRow, NamedCounts};
pub use sample::{draw_samples, histogram, sample_synthetic, tuple_counts, SAMPLE_CHUNK};
