use std::path::Path;

use super::counts::LabelCounts;
use crate::bounds::{bounds_curve_csv, sweep_csv, BoundRow, SweepRow};
use crate::error::{Error, Result};
use crate::region::RegionBoundary;

/// Data behind one figure.
#[derive(Clone, Copy, Debug)]
pub enum PlotJob<'a> {
    /// `epsilon,delta`
    Region(&'a RegionBoundary),
    /// `m,dtv,area,lower,upper`
    PackSweep(&'a [SweepRow]),
    /// `tau,m,lower,upper`
    BoundsCurve(&'a [BoundRow]),
    /// `label,count,probability`
    Frequency(&'a LabelCounts),
}

impl PlotJob<'_> {
    pub fn render(&self) -> String {
        match self {
            PlotJob::Region(b) => b.to_csv(),
            PlotJob::PackSweep(rows) => sweep_csv(rows),
            PlotJob::BoundsCurve(rows) => bounds_curve_csv(rows),
            PlotJob::Frequency(c) => c.frequency_csv(),
        }
    }
}

/// Writes `contents` to `path`, reporting failures with the path.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_plot_data(job: PlotJob<'_>, path: &Path) -> Result<()> {
    write_output(path, &job.render())
}
