//! One full simulation and its output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use fedsurv_core::dataset::Dataset;

use crate::config::ExperimentConfig;
use crate::experiment::{run_experiment, RunRecord};
use crate::manifest::RunManifest;
use crate::records::write_records;
use crate::report::{report, Report};
use crate::Result;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PAIRED_FILE: &str = "paired.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BOXPLOT_FILE: &str = "boxplot.svg";

#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<RunRecord>,
    pub report: Report,
    pub manifest: RunManifest,
}

pub fn simulate(config: &ExperimentConfig, data: &Dataset) -> Result<Simulation> {
    let records = run_experiment(config, data)?;
    let report = report(&records)?;
    let manifest = RunManifest::build(config, data, &records)?;
    Ok(Simulation {
        records,
        report,
        manifest,
    })
}

impl Simulation {
    /// Writes the records, summary and paired CSVs and the manifest, plus
    /// the boxplot when `svg` is set.
    pub fn write_to(&self, dir: impl AsRef<Path>, svg: bool) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_records(&self.records, BufWriter::new(File::create(dir.join(RECORDS_FILE))?))?;
        self.report
            .write_summary_csv(BufWriter::new(File::create(dir.join(SUMMARY_FILE))?))?;
        self.report
            .write_paired_csv(BufWriter::new(File::create(dir.join(PAIRED_FILE))?))?;
        fs::write(dir.join(MANIFEST_FILE), self.manifest.to_json())?;
        if svg {
            fs::write(dir.join(BOXPLOT_FILE), self.report.to_svg())?;
        }
        Ok(())
    }
}
