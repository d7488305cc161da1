//! Line-oriented CSV metrics, one row per optimizer step.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const GENERATOR_HEADER: &str =
    "step,resolution,phase,level_mean,l_rec,l_perc,l_g_adv,l_d,total_g";
pub const RENDERER_HEADER: &str = "step,resolution,l1,l_g_adv,l_d,total";

/// One generator/discriminator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub resolution: usize,
    pub phase: u8,
    pub level_mean: f64,
    pub l_rec: f64,
    pub l_perc: f64,
    pub l_g_adv: f64,
    pub l_d: f64,
    pub total_g: f64,
}

impl StepMetrics {
    pub fn to_csv(&self) -> String {
        // `{:?}` prints the shortest string that round-trips the f64 exactly.
        format!(
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.step,
            self.resolution,
            self.phase,
            self.level_mean,
            self.l_rec,
            self.l_perc,
            self.l_g_adv,
            self.l_d,
            self.total_g
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::Config(format!("bad metrics row: {line:?}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad number {s:?} in metrics")))
        };
        let int = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad integer {s:?} in metrics")))
        };
        Ok(Self {
            step: int(f[0])?,
            resolution: int(f[1])? as usize,
            phase: int(f[2])? as u8,
            level_mean: num(f[3])?,
            l_rec: num(f[4])?,
            l_perc: num(f[5])?,
            l_g_adv: num(f[6])?,
            l_d: num(f[7])?,
            total_g: num(f[8])?,
        })
    }
}

/// One renderer pre-training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RendererMetrics {
    pub step: u64,
    pub resolution: usize,
    pub l1: f64,
    pub l_g_adv: f64,
    pub l_d: f64,
    pub total: f64,
}

impl RendererMetrics {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:?},{:?}",
            self.step, self.resolution, self.l1, self.l_g_adv, self.l_d, self.total
        )
    }
}

/// Appends rows to a CSV file, writing the header when the file is new.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>, header: &str) -> Result<Self> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    /// Opens an existing file for appending after dropping every row whose
    /// step exceeds `keep_through`. Creates the file if it is missing.
    pub fn resume(path: impl AsRef<Path>, header: &str, keep_through: u64) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Self::create(path, header);
        }
        let kept: Vec<String> = BufReader::new(File::open(path)?)
            .lines()
            .skip(1)
            .filter_map(|l| l.ok())
            .filter(|l| {
                l.split(',')
                    .next()
                    .and_then(|s| s.parse::<u64>().ok())
                    .is_some_and(|s| s <= keep_through)
            })
            .collect();
        let mut w = Self::create(path, header)?;
        for line in kept {
            writeln!(w.out, "{line}")?;
        }
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Reads every generator row of a metrics file.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<StepMetrics>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(StepMetrics::from_csv)
        .collect()
}
