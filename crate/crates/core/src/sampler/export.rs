use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fmt::sig17;

use super::PathSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExportLayout {
    /// `path_<k>.csv` per path.
    #[default]
    PerPath,
    /// One `paths.csv` with a leading `path_id` column.
    SingleFile,
}

fn header(dim: usize, with_id: bool) -> String {
    let mut h = String::from(if with_id { "path_id,t" } else { "t" });
    for c in 1..=dim {
        h.push_str(&format!(",b{c}"));
    }
    h
}

fn write_rows<W: Write>(w: &mut W, sample: &PathSample, id: Option<usize>) -> Result<()> {
    for (j, t) in sample.grid.points().iter().enumerate() {
        if let Some(id) = id {
            write!(w, "{id},")?;
        }
        write!(w, "{}", sig17(*t))?;
        for v in &sample.values {
            write!(w, ",{}", sig17(v[j]))?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// CSV with header `t,b1,...,bd` and one row per grid point.
pub fn write_path_csv<W: Write>(sample: &PathSample, mut w: W) -> Result<()> {
    writeln!(w, "{}", header(sample.dim, false))?;
    write_rows(&mut w, sample, None)
}

/// Writes the ensemble into `dir` and returns the files created.
pub fn export_ensemble(
    samples: &[PathSample],
    dir: &Path,
    layout: ExportLayout,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let dim = samples.first().map_or(1, |s| s.dim);
    match layout {
        ExportLayout::PerPath => samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let path = dir.join(format!("path_{k}.csv"));
                let mut w = BufWriter::new(File::create(&path)?);
                write_path_csv(s, &mut w)?;
                w.flush()?;
                Ok(path)
            })
            .collect(),
        ExportLayout::SingleFile => {
            let path = dir.join("paths.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "{}", header(dim, true))?;
            for (k, s) in samples.iter().enumerate() {
                write_rows(&mut w, s, Some(k))?;
            }
            w.flush()?;
            Ok(vec![path])
        }
    }
}
