use std::fs;
use std::path::{Path, PathBuf};

use chaosbath_core::series::{fmt_f64, TimeSeries};
use serde::Serialize;
use serde_json::Value;

use crate::svg::Plot;
use crate::CliError;

/// Output files collected in memory and written together by [`Outputs::commit`],
/// so a failed run leaves nothing behind.
pub struct Outputs {
    dir: PathBuf,
    header: String,
    svg: bool,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path, config_hash: &str, svg: bool) -> Result<Self, CliError> {
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            header: format!("chaosbath {} config={config_hash}", env!("CARGO_PKG_VERSION")),
            svg,
            files: Vec::new(),
        })
    }

    pub fn series(&mut self, name: &str, series: &TimeSeries, comments: &[String]) {
        let mut all = vec![self.header.clone()];
        all.extend_from_slice(comments);
        let mut buf = Vec::new();
        series.write_csv(&mut buf, &all).expect("writing to memory");
        self.files.push((name.to_string(), buf));
    }

    /// CSV with one column per entry of `columns`; every row must match.
    pub fn table(&mut self, name: &str, comments: &[String], columns: &[&str], rows: &[Vec<f64>]) {
        let mut text = format!("# {}\n", self.header);
        for c in comments {
            text.push_str(&format!("# {c}\n"));
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// JSON object whose `header` key carries the header line.
    pub fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<(), CliError> {
        let mut value = serde_json::to_value(payload).map_err(|e| CliError::Config(e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{name}: payload is not an object")))?;
        obj.insert("header".into(), Value::String(self.header.clone()));
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    pub fn plot(&mut self, name: &str, plot: &Plot) {
        if self.svg {
            let text = plot.render(&self.header);
            self.files.push((name.to_string(), text.into_bytes()));
        }
    }

    /// Each file goes to a temporary name first and is renamed into place
    /// once every write has succeeded.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = self.dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(CliError::io(&tmp, e));
            }
            staged.push((tmp, self.dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest).map_err(|e| CliError::io(&dest, e))?;
            written.push(dest);
        }
        Ok(written)
    }
}

/// Read a JSON file written by [`Outputs::json`], dropping the header.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("header");
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
