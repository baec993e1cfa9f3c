use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rhodyn::{DensityMatrix, DiagnosticsRecord};

use crate::CliError;

/// Matrices larger than this are dumped as raw little-endian `f64` instead of CSV.
pub const CSV_MATRIX_LIMIT: usize = 256;

pub const SERIES_HEADER: [&str; 9] = [
    "t",
    "trace_pre_norm",
    "purity",
    "hermiticity_residual",
    "min_eig",
    "mean_x",
    "mean_p",
    "var_x",
    "continuity_residual_max",
];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a header row followed by `rows`.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let err = |e: csv::Error| CliError::Csv {
            path: path.clone(),
            source: e,
        };
        let mut w = csv::Writer::from_path(&path).map_err(err)?;
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn series(&mut self, records: &[DiagnosticsRecord]) -> Result<(), CliError> {
        self.csv(
            "series.csv",
            &SERIES_HEADER,
            records.iter().map(|r| {
                [
                    fmt_f64(r.t),
                    fmt_f64(r.trace_pre_norm),
                    fmt_f64(r.purity),
                    fmt_f64(r.hermiticity_residual),
                    fmt_opt(r.min_eig),
                    fmt_f64(r.mean_x),
                    fmt_f64(r.mean_p),
                    fmt_f64(r.var_x),
                    fmt_opt(r.continuity_residual_max),
                ]
            }),
        )
    }

    /// `rho_diag_<step>.csv` with the trace-normalized diagonal.
    pub fn diagonal(&mut self, step: usize, rho: &DensityMatrix) -> Result<(), CliError> {
        let grid = rho.grid();
        let tr = rho.trace();
        let d = rho.diagonal();
        self.csv(
            &format!("rho_diag_{step}.csv"),
            &["x", "rho_diag"],
            d.iter()
                .enumerate()
                .map(|(i, p)| [fmt_f64(grid.x(i)), fmt_f64(p / tr)]),
        )
    }

    /// `rho_abs_<step>.csv` for small grids, otherwise `rho_<step>.f64`
    /// holding `n·n` interleaved (re, im) pairs in row-major order.
    pub fn matrix(&mut self, step: usize, rho: &DensityMatrix) -> Result<(), CliError> {
        let m = rho.matrix();
        let n = m.nrows();
        if n <= CSV_MATRIX_LIMIT {
            let header: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            return self.csv(
                &format!("rho_abs_{step}.csv"),
                &header,
                m.rows()
                    .into_iter()
                    .map(|row| row.iter().map(|z| fmt_f64(z.norm())).collect::<Vec<_>>()),
            );
        }
        let path = self.path(&format!("rho_{step}.f64"));
        let mut bytes = Vec::with_capacity(n * n * 16);
        for z in m.iter() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(contents.as_bytes()).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}
