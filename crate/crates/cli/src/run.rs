//! Output directory handling and the per-run manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use socketvib::container::{sha256_hex, Manifest};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or inputs detected after parsing; exit code 2.
    Usage(String),
    Core(socketvib::Error),
    /// Evaluation refused because the test data overlaps training data.
    Provenance(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Provenance(_) => "provenance",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Provenance(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::fmt::Error> for CliError {
    fn from(e: std::fmt::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<socketvib::Error> for CliError {
    fn from(e: socketvib::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(socketvib::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Settings shared by every subcommand, plus the manifest being assembled.
pub struct Run {
    pub out: PathBuf,
    pub seed: u64,
    /// Contents of `--config`, empty when absent.
    pub config: Manifest,
    manifest: Manifest,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(subcommand: &str, out: PathBuf, seed: u64, config_path: Option<&Path>) -> CliResult<Self> {
        let config = match config_path {
            Some(p) => Manifest::read_text_file(p)?,
            None => Manifest::new(),
        };
        fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
        let mut manifest = Manifest::new();
        manifest
            .set("subcommand", subcommand)
            .set("toolkit_version", env!("CARGO_PKG_VERSION"))
            .set("seed", seed)
            .set("out_dir", out.display());
        if let Some(p) = config_path {
            manifest.set("config_file", p.display());
        }
        Ok(Self {
            out,
            seed,
            config,
            manifest,
            outputs: Vec::new(),
        })
    }

    /// Records a configuration section in the manifest.
    pub fn record(&mut self, prefix: &str, m: &Manifest) {
        self.manifest.merge_prefixed(prefix, m);
    }

    pub fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.manifest.set(key, value);
    }

    pub fn input(&mut self, name: &str, path: &Path) -> CliResult<()> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        self.manifest.set(&format!("input.{name}"), path.display());
        self.manifest.set(&format!("input.{name}.sha256"), sha256_hex(&bytes));
        Ok(())
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    /// Registers a file already written into the output directory.
    pub fn output(&mut self, file: &str) {
        self.outputs.push(self.path(file));
    }

    pub fn write(&mut self, file: &str, contents: &str) -> CliResult<()> {
        let p = self.path(file);
        fs::write(&p, contents).map_err(|e| io_err(&p, e))?;
        self.output(file);
        Ok(())
    }

    /// Writes `manifest.txt`, listing every output with its checksum.
    pub fn finish(mut self) -> CliResult<()> {
        for (i, p) in self.outputs.iter().enumerate() {
            let bytes = fs::read(p).map_err(|e| io_err(p, e))?;
            let name = p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            self.manifest.set(&format!("output.{i}"), &name);
            self.manifest.set(&format!("output.{i}.sha256"), sha256_hex(&bytes));
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        self.manifest.set("created_unix", now);
        let p = self.path(MANIFEST_FILE);
        fs::write(&p, self.manifest.to_text()).map_err(|e| io_err(&p, e))
    }
}
