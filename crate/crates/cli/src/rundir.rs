use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError};

/// Output directory of one command invocation.
///
/// Named `<command>-<timestamp>-<confighash>`; holds `config.echo`,
/// `log.txt` and every artifact the command writes.
pub struct RunDir {
    path: PathBuf,
    log: BufWriter<File>,
}

/// First 12 hex digits of the SHA-256 of the resolved configuration.
pub fn config_hash(echo: &str) -> String {
    let digest = Sha256::digest(echo.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

impl RunDir {
    pub fn create(parent: &Path, command: &str, echo: &str) -> Result<Self, CliError> {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let base = format!("{command}-{stamp}-{}", config_hash(echo));
        let mut path = parent.join(&base);
        let mut k = 1;
        loop {
            match fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    k += 1;
                    path = parent.join(format!("{base}-{k}"));
                }
                Err(e) => return Err(io_err(&path)(e)),
            }
        }
        let echo_path = path.join("config.echo");
        fs::write(&echo_path, echo).map_err(io_err(&echo_path))?;
        let log_path = path.join("log.txt");
        let log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
        Ok(Self { path, log })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Append a line to `log.txt` and echo it to stderr.
    pub fn log(&mut self, line: impl AsRef<str>) {
        let line = line.as_ref();
        eprintln!("{line}");
        let _ = writeln!(self.log, "{line}");
        let _ = self.log.flush();
    }

    /// Create `name` inside the run directory and fill it with `body`.
    pub fn write<F>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.file(name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(&path))?;
        Ok(path)
    }
}
