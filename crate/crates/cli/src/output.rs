//! CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// An in-memory CSV table; rendered with LF line endings.
pub struct Table {
    pub name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(name: &'static str, header: &[S]) -> Self {
        Self { name, header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }
}

#[derive(Serialize)]
struct OutputDigest {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    subcommand: &'a str,
    parameters: &'a P,
    master_seed: u64,
    version: &'static str,
    wall_time_seconds: f64,
    outputs: Vec<OutputDigest>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(64);
    for b in Sha256::digest(bytes) {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    out
}

/// Collects the files of one invocation and writes them with a manifest, or
/// prints the tables to stdout when no output directory is given.
pub struct Sink {
    dir: Option<PathBuf>,
    started: Instant,
    files: Vec<(String, Vec<u8>)>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Self {
        Self { dir: dir.map(Path::to_path_buf), started: Instant::now(), files: Vec::new() }
    }

    pub fn table(&mut self, table: &Table) -> io::Result<()> {
        self.files.push((format!("{}.csv", table.name), table.render()?));
        Ok(())
    }

    /// Extra JSON document; only written when an output directory is set.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.files.push((name.to_string(), body));
        Ok(())
    }

    pub fn finish<P: Serialize>(self, subcommand: &str, parameters: &P, master_seed: u64) -> io::Result<()> {
        let Some(dir) = self.dir else {
            let mut stdout = io::stdout().lock();
            for (name, body) in &self.files {
                if name.ends_with(".csv") {
                    stdout.write_all(body)?;
                }
            }
            return stdout.flush();
        };
        fs::create_dir_all(&dir)?;
        let mut outputs = Vec::with_capacity(self.files.len());
        for (name, body) in &self.files {
            fs::write(dir.join(name), body)?;
            outputs.push(OutputDigest { file: name.clone(), sha256: sha256_hex(body) });
        }
        let manifest = Manifest {
            subcommand,
            parameters,
            master_seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs,
        };
        let mut body = serde_json::to_vec_pretty(&manifest)?;
        body.push(b'\n');
        fs::write(dir.join(format!("{subcommand}.manifest.json")), body)
    }
}
