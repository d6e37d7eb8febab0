use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use crate::error::{Error, Result};

pub const TOOL: &str = concat!("attrprof ", env!("CARGO_PKG_VERSION"));

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Sidecar log next to an output file.
pub fn log_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

/// Content hash identifying one stage run: tool version, stage name, input
/// digests and the config sections the stage reads.
pub struct StageKey {
    hasher: Sha256,
    inputs: Vec<(String, PathBuf, String)>,
}

impl StageKey {
    pub fn new(stage: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(TOOL.as_bytes());
        hasher.update(b"\0");
        hasher.update(stage.as_bytes());
        StageKey {
            hasher,
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.hasher.update(b"\0input\0");
        self.hasher.update(role.as_bytes());
        self.hasher.update(digest.as_bytes());
        self.inputs.push((role.to_string(), path.to_path_buf(), digest));
        Ok(())
    }

    pub fn section<T: serde::Serialize>(&mut self, name: &str, value: &T) {
        let text = toml::to_string(value).expect("config section serializes");
        self.hasher.update(b"\0section\0");
        self.hasher.update(name.as_bytes());
        self.hasher.update(text.as_bytes());
    }

    pub fn finish(self) -> (String, Vec<(String, PathBuf, String)>) {
        (hex(&self.hasher.finalize()), self.inputs)
    }
}

/// Provenance record: comment lines with the run facts, then the resolved
/// config, so the log itself is a valid config for re-running the stage.
pub struct Provenance {
    command: &'static str,
    key: String,
    inputs: Vec<(String, PathBuf, String)>,
    notes: Vec<String>,
}

impl Provenance {
    pub fn new(command: &'static str, key: StageKey) -> Self {
        let (key, inputs) = key.finish();
        Provenance {
            command,
            key,
            inputs,
            notes: Vec::new(),
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn render(&self, output: &Path, output_digest: &str, config: &PipelineConfig) -> String {
        let mut s = String::new();
        writeln!(s, "# tool: {TOOL}").unwrap();
        writeln!(s, "# command: {}", self.command).unwrap();
        writeln!(s, "# key: {}", self.key).unwrap();
        writeln!(s, "# output: {} sha256={output_digest}", output.display()).unwrap();
        for (role, path, digest) in &self.inputs {
            writeln!(s, "# input {role}: {} sha256={digest}", path.display()).unwrap();
        }
        for note in &self.notes {
            writeln!(s, "# {note}").unwrap();
        }
        s.push('\n');
        s.push_str(&config.to_toml());
        s
    }

    pub fn write(&self, output: &Path, config: &PipelineConfig, outputs: &mut Outputs) -> Result<()> {
        let log = log_path(output);
        outputs.add(&log);
        let text = self.render(output, &file_digest(output)?, config);
        std::fs::write(&log, text).map_err(|e| Error::io(&log, e))
    }

    /// True when `output` and its log exist, the log carries this key, and
    /// the output still has the digest recorded there.
    pub fn cached(&self, output: &Path) -> bool {
        let Ok(text) = std::fs::read_to_string(log_path(output)) else {
            return false;
        };
        let field = |prefix: &str| {
            text.lines()
                .find_map(|l| l.strip_prefix(prefix))
                .map(str::to_string)
        };
        let recorded = field("# output: ").and_then(|o| o.rsplit_once(" sha256=").map(|(_, d)| d.to_string()));
        field("# key: ").as_deref() == Some(self.key.as_str())
            && recorded.is_some_and(|d| file_digest(output).is_ok_and(|actual| actual == d))
    }
}

/// Files written by a command; removed again unless the command commits.
#[derive(Default)]
pub struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn add(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.paths {
            if p.exists() {
                log::warn!("removing partial output {}", p.display());
                let _ = std::fs::remove_file(p);
            }
        }
    }
}
