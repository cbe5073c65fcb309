//! Run manifest, audit records and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub name: String,
    pub status: Status,
    pub inequality: String,
    pub value: f64,
    pub bound: f64,
    /// `bound − value` for upper bounds, `value − bound` for lower bounds.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

impl AuditRecord {
    /// Passes when `value ≤ bound`.
    pub fn at_most(name: &str, inequality: &str, value: f64, bound: f64) -> Self {
        Self::new(name, inequality, value, bound, bound - value)
    }

    /// Passes when `value ≥ bound`.
    pub fn at_least(name: &str, inequality: &str, value: f64, bound: f64) -> Self {
        Self::new(name, inequality, value, bound, value - bound)
    }

    /// Passes when `value > bound`.
    pub fn above(name: &str, inequality: &str, value: f64, bound: f64) -> Self {
        let mut a = Self::new(name, inequality, value, bound, value - bound);
        if value <= bound {
            a.status = Status::Fail;
        }
        a
    }

    /// Boolean check recorded as `value = 1` against `bound = 1`.
    pub fn check(name: &str, inequality: &str, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::new(name, inequality, v, 1.0, v - 1.0)
    }

    /// A violation reported by the library; the margin is `−|value − bound|`.
    pub fn violated(name: &str, inequality: &str, value: f64, bound: f64) -> Self {
        let mut a = Self::new(name, inequality, value, bound, -(value - bound).abs());
        a.status = Status::Fail;
        a
    }

    fn new(name: &str, inequality: &str, value: f64, bound: f64, margin: f64) -> Self {
        Self {
            name: name.into(),
            status: if margin >= 0.0 { Status::Pass } else { Status::Fail },
            inequality: inequality.into(),
            value,
            bound,
            margin,
            location: None,
            anchor: None,
        }
    }

    pub fn at(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }

    pub fn anchored(mut self, anchor: impl Into<String>) -> Self {
        self.anchor = Some(anchor.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub schema: u32,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub audits: Vec<AuditRecord>,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8], seed: u64) -> Self {
        Self {
            command: command.into(),
            schema: crate::config::SCHEMA_VERSION,
            config_hash: sha256_hex(config_bytes),
            seed,
            stages: vec![],
            audits: vec![],
            outputs: vec![],
            exit_code: 0,
        }
    }

    pub fn stage(&mut self, name: &str) {
        self.stages.push(StageRecord {
            name: name.into(),
            outcome: "ok".into(),
            detail: None,
        });
    }

    pub fn failed_stage(&mut self, name: &str, detail: String) {
        self.stages.push(StageRecord {
            name: name.into(),
            outcome: "failed".into(),
            detail: Some(detail),
        });
    }

    /// Adds an audit; names must be unique within a run.
    pub fn audit(&mut self, record: AuditRecord) {
        debug_assert!(
            self.audits.iter().all(|a| a.name != record.name),
            "duplicate audit {}",
            record.name
        );
        self.audits.push(record);
    }

    pub fn all_passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory with write-then-rename semantics.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: vec![],
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(contents.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.into());
        }
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
