//! Bundle manifest and re-rendering of a finished run.

use std::fmt::Write as _;
use std::path::Path;

use super::config::Scenario;
use super::{ScenarioError, TOOL_VERSION};
use crate::circuit::{link_table, LinkBudget};

pub(crate) const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    /// FNV-1a 64 of the contents.
    pub checksum: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub tool: String,
    pub scenario: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl Manifest {
    pub(crate) fn new(s: &Scenario, files: &[(String, String)]) -> Self {
        Manifest {
            tool: TOOL_VERSION.to_owned(),
            scenario: s.name.clone(),
            seed: s.seed,
            files: files
                .iter()
                .map(|(name, text)| ManifestEntry {
                    file: name.clone(),
                    bytes: text.len() as u64,
                    checksum: fnv1a64(text.as_bytes()),
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool = {}", self.tool);
        let _ = writeln!(out, "scenario = {}", self.scenario);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "# resolved defaults: scenario.toml");
        for f in &self.files {
            let _ = writeln!(out, "file\t{}\t{}\t{:016x}", f.file, f.bytes, f.checksum);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut tool = None;
        let mut scenario = None;
        let mut seed = None;
        let mut files = Vec::new();
        for line in text.lines().filter(|l| !l.is_empty() && !l.starts_with('#')) {
            if let Some(rest) = line.strip_prefix("file\t") {
                let cols: Vec<&str> = rest.split('\t').collect();
                let [file, bytes, checksum] = cols[..] else {
                    return Err(format!("bad file line {line:?}"));
                };
                files.push(ManifestEntry {
                    file: file.to_owned(),
                    bytes: bytes.parse().map_err(|_| format!("bad size in {line:?}"))?,
                    checksum: u64::from_str_radix(checksum, 16).map_err(|_| format!("bad checksum in {line:?}"))?,
                });
                continue;
            }
            let (key, value) = line.split_once(" = ").ok_or_else(|| format!("bad line {line:?}"))?;
            match key {
                "tool" => tool = Some(value.to_owned()),
                "scenario" => scenario = Some(value.to_owned()),
                "seed" => seed = Some(value.parse().map_err(|_| format!("bad seed {value:?}"))?),
                _ => return Err(format!("unknown key {key:?}")),
            }
        }
        Ok(Manifest {
            tool: tool.ok_or("missing tool")?,
            scenario: scenario.ok_or("missing scenario")?,
            seed: seed.ok_or("missing seed")?,
            files,
        })
    }
}

pub(crate) fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), ScenarioError> {
    let path = dir.join(MANIFEST);
    let tmp = dir.join(format!(".{MANIFEST}.tmp"));
    std::fs::write(&tmp, m.to_text()).map_err(|e| ScenarioError::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| ScenarioError::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, ScenarioError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| ScenarioError::io(&path, e))?;
    Manifest::parse(&text).map_err(|message| ScenarioError::Parse {
        origin: path.display().to_string(),
        path: String::new(),
        message,
    })
}

fn parse_links(text: &str) -> Result<Vec<(String, String, LinkBudget)>, String> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 14 {
            return Err(format!("expected 14 columns in {line:?}"));
        }
        let f = |i: usize| c[i].parse::<f64>().map_err(|_| format!("bad number {:?}", c[i]));
        rows.push((
            c[0].to_owned(),
            c[1].to_owned(),
            LinkBudget {
                m_h: f(3)?,
                k: f(4)?,
                eta: f(5)?,
                delivered_power_w: f(6)?,
                induced_voltage_v: f(7)?,
                modulation_depth: f(8)?,
                activation_threshold_w: f(9)?,
                detection_threshold: f(10)?,
            },
        ));
    }
    Ok(rows)
}

/// Checks every listed file against the manifest and re-renders the tables.
pub fn render_report(dir: &Path) -> Result<String, ScenarioError> {
    let m = read_manifest(dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} (seed {}, {})", m.scenario, m.seed, m.tool);
    for f in &m.files {
        let path = dir.join(&f.file);
        let bytes = std::fs::read(&path).map_err(|e| ScenarioError::io(&path, e))?;
        if bytes.len() as u64 != f.bytes || fnv1a64(&bytes) != f.checksum {
            return Err(ScenarioError::Io {
                path: path.display().to_string(),
                message: "contents differ from the manifest".into(),
            });
        }
    }
    let _ = writeln!(out, "{} files verified\n", m.files.len());
    let read = |name: &str| -> Result<Option<String>, ScenarioError> {
        if !m.files.iter().any(|f| f.file == name) {
            return Ok(None);
        }
        let path = dir.join(name);
        std::fs::read_to_string(&path).map(Some).map_err(|e| ScenarioError::io(&path, e))
    };
    if let Some(csv) = read("links.csv")? {
        let rows = parse_links(&csv).map_err(|message| ScenarioError::Parse {
            origin: dir.join("links.csv").display().to_string(),
            path: String::new(),
            message,
        })?;
        out.push_str("== links ==\n");
        out.push_str(&link_table(rows.iter().map(|(r, t, l)| (r.as_str(), t.as_str(), l))));
        out.push('\n');
    }
    for (title, name) in [
        ("coverage", "coverage.txt"),
        ("bend sweep", "bend.txt"),
        ("coil comparison", "compare.txt"),
        ("picoring session", "picoring.txt"),
        ("energy", "energy.txt"),
        ("picoring energy", "picoring_energy.txt"),
    ] {
        if let Some(text) = read(name)? {
            let _ = writeln!(out, "== {title} ==\n{}", text.trim_end());
            out.push('\n');
        }
    }
    Ok(out)
}
