//! JSON-lines certificates written by `transform` and replayed by `verify`.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: Record,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Header {
        original_path: String,
        transformed_path: String,
        original: String,
        transformed: String,
        weak: bool,
        max_depth: usize,
        max_states: usize,
        seed: u64,
    },
    Step {
        rule: String,
        rule_index: usize,
        verdict: String,
        forced: bool,
    },
    Goal {
        goal: String,
        verdict: String,
        original: Vec<String>,
        transformed: Vec<String>,
    },
    Summary {
        equal: usize,
        differ: usize,
        unknown: usize,
    },
}

pub fn write(path: &Path, records: &[Record]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, &Line { schema_version: SCHEMA_VERSION, record: r.clone() })?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<Vec<Record>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed: Line = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        if parsed.schema_version != SCHEMA_VERSION {
            bail!("{}:{}: unsupported schema version {}", path.display(), n + 1, parsed.schema_version);
        }
        out.push(parsed.record);
    }
    Ok(out)
}
