//! Plain-text policy tables.
//!
//! ```text
//! # pulltrack-policy v1
//! # params_hash = 3f2a9c0d41b7e655
//! # policy = optimal_rvia
//! # N = 30
//! # states = 3600
//! # average_cost = 0.8731952
//! # residual = 0.00099
//! # iterations = 412
//! # ref_state = 0
//! 0 1
//! 1 1
//! ...
//! ```
//!
//! Header lines start with `#` and hold `key = value` pairs. Every state
//! index appears exactly once, followed by its action (0 idle, 1 or 2 pull).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{StateSpace, SystemParams};
use crate::policies::PolicyKind;
use crate::solver::PolicyTable;

pub const POLICY_FILE_MAGIC: &str = "pulltrack-policy v1";

/// First 16 hex digits of the SHA-256 of the JSON-serialized parameters.
pub fn params_hash(params: &SystemParams) -> String {
    let json = serde_json::to_string(params).expect("parameters serialize");
    let digest = Sha256::digest(json.as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub params_hash: String,
    pub kind: PolicyKind,
    pub n: u32,
    pub table: PolicyTable,
}

impl PolicyFile {
    pub fn new(params: &SystemParams, kind: PolicyKind, table: PolicyTable) -> Self {
        Self {
            params_hash: params_hash(params),
            kind,
            n: params.n,
            table,
        }
    }

    pub fn render(&self) -> String {
        let t = &self.table;
        let mut out = String::with_capacity(16 + t.actions.len() * 8);
        let _ = writeln!(out, "# {POLICY_FILE_MAGIC}");
        let _ = writeln!(out, "# params_hash = {}", self.params_hash);
        let _ = writeln!(out, "# policy = {}", self.kind);
        let _ = writeln!(out, "# N = {}", self.n);
        let _ = writeln!(out, "# states = {}", t.actions.len());
        let _ = writeln!(out, "# average_cost = {}", t.average_cost);
        let _ = writeln!(out, "# residual = {}", t.residual);
        let _ = writeln!(out, "# iterations = {}", t.iterations);
        let _ = writeln!(out, "# ref_state = {}", t.ref_state);
        for (s, a) in t.actions.iter().enumerate() {
            let _ = writeln!(out, "{s} {a}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|reason| Error::PolicyFile {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some(l) if l.trim_start_matches('#').trim() == POLICY_FILE_MAGIC => {}
            other => return Err(format!("bad magic line {other:?}")),
        }
        let mut header = std::collections::HashMap::new();
        let mut actions: Vec<Option<usize>> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| format!("line {}: header without `=`", lineno + 2))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let states: usize = field(&header, "states")?;
            if actions.is_empty() {
                actions = vec![None; states];
            }
            let mut it = line.split_whitespace();
            let (Some(s), Some(a), None) = (it.next(), it.next(), it.next()) else {
                return Err(format!("line {}: expected `state action`", lineno + 2));
            };
            let s: usize = s.parse().map_err(|e| format!("line {}: {e}", lineno + 2))?;
            let a: usize = a.parse().map_err(|e| format!("line {}: {e}", lineno + 2))?;
            if a > 2 {
                return Err(format!("line {}: action {a} out of range", lineno + 2));
            }
            match actions.get_mut(s) {
                Some(slot @ None) => *slot = Some(a),
                Some(Some(_)) => return Err(format!("state {s} listed twice")),
                None => return Err(format!("state {s} out of range")),
            }
        }
        let n: u32 = field(&header, "N")?;
        let states: usize = field(&header, "states")?;
        if states != StateSpace::new(n).len() {
            return Err(format!("{states} states does not match N = {n}"));
        }
        if actions.len() != states || actions.iter().any(Option::is_none) {
            return Err("missing state rows".into());
        }
        let kind: PolicyKind = field::<String>(&header, "policy")?
            .parse()
            .map_err(|e: Error| e.to_string())?;
        Ok(Self {
            params_hash: field(&header, "params_hash")?,
            kind,
            n,
            table: PolicyTable {
                actions: actions.into_iter().map(Option::unwrap).collect(),
                average_cost: field(&header, "average_cost")?,
                residual: field(&header, "residual")?,
                iterations: field(&header, "iterations")?,
                ref_state: field(&header, "ref_state")?,
                bias: Vec::new(),
            },
        })
    }

    /// Errors unless the file was solved for `params`.
    pub fn check_params(&self, params: &SystemParams) -> Result<()> {
        let expected = params_hash(params);
        if self.params_hash != expected {
            return Err(Error::Config(format!(
                "policy file was solved for params {} but the configuration hashes to {expected}",
                self.params_hash
            )));
        }
        Ok(())
    }
}

fn field<T: FromStr>(header: &std::collections::HashMap<String, String>, key: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    header
        .get(key)
        .ok_or_else(|| format!("missing header `{key}`"))?
        .parse()
        .map_err(|e| format!("header `{key}`: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PolicyFile {
        let params = SystemParams::new([0.7, 0.7], [0.8, 0.6], 0.4, 0.7, 0.5)
            .unwrap()
            .with_truncation(2)
            .unwrap();
        let table = PolicyTable {
            actions: (0..16).map(|s| s % 3).collect(),
            average_cost: 0.873_195_123_456_789,
            residual: 9.9e-4,
            iterations: 412,
            ref_state: 0,
            bias: Vec::new(),
        };
        PolicyFile::new(&params, PolicyKind::OptimalRvia, table)
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample();
        assert_eq!(PolicyFile::parse(&f.render()).unwrap(), f);
    }

    #[test]
    fn detects_corruption() {
        let text = sample().render();
        assert!(PolicyFile::parse(&text.replace("pulltrack-policy v1", "v0")).is_err());
        assert!(PolicyFile::parse(&text.replace("\n5 2\n", "\n5 7\n")).is_err());
        assert!(PolicyFile::parse(&text.replace("\n5 2\n", "\n")).is_err());
        assert!(PolicyFile::parse(&text.replace("\n5 2\n", "\n4 2\n")).is_err());
        assert!(PolicyFile::parse(&text.replace("# N = 2", "# N = 3")).is_err());
    }

    #[test]
    fn hash_tracks_params() {
        let a = SystemParams::new([0.7, 0.7], [0.8, 0.6], 0.4, 0.7, 0.5).unwrap();
        let mut b = a.clone();
        assert_eq!(params_hash(&a), params_hash(&b));
        b.alpha = 0.75;
        assert_ne!(params_hash(&a), params_hash(&b));
        assert_eq!(params_hash(&a).len(), 16);
    }
}
