//! Equilibrium sets and their on-disk cache.
//!
//! File format: a header line `# <game_hash> <mode> <count>` followed by one joint-policy
//! index per line, ascending. `game_hash` is the SHA-256 of the canonical text form.

use super::HarnessError;
use crate::game::{serialize_game_spec, StochasticGame};
use crate::graph::BestReplyGraph;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

pub fn game_hash(game: &StochasticGame) -> String {
    format!("{:x}", Sha256::digest(serialize_game_spec(game).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumSet {
    hash: String,
    mode: String,
    indices: Vec<usize>,
}

impl EquilibriumSet {
    /// `mode` is a single whitespace-free token such as `tabular` or `linear:3,18`.
    pub fn new(game: &StochasticGame, mode: &str, mut indices: Vec<usize>) -> Self {
        assert!(!mode.is_empty() && !mode.contains(char::is_whitespace), "mode must be one token");
        indices.sort_unstable();
        indices.dedup();
        Self { hash: game_hash(game), mode: mode.to_string(), indices }
    }

    pub fn from_graph(game: &StochasticGame, graph: &BestReplyGraph) -> Self {
        let mode = serde_json::to_value(graph.mode()).expect("mode serializes");
        Self::new(game, mode.as_str().expect("mode is a string"), graph.equilibria().to_vec())
    }

    pub fn game_hash(&self) -> &str {
        &self.hash
    }

    pub fn mode(&self) -> &str {
        &self.mode
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, u: usize) -> bool {
        self.indices.binary_search(&u).is_ok()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {} {} {}\n", self.hash, self.mode, self.indices.len());
        for u in &self.indices {
            out.push_str(&u.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let fields: Vec<&str> = header.strip_prefix('#').ok_or("missing `#` header")?.split_whitespace().collect();
        let [hash, mode, count] = fields[..] else {
            return Err("header must be `# game_hash mode count`".into());
        };
        let count: usize = count.parse().map_err(|_| format!("bad count `{count}`"))?;
        let indices = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<usize>().map_err(|_| format!("bad index `{l}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if indices.len() != count {
            return Err(format!("header announces {count} indices, file has {}", indices.len()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err("indices are not strictly ascending".into());
        }
        Ok(Self { hash: hash.to_string(), mode: mode.to_string(), indices })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        f.write_all(self.to_text().as_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    /// Load a cache and check it belongs to `game` and `mode`.
    pub fn load(path: &Path, game: &StochasticGame, mode: &str) -> Result<Self, HarnessError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(HarnessError::MissingCache { path: path.into(), mode: mode.split(':').next().unwrap_or(mode).into() })
            }
            Err(e) => return Err(HarnessError::io(path, e)),
        };
        let bad = |reason: String| HarnessError::BadCache { path: path.into(), reason };
        let set = Self::parse(&text).map_err(bad)?;
        if set.hash != game_hash(game) {
            return Err(bad("computed for a different game".into()));
        }
        if set.mode != mode {
            return Err(bad(format!("mode is `{}`, expected `{mode}`", set.mode)));
        }
        Ok(set)
    }
}
