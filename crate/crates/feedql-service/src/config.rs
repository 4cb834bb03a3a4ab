//! Line-oriented service configuration.
//!
//! ```text
//! # top level
//! bind = 127.0.0.1:8080
//! keys = secret1 secret2
//!
//! [collection news]
//! atom = fixtures/news.atom
//! hidden = fixtures/news.hidden.tsv
//! page_size = 10
//! archive_size = 10
//! tier = keyed
//!
//! [feedset all]
//! sources = http://localhost:8001/feeds/a http://localhost:8002/feeds/b
//! ```

use std::path::{Path, PathBuf};

use feedql::capabilities::Tier;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CollectionSpec {
    pub name: String,
    pub atom: PathBuf,
    pub hidden: Option<PathBuf>,
    pub page_size: usize,
    pub archive_size: usize,
    pub tier: Tier,
}

#[derive(Debug, Clone)]
pub struct FeedsetSpec {
    pub name: String,
    pub sources: Vec<String>,
    pub tier: Tier,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub keys: Vec<String>,
    pub collections: Vec<CollectionSpec>,
    pub feedsets: Vec<FeedsetSpec>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:0".into(),
            keys: Vec::new(),
            collections: Vec::new(),
            feedsets: Vec::new(),
        }
    }
}

enum Section {
    Top,
    Collection(usize),
    Feedset(usize),
}

/// Parses the config text. Relative paths resolve against `base_dir`
/// (conventionally the config file's directory).
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ServiceConfig, ConfigError> {
    let mut config = ServiceConfig::default();
    let mut section = Section::Top;
    let fail = |line: usize, message: String| Err(ConfigError { line, message });

    for (index, raw) in text.lines().enumerate() {
        let number = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }

        if let Some(header) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let mut parts = header.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("collection"), Some(name), None) => {
                    if config.collections.iter().any(|c| c.name == name)
                        || config.feedsets.iter().any(|f| f.name == name)
                    {
                        return fail(number, format!("duplicate collection {name:?}"));
                    }
                    config.collections.push(CollectionSpec {
                        name: name.to_string(),
                        atom: PathBuf::new(),
                        hidden: None,
                        page_size: 10,
                        archive_size: 10,
                        tier: Tier::Open,
                    });
                    section = Section::Collection(config.collections.len() - 1);
                }
                (Some("feedset"), Some(name), None) => {
                    if config.feedsets.iter().any(|f| f.name == name)
                        || config.collections.iter().any(|c| c.name == name)
                    {
                        return fail(number, format!("duplicate feedset {name:?}"));
                    }
                    config.feedsets.push(FeedsetSpec {
                        name: name.to_string(),
                        sources: Vec::new(),
                        tier: Tier::Open,
                    });
                    section = Section::Feedset(config.feedsets.len() - 1);
                }
                _ => return fail(number, format!("bad section header {line:?}")),
            }
            continue;
        }

        let Some((key, value)) = line.split_once('=') else {
            return fail(number, format!("expected key = value, got {line:?}"));
        };
        let key = key.trim();
        let value = value.trim();

        let parse_size = |value: &str| -> Result<usize, ConfigError> {
            match value.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(ConfigError {
                    line: number,
                    message: format!("{key}: expected an integer >= 1, got {value:?}"),
                }),
            }
        };
        let parse_tier = |value: &str| -> Result<Tier, ConfigError> {
            match value {
                "open" => Ok(Tier::Open),
                "keyed" => Ok(Tier::Keyed),
                _ => Err(ConfigError {
                    line: number,
                    message: format!("tier: expected open or keyed, got {value:?}"),
                }),
            }
        };

        match &section {
            Section::Top => match key {
                "bind" => config.bind = value.to_string(),
                "keys" => config.keys = value.split_whitespace().map(str::to_string).collect(),
                _ => return fail(number, format!("unknown key {key:?} at top level")),
            },
            Section::Collection(i) => {
                let spec = &mut config.collections[*i];
                match key {
                    "atom" => spec.atom = base_dir.join(value),
                    "hidden" => spec.hidden = Some(base_dir.join(value)),
                    "page_size" => spec.page_size = parse_size(value)?,
                    "archive_size" => spec.archive_size = parse_size(value)?,
                    "tier" => spec.tier = parse_tier(value)?,
                    _ => return fail(number, format!("unknown key {key:?} in collection section")),
                }
            }
            Section::Feedset(i) => {
                let spec = &mut config.feedsets[*i];
                match key {
                    "sources" => {
                        spec.sources = value.split_whitespace().map(str::to_string).collect()
                    }
                    "tier" => spec.tier = parse_tier(value)?,
                    _ => return fail(number, format!("unknown key {key:?} in feedset section")),
                }
            }
        }
    }

    for spec in &config.collections {
        if spec.atom.as_os_str().is_empty() {
            return fail(0, format!("collection {:?} is missing the atom key", spec.name));
        }
    }
    for spec in &config.feedsets {
        if spec.sources.is_empty() {
            return fail(0, format!("feedset {:?} is missing the sources key", spec.name));
        }
    }
    let keyed = config.collections.iter().any(|c| c.tier == Tier::Keyed)
        || config.feedsets.iter().any(|f| f.tier == Tier::Keyed);
    if keyed && config.keys.is_empty() {
        return fail(0, "tier = keyed requires a nonempty top-level keys list".to_string());
    }
    Ok(config)
}
