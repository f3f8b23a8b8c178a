use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{DataError, Dataset};

pub const USERS_FILE: &str = "users.jsonl";
pub const TWEETS_FILE: &str = "tweets.jsonl";
pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const FEATURES_FILE: &str = "features.jsonl";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub users: PathBuf,
    pub tweets: PathBuf,
    pub interactions: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

impl DatasetPaths {
    /// Every standard file name under `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            users: dir.join(USERS_FILE),
            tweets: dir.join(TWEETS_FILE),
            interactions: Some(dir.join(INTERACTIONS_FILE)),
            labels: Some(dir.join(LABELS_FILE)),
            features: Some(dir.join(FEATURES_FILE)),
        }
    }

    /// Like [`in_dir`](Self::in_dir), keeping optional files only if present.
    pub fn existing(dir: &Path) -> Self {
        let keep = |p: Option<PathBuf>| p.filter(|p| p.exists());
        let all = Self::in_dir(dir);
        Self {
            interactions: keep(all.interactions),
            labels: keep(all.labels),
            features: keep(all.features),
            ..all
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One value per non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| DataError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for v in values {
        let line = serde_json::to_string(v).map_err(|e| DataError::Feature(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DataError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DataError::Feature(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_dataset(paths: &DatasetPaths) -> Result<Dataset, DataError> {
    let ds = Dataset {
        users: read_jsonl(&paths.users)?,
        tweets: read_jsonl(&paths.tweets)?,
        interactions: paths.interactions.as_deref().map(read_jsonl).transpose()?,
        labels: paths.labels.as_deref().map(read_jsonl).transpose()?.unwrap_or_default(),
        features: paths.features.as_deref().map(read_jsonl).transpose()?,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes users and tweets, plus each optional stream that has both data and a path.
/// Labels are written whenever a path is given.
pub fn write_dataset(ds: &Dataset, paths: &DatasetPaths) -> Result<(), DataError> {
    write_jsonl(&paths.users, &ds.users)?;
    write_jsonl(&paths.tweets, &ds.tweets)?;
    if let (Some(p), Some(v)) = (&paths.interactions, &ds.interactions) {
        write_jsonl(p, v)?;
    }
    if let Some(p) = &paths.labels {
        write_jsonl(p, &ds.labels)?;
    }
    if let (Some(p), Some(v)) = (&paths.features, &ds.features) {
        write_jsonl(p, v)?;
    }
    Ok(())
}
