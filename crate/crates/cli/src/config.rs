//! Flat `key=value` run-configuration files.
//!
//! One assignment per line; blank lines and `#` comments are ignored.
//! Keys are spelled exactly like the long command-line flags without the
//! leading dashes (`learning-rate=0.001`).  Values given on the command
//! line always win over values from the file, and keys that no flag
//! consumes are reported as errors so typos cannot silently change a run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Parsed contents of one configuration file.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
    source: String,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    i + 1
                );
            };
            let key = key.trim().to_string();
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                bail!("{}:{}: duplicate key {key:?}", path.display(), i + 1);
            }
        }
        Ok(FileConfig {
            values,
            source: path.display().to_string(),
        })
    }

    /// Remove and parse one value, if the file has it.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("{}: key {key:?}: cannot parse {raw:?}: {e}", self.source)),
        }
    }

    /// Fail on leftover keys: every key must belong to some flag.
    pub fn finish(self) -> Result<()> {
        if self.values.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.values.keys().map(|k| k.as_str()).collect();
        bail!(
            "{}: unknown config key(s): {}",
            self.source,
            keys.join(", ")
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_keys_comments_and_blank_lines() {
        let (_dir, path) =
            write_config("# a comment\n\nepochs=30\nlearning-rate = 0.001\nmargin=0.5\n");
        let mut cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.take::<usize>("epochs").unwrap(), Some(30));
        assert_eq!(cfg.take::<f64>("learning-rate").unwrap(), Some(0.001));
        assert_eq!(cfg.take::<f64>("margin").unwrap(), Some(0.5));
        assert_eq!(cfg.take::<u64>("seed").unwrap(), None);
        cfg.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_an_error() {
        let (_dir, path) = write_config("epochs=3\nepochz=4\n");
        let mut cfg = FileConfig::load(&path).unwrap();
        let _ = cfg.take::<usize>("epochs").unwrap();
        let err = cfg.finish().unwrap_err().to_string();
        assert!(err.contains("epochz"), "{err}");
    }

    #[test]
    fn unparseable_values_and_malformed_lines_are_errors() {
        let (_dir, path) = write_config("epochs=soon\n");
        let mut cfg = FileConfig::load(&path).unwrap();
        assert!(cfg.take::<usize>("epochs").is_err());

        let (_dir2, path2) = write_config("this line has no equals sign\n");
        assert!(FileConfig::load(&path2).is_err());

        let (_dir3, path3) = write_config("seed=1\nseed=2\n");
        assert!(
            FileConfig::load(&path3).is_err(),
            "duplicate keys must be rejected"
        );
    }
}
