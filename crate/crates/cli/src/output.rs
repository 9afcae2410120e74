use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Files rendered in memory and written together.
///
/// If any write fails, every file already written by this set is removed,
/// and so is the output directory if this set created it.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, contents: Vec<u8>) {
        self.files.push((name.to_string(), contents));
    }

    pub fn commit(self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        let created = !dir.exists();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, contents) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                if created {
                    let _ = std::fs::remove_dir(dir);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// `#`-prefixed metadata lines opening every output table.
#[derive(Debug, Clone)]
pub struct Metadata {
    text: String,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        let mut text = String::new();
        writeln!(text, "# cnvks {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(text, "# command={command}").unwrap();
        Metadata { text }
    }

    /// Adds one line of `key=value` pairs.
    pub fn line(mut self, pairs: &[(&str, String)]) -> Self {
        let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(self.text, "# {}", body.join(" ")).unwrap();
        self
    }

    /// Metadata followed by whatever `write` renders.
    pub fn render(
        &self,
        write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> std::io::Result<Vec<u8>> {
        let mut buf = self.text.clone().into_bytes();
        write(&mut buf)?;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_commit_leaves_nothing_behind() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let mut set = OutputSet::default();
        set.add("a.tsv", b"x\n".to_vec());
        set.add("missing/b.tsv", b"y\n".to_vec());
        assert!(set.commit(&dir).is_err());
        assert!(!dir.exists());
    }

    #[test]
    fn metadata_prefixes_tables() {
        let meta = Metadata::new("scan").line(&[("seed", "7".into()), ("alpha", "0.1".into())]);
        let bytes = meta.render(|b| {
            b.extend_from_slice(b"col\n");
            Ok(())
        });
        let text = String::from_utf8(bytes.unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# cnvks "));
        assert_eq!(lines[1], "# command=scan");
        assert_eq!(lines[2], "# seed=7 alpha=0.1");
        assert_eq!(lines[3], "col");
    }
}
