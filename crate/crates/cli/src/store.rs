//! Content-addressed cache of evaluation summaries on disk.

use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use sha2::{Digest, Sha256};
use thinobs_core::continuation::{EvalKey, EvalStore, EvalSummary};

use crate::error::{CliError, CliResult};
use crate::record::{Kind, ResultRecord};

/// One JSON record per key, named by the SHA-256 of the canonical key.
pub struct DiskStore {
    dir: PathBuf,
    sink: Mutex<()>,
}

impl DiskStore {
    pub fn open(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            sink: Mutex::new(()),
        })
    }

    pub fn path_for(&self, key: &EvalKey) -> PathBuf {
        let digest = Sha256::digest(key.canonical().as_bytes());
        self.dir.join(format!("{}.json", hex::encode(digest)))
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|it| {
                it.filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EvalStore for DiskStore {
    fn get(&self, key: &EvalKey) -> Option<EvalSummary> {
        let rec = ResultRecord::read(&self.path_for(key)).ok()?;
        if rec.kind != Kind::Bundle || rec.key != key.canonical() {
            return None;
        }
        let s: EvalSummary = serde_json::from_value(rec.payload).ok()?;
        (s.key == *key).then_some(s)
    }

    fn put(&self, summary: &EvalSummary) {
        let k = summary.key;
        let rec = match ResultRecord::new(Kind::Bundle, k.canonical(), summary, vec![(k.nx, k.nphi)]) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("cache record not built: {e}");
                return;
            }
        };
        let _guard = self.sink.lock();
        if let Err(e) = rec.write(&self.path_for(&k)) {
            log::warn!("cache write failed: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use thinobs_core::construct::BuildOptions;
    use thinobs_core::continuation::{Evaluator, Resolution};

    #[test]
    fn summaries_survive_a_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = std::sync::Arc::new(DiskStore::open(dir.path()).unwrap());
        let ev = Evaluator::with_store(BuildOptions::default(), store.clone());
        let s = ev.eval(3, 1, 10, Resolution::square(33)).unwrap();
        assert_eq!(store.len(), 1);

        let reopened = DiskStore::open(dir.path()).unwrap();
        let got = reopened.get(&s.key).unwrap();
        assert_eq!(got, s);
        assert_eq!(got.c.to_bits(), s.c.to_bits());
    }

    #[test]
    fn foreign_record_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let store = DiskStore::open(dir.path()).unwrap();
        let ev = Evaluator::new(BuildOptions::default());
        let key = ev.key(3, 1, 10, Resolution::square(33));
        let rec = ResultRecord::new(Kind::Bundle, "something else", &1.0, vec![]).unwrap();
        rec.write(&store.path_for(&key)).unwrap();
        assert!(store.get(&key).is_none());
    }
}
