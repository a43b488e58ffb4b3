//! Content-addressed store of clip feature stacks.
//!
//! Entries live at `root/<digest[0..2]>/<digest>` in SGNF format and are
//! never rewritten. Writes go to a temporary file in the same directory and
//! are renamed into place. Concurrent callers asking for the same key are
//! serialized on a per-key lock: one computes, the rest read its result.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::format::{self, StreamTag};
use super::{ClipMeta, FeatureError, FeatureExtractor, FeatureStack, Stream};
use crate::dataplan::AugmentationSpec;
use crate::digest::sha256_hex;

pub const DIGEST_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub clip_id: String,
    pub augmentation: AugmentationSpec,
    pub stream: Stream,
    pub extractor_id: String,
    pub digest: String,
}

impl CacheKey {
    /// Digest is the first 16 hex chars of
    /// `SHA-256("clip_id|augmentation|stream|extractor_id")`.
    pub fn new(
        clip_id: &str,
        augmentation: AugmentationSpec,
        stream: Stream,
        extractor_id: &str,
    ) -> Self {
        let text = format!(
            "{clip_id}|{}|{}|{extractor_id}",
            augmentation.name(),
            stream.name()
        );
        let mut digest = sha256_hex(text.as_bytes());
        digest.truncate(DIGEST_LEN);
        CacheKey {
            clip_id: clip_id.to_string(),
            augmentation,
            stream,
            extractor_id: extractor_id.to_string(),
            digest,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug)]
pub struct FeatureCache {
    root: PathBuf,
    index: Mutex<HashSet<String>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
    tmp_counter: AtomicU64,
}

fn io_err(path: &Path, source: std::io::Error) -> FeatureError {
    FeatureError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn is_digest_name(name: &str) -> bool {
    name.len() == DIGEST_LEN && name.bytes().all(|b| b.is_ascii_hexdigit())
}

impl FeatureCache {
    /// Opens (creating if needed) the cache at `root` and indexes the
    /// entries already present.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, FeatureError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        let mut index = HashSet::new();
        for fan in fs::read_dir(&root).map_err(|e| io_err(&root, e))? {
            let fan = fan.map_err(|e| io_err(&root, e))?;
            if !fan
                .file_type()
                .map_err(|e| io_err(&fan.path(), e))?
                .is_dir()
            {
                continue;
            }
            for entry in fs::read_dir(fan.path()).map_err(|e| io_err(&fan.path(), e))? {
                let entry = entry.map_err(|e| io_err(&fan.path(), e))?;
                if let Some(name) = entry.file_name().to_str() {
                    if is_digest_name(name) {
                        index.insert(name.to_string());
                    }
                }
            }
        }
        Ok(FeatureCache {
            root,
            index: Mutex::new(index),
            locks: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, digest: &str) -> PathBuf {
        self.root.join(&digest[..2]).join(digest)
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.index.lock().expect("index lock").contains(&key.digest)
    }

    pub fn len(&self) -> usize {
        self.index.lock().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Digests of all entries, sorted.
    pub fn digests(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .index
            .lock()
            .expect("index lock")
            .iter()
            .cloned()
            .collect();
        all.sort();
        all
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    fn key_lock(&self, digest: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(digest.to_string())
            .or_default()
            .clone()
    }

    /// Reads a stored entry, checking it against the key and `dim`.
    pub fn read(&self, key: &CacheKey, dim: usize) -> Result<FeatureStack, FeatureError> {
        let path = self.entry_path(&key.digest);
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let corrupt = |reason: String| FeatureError::CorruptEntry {
            digest: key.digest.clone(),
            clip_id: key.clip_id.clone(),
            reason,
        };
        let file = format::decode(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if file.dim != dim {
            return Err(corrupt(format!("dim {} but expected {dim}", file.dim)));
        }
        if file.stream != StreamTag::from(key.stream) {
            return Err(corrupt(format!(
                "stream tag {:?} but key is {}",
                file.stream, key.stream
            )));
        }
        Ok(FeatureStack {
            stream: key.stream,
            extractor_id: key.extractor_id.clone(),
            n_windows: file.n_windows,
            dim: file.dim,
            values: file.values,
        })
    }

    fn write(&self, key: &CacheKey, stack: &FeatureStack) -> Result<(), FeatureError> {
        let bytes = format::encode(
            StreamTag::from(stack.stream),
            stack.dim,
            stack.n_windows,
            &stack.values,
        )?;
        let path = self.entry_path(&key.digest);
        let dir = path.parent().expect("fan-out dir");
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let tmp = dir.join(format!(
            ".{}.tmp-{}-{}",
            key.digest,
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(&bytes).map_err(|e| io_err(&tmp, e))?;
        file.sync_all().map_err(|e| io_err(&tmp, e))?;
        drop(file);
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok(())
    }

    /// Returns the stored stack for `key`, invoking `extractor` only when
    /// the key has never been computed.
    pub fn get_or_compute(
        &self,
        key: &CacheKey,
        extractor: &dyn FeatureExtractor,
        clip: &ClipMeta,
    ) -> Result<FeatureStack, FeatureError> {
        let lock = self.key_lock(&key.digest);
        let _guard = lock.lock().expect("key lock");
        if self.contains(key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return self.read(key, extractor.dim());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let stack = extractor.extract(clip, key.augmentation, key.stream)?;
        if stack.dim != extractor.dim() {
            return Err(FeatureError::DimMismatch {
                expected: extractor.dim(),
                got: stack.dim,
            });
        }
        self.write(key, &stack)?;
        self.index
            .lock()
            .expect("index lock")
            .insert(key.digest.clone());
        Ok(stack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::MockExtractor;
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        inner: MockExtractor,
        calls: AtomicUsize,
    }

    impl FeatureExtractor for Counting {
        fn extractor_id(&self) -> &str {
            self.inner.extractor_id()
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn extract(
            &self,
            clip: &ClipMeta,
            aug: AugmentationSpec,
            stream: Stream,
        ) -> Result<FeatureStack, FeatureError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(2));
            self.inner.extract(clip, aug, stream)
        }
    }

    fn counting(dim: usize) -> Counting {
        Counting {
            inner: MockExtractor::new(dim, 0).unwrap(),
            calls: AtomicUsize::new(0),
        }
    }

    fn clip() -> ClipMeta {
        ClipMeta {
            clip_id: "casa-i1".into(),
            sign_id: "casa".into(),
            interpreter_id: "i1".into(),
            frame_count: 25,
            video_path: String::new(),
        }
    }

    #[test]
    fn digest_is_prefix_of_documented_hash() {
        let key = CacheKey::new("c1", AugmentationSpec::HFlip, Stream::Flow, "x");
        assert_eq!(key.digest, &sha256_hex(b"c1|hflip|flow|x")[..16]);
        let again = CacheKey::new("c1", AugmentationSpec::HFlip, Stream::Flow, "x");
        assert_eq!(key, again);
        let other = CacheKey::new("c1", AugmentationSpec::Identity, Stream::Flow, "x");
        assert_ne!(key.digest, other.digest);
    }

    #[test]
    fn miss_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::open(dir.path()).unwrap();
        let ex = counting(16);
        let key = CacheKey::new(
            "casa-i1",
            AugmentationSpec::Identity,
            Stream::Rgb,
            ex.extractor_id(),
        );
        let a = cache.get_or_compute(&key, &ex, &clip()).unwrap();
        let b = cache.get_or_compute(&key, &ex, &clip()).unwrap();
        assert_eq!(ex.calls.load(Ordering::SeqCst), 1);
        assert_eq!(cache.stats(), CacheStats { hits: 1, misses: 1 });
        assert_eq!(a, b);
        assert!(cache
            .entry_path(&key.digest)
            .starts_with(dir.path().join(&key.digest[..2])));

        // A fresh handle sees the entry on disk.
        let reopened = FeatureCache::open(dir.path()).unwrap();
        assert!(reopened.contains(&key));
        reopened.get_or_compute(&key, &ex, &clip()).unwrap();
        assert_eq!(ex.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn keys_differing_in_augmentation_are_distinct_entries() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::open(dir.path()).unwrap();
        let ex = counting(16);
        for aug in [AugmentationSpec::Identity, AugmentationSpec::Upsample] {
            let key = CacheKey::new("casa-i1", aug, Stream::Rgb, ex.extractor_id());
            cache.get_or_compute(&key, &ex, &clip()).unwrap();
        }
        assert_eq!(cache.len(), 2);
        assert_eq!(ex.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn concurrent_same_key_computes_once() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::open(dir.path()).unwrap();
        let ex = counting(16);
        let key = CacheKey::new(
            "casa-i1",
            AugmentationSpec::Identity,
            Stream::Rgb,
            ex.extractor_id(),
        );
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| cache.get_or_compute(&key, &ex, &clip()).unwrap());
            }
        });
        assert_eq!(ex.calls.load(Ordering::SeqCst), 1);
        assert_eq!(cache.stats(), CacheStats { hits: 7, misses: 1 });
        // No temporary files left behind.
        let fan = dir.path().join(&key.digest[..2]);
        assert_eq!(fs::read_dir(fan).unwrap().count(), 1);
    }

    #[test]
    fn corrupt_entry_names_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let ex = counting(16);
        let key = CacheKey::new(
            "casa-i1",
            AugmentationSpec::Identity,
            Stream::Rgb,
            ex.extractor_id(),
        );
        {
            let cache = FeatureCache::open(dir.path()).unwrap();
            cache.get_or_compute(&key, &ex, &clip()).unwrap();
        }
        let path = dir.path().join(&key.digest[..2]).join(&key.digest);
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        let cache = FeatureCache::open(dir.path()).unwrap();
        let err = cache.get_or_compute(&key, &ex, &clip()).unwrap_err();
        assert!(
            matches!(err, FeatureError::CorruptEntry { ref digest, .. } if *digest == key.digest)
        );
        assert!(err.to_string().contains(&key.digest));

        // Width mismatch is also corruption.
        let wide = counting(32);
        fs::write(
            &path,
            format::encode(StreamTag::Rgb, 16, 1, &[0.0; 16]).unwrap(),
        )
        .unwrap();
        let err = cache.get_or_compute(&key, &wide, &clip()).unwrap_err();
        assert!(matches!(err, FeatureError::CorruptEntry { .. }));
    }

    #[test]
    fn extractor_failure_propagates_and_writes_nothing() {
        struct Failing;
        impl FeatureExtractor for Failing {
            fn extractor_id(&self) -> &str {
                "failing"
            }
            fn dim(&self) -> usize {
                8
            }
            fn extract(
                &self,
                clip: &ClipMeta,
                _: AugmentationSpec,
                _: Stream,
            ) -> Result<FeatureStack, FeatureError> {
                Err(FeatureError::Extractor {
                    clip_id: clip.clip_id.clone(),
                    message: "boom".into(),
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::open(dir.path()).unwrap();
        let key = CacheKey::new(
            "casa-i1",
            AugmentationSpec::Identity,
            Stream::Rgb,
            "failing",
        );
        assert!(matches!(
            cache.get_or_compute(&key, &Failing, &clip()),
            Err(FeatureError::Extractor { .. })
        ));
        assert!(cache.is_empty());
    }
}
