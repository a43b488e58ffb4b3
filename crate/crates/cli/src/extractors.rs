//! Extractor selection for a run, plus a call counter.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use signweave_core::dataplan::AugmentationSpec;
use signweave_core::features::bridge::ExternalExtractor;
use signweave_core::features::mock::MockExtractor;
use signweave_core::features::{ClipMeta, FeatureError, FeatureExtractor, FeatureStack, Stream};

use crate::config::{ExtractorKind, RunConfig};
use crate::error::{CliError, Result};

/// Builds the extractor named by the config. External workers start on
/// first use, so stages that only read the cache never spawn them.
pub fn from_config(config: &RunConfig) -> Result<Box<dyn FeatureExtractor>> {
    match config.extractor {
        ExtractorKind::Mock => {
            let mock = MockExtractor::new(config.dim, config.noise_seed)
                .map_err(|e| CliError::config(e.to_string()))?;
            Ok(Box::new(mock))
        }
        ExtractorKind::External => Ok(Box::new(BridgePool {
            command: config.extractor_command.clone(),
            id: config
                .extractor_id
                .clone()
                .unwrap_or_else(|| format!("external-d{}", config.dim)),
            dim: config.dim,
            scratch: config.cache_root.join(".bridge"),
            size: config.extractor_processes.unwrap_or(config.workers).max(1),
            workers: Mutex::new(None),
        })),
    }
}

/// Several bridge processes; each rayon thread talks to its own.
pub struct BridgePool {
    command: Vec<String>,
    id: String,
    dim: usize,
    scratch: PathBuf,
    size: usize,
    workers: Mutex<Option<Arc<Vec<ExternalExtractor>>>>,
}

impl BridgePool {
    fn workers(&self) -> std::result::Result<Arc<Vec<ExternalExtractor>>, FeatureError> {
        let mut slot = self.workers.lock().expect("bridge pool lock");
        if let Some(w) = slot.as_ref() {
            return Ok(Arc::clone(w));
        }
        let workers = (0..self.size)
            .map(|i| {
                ExternalExtractor::spawn(
                    &self.command,
                    &self.id,
                    self.dim,
                    self.scratch.join(i.to_string()),
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let workers = Arc::new(workers);
        *slot = Some(Arc::clone(&workers));
        Ok(workers)
    }
}

impl FeatureExtractor for BridgePool {
    fn extractor_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> std::result::Result<FeatureStack, FeatureError> {
        let workers = self.workers()?;
        let idx = rayon::current_thread_index().unwrap_or(0) % workers.len();
        workers[idx].extract(clip, augmentation, stream)
    }
}

/// Counts extractor invocations per stream.
pub struct Counting<'a> {
    inner: &'a dyn FeatureExtractor,
    calls: [AtomicU64; 2],
}

impl<'a> Counting<'a> {
    pub fn new(inner: &'a dyn FeatureExtractor) -> Self {
        Counting {
            inner,
            calls: [AtomicU64::new(0), AtomicU64::new(0)],
        }
    }

    pub fn calls(&self, stream: Stream) -> u64 {
        self.calls[stream_index(stream)].load(Ordering::Relaxed)
    }
}

fn stream_index(stream: Stream) -> usize {
    match stream {
        Stream::Rgb => 0,
        Stream::Flow => 1,
    }
}

impl FeatureExtractor for Counting<'_> {
    fn extractor_id(&self) -> &str {
        self.inner.extractor_id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn extract(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> std::result::Result<FeatureStack, FeatureError> {
        self.calls[stream_index(stream)].fetch_add(1, Ordering::Relaxed);
        self.inner.extract(clip, augmentation, stream)
    }
}
