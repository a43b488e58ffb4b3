//! Line protocol for out-of-process extractors.
//!
//! The client writes one [`ExtractRequest`] JSON object per line to the
//! worker's stdin and reads one [`ExtractReply`] per line from its stdout,
//! strictly in request order. The worker writes the stack as an SGNF file at
//! `output_path`.
//!
//! [`serve_mock`] implements the worker side with [`MockExtractor`], which
//! makes the protocol testable without a video backbone.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::format::{self, StreamTag};
use super::{ClipMeta, FeatureError, FeatureExtractor, FeatureStack, MockExtractor, Stream};
use crate::dataplan::AugmentationSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractRequest {
    pub video_path: String,
    pub augmentation: String,
    pub stream: String,
    pub dim: u32,
    pub output_path: String,
    pub clip_id: String,
    pub sign_id: String,
    pub interpreter_id: String,
    pub frame_count: u32,
}

impl ExtractRequest {
    pub fn new(
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
        dim: usize,
        output_path: &Path,
    ) -> Self {
        ExtractRequest {
            video_path: clip.video_path.clone(),
            augmentation: augmentation.name().to_string(),
            stream: stream.name().to_string(),
            dim: dim as u32,
            output_path: output_path.display().to_string(),
            clip_id: clip.clip_id.clone(),
            sign_id: clip.sign_id.clone(),
            interpreter_id: clip.interpreter_id.clone(),
            frame_count: clip.frame_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractReply {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_windows: Option<u32>,
}

impl ExtractReply {
    pub fn error(message: impl Into<String>) -> Self {
        ExtractReply {
            status: "error".into(),
            message: Some(message.into()),
            clip_id: None,
            augmentation: None,
            stream: None,
            n_windows: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn handle_mock(line: &str, noise_seed: u64) -> Result<ExtractReply, String> {
    let req: ExtractRequest =
        serde_json::from_str(line).map_err(|e| format!("bad request: {e}"))?;
    let aug = AugmentationSpec::from_name(&req.augmentation)
        .ok_or_else(|| format!("unknown augmentation {:?}", req.augmentation))?;
    let stream =
        Stream::from_name(&req.stream).ok_or_else(|| format!("unknown stream {:?}", req.stream))?;
    if req.frame_count == 0 {
        return Err("zero frames".into());
    }
    let mock = MockExtractor::new(req.dim as usize, noise_seed).map_err(|e| e.to_string())?;
    let clip = ClipMeta {
        clip_id: req.clip_id.clone(),
        sign_id: req.sign_id.clone(),
        interpreter_id: req.interpreter_id.clone(),
        frame_count: req.frame_count,
        video_path: req.video_path.clone(),
    };
    let stack = mock.stack(&clip, aug, stream);
    let bytes = format::encode(
        StreamTag::from(stream),
        stack.dim,
        stack.n_windows,
        &stack.values,
    )
    .map_err(|e| e.to_string())?;
    let out = PathBuf::from(&req.output_path);
    let tmp = out.with_extension("partial");
    fs::write(&tmp, &bytes)
        .and_then(|_| fs::rename(&tmp, &out))
        .map_err(|e| format!("{}: {e}", out.display()))?;
    Ok(ExtractReply {
        status: "ok".into(),
        message: None,
        clip_id: Some(req.clip_id),
        augmentation: Some(req.augmentation),
        stream: Some(req.stream),
        n_windows: Some(stack.n_windows as u32),
    })
}

/// Worker loop backed by the mock extractor. Bad requests get an error
/// reply; the loop ends at end of input.
pub fn serve_mock<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    noise_seed: u64,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = handle_mock(&line, noise_seed).unwrap_or_else(ExtractReply::error);
        serde_json::to_writer(&mut output, &reply)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

struct Worker {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
}

/// Extractor that delegates to a worker process speaking the line protocol.
pub struct ExternalExtractor {
    id: String,
    dim: usize,
    scratch: PathBuf,
    counter: AtomicU64,
    worker: Mutex<Worker>,
}

impl ExternalExtractor {
    /// Starts `command` (program followed by arguments). Feature files are
    /// exchanged through `scratch`.
    pub fn spawn(
        command: &[String],
        extractor_id: &str,
        dim: usize,
        scratch: impl Into<PathBuf>,
    ) -> Result<Self, FeatureError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| FeatureError::Extractor {
                clip_id: String::new(),
                message: "empty extractor command".into(),
            })?;
        let scratch = scratch.into();
        fs::create_dir_all(&scratch).map_err(|source| FeatureError::Io {
            path: scratch.display().to_string(),
            source,
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| FeatureError::Io {
                path: program.clone(),
                source,
            })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalExtractor {
            id: extractor_id.to_string(),
            dim,
            scratch,
            counter: AtomicU64::new(0),
            worker: Mutex::new(Worker {
                child,
                stdin: Some(stdin),
                stdout,
            }),
        })
    }

    fn round_trip(&self, request: &ExtractRequest) -> io::Result<ExtractReply> {
        let mut worker = self.worker.lock().expect("worker lock");
        let stdin = worker.stdin.as_mut().expect("open until drop");
        serde_json::to_writer(&mut *stdin, request)?;
        stdin.write_all(b"\n")?;
        stdin.flush()?;
        let mut line = String::new();
        if worker.stdout.read_line(&mut line)? == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "extractor process closed its output",
            ));
        }
        serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

impl FeatureExtractor for ExternalExtractor {
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
    ) -> Result<FeatureStack, FeatureError> {
        let fail = |message: String| FeatureError::Extractor {
            clip_id: clip.clip_id.clone(),
            message,
        };
        let out = self.scratch.join(format!(
            "req-{}-{}.sgnf",
            std::process::id(),
            self.counter.fetch_add(1, Ordering::Relaxed)
        ));
        let request = ExtractRequest::new(clip, augmentation, stream, self.dim, &out);
        let reply = self.round_trip(&request).map_err(|e| fail(e.to_string()))?;
        if !reply.is_ok() {
            return Err(fail(
                reply.message.unwrap_or_else(|| "unknown error".into()),
            ));
        }
        let bytes = fs::read(&out).map_err(|source| FeatureError::Io {
            path: out.display().to_string(),
            source,
        })?;
        let _ = fs::remove_file(&out);
        let file = format::decode(&bytes)?;
        if file.dim != self.dim {
            return Err(FeatureError::DimMismatch {
                expected: self.dim,
                got: file.dim,
            });
        }
        if file.stream != StreamTag::from(stream) {
            return Err(fail(format!("reply carries stream tag {:?}", file.stream)));
        }
        if reply
            .n_windows
            .is_some_and(|n| n as usize != file.n_windows)
        {
            return Err(fail("reply n_windows disagrees with the file".into()));
        }
        Ok(FeatureStack {
            stream,
            extractor_id: self.id.clone(),
            n_windows: file.n_windows,
            dim: file.dim,
            values: file.values,
        })
    }
}

impl Drop for ExternalExtractor {
    fn drop(&mut self) {
        if let Ok(worker) = self.worker.get_mut() {
            // Closing stdin ends the worker's request loop.
            drop(worker.stdin.take());
            let _ = worker.child.wait();
        }
    }
}
