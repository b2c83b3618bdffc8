use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DistillError, DistillSample, SampleMeta, Stage};
use crate::jsonl::{read_jsonl, JsonlWriter};
use crate::protocol::{Message, Part, Role};

pub const SCHEMA_VERSION: u32 = 1;

/// Sidecar directory, relative to the JSONL file.
const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WirePart {
    Text { text: String },
    Image { path: String, sha256: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WireMessage {
    role: Role,
    content: Vec<WirePart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WireMeta {
    #[serde(flatten)]
    meta: SampleMeta,
    /// Hashes of every image referenced by the sample, in first-use order.
    image_sha256: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WireSample {
    schema_version: u32,
    stage: Stage,
    teacher_messages: Vec<WireMessage>,
    student_messages: Vec<WireMessage>,
    target_output: String,
    meta: WireMeta,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sidecar_path(hash: &str) -> String {
    format!("{IMAGE_DIR}/{hash}.png")
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

struct Encoder {
    dir: PathBuf,
    written: BTreeSet<String>,
}

impl Encoder {
    fn messages(&mut self, ms: &[Message], hashes: &mut Vec<String>) -> Result<Vec<WireMessage>, DistillError> {
        ms.iter()
            .map(|m| {
                let content = m
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Text(t) => Ok(WirePart::Text { text: t.clone() }),
                        Part::Image(png) => {
                            let hash = sha256_hex(png);
                            let rel = sidecar_path(&hash);
                            if self.written.insert(hash.clone()) {
                                fs::write(self.dir.join(&rel), png)?;
                            }
                            if !hashes.contains(&hash) {
                                hashes.push(hash.clone());
                            }
                            Ok(WirePart::Image { path: rel, sha256: hash })
                        }
                    })
                    .collect::<Result<_, DistillError>>()?;
                Ok(WireMessage { role: m.role, content })
            })
            .collect()
    }
}

/// Writes samples as JSON lines; images go to `images/<sha256>.png` next
/// to the output file and are referenced by relative path and hash.
/// Output is a pure function of the samples.
pub fn export_jsonl(samples: &[DistillSample], path: &Path) -> Result<(), DistillError> {
    let dir = base_dir(path);
    fs::create_dir_all(dir.join(IMAGE_DIR))?;
    let mut enc = Encoder {
        dir,
        written: BTreeSet::new(),
    };
    let mut w = JsonlWriter::create(path)?;
    for s in samples {
        let mut hashes = Vec::new();
        let teacher_messages = enc.messages(&s.teacher_messages, &mut hashes)?;
        let student_messages = enc.messages(&s.student_messages, &mut hashes)?;
        w.write(&WireSample {
            schema_version: SCHEMA_VERSION,
            stage: s.stage,
            teacher_messages,
            student_messages,
            target_output: s.target_output.clone(),
            meta: WireMeta {
                meta: s.meta.clone(),
                image_sha256: hashes,
            },
        })?;
    }
    Ok(())
}

fn decode(ms: Vec<WireMessage>, dir: &Path) -> Result<Vec<Message>, DistillError> {
    ms.into_iter()
        .map(|m| {
            let parts = m
                .content
                .into_iter()
                .map(|p| match p {
                    WirePart::Text { text } => Ok(Part::Text(text)),
                    WirePart::Image { path, sha256 } => {
                        let bytes = fs::read(dir.join(&path))?;
                        if sha256_hex(&bytes) != sha256 {
                            return Err(DistillError::HashMismatch { path });
                        }
                        Ok(Part::Image(bytes))
                    }
                })
                .collect::<Result<_, DistillError>>()?;
            Ok(Message::new(m.role, parts))
        })
        .collect()
}

/// Reads an export back, checking every sidecar against its hash.
pub fn import_jsonl(path: &Path) -> Result<Vec<DistillSample>, DistillError> {
    let dir = base_dir(path);
    read_jsonl::<WireSample>(path)?
        .into_iter()
        .map(|w| {
            if w.schema_version != SCHEMA_VERSION {
                return Err(DistillError::Format(format!(
                    "unsupported schema version {}",
                    w.schema_version
                )));
            }
            Ok(DistillSample {
                stage: w.stage,
                teacher_messages: decode(w.teacher_messages, &dir)?,
                student_messages: decode(w.student_messages, &dir)?,
                target_output: w.target_output,
                meta: w.meta.meta,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::{gen_stage1_samples, Stage1Config};
    use crate::synthetic::GenSpec;

    fn samples() -> Vec<DistillSample> {
        gen_stage1_samples(&Stage1Config::new(GenSpec { seed: 8, ..GenSpec::default() }), 4).unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stage1.jsonl");
        let s = samples();
        export_jsonl(&s, &path).unwrap();
        assert_eq!(import_jsonl(&path).unwrap(), s);
        let first: serde_json::Value =
            serde_json::from_str(fs::read_to_string(&path).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first["schema_version"], 1);
        assert_eq!(first["stage"], "one");
        let hash = first["meta"]["image_sha256"][0].as_str().unwrap();
        assert_eq!(hash.len(), 64);
        assert!(dir.path().join(sidecar_path(hash)).exists());
    }

    #[test]
    fn tampered_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        export_jsonl(&samples(), &path).unwrap();
        let victim = fs::read_dir(dir.path().join(IMAGE_DIR)).unwrap().next().unwrap().unwrap().path();
        let mut bytes = fs::read(&victim).unwrap();
        *bytes.last_mut().unwrap() ^= 1;
        fs::write(&victim, bytes).unwrap();
        assert!(matches!(import_jsonl(&path), Err(DistillError::HashMismatch { .. })));
    }

    #[test]
    fn export_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        export_jsonl(&samples(), &a.path().join("x.jsonl")).unwrap();
        export_jsonl(&samples(), &b.path().join("x.jsonl")).unwrap();
        assert_eq!(
            fs::read(a.path().join("x.jsonl")).unwrap(),
            fs::read(b.path().join("x.jsonl")).unwrap()
        );
    }
}
