//! Scorer backed by an exported ONNX sequence classifier.
//!
//! Directory layout:
//!
//! ```text
//! <dir>/manifest.json    schema_version, scorer_version, file names, tensor names
//! <dir>/model.onnx       classifier graph: input_ids[, attention_mask] -> logits [1, num_labels]
//! <dir>/tokenizer.json   WordPiece vocabulary and special tokens
//! <dir>/selftest.jsonl   {"text": ..., "score": ...} pairs recorded at export time
//! ```
//!
//! Loading verifies every self-test pair; a deviation above the manifest's
//! `self_test_tolerance` (default 1e-4) fails the load.

use std::fs;
use std::path::{Path, PathBuf};

use prost::Message;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tract_onnx::pb;
use tract_onnx::prelude::*;

use super::tokenizer::{TokenizerSpec, WordPieceTokenizer};
use super::{HateScore, ScoreError, Scorer, ScorerDescriptor, ScorerKind};
use crate::normalize::{normalize, NormalizedText, DEFAULT_MAX_WORDS};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SELF_TEST_FILE: &str = "selftest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNames {
    pub input_ids: String,
    #[serde(default)]
    pub attention_mask: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scorer_version: String,
    #[serde(default = "default_model_file")]
    pub model_file: String,
    #[serde(default = "default_tokenizer_file")]
    pub tokenizer_file: String,
    #[serde(default)]
    pub self_test_file: Option<String>,
    #[serde(default = "default_tolerance")]
    pub self_test_tolerance: f64,
    pub inputs: InputNames,
    pub output: String,
    pub num_labels: usize,
    pub hate_class_index: usize,
    #[serde(default = "default_max_words")]
    pub max_input_words: usize,
    /// `merged` or `adapter`; informational.
    #[serde(default)]
    pub weights_form: Option<String>,
    /// Trainer-owned metadata (encoder geometry, adapter config, training
    /// config digest). Carried through untouched.
    #[serde(default)]
    pub geometry: serde_json::Value,
    #[serde(default)]
    pub lora: serde_json::Value,
    #[serde(default)]
    pub train_config_digest: Option<String>,
}

fn default_model_file() -> String {
    "model.onnx".into()
}
fn default_tokenizer_file() -> String {
    "tokenizer.json".into()
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_max_words() -> usize {
    DEFAULT_MAX_WORDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestCase {
    pub text: String,
    pub score: f64,
}

type Plan = TypedRunnableModel<TypedModel>;

pub struct ExportedModelScorer {
    descriptor: ScorerDescriptor,
    manifest: Manifest,
    tokenizer: WordPieceTokenizer,
    plan: Plan,
    /// Which tensor each graph input position receives.
    feeds: Vec<Feed>,
    dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Feed {
    Ids,
    Mask,
}

impl std::fmt::Debug for ExportedModelScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExportedModelScorer")
            .field("descriptor", &self.descriptor)
            .field("dir", &self.dir)
            .finish_non_exhaustive()
    }
}

/// Loads and self-checks an exported model directory.
pub fn load_exported_model(dir: impl AsRef<Path>) -> Result<ExportedModelScorer, ScoreError> {
    ExportedModelScorer::load(dir)
}

fn read_file(path: &Path) -> Result<Vec<u8>, ScoreError> {
    fs::read(path).map_err(|e| ScoreError::Corrupt(format!("{}: {e}", path.display())))
}

impl ExportedModelScorer {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(ScoreError::NotFound(dir.display().to_string()));
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.is_file() {
            return Err(ScoreError::Corrupt(format!("missing {}", manifest_path.display())));
        }
        let raw: serde_json::Value = serde_json::from_slice(&read_file(&manifest_path)?)
            .map_err(|e| ScoreError::Corrupt(format!("manifest: {e}")))?;
        // Check the version before the full schema so newer manifests get a
        // version error rather than a field error.
        let found = raw
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ScoreError::Corrupt("manifest: missing schema_version".into()))?;
        if found != u64::from(MANIFEST_SCHEMA_VERSION) {
            return Err(ScoreError::SchemaVersion {
                found: found.try_into().unwrap_or(u32::MAX),
                supported: MANIFEST_SCHEMA_VERSION,
            });
        }
        let manifest: Manifest =
            serde_json::from_value(raw).map_err(|e| ScoreError::Corrupt(format!("manifest: {e}")))?;
        if manifest.num_labels < 2 || manifest.hate_class_index >= manifest.num_labels {
            return Err(ScoreError::Corrupt(format!(
                "hate_class_index {} invalid for {} labels",
                manifest.hate_class_index, manifest.num_labels
            )));
        }

        let tok_spec: TokenizerSpec = serde_json::from_slice(&read_file(&dir.join(&manifest.tokenizer_file))?)
            .map_err(|e| ScoreError::Corrupt(format!("tokenizer: {e}")))?;
        let tokenizer = WordPieceTokenizer::new(tok_spec)?;

        let model_bytes = read_file(&dir.join(&manifest.model_file))?;
        let (plan, feeds) =
            build_plan(&model_bytes, &manifest).map_err(|e| ScoreError::Corrupt(format!("model: {e:#}")))?;

        let mut descriptor = ScorerDescriptor::new("exported-onnx", ScorerKind::ExportedModel, &manifest.scorer_version);
        descriptor.max_input_words = manifest.max_input_words;
        let scorer = Self {
            descriptor,
            manifest,
            tokenizer,
            plan,
            feeds,
            dir: dir.to_path_buf(),
        };
        scorer.verify_self_test()?;
        Ok(scorer)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Re-scores the recorded self-test pairs; returns the largest deviation.
    pub fn verify_self_test(&self) -> Result<f64, ScoreError> {
        let Some(file) = &self.manifest.self_test_file else {
            return Ok(0.0);
        };
        let text = String::from_utf8(read_file(&self.dir.join(file))?)
            .map_err(|e| ScoreError::Corrupt(format!("self-test: {e}")))?;
        let mut worst: f64 = 0.0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let case: SelfTestCase =
                serde_json::from_str(line).map_err(|e| ScoreError::Corrupt(format!("self-test: {e}")))?;
            let actual = self.score(&normalize(&case.text))?.value();
            let dev = (actual - case.score).abs();
            if dev.is_nan() || dev > self.manifest.self_test_tolerance {
                return Err(ScoreError::SelfTest {
                    text: case.text,
                    expected: case.score,
                    actual,
                });
            }
            worst = worst.max(dev);
        }
        Ok(worst)
    }

    fn logits(&self, ids: &[i64]) -> TractResult<Vec<f32>> {
        let n = ids.len();
        let mask = vec![1i64; n];
        let inputs = self
            .feeds
            .iter()
            .map(|f| {
                let data = if *f == Feed::Ids { ids } else { &mask };
                Ok(Tensor::from_shape(&[1, n], data)?.into())
            })
            .collect::<TractResult<TVec<TValue>>>()?;
        let outputs = self.plan.run(inputs)?;
        let view = outputs[0].to_array_view::<f32>()?;
        Ok(view.iter().copied().collect())
    }
}

fn build_plan(bytes: &[u8], manifest: &Manifest) -> TractResult<(Plan, Vec<Feed>)> {
    let mut model = tract_onnx::onnx().model_for_read(&mut std::io::Cursor::new(bytes))?;
    let mut feeds = Vec::new();
    for outlet in model.input_outlets()? {
        let name = &model.node(outlet.node).name;
        if *name == manifest.inputs.input_ids {
            feeds.push(Feed::Ids);
        } else if Some(name) == manifest.inputs.attention_mask.as_ref() {
            feeds.push(Feed::Mask);
        } else {
            anyhow::bail!("graph input {name:?} is not named in the manifest");
        }
    }
    if !feeds.contains(&Feed::Ids) {
        anyhow::bail!("graph has no input named {:?}", manifest.inputs.input_ids);
    }
    model.set_output_names([&manifest.output])?;
    Ok((model.into_optimized()?.into_runnable()?, feeds))
}

/// Softmax probability of `index`, computed in f64.
fn softmax_at(logits: &[f32], index: usize) -> f64 {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let denom: f64 = logits.iter().map(|&l| (l as f64 - max).exp()).sum();
    (logits[index] as f64 - max).exp() / denom
}

impl Scorer for ExportedModelScorer {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, text: &NormalizedText) -> Result<HateScore, ScoreError> {
        let text = text.truncate_words(self.descriptor.max_input_words);
        let ids = self.tokenizer.encode(text.as_str());
        let logits = self.logits(&ids).map_err(|e| ScoreError::Runtime(format!("{e:#}")))?;
        if logits.len() != self.manifest.num_labels {
            return Err(ScoreError::Runtime(format!(
                "expected {} logits, model produced {}",
                self.manifest.num_labels,
                logits.len()
            )));
        }
        HateScore::new(softmax_at(&logits, self.manifest.hate_class_index))
    }
}

/// Miniature mean-pooled sequence classifier: embedding lookup, masked mean
/// over tokens, tanh, then a dense layer to two logits. Its forward pass is
/// plain Rust, independent of the ONNX runtime, so it can produce reference
/// scores for an artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    pub tokenizer: TokenizerSpec,
    /// `vocab_size x hidden`, row-major.
    pub embeddings: Vec<f32>,
    pub hidden: usize,
    /// `hidden x 2`, row-major.
    pub dense: Vec<f32>,
    pub dense_bias: [f32; 2],
}

impl ToyClassifier {
    /// Random weights, with the embeddings of `hate_words` shifted along a
    /// direction the dense layer maps to the hate logit.
    pub fn seeded(vocab: &[&str], hate_words: &[&str], hidden: usize, seed: u64) -> Self {
        let mut full: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].iter().map(|s| s.to_string()).collect();
        full.extend(vocab.iter().map(|s| s.to_string()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut embeddings: Vec<f32> = (0..full.len() * hidden).map(|_| rng.gen_range(-0.3..0.3)).collect();
        for (row, tok) in full.iter().enumerate() {
            if hate_words.contains(&tok.as_str()) {
                embeddings[row * hidden] += 2.0;
            }
        }
        let mut dense: Vec<f32> = (0..hidden * 2).map(|_| rng.gen_range(-0.2..0.2)).collect();
        dense[0] = -1.5;
        dense[1] = 1.5;
        Self {
            tokenizer: TokenizerSpec {
                kind: "wordpiece".into(),
                vocab: full,
                unk_token: "[UNK]".into(),
                cls_token: "[CLS]".into(),
                sep_token: "[SEP]".into(),
                continuation_prefix: "##".into(),
                max_length: 64,
            },
            embeddings,
            hidden,
            dense,
            dense_bias: [0.1, -0.1],
        }
    }

    pub fn logits(&self, ids: &[i64]) -> [f64; 2] {
        let h = self.hidden;
        let mut pooled = vec![0.0f64; h];
        for &id in ids {
            let row = &self.embeddings[id as usize * h..(id as usize + 1) * h];
            for (p, &e) in pooled.iter_mut().zip(row) {
                *p += e as f64;
            }
        }
        let n = ids.len() as f64;
        let act: Vec<f64> = pooled.iter().map(|p| (p / n).tanh()).collect();
        let mut out = [self.dense_bias[0] as f64, self.dense_bias[1] as f64];
        for (j, a) in act.iter().enumerate() {
            out[0] += a * self.dense[j * 2] as f64;
            out[1] += a * self.dense[j * 2 + 1] as f64;
        }
        out
    }

    /// Hate probability for raw text, via the same normalize/tokenize path a
    /// serving scorer uses.
    pub fn hate_probability(&self, raw: &str) -> Result<f64, ScoreError> {
        let tok = WordPieceTokenizer::new(self.tokenizer.clone())?;
        let text = normalize(raw).truncate_words(DEFAULT_MAX_WORDS);
        let [a, b] = self.logits(&tok.encode(text.as_str()));
        Ok(1.0 / (1.0 + (a - b).exp()))
    }

    /// Encodes the classifier as an ONNX graph (opset 11).
    pub fn to_onnx(&self) -> Vec<u8> {
        use pb::tensor_proto::DataType;
        let vocab = self.tokenizer.vocab.len() as i64;
        let h = self.hidden as i64;
        let float_tensor = |name: &str, dims: Vec<i64>, data: &[f32]| pb::TensorProto {
            name: name.into(),
            dims,
            data_type: DataType::Float as i32,
            float_data: data.to_vec(),
            ..Default::default()
        };
        let ints_attr = |name: &str, v: Vec<i64>| pb::AttributeProto {
            name: name.into(),
            r#type: pb::attribute_proto::AttributeType::Ints as i32,
            ints: v,
            ..Default::default()
        };
        let int_attr = |name: &str, v: i64| pb::AttributeProto {
            name: name.into(),
            r#type: pb::attribute_proto::AttributeType::Int as i32,
            i: v,
            ..Default::default()
        };
        let node = |op: &str, inputs: &[&str], output: &str, attrs: Vec<pb::AttributeProto>| pb::NodeProto {
            op_type: op.into(),
            name: output.into(),
            input: inputs.iter().map(|s| s.to_string()).collect(),
            output: vec![output.into()],
            attribute: attrs,
            ..Default::default()
        };
        let value_info = |name: &str, elem: DataType, dims: Vec<pb::tensor_shape_proto::dimension::Value>| {
            pb::ValueInfoProto {
                name: name.into(),
                r#type: Some(pb::TypeProto {
                    value: Some(pb::type_proto::Value::TensorType(pb::type_proto::Tensor {
                        elem_type: elem as i32,
                        shape: Some(pb::TensorShapeProto {
                            dim: dims
                                .into_iter()
                                .map(|v| pb::tensor_shape_proto::Dimension {
                                    value: Some(v),
                                    ..Default::default()
                                })
                                .collect(),
                        }),
                    })),
                    ..Default::default()
                }),
                ..Default::default()
            }
        };
        use pb::tensor_shape_proto::dimension::Value as D;
        let seq = || vec![D::DimValue(1), D::DimParam("S".into())];

        let graph = pb::GraphProto {
            name: "toy_classifier".into(),
            node: vec![
                node("Gather", &["embeddings", "input_ids"], "emb", vec![int_attr("axis", 0)]),
                node("Cast", &["attention_mask"], "mask_f", vec![int_attr("to", DataType::Float as i64)]),
                node("Unsqueeze", &["mask_f"], "mask_3d", vec![ints_attr("axes", vec![2])]),
                node("Mul", &["emb", "mask_3d"], "masked", vec![]),
                node(
                    "ReduceSum",
                    &["masked"],
                    "summed",
                    vec![ints_attr("axes", vec![1]), int_attr("keepdims", 0)],
                ),
                node(
                    "ReduceSum",
                    &["mask_f"],
                    "count",
                    vec![ints_attr("axes", vec![1]), int_attr("keepdims", 1)],
                ),
                node("Div", &["summed", "count"], "pooled", vec![]),
                node("Tanh", &["pooled"], "act", vec![]),
                node("MatMul", &["act", "dense"], "proj", vec![]),
                node("Add", &["proj", "dense_bias"], "logits", vec![]),
            ],
            initializer: vec![
                float_tensor("embeddings", vec![vocab, h], &self.embeddings),
                float_tensor("dense", vec![h, 2], &self.dense),
                float_tensor("dense_bias", vec![2], &self.dense_bias),
            ],
            input: vec![
                value_info("input_ids", DataType::Int64, seq()),
                value_info("attention_mask", DataType::Int64, seq()),
            ],
            output: vec![value_info("logits", DataType::Float, vec![D::DimValue(1), D::DimValue(2)])],
            ..Default::default()
        };
        pb::ModelProto {
            ir_version: 7,
            producer_name: "hatemod-toy".into(),
            opset_import: vec![pb::OperatorSetIdProto {
                domain: String::new(),
                version: 11,
            }],
            graph: Some(graph),
            ..Default::default()
        }
        .encode_to_vec()
    }
}

/// Writes a complete exported-model directory for `model`, recording
/// self-test scores for `self_test_texts` from the plain-Rust forward pass.
pub fn write_toy_artifact(
    dir: impl AsRef<Path>,
    model: &ToyClassifier,
    scorer_version: &str,
    self_test_texts: &[&str],
) -> Result<Manifest, ScoreError> {
    let dir = dir.as_ref();
    let io = |e: std::io::Error| ScoreError::Corrupt(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join("model.onnx"), model.to_onnx()).map_err(io)?;
    fs::write(
        dir.join("tokenizer.json"),
        serde_json::to_vec_pretty(&model.tokenizer).expect("tokenizer spec serializes"),
    )
    .map_err(io)?;
    let mut lines = String::new();
    for text in self_test_texts {
        let case = SelfTestCase {
            text: text.to_string(),
            score: model.hate_probability(text)?,
        };
        lines.push_str(&serde_json::to_string(&case).expect("self-test case serializes"));
        lines.push('\n');
    }
    fs::write(dir.join(SELF_TEST_FILE), lines).map_err(io)?;
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        scorer_version: scorer_version.into(),
        model_file: default_model_file(),
        tokenizer_file: default_tokenizer_file(),
        self_test_file: Some(SELF_TEST_FILE.into()),
        self_test_tolerance: default_tolerance(),
        inputs: InputNames {
            input_ids: "input_ids".into(),
            attention_mask: Some("attention_mask".into()),
        },
        output: "logits".into(),
        num_labels: 2,
        hate_class_index: 1,
        max_input_words: DEFAULT_MAX_WORDS,
        weights_form: Some("merged".into()),
        geometry: serde_json::json!({ "kind": "toy_mean_pool", "hidden": model.hidden, "vocab": model.tokenizer.vocab.len() }),
        lora: serde_json::Value::Null,
        train_config_digest: None,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(io)?;
    Ok(manifest)
}
