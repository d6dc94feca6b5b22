//! Synthetic corpus generation, loading and delimiter splitting.
//!
//! Files are named `doc_{i:05}.txt` and hold `nodes_in_file` random ASCII
//! nodes joined by the delimiter. The alphabet excludes every byte that
//! occurs in the delimiter, so splitting recovers exactly the generated nodes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DELIMITER: &str = "<<<NODE>>>";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Elliptical follow-up shared by every conversational case.
pub const FOLLOWUP_QUERY: &str = "what is its main property";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub total_nodes: usize,
    pub file_count: usize,
    pub node_chars: usize,
    pub delimiter: String,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            total_nodes: 20_000,
            file_count: 200,
            node_chars: 800,
            delimiter: DEFAULT_DELIMITER.to_string(),
            seed: 42,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.file_count == 0 {
            return Err(Error::InvalidArgument("file_count must be >= 1".into()));
        }
        if self.total_nodes < self.file_count {
            return Err(Error::InvalidArgument(format!(
                "total_nodes ({}) must be >= file_count ({})",
                self.total_nodes, self.file_count
            )));
        }
        if self.node_chars == 0 {
            return Err(Error::InvalidArgument("node_chars must be >= 1".into()));
        }
        if self.delimiter.is_empty() {
            return Err(Error::InvalidArgument("delimiter must be non-empty".into()));
        }
        if self.alphabet().is_empty() {
            return Err(Error::InvalidArgument(
                "delimiter covers the whole printable ASCII alphabet".into(),
            ));
        }
        Ok(())
    }

    /// Nodes per file: `floor(N/F)` each, the first `N mod F` files get one more.
    pub fn node_distribution(&self) -> Vec<usize> {
        let base = self.total_nodes / self.file_count;
        let extra = self.total_nodes % self.file_count;
        (0..self.file_count).map(|i| base + usize::from(i < extra)).collect()
    }

    /// Printable ASCII minus every byte occurring in the delimiter.
    pub fn alphabet(&self) -> Vec<u8> {
        let banned = self.delimiter.as_bytes();
        (0x20u8..=0x7e).filter(|b| !banned.contains(b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub nodes: usize,
}

/// On-disk description of a generated corpus. File names are relative to
/// `root`, which is resolved from the manifest location and never serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub spec: CorpusSpec,
    pub files: Vec<ManifestFile>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn empty(spec: CorpusSpec) -> Self {
        Self {
            spec,
            files: Vec::new(),
            root: PathBuf::new(),
        }
    }

    pub fn total_nodes(&self) -> usize {
        self.files.iter().map(|f| f.nodes).sum()
    }

    pub fn path_of(&self, doc_index: usize) -> PathBuf {
        self.root.join(&self.files[doc_index].name)
    }

    /// Global id of the first chunk of every file.
    pub fn first_chunk_ids(&self) -> Vec<u64> {
        let mut next = 0u64;
        self.files
            .iter()
            .map(|f| {
                let first = next;
                next += f.nodes as u64;
                first
            })
            .collect()
    }

    pub fn save(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json).map_err(|source| Error::Generation {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: CorpusManifest = serde_json::from_str(&raw)?;
        manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_index: usize,
    pub path: PathBuf,
    pub raw_text: String,
    /// Global id assigned to this document's first chunk.
    pub first_chunk_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_id: u64,
    pub doc_index: usize,
    pub chunk_index: usize,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}

fn random_node(rng: &mut ChaCha8Rng, alphabet: &[u8], len: usize, out: &mut String) {
    out.extend((0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())] as char));
}

/// Render the text of every file without touching the filesystem.
pub fn render_corpus(spec: &CorpusSpec) -> Result<Vec<String>> {
    spec.validate()?;
    let alphabet = spec.alphabet();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(spec
        .node_distribution()
        .into_iter()
        .map(|nodes| {
            let mut text = String::with_capacity(nodes * (spec.node_chars + spec.delimiter.len()));
            for n in 0..nodes {
                if n > 0 {
                    text.push_str(&spec.delimiter);
                }
                random_node(&mut rng, &alphabet, spec.node_chars, &mut text);
            }
            text
        })
        .collect())
}

pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<CorpusManifest> {
    let texts = render_corpus(spec)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Generation {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::with_capacity(texts.len());
    for ((i, text), nodes) in texts.iter().enumerate().zip(spec.node_distribution()) {
        let name = format!("doc_{i:05}.txt");
        let path = out_dir.join(&name);
        fs::write(&path, text).map_err(|source| Error::Generation { path, source })?;
        files.push(ManifestFile { name, nodes });
    }
    let manifest = CorpusManifest {
        spec: spec.clone(),
        files,
        root: out_dir.to_path_buf(),
    };
    manifest.save()?;
    Ok(manifest)
}

fn read_document(manifest: &CorpusManifest, doc_index: usize, first_chunk_id: u64) -> Result<Document> {
    let path = manifest.path_of(doc_index);
    let raw_text = fs::read_to_string(&path).map_err(|source| Error::Load {
        path: path.clone(),
        source,
    })?;
    Ok(Document {
        doc_index,
        path,
        raw_text,
        first_chunk_id,
    })
}

/// Load one document by index; used by pipeline loaders that stream files.
pub fn load_document(manifest: &CorpusManifest, doc_index: usize) -> Result<Document> {
    let first = manifest.files[..doc_index].iter().map(|f| f.nodes as u64).sum();
    read_document(manifest, doc_index, first)
}

/// Read every file of the manifest, fanning out over `reader_workers` threads.
/// The result is always ordered by `doc_index`.
pub fn load_documents(manifest: &CorpusManifest, reader_workers: usize) -> Result<Vec<Document>> {
    let firsts = manifest.first_chunk_ids();
    let n = manifest.files.len();
    let workers = reader_workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(|i| read_document(manifest, i, firsts[i])).collect();
    }

    let slots: Vec<Mutex<Option<Result<Document>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let doc = read_document(manifest, i, firsts[i]);
                *slots[i].lock().expect("slot lock") = Some(doc);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

/// Split a document into chunks. Always yields `occurrences + 1` chunks, so an
/// empty document becomes a single empty chunk.
pub fn split_by_delimiter(doc: &Document, delimiter: &str) -> Vec<ChunkRecord> {
    let path = doc.path.display().to_string();
    doc.raw_text
        .split(delimiter)
        .enumerate()
        .map(|(chunk_index, text)| {
            let mut metadata = BTreeMap::new();
            metadata.insert("doc_index".to_string(), doc.doc_index.to_string());
            metadata.insert("chunk_index".to_string(), chunk_index.to_string());
            metadata.insert("source".to_string(), path.clone());
            ChunkRecord {
                chunk_id: doc.first_chunk_id + chunk_index as u64,
                doc_index: doc.doc_index,
                chunk_index,
                text: text.to_string(),
                metadata,
            }
        })
        .collect()
}

/// Inverse of [`split_by_delimiter`] on a single document's chunks.
pub fn join_chunks(chunks: &[ChunkRecord], delimiter: &str) -> String {
    chunks
        .iter()
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join(delimiter)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationCase {
    pub case_id: usize,
    pub turn1_query: String,
    pub followup_query: String,
    pub gold_chunk_id: u64,
    pub session_id: String,
    pub topic_token: String,
}

/// Cases plus the knowledge base they were injected into.
#[derive(Debug, Clone)]
pub struct ConversationSet {
    pub cases: Vec<ConversationCase>,
    pub chunks: Vec<ChunkRecord>,
}

pub fn topic_token(case_id: usize, seed: u64) -> String {
    format!("topic_{case_id}_{seed}")
}

/// Pick `n_cases` distinct gold chunks and write a unique topic token at the
/// head of each. The returned chunks keep their original lengths.
pub fn build_conversational_cases(chunks: &[ChunkRecord], n_cases: usize, seed: u64) -> Result<ConversationSet> {
    if n_cases > chunks.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {n_cases} cases but only {} chunks exist",
            chunks.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, chunks.len(), n_cases).into_vec();
    let mut out = chunks.to_vec();
    let mut cases = Vec::with_capacity(n_cases);
    for (case_id, pos) in picks.into_iter().enumerate() {
        let token = topic_token(case_id, seed);
        let chunk = &mut out[pos];
        let len = chunk.text.len();
        if len < token.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "chunk of {len} chars cannot hold topic token {token}"
            )));
        }
        chunk.text = format!("{token} {}", &chunk.text[token.len() + 1..]);
        chunk.metadata.insert("topic".into(), token.clone());
        cases.push(ConversationCase {
            case_id,
            turn1_query: format!("tell me about {token}"),
            followup_query: FOLLOWUP_QUERY.to_string(),
            gold_chunk_id: chunk.chunk_id,
            session_id: format!("session_{case_id}"),
            topic_token: token,
        });
    }
    Ok(ConversationSet { cases, chunks: out })
}
