//! Exact vector indices: a flat scan index and an id-sharded composite.
//!
//! Scores are squared L2 distance (ascending is better) or inner product
//! (descending is better). Equal scores are ordered by ascending id, which
//! makes sharded and flat search return identical lists.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::embedder::{dot, l2_sq, Embedding};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    #[default]
    Ip,
}

impl Metric {
    pub fn score(self, a: &[f32], b: &[f32]) -> f32 {
        match self {
            Metric::L2 => l2_sq(a, b),
            Metric::Ip => dot(a, b),
        }
    }

    /// `Less` when `a` ranks before `b`.
    pub fn rank(self, a: &SearchHit, b: &SearchHit) -> Ordering {
        let by_score = match self {
            Metric::L2 => a.score.total_cmp(&b.score),
            Metric::Ip => b.score.total_cmp(&a.score),
        };
        by_score.then(a.id.cmp(&b.id))
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::Ip => "ip",
        }
    }

    fn code(self) -> u8 {
        match self {
            Metric::L2 => 0,
            Metric::Ip => 1,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Metric::L2),
            "ip" => Ok(Metric::Ip),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?} (l2|ip)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: u64,
    pub score: f32,
}

/// Keep the best `k` hits, sorted best-first.
pub fn select_top_k(mut hits: Vec<SearchHit>, k: usize, metric: Metric) -> Vec<SearchHit> {
    if k == 0 {
        return Vec::new();
    }
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, |a, b| metric.rank(a, b));
        hits.truncate(k);
    }
    hits.sort_unstable_by(|a, b| metric.rank(a, b));
    hits
}

/// Merge per-partition top-k lists into a global top-k.
pub fn merge_top_k(parts: Vec<Vec<SearchHit>>, k: usize, metric: Metric) -> Vec<SearchHit> {
    select_top_k(parts.into_iter().flatten().collect(), k, metric)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    metric: Metric,
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    rows: HashMap<u64, usize>,
}

/// Minimum rows per task in a parallel scan.
const SCAN_CHUNK: usize = 1024;

impl FlatIndex {
    pub fn new(dim: usize, metric: Metric) -> Self {
        Self {
            metric,
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            rows: HashMap::new(),
        }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.rows.contains_key(&id)
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f32])> + '_ {
        self.ids.iter().enumerate().map(|(r, &id)| (id, self.vector(r)))
    }

    pub fn get(&self, id: u64) -> Option<&[f32]> {
        self.rows.get(&id).map(|&r| self.vector(r))
    }

    /// Insert a batch atomically: the index is unchanged when any item is rejected.
    pub fn add_batch(&mut self, items: &[(u64, Embedding)]) -> Result<()> {
        let mut seen = HashSet::with_capacity(items.len());
        for (id, v) in items {
            if v.dim() != self.dim {
                return Err(Error::Shape {
                    expected: self.dim,
                    actual: v.dim(),
                });
            }
            if self.rows.contains_key(id) || !seen.insert(*id) {
                return Err(Error::DuplicateId(*id));
            }
        }
        self.ids.reserve(items.len());
        self.data.reserve(items.len() * self.dim);
        for (id, v) in items {
            self.rows.insert(*id, self.ids.len());
            self.ids.push(*id);
            self.data.extend_from_slice(v.as_slice());
        }
        Ok(())
    }

    fn check_query(&self, query: &[f32]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(())
    }

    fn scan(&self, query: &[f32], k: usize, rows: std::ops::Range<usize>) -> Vec<SearchHit> {
        let hits = rows
            .map(|r| SearchHit {
                id: self.ids[r],
                score: self.metric.score(query, self.vector(r)),
            })
            .collect();
        select_top_k(hits, k, self.metric)
    }

    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
        self.search_with(query, k, Exec::default())
    }

    /// Exact top-k. With [`Exec::Parallel`] the scan is split into row ranges
    /// whose local top-k lists are merged.
    pub fn search_with(&self, query: &[f32], k: usize, exec: Exec) -> Result<Vec<SearchHit>> {
        self.check_query(query)?;
        if k == 0 || self.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.len();
        let width = exec.width();
        if width == 1 || n < 2 * SCAN_CHUNK {
            return Ok(self.scan(query, k, 0..n));
        }
        let chunk = n.div_ceil(width).max(SCAN_CHUNK);
        let starts: Vec<usize> = (0..n).step_by(chunk).collect();
        let parts = exec.map(&starts, |&s| self.scan(query, k, s..(s + chunk).min(n)));
        Ok(merge_top_k(parts, k, self.metric))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardedIndex {
    shards: Vec<FlatIndex>,
}

impl ShardedIndex {
    pub fn new(dim: usize, metric: Metric, shard_count: usize) -> Result<Self> {
        if shard_count == 0 {
            return Err(Error::InvalidArgument("shard_count must be >= 1".into()));
        }
        Ok(Self {
            shards: (0..shard_count).map(|_| FlatIndex::new(dim, metric)).collect(),
        })
    }

    /// Default assignment: `id mod shard_count`.
    pub fn shard_of(&self, id: u64) -> usize {
        (id % self.shards.len() as u64) as usize
    }

    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    pub fn shards(&self) -> &[FlatIndex] {
        &self.shards
    }

    pub fn shards_mut(&mut self) -> &mut [FlatIndex] {
        &mut self.shards
    }

    pub fn into_shards(self) -> Vec<FlatIndex> {
        self.shards
    }

    pub fn from_shards(shards: Vec<FlatIndex>) -> Result<Self> {
        let first = shards
            .first()
            .ok_or_else(|| Error::InvalidArgument("shard_count must be >= 1".into()))?;
        let (dim, metric) = (first.dim(), first.metric());
        if shards.iter().any(|s| s.dim() != dim || s.metric() != metric) {
            return Err(Error::InvalidArgument("shards disagree on dim or metric".into()));
        }
        Ok(Self { shards })
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(FlatIndex::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metric(&self) -> Metric {
        self.shards[0].metric()
    }

    pub fn dim(&self) -> usize {
        self.shards[0].dim()
    }

    pub fn add_batch(&mut self, items: &[(u64, Embedding)]) -> Result<()> {
        let n = self.shards.len();
        let mut per_shard: Vec<Vec<(u64, Embedding)>> = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(items.len());
        for (id, v) in items {
            if v.dim() != self.dim() {
                return Err(Error::Shape {
                    expected: self.dim(),
                    actual: v.dim(),
                });
            }
            let s = self.shard_of(*id);
            if self.shards[s].contains(*id) || !seen.insert(*id) {
                return Err(Error::DuplicateId(*id));
            }
            per_shard[s].push((*id, v.clone()));
        }
        for (shard, batch) in self.shards.iter_mut().zip(per_shard) {
            shard.add_batch(&batch)?;
        }
        Ok(())
    }

    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
        self.search_with(query, k, Exec::default())
    }

    /// Broadcast the query, take a local top-k per shard, then reduce.
    pub fn search_with(&self, query: &[f32], k: usize, exec: Exec) -> Result<Vec<SearchHit>> {
        self.shards[0].check_query(query)?;
        let parts: Result<Vec<_>> = exec
            .map(&self.shards, |s| s.search_with(query, k, Exec::Serial))
            .into_iter()
            .collect();
        Ok(merge_top_k(parts?, k, self.metric()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorIndex {
    Flat(FlatIndex),
    Sharded(ShardedIndex),
}

impl VectorIndex {
    pub fn flat(dim: usize, metric: Metric) -> Self {
        VectorIndex::Flat(FlatIndex::new(dim, metric))
    }

    pub fn sharded(dim: usize, metric: Metric, shards: usize) -> Result<Self> {
        Ok(VectorIndex::Sharded(ShardedIndex::new(dim, metric, shards)?))
    }

    pub fn len(&self) -> usize {
        match self {
            VectorIndex::Flat(f) => f.len(),
            VectorIndex::Sharded(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorIndex::Flat(f) => f.dim(),
            VectorIndex::Sharded(s) => s.dim(),
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            VectorIndex::Flat(f) => f.metric(),
            VectorIndex::Sharded(s) => s.metric(),
        }
    }

    pub fn add_batch(&mut self, items: &[(u64, Embedding)]) -> Result<()> {
        match self {
            VectorIndex::Flat(f) => f.add_batch(items),
            VectorIndex::Sharded(s) => s.add_batch(items),
        }
    }

    pub fn get(&self, id: u64) -> Option<&[f32]> {
        match self {
            VectorIndex::Flat(f) => f.get(id),
            VectorIndex::Sharded(s) => s.shards[s.shard_of(id)].get(id),
        }
    }

    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
        match self {
            VectorIndex::Flat(f) => f.search(query, k),
            VectorIndex::Sharded(s) => s.search(query, k),
        }
    }

    pub fn search_with(&self, query: &[f32], k: usize, exec: Exec) -> Result<Vec<SearchHit>> {
        match self {
            VectorIndex::Flat(f) => f.search_with(query, k, exec),
            VectorIndex::Sharded(s) => s.search_with(query, k, exec),
        }
    }

    /// Split into independently lockable partitions (a flat index is one).
    pub fn into_partitions(self) -> Vec<FlatIndex> {
        match self {
            VectorIndex::Flat(f) => vec![f],
            VectorIndex::Sharded(s) => s.into_shards(),
        }
    }

    /// Rebuild from partitions produced by [`VectorIndex::into_partitions`].
    pub fn from_partitions(mut parts: Vec<FlatIndex>, sharded: bool) -> Result<Self> {
        if sharded {
            Ok(VectorIndex::Sharded(ShardedIndex::from_shards(parts)?))
        } else if parts.len() == 1 {
            Ok(VectorIndex::Flat(parts.pop().expect("one partition")))
        } else {
            Err(Error::InvalidArgument("flat index must have one partition".into()))
        }
    }

    /// All entries sorted by id.
    pub fn entries_by_id(&self) -> Vec<(u64, Vec<f32>)> {
        let mut out: Vec<(u64, Vec<f32>)> = match self {
            VectorIndex::Flat(f) => f.iter().map(|(id, v)| (id, v.to_vec())).collect(),
            VectorIndex::Sharded(s) => s
                .shards()
                .iter()
                .flat_map(|f| f.iter().map(|(id, v)| (id, v.to_vec())))
                .collect(),
        };
        out.sort_unstable_by_key(|(id, _)| *id);
        out
    }
}

/// Split pending upserts into batches of exactly `target` (last may be short),
/// preserving order.
pub fn coalesce_upserts<T>(pending: Vec<T>, target: usize) -> Result<Vec<Vec<T>>> {
    if target == 0 {
        return Err(Error::InvalidArgument("coalesce target must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(pending.len().div_ceil(target));
    let mut it = pending.into_iter().peekable();
    while it.peek().is_some() {
        out.push(it.by_ref().take(target).collect());
    }
    Ok(out)
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"AGVX";

/// Write `magic | dim u32 | metric u8 | count u64` then `(id u64, dim x f32)`
/// records, all little-endian, entries sorted by id.
pub fn write_snapshot<W: Write>(index: &VectorIndex, mut w: W) -> Result<()> {
    let entries = index.entries_by_id();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(index.dim() as u32).to_le_bytes())?;
    w.write_all(&[index.metric().code()])?;
    w.write_all(&(entries.len() as u64).to_le_bytes())?;
    for (id, v) in &entries {
        w.write_all(&id.to_le_bytes())?;
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<FlatIndex> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b1)?;
    let metric = match b1[0] {
        0 => Metric::L2,
        1 => Metric::Ip,
        m => return Err(Error::Snapshot(format!("unknown metric code {m}"))),
    };
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut index = FlatIndex::new(dim, metric);
    let mut batch = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        let id = u64::from_le_bytes(b8);
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut b4)?;
            values.push(f32::from_le_bytes(b4));
        }
        batch.push((id, Embedding::new(values)));
    }
    index.add_batch(&batch)?;
    Ok(index)
}
