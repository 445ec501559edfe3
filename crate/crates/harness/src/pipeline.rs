//! Ratings → completed matrix → item similarity graph, with an on-disk cache.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use specband_core::ratings::{read_completed_cache, write_completed_cache, write_item_features};
use specband_core::{
    build_knn_graph, complete_low_rank, AlsOptions, CompletedMatrix64, RatingsTable64, Similarity, WeightedGraph64,
};

use crate::error::{IoContext, Result};

pub struct PreparedRatings {
    pub table: RatingsTable64,
    pub completed: CompletedMatrix64,
    pub graph: WeightedGraph64,
    /// Where the completed matrix was read from or written to, if caching was enabled.
    pub cache_path: Option<PathBuf>,
    pub cache_hit: bool,
}

/// Hex SHA-256 over the ratings file contents and the completion parameters.
pub fn cache_key(file_bytes: &[u8], opts: &AlsOptions) -> String {
    let mut h = Sha256::new();
    h.update(file_bytes);
    h.update((opts.rank as u64).to_le_bytes());
    h.update(opts.reg.to_le_bytes());
    h.update((opts.iters as u64).to_le_bytes());
    h.update(opts.seed.to_le_bytes());
    hex::encode(h.finalize())
}

pub fn prepare_ratings(
    path: &Path,
    opts: AlsOptions,
    k: usize,
    similarity: Similarity,
    cache_dir: Option<&Path>,
) -> Result<PreparedRatings> {
    let bytes = std::fs::read(path).at(path)?;
    let table = RatingsTable64::from_reader(bytes.as_slice())?;
    let cache_path = cache_dir.map(|d| d.join(format!("completed-{}.bin", &cache_key(&bytes, &opts)[..16])));

    let mut cache_hit = false;
    let completed = match &cache_path {
        Some(p) if p.exists() => {
            log::info!("reading completed matrix from {}", p.display());
            cache_hit = true;
            read_completed_cache(BufReader::new(File::open(p).at(p)?))?
        }
        _ => {
            let m = complete_low_rank(&table, opts)?;
            if let Some(p) = &cache_path {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir).at(dir)?;
                }
                write_completed_cache(&m, BufWriter::new(File::create(p).at(p)?)).at(p)?;
            }
            m
        }
    };
    let graph = build_knn_graph(&completed.item_factors, k, similarity)?;
    Ok(PreparedRatings {
        table,
        completed,
        graph,
        cache_path,
        cache_hit,
    })
}

pub fn write_features_csv(prepared: &PreparedRatings, path: &Path) -> Result<()> {
    let f = BufWriter::new(File::create(path).at(path)?);
    write_item_features(&prepared.table, &prepared.completed, f).at(path)
}
