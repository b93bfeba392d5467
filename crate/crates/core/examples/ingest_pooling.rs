//! Pool chunk vectors into document embeddings, attach targets, split and
//! round-trip through the binary format.

use dimsweep::ingest::{
    apply_split, load_embedding_file, pool_records, save_embedding_file, ChunkedEmbeddingRecord,
    PoolMode, SplitSpec,
};
use dimsweep::{EmbeddingDataset, RngSeed};

fn main() -> dimsweep::Result<()> {
    let records: Vec<ChunkedEmbeddingRecord> = (0..40)
        .map(|i| {
            let chunks = 1 + i % 3;
            ChunkedEmbeddingRecord {
                doc_id: format!("doc{i:03}"),
                chunk_vectors: (0..chunks).map(|c| vec![i as f64, c as f64, 1.0]).collect(),
                token_counts: (0..chunks)
                    .map(|c| if c + 1 == chunks { 100 } else { 512 })
                    .collect(),
            }
        })
        .collect();

    let (ids, weighted) = pool_records(&records, PoolMode::TokenWeighted)?;
    let (_, flat) = pool_records(&records, PoolMode::Flat)?;
    println!(
        "doc002: token-weighted {:?} vs flat {:?}",
        weighted.row(2).to_vec(),
        flat.row(2).to_vec()
    );

    let targets = (0..ids.len()).map(|i| (i as f64 * 0.1).sin()).collect();
    let ds = EmbeddingDataset::new(weighted, targets, "pooled example")?.with_doc_ids(ids)?;
    let ds = apply_split(&ds, &SplitSpec::random(0.8, 0.1, 0.1, RngSeed(1)))?;

    let dir = std::env::temp_dir().join("dimsweep-ingest-example");
    std::fs::create_dir_all(&dir).map_err(|e| dimsweep::Error::io(&dir, e))?;
    let path = dir.join("pooled.bin");
    save_embedding_file(&path, &ds)?;
    let back = load_embedding_file(&path)?;
    let err = (back.features() - ds.features())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    // values are stored as f32
    println!(
        "round trip {} rows x {} dims, max abs change {err:.2e}",
        back.len(),
        back.dim()
    );
    Ok(())
}
