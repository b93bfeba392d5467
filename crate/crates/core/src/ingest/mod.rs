//! Getting data in: interchange file formats, chunk pooling, returns
//! targets and split assignment.

pub mod format;
pub mod pool;
pub mod returns;
pub mod split;

pub use format::{
    align_rows, decode_embeddings, encode_embeddings, load_chunked, load_embedding_file,
    load_embedding_pair, load_feature_file, read_embeddings, read_targets, save_embedding_file,
    write_embeddings, write_targets, TargetRecord,
};
pub use pool::{pool_chunks, pool_records, ChunkedEmbeddingRecord, PoolMode};
pub use returns::{build_returns, compute_return, read_prices, PriceRow, ReturnsRow};
pub use split::{apply_split, SplitSpec, ValidationRule};
