//! Multitask pretraining of user and item embeddings over task hypergraphs.
//!
//! Pretext tasks (recommendation, relation prediction, attribute prediction)
//! are all expressed as hypergraphs over users or items. Auxiliary tasks are
//! encoded with parameter-free hypergraph convolution, and a transitional
//! attention layer fuses their node embeddings into the recommendation
//! hyperedges. The only trainable parameters are the user and item
//! embedding tables, which are then finetuned through a single convolution
//! layer and evaluated with Recall@K / NDCG@K.

pub mod adam;
pub mod backward;
pub mod error;
pub mod hypergraph;
pub mod io;
pub mod losses;
pub mod matrix;
pub mod model;
pub mod objective;
pub mod pipeline;
pub mod tasks;

pub use error::{Error, Result};
pub use hypergraph::Hypergraph;
pub use matrix::EmbeddingMatrix;
pub use model::{EmbeddingTable, Model, ModelConfig, Params, TaConfig, TaVariant};
pub use tasks::{NodeSide, TaskHypergraph, TaskKind};
