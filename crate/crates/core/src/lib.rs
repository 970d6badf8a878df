//! Building blocks for a small conversational-assistant stack.
//!
//! - [`corpus`]: turns exported conversation records into a clean, anonymized
//!   and filtered training corpus.
//! - [`metrics`]: BLEU, ROUGE-N, distinct-n, sentence coherence and perplexity.
//! - [`train`]: the fine-tuning control loop (schedules, Adam, LoRA, gradient
//!   accumulation, loss scaling, early stopping, staged unfreezing, random
//!   search) exercised on a two-layer bigram language model.

pub mod corpus;
pub mod metrics;
pub mod train;
