//! Sentence records, their JSON Lines container, vocabularies, encoding,
//! batching and the synthetic corpus generator.

mod batch;
mod encode;
mod example;
mod synthetic;
mod vocab;

pub use batch::{batch_iter, Batches};
pub use encode::{encode_sentence, EncodedSentence, DEFAULT_MAX_LEN};
pub use example::{
    parse_jsonl, parse_jsonl_str, parse_jsonl_unlabeled, parse_jsonl_unlabeled_str, write_jsonl, Edge, SentenceExample,
    Trigger,
};
pub use synthetic::{
    find_ambiguous_pairs, generate_synthetic, is_ambiguous_pair, SyntheticConfig,
    SyntheticCorpus, SyntheticSplit, DEP_LABELS, EVENT_TYPES,
};
pub use vocab::{build_vocabs, Vocab, Vocabs, NONE_EVENT, UNK};
