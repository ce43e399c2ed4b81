//! Token datasets: the synthetic tone corpus, manifests and WAV ingestion.

mod dataset;
mod synth;
mod wav;

pub use dataset::{generate_dataset, split_assignment, write_dataset, Dataset, Entry, Split, MANIFEST};
pub use synth::{class_frequency, synth_corpus, synth_waveform, Family, MAX_CLASSES, SAMPLE_RATE};
pub use wav::{encode_chunks, ingest_wav, WavFile};
