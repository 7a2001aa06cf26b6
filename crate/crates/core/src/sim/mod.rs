//! Synthetic natural speech and loudspeaker replay.

pub mod channel;
pub mod dataset;
pub mod speech;

pub use channel::{default_channels, simulate_replay, Bandpass, ChannelConfig, ChannelError, Reverb};
pub use dataset::{build_synthetic_dataset, read_channels, DatasetSpec, SimError};
pub use speech::{synth_speech, synth_voice, VoiceProfile};
