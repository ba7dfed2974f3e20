//! Shared fixtures for the lip-sync test suites: an independent WAV writer,
//! synthetic vowel generators and brute-force reference transforms.

pub mod reference;
pub mod synth;
pub mod wav;
