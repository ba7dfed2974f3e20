use std::sync::Arc;

use lipsync_core::audio::{parse_wav, AudioClip};
use lipsync_core::classifier::{
    calibrate, classify_stream, cosine_similarity, score_frame, scores_to_weights,
    PhonemeProfile,
};
use lipsync_core::mfcc::{compute_mfcc, MfccConfig};
use lipsync_core::pipeline::{analyze_clip, LiveAnalyzer};
use lipsync_core::track::{bake, VisemeTrack};
use lipsync_testkit::synth::{self, random_chunking, VOWELS};
use lipsync_testkit::wav::mono_pcm16;

fn clip(samples: Vec<f64>) -> AudioClip {
    AudioClip::from_samples(16_000, samples).unwrap()
}

fn vowel_profile() -> PhonemeProfile {
    let clips: Vec<(String, AudioClip)> = VOWELS
        .iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), clip(synth::vowel(v, 1.0, 16_000, 100 + i as u64))))
        .collect();
    calibrate(&clips, &MfccConfig::default(), 0.01).unwrap()
}

#[test]
fn templates_are_pairwise_distinct() {
    let p = vowel_profile();
    for (i, a) in p.templates.iter().enumerate() {
        for b in &p.templates[i + 1..] {
            let sim = cosine_similarity(&a.template, &b.template);
            assert!(sim < 0.9, "{} vs {}: {sim}", a.label, b.label);
        }
    }
}

#[test]
fn held_out_vowels_classify_correctly() {
    let p = vowel_profile();
    for (i, v) in VOWELS.iter().enumerate() {
        let frames = compute_mfcc(&clip(synth::vowel(v, 1.0, 16_000, 900 + i as u64)), &p.mfcc_config).unwrap();
        let weights = classify_stream(&frames, &p).unwrap();
        let voiced: Vec<_> = frames
            .iter()
            .zip(&weights)
            .filter(|(f, _)| f.rms >= p.silence_rms_threshold)
            .collect();
        let correct = voiced.iter().filter(|(_, w)| w.argmax() == Some(*v)).count();
        let rate = correct as f64 / voiced.len() as f64;
        assert!(rate >= 0.9, "{v}: {rate}");
    }
}

#[test]
fn vowel_switch_follows_unsmoothed_boundary() {
    let p = vowel_profile();
    let mut signal = synth::vowel("a", 1.0, 16_000, 41);
    signal.extend(synth::vowel("e", 1.0, 16_000, 42));
    let frames = compute_mfcc(&clip(signal), &p.mfcc_config).unwrap();
    // Oracle: first frame whose unsmoothed argmax is "e".
    let raw_switch = frames
        .iter()
        .find(|f| {
            let s = score_frame(f, &p).unwrap();
            scores_to_weights(&s, p.sharpening_exponent, f.timestamp).argmax() == Some("e")
        })
        .unwrap()
        .timestamp;
    let smoothed = classify_stream(&frames, &p).unwrap();
    let switch = smoothed
        .iter()
        .find(|w| w.argmax() == Some("e"))
        .unwrap()
        .timestamp;
    assert!(switch >= raw_switch);
    assert!(switch - raw_switch <= 3.0 * p.smoothing_time_constant, "{raw_switch} -> {switch}");
    assert!(smoothed.iter().take_while(|w| w.timestamp < raw_switch).all(|w| w.argmax() == Some("a")));
}

#[test]
fn loudness_does_not_change_scores() {
    let p = vowel_profile();
    let base: Vec<f64> = synth::vowel("o", 0.5, 16_000, 7).iter().map(|s| s * 0.4).collect();
    let ref_frames = compute_mfcc(&clip(base.clone()), &p.mfcc_config).unwrap();
    for c in [0.5, 2.0] {
        let frames = compute_mfcc(&clip(base.iter().map(|s| s * c).collect()), &p.mfcc_config).unwrap();
        for (a, b) in ref_frames.iter().zip(&frames) {
            let sa = score_frame(a, &p).unwrap();
            let sb = score_frame(b, &p).unwrap();
            for (x, y) in sa.values().zip(sb.values()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn weights_normalise_per_frame() {
    let p = vowel_profile();
    let mut signal = vec![0.0; 8_000];
    signal.extend(synth::vowel("i", 0.5, 16_000, 3));
    signal.extend(vec![0.0; 8_000]);
    let analysis = analyze_clip(&clip(signal), &p).unwrap();
    for (f, w) in &analysis {
        assert!(w.weights.values().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(w.sum() <= 1.0 + 1e-9);
        if f.rms == 0.0 && w.timestamp < 0.4 {
            assert_eq!(w.sum(), 0.0);
        }
    }
    // Unsmoothed weights carry the normalisation exactly; smoothing only
    // blends between normalised (or all-zero) vectors.
    for (f, _) in &analysis {
        let raw = scores_to_weights(&score_frame(f, &p).unwrap(), p.sharpening_exponent, f.timestamp);
        if f.rms >= p.silence_rms_threshold {
            assert!((raw.sum() - 1.0).abs() < 1e-9);
        } else {
            assert_eq!(raw.sum(), 0.0);
        }
    }
}

#[test]
fn silence_bakes_to_zero_track() {
    let p = vowel_profile();
    let wav = mono_pcm16(16_000, &vec![0.0; 16_000]);
    let track = bake(&wav, &p).unwrap();
    assert_eq!(track.frames.len(), 59);
    assert!(track.frames.iter().all(|f| f.weights.values().all(|&w| w == 0.0)));
    assert_eq!(track.labels, VOWELS.iter().map(|s| s.to_string()).collect::<Vec<_>>());
}

#[test]
fn bake_is_deterministic_and_round_trips() {
    let p = vowel_profile();
    let mut signal = synth::vowel("u", 0.7, 16_000, 1);
    signal.extend(synth::vowel("a", 0.7, 16_000, 2));
    let wav = mono_pcm16(16_000, &signal);
    let a = bake(&wav, &p).unwrap().serialize();
    let b = bake(&wav, &p).unwrap().serialize();
    assert_eq!(a, b);
    let track = bake(&wav, &p).unwrap();
    let back = VisemeTrack::deserialize(&a).unwrap();
    for (i, frame) in track.frames.iter().enumerate() {
        let sampled = back.sample_at(frame.timestamp).unwrap();
        for (label, w) in &frame.weights {
            assert!((sampled.weights[label] - w).abs() <= 1e-6, "frame {i} {label}");
        }
    }
    let clip = parse_wav(&wav).unwrap();
    assert_eq!(track.audio_digest, clip.source_digest());
    assert_eq!(track.profile_digest, p.digest());
    assert_eq!(track.frames.len(), compute_mfcc(&clip, &p.mfcc_config).unwrap().len());
}

#[test]
fn vowel_track_is_dominated_by_its_label() {
    let p = vowel_profile();
    let wav = mono_pcm16(16_000, &synth::vowel("a", 1.0, 16_000, 77));
    let track = bake(&wav, &p).unwrap();
    let hits = track
        .frames
        .iter()
        .filter(|f| {
            let (best, _) = f
                .weights
                .iter()
                .fold(("", -1.0), |acc, (l, &w)| if w > acc.1 { (l.as_str(), w) } else { acc });
            best == "a"
        })
        .count();
    assert!(hits as f64 / track.frames.len() as f64 > 0.9);
}

#[test]
fn bake_resamples_foreign_rates() {
    let p = vowel_profile();
    let wav = mono_pcm16(44_100, &vec![0.0; 44_100]);
    let track = bake(&wav, &p).unwrap();
    assert_eq!(track.frames.len(), 59);
}

#[test]
fn live_analysis_matches_offline_for_any_chunking() {
    let p = Arc::new(vowel_profile());
    let mut signal = synth::vowel("e", 0.6, 16_000, 5);
    signal.extend(vec![0.0; 3_000]);
    signal.extend(synth::vowel("o", 0.6, 16_000, 6));
    for (rate, seed) in [(16_000u32, 1u64), (44_100, 2), (8_000, 3)] {
        let input = if rate == 16_000 {
            signal.clone()
        } else {
            lipsync_core::audio::resample_linear(&clip(signal.clone()), rate)
                .unwrap()
                .into_samples()
        };
        let offline = analyze_clip(
            &AudioClip::from_samples(rate, input.clone()).unwrap(),
            &p,
        )
        .unwrap();
        let mut live = LiveAnalyzer::new(p.clone(), rate).unwrap();
        let mut got = Vec::new();
        let mut at = 0;
        for n in random_chunking(input.len(), 3_000, seed) {
            got.extend(live.push(&input[at..at + n]).unwrap());
            at += n;
        }
        got.extend(live.finish().unwrap());
        assert_eq!(got.len(), offline.len(), "rate {rate}");
        for ((_, want), have) in offline.iter().zip(&got) {
            assert_eq!(want.timestamp, have.timestamp);
            for (a, b) in want.weights.values().zip(have.weights.values()) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}
