//! Test support: a from-scratch reference scorer and synthetic dataset
//! generators shared by the CLI and acceptance targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ted_core::ingestion::{compute_pspi, write_feature_csv, write_manual_au, write_pspi, FeatureCsvSchema, ManualAuMap};
use ted_core::model::{
    AuIntensity, DatasetManifest, FrameFeatures, Gender, Labels, ManifestEntry, SequenceRecord,
};

/// Straightforward re-implementation of the scoring, written without the
/// streaming machinery: every quantity is recomputed from its definition.
pub mod naive {
    pub fn static_score(levels: &[f64]) -> f64 {
        let mut s = 0.0;
        for &v in levels {
            s += v.exp();
        }
        s
    }

    pub fn variance(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mut total = 0.0;
        for &x in v {
            total += x;
        }
        let mean = total / n;
        let mut ss = 0.0;
        for &x in v {
            ss += (x - mean) * (x - mean);
        }
        ss / (n - 1.0)
    }

    pub fn relative_change(a: &[f64], b: &[f64]) -> f64 {
        let denom = variance(a) + variance(b);
        if denom == 0.0 {
            return 0.0;
        }
        let mut d = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            d.push(b[i] - a[i]);
        }
        variance(&d) / denom
    }

    pub fn direction(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += b[i] - a[i];
        }
        if s >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn mean(values: &[f64]) -> f64 {
        let mut s = 0.0;
        for &v in values {
            s += v;
        }
        s / values.len() as f64
    }

    /// Trailing-window scores for one sequence. `streams[k][i]` is feature
    /// set `k`'s vector at frame `i`; `s[i]` the frame's static score.
    /// Returns (scores, M per frame per set).
    pub fn ted(s: &[f64], streams: &[Vec<Vec<f64>>], w: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = s.len();
        let mut p = vec![vec![0.0; n]; streams.len()];
        for (k, stream) in streams.iter().enumerate() {
            for i in 1..n {
                p[k][i] = direction(&stream[i - 1], &stream[i]) * relative_change(&stream[i - 1], &stream[i]);
            }
        }
        let mut out = Vec::with_capacity(n);
        let mut ms = Vec::with_capacity(n);
        for i in 0..n {
            if i == 0 {
                out.push(s[0]);
                ms.push(vec![0.0; streams.len()]);
                continue;
            }
            let lo = if i + 1 > w { i + 1 - w } else { 1 }.max(1);
            let m: Vec<f64> = (0..streams.len()).map(|k| mean(&p[k][lo..=i])).collect();
            let mut prod = 1.0;
            for &x in &m {
                prod *= x;
            }
            out.push(s[i] * (1.0 + prod));
            ms.push(m);
        }
        (out, ms)
    }
}

/// Six per-frame vectors of a frame (landmarks flattened x0, y0, x1, ...),
/// the layout the reference scorer expects, with `aus` as the intensity set.
pub fn frame_streams(frames: &[FrameFeatures], aus: &[u8]) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let mut streams = vec![Vec::new(); 6];
    let mut s = Vec::new();
    for f in frames {
        streams[0].push(f.landmarks.iter().flat_map(|p| [p[0], p[1]]).collect());
        streams[1].push(f.head_translation.to_vec());
        streams[2].push(f.head_rotation.to_vec());
        streams[3].push(f.gaze_left.to_vec());
        streams[4].push(f.gaze_right.to_vec());
        let levels: Vec<f64> = aus.iter().map(|a| f.au_intensities[a]).collect();
        s.push(naive::static_score(&levels));
        streams[5].push(levels);
    }
    (s, streams)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Latent expressiveness with short episodes: a 10-frame rise (during which
/// the face moves), a hold and a 10-frame decay. Returns (level, moving).
pub fn episodes(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
    const BURST: usize = 10;
    let mut e = vec![0.0; n];
    let mut moving = vec![false; n];
    let mut slots: Vec<usize> = (0..n.saturating_sub(50).max(1)).step_by(50).collect();
    let k = rng.random_range(3..6).min(slots.len());
    // partial shuffle to pick k distinct slots
    for i in 0..k {
        let j = rng.random_range(i..slots.len());
        slots.swap(i, j);
    }
    let mut chosen = slots[..k].to_vec();
    chosen.sort_unstable();
    for slot in chosen {
        let s = slot + rng.random_range(0..10);
        let peak = rng.random_range(0.3..1.0);
        let hold = rng.random_range(5..15);
        for j in 0..BURST {
            if s + j < n {
                e[s + j] = f64::max(e[s + j], peak * (j + 1) as f64 / BURST as f64);
                moving[s + j] = true;
            }
        }
        for j in 0..hold {
            if s + BURST + j < n {
                e[s + BURST + j] = peak;
            }
        }
        for j in 0..BURST {
            let i = s + BURST + hold + j;
            if i < n {
                e[i] = f64::max(e[i], peak * (BURST - 1 - j) as f64 / BURST as f64);
            }
        }
    }
    (e, moving)
}

/// A tracked stream that flips around a fixed pattern and drifts while the
/// face moves. Returns (clean, observed with jitter).
fn tracked_stream(rng: &mut ChaCha8Rng, moving: &[bool], dim: usize, jitter: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let z: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let mut sign = 1.0;
    let mut drift = 0.0;
    let mut cur = z.clone();
    let mut clean = Vec::with_capacity(moving.len());
    let mut observed = Vec::with_capacity(moving.len());
    for &m in moving {
        if m {
            sign = -sign;
            drift += 3.0;
            cur = z.iter().map(|v| sign * v + drift).collect();
        }
        clean.push(cur.clone());
        observed.push(cur.iter().map(|v| v + jitter * normal(rng)).collect());
    }
    (clean, observed)
}

pub const PLANTED_AUS: [u8; 5] = [4, 6, 9, 10, 25];
const PLANTED_AU_MAX: f64 = 2.5;

/// One sequence whose PSPI is planted from the clean latent signals: the
/// reference TED score (window 10) of the noise-free streams, rescaled into
/// the PSPI range. The engine only sees the noisy observations.
pub fn planted_sequence(rng: &mut ChaCha8Rng, subject: &str, sequence: &str, n: usize) -> SequenceRecord {
    let (e, moving) = episodes(rng, n);
    let weights: Vec<f64> = PLANTED_AUS.iter().map(|_| rng.random_range(0.7..1.0)).collect();
    let clean_aus: Vec<Vec<f64>> = e
        .iter()
        .map(|&x| weights.iter().map(|u| PLANTED_AU_MAX * x * u).collect())
        .collect();
    let observed_aus: Vec<Vec<f64>> = clean_aus
        .iter()
        .zip(&e)
        .map(|(row, &x)| {
            row.iter()
                .map(|&v| {
                    let noise = if x > 0.0 { 0.02 * normal(rng) } else { 0.0 };
                    (v + noise).clamp(0.0, 5.0)
                })
                .collect()
        })
        .collect();

    let mut clean_streams = Vec::new();
    let mut observed_streams = Vec::new();
    for dim in [136, 3, 3, 3, 3] {
        let (c, o) = tracked_stream(rng, &moving, dim, 0.01);
        clean_streams.push(c);
        observed_streams.push(o);
    }
    let clean_s: Vec<f64> = clean_aus.iter().map(|r| naive::static_score(r)).collect();
    clean_streams.push(clean_aus);
    let (clean_ted, _) = naive::ted(&clean_s, &clean_streams, 10);
    let k = PLANTED_AUS.len() as f64;
    let scale = 16.0 / (k * PLANTED_AU_MAX.exp() * 40.0);
    let pspi: Vec<f64> = clean_ted.iter().map(|t| (scale * (t - k)).clamp(0.0, 16.0)).collect();

    let frames = (0..n)
        .map(|i| {
            let l = &observed_streams[0][i];
            let mut f = FrameFeatures::zeroed(i as u32 + 1, 68);
            // pixel-like coordinates; relative change is shift and scale invariant
            f.landmarks = (0..68).map(|p| [300.0 + 40.0 * l[2 * p], 300.0 + 40.0 * l[2 * p + 1]]).collect();
            let v3 = |k: usize| [observed_streams[k][i][0], observed_streams[k][i][1], observed_streams[k][i][2]];
            f.head_translation = v3(1);
            f.head_rotation = v3(2);
            f.gaze_left = v3(3);
            f.gaze_right = v3(4);
            f.au_intensities = PLANTED_AUS.iter().copied().zip(observed_aus[i].iter().copied()).collect();
            f
        })
        .collect();

    SequenceRecord {
        subject_id: subject.to_string(),
        sequence_id: sequence.to_string(),
        frames,
        pspi: Some(pspi),
        labels: None,
        gender: None,
    }
}

pub fn planted_dataset(subjects: usize, sequences: usize, frames: usize, seed: u64) -> Vec<SequenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for s in 0..subjects {
        for q in 0..sequences {
            records.push(planted_sequence(&mut rng, &format!("S{s:02}"), &format!("q{q}"), frames));
        }
    }
    records
}

pub const MANUAL_AUS: [u8; 8] = [4, 6, 7, 9, 10, 12, 25, 43];

/// Writes a small labeled dataset (features, manual coding, PSPI, manifest)
/// under `dir` and returns the manifest path. Manual grades follow the latent
/// expressiveness, PSPI is derived from the manual grades, and tracker AU
/// columns carry a noisy copy of the grades.
pub fn write_dataset(dir: &Path, subjects: usize, sequences: usize, frames: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = FeatureCsvSchema::toolkit_export(68);
    let mut manifest = DatasetManifest::default();
    for s in 0..subjects {
        for q in 0..sequences {
            let (subject, sequence) = (format!("S{s:02}"), format!("q{q}"));
            let (e, moving) = episodes(&mut rng, frames);
            let mut tracked = Vec::new();
            for dim in [136, 3, 3, 3, 3] {
                tracked.push(tracked_stream(&mut rng, &moving, dim, 0.02).1);
            }
            let mut manual = ManualAuMap::new();
            let mut feature_frames = Vec::new();
            let mut pspi = Vec::new();
            for i in 0..frames {
                let idx = i as u32 + 1;
                let mut grades = std::collections::BTreeMap::new();
                for &au in &MANUAL_AUS {
                    let level = if au == 43 {
                        f64::from(u8::from(e[i] > 0.8))
                    } else {
                        (5.0 * e[i] * rng.random_range(0.6..1.0)).round()
                    };
                    grades.insert(au, AuIntensity::new(au, level).unwrap());
                }
                let mut f = FrameFeatures::zeroed(idx, 68);
                f.landmarks = (0..68).map(|p| [250.0 + 30.0 * tracked[0][i][2 * p], 250.0 + 30.0 * tracked[0][i][2 * p + 1]]).collect();
                f.head_translation = [tracked[1][i][0], tracked[1][i][1], 500.0 + tracked[1][i][2]];
                f.head_rotation = [tracked[2][i][0] / 10.0, tracked[2][i][1] / 10.0, tracked[2][i][2] / 10.0];
                f.gaze_left = [tracked[3][i][0], tracked[3][i][1], tracked[3][i][2]];
                f.gaze_right = [tracked[4][i][0], tracked[4][i][1], tracked[4][i][2]];
                f.au_intensities = grades
                    .iter()
                    .filter(|(&au, _)| au != 43)
                    .map(|(&au, g)| (au, (g.level + 0.3 * normal(&mut rng)).clamp(0.0, 5.0)))
                    .collect();
                f.tracking_ok = !(i > 0 && rng.random_range(0.0..1.0) < 0.01);
                let mut coded = f.clone();
                coded.au_intensities = grades.iter().map(|(&au, g)| (au, g.level)).collect();
                pspi.push(compute_pspi(&coded).unwrap());
                manual.insert(idx, grades);
                feature_frames.push(f);
            }

            let stem = format!("{subject}_{sequence}");
            let mut buf = Vec::new();
            write_feature_csv(&mut buf, &feature_frames, &schema).unwrap();
            fs::write(dir.join(format!("{stem}.csv")), buf).unwrap();
            let mut buf = Vec::new();
            write_manual_au(&mut buf, &manual).unwrap();
            fs::write(dir.join(format!("{stem}_facs.csv")), buf).unwrap();
            let mut buf = Vec::new();
            write_pspi(&mut buf, &pspi).unwrap();
            fs::write(dir.join(format!("{stem}_pspi.txt")), buf).unwrap();

            manifest.entries.push(ManifestEntry {
                subject_id: subject.clone(),
                sequence_id: sequence.clone(),
                feature_file_path: format!("{stem}.csv").into(),
                pspi_file_path: Some(format!("{stem}_pspi.txt").into()),
                manual_au_file_path: Some(format!("{stem}_facs.csv").into()),
                labels: Some(Labels {
                    vas: rng.random_range(0..=10),
                    sen: rng.random_range(0..=10),
                    aff: rng.random_range(0..=10),
                    opi: rng.random_range(0..=5),
                }),
                gender: Some(if s % 2 == 0 { Gender::Female } else { Gender::Male }),
            });
        }
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}
