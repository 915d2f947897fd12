//! Synthetic multimodal corpus.
//!
//! Every symbol of the alphabet gets a fixed latent code: an EEG rhythm
//! frequency with a per-channel amplitude pattern, an audio tone, and a
//! mouth position on a 3x3 grid. Nine positions for 28 symbols make the video
//! stream ambiguous on its own; EEG and audio resolve it. Subjects differ by
//! channel gains, pitch, and face placement.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::corpus::SENTENCES;
use crate::ctc::Alphabet;
use crate::dsp::{AudioRecording, EegRecording, AUDIO_SAMPLE_RATE_HZ};
use crate::video::{grayscale, resize_bilinear, VideoSequence, FRAME_SIZE};
use crate::{Error, Result};

pub const EEG_CHANNELS: usize = 31;
pub const EEG_SAMPLE_RATE_HZ: u32 = 1000;
const VISEMES: usize = 9;
const SAMPLES_PER_FRAME_EEG: usize = 10;
const SAMPLES_PER_FRAME_AUDIO: usize = 160;
const MAX_FRAMES: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_sentences: usize,
    pub n_reps: usize,
    pub n_subjects: usize,
    /// The last `test_subjects` subjects form the test split.
    pub test_subjects: usize,
    pub seed: u64,
    /// Gaussian EEG noise, microvolts.
    pub eeg_noise_uv: f64,
    /// Peak EEG rhythm amplitude before channel gains, microvolts.
    pub eeg_signal_uv: f64,
    pub audio_noise: f64,
    /// Half-width of the uniform per-pixel video noise, intensity units.
    pub video_noise: f64,
    /// Side of the rendered RGB face crop before resizing.
    pub camera_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sentences: 30,
            n_reps: 3,
            n_subjects: 7,
            test_subjects: 1,
            seed: 7,
            eeg_noise_uv: 45.0,
            eeg_signal_uv: 10.0,
            audio_noise: 0.02,
            video_noise: 30.0,
            camera_size: 120,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sentences == 0 || self.n_sentences > SENTENCES.len() {
            return Err(Error::Config(format!("n_sentences must be in 1..={}", SENTENCES.len())));
        }
        if self.n_reps == 0 || self.n_subjects == 0 || self.test_subjects > self.n_subjects {
            return Err(Error::Config("need at least one repetition and subject, and test_subjects <= n_subjects".into()));
        }
        if self.camera_size < 8 {
            return Err(Error::Config("camera_size must be at least 8".into()));
        }
        for v in [self.eeg_noise_uv, self.eeg_signal_uv, self.audio_noise, self.video_noise] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config("noise and signal levels must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSpec {
    pub id: String,
    pub sentence: usize,
    pub text: String,
    pub subject: usize,
    pub rep: usize,
    pub split: Split,
}

/// Subject-major listing of every utterance in the corpus.
pub fn utterance_plan(cfg: &SynthConfig) -> Vec<UtteranceSpec> {
    let first_test = cfg.n_subjects - cfg.test_subjects;
    let mut plan = Vec::with_capacity(cfg.n_subjects * cfg.n_sentences * cfg.n_reps);
    for subject in 0..cfg.n_subjects {
        for sentence in 0..cfg.n_sentences {
            for rep in 0..cfg.n_reps {
                plan.push(UtteranceSpec {
                    id: format!("s{}_n{:02}_r{}", subject + 1, sentence + 1, rep + 1),
                    sentence,
                    text: SENTENCES[sentence].to_string(),
                    subject,
                    rep,
                    split: if subject >= first_test { Split::Test } else { Split::Train },
                });
            }
        }
    }
    plan
}

#[derive(Debug, Clone)]
pub struct Utterance {
    pub spec: UtteranceSpec,
    pub eeg: EegRecording,
    pub audio: AudioRecording,
    pub video: VideoSequence,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.video.len
    }
}

#[derive(Debug, Clone)]
struct SymbolCode {
    eeg_hz: f64,
    eeg_pattern: Vec<f64>,
    tone_hz: f64,
    viseme: usize,
}

#[derive(Debug, Clone)]
struct Subject {
    channel_gain: Vec<f64>,
    pitch: f64,
    offset: (f64, f64),
    brightness: f64,
}

/// Deterministic generator; the codes depend only on the seed.
#[derive(Debug, Clone)]
pub struct Generator {
    cfg: SynthConfig,
    alphabet: Alphabet,
    codes: Vec<SymbolCode>,
    subjects: Vec<Subject>,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    v
}

impl Generator {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let alphabet = Alphabet::default();
        let n = alphabet.size() - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 1));
        let eeg_order = shuffled(n, &mut rng);
        let tone_order = shuffled(n, &mut rng);
        let viseme_order = shuffled(n, &mut rng);
        let codes = (0..n)
            .map(|i| SymbolCode {
                eeg_hz: 6.0 + 38.0 * eeg_order[i] as f64 / (n - 1) as f64,
                eeg_pattern: (0..EEG_CHANNELS).map(|_| rng.random_range(0.2..1.8)).collect(),
                tone_hz: 300.0 * (3200.0f64 / 300.0).powf(tone_order[i] as f64 / (n - 1) as f64),
                viseme: viseme_order[i] % VISEMES,
            })
            .collect();
        let mut srng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 2));
        let subjects = (0..cfg.n_subjects)
            .map(|_| Subject {
                channel_gain: (0..EEG_CHANNELS).map(|_| srng.random_range(0.8..1.2)).collect(),
                pitch: srng.random_range(0.97..1.03),
                offset: (srng.random_range(-0.03..0.03), srng.random_range(-0.03..0.03)),
                brightness: srng.random_range(-10.0..10.0),
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            alphabet,
            codes,
            subjects,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn generate(&self, spec: &UtteranceSpec) -> Result<Utterance> {
        if spec.subject >= self.subjects.len() {
            return Err(Error::Parameter(format!("subject {} is not in the corpus", spec.subject)));
        }
        let labels = self.alphabet.encode(&spec.text)?;
        let salt = (spec.subject * 10_000 + spec.sentence * 100 + spec.rep) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.cfg.seed, 1_000 + salt));

        // timeline in 10 ms frames: (start, end, symbol index)
        let lead = rng.random_range(5..=10);
        let tail = rng.random_range(5..=10);
        let budget = MAX_FRAMES - lead - tail;
        let max_dur = (budget / labels.len()).clamp(4, 13);
        let mut segments = Vec::with_capacity(labels.len());
        let mut t = lead;
        for &c in &labels {
            let d = rng.random_range(max_dur.min(9)..=max_dur);
            segments.push((t, t + d, c - 1));
            t += d;
        }
        let frames = t + tail;
        let subject = &self.subjects[spec.subject];

        let eeg = self.render_eeg(&segments, frames, subject, &mut rng)?;
        let audio = self.render_audio(&segments, frames, subject, &mut rng);
        let video = self.render_video(&segments, frames, subject, &mut rng)?;
        Ok(Utterance {
            spec: spec.clone(),
            eeg,
            audio,
            video,
        })
    }

    fn render_eeg(&self, segments: &[(usize, usize, usize)], frames: usize, subject: &Subject, rng: &mut ChaCha8Rng) -> Result<EegRecording> {
        let n = frames * SAMPLES_PER_FRAME_EEG;
        let fs = EEG_SAMPLE_RATE_HZ as f64;
        let noise = Normal::new(0.0, self.cfg.eeg_noise_uv.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let channels = (0..EEG_CHANNELS)
            .map(|ch| {
                let offset = rng.random_range(-30.0..30.0);
                let mains_phase = rng.random_range(0.0..2.0 * PI);
                let mut x: Vec<f64> = (0..n)
                    .map(|i| {
                        let t = i as f64 / fs;
                        offset + 4.0 * (2.0 * PI * 60.0 * t + mains_phase).sin() + noise.sample(rng)
                    })
                    .collect();
                for &(a, b, s) in segments {
                    let code = &self.codes[s];
                    let amp = self.cfg.eeg_signal_uv * code.eeg_pattern[ch] * subject.channel_gain[ch];
                    let phase = rng.random_range(0.0..2.0 * PI);
                    for i in a * SAMPLES_PER_FRAME_EEG..b * SAMPLES_PER_FRAME_EEG {
                        x[i] += amp * (2.0 * PI * code.eeg_hz * i as f64 / fs + phase).sin();
                    }
                }
                x
            })
            .collect();
        EegRecording::new(channels, EEG_SAMPLE_RATE_HZ)
    }

    fn render_audio(&self, segments: &[(usize, usize, usize)], frames: usize, subject: &Subject, rng: &mut ChaCha8Rng) -> AudioRecording {
        let n = frames * SAMPLES_PER_FRAME_AUDIO;
        let fs = AUDIO_SAMPLE_RATE_HZ as f64;
        let noise = Normal::new(0.0, self.cfg.audio_noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let mut x: Vec<f64> = (0..n).map(|_| noise.sample(rng)).collect();
        for &(a, b, s) in segments {
            let f = self.codes[s].tone_hz * subject.pitch;
            for i in a * SAMPLES_PER_FRAME_AUDIO..b * SAMPLES_PER_FRAME_AUDIO {
                let t = i as f64 / fs;
                x[i] += 0.4 * (2.0 * PI * f * t).sin() + 0.12 * (4.0 * PI * f * t).sin();
            }
        }
        AudioRecording {
            samples: x,
            sample_rate_hz: AUDIO_SAMPLE_RATE_HZ,
        }
    }

    fn render_video(&self, segments: &[(usize, usize, usize)], frames: usize, subject: &Subject, rng: &mut ChaCha8Rng) -> Result<VideoSequence> {
        let s = self.cfg.camera_size;
        let sf = s as f64;
        let rest = (0.5, 0.85);
        let grid = |v: usize| (0.25 + 0.25 * (v % 3) as f64, 0.2 + 0.25 * (v / 3) as f64);
        // target position per frame, eased over four frames after each change
        let mut target = vec![rest; frames];
        for &(a, b, sym) in segments {
            target[a..b].iter_mut().for_each(|p| *p = grid(self.codes[sym].viseme));
        }
        let mut pos = rest;
        let sigma = 0.08 * sf;
        let bg = [90.0, 80.0, 70.0].map(|c: f64| c + subject.brightness);
        let amp = [140.0, 100.0, 60.0];
        let half = self.cfg.video_noise;
        let mut out = Vec::with_capacity(frames * FRAME_SIZE * FRAME_SIZE);
        let mut rgb = vec![0u8; s * s * 3];
        for tgt in target {
            pos = (pos.0 + 0.5 * (tgt.0 - pos.0), pos.1 + 0.5 * (tgt.1 - pos.1));
            let (cx, cy) = ((pos.0 + subject.offset.0) * sf, (pos.1 + subject.offset.1) * sf);
            let gx: Vec<f64> = (0..s).map(|x| (-((x as f64 - cx).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
            let gy: Vec<f64> = (0..s).map(|y| (-((y as f64 - cy).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
            for y in 0..s {
                for x in 0..s {
                    let r: u32 = rng.random();
                    let n = half * (((r & 0xFFFF) + (r >> 16)) as f64 / 65_535.0 - 1.0);
                    let g = gy[y] * gx[x];
                    for c in 0..3 {
                        rgb[(y * s + x) * 3 + c] = (bg[c] + amp[c] * g + n).round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
            let gray = grayscale(&rgb, s, s, 3)?;
            out.extend(resize_bilinear(&gray, s, s, FRAME_SIZE, FRAME_SIZE)?);
        }
        VideoSequence::new(out, frames, FRAME_SIZE, FRAME_SIZE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_sentences: 2,
            n_reps: 1,
            n_subjects: 2,
            camera_size: 40,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn plan_size_and_split() {
        let plan = utterance_plan(&SynthConfig::default());
        assert_eq!(plan.len(), 630);
        for s in 0..7 {
            assert_eq!(plan.iter().filter(|u| u.subject == s).count(), 90);
        }
        assert!(plan.iter().all(|u| (u.split == Split::Test) == (u.subject == 6)));
    }

    #[test]
    fn stream_lengths_agree() {
        let cfg = small();
        let g = Generator::new(&cfg).unwrap();
        for spec in utterance_plan(&cfg) {
            let u = g.generate(&spec).unwrap();
            let t = u.frames();
            assert!((100..=300).contains(&t), "{t} frames");
            assert_eq!(u.eeg.len(), t * 10);
            assert_eq!(u.eeg.channel_count(), 31);
            assert_eq!(u.audio.samples.len(), t * 160);
            assert_eq!((u.video.height, u.video.width), (100, 100));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = small();
        let spec = &utterance_plan(&cfg)[1];
        let a = Generator::new(&cfg).unwrap().generate(spec).unwrap();
        let b = Generator::new(&cfg).unwrap().generate(spec).unwrap();
        assert_eq!(a.eeg, b.eeg);
        assert_eq!(a.audio, b.audio);
        assert_eq!(a.video, b.video);
    }
}
