use std::f64::consts::TAU;

use crate::ccdc::Series;
use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::Dataset;

/// Waveform families of the synthetic benchmark, in class-id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Sine,
    Square,
    Sawtooth,
}

impl Waveform {
    pub const ALL: [Waveform; 3] = [Waveform::Sine, Waveform::Square, Waveform::Sawtooth];

    pub fn name(self) -> &'static str {
        match self {
            Waveform::Sine => "sine",
            Waveform::Square => "square",
            Waveform::Sawtooth => "sawtooth",
        }
    }

    /// Unit-amplitude value at phase `p` (in cycles).
    pub fn at(self, p: f64) -> f64 {
        let frac = p - p.floor();
        match self {
            Waveform::Sine => (TAU * p).sin(),
            Waveform::Square => {
                if frac < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Waveform::Sawtooth => 2.0 * frac - 1.0,
        }
    }
}

/// `per_class` samples of each [`Waveform`], length `len`, with random phase,
/// 2 to 4 cycles per series and additive `N(0, noise_std²)` noise.
/// Samples are ordered class by class.
pub fn synthetic_waveforms(per_class: usize, len: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if per_class == 0 || len < 2 {
        return Err(Error::Parameter("synthetic set needs samples and length >= 2".into()));
    }
    let mut rng = Rng::new(seed);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (c, w) in Waveform::ALL.iter().enumerate() {
        for i in 0..per_class {
            let phase = rng.uniform();
            let cycles = rng.uniform_range(2.0, 4.0);
            let values = (0..len)
                .map(|t| w.at(phase + cycles * t as f64 / len as f64) + noise_std * rng.standard_normal())
                .collect();
            samples.push(Series {
                id: format!("{}#{i}", w.name()),
                values,
            });
            labels.push(c);
        }
    }
    Dataset::new(samples, labels, Waveform::ALL.iter().map(|w| w.name().to_string()).collect())
}
