//! Genome encodings for write control pulses and their decoding into sampled
//! drive waveforms.
//!
//! Two encodings are supported:
//!
//! * **Gaussian**: three genes `[a, f, d]`, the amplitude fraction on a
//!   50-level grid, the FWHM in whole nanoseconds (1..=80) and the delay of
//!   the pulse centre relative to the signal centre in whole nanoseconds
//!   (−60..=0).
//! * **Free-form**: sixteen control points in `[-0.2, 1]`, evenly spaced over
//!   a decode window, joined by a cubic smoothing spline and clipped to
//!   `[0, 1]`.
//!
//! Times are in nanoseconds relative to the signal-pulse centre at `t = 0`.

mod spline;

use std::f64::consts::LN_2;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use spline::CubicSpline;

/// Number of amplitude levels of the Gaussian encoding.
pub const AMPLITUDE_LEVELS: usize = 50;
/// Number of control points of the free-form encoding.
pub const FREEFORM_POINTS: usize = 16;
pub const FWHM_RANGE: (i32, i32) = (1, 80);
pub const DELAY_RANGE: (i32, i32) = (-60, 0);
pub const FREEFORM_BOUNDS: (f64, f64) = (-0.2, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("finite gene domain must be non-empty, sorted and duplicate-free")]
    BadDiscreteDomain,
    #[error("interval gene domain requires lo < hi (got [{lo}, {hi}])")]
    BadInterval { lo: f64, hi: f64 },
    #[error("gene count must be 3 (Gaussian) or 16 (free-form), got {0}")]
    GeneCount(usize),
    #[error("genome has {got} genes, expected {expected}")]
    GenomeLength { expected: usize, got: usize },
    #[error("gene {index} value {value} is outside its domain")]
    GeneOutOfDomain { index: usize, value: f64 },
    #[error("time window [{start}, {end}] is empty")]
    EmptyWindow { start: f64, end: f64 },
    #[error("window [{start}, {end}] at dt = {dt} holds fewer than two samples")]
    InvalidWindow { start: f64, end: f64, dt: f64 },
    #[error("sample period must be positive, got {0}")]
    BadSamplePeriod(f64),
    #[error("waveform sample {index} = {value} is outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("Gaussian pulse needs amplitude in [0, 1] and positive FWHM (a = {amplitude}, f = {fwhm})")]
    BadGaussian { amplitude: f64, fwhm: f64 },
    #[error("spline fit failed: {0}")]
    Spline(&'static str),
}

/// Allowed values for a single gene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneDomain {
    /// A finite, sorted, duplicate-free set of values.
    Discrete(Vec<f64>),
    /// The closed interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
}

impl GeneDomain {
    pub fn discrete(values: Vec<f64>) -> Result<Self, CodecError> {
        let ok = !values.is_empty()
            && values.iter().all(|v| v.is_finite())
            && values.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self::Discrete(values))
        } else {
            Err(CodecError::BadDiscreteDomain)
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, CodecError> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self::Interval { lo, hi })
        } else {
            Err(CodecError::BadInterval { lo, hi })
        }
    }

    /// Integer values `lo..=hi` as a discrete domain.
    pub fn integers(lo: i32, hi: i32) -> Result<Self, CodecError> {
        Self::discrete((lo..=hi).map(f64::from).collect())
    }

    pub fn contains(&self, value: f64) -> bool {
        match self {
            Self::Discrete(values) => values.binary_search_by(|v| v.total_cmp(&value)).is_ok(),
            Self::Interval { lo, hi } => (*lo..=*hi).contains(&value),
        }
    }

    /// Smallest and largest allowed values.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Discrete(values) => (values[0], values[values.len() - 1]),
            Self::Interval { lo, hi } => (*lo, *hi),
        }
    }

    /// Uniform draw from the domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Discrete(values) => values[rng.random_range(0..values.len())],
            Self::Interval { lo, hi } => rng.random_range(*lo..=*hi),
        }
    }
}

/// Per-gene domains of one encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSpace {
    domains: Vec<GeneDomain>,
}

impl GeneSpace {
    pub fn new(domains: Vec<GeneDomain>) -> Result<Self, CodecError> {
        if domains.len() != 3 && domains.len() != FREEFORM_POINTS {
            return Err(CodecError::GeneCount(domains.len()));
        }
        for d in &domains {
            match d {
                GeneDomain::Discrete(v) => {
                    GeneDomain::discrete(v.clone())?;
                }
                GeneDomain::Interval { lo, hi } => {
                    GeneDomain::interval(*lo, *hi)?;
                }
            }
        }
        Ok(Self { domains })
    }

    /// `[a, f, d]` on the amplitude, FWHM and delay grids.
    pub fn gaussian() -> Self {
        Self {
            domains: vec![
                GeneDomain::Discrete(amplitude_grid()),
                GeneDomain::integers(FWHM_RANGE.0, FWHM_RANGE.1).expect("static grid"),
                GeneDomain::integers(DELAY_RANGE.0, DELAY_RANGE.1).expect("static grid"),
            ],
        }
    }

    /// Sixteen control points, each in `[-0.2, 1]`.
    pub fn freeform() -> Self {
        let (lo, hi) = FREEFORM_BOUNDS;
        Self {
            domains: vec![GeneDomain::Interval { lo, hi }; FREEFORM_POINTS],
        }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> &[GeneDomain] {
        &self.domains
    }

    pub fn domain(&self, index: usize) -> &GeneDomain {
        &self.domains[index]
    }

    pub fn validate(&self, genome: &Genome) -> Result<(), CodecError> {
        if genome.len() != self.len() {
            return Err(CodecError::GenomeLength {
                expected: self.len(),
                got: genome.len(),
            });
        }
        for (index, (&value, domain)) in genome.genes().iter().zip(&self.domains).enumerate() {
            if !domain.contains(value) {
                return Err(CodecError::GeneOutOfDomain { index, value });
            }
        }
        Ok(())
    }

    pub fn contains(&self, genome: &Genome) -> bool {
        self.validate(genome).is_ok()
    }
}

/// The 50 amplitude levels `k / 49`, `k = 0..=49`.
pub fn amplitude_grid() -> Vec<f64> {
    let steps = (AMPLITUDE_LEVELS - 1) as f64;
    (0..AMPLITUDE_LEVELS).map(|k| k as f64 / steps).collect()
}

/// Draws every gene uniformly from its domain.
pub fn random_genome<R: Rng + ?Sized>(space: &GeneSpace, rng: &mut R) -> Genome {
    Genome(space.domains.iter().map(|d| d.sample(rng)).collect())
}

/// Flat vector of gene values. Equality and hashing are bitwise so genomes
/// can key the evaluation cache.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<f64>);

impl Genome {
    pub fn new(genes: Vec<f64>) -> Self {
        Self(genes)
    }

    pub fn genes(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_genes(self) -> Vec<f64> {
        self.0
    }
}

impl PartialEq for Genome {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for Genome {}

impl Hash for Genome {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.len().hash(state);
        for g in &self.0 {
            g.to_bits().hash(state);
        }
    }
}

impl From<Vec<f64>> for Genome {
    fn from(genes: Vec<f64>) -> Self {
        Self(genes)
    }
}

/// Gaussian write pulse `a · exp(−4 ln2 (t − d)² / f²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianGenome {
    pub amplitude: f64,
    pub fwhm: f64,
    pub delay: f64,
}

impl GaussianGenome {
    /// Builds a genome that lies on the search grids.
    pub fn new(amplitude: f64, fwhm: f64, delay: f64) -> Result<Self, CodecError> {
        let g = Self { amplitude, fwhm, delay };
        GeneSpace::gaussian().validate(&g.to_genome())?;
        Ok(g)
    }

    /// Reads `[a, f, d]` without grid checks (scaled amplitudes leave the grid).
    pub fn from_genome(genome: &Genome) -> Result<Self, CodecError> {
        match *genome.genes() {
            [amplitude, fwhm, delay] => Ok(Self { amplitude, fwhm, delay }),
            _ => Err(CodecError::GenomeLength {
                expected: 3,
                got: genome.len(),
            }),
        }
    }

    pub fn to_genome(&self) -> Genome {
        Genome(vec![self.amplitude, self.fwhm, self.delay])
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let x = t - self.delay;
        self.amplitude * (-4.0 * LN_2 * x * x / (self.fwhm * self.fwhm)).exp()
    }
}

/// Sixteen free-form control points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeformGenome {
    pub points: [f64; FREEFORM_POINTS],
}

impl FreeformGenome {
    pub fn new(points: [f64; FREEFORM_POINTS]) -> Result<Self, CodecError> {
        let g = Self { points };
        GeneSpace::freeform().validate(&g.to_genome())?;
        Ok(g)
    }

    pub fn from_genome(genome: &Genome) -> Result<Self, CodecError> {
        let points: [f64; FREEFORM_POINTS] =
            genome
                .genes()
                .try_into()
                .map_err(|_| CodecError::GenomeLength {
                    expected: FREEFORM_POINTS,
                    got: genome.len(),
                })?;
        Ok(Self { points })
    }

    pub fn to_genome(&self) -> Genome {
        Genome(self.points.to_vec())
    }
}

/// Decode interval `[start, end]` in ns relative to the signal centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Result<Self, CodecError> {
        if start < end && start.is_finite() && end.is_finite() {
            Ok(Self { start, end })
        } else {
            Err(CodecError::EmptyWindow { start, end })
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Default free-form window, 16 points about 10.7 ns apart.
    pub fn freeform_default() -> Self {
        Self { start: -120.0, end: 40.0 }
    }

    /// Default Gaussian window, wide enough that every grid pulse has decayed
    /// to about 1% at the edges.
    pub fn gaussian_default() -> Self {
        Self { start: -200.0, end: 100.0 }
    }

    /// Sample times `start + k·dt` up to and including `end`.
    fn sample_times(&self, dt: f64) -> Result<Vec<f64>, CodecError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CodecError::BadSamplePeriod(dt));
        }
        let n = (self.duration() / dt + 1e-9).floor() as usize + 1;
        if n < 2 {
            return Err(CodecError::InvalidWindow {
                start: self.start,
                end: self.end,
                dt,
            });
        }
        Ok((0..n).map(|k| self.start + k as f64 * dt).collect())
    }
}

/// Uniformly sampled, normalised drive amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    t_start: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(t_start: f64, dt: f64, samples: Vec<f64>) -> Result<Self, CodecError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CodecError::BadSamplePeriod(dt));
        }
        if samples.len() < 2 {
            return Err(CodecError::InvalidWindow {
                start: t_start,
                end: t_start + dt * samples.len() as f64,
                dt,
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(CodecError::SampleOutOfRange { index, value });
        }
        Ok(Self { t_start, dt, samples })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.samples.len() - 1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t_start + index as f64 * self.dt
    }

    /// Trapezoid integral over the waveform (ns × normalised amplitude).
    pub fn area(&self) -> f64 {
        waveform_area(self)
    }
}

pub fn waveform_area(wf: &Waveform) -> f64 {
    let s = &wf.samples;
    let inner: f64 = s[1..s.len() - 1].iter().sum();
    wf.dt * (inner + 0.5 * (s[0] + s[s.len() - 1]))
}

pub fn decode_gaussian(g: &GaussianGenome, window: &TimeWindow, dt: f64) -> Result<Waveform, CodecError> {
    if !((0.0..=1.0).contains(&g.amplitude) && g.fwhm > 0.0 && g.delay.is_finite()) {
        return Err(CodecError::BadGaussian {
            amplitude: g.amplitude,
            fwhm: g.fwhm,
        });
    }
    let times = window.sample_times(dt)?;
    let samples = times.iter().map(|&t| g.value_at(t)).collect();
    Ok(Waveform {
        t_start: window.start,
        dt,
        samples,
    })
}

/// Unclipped spline through the free-form control points.
pub fn freeform_spline(g: &FreeformGenome, window: &TimeWindow, smoothing: f64) -> Result<CubicSpline, CodecError> {
    let step = window.duration() / (FREEFORM_POINTS - 1) as f64;
    let knots: Vec<f64> = (0..FREEFORM_POINTS)
        .map(|i| window.start + i as f64 * step)
        .collect();
    CubicSpline::smoothing(&knots, &g.points, smoothing)
}

pub fn decode_freeform(
    g: &FreeformGenome,
    window: &TimeWindow,
    dt: f64,
    smoothing: f64,
) -> Result<Waveform, CodecError> {
    let times = window.sample_times(dt)?;
    let spline = freeform_spline(g, window, smoothing)?;
    let samples = times.iter().map(|&t| spline.eval(t).clamp(0.0, 1.0)).collect();
    Ok(Waveform {
        t_start: window.start,
        dt,
        samples,
    })
}

/// Which of the two encodings a genome uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Gaussian,
    Freeform,
}

impl Encoding {
    pub fn space(self) -> GeneSpace {
        match self {
            Self::Gaussian => GeneSpace::gaussian(),
            Self::Freeform => GeneSpace::freeform(),
        }
    }

    pub fn gene_count(self) -> usize {
        match self {
            Self::Gaussian => 3,
            Self::Freeform => FREEFORM_POINTS,
        }
    }

    pub fn default_window(self) -> TimeWindow {
        match self {
            Self::Gaussian => TimeWindow::gaussian_default(),
            Self::Freeform => TimeWindow::freeform_default(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Freeform => "freeform",
        }
    }

    /// Divides the amplitude degrees of freedom by `beta`: only `a` for the
    /// Gaussian, every control point for the free-form pulse.
    pub fn scale_amplitude(self, genome: &Genome, beta: f64) -> Genome {
        let mut genes = genome.genes().to_vec();
        match self {
            Self::Gaussian => genes[0] /= beta,
            Self::Freeform => genes.iter_mut().for_each(|x| *x /= beta),
        }
        Genome(genes)
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "freeform" => Ok(Self::Freeform),
            other => Err(format!("unknown encoding `{other}` (expected gaussian or freeform)")),
        }
    }
}

/// Everything needed to turn a genome into a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeContext {
    pub encoding: Encoding,
    pub window: TimeWindow,
    pub dt_sample: f64,
    pub smoothing: f64,
}

impl DecodeContext {
    /// Default window, 1 ns sampling and an interpolating spline.
    pub fn new(encoding: Encoding) -> Self {
        Self {
            encoding,
            window: encoding.default_window(),
            dt_sample: 1.0,
            smoothing: 0.0,
        }
    }

    pub fn decode(&self, genome: &Genome) -> Result<Waveform, CodecError> {
        match self.encoding {
            Encoding::Gaussian => {
                decode_gaussian(&GaussianGenome::from_genome(genome)?, &self.window, self.dt_sample)
            }
            Encoding::Freeform => decode_freeform(
                &FreeformGenome::from_genome(genome)?,
                &self.window,
                self.dt_sample,
                self.smoothing,
            ),
        }
    }

    /// Area of the decoded waveform, `I(θ)`.
    pub fn area(&self, genome: &Genome) -> Result<f64, CodecError> {
        Ok(self.decode(genome)?.area())
    }
}
