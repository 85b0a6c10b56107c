//! Physical and numerical types shared by the solvers and diagnostics.
//!
//! Unit conventions: times in seconds, lengths in metres, rates and Rabi
//! frequencies in rad/s. The only frequency carried in Hz is the repetition
//! rate of a pulse train.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


use crate::special::{gauss_hermite, normal_pdf, normal_quantile};
use crate::{Error, Result, C64};

/// Minimum samples per period for any configured frequency.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 16.0;

/// Distribution of one-photon detunings across the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetuningProfile {
    #[default]
    None,
    Gaussian,
    Lorentzian,
}

/// How velocity classes sample the detuning profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Equal-probability strata represented by their conditional means,
    /// rescaled so the discrete variance matches the profile.
    #[default]
    Stratified,
    /// Gauss–Hermite nodes; gaussian profiles only.
    GaussHermite,
}

/// Atomic and geometric parameters of the Λ medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMedium {
    /// Excited-state decay rate Γ, rad/s.
    pub gamma: f64,
    /// Lumped coupling `g = μ²ωN/(2ħε₀c)`, rad/(s·m). The probe obeys
    /// `∂Ω_p/∂ζ = i g c_a`.
    pub coupling_density: f64,
    /// Cell length, m.
    pub length: f64,
    /// FWHM of the one-photon detuning distribution, rad/s.
    pub inhomogeneous_width: f64,
    pub detuning_profile: DetuningProfile,
    /// Decay rate of the ground-state coherence, rad/s. Zero reproduces the
    /// bare amplitude equations.
    pub ground_decoherence: f64,
}

impl LambdaMedium {
    /// Homogeneous medium without ground-state decoherence.
    pub fn new(gamma: f64, coupling_density: f64, length: f64) -> Result<Self> {
        let medium = Self {
            gamma,
            coupling_density,
            length,
            inhomogeneous_width: 0.0,
            detuning_profile: DetuningProfile::None,
            ground_decoherence: 0.0,
        };
        medium.validate()?;
        Ok(medium)
    }

    /// Homogeneous medium with the coupling chosen to give optical depth `d`.
    pub fn with_optical_depth(gamma: f64, depth: f64, length: f64) -> Result<Self> {
        if !(depth >= 0.0 && depth.is_finite()) {
            return Err(Error::invalid(format!("optical depth must be finite and >= 0, got {depth}")));
        }
        Self::new(gamma, depth * gamma / (4.0 * length), length)
    }

    pub fn inhomogeneous(mut self, profile: DetuningProfile, fwhm: f64) -> Result<Self> {
        self.detuning_profile = profile;
        self.inhomogeneous_width = fwhm;
        self.validate()?;
        Ok(self)
    }

    pub fn with_ground_decoherence(mut self, rate: f64) -> Result<Self> {
        self.ground_decoherence = rate;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if !positive(self.gamma) {
            return Err(Error::invalid(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !positive(self.length) {
            return Err(Error::invalid(format!("length must be > 0, got {}", self.length)));
        }
        if !non_negative(self.coupling_density) {
            return Err(Error::invalid(format!(
                "coupling_density must be >= 0, got {}",
                self.coupling_density
            )));
        }
        if !non_negative(self.inhomogeneous_width) {
            return Err(Error::invalid(format!(
                "inhomogeneous_width must be >= 0, got {}",
                self.inhomogeneous_width
            )));
        }
        if !non_negative(self.ground_decoherence) {
            return Err(Error::invalid(format!(
                "ground_decoherence must be >= 0, got {}",
                self.ground_decoherence
            )));
        }
        Ok(())
    }

    pub fn optical_depth(&self) -> f64 {
        optical_depth(self)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.inhomogeneous_width == 0.0 || self.detuning_profile == DetuningProfile::None
    }

    /// Local-time group velocity `|Ω_c|²/g` for a control power `|Ω_c|²`.
    pub fn local_group_velocity(&self, control_power: f64) -> f64 {
        if self.coupling_density == 0.0 {
            f64::INFINITY
        } else {
            control_power / self.coupling_density
        }
    }
}

/// Resonant optical depth `d = 4gL/Γ`; with the control off a resonant cw
/// probe is transmitted with intensity `exp(−d)`.
pub fn optical_depth(medium: &LambdaMedium) -> f64 {
    4.0 * medium.coupling_density * medium.length / medium.gamma
}

/// Velocity-class detunings (rad/s) and weights for `n` classes, using the
/// default stratified quadrature.
pub fn make_velocity_classes(medium: &LambdaMedium, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    make_velocity_classes_with(medium, n, Quadrature::Stratified)
}

pub fn make_velocity_classes_with(
    medium: &LambdaMedium,
    n: usize,
    quadrature: Quadrature,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::invalid(format!("velocity class count must be odd, got {n}")));
    }
    medium.validate()?;
    if medium.is_homogeneous() {
        return Ok((vec![0.0], vec![1.0]));
    }
    let width = medium.inhomogeneous_width;
    let nf = n as f64;
    let classes = match (medium.detuning_profile, quadrature) {
        (DetuningProfile::Gaussian, Quadrature::Stratified) => {
            let sigma = width / (2.0 * (2.0 * 2f64.ln()).sqrt());
            let edges: Vec<f64> = (0..=n).map(|k| normal_quantile(k as f64 / nf)).collect();
            let mut nodes: Vec<f64> = edges
                .windows(2)
                .map(|e| nf * (normal_pdf(e[0]) - normal_pdf(e[1])))
                .collect();
            symmetrize(&mut nodes);
            let second: f64 = nodes.iter().map(|x| x * x).sum::<f64>() / nf;
            let scale = if second > 0.0 { sigma / second.sqrt() } else { 0.0 };
            (nodes.iter().map(|x| x * scale).collect(), vec![1.0 / nf; n])
        }
        (DetuningProfile::Gaussian, Quadrature::GaussHermite) => {
            let sigma = width / (2.0 * (2.0 * 2f64.ln()).sqrt());
            let (x, w) = gauss_hermite(n);
            let norm: f64 = w.iter().sum();
            let mut nodes: Vec<f64> = x.iter().map(|x| x * core::f64::consts::SQRT_2 * sigma).collect();
            symmetrize(&mut nodes);
            let mut weights: Vec<f64> = w.iter().map(|w| w / norm).collect();
            symmetrize_weights(&mut weights);
            (nodes, weights)
        }
        (DetuningProfile::Lorentzian, Quadrature::Stratified) => {
            let half = width / 2.0;
            let mut nodes: Vec<f64> = (0..n)
                .map(|k| {
                    let p = (k as f64 + 0.5) / nf;
                    half * (core::f64::consts::PI * (p - 0.5)).tan()
                })
                .collect();
            symmetrize(&mut nodes);
            (nodes, vec![1.0 / nf; n])
        }
        (DetuningProfile::Lorentzian, Quadrature::GaussHermite) => {
            return Err(Error::invalid("Gauss-Hermite quadrature requires a gaussian profile"));
        }
        (DetuningProfile::None, _) => unreachable!("homogeneous handled above"),
    };
    Ok(classes)
}

/// Enforces exact antisymmetry of ascending nodes about zero.
fn symmetrize(nodes: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

fn symmetrize_weights(weights: &mut [f64]) {
    let n = weights.len();
    for i in 0..n / 2 {
        let m = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = m;
        weights[n - 1 - i] = m;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
}

/// Uniform grid of local time τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::invalid(format!("time grid needs at least 2 samples, got {n_samples}")));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::invalid(format!("time grid bounds must be finite with t_end > t_start, got [{t_start}, {t_end}]")));
        }
        Ok(Self { t_start, t_end, n_samples })
    }

    /// Grid that is validated to resolve `max_frequency_hz`.
    pub fn with_max_frequency(t_start: f64, t_end: f64, n_samples: usize, max_frequency_hz: f64) -> Result<Self> {
        let grid = Self::new(t_start, t_end, n_samples)?;
        grid.require_resolved(max_frequency_hz)?;
        Ok(grid)
    }

    /// Grid with spacing `dt`, extended so that it covers `[t_start, t_end]`.
    pub fn with_step(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be > 0, got {dt}")));
        }
        let steps = ((t_end - t_start) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t_start, t_start + steps as f64 * dt, steps + 1)
    }

    /// Errors unless a periodic feature at `frequency_hz` gets at least
    /// [`MIN_SAMPLES_PER_PERIOD`] samples per period.
    pub fn require_resolved(&self, frequency_hz: f64) -> Result<()> {
        let f = frequency_hz.abs();
        if f == 0.0 {
            return Ok(());
        }
        let samples_per_period = 1.0 / (f * self.dt());
        if samples_per_period + 1e-9 < MIN_SAMPLES_PER_PERIOD {
            return Err(Error::GridResolution {
                frequency_hz: f,
                samples_per_period,
                required: MIN_SAMPLES_PER_PERIOD,
            });
        }
        Ok(())
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t_start + index as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..self.n_samples).map(move |i| self.t_start + i as f64 * dt)
    }

    /// Same span with the step divided by `factor`; existing samples stay on
    /// the refined grid.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("refinement factor must be >= 1"));
        }
        Self::new(self.t_start, self.t_end, (self.n_samples - 1) * factor + 1)
    }

    /// Index of the sample nearest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let x = ((t - self.t_start) / self.dt()).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.n_samples - 1)
        }
    }
}

/// Complex Rabi-frequency samples on a [`TimeGrid`].
///
/// Samples live in the common rotating frame used by the solvers, so any
/// frequency offset is already part of the sample phase. `carrier_offset`
/// (rad/s) only shifts the frequency axis of spectral diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnvelope {
    grid: TimeGrid,
    samples: Vec<C64>,
    pub carrier_offset: f64,
}

impl FieldEnvelope {
    pub fn new(grid: TimeGrid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return Err(Error::invalid(format!(
                "envelope has {} samples but the grid has {}",
                samples.len(),
                grid.n_samples()
            )));
        }
        Ok(Self { grid, samples, carrier_offset: 0.0 })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, samples: vec![C64::new(0.0, 0.0); grid.n_samples()], carrier_offset: 0.0 }
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> C64) -> Self {
        let samples = grid.times().map(&mut f).collect();
        Self { grid, samples, carrier_offset: 0.0 }
    }

    pub fn with_carrier_offset(mut self, offset: f64) -> Self {
        self.carrier_offset = offset;
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|Ω(τ)|²` over the grid, rad²/s².
    pub fn average_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// `Σ|Ω|² dt`, the discrete time integral of the power.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Energy-weighted mean time, or `None` for a zero field.
    pub fn centroid(&self) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (t, s) in self.grid.times().zip(&self.samples) {
            let p = s.norm_sqr();
            num += t * p;
            den += p;
        }
        (den > 0.0).then(|| num / den)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|s| *s *= factor);
        out
    }

    /// Sub-envelope on the samples `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.samples.len() || end < start + 2 {
            return Err(Error::invalid(format!(
                "window {start}..{end} is not a valid sub-range of {} samples",
                self.samples.len()
            )));
        }
        let grid = TimeGrid::new(self.grid.time(start), self.grid.time(end - 1), end - start)?;
        Ok(Self { grid, samples: self.samples[start..end].to_vec(), carrier_offset: self.carrier_offset })
    }

    /// Fraction of the energy carried by the first and last `edge` samples.
    pub fn edge_energy_fraction(&self, edge: usize) -> f64 {
        let total: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.samples.len();
        let edge = edge.min(n / 2);
        let head: f64 = self.samples[..edge].iter().map(|s| s.norm_sqr()).sum();
        let tail: f64 = self.samples[n - edge..].iter().map(|s| s.norm_sqr()).sum();
        (head + tail) / total
    }

    pub(crate) fn require_same_grid(&self, other: &FieldEnvelope, what: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::invalid(format!("{what}: envelopes are sampled on different grids")));
        }
        Ok(())
    }
}

/// Full discretisation used by the Maxwell–Bloch solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationGrid {
    pub time: TimeGrid,
    n_z_slices: usize,
    class_detunings: Vec<f64>,
    class_weights: Vec<f64>,
}

impl SimulationGrid {
    pub fn new(time: TimeGrid, n_z_slices: usize, medium: &LambdaMedium, n_velocity_classes: usize) -> Result<Self> {
        Self::with_quadrature(time, n_z_slices, medium, n_velocity_classes, Quadrature::default())
    }

    pub fn with_quadrature(
        time: TimeGrid,
        n_z_slices: usize,
        medium: &LambdaMedium,
        n_velocity_classes: usize,
        quadrature: Quadrature,
    ) -> Result<Self> {
        let (class_detunings, class_weights) = make_velocity_classes_with(medium, n_velocity_classes, quadrature)?;
        Self::from_classes(time, n_z_slices, class_detunings, class_weights)
    }

    pub fn from_classes(time: TimeGrid, n_z_slices: usize, class_detunings: Vec<f64>, class_weights: Vec<f64>) -> Result<Self> {
        if n_z_slices < 2 {
            return Err(Error::invalid(format!("need at least 2 cell slices, got {n_z_slices}")));
        }
        if class_detunings.is_empty() || class_detunings.len() != class_weights.len() {
            return Err(Error::invalid("velocity class detunings and weights must be non-empty and of equal length"));
        }
        let total: f64 = class_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || class_weights.iter().any(|w| *w < 0.0) {
            return Err(Error::invalid(format!("velocity class weights must be >= 0 and sum to 1, got {total}")));
        }
        Ok(Self { time, n_z_slices, class_detunings, class_weights })
    }

    pub fn n_z_slices(&self) -> usize {
        self.n_z_slices
    }

    pub fn n_velocity_classes(&self) -> usize {
        self.class_detunings.len()
    }

    pub fn class_detunings(&self) -> &[f64] {
        &self.class_detunings
    }

    pub fn class_weights(&self) -> &[f64] {
        &self.class_weights
    }
}
