//! Control and probe temporal modes: pulse trains, gated envelopes and
//! multi-frequency control programs.

use alloc::format;
use alloc::vec::Vec;


use crate::model::{FieldEnvelope, TimeGrid};
use crate::{Error, Result, C64};

/// Tolerance, in periods, used to keep sample-aligned edges stable under
/// round-off.
const EDGE_EPS: f64 = 1e-9;

/// Slow envelope shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeShape {
    Constant,
    /// Gaussian with intensity (`|Ω|²`) FWHM `fwhm`, s.
    Gaussian { center: f64, fwhm: f64 },
    /// Plateau of half-amplitude width `duration` with raised-cosine edges of
    /// full width `rise` centred on the half-amplitude points. `rise = 0`
    /// gives a hard rectangle.
    Flattop { center: f64, duration: f64, rise: f64 },
}

impl EnvelopeShape {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            EnvelopeShape::Constant => 1.0,
            EnvelopeShape::Gaussian { center, fwhm } => {
                let x = (t - center) / fwhm;
                (-2.0 * core::f64::consts::LN_2 * x * x).exp()
            }
            EnvelopeShape::Flattop { center, duration, rise } => {
                smooth_box(t, center - duration / 2.0, center + duration / 2.0, rise)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            EnvelopeShape::Constant => Ok(()),
            EnvelopeShape::Gaussian { center, fwhm } => {
                if !(fwhm > 0.0 && fwhm.is_finite() && center.is_finite()) {
                    return Err(Error::invalid(format!("gaussian envelope needs fwhm > 0, got {fwhm}")));
                }
                Ok(())
            }
            EnvelopeShape::Flattop { center, duration, rise } => {
                if !(duration > 0.0 && rise >= 0.0 && rise <= duration && center.is_finite()) {
                    return Err(Error::invalid(format!(
                        "flattop envelope needs duration > 0 and 0 <= rise <= duration, got duration={duration}, rise={rise}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Rectangle `[start, end)` with raised-cosine edges of width `rise`.
fn smooth_box(t: f64, start: f64, end: f64, rise: f64) -> f64 {
    if rise == 0.0 {
        return if t >= start && t < end { 1.0 } else { 0.0 };
    }
    let edge = |x: f64| -> f64 {
        // 0 for x <= -rise/2, 1 for x >= rise/2
        if x <= -rise / 2.0 {
            0.0
        } else if x >= rise / 2.0 {
            1.0
        } else {
            0.5 * (1.0 - (core::f64::consts::PI * (x / rise + 0.5)).cos())
        }
    };
    edge(t - start) * edge(end - t)
}

/// Square-wave modulation `f(τ)` of a pulse-train control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrain {
    /// Repetition rate, Hz.
    pub frequency: f64,
    /// On-fraction of each period, `0 < duty <= 1`.
    pub duty: f64,
    /// Offset of the on-window, in periods.
    pub phase: f64,
    /// Raised-cosine edge width, s. Zero gives sample-aligned hard edges.
    pub rise: f64,
}

impl PulseTrain {
    pub fn new(frequency: f64, duty: f64) -> Self {
        Self { frequency, duty, phase: 0.0, rise: 0.0 }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_rise(mut self, rise: f64) -> Self {
        self.rise = rise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::invalid(format!("duty must lie in (0, 1], got {}", self.duty)));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::invalid(format!("pulse-train frequency must be > 0, got {}", self.frequency)));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("pulse-train phase must be finite"));
        }
        let period = 1.0 / self.frequency;
        if self.duty < 1.0
            && !(self.rise >= 0.0 && self.rise <= self.duty * period && self.rise <= (1.0 - self.duty) * period)
        {
            return Err(Error::invalid(format!(
                "edge rise time {} s does not fit inside the on/off windows",
                self.rise
            )));
        }
        Ok(())
    }

    /// Period average of `value²`. Each raised-cosine edge holds 3/8 of
    /// its width in power, so the plateau loss is `rise/4` per pulse.
    pub fn mean_power(&self) -> f64 {
        if self.duty >= 1.0 {
            return 1.0;
        }
        self.duty - 0.25 * self.rise * self.frequency
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.duty >= 1.0 {
            return 1.0;
        }
        let u = self.frequency * t - self.phase;
        let cycle = (u + EDGE_EPS).floor();
        let x = u - cycle; // position in the period, ~[0, 1)
        if self.rise == 0.0 {
            return if x + EDGE_EPS < self.duty { 1.0 } else { 0.0 };
        }
        let period = 1.0 / self.frequency;
        let p = x * period;
        let on = self.duty * period;
        // neighbouring periods contribute near the wrap-around edge
        smooth_box(p, 0.0, on, self.rise)
            + smooth_box(p, period, period + on, self.rise)
            + smooth_box(p, -period, -period + on, self.rise)
    }
}

/// Unit-amplitude square wave on `grid`.
pub fn pulse_train(grid: &TimeGrid, frequency: f64, duty: f64, phase: f64) -> Result<FieldEnvelope> {
    let train = PulseTrain::new(frequency, duty).with_phase(phase);
    train.validate()?;
    grid.require_resolved(frequency)?;
    Ok(FieldEnvelope::from_fn(*grid, |t| C64::new(train.value(t), 0.0)))
}

/// One control color: `amplitude × envelope × gate × modulation ×
/// exp(i(frequency_offset·τ + relative_phase))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlComponent {
    /// Peak Rabi frequency, rad/s.
    pub amplitude: f64,
    /// Two-photon offset of this color, rad/s.
    pub frequency_offset: f64,
    /// Phase at τ = 0, rad.
    pub relative_phase: f64,
    pub envelope: EnvelopeShape,
    /// Sorted, non-overlapping `[t_on, t_off)` intervals, s. `None` means
    /// always on.
    pub gate: Option<Vec<(f64, f64)>>,
    pub modulation: Option<PulseTrain>,
}

impl ControlComponent {
    /// Continuous-wave component of constant amplitude.
    pub fn cw(amplitude: f64) -> Self {
        Self {
            amplitude,
            frequency_offset: 0.0,
            relative_phase: 0.0,
            envelope: EnvelopeShape::Constant,
            gate: None,
            modulation: None,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.frequency_offset = offset;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.relative_phase = phase;
        self
    }

    pub fn with_envelope(mut self, envelope: EnvelopeShape) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn with_gate(mut self, gate: Vec<(f64, f64)>) -> Self {
        self.gate = Some(gate);
        self
    }

    pub fn with_modulation(mut self, modulation: PulseTrain) -> Self {
        self.modulation = Some(modulation);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(format!("control amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(self.frequency_offset.is_finite() && self.relative_phase.is_finite()) {
            return Err(Error::invalid("control offset and phase must be finite"));
        }
        self.envelope.validate()?;
        if let Some(m) = &self.modulation {
            m.validate()?;
        }
        if let Some(gate) = &self.gate {
            validate_gate(gate)?;
        }
        Ok(())
    }

    /// Highest frequency, Hz, the grid must resolve for this component.
    pub fn max_frequency_hz(&self) -> f64 {
        let offset = self.frequency_offset.abs() / (2.0 * core::f64::consts::PI);
        let modulation = self.modulation.filter(|m| m.duty < 1.0).map_or(0.0, |m| m.frequency);
        offset.max(modulation)
    }

    fn gate_value(&self, t: f64) -> f64 {
        match &self.gate {
            None => 1.0,
            Some(gate) => {
                if gate.iter().any(|&(on, off)| t >= on && t < off) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Real slow factor (everything except the carrier phase) at `t`.
    pub fn magnitude(&self, t: f64) -> f64 {
        let g = self.gate_value(t);
        if g == 0.0 {
            return 0.0;
        }
        let m = self.modulation.map_or(1.0, |m| m.value(t));
        self.amplitude * self.envelope.value(t) * g * m
    }

    pub fn value(&self, t: f64) -> C64 {
        let mag = self.magnitude(t);
        if mag == 0.0 {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(mag, self.frequency_offset * t + self.relative_phase)
    }
}

fn validate_gate(gate: &[(f64, f64)]) -> Result<()> {
    for &(on, off) in gate {
        if on.is_nan() || off.is_nan() || on >= off {
            return Err(Error::invalid(format!("gate interval [{on}, {off}) is empty or malformed")));
        }
    }
    for w in gate.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::invalid("gate intervals must be sorted and non-overlapping"));
        }
    }
    Ok(())
}

/// Removes `[t_off, t_on)` from a gate (`None` = always on).
pub fn gate_without(gate: Option<&[(f64, f64)]>, t_off: f64, t_on: f64) -> Vec<(f64, f64)> {
    let base: Vec<(f64, f64)> = match gate {
        Some(g) => g.to_vec(),
        None => alloc::vec![(f64::NEG_INFINITY, f64::INFINITY)],
    };
    if t_on <= t_off {
        return base;
    }
    let mut out = Vec::with_capacity(base.len() + 1);
    for (on, off) in base {
        if off <= t_off || on >= t_on {
            out.push((on, off));
            continue;
        }
        if on < t_off {
            out.push((on, t_off));
        }
        if off > t_on {
            out.push((t_on, off));
        }
    }
    out
}

/// Sum of control components evaluated on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProgram {
    pub components: Vec<ControlComponent>,
}

impl ControlProgram {
    pub fn new(components: Vec<ControlComponent>) -> Result<Self> {
        let program = Self { components };
        program.validate()?;
        Ok(program)
    }

    pub fn single(component: ControlComponent) -> Result<Self> {
        Self::new(alloc::vec![component])
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("control program has no components"));
        }
        self.components.iter().try_for_each(ControlComponent::validate)
    }

    pub fn max_frequency_hz(&self) -> f64 {
        self.components.iter().map(ControlComponent::max_frequency_hz).fold(0.0, f64::max)
    }

    /// Copy with every component switched off on `[t_off, t_on)`.
    pub fn gated_off(&self, t_off: f64, t_on: f64) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.gate = Some(gate_without(c.gate.as_deref(), t_off, t_on));
                c
            })
            .collect();
        Self { components }
    }
}

/// Pointwise sum of all components on `grid`.
pub fn evaluate_program(program: &ControlProgram, grid: &TimeGrid) -> Result<FieldEnvelope> {
    program.validate()?;
    for c in &program.components {
        grid.require_resolved(c.max_frequency_hz()).map_err(|e| match e {
            Error::GridResolution { frequency_hz, samples_per_period, .. } => Error::invalid(format!(
                "control component at {frequency_hz} Hz is not resolved by the grid ({samples_per_period:.2} samples per period)"
            )),
            other => other,
        })?;
    }
    Ok(FieldEnvelope::from_fn(*grid, |t| program.components.iter().map(|c| c.value(t)).sum()))
}

/// Probe sharing the control's fast modulation: `envelope × Ω_c/max|Ω_c|`.
pub fn matched_probe(control_mode: &FieldEnvelope, envelope: &FieldEnvelope) -> Result<FieldEnvelope> {
    control_mode.require_same_grid(envelope, "matched_probe")?;
    let peak = control_mode.peak_magnitude();
    if peak == 0.0 {
        return Err(Error::ZeroEnergy("control mode"));
    }
    let samples = control_mode
        .samples()
        .iter()
        .zip(envelope.samples())
        .map(|(c, e)| e * c / peak)
        .collect();
    Ok(FieldEnvelope::new(*control_mode.grid(), samples)?.with_carrier_offset(envelope.carrier_offset))
}

/// Envelope of a single slow shape with complex amplitude.
pub fn shaped_envelope(grid: &TimeGrid, shape: EnvelopeShape, amplitude: C64) -> Result<FieldEnvelope> {
    shape.validate()?;
    Ok(FieldEnvelope::from_fn(*grid, |t| amplitude * shape.value(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn grid_us(t_end_us: f64, n: usize) -> TimeGrid {
        TimeGrid::new(0.0, t_end_us * 1e-6, n).unwrap()
    }

    /// Direct DFT coefficient of a sampled signal at angular frequency `w`,
    /// normalised so a constant signal gives its value.
    fn dft_at(samples: &[C64], grid: &TimeGrid, w: f64) -> C64 {
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(j, s)| s * C64::from_polar(1.0, -w * grid.time(j)))
            .sum::<C64>()
            / n
    }

    #[test]
    fn smoothed_train_mean_power_matches_samples() {
        let train = PulseTrain::new(1e6, 0.2).with_rise(50e-9);
        // ten periods, 0.1 ns steps
        let n = 100_000;
        let dt = 1e-5 / n as f64;
        let avg = (0..n).map(|j| train.value(j as f64 * dt).powi(2)).sum::<f64>() / n as f64;
        assert!((avg - train.mean_power()).abs() < 1e-6, "{avg} vs {}", train.mean_power());
    }

    #[test]
    fn full_duty_is_constant() {
        let grid = grid_us(10.0, 1001);
        let train = pulse_train(&grid, 1e6, 1.0, 0.0).unwrap();
        assert!(train.samples().iter().all(|s| *s == C64::new(1.0, 0.0)));
    }

    #[test]
    fn one_megahertz_twenty_percent() {
        // 100 samples per 1 µs period
        let grid = TimeGrid::new(0.0, 10e-6, 1000).unwrap();
        let grid = TimeGrid::new(0.0, grid.t_start() + 999.0 * 1e-8, 1000).unwrap();
        let train = pulse_train(&grid, 1e6, 0.2, 0.0).unwrap();
        for period in 0..10 {
            let on = train.samples()[period * 100..(period + 1) * 100].iter().filter(|s| s.re == 1.0).count();
            assert_eq!(on, 20, "period {period}");
            assert!(train.samples()[period * 100..period * 100 + 20].iter().all(|s| s.re == 1.0));
        }
        assert!(train.samples().iter().all(|s| s.re == 0.0 || s.re == 1.0));
    }

    #[test]
    fn pulse_train_lines_follow_sinc_series() {
        // 40 whole periods, 200 samples per period: lines sit exactly on DFT bins.
        let dt = 5e-9;
        let n = 8000;
        let grid = TimeGrid::new(0.0, (n - 1) as f64 * dt, n).unwrap();
        let train = pulse_train(&grid, 1e6, 0.2, 0.0).unwrap();
        let dc = dft_at(train.samples(), &grid, 0.0).norm_sqr();
        assert!((dc - 0.04).abs() < 1e-12);
        for k in 1..=8 {
            let w = 2.0 * PI * 1e6 * k as f64;
            let line = dft_at(train.samples(), &grid, w).norm_sqr();
            // closed form: |c_k|² = (sin(πkD)/(πk))² for duty D
            let x = PI * k as f64;
            let analytic = (libm::sin(0.2 * x) / x).powi(2);
            let rel = line / dc;
            let expected = analytic / 0.04;
            if expected > 1e-6 {
                // sampled square wave: discrete Dirichlet kernel vs sinc
                assert!((rel - expected).abs() <= 0.01 * expected, "k={k}: {rel} vs {expected}");
            } else {
                assert!(rel < 1e-6, "k={k} should vanish, got {rel}");
            }
        }
        // nothing between the lines
        let off = dft_at(train.samples(), &grid, 2.0 * PI * 1.5e6).norm_sqr();
        assert!(off < 1e-20);
    }

    #[test]
    fn unresolved_pulse_train_rejected() {
        let grid = grid_us(10.0, 101); // 0.1 µs step
        assert!(matches!(pulse_train(&grid, 1e6, 0.2, 0.0), Err(Error::GridResolution { .. })));
        assert!(pulse_train(&grid_us(10.0, 1001), 1e6, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_cw_component_power() {
        let grid = grid_us(1.0, 101);
        let env = evaluate_program(&ControlProgram::single(ControlComponent::cw(3.0)).unwrap(), &grid).unwrap();
        assert!(env.samples().iter().all(|s| *s == C64::new(3.0, 0.0)));
        assert!((env.average_power() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn two_colors_add_in_power() {
        // 160 MHz offset, 32 samples per period, 20 whole beat periods
        let offset = 2.0 * PI * 160e6;
        let dt = 1.0 / (160e6 * 32.0);
        let n = 20 * 32;
        let grid = TimeGrid::new(0.0, (n - 1) as f64 * dt, n).unwrap();
        let (a1, a2) = (2.0e7, 5.0e7);
        let program = ControlProgram::new(vec![
            ControlComponent::cw(a1),
            ControlComponent::cw(a2).with_offset(offset),
        ])
        .unwrap();
        let env = evaluate_program(&program, &grid).unwrap();
        // independent numerical time average of |a1 + a2 e^{iωt}|²
        let numeric: f64 = (0..n)
            .map(|j| (C64::new(a1, 0.0) + C64::from_polar(a2, offset * j as f64 * dt)).norm_sqr())
            .sum::<f64>()
            / n as f64;
        let analytic = a1 * a1 + a2 * a2;
        assert!((env.average_power() - analytic).abs() < 1e-9 * analytic);
        assert!((numeric - analytic).abs() < 1e-9 * analytic);
    }

    #[test]
    fn duty_scales_average_power() {
        let dt = 1e-8;
        let n = 1000;
        let grid = TimeGrid::new(0.0, (n - 1) as f64 * dt, n).unwrap();
        let c = ControlComponent::cw(2.0).with_modulation(PulseTrain::new(1e6, 0.2));
        let env = evaluate_program(&ControlProgram::single(c).unwrap(), &grid).unwrap();
        assert!((env.average_power() - 0.2 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn unresolved_component_rejected() {
        let grid = grid_us(1.0, 101);
        let program = ControlProgram::single(ControlComponent::cw(1.0).with_offset(2.0 * PI * 1e9)).unwrap();
        assert!(matches!(evaluate_program(&program, &grid), Err(Error::InvalidArgument(_))));
        assert!(ControlProgram::new(vec![]).is_err());
    }

    #[test]
    fn gate_is_exact_indicator() {
        let grid = grid_us(10.0, 1001);
        let gate = vec![(1e-6, 3e-6), (5e-6, 6e-6)];
        let c = ControlComponent::cw(1.5).with_offset(2.0 * PI * 1e6).with_gate(gate.clone());
        let env = evaluate_program(&ControlProgram::single(c).unwrap(), &grid).unwrap();
        for (t, s) in grid.times().zip(env.samples()) {
            let inside = gate.iter().any(|&(a, b)| t >= a && t < b);
            if inside {
                assert!((s.norm() - 1.5).abs() < 1e-12);
            } else {
                assert_eq!(*s, C64::new(0.0, 0.0));
            }
        }
        assert!(ControlComponent::cw(1.0).with_gate(vec![(2.0, 1.0)]).validate().is_err());
        assert!(ControlComponent::cw(1.0).with_gate(vec![(0.0, 2.0), (1.0, 3.0)]).validate().is_err());
    }

    #[test]
    fn gated_off_removes_interval() {
        assert_eq!(gate_without(None, 1.0, 2.0), vec![(f64::NEG_INFINITY, 1.0), (2.0, f64::INFINITY)]);
        assert_eq!(gate_without(Some(&[(0.0, 5.0)]), 1.0, 2.0), vec![(0.0, 1.0), (2.0, 5.0)]);
        assert_eq!(gate_without(Some(&[(0.0, 5.0)]), 3.0, 3.0), vec![(0.0, 5.0)]);
        assert_eq!(gate_without(Some(&[(0.0, 1.0), (4.0, 5.0)]), 0.5, 4.5), vec![(0.0, 0.5), (4.5, 5.0)]);
    }

    #[test]
    fn matched_probe_examples() {
        let dt = 1e-8;
        let n = 4001;
        let grid = TimeGrid::new(0.0, (n - 1) as f64 * dt, n).unwrap();
        let envelope = shaped_envelope(&grid, EnvelopeShape::Gaussian { center: 20e-6, fwhm: 10e-6 }, C64::new(1e5, 0.0)).unwrap();

        let cw = evaluate_program(&ControlProgram::single(ControlComponent::cw(7.0)).unwrap(), &grid).unwrap();
        let same = matched_probe(&cw, &envelope).unwrap();
        for (a, b) in same.samples().iter().zip(envelope.samples()) {
            assert!((a - b).norm() <= 1e-15 * b.norm());
        }

        let train = ControlComponent::cw(7.0).with_modulation(PulseTrain::new(1e6, 0.2));
        let control = evaluate_program(&ControlProgram::single(train).unwrap(), &grid).unwrap();
        let probe = matched_probe(&control, &envelope).unwrap();
        for j in 0..n {
            let c = control.samples()[j];
            if c.norm() > 0.0 {
                let ratio = probe.samples()[j] / c;
                let expected = envelope.samples()[j] / 7.0;
                assert!((ratio - expected).norm() <= 1e-12 * expected.norm().max(1e-300));
            } else {
                assert_eq!(probe.samples()[j], C64::new(0.0, 0.0));
            }
        }
        // envelope of the pulsed probe is still centred on the 10 µs gaussian
        assert!((probe.centroid().unwrap() - 20e-6).abs() < 0.1e-6);
    }

    #[test]
    fn flattop_edges() {
        let s = EnvelopeShape::Flattop { center: 0.0, duration: 2.0, rise: 0.5 };
        assert_eq!(s.value(0.0), 1.0);
        assert!((s.value(1.0) - 0.5).abs() < 1e-12);
        assert_eq!(s.value(1.25), 0.0);
        assert_eq!(s.value(0.75), 1.0);
        let hard = EnvelopeShape::Flattop { center: 0.0, duration: 2.0, rise: 0.0 };
        assert_eq!((hard.value(-1.0), hard.value(0.999), hard.value(1.0)), (1.0, 1.0, 0.0));
    }

    #[test]
    fn smooth_pulse_train_keeps_duty() {
        let dt = 1e-9;
        let n = 10_000;
        let grid = TimeGrid::new(0.0, (n - 1) as f64 * dt, n).unwrap();
        let train = PulseTrain::new(1e6, 0.2).with_rise(20e-9);
        train.validate().unwrap();
        let mean = grid.times().map(|t| train.value(t)).sum::<f64>() / n as f64;
        assert!((mean - 0.2).abs() < 1e-3);
        assert!(PulseTrain::new(1e6, 0.2).with_rise(0.3e-6).validate().is_err());
    }

    proptest! {
        #[test]
        fn pulse_train_mean_matches_duty(duty in 0.05f64..1.0, spp in 16usize..200, phase in 0.0f64..1.0) {
            let f = 1e6;
            let dt = 1.0 / (f * spp as f64);
            let periods = 7;
            let n = periods * spp;
            let grid = TimeGrid::new(0.0, (n - 1) as f64 * dt, n).unwrap();
            let train = pulse_train(&grid, f, duty, phase).unwrap();
            let mean = train.samples().iter().map(|s| s.re).sum::<f64>() / n as f64;
            prop_assert!((mean - duty).abs() <= 1.0 / spp as f64 + 1e-12);
        }

        #[test]
        fn program_is_linear_in_amplitude(a in 0.0f64..1e8, b in 0.0f64..1e8, s in 0.0f64..10.0) {
            let grid = TimeGrid::new(0.0, 1e-6, 257).unwrap();
            let make = |a: f64, b: f64| {
                let p = ControlProgram::new(vec![
                    ControlComponent::cw(a).with_modulation(PulseTrain::new(4e6, 0.3)),
                    ControlComponent::cw(b).with_offset(2.0 * PI * 8e6),
                ]).unwrap();
                evaluate_program(&p, &grid).unwrap()
            };
            let base = make(a, b);
            let scaled = make(s * a, b);
            let only_b = make(0.0, b);
            for j in 0..grid.n_samples() {
                let expected = only_b.samples()[j] + (base.samples()[j] - only_b.samples()[j]) * s;
                prop_assert!((scaled.samples()[j] - expected).norm() <= 1e-6 * (1.0 + expected.norm()));
            }
        }
    }
}
