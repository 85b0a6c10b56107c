//! Heterodyne spectrum-analyzer emulation.
//!
//! The periodogram is normalized so that its bins sum to the mean power
//! `⟨|Ω|²⟩` of the analysed record. A swept trace is that periodogram seen
//! through a gaussian resolution filter whose power response peaks at 1:
//! a pure tone of power `P` reads `P` at its peak. Summing a trace
//! therefore over-counts by `enbw/bin_width`; [`SpectrumTrace::integrated_power`]
//! undoes that.

use std::f64::consts::{LN_2, PI};

use eit_core::{FieldEnvelope, C64};
use rustfft::FftPlanner;
use serde::Serialize;

/// Smallest zero-padded length, in units of the RBW filter's inverse
/// width, so that the filter spans several bins.
const BINS_PER_RBW: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    Swept,
    ZeroSpan,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectrumError {
    #[error("resolution bandwidth {rbw:.4e} rad/s is below the record's resolution {resolution:.4e} rad/s")]
    Resolution { rbw: f64, resolution: f64 },
    #[error("local-oscillator offset {0:.4e} rad/s lies outside the grid's Nyquist range")]
    Nyquist(f64),
    #[error("empty record")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTrace {
    /// Offsets from the local oscillator, rad/s, ascending and uniform.
    pub frequencies: Vec<f64>,
    /// Power read at each frequency, same units as `|Ω|²`.
    pub power: Vec<f64>,
    /// Resolution bandwidth (FWHM of the filter's power response), rad/s.
    pub rbw: f64,
    pub mode: SpectrumMode,
}

impl SpectrumTrace {
    pub fn bin_width(&self) -> f64 {
        if self.frequencies.len() < 2 {
            0.0
        } else {
            self.frequencies[1] - self.frequencies[0]
        }
    }

    /// Equivalent noise bandwidth of the gaussian filter, rad/s.
    pub fn enbw(&self) -> f64 {
        self.rbw * (PI / (4.0 * LN_2)).sqrt()
    }

    /// Total power under the trace.
    pub fn integrated_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.bin_width() / self.enbw()
    }

    /// Frequency of the largest reading.
    pub fn peak_frequency(&self) -> f64 {
        let k = self.power.iter().enumerate().fold(0, |b, (j, p)| if *p > self.power[b] { j } else { b });
        self.frequencies[k]
    }
}

fn check(field: &FieldEnvelope, rbw: f64, lo_offset: f64) -> Result<(), SpectrumError> {
    if field.is_empty() {
        return Err(SpectrumError::Empty);
    }
    let dt = field.grid().dt();
    let resolution = 2.0 * PI / (field.len() as f64 * dt);
    if !(rbw >= resolution * (1.0 - 1e-9)) {
        return Err(SpectrumError::Resolution { rbw, resolution });
    }
    if !(lo_offset.abs() < PI / dt) {
        return Err(SpectrumError::Nyquist(lo_offset));
    }
    Ok(())
}

/// Periodogram of `field·e^{−i·lo·τ}` zero-padded to `m` points, in
/// ascending frequency order. Bins sum to the record's mean power.
fn periodogram(field: &FieldEnvelope, lo_offset: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let grid = field.grid();
    let n = field.len();
    let mut buf: Vec<C64> = field
        .samples()
        .iter()
        .enumerate()
        .map(|(j, s)| s * C64::from_polar(1.0, -lo_offset * (grid.time(j) - grid.t_start())))
        .collect();
    buf.resize(m, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let norm = 1.0 / (m as f64 * n as f64);
    let df = 2.0 * PI / (m as f64 * grid.dt());
    let half = m / 2;
    // fftshift: bin k ↦ frequency (k − half)·df
    let freqs = (0..m).map(|k| (k as f64 - half as f64) * df).collect();
    let power = (0..m).map(|k| buf[(k + m - half) % m].norm_sqr() * norm).collect();
    (freqs, power)
}

/// Swept spectrum of the beat between `field` and a local oscillator at
/// `lo_offset`, rad/s, through a gaussian filter of FWHM `rbw`, rad/s.
/// A tone at offset `ω₀` appears at `ω₀ − lo_offset`.
pub fn heterodyne_spectrum(field: &FieldEnvelope, lo_offset: f64, rbw: f64) -> Result<SpectrumTrace, SpectrumError> {
    check(field, rbw, lo_offset)?;
    let dt = field.grid().dt();
    let min_len = (BINS_PER_RBW * 2.0 * PI / (rbw * dt)).ceil() as usize;
    let m = field.len().max(min_len).next_power_of_two();
    let (frequencies, raw) = periodogram(field, lo_offset, m);
    let df = frequencies[1] - frequencies[0];
    // power response exp(−4 ln2 (Δω/rbw)²), cut where it drops below 1e-16
    let reach = ((16.0 * 10f64.ln() / (4.0 * LN_2)).sqrt() * rbw / df).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| {
            let x = k as f64 * df / rbw;
            (-4.0 * LN_2 * x * x).exp()
        })
        .collect();
    let power = (0..m)
        .map(|j| {
            let lo = j.saturating_sub(reach);
            let hi = (j + reach).min(m - 1);
            (lo..=hi).map(|i| raw[i] * kernel[i.abs_diff(j)]).sum()
        })
        .collect();
    Ok(SpectrumTrace { frequencies, power, rbw, mode: SpectrumMode::Swept })
}

/// Power inside one resolution bandwidth centred on the carrier: the sum
/// of periodogram bins with `|ω| ≤ rbw/2`.
pub fn zero_span_power(field: &FieldEnvelope, rbw: f64) -> Result<f64, SpectrumError> {
    check(field, rbw, 0.0)?;
    let (freqs, power) = periodogram(field, 0.0, field.len());
    Ok(freqs.iter().zip(&power).filter(|(f, _)| f.abs() <= 0.5 * rbw * (1.0 + 1e-12)).map(|(_, p)| p).sum())
}

/// Comb-line bookkeeping for a swept trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombLines {
    /// Strongest reading within `rbw` of a multiple of the spacing.
    pub max_line_power: f64,
    /// Strongest reading farther than `guard` from every multiple of the
    /// spacing, relative to `max_line_power`.
    pub secondary_ratio: f64,
    /// Lines reading above 1% of the strongest.
    pub line_count: usize,
}

/// Splits a trace into comb lines at multiples of `spacing` (rad/s) and
/// everything else. Readings within `guard` of a line belong to its
/// filter skirt and are ignored.
pub fn comb_lines(trace: &SpectrumTrace, spacing: f64, guard: f64) -> CombLines {
    let mut max_line = 0.0f64;
    let mut off_line = 0.0f64;
    let mut line_peaks = std::collections::BTreeMap::<i64, f64>::new();
    for (f, p) in trace.frequencies.iter().zip(&trace.power) {
        let k = (f / spacing).round();
        let dist = (f - k * spacing).abs();
        if dist <= trace.rbw {
            max_line = max_line.max(*p);
            let e = line_peaks.entry(k as i64).or_insert(0.0);
            *e = e.max(*p);
        } else if dist > guard {
            off_line = off_line.max(*p);
        }
    }
    let line_count = line_peaks.values().filter(|p| **p > 0.01 * max_line).count();
    let secondary_ratio = if max_line > 0.0 { off_line / max_line } else { 0.0 };
    CombLines { max_line_power: max_line, secondary_ratio, line_count }
}
