//! Derived quantities: adiabaticity margins, mode overlap, delays, EIT
//! linewidth and the delay-bandwidth figure of merit.

use alloc::format;
use alloc::vec::Vec;


use crate::adiabatic::{CONTROL_THRESHOLD, PROBE_THRESHOLD};
use crate::model::{FieldEnvelope, LambdaMedium};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// Fraction of `max|c_c|` above which a sample belongs to the coherence support.
pub const SUPPORT_FRACTION: f64 = 1e-3;

/// Margins of the three adiabatic-following conditions.
///
/// `T` and `T₁` are the inverse RMS bandwidths of `c_c = −Ω_p/Ω_c` and of
/// `Ω_c`. The coherence only responds to the control averaged over its own
/// variation time, so the control magnitude entering the margins is the RMS
/// of `|Ω_c|` under a triangular window of half-width `T`; `omega_min` is its
/// minimum over the coherence support and `tau_of_min` is where that
/// minimum (and hence each margin's minimum) occurs. A pulse-train control
/// has a plateau of near-equal minima, so `tau_of_min` is the earliest
/// support point within 1% of `omega_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityReport {
    /// `Ω_min·T`
    pub margin_a: f64,
    /// `Ω_min²·T·T₁`
    pub margin_b: f64,
    /// `Ω_min²·T/Γ`
    pub margin_c: f64,
    pub t_coherence: f64,
    pub t_control: f64,
    pub omega_min: f64,
    pub tau_of_min: f64,
    /// Probe present while the control is off somewhere on the grid.
    pub mismatched: bool,
}

impl AdiabaticityReport {
    pub fn min_margin(&self) -> f64 {
        self.margin_a.min(self.margin_b).min(self.margin_c)
    }
}

/// RMS angular bandwidth about the mean frequency, rad/s.
///
/// The mean frequency is the phase of the lag-one autocorrelation; the
/// signal is demodulated by it and the bandwidth is `‖ẏ‖/‖y‖` with forward
/// differences. Zero for an empty, constant or single-sample signal.
pub fn rms_bandwidth(samples: &[C64], dt: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let lag: C64 = samples.windows(2).map(|w| w[0].conj() * w[1]).sum();
    let step = if lag.norm() > 0.0 { C64::from_polar(1.0, -lag.arg()) } else { C64::new(1.0, 0.0) };
    let mut rot = C64::new(1.0, 0.0);
    let mut prev: Option<C64> = None;
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, s) in samples.iter().enumerate() {
        if j % 1024 == 0 {
            // refresh the rotation to keep round-off from accumulating
            rot = C64::from_polar(1.0, -lag.arg() * j as f64);
        }
        let y = s * rot;
        if let Some(p) = prev {
            num += (y - p).norm_sqr();
        }
        den += y.norm_sqr();
        prev = Some(y);
        rot *= step;
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt() / dt
    }
}

/// Coherence `−Ω_p/Ω_c` as seen by the checker.
///
/// Interior stretches where both fields are off are bridged by linear
/// interpolation, so a matched modulated pair yields the slow ratio
/// `−Ω_p0/Ω_c0`; leading and trailing stretches are zero. Samples with probe
/// but no control are set to zero, which shows up as a large coherence
/// bandwidth.
fn checker_coherence(probe: &FieldEnvelope, control: &FieldEnvelope) -> (Vec<C64>, bool) {
    let eps_c = CONTROL_THRESHOLD * control.peak_magnitude();
    let eps_p = PROBE_THRESHOLD * probe.peak_magnitude();
    let n = probe.len();
    let mut cc: Vec<Option<C64>> = Vec::with_capacity(n);
    let mut mismatched = false;
    for (p, c) in probe.samples().iter().zip(control.samples()) {
        cc.push(if c.norm() > eps_c {
            Some(-p / c)
        } else if p.norm() > eps_p {
            mismatched = true;
            Some(C64::new(0.0, 0.0))
        } else {
            None
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut last: Option<(usize, C64)> = None;
    let mut j = 0;
    while j < n {
        if let Some(v) = cc[j] {
            out.push(v);
            last = Some((j, v));
            j += 1;
            continue;
        }
        let next = (j..n).find_map(|k| cc[k].map(|v| (k, v)));
        let stop = next.map_or(n, |(k, _)| k);
        for i in j..stop {
            out.push(match (last, next) {
                (Some((a, va)), Some((b, vb))) => va + (vb - va) * ((i - a) as f64 / (b - a) as f64),
                _ => C64::new(0.0, 0.0),
            });
        }
        j = stop;
    }
    (out, mismatched)
}

/// Centred moving average over `window` samples, truncated at the ends.
fn boxcar(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|j| {
            let lo = j.saturating_sub(window / 2);
            let hi = (lo + window).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Relative tolerance that groups near-equal minima of the smoothed control.
const MIN_PLATEAU: f64 = 1e-2;

fn margin(omega: f64, times: f64) -> f64 {
    if omega == 0.0 {
        0.0
    } else {
        omega * times
    }
}

/// Evaluates the three adiabaticity margins for an input pair.
pub fn adiabaticity_check(probe: &FieldEnvelope, control: &FieldEnvelope, medium: &LambdaMedium) -> Result<AdiabaticityReport> {
    probe.require_same_grid(control, "adiabaticity_check")?;
    if control.peak_magnitude() == 0.0 {
        return Err(Error::ZeroEnergy("control"));
    }
    if probe.peak_magnitude() == 0.0 {
        return Err(Error::ZeroEnergy("probe"));
    }
    let dt = control.grid().dt();
    let (cc, mismatched) = checker_coherence(probe, control);
    let t_coherence = 1.0 / rms_bandwidth(&cc, dt);
    let t_control = 1.0 / rms_bandwidth(control.samples(), dt);

    let n = cc.len();
    let window = if t_coherence.is_finite() { ((t_coherence / dt).round() as usize).clamp(1, n) } else { n };
    let power: Vec<f64> = control.samples().iter().map(|c| c.norm_sqr()).collect();
    let smoothed = boxcar(&boxcar(&power, window), window);
    let cc_peak = cc.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let support: Vec<usize> =
        (0..n).filter(|&j| cc_peak > 0.0 && cc[j].norm() >= SUPPORT_FRACTION * cc_peak).collect();
    let mut omega_min = support.iter().map(|&j| smoothed[j].sqrt()).fold(f64::INFINITY, f64::min);
    let at = support
        .iter()
        .find(|&&j| smoothed[j].sqrt() <= omega_min * (1.0 + MIN_PLATEAU))
        .map_or(control.grid().t_start(), |&j| control.grid().time(j));
    if !omega_min.is_finite() {
        omega_min = 0.0;
    }
    Ok(AdiabaticityReport {
        margin_a: margin(omega_min, t_coherence),
        margin_b: margin(omega_min * omega_min, t_coherence * t_control),
        margin_c: margin(omega_min * omega_min, t_coherence / medium.gamma),
        t_coherence,
        t_control,
        omega_min,
        tau_of_min: at,
        mismatched,
    })
}

/// Normalised temporal mode overlap `|⟨Ω_p, Ω_c⟩|²/(‖Ω_p‖²‖Ω_c‖²)`.
pub fn mode_overlap(probe: &FieldEnvelope, control: &FieldEnvelope) -> Result<f64> {
    probe.require_same_grid(control, "mode_overlap")?;
    let (mut cross, mut pp, mut cc) = (C64::new(0.0, 0.0), 0.0, 0.0);
    for (p, c) in probe.samples().iter().zip(control.samples()) {
        cross += p * c.conj();
        pp += p.norm_sqr();
        cc += c.norm_sqr();
    }
    if pp == 0.0 {
        return Err(Error::ZeroEnergy("probe"));
    }
    if cc == 0.0 {
        return Err(Error::ZeroEnergy("control"));
    }
    Ok((cross.norm_sqr() / (pp * cc)).min(1.0))
}

/// `‖a − b‖/‖b‖` over the samples.
pub fn relative_l2(a: &FieldEnvelope, b: &FieldEnvelope) -> Result<f64> {
    a.require_same_grid(b, "relative_l2")?;
    let num: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.samples().iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::ZeroEnergy("reference"));
    }
    Ok((num / den).sqrt())
}

/// `sqrt` of `|Ω|²` averaged over a centred window of one `period`, s.
///
/// Strips a periodic modulation so pulse shapes can be compared without
/// the sample-level structure of the comb.
pub fn period_envelope(field: &FieldEnvelope, period: f64) -> Result<FieldEnvelope> {
    let window = whole_samples(field, period)?;
    let power: Vec<f64> = field.samples().iter().map(|s| s.norm_sqr()).collect();
    let smooth = boxcar(&power, window);
    FieldEnvelope::new(*field.grid(), smooth.into_iter().map(|p| C64::new(p.sqrt(), 0.0)).collect())
}

/// Baseband envelope of the color at carrier `offset`, rad/s.
///
/// The field is shifted down by `offset` and averaged over one period of
/// `beat`, the spacing to the nearest other color. Every other color
/// detuned by a multiple of `beat` then averages out exactly when the
/// period is a whole number of samples.
pub fn color_component(field: &FieldEnvelope, offset: f64, beat: f64) -> Result<FieldEnvelope> {
    if !(beat.abs() > 0.0 && beat.is_finite()) {
        return Err(Error::invalid(format!("color spacing must be nonzero, got {beat}")));
    }
    let window = whole_samples(field, 2.0 * core::f64::consts::PI / beat.abs())?;
    let grid = *field.grid();
    let shifted: Vec<C64> =
        field.samples().iter().enumerate().map(|(j, s)| s * C64::from_polar(1.0, -offset * grid.time(j))).collect();
    let re = boxcar(&shifted.iter().map(|z| z.re).collect::<Vec<_>>(), window);
    let im = boxcar(&shifted.iter().map(|z| z.im).collect::<Vec<_>>(), window);
    FieldEnvelope::new(grid, re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
}

fn whole_samples(field: &FieldEnvelope, period: f64) -> Result<usize> {
    let n = (period / field.grid().dt()).round();
    if !(n >= 1.0) || n as usize > field.len() {
        return Err(Error::invalid(format!("averaging period {period} s does not fit the grid")));
    }
    Ok(n as usize)
}

/// Energy of `output` over energy of `input`.
pub fn energy_transmission(output: &FieldEnvelope, input: &FieldEnvelope) -> Result<f64> {
    output.require_same_grid(input, "energy_transmission")?;
    let e_in = input.energy();
    if e_in == 0.0 {
        return Err(Error::ZeroEnergy("input"));
    }
    Ok(output.energy() / e_in)
}

/// Delay and group velocity of a propagated pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupVelocity {
    /// Centroid of the output minus centroid of the reference, s.
    pub delay: f64,
    /// `L/delay`, local-time frame, m/s.
    pub v_local: f64,
    /// `(1/v_local + 1/c)⁻¹`, laboratory frame, m/s.
    pub v_lab: f64,
    /// The delay is shorter than two time steps and poorly resolved.
    pub precision_warning: bool,
}

/// Centroid delay of `output` relative to `reference` across `medium`.
pub fn group_velocity_estimate(output: &FieldEnvelope, reference: &FieldEnvelope, medium: &LambdaMedium) -> Result<GroupVelocity> {
    output.require_same_grid(reference, "group_velocity_estimate")?;
    let t_out = output.centroid().ok_or(Error::ZeroEnergy("output"))?;
    let t_ref = reference.centroid().ok_or(Error::ZeroEnergy("reference"))?;
    let delay = t_out - t_ref;
    let v_local = medium.length / delay;
    Ok(GroupVelocity {
        delay,
        v_local,
        v_lab: 1.0 / (1.0 / v_local + 1.0 / SPEED_OF_LIGHT),
        precision_warning: delay.abs() < 2.0 * output.grid().dt(),
    })
}

/// Full width at half maximum of a transmission peak sampled at the
/// (ascending) scan `offsets`, in the units of `offsets`.
///
/// The peak height comes from a parabola through the largest sample and its
/// neighbours; the half-maximum crossings are linearly interpolated.
pub fn eit_linewidth(offsets: &[f64], transmission: &[f64]) -> Result<f64> {
    let n = offsets.len();
    if n != transmission.len() || n < 5 {
        return Err(Error::invalid("linewidth scan needs at least 5 (offset, transmission) pairs"));
    }
    if offsets.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("linewidth scan offsets must be strictly ascending"));
    }
    let k = transmission
        .iter()
        .enumerate()
        .fold(0, |best, (j, t)| if *t > transmission[best] { j } else { best });
    if k == 0 || k == n - 1 {
        return Err(Error::UnresolvedLinewidth(format!("peak at scan edge (offset {})", offsets[k])));
    }
    let (x0, x1, x2) = (offsets[k - 1], offsets[k], offsets[k + 1]);
    let (y0, y1, y2) = (transmission[k - 1], transmission[k], transmission[k + 1]);
    // Lagrange parabola through the three samples
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    let peak = if a < 0.0 {
        let b = d01 - a * (x0 + x1);
        let xv = -b / (2.0 * a);
        y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1)
    } else {
        y1
    };
    let half = 0.5 * peak;
    let inside = transmission.iter().filter(|t| **t >= half).count();
    if inside < 3 {
        return Err(Error::UnresolvedLinewidth(format!("only {inside} scan point(s) above half maximum")));
    }
    let crossing = |j: usize, i: usize| {
        let (ta, tb) = (transmission[j], transmission[i]);
        offsets[j] + (half - ta) / (tb - ta) * (offsets[i] - offsets[j])
    };
    let left = (1..=k).rev().find(|&j| transmission[j - 1] < half).map(|j| crossing(j - 1, j));
    let right = (k..n - 1).find(|&j| transmission[j + 1] < half).map(|j| crossing(j, j + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::UnresolvedLinewidth("transmission stays above half maximum at the scan edge".into())),
    }
}

/// Delay-bandwidth enhancement `W/γ_EIT`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBandwidthReport {
    pub modulation_bandwidth: f64,
    pub gamma_eit: f64,
    pub enhancement: f64,
}

/// Both rates in the same units (rad/s or Hz).
pub fn delay_bandwidth_report(modulation_bandwidth: f64, gamma_eit: f64) -> Result<DelayBandwidthReport> {
    if !(gamma_eit > 0.0 && gamma_eit.is_finite()) {
        return Err(Error::UnresolvedLinewidth(format!("EIT linewidth {gamma_eit} is not a positive number")));
    }
    if !(modulation_bandwidth > 0.0 && modulation_bandwidth.is_finite()) {
        return Err(Error::invalid(format!("modulation bandwidth must be positive, got {modulation_bandwidth}")));
    }
    Ok(DelayBandwidthReport { modulation_bandwidth, gamma_eit, enhancement: modulation_bandwidth / gamma_eit })
}

/// Intensity transmission of a cw probe at two-photon detuning `delta`
/// in the steady state of a homogeneous medium, `W = |Ω_c|²`.
pub fn steady_state_transmission(medium: &LambdaMedium, control_power: f64, delta: f64) -> f64 {
    let g = medium.gamma;
    let w = control_power;
    let x = 0.5 * delta * g;
    let y = w - delta * delta;
    (-(medium.optical_depth() * g / 4.0) * delta * delta * g / (x * x + y * y)).exp()
}
