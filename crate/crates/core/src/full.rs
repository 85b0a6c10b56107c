//! Maxwell–Bloch integration of the Λ system.
//!
//! Each velocity class obeys, with `c_b ≡ 1`,
//!
//! ```text
//! ċ_a = −(Γ/2 + iΔ) c_a + iΩ_p + iΩ_c c_c
//! ċ_c = iΩ_c* c_a − γ_bc c_c
//! ```
//!
//! and the probe evolves along the cell as `∂Ω_p/∂ζ = i g ⟨c_a⟩`. The atomic
//! equations are advanced with a fourth-order exponential time-differencing
//! Runge–Kutta scheme whose linear part (`−(Γ/2 + iΔ)` and `−γ_bc`) is
//! exact; the probe is marched in `ζ` with a Heun predictor–corrector.

use alloc::vec;
use alloc::vec::Vec;


use crate::adiabatic;
use crate::diagnostics::{adiabaticity_check, AdiabaticityReport};
use crate::model::{FieldEnvelope, LambdaMedium, SimulationGrid};
use crate::special::phi_functions;
use crate::waveforms::{evaluate_program, ControlProgram};
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Probability amplitudes of the excited state `a` and the second ground state `c`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtomState {
    pub c_a: C64,
    pub c_c: C64,
}

/// Probe and control Rabi frequencies at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFields {
    pub probe: C64,
    pub control: C64,
}

impl StepFields {
    pub fn new(probe: C64, control: C64) -> Self {
        Self { probe, control }
    }

    fn lerp(&self, other: &Self, s: f64) -> Self {
        Self {
            probe: self.probe + (other.probe - self.probe) * s,
            control: self.control + (other.control - self.control) * s,
        }
    }
}

/// Atomic amplitudes of one cell slice, indexed `[class][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSlice {
    pub z_index: usize,
    pub c_a: Vec<Vec<C64>>,
    pub c_c: Vec<Vec<C64>>,
}

/// Solver settings that are not part of the physical problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSolverOptions {
    /// Largest allowed `B·Δζ`, where `B` is the peak absorption coefficient
    /// of the medium; the number of slices is raised to honour it.
    pub max_absorption_step: f64,
    /// Largest allowed `h·max|Ω_c|` for one integrator step; grid steps are
    /// split into equal substeps to honour it.
    pub max_rabi_step: f64,
    /// Keep every `n`-th slice (and the last); `None` keeps none.
    pub snapshot_stride: Option<usize>,
    /// Fail when a pulse contained in the input window spills over the
    /// window edges at the exit.
    pub check_window: bool,
}

impl Default for FullSolverOptions {
    fn default() -> Self {
        Self { max_absorption_step: 0.1, max_rabi_step: 0.5, snapshot_stride: None, check_window: true }
    }
}

/// Numbers describing one full-solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverMetadata {
    pub n_z_steps: usize,
    pub substeps: usize,
    pub velocity_classes: usize,
    /// Excited-state integrations performed (slices × classes × passes).
    pub atomic_sweeps: usize,
    pub effective_optical_depth: f64,
    pub max_excited: f64,
    pub max_coherence: f64,
    /// Largest `|c_a|² + |c_c|²` seen.
    pub max_population: f64,
    /// `max|c_c| > 0.1`: the undepleted ground state is a poor approximation.
    pub weak_probe_warning: bool,
    /// Margins of the input pair; `None` when a field is identically zero.
    pub adiabaticity: Option<AdiabaticityReport>,
}

/// Output of [`propagate_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub probe_out: FieldEnvelope,
    pub slices: Vec<AtomicSlice>,
    pub metadata: SolverMetadata,
}

/// Output of [`store_and_retrieve`].
#[derive(Debug, Clone, PartialEq)]
pub struct StorageResult {
    /// Run with the control switched off on `[t_off, t_on)`.
    pub retrieved: PropagationResult,
    /// Same run without the gate.
    pub reference: PropagationResult,
    pub storage_time: f64,
    /// Retrieved energy over reference energy.
    pub efficiency: f64,
    /// Centroid delay of the retrieved pulse relative to the reference, s.
    pub added_delay: f64,
    /// Cell interval occupied by the polariton at switch-off, m.
    pub polariton_span: (f64, f64),
}

/// Fixed-step ETDRK4 coefficients for one diagonal entry `L = −rate`.
#[derive(Debug, Clone, Copy)]
struct Etd {
    e: C64,
    e2: C64,
    q: C64,
    f1: C64,
    f2: C64,
    f3: C64,
}

impl Etd {
    fn new(rate: C64, h: f64) -> Self {
        let z = -rate * h;
        let (p1, p2, p3) = phi_functions(z);
        let (half1, _, _) = phi_functions(z * 0.5);
        Self {
            e: z.exp(),
            e2: (z * 0.5).exp(),
            q: half1 * (0.5 * h),
            f1: (p1 - p2 * 3.0 + p3 * 4.0) * h,
            f2: (p2 - p3 * 2.0) * (2.0 * h),
            f3: (p3 * 4.0 - p2) * h,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Stepper {
    a: Etd,
    c: Etd,
}

#[inline(always)]
fn coupling(s: AtomState, f: StepFields) -> (C64, C64) {
    (I * (f.probe + f.control * s.c_c), I * f.control.conj() * s.c_a)
}

impl Stepper {
    fn new(medium: &LambdaMedium, detuning: f64, h: f64) -> Self {
        let kappa = C64::new(0.5 * medium.gamma, detuning);
        Self { a: Etd::new(kappa, h), c: Etd::new(C64::new(medium.ground_decoherence, 0.0), h) }
    }

    #[inline(always)]
    fn step(&self, u: AtomState, f0: StepFields, fm: StepFields, f1: StepFields) -> AtomState {
        let (a, c) = (&self.a, &self.c);
        let (nu_a, nu_c) = coupling(u, f0);
        let sa = AtomState { c_a: a.e2 * u.c_a + a.q * nu_a, c_c: c.e2 * u.c_c + c.q * nu_c };
        let (na_a, na_c) = coupling(sa, fm);
        let sb = AtomState { c_a: a.e2 * u.c_a + a.q * na_a, c_c: c.e2 * u.c_c + c.q * na_c };
        let (nb_a, nb_c) = coupling(sb, fm);
        let sc = AtomState {
            c_a: a.e2 * sa.c_a + a.q * (nb_a * 2.0 - nu_a),
            c_c: c.e2 * sa.c_c + c.q * (nb_c * 2.0 - nu_c),
        };
        let (nc_a, nc_c) = coupling(sc, f1);
        AtomState {
            c_a: a.e * u.c_a + a.f1 * nu_a + a.f2 * (na_a + nb_a) + a.f3 * nc_a,
            c_c: c.e * u.c_c + c.f1 * nu_c + c.f2 * (na_c + nb_c) + c.f3 * nc_c,
        }
    }

    /// Advances over one grid step split into `m` substeps, with fields
    /// linear between the end points.
    #[inline]
    fn advance(&self, mut u: AtomState, start: StepFields, end: StepFields, m: usize) -> AtomState {
        if m == 1 {
            return self.step(u, start, start.lerp(&end, 0.5), end);
        }
        let inv = 1.0 / m as f64;
        for s in 0..m {
            let t0 = s as f64 * inv;
            u = self.step(u, start.lerp(&end, t0), start.lerp(&end, t0 + 0.5 * inv), start.lerp(&end, t0 + inv));
        }
        u
    }
}

fn substeps_for(dt: f64, peak_control: f64, max_rabi_step: f64) -> usize {
    let m = (dt * peak_control / max_rabi_step).ceil();
    if m.is_finite() && m >= 1.0 {
        m as usize
    } else {
        1
    }
}

/// Advances one atom over `dt`. The fields vary linearly from `start` to
/// `end`; the step is subdivided when `dt·|Ω_c|` is large.
pub fn atomic_step(
    state: AtomState,
    start: StepFields,
    end: StepFields,
    detuning: f64,
    medium: &LambdaMedium,
    dt: f64,
) -> Result<AtomState> {
    medium.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(alloc::format!("time step must be positive, got {dt}")));
    }
    let m = substeps_for(dt, start.control.norm().max(end.control.norm()), FullSolverOptions::default().max_rabi_step);
    let h = dt / m as f64;
    let out = Stepper::new(medium, detuning, h).advance(state, start, end, m);
    if !(out.c_a.is_finite() && out.c_c.is_finite()) {
        return Err(Error::Divergence { class: 0, z_step: 0, tau: dt });
    }
    Ok(out)
}

/// Peak over probe frequency of `|Σ_k w_k/(κ_k + iω)|`, the largest field
/// absorption rate per unit `g`. Evaluated at the class resonances.
fn peak_response(medium: &LambdaMedium, detunings: &[f64], weights: &[f64]) -> f64 {
    let response = |omega: f64| {
        detunings
            .iter()
            .zip(weights)
            .map(|(d, w)| *w / C64::new(0.5 * medium.gamma, d + omega))
            .sum::<C64>()
            .norm()
    };
    detunings.iter().map(|d| response(-d)).fold(response(0.0), f64::max)
}

/// Velocity-averaged resonant depth `d·Σ w (Γ/2)²/((Γ/2)² + Δ²)`.
pub fn effective_optical_depth(medium: &LambdaMedium, sim: &SimulationGrid) -> f64 {
    let half = 0.5 * medium.gamma;
    let factor: f64 = sim
        .class_detunings()
        .iter()
        .zip(sim.class_weights())
        .map(|(d, w)| w * half * half / (half * half + d * d))
        .sum();
    medium.optical_depth() * factor
}

struct Excitation {
    average: Vec<C64>,
    slice: Option<AtomicSlice>,
}

struct Marcher<'a> {
    steppers: Vec<Stepper>,
    weights: &'a [f64],
    control: &'a [C64],
    m: usize,
    dt: f64,
    t_start: f64,
    max_excited: f64,
    max_coherence: f64,
    max_population: f64,
    sweeps: usize,
}

impl Marcher<'_> {
    /// Integrates every class through the probe `field`, returning the
    /// weighted excited-state amplitude. Classes are summed in index order.
    fn excite(&mut self, field: &[C64], z_step: usize, keep: bool) -> Result<Excitation> {
        let n = field.len();
        let mut average = vec![ZERO; n];
        let mut slice = keep.then(|| AtomicSlice { z_index: z_step, c_a: Vec::new(), c_c: Vec::new() });
        for (class, (stepper, &w)) in self.steppers.iter().zip(self.weights).enumerate() {
            let mut u = AtomState::default();
            let mut keep_a = slice.as_ref().map(|_| Vec::with_capacity(n));
            let mut keep_c = slice.as_ref().map(|_| Vec::with_capacity(n));
            let mut peak_a = 0.0f64;
            let mut peak_c = 0.0f64;
            let mut peak_pop = 0.0f64;
            let mut prev = StepFields::new(field[0], self.control[0]);
            for j in 0..n {
                if j > 0 {
                    let next = StepFields::new(field[j], self.control[j]);
                    u = stepper.advance(u, prev, next, self.m);
                    prev = next;
                }
                let (pa, pc) = (u.c_a.norm_sqr(), u.c_c.norm_sqr());
                if !(pa.is_finite() && pc.is_finite()) {
                    return Err(Error::Divergence { class, z_step, tau: self.t_start + j as f64 * self.dt });
                }
                peak_a = peak_a.max(pa);
                peak_c = peak_c.max(pc);
                peak_pop = peak_pop.max(pa + pc);
                average[j] += u.c_a * w;
                if let (Some(a), Some(c)) = (keep_a.as_mut(), keep_c.as_mut()) {
                    a.push(u.c_a);
                    c.push(u.c_c);
                }
            }
            self.max_excited = self.max_excited.max(peak_a.sqrt());
            self.max_coherence = self.max_coherence.max(peak_c.sqrt());
            self.max_population = self.max_population.max(peak_pop);
            self.sweeps += 1;
            if let (Some(s), Some(a), Some(c)) = (slice.as_mut(), keep_a, keep_c) {
                s.c_a.push(a);
                s.c_c.push(c);
            }
        }
        Ok(Excitation { average, slice })
    }
}

/// Propagates `probe_in` through the cell under the prescribed `control`.
pub fn propagate_full(
    probe_in: &FieldEnvelope,
    control: &FieldEnvelope,
    medium: &LambdaMedium,
    sim: &SimulationGrid,
    options: &FullSolverOptions,
) -> Result<PropagationResult> {
    medium.validate()?;
    probe_in.require_same_grid(control, "propagate_full")?;
    if *probe_in.grid() != sim.time {
        return Err(Error::invalid("propagate_full: probe grid differs from the simulation grid"));
    }
    if !(options.max_absorption_step > 0.0 && options.max_rabi_step > 0.0) {
        return Err(Error::invalid("solver step limits must be positive"));
    }
    if options.snapshot_stride == Some(0) {
        return Err(Error::invalid("snapshot stride must be at least 1"));
    }

    let grid = sim.time;
    let dt = grid.dt();
    let b = medium.coupling_density * peak_response(medium, sim.class_detunings(), sim.class_weights());
    let needed = (b * medium.length / options.max_absorption_step).ceil();
    let n_z = if needed.is_finite() { sim.n_z_slices().max(needed as usize) } else { sim.n_z_slices() };
    let dz = medium.length / n_z as f64;
    let m = substeps_for(dt, control.peak_magnitude(), options.max_rabi_step);
    let h = dt / m as f64;

    let mut marcher = Marcher {
        steppers: sim.class_detunings().iter().map(|d| Stepper::new(medium, *d, h)).collect(),
        weights: sim.class_weights(),
        control: control.samples(),
        m,
        dt,
        t_start: grid.t_start(),
        max_excited: 0.0,
        max_coherence: 0.0,
        max_population: 0.0,
        sweeps: 0,
    };
    let keep = |k: usize| options.snapshot_stride.is_some_and(|s| k % s == 0 || k == n_z);

    let coupling = I * (medium.coupling_density * dz);
    let mut field = probe_in.samples().to_vec();
    let mut slices = Vec::new();
    let mut current = marcher.excite(&field, 0, keep(0))?;
    for k in 0..n_z {
        if let Some(s) = current.slice.take() {
            slices.push(s);
        }
        let predicted: Vec<C64> = field.iter().zip(&current.average).map(|(f, p)| f + coupling * p).collect();
        let corrected = marcher.excite(&predicted, k + 1, false)?;
        for ((f, p0), p1) in field.iter_mut().zip(&current.average).zip(&corrected.average) {
            *f += coupling * 0.5 * (p0 + p1);
        }
        if k + 1 < n_z || keep(n_z) {
            current = marcher.excite(&field, k + 1, keep(k + 1))?;
        }
    }
    if let Some(s) = current.slice.take() {
        if s.z_index == n_z {
            slices.push(s);
        }
    }

    let probe_out = FieldEnvelope::new(grid, field)?.with_carrier_offset(probe_in.carrier_offset);
    if options.check_window {
        let edge = (grid.n_samples() / 50).max(1);
        let inside = probe_in.edge_energy_fraction(edge) <= adiabatic::OVERRUN_TOLERANCE;
        let lost = probe_out.edge_energy_fraction(edge);
        if inside && lost > adiabatic::OVERRUN_TOLERANCE {
            return Err(Error::WindowOverrun { lost_fraction: lost, required_extension: None });
        }
    }

    let metadata = SolverMetadata {
        n_z_steps: n_z,
        substeps: m,
        velocity_classes: sim.n_velocity_classes(),
        atomic_sweeps: marcher.sweeps,
        effective_optical_depth: effective_optical_depth(medium, sim),
        max_excited: marcher.max_excited,
        max_coherence: marcher.max_coherence,
        max_population: marcher.max_population,
        weak_probe_warning: marcher.max_coherence > 0.1,
        adiabaticity: adiabaticity_check(probe_in, control, medium).ok(),
    };
    Ok(PropagationResult { probe_out, slices, metadata })
}

/// Cell interval (m) occupied at local time `t_off` by the central
/// `1 − 2·10⁻³` of the probe energy, from adiabatic characteristics of the
/// ungated control.
pub fn polariton_span(probe_in: &FieldEnvelope, control: &FieldEnvelope, medium: &LambdaMedium, t_off: f64) -> Result<(f64, f64)> {
    probe_in.require_same_grid(control, "polariton_span")?;
    let power: Vec<f64> = probe_in.samples().iter().map(|s| s.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroEnergy("probe"));
    }
    let quantile = 1e-3 * total;
    let mut acc = 0.0;
    let mut lo = 0;
    for (j, p) in power.iter().enumerate() {
        acc += p;
        if acc >= quantile {
            lo = j;
            break;
        }
    }
    acc = 0.0;
    let mut hi = power.len() - 1;
    for (j, p) in power.iter().enumerate().rev() {
        acc += p;
        if acc >= quantile {
            hi = j;
            break;
        }
    }
    let s = adiabatic::characteristic_coordinate(control, medium);
    let s_off = s[control.grid().nearest_index(t_off)];
    // late content sits near the entrance, early content deepest
    Ok((s_off - s[hi], s_off - s[lo]))
}

/// Stores the probe by switching every control component off on
/// `[t_off, t_on)`, then retrieves it.
pub fn store_and_retrieve(
    probe_in: &FieldEnvelope,
    program: &ControlProgram,
    gate: (f64, f64),
    medium: &LambdaMedium,
    sim: &SimulationGrid,
    options: &FullSolverOptions,
) -> Result<StorageResult> {
    let (t_off, t_on) = gate;
    if !(t_on >= t_off) {
        return Err(Error::invalid(alloc::format!("storage gate [{t_off}, {t_on}) is reversed")));
    }
    let control = evaluate_program(program, &sim.time)?;
    let span = polariton_span(probe_in, &control, medium, t_off)?;
    if span.0 < 0.0 || span.1 > medium.length {
        return Err(Error::Containment { span, length: medium.length });
    }
    let gated = evaluate_program(&program.gated_off(t_off, t_on), &sim.time)?;
    let reference = propagate_full(probe_in, &control, medium, sim, options)?;
    let retrieved = propagate_full(probe_in, &gated, medium, sim, options)?;
    let e_ref = reference.probe_out.energy();
    if e_ref == 0.0 {
        return Err(Error::ZeroEnergy("reference output"));
    }
    let efficiency = retrieved.probe_out.energy() / e_ref;
    let added_delay = match (retrieved.probe_out.centroid(), reference.probe_out.centroid()) {
        (Some(a), Some(b)) => a - b,
        _ => return Err(Error::ZeroEnergy("retrieved output")),
    };
    Ok(StorageResult { retrieved, reference, storage_time: t_on - t_off, efficiency, added_delay, polariton_span: span })
}
