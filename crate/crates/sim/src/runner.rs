//! Executes scenarios and sweeps and collects their measurements.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use eit_core::adiabatic::propagate_probe;
use eit_core::diagnostics::{
    adiabaticity_check, color_component, delay_bandwidth_report, eit_linewidth, energy_transmission,
    group_velocity_estimate, mode_overlap, period_envelope, relative_l2, steady_state_transmission,
};
use eit_core::full::{effective_optical_depth, propagate_full, store_and_retrieve, FullSolverOptions, PropagationResult};
use eit_core::waveforms::{evaluate_program, ControlComponent, ControlProgram, EnvelopeShape};
use eit_core::{FieldEnvelope, C64};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, MeasurementSpec, Prepared, ScenarioConfig};
use crate::spectrum::{comb_lines, heterodyne_spectrum, zero_span_power, SpectrumError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Solver { context: String, source: eit_core::Error },
    #[error("{context}: {source}")]
    Spectrum { context: String, source: SpectrumError },
}

impl RunError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Solver { .. } => "solver",
            RunError::Spectrum { .. } => "spectrum",
        }
    }
}

fn solver_err(context: impl Into<String>) -> impl FnOnce(eit_core::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Solver { context, source }
}

fn spectrum_err(context: impl Into<String>) -> impl FnOnce(SpectrumError) -> RunError {
    let context = context.into();
    move |source| RunError::Spectrum { context, source }
}

/// Column-labelled numeric table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub kind: String,
    #[serde(serialize_with = "crate::output::serialize_scalars")]
    pub scalars: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

impl MeasurementRecord {
    fn new(kind: &str) -> Self {
        Self { kind: kind.to_string(), scalars: BTreeMap::new(), table: None }
    }

    fn set(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.to_string(), value);
    }

    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub solver: String,
    pub n_samples: usize,
    pub dt_s: f64,
    pub velocity_classes: usize,
    /// `4gL/Γ` as configured.
    pub optical_depth: f64,
    /// Resonant depth averaged over the velocity classes; equals
    /// `optical_depth` for a homogeneous medium.
    pub effective_optical_depth: f64,
    /// Cell slices actually used by the full solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_z_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
}

/// Everything a run produces. Wall-clock time is kept apart from the
/// deterministic part so identical configs give identical summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub name: String,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
    pub measurements: Vec<MeasurementRecord>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn measurement(&self, kind: &str) -> Option<&MeasurementRecord> {
        self.measurements.iter().find(|m| m.kind == kind)
    }

    /// Every scalar, keyed `kind.name`.
    pub fn flat_scalars(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for m in &self.measurements {
            for (k, v) in &m.scalars {
                out.insert(format!("{}.{k}", m.kind), *v);
            }
        }
        out
    }
}

/// SHA-256 of the canonical serialization.
pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml_string().as_bytes()))
}

struct Outputs {
    full: Option<PropagationResult>,
    adiabatic: Option<FieldEnvelope>,
}

impl Outputs {
    /// The full-solver output when present, otherwise the adiabatic one.
    fn primary(&self) -> &FieldEnvelope {
        self.full.as_ref().map(|r| &r.probe_out).or(self.adiabatic.as_ref()).expect("at least one solver runs")
    }

    fn labelled(&self) -> Vec<(&'static str, &FieldEnvelope)> {
        let mut v = Vec::new();
        if let Some(r) = &self.full {
            v.push(("full", &r.probe_out));
        }
        if let Some(a) = &self.adiabatic {
            v.push(("adiabatic", a));
        }
        v
    }
}

fn tail(field: &FieldEnvelope, from: Option<f64>) -> Result<FieldEnvelope, RunError> {
    match from {
        None => Ok(field.clone()),
        Some(t) => {
            let start = field.grid().nearest_index(t);
            field.window(start, field.len()).map_err(solver_err("analysis window"))
        }
    }
}

/// Period of the control modulation when every modulated component shares
/// one frequency.
fn common_modulation_period(program: &ControlProgram) -> Option<f64> {
    let freqs: Vec<f64> =
        program.components.iter().filter_map(|c| c.modulation).filter(|m| m.duty < 1.0).map(|m| m.frequency).collect();
    match freqs.first() {
        Some(f) if freqs.iter().all(|g| g == f) => Some(1.0 / f),
        _ => None,
    }
}

/// Runs the configured solver(s) and measurements.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunRecord, RunError> {
    let started = Instant::now();
    let prepared = config.prepare()?;
    let p = &prepared;
    let full = if config.solver.runs_full() {
        Some(propagate_full(&p.probe, &p.control, &p.medium, &p.sim, &p.options).map_err(solver_err("full solver"))?)
    } else {
        None
    };
    let adiabatic = if config.solver.runs_adiabatic() {
        Some(propagate_probe(&p.probe, &p.control, &p.medium).map_err(solver_err("adiabatic solver"))?)
    } else {
        None
    };
    let outputs = Outputs { full, adiabatic };

    let mut warnings = Vec::new();
    if let Some(r) = &outputs.full {
        if r.metadata.weak_probe_warning {
            warnings.push(format!(
                "max |c_c| = {:.3} exceeds 0.1: the weak-probe approximation is strained",
                r.metadata.max_coherence
            ));
        }
    }

    let mut measurements = Vec::new();
    if let (Some(r), Some(a)) = (&outputs.full, &outputs.adiabatic) {
        let mut m = MeasurementRecord::new("cross_solver");
        m.set("relative_l2", relative_l2(&r.probe_out, a).map_err(solver_err("cross-solver L2"))?);
        if let Some(period) = common_modulation_period(&p.program) {
            let ef = period_envelope(&r.probe_out, period).map_err(solver_err("period envelope"))?;
            let ea = period_envelope(a, period).map_err(solver_err("period envelope"))?;
            m.set("envelope_relative_l2", relative_l2(&ef, &ea).map_err(solver_err("cross-solver L2"))?);
            m.set("envelope_period_s", period);
        }
        measurements.push(m);
    }
    for spec in &config.measurements {
        measurements.push(measure(spec, p, &outputs).map_err(|e| match e {
            RunError::Solver { context, source } => RunError::Solver { context: format!("{}: {context}", spec.kind()), source },
            other => other,
        })?);
    }

    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config),
        solver: format!("{:?}", config.solver).to_lowercase(),
        n_samples: p.grid().n_samples(),
        dt_s: p.grid().dt(),
        velocity_classes: p.sim.n_velocity_classes(),
        optical_depth: p.medium.optical_depth(),
        effective_optical_depth: effective_optical_depth(&p.medium, &p.sim),
        n_z_steps: outputs.full.as_ref().map(|r| r.metadata.n_z_steps),
        substeps: outputs.full.as_ref().map(|r| r.metadata.substeps),
    };
    Ok(RunRecord {
        name: config.name.clone(),
        provenance,
        warnings,
        measurements,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn measure(spec: &MeasurementSpec, p: &Prepared, out: &Outputs) -> Result<MeasurementRecord, RunError> {
    let mut m = MeasurementRecord::new(spec.kind());
    match spec {
        MeasurementSpec::Transmission { from } => {
            let from = from.as_ref().map(|f| f.si());
            let input = tail(&p.probe, from)?;
            for (label, field) in out.labelled() {
                let output = tail(field, from)?;
                let t = match from {
                    None => energy_transmission(&output, &input).map_err(solver_err("transmission"))?,
                    Some(_) => output.average_power() / input.average_power(),
                };
                m.set(&format!("transmission_{label}"), t);
            }
        }
        MeasurementSpec::ZeroSpan { rbw, from } => {
            let from = from.as_ref().map(|f| f.si());
            let output = tail(out.primary(), from)?;
            let input = tail(&p.probe, from)?;
            let power = zero_span_power(&output, rbw.si()).map_err(spectrum_err("zero span"))?;
            m.set("zero_span_power", power);
            m.set("input_power", input.average_power());
            m.set("transmission", power / input.average_power());
            m.set("rbw_Hz", rbw.si() / (2.0 * PI));
        }
        MeasurementSpec::Spectrum { rbw, lo_offset, from, span, line_spacing } => {
            let from = from.as_ref().map(|f| f.si());
            let lo = lo_offset.as_ref().map_or(0.0, |l| l.si());
            let output = tail(out.primary(), from)?;
            let input = tail(&p.probe, from)?;
            let tr_out = heterodyne_spectrum(&output, lo, rbw.si()).map_err(spectrum_err("spectrum"))?;
            let tr_in = heterodyne_spectrum(&input, lo, rbw.si()).map_err(spectrum_err("spectrum"))?;
            let limit = span.as_ref().map_or(f64::INFINITY, |s| s.si());
            let rows = tr_out
                .frequencies
                .iter()
                .zip(tr_out.power.iter().zip(&tr_in.power))
                .filter(|(f, _)| f.abs() <= limit)
                .map(|(f, (po, pi))| vec![f / (2.0 * PI), *po, *pi])
                .collect();
            m.table = Some(Table { columns: vec!["freq_Hz".into(), "power_out".into(), "power_in".into()], rows });
            m.set("peak_freq_Hz", tr_out.peak_frequency() / (2.0 * PI));
            m.set("integrated_power_out", tr_out.integrated_power());
            m.set("integrated_power_in", tr_in.integrated_power());
            m.set("bin_width_Hz", tr_out.bin_width() / (2.0 * PI));
            if let Some(spacing) = line_spacing {
                let lines = comb_lines(&tr_out, spacing.si(), 3.0 * rbw.si());
                m.set("max_line_power", lines.max_line_power);
                m.set("secondary_ratio", lines.secondary_ratio);
                m.set("line_count", lines.line_count as f64);
            }
        }
        MeasurementSpec::Delay => {
            for (label, field) in out.labelled() {
                let gv = group_velocity_estimate(field, &p.probe, &p.medium).map_err(solver_err("delay"))?;
                m.set(&format!("delay_s_{label}"), gv.delay);
                m.set(&format!("v_local_{label}"), gv.v_local);
                m.set(&format!("v_lab_{label}"), gv.v_lab);
                m.set(&format!("precision_warning_{label}"), f64::from(u8::from(gv.precision_warning)));
            }
            let w = p.control.average_power();
            m.set("average_control_power", w);
            m.set("delay_s_average_power", p.medium.coupling_density * p.medium.length / w);
        }
        MeasurementSpec::Overlap => {
            m.set("overlap", mode_overlap(&p.probe, &p.control).map_err(solver_err("overlap"))?);
        }
        MeasurementSpec::Margins => {
            let r = adiabaticity_check(&p.probe, &p.control, &p.medium).map_err(solver_err("margins"))?;
            m.set("margin_a", r.margin_a);
            m.set("margin_b", r.margin_b);
            m.set("margin_c", r.margin_c);
            m.set("min_margin", r.min_margin());
            m.set("t_coherence_s", r.t_coherence);
            m.set("t_control_s", r.t_control);
            m.set("omega_min", r.omega_min);
            m.set("tau_of_min_s", r.tau_of_min);
            m.set("mismatched", f64::from(u8::from(r.mismatched)));
        }
        MeasurementSpec::Conversion { rbw } => conversion(&mut m, p, out, rbw.si())?,
        MeasurementSpec::Storage { t_off, t_on } => {
            let r = store_and_retrieve(&p.probe, &p.program, (t_off.si(), t_on.si()), &p.medium, &p.sim, &p.options)
                .map_err(solver_err("storage"))?;
            let dt = p.grid().dt();
            m.set("efficiency", r.efficiency);
            m.set("expected_efficiency", (-2.0 * p.medium.ground_decoherence * r.storage_time).exp());
            m.set("storage_time_s", r.storage_time);
            m.set("added_delay_s", r.added_delay);
            m.set("added_delay_error_steps", (r.added_delay - r.storage_time) / dt);
            m.set("span_start_m", r.polariton_span.0);
            m.set("span_end_m", r.polariton_span.1);
        }
        MeasurementSpec::Linewidth { start, stop, step, from, modulation_bandwidth } => {
            let n = ((stop.si() - start.si()) / step.si() + 1e-9).floor() as usize + 1;
            let offsets: Vec<f64> = (0..n).map(|k| start.si() + k as f64 * step.si()).collect();
            let options = FullSolverOptions { check_window: false, ..p.options.clone() };
            let from = from.si();
            let transmissions = offsets
                .par_iter()
                .map(|w| {
                    let grid = *p.grid();
                    let shifted = p.probe.samples().iter().enumerate().map(|(j, s)| s * C64::from_polar(1.0, w * grid.time(j)));
                    let probe = FieldEnvelope::new(grid, shifted.collect()).map_err(solver_err("scan probe"))?;
                    let r = propagate_full(&probe, &p.control, &p.medium, &p.sim, &options)
                        .map_err(solver_err(format!("scan point {:.6e} Hz", w / (2.0 * PI))))?;
                    Ok(tail(&r.probe_out, Some(from))?.average_power() / tail(&probe, Some(from))?.average_power())
                })
                .collect::<Result<Vec<f64>, RunError>>()?;
            let freqs_hz: Vec<f64> = offsets.iter().map(|w| w / (2.0 * PI)).collect();
            let gamma_hz = eit_linewidth(&freqs_hz, &transmissions).map_err(solver_err("linewidth"))?;
            let report = delay_bandwidth_report(modulation_bandwidth.si(), 2.0 * PI * gamma_hz)
                .map_err(solver_err("delay-bandwidth report"))?;
            m.set("gamma_eit_Hz", gamma_hz);
            m.set("modulation_bandwidth_Hz", modulation_bandwidth.si() / (2.0 * PI));
            m.set("enhancement", report.enhancement);
            let exact = p.medium.is_homogeneous();
            let w = p.control.average_power();
            m.table = Some(Table {
                columns: vec!["offset_Hz".into(), "transmission".into(), "transmission_steady_state".into()],
                rows: offsets
                    .iter()
                    .zip(&transmissions)
                    .map(|(o, t)| {
                        let ss = if exact { steady_state_transmission(&p.medium, w, *o) } else { f64::NAN };
                        vec![o / (2.0 * PI), *t, ss]
                    })
                    .collect(),
            });
        }
    }
    Ok(m)
}

/// Reference program: the first component alone, held on for the whole
/// window.
fn reference_program(program: &ControlProgram) -> Result<ControlProgram, RunError> {
    let first = &program.components[0];
    let mut c = ControlComponent::cw(first.amplitude).with_offset(first.frequency_offset).with_phase(first.relative_phase);
    if let Some(m) = first.modulation {
        c = c.with_modulation(m);
    }
    debug_assert!(matches!(c.envelope, EnvelopeShape::Constant));
    ControlProgram::single(c).map_err(solver_err("reference control"))
}

fn conversion(m: &mut MeasurementRecord, p: &Prepared, out: &Outputs, rbw: f64) -> Result<(), RunError> {
    let base = p.program.components[0].frequency_offset;
    let shifted = p.program.components[1].frequency_offset;
    let beat = shifted - base;
    let reference_control = evaluate_program(&reference_program(&p.program)?, p.grid()).map_err(solver_err("reference control"))?;
    let reference = match &out.full {
        Some(_) => propagate_full(&p.probe, &reference_control, &p.medium, &p.sim, &p.options)
            .map_err(solver_err("reference run"))?
            .probe_out,
        None => propagate_probe(&p.probe, &reference_control, &p.medium).map_err(solver_err("reference run"))?,
    };
    let output = out.primary();
    let e_ref = reference.energy();
    m.set("efficiency", output.energy() / e_ref);

    let tr_ref = heterodyne_spectrum(&reference, 0.0, rbw).map_err(spectrum_err("reference spectrum"))?;
    let tr_out = heterodyne_spectrum(output, 0.0, rbw).map_err(spectrum_err("output spectrum"))?;
    m.set("peak_shift_Hz", (tr_out.peak_frequency() - tr_ref.peak_frequency()) / (2.0 * PI));
    m.set("expected_shift_Hz", beat / (2.0 * PI));
    m.set("bin_width_Hz", tr_out.bin_width() / (2.0 * PI));

    let c0 = color_component(output, base, beat).map_err(solver_err("color separation"))?;
    let c1 = color_component(output, shifted, beat).map_err(solver_err("color separation"))?;
    m.set("energy_original", c0.energy() / e_ref);
    m.set("energy_converted", c1.energy() / e_ref);
    m.set("color_ratio", c1.energy() / c0.energy());
    let a0 = p.program.components[0].amplitude;
    let a1 = p.program.components[1].amplitude;
    m.set("control_power_ratio", (a1 / a0).powi(2));
    let t_in = p.probe.centroid().ok_or(RunError::Solver {
        context: "probe centroid".into(),
        source: eit_core::Error::ZeroEnergy("probe"),
    })?;
    if let (Some(t0), Some(t1)) = (c0.centroid(), c1.centroid()) {
        m.set("delay_original_s", t0 - t_in);
        m.set("delay_converted_s", t1 - t_in);
        m.set("centroid_gap_steps", (t1 - t0) / p.grid().dt());
    }
    if let Some(t) = output.centroid() {
        m.set("delay_s", t - t_in);
    }
    // the same control in the lossless adiabatic picture
    let ideal = propagate_probe(&p.probe, &p.control, &p.medium).map_err(solver_err("adiabatic prediction"))?;
    if let Some(t) = ideal.centroid() {
        m.set("delay_s_average_power", t - t_in);
    }
    Ok(())
}

/// One sweep value and the outcome of running it.
pub type SweepMember = (toml::Value, Result<RunRecord, RunError>);

/// Runs `config` once per value of `parameter`, on up to `workers`
/// threads. Results keep the order of `values`; a failing member does not
/// stop the others.
pub fn run_sweep(
    config: &ScenarioConfig,
    parameter: &str,
    values: &[toml::Value],
    workers: usize,
) -> Result<Vec<SweepMember>, RunError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid { field: "sweep.values".into(), message: "must not be empty".into() }.into());
    }
    // resolve the path once so a typo fails the whole sweep
    config.with_parameter(parameter, &values[0]).map(|_| ()).or_else(|e| match e {
        ConfigError::UnknownPath(_) => Err(e),
        _ => Ok(()),
    })?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
    let mut base = config.clone();
    base.sweep = None;
    Ok(pool.install(|| {
        values
            .par_iter()
            .map(|v| {
                let r = base.with_parameter(parameter, v).map_err(RunError::from).and_then(|c| run_scenario(&c));
                (v.clone(), r)
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CW: &str = r#"
name = "cw"
solver = "both"

[medium]
optical_depth = 4
length = "12 cm"

[grid]
window = "12 us"
dt = "10 ns"

[[control.components]]
rabi = "3 MHz"
offset = "0 Hz"

[probe]
envelope = { shape = "gaussian", center = "4 us", fwhm = "1.5 us" }
amplitude = "1 kHz"
matched = true

[[measurements]]
kind = "transmission"

[[measurements]]
kind = "delay"

[[measurements]]
kind = "margins"
"#;

    #[test]
    fn cw_run_produces_consistent_scalars() {
        let c = ScenarioConfig::from_toml_str(CW).unwrap();
        let r = run_scenario(&c).unwrap();
        let d = r.measurement("delay").unwrap();
        let predicted = d.scalar("delay_s_average_power").unwrap();
        assert!((d.scalar("delay_s_adiabatic").unwrap() - predicted).abs() / predicted < 1e-3);
        assert!((d.scalar("delay_s_full").unwrap() - predicted).abs() / predicted < 0.05);
        assert!(r.measurement("transmission").unwrap().scalar("transmission_full").unwrap() > 0.95);
        assert!(r.measurement("cross_solver").unwrap().scalar("relative_l2").unwrap() < 0.1);
        assert_eq!(r.provenance.config_hash, config_hash(&c));
        assert!(r.measurement("margins").unwrap().scalar("margin_a").unwrap() > 10.0);
    }

    #[test]
    fn sweep_keeps_order_and_isolates_failures() {
        let c = ScenarioConfig::from_toml_str(CW).unwrap();
        let values = vec![
            toml::Value::String("3 MHz".into()),
            toml::Value::String("-1 MHz".into()),
            toml::Value::String("6 MHz".into()),
        ];
        let rs = run_sweep(&c, "control.components.0.rabi", &values, 2).unwrap();
        assert_eq!(rs.len(), 3);
        assert!(rs[0].1.is_ok() && rs[1].1.is_err() && rs[2].1.is_ok());
        let d = |i: usize| rs[i].1.as_ref().unwrap().measurement("delay").unwrap().scalar("delay_s_adiabatic").unwrap();
        assert!((d(0) / d(2) - 4.0).abs() < 1e-3);
        assert!(matches!(run_sweep(&c, "control.nothing", &values, 1), Err(RunError::Config(ConfigError::UnknownPath(_)))));
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let c = ScenarioConfig::from_toml_str(CW).unwrap();
        let rs = run_sweep(&c, "control.components.0.rabi", &[toml::Value::String("3 MHz".into())], 1).unwrap();
        let mut a = rs[0].1.clone().unwrap();
        let mut b = run_scenario(&c).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn no_measurements_gives_provenance_only() {
        let mut c = ScenarioConfig::from_toml_str(CW).unwrap();
        c.measurements.clear();
        c.solver = crate::config::SolverKind::Full;
        let r = run_scenario(&c).unwrap();
        assert!(r.measurements.is_empty());
        assert!(r.provenance.n_z_steps.is_some());
    }
}
