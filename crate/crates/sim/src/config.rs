//! Scenario files: TOML with unit-suffixed quantities.
//!
//! A scenario describes one medium, one time grid, a control program, a
//! probe, the solver(s) to run and the measurements to take. An optional
//! `[sweep]` section repeats the run over values of one parameter, named by
//! a dotted path such as `control.components.0.rms_rabi`.

use std::path::Path;

use eit_core::full::FullSolverOptions;
use eit_core::waveforms::{evaluate_program, matched_probe, shaped_envelope, ControlComponent, ControlProgram, EnvelopeShape, PulseTrain};
use eit_core::{DetuningProfile, FieldEnvelope, LambdaMedium, Quadrature, SimulationGrid, TimeGrid, C64, DEFAULT_GAMMA};
use serde::{Deserialize, Serialize};

use crate::units::{DecayRate, Distance, Duration, Frequency, Rate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    /// A value that parsed but is physically or logically invalid.
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("parameter path `{0}` does not exist in the scenario")]
    UnknownPath(String),
}

fn invalid(field: &str, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub solver: SolverKind,
    pub medium: MediumSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub numerics: NumericsSpec,
    pub control: ControlSpec,
    pub probe: ProbeSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<MeasurementSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Adiabatic,
    #[default]
    Full,
    Both,
}

impl SolverKind {
    pub fn runs_full(self) -> bool {
        matches!(self, SolverKind::Full | SolverKind::Both)
    }

    pub fn runs_adiabatic(self) -> bool {
        matches!(self, SolverKind::Adiabatic | SolverKind::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    /// Excited-state decay rate; defaults to 2π·6 MHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Rate>,
    /// Resonant intensity optical depth `4gL/Γ`.
    pub optical_depth: f64,
    pub length: Distance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_decoherence: Option<DecayRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhomogeneous: Option<InhomogeneousSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InhomogeneousSpec {
    pub profile: ProfileKind,
    pub fwhm: Rate,
    pub classes: usize,
    #[serde(default)]
    pub quadrature: QuadratureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Gaussian,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    #[default]
    Stratified,
    GaussHermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Length of the local-time window, starting at τ = 0.
    pub window: Duration,
    pub dt: Duration,
    /// Minimum number of cell slices; the solver may use more.
    #[serde(default = "default_slices")]
    pub z_slices: usize,
}

fn default_slices() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    #[serde(default = "default_absorption_step")]
    pub max_absorption_step: f64,
    #[serde(default = "default_rabi_step")]
    pub max_rabi_step: f64,
}

fn default_absorption_step() -> f64 {
    FullSolverOptions::default().max_absorption_step
}

fn default_rabi_step() -> f64 {
    FullSolverOptions::default().max_rabi_step
}

impl Default for NumericsSpec {
    fn default() -> Self {
        Self { max_absorption_step: default_absorption_step(), max_rabi_step: default_rabi_step() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub components: Vec<ComponentSpec>,
}

/// One control color. Exactly one of `rabi` (peak Rabi frequency) and
/// `rms_rabi` (square root of the power averaged over the modulation) is
/// given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_rabi: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Rate>,
    /// Phase at τ = 0, rad.
    #[serde(default)]
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeSpec>,
    /// `[on, off)` intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<Vec<[Duration; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<ModulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeSpec {
    Constant,
    Gaussian { center: Duration, fwhm: Duration },
    Flattop { center: Duration, duration: Duration, rise: Duration },
}

impl EnvelopeSpec {
    fn shape(&self) -> EnvelopeShape {
        match self {
            EnvelopeSpec::Constant => EnvelopeShape::Constant,
            EnvelopeSpec::Gaussian { center, fwhm } => EnvelopeShape::Gaussian { center: center.si(), fwhm: fwhm.si() },
            EnvelopeSpec::Flattop { center, duration, rise } => {
                EnvelopeShape::Flattop { center: center.si(), duration: duration.si(), rise: rise.si() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSpec {
    pub frequency: Frequency,
    pub duty: f64,
    /// Offset of the on-window, in periods.
    #[serde(default)]
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rise: Option<Duration>,
}

impl ModulationSpec {
    fn train(&self) -> PulseTrain {
        PulseTrain::new(self.frequency.si(), self.duty)
            .with_phase(self.phase)
            .with_rise(self.rise.as_ref().map_or(0.0, |r| r.si()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub envelope: EnvelopeSpec,
    /// Peak Rabi frequency.
    pub amplitude: Rate,
    /// Carrier offset from two-photon resonance with the control's
    /// reference color.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Rate>,
    /// Give the probe the control's temporal mode (see `match_component`).
    #[serde(default)]
    pub matched: bool,
    /// Match to one control component instead of the whole program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_component: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementSpec {
    /// Output over input energy, or mean power from `from` on.
    Transmission {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Duration>,
    },
    /// Swept heterodyne spectrum of the transmitted probe.
    Spectrum {
        rbw: Rate,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo_offset: Option<Rate>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Duration>,
        /// Half-width of the emitted trace around the LO.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        span: Option<Rate>,
        /// Expected comb-line spacing; adds line statistics.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        line_spacing: Option<Rate>,
    },
    /// Carrier power within one rbw, over the mean input power.
    ZeroSpan {
        rbw: Rate,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Duration>,
    },
    Delay,
    Overlap,
    Margins,
    /// Color-resolved output of a multi-color control, against a run with
    /// the first component alone held on.
    Conversion { rbw: Rate },
    Storage { t_off: Duration, t_on: Duration },
    /// Full-solver scan of the probe offset with the transmission peak's
    /// FWHM and the delay-bandwidth enhancement it implies.
    Linewidth {
        start: Rate,
        stop: Rate,
        step: Rate,
        from: Duration,
        modulation_bandwidth: Rate,
    },
}

impl MeasurementSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MeasurementSpec::Transmission { .. } => "transmission",
            MeasurementSpec::Spectrum { .. } => "spectrum",
            MeasurementSpec::ZeroSpan { .. } => "zero_span",
            MeasurementSpec::Delay => "delay",
            MeasurementSpec::Overlap => "overlap",
            MeasurementSpec::Margins => "margins",
            MeasurementSpec::Conversion { .. } => "conversion",
            MeasurementSpec::Storage { .. } => "storage",
            MeasurementSpec::Linewidth { .. } => "linewidth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

/// Core objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub medium: LambdaMedium,
    pub sim: SimulationGrid,
    pub program: ControlProgram,
    pub control: FieldEnvelope,
    pub probe: FieldEnvelope,
    pub options: FullSolverOptions,
}

impl Prepared {
    pub fn grid(&self) -> &TimeGrid {
        &self.sim.time
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// Copy with `parameter` (dotted path, numeric segments index arrays)
    /// replaced by `value`. The path must already exist.
    pub fn with_parameter(&self, parameter: &str, value: &toml::Value) -> Result<Self, ConfigError> {
        let mut tree = toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut node = &mut tree;
        for segment in parameter.split('.') {
            node = match node {
                toml::Value::Table(t) => t.get_mut(segment),
                toml::Value::Array(a) => segment.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| ConfigError::UnknownPath(parameter.to_string()))?;
        }
        *node = value.clone();
        // round-trip through text so errors carry line context
        let text = toml::to_string(&tree).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("after setting {parameter} = {value}: {m}")),
            other => other,
        })
    }

    /// Copy with every grid step divided by `factor`: the time step, the
    /// cell step bound and the minimum slice count.
    pub fn with_resolution(&self, factor: f64) -> Result<Self, ConfigError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(invalid("resolution", format!("must be > 0, got {factor}")));
        }
        let mut out = self.clone();
        out.grid.dt = self.grid.dt.scaled(1.0 / factor);
        out.grid.z_slices = ((self.grid.z_slices as f64 * factor).round() as usize).max(2);
        out.numerics.max_absorption_step = self.numerics.max_absorption_step / factor;
        Ok(out)
    }

    /// Checks the config and builds the medium, grids and fields.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        let medium = self.build_medium()?;
        let time = self.build_time_grid()?;
        let classes = self.medium.inhomogeneous.as_ref().map_or(1, |i| i.classes);
        let quadrature = match self.medium.inhomogeneous.as_ref().map(|i| i.quadrature) {
            Some(QuadratureKind::GaussHermite) => Quadrature::GaussHermite,
            _ => Quadrature::Stratified,
        };
        let sim = SimulationGrid::with_quadrature(time, self.grid.z_slices, &medium, classes, quadrature)
            .map_err(|e| invalid("grid / medium.inhomogeneous", e))?;
        let program = self.build_program()?;
        for (i, c) in program.components.iter().enumerate() {
            time.require_resolved(c.max_frequency_hz()).map_err(|e| invalid(&format!("control.components.{i}"), e))?;
        }
        let control = evaluate_program(&program, &time).map_err(|e| invalid("control", e))?;
        let probe = self.build_probe(&program, &control, &time)?;
        for m in &self.measurements {
            self.check_measurement(m, &time)?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values", "must not be empty"));
            }
        }
        if !(self.numerics.max_absorption_step > 0.0 && self.numerics.max_rabi_step > 0.0) {
            return Err(invalid("numerics", "step bounds must be > 0"));
        }
        let options = FullSolverOptions {
            max_absorption_step: self.numerics.max_absorption_step,
            max_rabi_step: self.numerics.max_rabi_step,
            snapshot_stride: None,
            // a cw probe never leaves the window
            check_window: !matches!(self.probe.envelope, EnvelopeSpec::Constant),
        };
        Ok(Prepared { medium, sim, program, control, probe, options })
    }

    fn build_medium(&self) -> Result<LambdaMedium, ConfigError> {
        let m = &self.medium;
        let gamma = m.gamma.as_ref().map_or(DEFAULT_GAMMA, |g| g.si());
        let mut medium =
            LambdaMedium::with_optical_depth(gamma, m.optical_depth, m.length.si()).map_err(|e| invalid("medium", e))?;
        if let Some(rate) = &m.ground_decoherence {
            medium = medium.with_ground_decoherence(rate.si()).map_err(|e| invalid("medium.ground_decoherence", e))?;
        }
        if let Some(inh) = &m.inhomogeneous {
            let profile = match inh.profile {
                ProfileKind::Gaussian => DetuningProfile::Gaussian,
                ProfileKind::Lorentzian => DetuningProfile::Lorentzian,
            };
            medium = medium.inhomogeneous(profile, inh.fwhm.si()).map_err(|e| invalid("medium.inhomogeneous", e))?;
            if inh.classes == 0 {
                return Err(invalid("medium.inhomogeneous.classes", "must be >= 1"));
            }
        }
        Ok(medium)
    }

    fn build_time_grid(&self) -> Result<TimeGrid, ConfigError> {
        let window = self.grid.window.si();
        let dt = self.grid.dt.si();
        if !(window > 0.0) {
            return Err(invalid("grid.window", "must be > 0"));
        }
        if !(dt > 0.0 && dt < window) {
            return Err(invalid("grid.dt", "must be > 0 and shorter than the window"));
        }
        TimeGrid::with_step(0.0, window, dt).map_err(|e| invalid("grid", e))
    }

    fn build_program(&self) -> Result<ControlProgram, ConfigError> {
        if self.control.components.is_empty() {
            return Err(invalid("control.components", "at least one component is required"));
        }
        let mut components = Vec::new();
        for (i, spec) in self.control.components.iter().enumerate() {
            let field = format!("control.components.{i}");
            let train = spec.modulation.as_ref().map(|m| m.train());
            if let Some(t) = &train {
                t.validate().map_err(|e| invalid(&format!("{field}.modulation"), e))?;
            }
            let amplitude = match (&spec.rabi, &spec.rms_rabi) {
                (Some(r), None) => r.si(),
                (None, Some(r)) => r.si() / train.map_or(1.0, |t| t.mean_power()).sqrt(),
                _ => return Err(invalid(&field, "give exactly one of `rabi` and `rms_rabi`")),
            };
            let mut c = ControlComponent::cw(amplitude)
                .with_offset(spec.offset.as_ref().map_or(0.0, |o| o.si()))
                .with_phase(spec.phase);
            if let Some(env) = &spec.envelope {
                c = c.with_envelope(env.shape());
            }
            if let Some(gate) = &spec.gate {
                c = c.with_gate(gate.iter().map(|[on, off]| (on.si(), off.si())).collect());
            }
            if let Some(t) = train {
                c = c.with_modulation(t);
            }
            c.validate().map_err(|e| invalid(&field, e))?;
            components.push(c);
        }
        ControlProgram::new(components).map_err(|e| invalid("control", e))
    }

    fn build_probe(&self, program: &ControlProgram, control: &FieldEnvelope, time: &TimeGrid) -> Result<FieldEnvelope, ConfigError> {
        let p = &self.probe;
        if self.solver == SolverKind::Adiabatic && !p.matched {
            return Err(invalid("probe.matched", "the adiabatic solver needs a probe matched to the control"));
        }
        if p.match_component.is_some() && !p.matched {
            return Err(invalid("probe.match_component", "only meaningful with `matched = true`"));
        }
        let offset = p.offset.as_ref().map_or(0.0, |o| o.si());
        let shape = shaped_envelope(time, p.envelope.shape(), C64::new(p.amplitude.si(), 0.0))
            .map_err(|e| invalid("probe.envelope", e))?;
        let mut envelope = FieldEnvelope::new(
            *time,
            shape.samples().iter().enumerate().map(|(j, s)| s * C64::from_polar(1.0, offset * time.time(j))).collect(),
        )
        .map_err(|e| invalid("probe", e))?
        .with_carrier_offset(offset);
        if p.matched {
            let mode = match p.match_component {
                None => control.clone(),
                Some(i) => {
                    let c = program
                        .components
                        .get(i)
                        .ok_or_else(|| invalid("probe.match_component", format!("no control component {i}")))?;
                    evaluate_program(&ControlProgram::single(c.clone()).map_err(|e| invalid("control", e))?, time)
                        .map_err(|e| invalid("control", e))?
                }
            };
            envelope = matched_probe(&mode, &envelope).map_err(|e| invalid("probe.matched", e))?;
        }
        Ok(envelope)
    }

    fn check_measurement(&self, m: &MeasurementSpec, time: &TimeGrid) -> Result<(), ConfigError> {
        let field = format!("measurements.{}", m.kind());
        let check_from = |from: &Option<Duration>| match from {
            Some(f) if !(f.si() >= 0.0 && f.si() < time.t_end()) => Err(invalid(&field, "`from` lies outside the window")),
            _ => Ok(()),
        };
        match m {
            MeasurementSpec::Transmission { from } | MeasurementSpec::ZeroSpan { from, .. } => check_from(from)?,
            MeasurementSpec::Spectrum { from, rbw, .. } => {
                check_from(from)?;
                if !(rbw.si() > 0.0) {
                    return Err(invalid(&field, "rbw must be > 0"));
                }
            }
            MeasurementSpec::Storage { t_off, t_on } => {
                if !self.solver.runs_full() {
                    return Err(invalid(&field, "storage needs the full solver"));
                }
                if !(t_on.si() >= t_off.si()) {
                    return Err(invalid(&field, "t_on must not precede t_off"));
                }
            }
            MeasurementSpec::Conversion { .. } => {
                if self.control.components.len() < 2 {
                    return Err(invalid(&field, "conversion needs at least two control components"));
                }
                let base = self.control.components[0].offset.as_ref().map_or(0.0, |o| o.si());
                let other = self.control.components[1].offset.as_ref().map_or(0.0, |o| o.si());
                if other == base {
                    return Err(invalid(&field, "the first two control components must differ in offset"));
                }
            }
            MeasurementSpec::Linewidth { start, stop, step, from, modulation_bandwidth } => {
                check_from(&Some(from.clone()))?;
                if !self.solver.runs_full() {
                    return Err(invalid(&field, "the linewidth scan needs the full solver"));
                }
                if !(step.si() > 0.0 && stop.si() > start.si()) {
                    return Err(invalid(&field, "scan needs start < stop and step > 0"));
                }
                if !(modulation_bandwidth.si() > 0.0) {
                    return Err(invalid(&field, "modulation_bandwidth must be > 0"));
                }
            }
            MeasurementSpec::Delay | MeasurementSpec::Overlap | MeasurementSpec::Margins => {}
        }
        Ok(())
    }
}

/// Reads a sweep value written on the command line: TOML literals
/// (`0.2`, `true`, `"1 MHz"`) are taken as such, anything else as a string.
pub fn parse_value(text: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {text}")).map(|w| w.v).unwrap_or_else(|_| toml::Value::String(text.trim().to_string()))
}
