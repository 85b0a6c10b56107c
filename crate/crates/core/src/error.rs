use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A waveform feature is too fast for the time grid.
    #[error("grid cannot resolve {frequency_hz} Hz: {samples_per_period:.2} samples per period, need at least {required}")]
    GridResolution {
        frequency_hz: f64,
        samples_per_period: f64,
        required: f64,
    },

    /// Probe present where the control is absent; the adiabatic map
    /// `c_c = −Ω_p/Ω_c` is undefined on these local-time intervals (s).
    #[error("probe present without control on {} interval(s), first at [{:.4e}, {:.4e}] s", .intervals.len(), .intervals[0].0, .intervals[0].1)]
    ModeMismatch { intervals: Vec<(f64, f64)> },

    /// Pulse energy leaves the simulation window.
    #[error("window overrun: {lost_fraction:.3e} of the pulse leaves the grid; extend the window by {required_extension:?} s")]
    WindowOverrun {
        lost_fraction: f64,
        required_extension: Option<f64>,
    },

    #[error("non-finite amplitude in velocity class {class} at slice {z_step}, tau = {tau:.6e} s")]
    Divergence { class: usize, z_step: usize, tau: f64 },

    /// The stored polariton does not fit inside the cell when the control is
    /// switched off. `span` is the occupied cell interval in metres.
    #[error("pulse not contained at switch-off: occupies [{:.4e}, {:.4e}] m of a {length:.4e} m cell", .span.0, .span.1)]
    Containment { span: (f64, f64), length: f64 },

    #[error("zero-energy field: {0}")]
    ZeroEnergy(&'static str),

    #[error("unresolved linewidth: {0}")]
    UnresolvedLinewidth(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
