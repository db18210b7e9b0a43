//! Closed-form physics of side-coupled transmission-line resonators with
//! saturable two-level-system (TLS) loss.
//!
//! Everything in this module is a pure function of its inputs: the thermal
//! polarization factor, the saturable loss law, the standing-wave overlap
//! factor, photon-number/power conversions, the notch S21 resonance model,
//! and the amplifier noise law. Monte Carlo generation lives in [`crate::synth`],
//! parameter extraction in [`crate::fit`].

use num_complex::Complex64;
use std::f64::consts::TAU;

/// Fixed CODATA 2018 values. Not configurable.
pub mod constants {
    use std::f64::consts::TAU;

    /// Planck constant, J·s (exact).
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Boltzmann constant, J/K (exact).
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = PLANCK / TAU;
}

/// Temperature below which TLS relaxation and dephasing rates are treated as
/// constant when scaling the critical photon density (see
/// [`TlsModel::effective_nc`]).
pub const TLS_COHERENCE_FLOOR_K: f64 = 0.010;

// ── Errors ──────────────────────────────────────────────────────────────────

/// Domain errors from invalid physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A quantity that must be strictly positive was not.
    NonPositive { name: &'static str, value: f64 },
    /// A quantity that must be non-negative was negative.
    Negative { name: &'static str, value: f64 },
    /// The segment count of a transmission-line resonator must be odd.
    EvenSegmentCount(u32),
    /// A quarter-wave resonator has exactly one quarter-wave segment.
    QuarterWaveSegments(u32),
    /// The off-resonance transmission must have non-zero magnitude.
    ZeroBackground,
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonPositive { name, value } => {
                write!(f, "{} must be > 0, got {}", name, value)
            }
            Self::Negative { name, value } => {
                write!(f, "{} must be >= 0, got {}", name, value)
            }
            Self::EvenSegmentCount(n) => {
                write!(f, "segment count must be odd, got {}", n)
            }
            Self::QuarterWaveSegments(n) => {
                write!(f, "quarter-wave resonator must have n_quarter = 1, got {}", n)
            }
            Self::ZeroBackground => write!(f, "|z_inf| must be > 0"),
        }
    }
}

impl std::error::Error for ModelError {}

fn require_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Negative { name, value })
    }
}

// ── Types ───────────────────────────────────────────────────────────────────

/// Electrical length class of a transmission-line resonator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonatorKind {
    /// Standard λ/4 resonator (one quarter-wave segment).
    QuarterWave,
    /// N·λ/4 resonator, N odd; N quarter-wave segments averaging independent
    /// TLS baths.
    MultiWave,
}

/// Geometry-independent electrical description of one resonance.
///
/// Constructed through [`ResonatorDesign::new`] (or the
/// [`quarter_wave`](ResonatorDesign::quarter_wave) /
/// [`multi_wave`](ResonatorDesign::multi_wave) shorthands), which enforce the
/// parameter invariants; treat the fields as read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorDesign {
    pub kind: ResonatorKind,
    /// Number of quarter-wave segments N (odd, 1 for a quarter-wave design).
    pub n_quarter: u32,
    /// Resonance frequency, Hz.
    pub fr: f64,
    /// Coupling quality factor.
    pub qc: f64,
    /// Power-independent internal quality factor (non-TLS loss channels).
    pub qi_hp: f64,
    /// Impedance-mismatch angle, rad.
    pub phi: f64,
    /// Cable delay, s (chip delay included).
    pub tau: f64,
    /// Complex off-resonance transmission.
    pub z_inf: Complex64,
}

impl ResonatorDesign {
    pub fn new(
        kind: ResonatorKind,
        n_quarter: u32,
        fr: f64,
        qc: f64,
        qi_hp: f64,
        phi: f64,
        tau: f64,
        z_inf: Complex64,
    ) -> Result<Self, ModelError> {
        if n_quarter == 0 || n_quarter % 2 == 0 {
            return Err(ModelError::EvenSegmentCount(n_quarter));
        }
        if kind == ResonatorKind::QuarterWave && n_quarter != 1 {
            return Err(ModelError::QuarterWaveSegments(n_quarter));
        }
        require_positive("fr", fr)?;
        require_positive("qc", qc)?;
        require_positive("qi_hp", qi_hp)?;
        if z_inf.norm() == 0.0 || !z_inf.is_finite() {
            return Err(ModelError::ZeroBackground);
        }
        Ok(Self { kind, n_quarter, fr, qc, qi_hp, phi, tau, z_inf })
    }

    pub fn quarter_wave(
        fr: f64,
        qc: f64,
        qi_hp: f64,
        phi: f64,
        tau: f64,
        z_inf: Complex64,
    ) -> Result<Self, ModelError> {
        Self::new(ResonatorKind::QuarterWave, 1, fr, qc, qi_hp, phi, tau, z_inf)
    }

    pub fn multi_wave(
        n_quarter: u32,
        fr: f64,
        qc: f64,
        qi_hp: f64,
        phi: f64,
        tau: f64,
        z_inf: Complex64,
    ) -> Result<Self, ModelError> {
        Self::new(ResonatorKind::MultiWave, n_quarter, fr, qc, qi_hp, phi, tau, z_inf)
    }

    /// Loaded quality factor for a given internal Q:
    /// 1/Ql = 1/Qi + cos(φ)/Qc.
    pub fn loaded_q(&self, qi: f64) -> f64 {
        1.0 / (1.0 / qi + self.phi.cos() / self.qc)
    }

    /// Internal quality factor for a given TLS loss ξ:
    /// 1/Qi = 1/Qi,hp + ξ.
    pub fn internal_q(&self, xi: f64) -> f64 {
        1.0 / (1.0 / self.qi_hp + xi)
    }

    /// Full width of the resonance in Hz, fr/Ql, at the given internal Q.
    pub fn linewidth(&self, qi: f64) -> f64 {
        self.fr / self.loaded_q(qi)
    }
}

/// Saturable TLS loss parameters.
///
/// `xi0` is the fully unsaturated loss (filling factor times intrinsic loss
/// tangent, lumped into one number). `nc` is the critical photon density for
/// saturation quoted in the low-temperature limit; the effective threshold
/// grows with temperature because the TLS relaxation and dephasing rates do
/// (see [`TlsModel::effective_nc`]). `fluct_amp` is the RMS of the loss
/// fluctuations δξ of a quarter-wave resonator over the reference band
/// [0.1, 250] Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsModel {
    pub xi0: f64,
    pub nc: f64,
    pub fluct_amp: f64,
}

impl TlsModel {
    pub fn new(xi0: f64, nc: f64, fluct_amp: f64) -> Result<Self, ModelError> {
        require_non_negative("xi0", xi0)?;
        require_positive("nc", nc)?;
        require_non_negative("fluct_amp", fluct_amp)?;
        Ok(Self { xi0, nc, fluct_amp })
    }

    /// Effective critical photon density at temperature `t`.
    ///
    /// The critical field obeys |Ec|² ∝ 1/(T1·T2). The one-phonon relaxation
    /// rate scales as coth(hf/2kBT) and the dephasing rate linearly in T above
    /// the coherence floor [`TLS_COHERENCE_FLOOR_K`], below which both rates
    /// are taken as constant:
    ///
    /// nc_eff(f, T) = nc · coth(hf/2kBT) · max(1, T/T_floor).
    pub fn effective_nc(&self, fr: f64, t: f64) -> f64 {
        let x = constants::PLANCK * fr / (2.0 * constants::BOLTZMANN * t);
        self.nc / x.tanh() * (t / TLS_COHERENCE_FLOOR_K).max(1.0)
    }

    /// Combined thermal and drive suppression factor
    /// β(f, T) / sqrt(1 + n/nc_eff), applied to the unsaturated loss — and to
    /// its fluctuations, which come from the same saturably-absorbing TLS.
    pub fn saturation(&self, fr: f64, n_density: f64, t: f64) -> f64 {
        let beta = (constants::PLANCK * fr / (2.0 * constants::BOLTZMANN * t)).tanh();
        beta / (1.0 + n_density / self.effective_nc(fr, t)).sqrt()
    }

    /// Mean TLS loss at photon density `n_density` and temperature `t`:
    /// ξ = ξ0 · β(f, T) / sqrt(1 + n/nc_eff).
    pub fn xi_mean(&self, fr: f64, n_density: f64, t: f64) -> f64 {
        self.xi0 * self.saturation(fr, n_density, t)
    }
}

/// Cryogenic amplifier noise description.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierModel {
    /// Noise temperature, K.
    pub tn: f64,
    /// Measurement bandwidth, Hz.
    pub bandwidth: f64,
}

impl AmplifierModel {
    pub fn new(tn: f64, bandwidth: f64) -> Result<Self, ModelError> {
        require_non_negative("tn", tn)?;
        require_positive("bandwidth", bandwidth)?;
        Ok(Self { tn, bandwidth })
    }
}

/// One operating point of the measurement: feedline power, the photon density
/// it sustains, and the bath temperature.
///
/// Construct through [`DrivePoint::from_density`] or
/// [`DrivePoint::from_power`], which keep `pf` and `n_density` consistent
/// under [`photon_density_from_power`] with the loaded Q evaluated
/// self-consistently at this drive.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivePoint {
    /// Feedline power, W.
    pub pf: f64,
    /// Photons per λ/4 segment.
    pub n_density: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

impl DrivePoint {
    /// Drive point producing the target photon density.
    ///
    /// The loaded Q (and hence the required power) depends on the TLS loss at
    /// this very density, so the power follows directly from the saturation
    /// law evaluated at `n_density`.
    pub fn from_density(
        design: &ResonatorDesign,
        tls: &TlsModel,
        n_density: f64,
        temperature: f64,
    ) -> Result<Self, ModelError> {
        require_non_negative("n_density", n_density)?;
        require_positive("temperature", temperature)?;
        let ql = design.loaded_q(design.internal_q(tls.xi_mean(design.fr, n_density, temperature)));
        let pf = feedline_power_for_density(design, n_density, ql);
        Ok(Self { pf, n_density, temperature })
    }

    /// Drive point for a given feedline power.
    ///
    /// The photon density solves the fixed point n = n(pf, Ql(ξ(n))); the
    /// iteration converges in a handful of steps because ξ only perturbs Ql.
    pub fn from_power(
        design: &ResonatorDesign,
        tls: &TlsModel,
        pf: f64,
        temperature: f64,
    ) -> Result<Self, ModelError> {
        require_non_negative("pf", pf)?;
        require_positive("temperature", temperature)?;
        let mut n = 0.0;
        for _ in 0..200 {
            let ql =
                design.loaded_q(design.internal_q(tls.xi_mean(design.fr, n, temperature)));
            let next = photon_density_from_power(design, pf, ql);
            if (next - n).abs() <= 1e-14 * next.max(1e-300) {
                n = next;
                break;
            }
            n = next;
        }
        Ok(Self { pf, n_density: n, temperature })
    }
}

// ── Operations ──────────────────────────────────────────────────────────────

/// Thermal TLS polarization factor β = tanh(h·fr / (2·kB·t)).
///
/// Strictly decreasing in `t`, increasing in `fr`, always in (0, 1].
pub fn beta_factor(fr: f64, t: f64) -> Result<f64, ModelError> {
    require_positive("fr", fr)?;
    require_positive("t", t)?;
    Ok((constants::PLANCK * fr / (2.0 * constants::BOLTZMANN * t)).tanh())
}

/// Mean TLS-induced loss ξ at the given drive point.
///
/// Depends on the resonator only through its frequency: at equal photon
/// density a quarter-wave and a multi-wave resonator see identical loss
/// (the equal-field condition).
pub fn tls_loss_mean(design: &ResonatorDesign, tls: &TlsModel, drive: &DrivePoint) -> f64 {
    tls.xi_mean(design.fr, drive.n_density, drive.temperature)
}

/// Longitudinal overlap factor ρ_z = 6/(N·λ) of the standing-wave mode,
/// i.e. ∫cos⁴ / (∫cos²)² over the resonator length N·λ/4.
pub fn rho_z(n_quarter: u32, lambda: f64) -> Result<f64, ModelError> {
    if n_quarter == 0 || n_quarter % 2 == 0 {
        return Err(ModelError::EvenSegmentCount(n_quarter));
    }
    require_positive("lambda", lambda)?;
    Ok(6.0 / (n_quarter as f64 * lambda))
}

/// Photons per λ/4 segment sustained by feedline power `pf` at loaded
/// quality factor `ql`.
///
/// Total photon number n_tot = 2·Ql²·Pf / (ħ·ωr²·Qc); the density divides by
/// the segment count, so at fixed (pf, ql, qc, fr) it scales as 1/N.
pub fn photon_density_from_power(design: &ResonatorDesign, pf: f64, ql: f64) -> f64 {
    let omega_r = TAU * design.fr;
    let n_total = 2.0 * ql * ql * pf / (constants::HBAR * omega_r * omega_r * design.qc);
    n_total / design.n_quarter as f64
}

/// Feedline power required to sustain `n_density` photons per λ/4 segment at
/// loaded quality factor `ql`. Inverse of [`photon_density_from_power`].
pub fn feedline_power_for_density(design: &ResonatorDesign, n_density: f64, ql: f64) -> f64 {
    let omega_r = TAU * design.fr;
    n_density * design.n_quarter as f64 * constants::HBAR * omega_r * omega_r * design.qc
        / (2.0 * ql * ql)
}

/// Notch-type S21 transmission at probe frequency `f` for internal quality
/// factor `qi`:
///
/// S21(f) = e^(−j2πfτ) · z_inf · [1 − (Ql/Qc)·e^(jφ) / (1 + 2j·Ql·x)],
///
/// with x = (f − fr)/fr and 1/Ql = 1/Qi + cos(φ)/Qc. The bracket tends to 1
/// far off resonance.
pub fn s21_model(design: &ResonatorDesign, qi: f64, f: f64) -> Complex64 {
    let ql = design.loaded_q(qi);
    let x = (f - design.fr) / design.fr;
    let mismatch = Complex64::from_polar(ql / design.qc, design.phi);
    let bracket = Complex64::new(1.0, 0.0) - mismatch / Complex64::new(1.0, 2.0 * ql * x);
    Complex64::from_polar(1.0, -TAU * f * design.tau) * design.z_inf * bracket
}

/// Per-sample S21 standard deviation set by amplifier noise:
/// σ = sqrt(kB·Tn·B / Pf).
///
/// The variance scales as 1/Pf, so driving N times harder (as a multi-wave
/// resonator allows at equal photon density) cuts it N-fold.
pub fn amplifier_sigma(amp: &AmplifierModel, pf: f64) -> Result<f64, ModelError> {
    require_positive("pf", pf)?;
    Ok((constants::BOLTZMANN * amp.tn * amp.bandwidth / pf).sqrt())
}
