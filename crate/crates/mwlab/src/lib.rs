//! A closed-loop numerical laboratory for TLS loss measurement with
//! superconducting multi-wave resonators.
//!
//! The crate synthesizes realistic microwave transmission data — frequency
//! sweeps and on-resonance time series — for quarter-wave and N·λ/4
//! resonators whose internal loss is dominated by fluctuating two-level
//! systems plus amplifier noise, and implements the full analysis chain that
//! turns such data back into physics: diameter-correction sweep fits,
//! conformal mapping of time series into instantaneous loss, Welch spectral
//! estimation of the loss noise, and distributional statistics of repeated
//! measurements. Because every dataset carries its ground truth, the
//! pipeline closes the loop and the 1/N fluctuation-averaging and SNR laws
//! of the multi-wave design are testable end to end.
//!
//! ```
//! use mwlab::model::{self, ResonatorDesign, TlsModel, DrivePoint};
//! use num_complex::Complex64;
//!
//! let design = ResonatorDesign::multi_wave(
//!     33, 5.43e9, 2.34e6, 3.33e6, 0.15, 5e-8, Complex64::new(1.0, 0.0),
//! )?;
//! let tls = TlsModel::new(1.25e-6, 0.1614, 5.3e-7)?;
//! let drive = DrivePoint::from_density(&design, &tls, 1.0, 0.010)?;
//! let xi = model::tls_loss_mean(&design, &tls, &drive);
//! assert!((xi - 4.66e-7).abs() < 0.01e-7);
//! # Ok::<(), mwlab::model::ModelError>(())
//! ```
//!
//! The accompanying guide in `book/` walks through each stage; its code
//! blocks compile and run as part of `cargo test --doc`.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod io;
pub mod model;
pub mod plot;
pub mod psd;
pub mod report;
pub mod seed;
pub mod stats;
pub mod synth;

#[cfg(doctest)]
mod guide {
    //! Runs every code block of the mdbook guide as a doc-test.
    #[doc = include_str!("../../../book/src/resonance-model.md")]
    mod resonance_model {}
    #[doc = include_str!("../../../book/src/tls-loss.md")]
    mod tls_loss {}
    #[doc = include_str!("../../../book/src/fluctuator-noise.md")]
    mod fluctuator_noise {}
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    mod synthetic_data {}
    #[doc = include_str!("../../../book/src/sweep-fitting.md")]
    mod sweep_fitting {}
    #[doc = include_str!("../../../book/src/conformal-mapping.md")]
    mod conformal_mapping {}
    #[doc = include_str!("../../../book/src/spectral-analysis.md")]
    mod spectral_analysis {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
}
