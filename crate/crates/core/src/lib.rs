//! Desk-scale simulator of a 64-antenna massive-MIMO downlink and the RF-EMF
//! exposure it produces.
//!
//! The pipeline per scenario is: ground-truth channel → noisy CSI estimate →
//! zero-forcing precoder → OFDM/64-QAM frame with per-UE BER → E-field heat
//! map over the probe grid. Heat maps are then averaged, cut, fitted and
//! checked against regional exposure limits.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod compliance;
pub mod field;
pub mod geometry;
pub mod numerics;
pub mod ofdm;
pub mod precoding;
pub mod runner;
pub mod stats;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Precoding(#[from] precoding::PrecodingError),
    #[error(transparent)]
    Ofdm(#[from] ofdm::OfdmError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Compliance(#[from] compliance::ComplianceError),
    #[error(transparent)]
    Runner(#[from] runner::RunnerError),
}

pub type Result<T> = std::result::Result<T, Error>;
