//! Configuration, CSV exchange, readout ingestion and run reports.

mod config;
mod csv;
mod readout;
mod report;

pub use config::{
    BathSection, ChargeSection, DecaySection, FitModel, FitSection, KineticsSection, OraclePairing, OracleSection, OutputSection,
    ResonanceSection, RunConfig, SpinLockSection,
};
pub use csv::{parse_curve, parse_table, read_curve, render_curve, render_table, write_text, Table};
pub use readout::{ingest_differential, parse_readout, Normalization, RawReadoutRecord};
pub use report::{config_hash, Report};
