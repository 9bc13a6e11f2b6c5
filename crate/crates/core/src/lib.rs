//! Ocean float telemetry to advisories.
//!
//! The crate turns raw OIDS-style float messages (a header line followed by
//! hex data lines) into calibrated temperature/salinity/pressure profiles,
//! groups them by region, evaluates an oscillation index per level, mines
//! time-lagged episode rules over the discretized index series and finally
//! composes strong-wave alerts and potential-fishing-zone advisories into a
//! single report.
//!
//! Each stage lives in its own module and only exchanges the record types
//! declared there:
//!
//! - [`telemetry`]: header grammar and hex block parsing.
//! - [`profile`]: calibration of 16-bit counts into physical levels.
//! - [`region`]: grouping of decoded levels into region segments.
//! - [`index`]: the oscillation index and its average min/max band.
//! - [`episode`]: event segmentation, discretization and rule mining.
//! - [`advisory`]: alert detection and report composition.
//! - [`pipeline`]: the end-to-end driver and its file formats.

pub mod advisory;
pub mod episode;
pub mod index;
pub mod pipeline;
pub mod profile;
pub mod region;
pub mod telemetry;

pub use advisory::{Advisory, AdvisoryKind, ReportRow, ReportTable};
pub use episode::{EpisodeRule, Event, Symbol};
pub use index::{IndexBand, IndexSample};
pub use profile::{CalibrationTable, ProfileRecord};
pub use region::{RegionKey, RegionSegment};
pub use telemetry::{HeaderFields, MessageBlock};

/// Timestamp format used by every text artifact the pipeline writes.
pub const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.f";
