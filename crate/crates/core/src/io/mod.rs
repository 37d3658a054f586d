//! Image files, synthetic fixtures, renders and reports.

pub mod fixture;
pub mod image;
pub mod pgm;
pub mod render;
pub mod report;

pub use fixture::{make_fixture, Fixture, FixtureKind, FixtureParams};
pub use image::{decode_image, load_image};
pub use pgm::{decode_pgm, encode_pgm, write_pgm, GrayImage};
pub use render::{abs_difference, render_deformed_grid};
pub use report::{Model, Report, ReportFormat, ReportRow, RunConfigFile};
