//! File formats, wall-clock timing, parallel Monte Carlo tables and the
//! benchmark behind the `hdcp` command-line tool.

pub mod bench;
pub mod clock;
pub mod csv_io;
pub mod monte_carlo;
pub mod report;

pub use clock::WallClock;
pub use csv_io::{parse_dataset, read_dataset, write_dataset, CsvError, NamedDataset};
pub use report::{fit_dataset, FitOptions, FitReport, Scheme};
