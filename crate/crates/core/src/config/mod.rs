//! Model files, presets and CSV output.

pub mod csv;
pub mod format;
pub mod presets;

pub use csv::{write_csv, write_sweep_csv};
pub use format::{emit_model, parse_model, ParseError, ParseErrorKind};
pub use presets::{preset, Preset, UnknownPreset, PRESET_NAMES};
