//! Problem files, templates and the `validate` / `solve` / `templates`
//! commands behind the `pdfbf` binary.

pub mod commands;
pub mod schema;
pub mod templates;

pub use commands::{
    cmd_solve, cmd_templates_emit, cmd_templates_list, cmd_validate, property_checks, run_solve,
    trace_csv, PropertyCheck, SolveArgs, SolveOutcome, EXIT_DIVERGED, EXIT_MAX_ITER, EXIT_OK,
    EXIT_PROPERTY, EXIT_SCHEMA,
};
pub use schema::{BuiltProblem, FileError, InjectPreset, ProblemFile};
pub use templates::{template, TEMPLATE_NAMES};
