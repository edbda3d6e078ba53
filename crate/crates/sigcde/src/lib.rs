//! File formats, batch evaluation, the experiment suite and the command-line
//! front end for `sigcde-core`.

pub mod batch;
pub mod cli;
pub mod io;
pub mod suite;
