//! Library surface of the command-line front end, exposed so integration
//! tests can drive the subcommand implementations and artifact I/O directly.

pub mod commands;
pub mod io;
pub mod stft;
