pub mod converge;
pub mod estimates;
pub mod flow;
pub mod ot;
pub mod pde;

use std::path::{Path, PathBuf};

use crate::config::Loaded;

/// `--out`, else `run.output` relative to the config file, else
/// `<subcommand>-output` next to the config file.
pub fn output_dir(cli: Option<&Path>, loaded: &Loaded, subcommand: &str) -> PathBuf {
    match (cli, &loaded.config.run.output) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => loaded.base_dir().join(dir),
        (None, None) => loaded.base_dir().join(format!("{subcommand}-output")),
    }
}

/// File name of the `k`-th saved field with the given stem.
pub fn indexed(stem: &str, k: usize) -> String {
    format!("{stem}_{k:04}.field")
}
