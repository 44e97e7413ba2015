//! Configuration, output formats, the verification registry and the
//! subcommand drivers behind the `cho` binary.

pub mod config;
pub mod io;
pub mod run;
pub mod verify;

pub use config::{parse_config, RunConfig};
pub use run::{run_optimize, run_oracle_compare, run_simulate, run_verify, write_failure, VerifyRow};
pub use verify::{find, Check, CheckOutcome, REGISTRY};

/// Built-in configurations, addressable by name from the CLI.
pub const PRESETS: &[(&str, &str)] = &[
    ("stationary", include_str!("../../presets/stationary.toml")),
    ("remark22", include_str!("../../presets/remark22.toml")),
    ("separation2d", include_str!("../../presets/separation2d.toml")),
    ("gradient-check", include_str!("../../presets/gradient-check.toml")),
    ("inverse-crime", include_str!("../../presets/inverse-crime.toml")),
    ("continuous-dependence", include_str!("../../presets/continuous-dependence.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, text) in PRESETS {
            let cfg = RunConfig::from_toml_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("remark22").is_some());
        assert!(preset("nope").is_none());
    }
}
