//! CSV formatting and the provenance block.

use crate::scenario::Scenario;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest exponent form that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Semicolon-separated list, so it fits in one CSV field.
pub fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

pub fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(';').map(|x| x.trim().parse().ok()).collect()
}

/// `#` comment lines recording the tool version, the verb, the scenario
/// hash and the full canonical scenario.
pub fn provenance(scenario: &Scenario, verb: &str) -> String {
    let mut out = format!(
        "# mdi-keyrate {VERSION}\n# verb {verb}\n# scenario {} sha256={}\n# seed {}\n",
        scenario.name,
        scenario.hash(),
        scenario.config.seed
    );
    for line in scenario.to_text().lines() {
        out.push_str("#   ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1e-6, 7.49e-5, 0.1 + 0.2, 123.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(parse_list(&fmt_list(&[0.5, 1e-6])).unwrap(), vec![0.5, 1e-6]);
    }
}
