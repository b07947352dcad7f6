//! Files on disk: run configuration, field snapshots, time-series CSVs, the
//! profile bundle and the run manifest.

mod bundle;
mod config;
mod manifest;
mod series;
mod snapshot;

pub use bundle::{write_profile_bundle, ProfileBundle, BUNDLE_HEADER};
pub use config::{ConstantsSection, GridSection, RunConfig, RunSection, StepperSection};
pub use manifest::{sha256_file, RunManifest, MANIFEST_NAME};
pub use series::{read_modulation_csv, write_timeseries, ModulationRow, TIMESERIES_HEADER};
pub use snapshot::{read_snapshot, read_snapshot_file, write_snapshot, write_snapshot_file, SNAPSHOT_MAGIC};

/// Shortest round-trip decimal for moderate magnitudes, exponent form
/// otherwise, so that columns stay readable and parse back exactly.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// `key = value` lines.
pub fn key_values<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k.as_ref());
        out.push_str(" = ");
        out.push_str(v.as_ref());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.2, 1e-4, 9.99e-5, 123456.789, 1e15, -3.3e-12, f64::MIN_POSITIVE, 1e300] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.5e-7), "1.5e-7");
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }
}
