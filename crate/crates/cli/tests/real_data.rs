//! Checks that only apply when the real (non-redistributable) source
//! tables are dropped into `fixtures/real/`; they are skipped otherwise.

use calibag::datasets::{load_csv, CsvSchema};
use std::path::PathBuf;

fn real_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/real")
}

/// The mechanical-properties preparation (complete rows, room-temperature
/// window, duplicate-input averaging) must yield exactly 287 rows on the
/// real source table.
#[test]
fn mechanical_properties_preparation_row_count() {
    let csv = real_dir().join("mechanical-properties.csv");
    let schema_path = real_dir().join("mechanical-properties.schema.toml");
    if !csv.exists() || !schema_path.exists() {
        println!(
            "skipped: real mechanical-properties table not present at {}",
            csv.display()
        );
        return;
    }
    let schema = CsvSchema::from_toml_path(&schema_path).unwrap();
    let data = load_csv::<f64>(&csv, &schema).unwrap();
    assert_eq!(data.n_rows(), 287);
}
