//! CSV time series with 17 significant digits.

use std::path::Path;

pub enum Column<'a> {
    Values(&'a [f64]),
    /// Written as `NaN` on every row.
    Missing,
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_series(path: &Path, headers: &[String], columns: &[Column]) -> std::io::Result<()> {
    assert_eq!(headers.len(), columns.len(), "one header per column");
    let rows = columns
        .iter()
        .filter_map(|c| match c {
            Column::Values(v) => Some(v.len()),
            Column::Missing => None,
        })
        .max()
        .unwrap_or(0);
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(headers)?;
    for i in 0..rows {
        let record = columns.iter().map(|c| match c {
            Column::Values(v) => format_value(v[i]),
            Column::Missing => format_value(f64::NAN),
        });
        writer.write_record(record)?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_value(f64::NAN), "NaN");
        assert_eq!(format_value(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn writes_missing_columns_as_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let t = [0.0, 1.0];
        write_series(
            &path,
            &["t".into(), "y".into()],
            &[Column::Values(&t), Column::Missing],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "t,y\n0.0000000000000000e0,NaN\n1.0000000000000000e0,NaN\n"
        );
    }
}
