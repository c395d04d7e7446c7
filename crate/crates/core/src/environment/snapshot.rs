//! JSON snapshot of a configuration: one object per realization,
//! `{dimension, window: {lo, hi}, seed, points: [{x, E}]}`.
//!
//! serde_json writes the shortest representation that parses back to the
//! same `f64`, so the round trip is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::MarkedConfiguration;
use crate::error::Result;

pub fn write_snapshot(config: &MarkedConfiguration, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, config)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<MarkedConfiguration> {
    let config: MarkedConfiguration = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{sample_configuration, MarkLaw, ProcessSpec, Window};

    #[test]
    fn snapshot_round_trip_is_exact() {
        let spec = ProcessSpec::poisson(2, 1.0, MarkLaw::PowerLaw { alpha: 0.5, cutoff: 1.0 });
        let w = Window::new(vec![-3.3, -1.0], vec![3.7, 1.0 / 3.0]).unwrap();
        let c = sample_configuration(&spec, &w, 2024).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        write_snapshot(&c, &path).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(c, back);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"dimension\":2,\"window\":{\"lo\""));
        assert!(text.contains("\"E\":"));
    }
}
