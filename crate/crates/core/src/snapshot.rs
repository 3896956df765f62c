//! Plain-text field snapshots: one header line, then one value per line.
//!
//! ```text
//! # t=1.0000000000000000e2 L=2.0000000000000000e4 N=65536 d=1 beta=1 kernel=dirac
//! 0.0000000000000000e0
//! ...
//! ```

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::grid::Grid;

/// Header fields of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub t: f64,
    pub half_width: f64,
    pub points: usize,
    pub dim: usize,
    pub beta: f64,
    pub kernel: String,
}

pub fn write_snapshot(field: &DensityField, beta: f64, kernel_id: &str) -> String {
    let g = field.grid();
    let mut s = format!(
        "# t={:.16e} L={:.16e} N={} d={} beta={} kernel={}\n",
        field.time(),
        g.half_width(),
        g.points_per_axis(),
        g.dim(),
        beta,
        kernel_id
    );
    s.reserve(field.values().len() * 24);
    for v in field.values() {
        s.push_str(&format!("{v:.16e}\n"));
    }
    s
}

pub fn read_snapshot(text: &str) -> Result<(SnapshotHeader, DensityField)> {
    let mut lines = text.lines();
    let head = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Parse("missing snapshot header".into()))?;
    let field = |key: &str| -> Result<&str> {
        head.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Parse(format!("snapshot header lacks `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        field(key)?.parse().map_err(|_| Error::Parse(format!("bad `{key}` in snapshot header")))
    };
    let header = SnapshotHeader {
        t: num("t")?,
        half_width: num("L")?,
        points: num("N")? as usize,
        dim: num("d")? as usize,
        beta: num("beta")?,
        kernel: field("kernel")?.to_string(),
    };
    let grid = Grid::new(header.dim, header.half_width, header.points)?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad snapshot value `{l}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != grid.len() {
        return Err(Error::Parse(format!("snapshot has {} values, expected {}", values.len(), grid.len())));
    }
    let f = DensityField::new(grid, values, header.t)?;
    Ok((header, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitialData;

    #[test]
    fn roundtrip_is_exact() {
        let g = Grid::new(1, 4.0, 32).unwrap();
        let f = InitialData::Gaussian { variance: 0.7 }.build(&g).unwrap().with_time(2.5);
        let text = write_snapshot(&f, 0.5, "bump-w1");
        let (h, back) = read_snapshot(&text).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(h.t, 2.5);
        assert_eq!(h.kernel, "bump-w1");
        assert_eq!(h.beta, 0.5);
    }

    #[test]
    fn rejects_truncated_files() {
        let g = Grid::new(1, 4.0, 32).unwrap();
        let f = InitialData::DeltaBump.build(&g).unwrap();
        let text = write_snapshot(&f, 1.0, "dirac");
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_snapshot(&cut).is_err());
        assert!(read_snapshot("0.1\n0.2\n").is_err());
    }
}
