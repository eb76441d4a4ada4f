//! Text serialization shared by the library and the CLI: CSV with `.` decimal
//! separator, LF line endings and 17 significant digits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridDomain, MapState};
use crate::geometry::Chart;

/// Round-trippable scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `i,j,phi_1..phi_n`, one row per node in node order.
pub fn map_csv(map: &MapState) -> String {
    let n = map.chart.dim();
    let mut out = String::from("i,j");
    for a in 1..=n {
        out.push_str(&format!(",phi_{a}"));
    }
    out.push('\n');
    for i in 0..map.domain.nx {
        for j in 0..map.domain.ny {
            out.push_str(&format!("{i},{j}"));
            for v in map.node(map.domain.index(i, j)) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn map_from_csv(text: &str, domain: GridDomain, chart: Chart) -> Result<MapState> {
    let n = chart.dim();
    let mut values = vec![f64::NAN; domain.nodes() * n];
    let mut lines = text.lines();
    lines
        .next()
        .ok_or_else(|| Error::Validation("empty map CSV".into()))?;
    let mut seen = 0;
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 2 {
            return Err(Error::Validation(format!(
                "row {}: expected {} fields",
                row + 1,
                n + 2
            )));
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Validation(format!("row {}: {e}", row + 1)))
        };
        let (i, j) = (parse_idx(fields[0])?, parse_idx(fields[1])?);
        if i >= domain.nx || j >= domain.ny {
            return Err(Error::Validation(format!(
                "row {}: node ({i},{j}) outside grid",
                row + 1
            )));
        }
        let k = domain.index(i, j);
        for a in 0..n {
            values[k * n + a] = fields[a + 2]
                .parse()
                .map_err(|e| Error::Validation(format!("row {}: {e}", row + 1)))?;
        }
        seen += 1;
    }
    if seen != domain.nodes() {
        return Err(Error::Validation(format!(
            "expected {} rows, found {seen}",
            domain.nodes()
        )));
    }
    MapState::new(domain, chart, values)
}

/// JSON form of a map: grid metadata plus node-major flattened values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapJson {
    pub chart: String,
    pub dim: usize,
    pub domain: GridDomain,
    pub values: Vec<f64>,
}

impl MapJson {
    pub fn from_map(map: &MapState) -> Self {
        Self {
            chart: map.chart.name().to_string(),
            dim: map.chart.dim(),
            domain: map.domain,
            values: map.values.clone(),
        }
    }

    pub fn into_map(self) -> Result<MapState> {
        let chart = Chart::by_name(&self.chart, self.dim)
            .ok_or_else(|| Error::Validation(format!("unknown chart `{}`", self.chart)))?;
        MapState::new(self.domain, chart, self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let domain = GridDomain::new(4, 5, 1.0, 2.0).unwrap();
        let map = MapState::from_fn(domain, Chart::sphere2(), |x, y| {
            vec![1.0 + 0.1 * x, y / 3.0]
        })
        .unwrap();
        let back = map_from_csv(&map_csv(&map), domain, Chart::sphere2()).unwrap();
        assert_eq!(back.values, map.values);
        let json = serde_json::to_string(&MapJson::from_map(&map)).unwrap();
        let back: MapJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_map().unwrap().values, map.values);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let domain = GridDomain::new(4, 4, 1.0, 1.0).unwrap();
        assert!(map_from_csv("i,j,phi_1\n0,0,1\n", domain, Chart::flat(1)).is_err());
        assert!(map_from_csv("i,j,phi_1\n0,0\n", domain, Chart::flat(1)).is_err());
    }
}
