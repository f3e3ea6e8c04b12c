//! Plain-text matrix format:
//!
//! ```text
//! # polytope dim=2 facets=4 vertices=4
//! a_1 ... a_n d        (one line per facet)
//! vertices
//! w_1 ... w_n          (one line per vertex)
//! ```
//!
//! Numbers use the shortest representation that parses back to the same `f64`.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};

use super::Polytope;
use crate::error::{Error, Result};

impl Polytope {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# polytope dim={} facets={} vertices={}\n",
            self.dim(),
            self.facet_count(),
            self.vertex_count()
        );
        for r in 0..self.facet_count() {
            let row: Vec<f64> = self.normals().row(r).iter().copied().chain([self.offsets()[r]]).collect();
            write_row(&mut out, &row);
        }
        out.push_str("vertices\n");
        for v in self.vertices() {
            write_row(&mut out, v.as_slice());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut facets: Vec<Vec<f64>> = Vec::new();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let mut in_vertices = false;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "vertices" {
                in_vertices = true;
                continue;
            }
            let row = parse_row(line).map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
            let expected = if in_vertices {
                vertices.first().map(Vec::len).or(facets.first().map(|f| f.len() - 1))
            } else {
                facets.first().map(Vec::len)
            };
            if let Some(len) = expected {
                if row.len() != len {
                    return Err(Error::Parse(format!("line {}: expected {len} numbers, found {}", k + 1, row.len())));
                }
            }
            if in_vertices { vertices.push(row) } else { facets.push(row) }
        }
        let Some(width) = facets.first().map(Vec::len) else {
            return Err(Error::Parse("no facet lines".into()));
        };
        if width < 2 {
            return Err(Error::Parse("facet lines need a normal and an offset".into()));
        }
        let n = width - 1;
        let normals = DMatrix::from_fn(facets.len(), n, |r, c| facets[r][c]);
        let offsets = DVector::from_iterator(facets.len(), facets.iter().map(|f| f[n]));
        let vertices = vertices.into_iter().map(DVector::from_vec).collect();
        Polytope::from_parts(normals, offsets, vertices)
    }
}

pub(crate) fn write_row(out: &mut String, row: &[f64]) {
    for (k, v) in row.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

/// Writes `# name rows x cols` followed by the rows.
pub(crate) fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "# {name} {}x{}", m.nrows(), m.ncols()).unwrap();
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        write_row(out, &row);
    }
}

fn parse_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split_whitespace()
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| format!("'{t}' is not a number"))?;
            if v.is_finite() { Ok(v) } else { Err(format!("'{t}' is not finite")) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Ellipsoid;
    use crate::polytope::{cross_polytope_seed, inscribe_regular, Spacing};

    #[test]
    fn round_trip_is_exact() {
        let e = Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap();
        for v in [3, 4, 12] {
            let p = inscribe_regular(&e, v, 0.7, Spacing::ParameterAngle).unwrap();
            let back = Polytope::from_text(&p.to_text()).unwrap();
            assert_eq!(back, p);
        }
        let e3 = Ellipsoid::new(DVector::from_vec(vec![0.0, 0.0, 1.0]), DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let p = cross_polytope_seed(&e3).unwrap();
        let back = Polytope::from_text(&p.to_text()).unwrap();
        assert_eq!(back.normals(), p.normals());
        assert_eq!(back.offsets(), p.offsets());
        assert_eq!(back.vertices(), p.vertices());
    }

    #[test]
    fn golden_square() {
        let e = Ellipsoid::ellipse(1.0, 1.0, 0.0, 0.0).unwrap();
        let p = inscribe_regular(&e, 4, 0.0, Spacing::ParameterAngle).unwrap();
        let text = p.to_text();
        assert!(text.starts_with("# polytope dim=2 facets=4 vertices=4\n"));
        assert_eq!(text.lines().count(), 1 + 4 + 1 + 4);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = Polytope::from_text("1 0 1\n0 1 x\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = Polytope::from_text("1 0 1\n0 1\n").unwrap_err().to_string();
        assert!(err.contains("expected 3"), "{err}");
        assert!(Polytope::from_text("# nothing\n").is_err());
    }
}
