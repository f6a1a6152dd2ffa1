//! Uniformly sampled vector-valued functions of one real variable.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Samples `values[k] ∈ ℂ^dim` at `t_k = t0 + k·h`, `k = 0..m`.
///
/// Integrals use the rectangle rule `h · Σ_k values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    t0: f64,
    h: f64,
    m: usize,
    dim: usize,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn zeros(t0: f64, h: f64, m: usize, dim: usize) -> Result<Self> {
        Self::from_values(t0, h, dim, vec![C64::new(0.0, 0.0); m * dim])
    }

    /// Wraps row-major samples (`values.len() = m · dim`).
    pub fn from_values(t0: f64, h: f64, dim: usize, values: Vec<C64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || !t0.is_finite() {
            return Err(invalid(format!(
                "grid needs finite t0 and positive step, got t0={t0}, h={h}"
            )));
        }
        if dim == 0 {
            return Err(invalid("grid function dimension must be positive"));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "sample count {} is not a positive multiple of dimension {dim}",
                values.len()
            )));
        }
        Ok(GridFunction {
            t0,
            h,
            m: values.len() / dim,
            dim,
            values,
        })
    }

    /// Samples `f(t_k)` for each node.
    pub fn from_fn(t0: f64, h: f64, m: usize, dim: usize, mut f: impl FnMut(f64) -> Vec<C64>) -> Result<Self> {
        let mut values = Vec::with_capacity(m * dim);
        for k in 0..m {
            let row = f(t0 + k as f64 * h);
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend(row);
        }
        Self::from_values(t0, h, dim, values)
    }

    /// Grid `[-half_width, half_width]` with `round(2 half_width / h) + 1` nodes.
    pub fn symmetric(half_width: f64, h: f64, dim: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(invalid("half-width must be positive"));
        }
        let half = (half_width / h).round() as usize;
        Self::zeros(-(half as f64) * h, h, 2 * half + 1, dim)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    /// Same grid, new samples.
    pub fn with_values(&self, values: Vec<C64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { values, ..self.clone() })
    }

    /// Rectangle-rule integral `h · Σ_k values[k]`.
    pub fn integral(&self) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); self.dim];
        for k in 0..self.m {
            for (a, v) in acc.iter_mut().zip(self.row(k)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a * self.h).collect()
    }

    pub fn scale(&self, c: C64) -> Self {
        GridFunction {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Largest sample modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// CSV with a metadata comment, a header `<axis>,re_0,im_0,...` and one
    /// row per node. Floats use the shortest round-trip representation.
    pub fn to_csv(&self, axis: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# t0={:e},h={:e},m={},dim={}", self.t0, self.h, self.m, self.dim);
        out.push_str(axis);
        for c in 0..self.dim {
            let _ = write!(out, ",re_{c},im_{c}");
        }
        out.push('\n');
        for k in 0..self.m {
            let _ = write!(out, "{:e}", self.t(k));
            for v in self.row(k) {
                let _ = write!(out, ",{:e},{:e}", v.re, v.im);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`GridFunction::to_csv`]. The axis column must
    /// agree with the metadata grid to `1e-9` relative.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| invalid("missing metadata line"))?;
        let mut t0 = None;
        let mut h = None;
        let mut m = None;
        let mut dim = None;
        for field in meta.split(',') {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| invalid(format!("malformed metadata field {field:?}")))?;
            match key.trim() {
                "t0" => t0 = Some(parse_f64(val)?),
                "h" => h = Some(parse_f64(val)?),
                "m" => m = Some(parse_usize(val)?),
                "dim" => dim = Some(parse_usize(val)?),
                other => return Err(invalid(format!("unknown metadata key {other:?}"))),
            }
        }
        let (t0, h, m, dim) = match (t0, h, m, dim) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(invalid("metadata must define t0, h, m and dim")),
        };
        if dim == 0 || m == 0 {
            return Err(invalid("m and dim must be positive"));
        }
        let header = lines.next().ok_or_else(|| invalid("missing header"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() != 1 + 2 * dim || cols[0].is_empty() {
            return Err(invalid(format!(
                "header has {} columns, expected {}",
                cols.len(),
                1 + 2 * dim
            )));
        }
        for c in 0..dim {
            if cols[1 + 2 * c] != format!("re_{c}") || cols[2 + 2 * c] != format!("im_{c}") {
                return Err(invalid(format!("unexpected header column near coordinate {c}")));
            }
        }
        let values_cap = m.checked_mul(dim).ok_or_else(|| invalid("grid too large"))?;
        let mut values = Vec::with_capacity(values_cap.min(1 << 20));
        let mut rows = 0usize;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            if rows == m {
                return Err(invalid("more rows than declared"));
            }
            let mut fields = line.split(',');
            let t = parse_f64(fields.next().unwrap_or(""))?;
            let expected = t0 + rows as f64 * h;
            if (t - expected).abs() > 1e-9 * (expected.abs() + h) {
                return Err(invalid(format!("row {rows}: axis value {t} off the declared grid")));
            }
            for _ in 0..dim {
                let re = parse_f64(
                    fields
                        .next()
                        .ok_or_else(|| invalid(format!("row {rows}: too few columns")))?,
                )?;
                let im = parse_f64(
                    fields
                        .next()
                        .ok_or_else(|| invalid(format!("row {rows}: too few columns")))?,
                )?;
                values.push(C64::new(re, im));
            }
            if fields.next().is_some() {
                return Err(invalid(format!("row {rows}: too many columns")));
            }
            rows += 1;
        }
        if rows != m {
            return Err(invalid(format!("declared {m} rows, found {rows}")));
        }
        Self::from_values(t0, h, dim, values)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| invalid(format!("not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("non-finite value {s:?}")))
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| invalid(format!("not a count: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_is_rectangle_rule() {
        let g = GridFunction::from_fn(-1.0, 0.5, 5, 2, |t| vec![C64::new(1.0, 0.0), C64::new(t, -t)]).unwrap();
        let i = g.integral();
        assert_eq!(i[0], C64::new(2.5, 0.0));
        assert_eq!(i[1], C64::new(0.0, 0.0));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = GridFunction::from_fn(-0.3, 0.1, 7, 2, |t| {
            vec![C64::new(t.sin(), t.cos()), C64::new(1.0 / 3.0, -t)]
        })
        .unwrap();
        let back = GridFunction::from_csv(&g.to_csv("t")).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let g = GridFunction::zeros(0.0, 1.0, 3, 1).unwrap();
        let good = g.to_csv("t");
        assert!(GridFunction::from_csv("").is_err());
        assert!(GridFunction::from_csv(&good.replace("m=3", "m=4")).is_err());
        assert!(GridFunction::from_csv(&good.replace("re_0", "re_1")).is_err());
        assert!(GridFunction::from_csv(&good.replace("\n2e0,", "\n2.5e0,")).is_err());
        assert!(GridFunction::from_csv(&good.replace("h=1e0", "h=-1e0")).is_err());
    }

    #[test]
    fn symmetric_grid_is_centered() {
        let g = GridFunction::symmetric(3.0, 0.5, 1).unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g.t(6), 0.0);
    }
}
