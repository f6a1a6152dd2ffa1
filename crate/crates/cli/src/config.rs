//! JSON experiment configs: typed accessors that report the dotted path of
//! the offending field on every validation failure.

use std::fmt;

use interplab::{BanachCouple, CMatrix, Exponent, InterpParams, WeightedLrSpace, C64};
use serde_json::{Map, Value};

/// A validation failure at `path`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

pub type CfgResult<T> = std::result::Result<T, ConfigError>;

/// Parses config text into a JSON value.
pub fn parse_text(text: &str) -> CfgResult<Value> {
    serde_json::from_str(text).map_err(|e| ConfigError {
        path: String::new(),
        message: format!("malformed JSON: {e}"),
    })
}

/// A value together with its location in the config.
#[derive(Debug, Clone, Copy)]
pub struct Node<'a> {
    value: &'a Value,
    path: &'a str,
}

/// An object node whose keys have been checked against an allow-list.
#[derive(Debug)]
pub struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Node<'a> {
    pub fn root(value: &'a Value) -> Self {
        Node { value, path: "" }
    }

    pub fn path(&self) -> &str {
        self.path
    }

    pub fn value(&self) -> &'a Value {
        self.value
    }

    pub fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.path.to_string(),
            message: message.into(),
        }
    }

    pub fn err<T>(&self, message: impl Into<String>) -> CfgResult<T> {
        Err(self.error(message))
    }

    pub fn object(&self, allowed: &[&str]) -> CfgResult<Obj<'a>> {
        let map = match self.value.as_object() {
            Some(m) => m,
            None => return self.err("expected an object"),
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError {
                    path: join(self.path, key),
                    message: format!("unknown field; expected one of {}", allowed.join(", ")),
                });
            }
        }
        Ok(Obj {
            map,
            path: self.path.to_string(),
        })
    }

    pub fn f64(&self) -> CfgResult<f64> {
        match self.value {
            Value::Number(n) => match n.as_f64() {
                Some(v) if v.is_finite() => Ok(v),
                _ => self.err("expected a finite number"),
            },
            _ => self.err("expected a number"),
        }
    }

    /// A number in the open interval `(lo, hi)`.
    pub fn f64_open(&self, lo: f64, hi: f64) -> CfgResult<f64> {
        let v = self.f64()?;
        if v > lo && v < hi {
            Ok(v)
        } else {
            self.err(format!("must lie in ({lo}, {hi}), got {v}"))
        }
    }

    pub fn positive(&self) -> CfgResult<f64> {
        self.f64_open(0.0, f64::INFINITY)
    }

    pub fn u64(&self) -> CfgResult<u64> {
        match self.value.as_u64() {
            Some(v) => Ok(v),
            None => self.err("expected a nonnegative integer"),
        }
    }

    pub fn i64(&self) -> CfgResult<i64> {
        match self.value.as_i64() {
            Some(v) => Ok(v),
            None => self.err("expected an integer"),
        }
    }

    /// An integer in `[lo, hi]`.
    pub fn usize_in(&self, lo: usize, hi: usize) -> CfgResult<usize> {
        let v = self.u64()?;
        if v >= lo as u64 && v <= hi as u64 {
            Ok(v as usize)
        } else {
            self.err(format!("must be an integer in [{lo}, {hi}], got {v}"))
        }
    }

    pub fn bool(&self) -> CfgResult<bool> {
        match self.value.as_bool() {
            Some(v) => Ok(v),
            None => self.err("expected true or false"),
        }
    }

    pub fn str(&self) -> CfgResult<&'a str> {
        match self.value.as_str() {
            Some(v) => Ok(v),
            None => self.err("expected a string"),
        }
    }

    /// `r ≥ 1` as a number, or the string `"inf"`.
    pub fn exponent(&self) -> CfgResult<Exponent> {
        let r = match self.value {
            Value::String(s) if s == "inf" => f64::INFINITY,
            Value::Number(_) => self.f64()?,
            _ => return self.err("expected a number >= 1 or \"inf\""),
        };
        match Exponent::new(r) {
            Ok(e) => Ok(e),
            Err(_) => self.err(format!("exponent must be >= 1 or \"inf\", got {r}")),
        }
    }

    /// Elements of an array, with at least `min` entries.
    pub fn array(&self, min: usize) -> CfgResult<Vec<Child<'a>>> {
        let items = match self.value.as_array() {
            Some(a) => a,
            None => return self.err("expected an array"),
        };
        if items.len() < min {
            return self.err(format!("expected at least {min} entries, got {}", items.len()));
        }
        Ok(items
            .iter()
            .enumerate()
            .map(|(i, v)| Child {
                value: v,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    pub fn f64_list(&self, min: usize) -> CfgResult<Vec<f64>> {
        self.array(min)?.iter().map(|c| c.node().f64()).collect()
    }

    pub fn positive_list(&self, min: usize) -> CfgResult<Vec<f64>> {
        self.array(min)?.iter().map(|c| c.node().positive()).collect()
    }

    /// A number or a `[re, im]` pair.
    pub fn complex(&self) -> CfgResult<C64> {
        match self.value {
            Value::Number(_) => Ok(C64::new(self.f64()?, 0.0)),
            Value::Array(a) if a.len() == 2 => {
                let parts = self.array(2)?;
                Ok(C64::new(parts[0].node().f64()?, parts[1].node().f64()?))
            }
            _ => self.err("expected a number or a [re, im] pair"),
        }
    }

    pub fn vector(&self, dim: Option<usize>) -> CfgResult<Vec<C64>> {
        let v: Vec<C64> = self
            .array(1)?
            .iter()
            .map(|c| c.node().complex())
            .collect::<CfgResult<_>>()?;
        if let Some(d) = dim {
            if v.len() != d {
                return self.err(format!(
                    "expected {d} entries to match the space dimension, got {}",
                    v.len()
                ));
            }
        }
        Ok(v)
    }

    /// A square matrix given as rows.
    pub fn matrix(&self) -> CfgResult<CMatrix> {
        let rows = self.array(1)?;
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in &rows {
            let row = r.node().vector(Some(n))?;
            data.extend(row);
        }
        Ok(CMatrix::from_row_slice(n, n, &data))
    }

    /// `{"exponent": r, "weights": [...]}`.
    pub fn space(&self) -> CfgResult<WeightedLrSpace> {
        let o = self.object(&["exponent", "weights"])?;
        let r = o.req("exponent")?.node().exponent()?;
        let w = o.req("weights")?.node().positive_list(1)?;
        WeightedLrSpace::new(r, w).or_else(|e| self.err(e.to_string()))
    }

    /// `{"x0": space, "x1": space}`.
    pub fn couple(&self) -> CfgResult<BanachCouple> {
        let o = self.object(&["x0", "x1"])?;
        let x0 = o.req("x0")?.node().space()?;
        let x1c = o.req("x1")?;
        let x1 = x1c.node().space()?;
        if x0.dim() != x1.dim() {
            return x1c
                .node()
                .err(format!("dimension {} differs from x0 dimension {}", x1.dim(), x0.dim()));
        }
        BanachCouple::new(x0, x1).or_else(|e| self.err(e.to_string()))
    }

    /// `{"theta", "p0", "p1", "q0"?, "q1"?}`; `q_j` default to `p_j`.
    pub fn params(&self) -> CfgResult<InterpParams> {
        let o = self.object(&["theta", "p0", "p1", "q0", "q1"])?;
        let theta = o.req("theta")?.node().f64_open(0.0, 1.0)?;
        let p0 = o.req("p0")?.node().exponent()?;
        let p1 = o.req("p1")?.node().exponent()?;
        let q0 = o.opt("q0").map(|c| c.node().exponent()).transpose()?.unwrap_or(p0);
        let q1 = o.opt("q1").map(|c| c.node().exponent()).transpose()?.unwrap_or(p1);
        InterpParams::with_target(theta, p0, p1, q0, q1).or_else(|e| self.err(e.to_string()))
    }
}

/// An owned path paired with a borrowed value.
#[derive(Debug, Clone)]
pub struct Child<'a> {
    value: &'a Value,
    path: String,
}

impl Child<'_> {
    pub fn node(&self) -> Node<'_> {
        Node {
            value: self.value,
            path: &self.path,
        }
    }
}

impl<'a> Obj<'a> {
    pub fn opt(&self, key: &str) -> Option<Child<'a>> {
        self.map.get(key).map(|v| Child {
            value: v,
            path: join(&self.path, key),
        })
    }

    pub fn req(&self, key: &str) -> CfgResult<Child<'a>> {
        self.opt(key).ok_or_else(|| ConfigError {
            path: join(&self.path, key),
            message: "missing required field".into(),
        })
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn path(&self) -> &str {
        &self.path
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}
