//! Subcommand drivers: each parses its section of the config, runs the
//! computation and returns results, named assertions and CSV tables.

use std::f64::consts::PI;

use interplab::interp::k_curve;
use interplab::kfunc::k_functional_oracle;
use interplab::strip::{grid_lp_norm, BOUNDARY_MASS_TOL, ENERGETIC_DELTA};
use interplab::{
    boundary_fourier, complex_norm_upper, interp_sectoriality_check, k_functional, minimize_mean_norm,
    multiplier_norm_bounds, operator_norm_lower, r_bound_lower, rademacher_average, real_interp_norm, resolvent_sup,
    scalar_interp_norm, sectoriality_angle, semigroup_scan, stein_check, translation_identity_check,
    vertical_invariance_check, weighted_equivalence_check, AscentOptions, BanachCouple, BoundaryMode, CMatrix,
    DirectWindow, Exponent, GridFunction, InterpParams, KOptions, MeanGrid, MeanOptions, MultiplierOptions,
    NormSampler, OperatorFamily, QuadOptions, SectorSpec, SectorialityCheckOptions, SemigroupSpec, SteinOptions,
    StripFunction, WeightedLrSpace, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{CfgResult, ConfigError, Node, Obj};
use crate::emit::{num, nums, Cell, Table};

/// The subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kfunc,
    InterpNorm,
    MeanMin,
    ComplexCheck,
    SteinCheck,
    WeightedDemo,
    SectorScan,
    SemigroupScan,
    Rademacher,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Kfunc,
        Command::InterpNorm,
        Command::MeanMin,
        Command::ComplexCheck,
        Command::SteinCheck,
        Command::WeightedDemo,
        Command::SectorScan,
        Command::SemigroupScan,
        Command::Rademacher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Kfunc => "kfunc",
            Command::InterpNorm => "interp-norm",
            Command::MeanMin => "mean-min",
            Command::ComplexCheck => "complex-check",
            Command::SteinCheck => "stein-check",
            Command::WeightedDemo => "weighted-demo",
            Command::SectorScan => "sector-scan",
            Command::SemigroupScan => "semigroup-scan",
            Command::Rademacher => "rademacher",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Top-level config keys accepted besides `command`, `seed` and `expect`.
    fn fields(self) -> &'static [&'static str] {
        match self {
            Command::Kfunc => &["couple", "x", "t_grid", "solver", "oracle"],
            Command::InterpNorm => &["couple", "params", "x", "quad"],
            Command::MeanMin => &["couple", "params", "x", "grid", "mean"],
            Command::ComplexCheck => &["couple", "params", "x", "grid", "mean", "vertical", "suite"],
            Command::SteinCheck => &[
                "family",
                "couple",
                "target_couple",
                "params",
                "samples",
                "constant",
                "multiplier",
                "ascent",
                "identity_grid",
            ],
            Command::WeightedDemo => &["params", "w0", "w1", "samples", "band", "quad", "translation"],
            Command::SectorScan => &["a", "space", "sigmas", "spec", "angle", "interp"],
            Command::SemigroupScan => &["a", "couple", "p0", "p1", "thetas", "spec", "ascent"],
            Command::Rademacher => &["space", "vectors", "scale", "operators", "sampler"],
        }
    }

    /// Whether the run draws random numbers and so needs a seed.
    fn samples(self, obj: &Obj) -> bool {
        match self {
            Command::Kfunc | Command::InterpNorm | Command::MeanMin => false,
            Command::ComplexCheck => obj.has("suite"),
            Command::SectorScan => obj.has("interp"),
            Command::Rademacher => obj.has("operators"),
            _ => true,
        }
    }
}

/// A named check with the measured quantity and the limit it is held to.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Assertion {
    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Assertion {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"name": self.name, "passed": self.passed, "value": num(self.value), "limit": num(self.limit)})
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub results: Value,
    pub constants: Value,
    pub assertions: Vec<Assertion>,
    /// `(file-name suffix, contents)`; an empty suffix is the main table.
    pub tables: Vec<(String, String)>,
}

/// Failure modes of a run.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(interplab::Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<interplab::Error> for RunError {
    fn from(e: interplab::Error) -> Self {
        RunError::Compute(e)
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// Validates `config` for `cmd` and runs it.
pub fn execute(cmd: Command, config: &Value) -> RunResult<Outcome> {
    let root = Node::root(config);
    let mut allowed = vec!["command", "seed", "expect"];
    allowed.extend_from_slice(cmd.fields());
    let obj = root.object(&allowed)?;
    if let Some(c) = obj.opt("command") {
        let name = c.node().str()?;
        if name != cmd.name() {
            return Err(c
                .node()
                .error(format!("config is for {name:?} but the subcommand is {:?}", cmd.name()))
                .into());
        }
    }
    let seed = match obj.opt("seed") {
        Some(s) => Some(s.node().u64()?),
        None => None,
    };
    let seed = match (seed, cmd.samples(&obj)) {
        (Some(s), _) => s,
        (None, false) => 0,
        (None, true) => {
            return Err(ConfigError {
                path: "seed".into(),
                message: "required for sampling commands; set it in the config or pass --seed".into(),
            }
            .into())
        }
    };
    let mut out = match cmd {
        Command::Kfunc => kfunc(&obj)?,
        Command::InterpNorm => interp_norm(&obj)?,
        Command::MeanMin => mean_min(&obj)?,
        Command::ComplexCheck => complex_check(&obj, seed)?,
        Command::SteinCheck => stein(&obj, seed)?,
        Command::WeightedDemo => weighted_demo(&obj, seed)?,
        Command::SectorScan => sector_scan(&obj, seed)?,
        Command::SemigroupScan => semigroup(&obj, seed)?,
        Command::Rademacher => rademacher(&obj, seed)?,
    };
    if let Some(e) = obj.opt("expect") {
        let mut extra = expectations(&e.node(), &out.results)?;
        out.assertions.append(&mut extra);
    }
    Ok(out)
}

/// `"expect": {"<result key>": {"value": v, "tol": t}}` compares a scalar
/// result with `v` to absolute tolerance `t`.
fn expectations(node: &Node, results: &Value) -> CfgResult<Vec<Assertion>> {
    let map = match node.value().as_object() {
        Some(m) => m,
        None => return node.err("expected an object of {\"value\", \"tol\"} entries"),
    };
    let obj = node.object(&map.keys().map(String::as_str).collect::<Vec<_>>())?;
    let mut out = Vec::new();
    for key in map.keys() {
        let child = obj.req(key)?;
        let spec = child.node().object(&["value", "tol"])?;
        let want = spec.req("value")?.node().f64()?;
        let tol = spec.req("tol")?.node().f64()?;
        if tol < 0.0 {
            return spec.req("tol")?.node().err("must be nonnegative");
        }
        let got = match results.get(key).and_then(Value::as_f64) {
            Some(v) => v,
            None => return child.node().err("not a scalar result of this subcommand"),
        };
        out.push(Assertion::at_most(&format!("expect.{key}"), (got - want).abs(), tol));
    }
    Ok(out)
}

fn log_grid(node: &Node, default: (f64, f64, usize)) -> CfgResult<Vec<f64>> {
    let (lo, hi, n) = if node.value().is_null() {
        default
    } else {
        let o = node.object(&["min", "max", "points"])?;
        let lo = o
            .opt("min")
            .map(|c| c.node().positive())
            .transpose()?
            .unwrap_or(default.0);
        let hi = o
            .opt("max")
            .map(|c| c.node().positive())
            .transpose()?
            .unwrap_or(default.1);
        let n = o
            .opt("points")
            .map(|c| c.node().usize_in(1, 100_000))
            .transpose()?
            .unwrap_or(default.2);
        if hi < lo {
            return node.err("max must not be below min");
        }
        (lo, hi, n)
    };
    Ok(log_space(lo, hi, n))
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn opt_node<'a>(obj: &'a Obj, key: &str) -> Option<crate::config::Child<'a>> {
    obj.opt(key)
}

fn k_options(obj: &Obj, key: &str) -> CfgResult<KOptions> {
    let mut k = KOptions::default();
    if let Some(c) = opt_node(obj, key) {
        let o = c.node().object(&["tol", "max_iters"])?;
        if let Some(t) = o.opt("tol") {
            k.tol = t.node().f64_open(0.0, 1.0)?;
        }
        if let Some(m) = o.opt("max_iters") {
            k.max_iters = m.node().usize_in(1, 10_000_000)?;
        }
    }
    Ok(k)
}

fn quad_options(obj: &Obj, key: &str, base: QuadOptions) -> CfgResult<QuadOptions> {
    let mut q = base;
    if let Some(c) = opt_node(obj, key) {
        let o = c.node().object(&["u_max", "du", "tail_tol", "tol", "max_iters"])?;
        if let Some(v) = o.opt("u_max") {
            q.u_max = Some(v.node().positive()?);
        }
        if let Some(v) = o.opt("du") {
            q.du = v.node().f64_open(0.0, 10.0)?;
        }
        if let Some(v) = o.opt("tail_tol") {
            q.tail_tol = v.node().f64_open(0.0, 1.0)?;
        }
        if let Some(v) = o.opt("tol") {
            q.k.tol = v.node().f64_open(0.0, 1.0)?;
        }
        if let Some(v) = o.opt("max_iters") {
            q.k.max_iters = v.node().usize_in(1, 10_000_000)?;
        }
    }
    Ok(q)
}

fn mean_grid(obj: &Obj, key: &str, theta: f64) -> CfgResult<MeanGrid> {
    let mut g = MeanGrid::default_for(theta);
    if let Some(c) = opt_node(obj, key) {
        let o = c.node().object(&["half_width", "h"])?;
        if let Some(v) = o.opt("half_width") {
            g.half_width = v.node().positive()?;
        }
        if let Some(v) = o.opt("h") {
            g.h = v.node().positive()?;
        }
        if g.half_width / g.h > 1e6 {
            return c.node().err("grid has more than 2e6 nodes");
        }
    }
    Ok(g)
}

fn mean_options(obj: &Obj, key: &str, base: MeanOptions) -> CfgResult<MeanOptions> {
    let mut m = base;
    if let Some(c) = opt_node(obj, key) {
        let o = c.node().object(&["max_iters", "smooth_iters"])?;
        if let Some(v) = o.opt("max_iters") {
            m.max_iters = v.node().usize_in(0, 10_000_000)?;
        }
        if let Some(v) = o.opt("smooth_iters") {
            m.smooth_iters = v.node().usize_in(0, 10_000_000)?;
        }
    }
    Ok(m)
}

fn multiplier_options(obj: &Obj, key: &str, base: MultiplierOptions, seed: u64) -> CfgResult<MultiplierOptions> {
    let mut m = base;
    m.seed = seed;
    if let Some(c) = opt_node(obj, key) {
        let o = c.node().object(&["half_width", "m", "samples", "tail_tol"])?;
        if let Some(v) = o.opt("half_width") {
            m.half_width = v.node().positive()?;
        }
        if let Some(v) = o.opt("m") {
            m.m = v.node().usize_in(8, 1 << 20)?;
        }
        if let Some(v) = o.opt("samples") {
            m.samples = v.node().usize_in(0, 100_000)?;
        }
        if let Some(v) = o.opt("tail_tol") {
            m.tail_tol = v.node().f64_open(0.0, 1.0)?;
        }
    }
    Ok(m)
}

fn ascent_options(obj: &Obj, key: &str, base: AscentOptions, seed: u64) -> CfgResult<AscentOptions> {
    let mut a = base;
    a.seed = seed;
    if let Some(c) = opt_node(obj, key) {
        let o = c.node().object(&["starts", "sweeps", "du"])?;
        if let Some(v) = o.opt("starts") {
            a.starts = v.node().usize_in(0, 100_000)?;
        }
        if let Some(v) = o.opt("sweeps") {
            a.sweeps = v.node().usize_in(0, 1000)?;
        }
        if let Some(v) = o.opt("du") {
            a.quad.du = v.node().f64_open(0.0, 10.0)?;
        }
    }
    Ok(a)
}

fn sector_spec(obj: &Obj, key: &str) -> CfgResult<SectorSpec> {
    let mut s = SectorSpec::default();
    if let Some(c) = opt_node(obj, key) {
        let o = c
            .node()
            .object(&["r_min", "r_max", "per_decade", "extra_rays", "cap"])?;
        if let Some(v) = o.opt("r_min") {
            s.r_min = v.node().positive()?;
        }
        if let Some(v) = o.opt("r_max") {
            s.r_max = v.node().positive()?;
        }
        if let Some(v) = o.opt("per_decade") {
            s.per_decade = v.node().usize_in(1, 10_000)?;
        }
        if let Some(v) = o.opt("extra_rays") {
            s.extra_rays = v.node().usize_in(0, 1000)?;
        }
        if let Some(v) = o.opt("cap") {
            s.cap = v.node().f64_open(1.0, f64::INFINITY)?;
        }
        if s.r_max <= s.r_min {
            return c.node().err("r_max must exceed r_min");
        }
    }
    Ok(s)
}

fn vector_for(obj: &Obj, key: &str, dim: usize) -> CfgResult<Vec<C64>> {
    obj.req(key)?.node().vector(Some(dim))
}

fn couple_at(obj: &Obj, key: &str) -> CfgResult<BanachCouple> {
    obj.req(key)?.node().couple()
}

fn params_at(obj: &Obj, key: &str) -> CfgResult<InterpParams> {
    obj.req(key)?.node().params()
}

fn vec_json(x: &[C64]) -> Value {
    Value::Array(x.iter().map(|v| json!([num(v.re), num(v.im)])).collect())
}

fn kfunc(obj: &Obj) -> RunResult<Outcome> {
    let couple = couple_at(obj, "couple")?;
    let x = vector_for(obj, "x", couple.dim())?;
    let ts = match obj.opt("t_grid") {
        Some(c) => log_grid(&c.node(), (1e-3, 1e3, 61))?,
        None => log_space(1e-3, 1e3, 61),
    };
    let kopts = k_options(obj, "solver")?;
    let decs: Vec<_> = ts
        .par_iter()
        .map(|t| k_functional(&couple, &x, *t, &kopts))
        .collect::<interplab::Result<_>>()?;
    let at_one = k_functional(&couple, &x, 1.0, &kopts)?;
    let n0 = couple.x0().norm(&x)?;
    let n1 = couple.x1().norm(&x)?;
    let scale = n0.max(n1).max(f64::MIN_POSITIVE);
    let tol = 10.0 * kopts.tol * scale;
    let mut table = Table::new(&["t", "k", "lower_bound", "x0_part_norm", "x1_part_norm"]);
    let mut max_gap: f64 = 0.0;
    for d in &decs {
        table.push(vec![
            Cell::F(d.t),
            Cell::F(d.value),
            Cell::F(d.lower_bound),
            Cell::F(couple.x0().norm(&d.x0)?),
            Cell::F(couple.x1().norm(&d.x1)?),
        ]);
        max_gap = max_gap.max(d.gap());
    }
    let drop = decs.windows(2).map(|w| w[0].value - w[1].value).fold(0.0, f64::max);
    let concave = decs
        .windows(3)
        .map(|w| {
            let (a, b, c) = (&w[0], &w[1], &w[2]);
            let lin = a.value + (c.value - a.value) * (b.t - a.t) / (c.t - a.t);
            lin - b.value
        })
        .fold(0.0, f64::max);
    let majorant = decs.iter().map(|d| d.value - n0.min(d.t * n1)).fold(0.0, f64::max);
    let mut assertions = vec![
        Assertion::at_most("k_monotone", drop, tol),
        Assertion::at_most("k_concave", concave, tol),
        Assertion::at_most("k_majorant", majorant, tol),
    ];
    let mut results = json!({
        "dim": couple.dim(),
        "x": vec_json(&x),
        "k_at_1": num(at_one.value),
        "x0_norm": num(n0),
        "x1_norm": num(n1),
        "sum_norm": num(couple.sum_norm(&x)?),
        "intersection_norm": num(couple.intersection_norm(&x)?),
        "points": ts.len(),
        "max_relative_gap": num(max_gap),
    });
    if let Some(c) = obj.opt("oracle") {
        let o = c.node().object(&["grid_density", "t"])?;
        let density = match o.opt("grid_density") {
            Some(v) => v.node().f64_open(0.0, 1.0)?,
            None => 1e-3,
        };
        let tps = match o.opt("t") {
            Some(v) => v.node().positive_list(1)?,
            None => vec![1.0],
        };
        let mut worst: f64 = 0.0;
        let mut rows = Vec::new();
        for t in tps {
            let oracle = k_functional_oracle(&couple, &x, t, density).map_err(|e| match e {
                interplab::Error::Unsupported(m) => RunError::Config(ConfigError {
                    path: c.node().path().to_string(),
                    message: m,
                }),
                e => RunError::Compute(e),
            })?;
            let k = k_functional(&couple, &x, t, &kopts)?.value;
            let rel = if oracle > 0.0 {
                (k - oracle).abs() / oracle
            } else {
                k.abs()
            };
            worst = worst.max(rel);
            rows.push(json!({"t": num(t), "k": num(k), "oracle": num(oracle)}));
        }
        results["oracle"] = Value::Array(rows);
        results["oracle_max_rel_error"] = num(worst);
        assertions.push(Assertion::at_most("oracle_agreement", worst, 1e-4));
    }
    Ok(Outcome {
        results,
        constants: json!({"k_tol": num(kopts.tol), "k_max_iters": kopts.max_iters, "invariant_tol": num(tol)}),
        assertions,
        tables: vec![(String::new(), table.to_csv())],
    })
}

fn interp_norm(obj: &Obj) -> RunResult<Outcome> {
    let couple = couple_at(obj, "couple")?;
    let params = params_at(obj, "params")?;
    let x = vector_for(obj, "x", couple.dim())?;
    let quad = quad_options(obj, "quad", QuadOptions::default())?;
    let res = real_interp_norm(&couple, &params, &x, &quad)?;
    let n0 = couple.x0().norm(&x)?;
    let n1 = couple.x1().norm(&x)?;
    let theta = params.theta;
    let geometric = n0.powf(1.0 - theta) * n1.powf(theta);
    let mut results = json!({
        "value": num(res.value),
        "quadrature": num(res.quadrature),
        "analytic": num(res.analytic),
        "tail_bound": num(res.tail_bound),
        "u_max": num(res.u_max),
        "nodes": res.nodes,
        "p": num(params.p().value()),
        "x0_norm": num(n0),
        "x1_norm": num(n1),
        "geometric_mean_bound": num(geometric),
    });
    let mut assertions = vec![Assertion::at_most(
        "tail_controlled",
        res.tail_bound,
        quad.tail_tol * res.value.max(f64::MIN_POSITIVE),
    )];
    if params.p().is_infinite() {
        assertions.push(Assertion::at_most(
            "pointwise_interpolation_inequality",
            res.value - geometric,
            1e-8 * geometric,
        ));
    }
    if couple.dim() == 1 {
        let (a, b) = (couple.x0().weights()[0], couple.x1().weights()[0]);
        let closed = x[0].norm() * scalar_interp_norm(a, b, theta, params.p());
        results["closed_form"] = num(closed);
        assertions.push(Assertion::at_most(
            "scalar_closed_form",
            (res.value - closed).abs(),
            1e-6 * closed,
        ));
    }
    let u_max = res.u_max;
    let ts: Vec<f64> = (0..=200)
        .map(|k| (-u_max + 2.0 * u_max * k as f64 / 200.0).exp())
        .collect();
    let ks = k_curve(&couple, &x, &ts, &quad.k.into())?;
    let mut table = Table::new(&["t", "k", "weighted"]);
    for (t, k) in ts.iter().zip(&ks) {
        table.push(vec![Cell::F(*t), Cell::F(*k), Cell::F(t.powf(-theta) * k)]);
    }
    Ok(Outcome {
        results,
        constants: json!({"du": num(quad.du), "tail_tol": num(quad.tail_tol), "k_tol": num(quad.k.tol)}),
        assertions,
        tables: vec![(String::new(), table.to_csv())],
    })
}

fn mean_min(obj: &Obj) -> RunResult<Outcome> {
    let couple = couple_at(obj, "couple")?;
    let params = params_at(obj, "params")?;
    let x = vector_for(obj, "x", couple.dim())?;
    let grid = mean_grid(obj, "grid", params.theta)?;
    let opts = mean_options(obj, "mean", MeanOptions::default())?;
    let m = minimize_mean_norm(&couple, &params, &x, &grid, &opts)?;
    let xnorm = couple.sum_norm(&x)?;
    let results = json!({
        "value": num(m.value),
        "initial_value": num(m.initial_value),
        "iterations": m.iterations,
        "capped": m.capped,
        "residual": num(m.rep.residual),
        "nodes": m.rep.gf.len(),
        "complex_upper": num(2.0 * PI * m.value),
    });
    let assertions = vec![
        Assertion::at_most("objective_decrease", m.value, m.initial_value * (1.0 + 1e-12)),
        Assertion::at_most("feasibility", m.rep.residual, 1e-8 * xnorm),
    ];
    Ok(Outcome {
        results,
        constants: json!({
            "half_width": num(grid.half_width),
            "h": num(grid.h),
            "max_iters": opts.max_iters,
            "smooth_iters": opts.smooth_iters,
            "bin_width": num(opts.construct.bin_width),
        }),
        assertions,
        tables: vec![(String::new(), m.rep.gf.to_csv("t"))],
    })
}

/// Options for [`equivalence_band`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub couples: usize,
    pub max_dim: usize,
    pub exponents: Vec<Exponent>,
    pub weight_range: (f64, f64),
    pub thetas: Vec<f64>,
    pub ps: Vec<Exponent>,
    /// Largest allowed `max/min` of the ratio per `θ`.
    pub band: f64,
    /// Factor applied to `x` for the scale-invariance check.
    pub scale: f64,
    /// Grid step of the mean grid; the half width follows `θ`.
    pub h: f64,
    pub mean: MeanOptions,
    pub seed: u64,
}

impl Default for BandSpec {
    fn default() -> Self {
        BandSpec {
            couples: 50,
            max_dim: 4,
            exponents: vec![Exponent::ONE, Exponent::TWO, Exponent::INFINITY],
            weight_range: (0.1, 10.0),
            thetas: vec![0.25, 0.5, 0.75],
            ps: vec![Exponent::ONE, Exponent::TWO, Exponent::INFINITY],
            band: 25.0,
            scale: 3.7,
            h: 0.25,
            mean: MeanOptions {
                max_iters: 300,
                smooth_iters: 100,
                ..MeanOptions::default()
            },
            seed: 0,
        }
    }
}

/// One `(couple, θ, p)` instance of [`equivalence_band`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub instance: usize,
    pub dim: usize,
    pub r0: Exponent,
    pub r1: Exponent,
    pub theta: f64,
    pub p: Exponent,
    pub real: f64,
    pub complex: f64,
    pub ratio: f64,
    /// `|ratio(λx) - ratio(x)| / ratio(x)`.
    pub scale_deviation: f64,
}

/// Per-`θ` summary of [`equivalence_band`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandSummary {
    pub theta: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread: f64,
}

/// Random couples with the ratio of the complex-formulation upper bound to
/// the real interpolation norm.
pub fn equivalence_band(spec: &BandSpec) -> interplab::Result<(Vec<BandRow>, Vec<BandSummary>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lw, hw) = (spec.weight_range.0.ln(), spec.weight_range.1.ln());
    let mut instances = Vec::new();
    for i in 0..spec.couples {
        let n = rng.random_range(1..=spec.max_dim);
        let r0 = spec.exponents[rng.random_range(0..spec.exponents.len())];
        let r1 = spec.exponents[rng.random_range(0..spec.exponents.len())];
        let w0: Vec<f64> = (0..n).map(|_| rng.random_range(lw..=hw).exp()).collect();
        let w1: Vec<f64> = (0..n).map(|_| rng.random_range(lw..=hw).exp()).collect();
        let x: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let couple = BanachCouple::new(WeightedLrSpace::new(r0, w0)?, WeightedLrSpace::new(r1, w1)?)?;
        for &theta in &spec.thetas {
            for &p in &spec.ps {
                instances.push((i, couple.clone(), x.clone(), theta, p, r0, r1));
            }
        }
    }
    let rows: Vec<BandRow> = instances
        .par_iter()
        .map(|(i, couple, x, theta, p, r0, r1)| {
            let params = InterpParams::new(*theta, *p, *p)?;
            let grid = MeanGrid {
                half_width: MeanGrid::default_for(*theta).half_width,
                h: spec.h,
            };
            let real = real_interp_norm(couple, &params, x, &QuadOptions::default())?.value;
            let complex = complex_norm_upper(couple, &params, x, &grid, &spec.mean)?.value;
            let xs: Vec<C64> = x.iter().map(|v| v * spec.scale).collect();
            let real_s = real_interp_norm(couple, &params, &xs, &QuadOptions::default())?.value;
            let complex_s = complex_norm_upper(couple, &params, &xs, &grid, &spec.mean)?.value;
            let ratio = complex / real;
            let ratio_s = complex_s / real_s;
            Ok(BandRow {
                instance: *i,
                dim: x.len(),
                r0: *r0,
                r1: *r1,
                theta: *theta,
                p: *p,
                real,
                complex,
                ratio,
                scale_deviation: (ratio_s - ratio).abs() / ratio,
            })
        })
        .collect::<interplab::Result<_>>()?;
    let summaries = spec
        .thetas
        .iter()
        .map(|&theta| {
            let rs: Vec<f64> = rows.iter().filter(|r| r.theta == theta).map(|r| r.ratio).collect();
            let min_ratio = rs.iter().copied().fold(f64::INFINITY, f64::min);
            let max_ratio = rs.iter().copied().fold(0.0, f64::max);
            BandSummary {
                theta,
                min_ratio,
                max_ratio,
                spread: max_ratio / min_ratio,
            }
        })
        .collect();
    Ok((rows, summaries))
}

fn exponent_list(node: &Node) -> CfgResult<Vec<Exponent>> {
    node.array(1)?.iter().map(|c| c.node().exponent()).collect()
}

fn band_spec(node: &Node, seed: u64) -> CfgResult<BandSpec> {
    let o = node.object(&[
        "couples",
        "max_dim",
        "exponents",
        "weight_range",
        "thetas",
        "ps",
        "band",
        "scale",
        "h",
        "mean",
    ])?;
    let mut s = BandSpec {
        seed,
        ..BandSpec::default()
    };
    if let Some(v) = o.opt("couples") {
        s.couples = v.node().usize_in(1, 100_000)?;
    }
    if let Some(v) = o.opt("max_dim") {
        s.max_dim = v.node().usize_in(1, 64)?;
    }
    if let Some(v) = o.opt("exponents") {
        s.exponents = exponent_list(&v.node())?;
    }
    if let Some(v) = o.opt("weight_range") {
        let w = v.node().positive_list(2)?;
        if w.len() != 2 || w[1] < w[0] {
            return v.node().err("expected [low, high] with 0 < low <= high");
        }
        s.weight_range = (w[0], w[1]);
    }
    if let Some(v) = o.opt("thetas") {
        s.thetas = v
            .node()
            .array(1)?
            .iter()
            .map(|c| c.node().f64_open(0.0, 1.0))
            .collect::<CfgResult<_>>()?;
    }
    if let Some(v) = o.opt("ps") {
        s.ps = exponent_list(&v.node())?;
    }
    if let Some(v) = o.opt("band") {
        s.band = v.node().f64_open(1.0, f64::INFINITY)?;
    }
    if let Some(v) = o.opt("scale") {
        s.scale = v.node().positive()?;
    }
    if let Some(v) = o.opt("h") {
        s.h = v.node().f64_open(0.0, 10.0)?;
    }
    s.mean = mean_options(&o, "mean", s.mean)?;
    Ok(s)
}

fn complex_check(obj: &Obj, seed: u64) -> RunResult<Outcome> {
    if let Some(s) = obj.opt("suite") {
        for key in ["couple", "params", "x", "grid", "mean", "vertical"] {
            if obj.has(key) {
                return Err(ConfigError {
                    path: key.into(),
                    message: "not allowed together with suite".into(),
                }
                .into());
            }
        }
        return complex_suite(&band_spec(&s.node(), seed)?);
    }
    let couple = couple_at(obj, "couple")?;
    let params = params_at(obj, "params")?;
    let x = vector_for(obj, "x", couple.dim())?;
    let grid = mean_grid(obj, "grid", params.theta)?;
    let opts = mean_options(obj, "mean", MeanOptions::default())?;
    let (s_values, vertical_tol) = match obj.opt("vertical") {
        Some(v) => {
            let o = v.node().object(&["s", "tol"])?;
            let s = match o.opt("s") {
                Some(s) => s
                    .node()
                    .array(2)?
                    .iter()
                    .map(|c| c.node().f64_open(0.0, 1.0))
                    .collect::<CfgResult<_>>()?,
                None => default_s_values(),
            };
            let tol = match o.opt("tol") {
                Some(t) => t.node().positive()?,
                None => VERTICAL_TOL,
            };
            (s, tol)
        }
        None => (default_s_values(), VERTICAL_TOL),
    };
    let cn = complex_norm_upper(&couple, &params, &x, &grid, &opts)?;
    let real = real_interp_norm(&couple, &params, &x, &QuadOptions::default())?.value;
    let sf = StripFunction::new(params.theta, cn.minimum.rep.gf.clone())?;
    let pairs: Vec<(f64, f64)> = s_values
        .iter()
        .enumerate()
        .flat_map(|(i, a)| s_values[i + 1..].iter().map(move |b| (*a, *b)))
        .collect();
    let devs: Vec<f64> = pairs
        .par_iter()
        .map(|(a, b)| vertical_invariance_check(&sf, *a, *b))
        .collect::<interplab::Result<_>>()?;
    let vertical = devs.iter().copied().fold(0.0, f64::max);
    let mode = BoundaryMode::Direct(DirectWindow::FullPeriod);
    let f0 = boundary_fourier(&sf, 0.0, mode)?;
    let f1 = boundary_fourier(&sf, 1.0, mode)?;
    let ratio = cn.value / real;
    let results = json!({
        "value": num(cn.value),
        "mean_value": num(cn.minimum.value),
        "direct_value": num(cn.direct_value),
        "cross_check_error": num(cn.cross_check_error),
        "real_interp_norm": num(real),
        "ratio": num(ratio),
        "vertical_max_deviation": num(vertical),
        "boundary_norms": nums(&[
            grid_lp_norm(&f0, couple.x0(), params.p0)?,
            grid_lp_norm(&f1, couple.x1(), params.p1)?,
        ]),
    });
    let assertions = vec![
        Assertion::at_most("direct_cross_check", cn.cross_check_error, 1e-4),
        Assertion {
            name: "ratio_finite".into(),
            passed: ratio.is_finite() && ratio > 0.0,
            value: ratio,
            limit: f64::INFINITY,
        },
        Assertion::at_most("vertical_invariance", vertical, vertical_tol),
    ];
    Ok(Outcome {
        results,
        constants: json!({
            "half_width": num(grid.half_width),
            "h": num(grid.h),
            "max_iters": opts.max_iters,
            "smooth_iters": opts.smooth_iters,
            "energetic_delta": num(ENERGETIC_DELTA),
            "boundary_mass_tol": num(BOUNDARY_MASS_TOL),
            "s_values": nums(&s_values),
            "vertical_tol": num(vertical_tol),
        }),
        assertions,
        tables: vec![
            (String::new(), cn.minimum.rep.gf.to_csv("t")),
            ("boundary0".into(), f0.to_csv("xi")),
            ("boundary1".into(), f1.to_csv("xi")),
        ],
    })
}

/// Default bound on the relative vertical-invariance deviation. Kinked
/// generators carry quadrature error above it and declare their own.
const VERTICAL_TOL: f64 = 1e-6;

fn default_s_values() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn complex_suite(spec: &BandSpec) -> RunResult<Outcome> {
    let (rows, summaries) = equivalence_band(spec)?;
    let mut table = Table::new(&[
        "instance",
        "dim",
        "r0",
        "r1",
        "theta",
        "p",
        "real",
        "complex",
        "ratio",
        "scale_deviation",
    ]);
    for r in &rows {
        table.push(vec![
            Cell::I(r.instance as i64),
            Cell::I(r.dim as i64),
            Cell::S(r.r0.to_string()),
            Cell::S(r.r1.to_string()),
            Cell::F(r.theta),
            Cell::S(r.p.to_string()),
            Cell::F(r.real),
            Cell::F(r.complex),
            Cell::F(r.ratio),
            Cell::F(r.scale_deviation),
        ]);
    }
    let finite = rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
    let scale = rows.iter().map(|r| r.scale_deviation).fold(0.0, f64::max);
    let spread = summaries.iter().map(|s| s.spread).fold(0.0, f64::max);
    let per_theta: Vec<Value> = summaries
        .iter()
        .map(|s| json!({"theta": num(s.theta), "min_ratio": num(s.min_ratio), "max_ratio": num(s.max_ratio), "spread": num(s.spread)}))
        .collect();
    Ok(Outcome {
        results: json!({
            "instances": rows.len(),
            "max_spread": num(spread),
            "max_scale_deviation": num(scale),
            "per_theta": per_theta,
        }),
        constants: json!({
            "band": num(spec.band),
            "scale": num(spec.scale),
            "h": num(spec.h),
            "max_iters": spec.mean.max_iters,
            "smooth_iters": spec.mean.smooth_iters,
            "couples": spec.couples,
            "weight_range": nums(&[spec.weight_range.0, spec.weight_range.1]),
        }),
        assertions: vec![
            Assertion {
                name: "ratio_finite".into(),
                passed: finite,
                value: if finite { 1.0 } else { 0.0 },
                limit: 1.0,
            },
            Assertion::at_most("scale_invariance", scale, 1e-9),
            Assertion::at_most("equivalence_band", spread, spec.band),
        ],
        tables: vec![(String::new(), table.to_csv())],
    })
}

fn family(node: &Node, theta: f64, dim: usize) -> CfgResult<OperatorFamily> {
    let kind = node.object(&["kind", "w0", "w1", "a", "s", "sigma0", "sigma1"])?;
    let k = kind.req("kind")?;
    let built = match k.node().str()? {
        "weighted" => {
            let o = node.object(&["kind", "w0", "w1"])?;
            let w0 = o.req("w0")?.node().positive_list(1)?;
            let w1 = o.req("w1")?.node().positive_list(1)?;
            if w0.len() != dim || w1.len() != dim {
                return node.err(format!("w0 and w1 need {dim} entries to match the couple"));
            }
            OperatorFamily::weighted(w0, w1, theta)
        }
        "resolvent" => {
            let o = node.object(&["kind", "a", "s", "sigma0", "sigma1"])?;
            let a = o.req("a")?.node().matrix()?;
            if a.nrows() != dim {
                return o
                    .req("a")?
                    .node()
                    .err(format!("need a {dim}x{dim} matrix to match the couple"));
            }
            let s = o.req("s")?.node().positive()?;
            let s0 = o.req("sigma0")?.node().f64_open(-PI, PI)?;
            let s1 = o.req("sigma1")?.node().f64_open(-PI, PI)?;
            OperatorFamily::resolvent(a, s, s0, s1, theta)
        }
        other => {
            return k
                .node()
                .err(format!("unknown family kind {other:?}; expected weighted or resolvent"))
        }
    };
    built.or_else(|e| node.err(e.to_string()))
}

fn stein(obj: &Obj, seed: u64) -> RunResult<Outcome> {
    let cx = couple_at(obj, "couple")?;
    let cy = match obj.opt("target_couple") {
        Some(c) => {
            let cy = c.node().couple()?;
            if cy.dim() != cx.dim() {
                return Err(c.node().error("must have the same dimension as couple").into());
            }
            cy
        }
        None => cx.clone(),
    };
    let params = params_at(obj, "params")?;
    let fam = family(&obj.req("family")?.node(), params.theta, cx.dim())?;
    let mut opts = SteinOptions {
        seed,
        ..SteinOptions::default()
    };
    if let Some(v) = obj.opt("samples") {
        opts.samples = v.node().usize_in(1, 1_000_000)?;
    }
    if let Some(v) = obj.opt("constant") {
        opts.constant = v.node().positive()?;
    }
    opts.multiplier = multiplier_options(obj, "multiplier", opts.multiplier, seed)?;
    opts.ascent = ascent_options(obj, "ascent", opts.ascent, seed)?;
    if obj.has("identity_grid") {
        opts.identity_grid = Some(mean_grid(obj, "identity_grid", params.theta)?);
    }
    let outcome = stein_check(&fam, &cx, &cy, &params, &opts)?;
    let mut table = Table::new(&["j", "lower", "upper", "symbol_l1", "symbol_dd_l1", "chain_bound"]);
    let mut chain_excess: f64 = 0.0;
    let mut order_excess: f64 = f64::NEG_INFINITY;
    let resolvent = matches!(fam.kind(), interplab::FamilyKind::Resolvent { .. });
    for j in 0..2 {
        let b = multiplier_norm_bounds(
            &fam,
            j,
            cx.endpoint(j),
            cy.endpoint(j),
            params.p_endpoint(j),
            params.q_endpoint(j),
            &opts.multiplier,
        )?;
        table.push(vec![
            Cell::I(j as i64),
            Cell::F(b.lower),
            Cell::F(b.upper),
            Cell::F(b.symbol_l1),
            Cell::F(b.symbol_dd_l1),
            Cell::F(b.chain_bound),
        ]);
        chain_excess = chain_excess.max(b.upper / (b.chain_bound * (1.0 + 1e-3)));
        order_excess = order_excess.max(b.lower - b.upper);
    }
    let r = &outcome.report;
    let mut results = serde_json::to_value(r).expect("report serializes");
    for key in ["m0_lower", "m0_upper", "m1_lower", "m1_upper", "c_empirical"] {
        results[key] = num(results[key].as_f64().unwrap_or(f64::NAN));
    }
    results["max_ratio"] = num(outcome.max_ratio);
    results["boundary_identity_error"] = num(outcome.boundary_identity_error);
    let mut assertions = vec![
        Assertion::at_most("stein_violations", r.violations as f64, 0.0),
        Assertion::at_most("multiplier_lower_le_upper", order_excess, 0.0),
    ];
    if resolvent {
        assertions.push(Assertion::at_most("kernel_chain", chain_excess, 1.0));
    }
    if opts.identity_grid.is_some() {
        assertions.push(Assertion::at_most(
            "boundary_identity",
            outcome.boundary_identity_error,
            1e-6,
        ));
    }
    Ok(Outcome {
        results,
        constants: json!({
            "constant": num(opts.constant),
            "samples": opts.samples,
            "multiplier_half_width": num(opts.multiplier.half_width),
            "multiplier_m": opts.multiplier.m,
            "multiplier_samples": opts.multiplier.samples,
            "tail_tol": num(opts.multiplier.tail_tol),
            "symbol_fd_step": num(interplab::stein::SYMBOL_FD_STEP),
            "chain_slack": num(1e-3),
        }),
        assertions,
        tables: vec![
            (String::new(), table.to_csv()),
            ("report.json".into(), crate::emit::to_json(&report_json(r))),
        ],
    })
}

/// The stein report with exactly its seven fields.
fn report_json(r: &interplab::SteinReport) -> Value {
    json!({
        "m0_lower": num(r.m0_lower),
        "m0_upper": num(r.m0_upper),
        "m1_lower": num(r.m1_lower),
        "m1_upper": num(r.m1_upper),
        "c_empirical": num(r.c_empirical),
        "samples": r.samples,
        "violations": r.violations,
    })
}

fn weighted_demo(obj: &Obj, seed: u64) -> RunResult<Outcome> {
    let params = params_at(obj, "params")?;
    let w0 = obj.req("w0")?.node().positive_list(1)?;
    let w1c = obj.req("w1")?;
    let w1 = w1c.node().positive_list(1)?;
    if w1.len() != w0.len() {
        return Err(w1c.node().error("must have as many entries as w0").into());
    }
    if params.p0.is_infinite() && params.p1.is_infinite() {
        return Err(ConfigError {
            path: "params.p1".into(),
            message: "p0 and p1 cannot both be inf".into(),
        }
        .into());
    }
    let samples = match obj.opt("samples") {
        Some(v) => v.node().usize_in(1, 1_000_000)?,
        None => 100,
    };
    let band = match obj.opt("band") {
        Some(v) => v.node().f64_open(1.0, f64::INFINITY)?,
        None => 10.0,
    };
    let quad = quad_options(obj, "quad", QuadOptions::default())?;
    let eq = weighted_equivalence_check(params.p0, params.p1, &w0, &w1, params.theta, samples, seed, &quad)?;
    let mut table = Table::new(&["sample", "ratio"]);
    for (i, r) in eq.ratios.iter().enumerate() {
        table.push(vec![Cell::I(i as i64), Cell::F(*r)]);
    }
    let mut results = json!({
        "min_ratio": num(eq.min_ratio),
        "max_ratio": num(eq.max_ratio),
        "spread": num(eq.spread),
        "samples": samples,
    });
    let mut assertions = vec![Assertion::at_most("equivalence_band", eq.spread, band)];
    let mut constants = json!({"band": num(band), "du": num(quad.du)});
    if let Some(t) = obj.opt("translation") {
        let (dev, h) = translation(&t.node(), [params.p0, params.p1], seed)?;
        results["translation_deviation"] = num(dev);
        constants["translation_h"] = num(h);
        assertions.push(Assertion::at_most("translation_identity", dev, 1e-10));
    }
    Ok(Outcome {
        results,
        constants,
        assertions,
        tables: vec![(String::new(), table.to_csv())],
    })
}

/// Grid-aligned weights `w0 = w1 e^{k h}` and a random Gaussian-bump input.
fn translation(node: &Node, p: [Exponent; 2], seed: u64) -> RunResult<(f64, f64)> {
    let o = node.object(&["h", "half_width", "weights", "shifts"])?;
    let h = match o.opt("h") {
        Some(v) => v.node().f64_open(0.0, 10.0)?,
        None => 0.05,
    };
    let half = match o.opt("half_width") {
        Some(v) => v.node().positive()?,
        None => 20.0,
    };
    let w1 = o.req("weights")?.node().positive_list(1)?;
    let sc = o.req("shifts")?;
    let shifts: Vec<i64> = sc
        .node()
        .array(1)?
        .iter()
        .map(|c| c.node().i64())
        .collect::<CfgResult<_>>()?;
    if shifts.len() != w1.len() {
        return Err(sc.node().error("need one shift per weight").into());
    }
    let w0: Vec<f64> = w1.iter().zip(&shifts).map(|(w, k)| w * (*k as f64 * h).exp()).collect();
    let m = (2.0 * half / h).round() as usize;
    if !(8..=1 << 22).contains(&m) {
        return Err(node.error("half_width / h gives an unusable node count").into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64)> = (0..w1.len())
        .map(|_| {
            (
                rng.random_range(-3.0..3.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let f = GridFunction::from_fn(-half, h, m, w1.len(), |t| {
        bumps
            .iter()
            .map(|(c, s, ph)| C64::from_polar((-(t - c) * (t - c) / (s * s)).exp(), *ph))
            .collect()
    })?;
    Ok((translation_identity_check(p, &w0, &w1, &f)?, h))
}

fn sector_scan(obj: &Obj, seed: u64) -> RunResult<Outcome> {
    let a = obj.req("a")?.node().matrix()?;
    let space = match obj.opt("space") {
        Some(s) => {
            let sp = s.node().space()?;
            if sp.dim() != a.nrows() {
                return Err(s.node().error("dimension must match the matrix").into());
            }
            sp
        }
        None => WeightedLrSpace::unweighted(a.nrows(), Exponent::TWO)?,
    };
    let spec = sector_spec(obj, "spec")?;
    let sigmas = match obj.opt("sigmas") {
        Some(s) => s
            .node()
            .array(1)?
            .iter()
            .map(|c| c.node().f64_open(0.0, PI))
            .collect::<CfgResult<Vec<f64>>>()?,
        None => vec![],
    };
    let angle = match obj.opt("angle") {
        Some(v) => v.node().bool()?,
        None => true,
    };
    let sups = sigmas
        .par_iter()
        .map(|s| resolvent_sup(&a, &space, *s, &spec))
        .collect::<interplab::Result<Vec<_>>>()?;
    let mut table = Table::new(&["sigma_or_s_or_absz", "arg", "value"]);
    let mut rows = Vec::new();
    for (s, r) in sigmas.iter().zip(&sups) {
        table.push(vec![Cell::F(*s), Cell::F(r.argmax_angle), Cell::F(r.value)]);
        rows.push(json!({
            "sigma": num(*s),
            "value": num(r.value),
            "finite": r.finite,
            "argmax_radius": num(r.argmax_radius),
            "argmax_angle": num(r.argmax_angle),
        }));
    }
    let mut results = json!({"sups": rows});
    let mut assertions = Vec::new();
    let mut pairs: Vec<(f64, f64)> = sigmas.iter().copied().zip(sups.iter().map(|r| r.value)).collect();
    if angle {
        let res = sectoriality_angle(&a, &space, &spec).map_err(|e| match e {
            interplab::Error::InvalidInput(m) => RunError::Config(ConfigError {
                path: "a".into(),
                message: m,
            }),
            e => RunError::Compute(e),
        })?;
        results["omega"] = num(res.omega);
        results["reference"] = num(res.reference);
        results["omega_error"] = num((res.omega - res.reference).abs());
        for (s, v) in &res.table {
            table.push(vec![Cell::F(*s), Cell::F(*s), Cell::F(*v)]);
        }
        pairs.extend(res.table.iter().copied());
        assertions.push(Assertion::at_most(
            "angle_reference",
            (res.omega - res.reference).abs(),
            1e-3,
        ));
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rise = pairs
        .windows(2)
        .filter(|w| w[0].1.is_finite())
        .map(|w| (w[1].1 - w[0].1) / w[0].1)
        .fold(0.0, f64::max);
    assertions.push(Assertion::at_most("table_nonincreasing", rise, 1e-9));
    let mut tables = vec![(String::new(), table.to_csv())];
    let mut constants = json!({
        "r_min": num(spec.r_min),
        "r_max": num(spec.r_max),
        "per_decade": spec.per_decade,
        "extra_rays": spec.extra_rays,
        "cap": num(spec.cap),
        "angle_tol": num(interplab::applications::ANGLE_TOL),
    });
    if let Some(i) = obj.opt("interp") {
        let o = i.node().object(&[
            "couple",
            "params",
            "sigma0",
            "sigma1",
            "s_grid",
            "constant",
            "multiplier",
            "ascent",
        ])?;
        let couple = couple_at(&o, "couple")?;
        if couple.dim() != a.nrows() {
            return Err(ConfigError {
                path: format!("{}.couple", o.path()),
                message: "dimension must match the matrix".into(),
            }
            .into());
        }
        let params = params_at(&o, "params")?;
        let s0 = o.req("sigma0")?;
        let s1 = o.req("sigma1")?;
        let sigma0 = s0.node().f64_open(0.0, PI)?;
        let sigma1 = s1.node().f64_open(0.0, PI)?;
        let s_grid = match o.opt("s_grid") {
            Some(g) => log_grid(&g.node(), (1e-3, 1e3, 61))?,
            None => log_space(1e-3, 1e3, 61),
        };
        let mut opts = SectorialityCheckOptions {
            sector: spec,
            ..SectorialityCheckOptions::default()
        };
        if let Some(c) = o.opt("constant") {
            opts.constant = c.node().positive()?;
        }
        opts.multiplier = multiplier_options(&o, "multiplier", opts.multiplier, seed)?;
        opts.ascent = ascent_options(&o, "ascent", opts.ascent, seed)?;
        for (j, (sigma, node)) in [(sigma0, &s0), (sigma1, &s1)].into_iter().enumerate() {
            let sup = resolvent_sup(&a, couple.endpoint(j), sigma, &spec)?;
            if !sup.finite {
                return Err(node
                    .node()
                    .error(format!("does not exceed the sectoriality angle of a on x{j}"))
                    .into());
            }
        }
        let rep = interp_sectoriality_check(&a, &couple, &params, sigma0, sigma1, &s_grid, &opts)?;
        let mut t = Table::new(&["sigma_or_s_or_absz", "arg", "value"]);
        let sigma_theta = (1.0 - params.theta) * sigma0 + params.theta * sigma1;
        for r in &rep.rows {
            t.push(vec![Cell::F(r.s), Cell::F(r.sign * sigma_theta), Cell::F(r.lower)]);
        }
        tables.push(("interp".into(), t.to_csv()));
        results["interp"] = json!({
            "c0": num(rep.c0),
            "c1": num(rep.c1),
            "max_ratio": num(rep.max_ratio),
            "violations": rep.violations,
            "points": rep.rows.len(),
        });
        constants["interp_constant"] = num(opts.constant);
        constants["multiplier_m"] = json!(opts.multiplier.m);
        assertions.push(Assertion::at_most("interp_sectoriality", rep.violations as f64, 0.0));
    }
    Ok(Outcome {
        results,
        constants,
        assertions,
        tables,
    })
}

fn semigroup(obj: &Obj, seed: u64) -> RunResult<Outcome> {
    let a = obj.req("a")?.node().matrix()?;
    let couple = couple_at(obj, "couple")?;
    if couple.dim() != a.nrows() {
        return Err(ConfigError {
            path: "couple".into(),
            message: "dimension must match the matrix".into(),
        }
        .into());
    }
    let p0 = obj.req("p0")?.node().exponent()?;
    let p1 = obj.req("p1")?.node().exponent()?;
    let thetas = obj
        .req("thetas")?
        .node()
        .array(1)?
        .iter()
        .map(|c| c.node().f64_open(0.0, 1.0))
        .collect::<CfgResult<Vec<f64>>>()?;
    let mut spec = SemigroupSpec::default();
    if let Some(c) = obj.opt("spec") {
        let o = c.node().object(&["radii", "rays", "margin", "cap"])?;
        if let Some(v) = o.opt("radii") {
            spec.radii = v.node().positive_list(1)?;
        }
        if let Some(v) = o.opt("rays") {
            spec.rays = v.node().usize_in(1, 1000)?;
        }
        if let Some(v) = o.opt("margin") {
            let m = v.node().f64()?;
            if !(0.0..1.0).contains(&m) {
                return Err(v.node().error("must lie in [0, 1)").into());
            }
            spec.margin = m;
        }
        if let Some(v) = o.opt("cap") {
            spec.cap = v.node().f64_open(1.0, f64::INFINITY)?;
        }
    }
    spec.ascent = ascent_options(obj, "ascent", spec.ascent, seed)?;
    let rep = semigroup_scan(&a, &couple, p0, p1, &thetas, &spec).map_err(|e| match e {
        interplab::Error::InvalidInput(m) => RunError::Config(ConfigError {
            path: "a".into(),
            message: m,
        }),
        e => RunError::Compute(e),
    })?;
    let mut tables = Vec::new();
    for (k, row) in rep.rows.iter().enumerate() {
        let mut t = Table::new(&["sigma_or_s_or_absz", "arg", "value"]);
        for p in &row.points {
            t.push(vec![Cell::F(p.abs_z), Cell::F(p.arg), Cell::F(p.value)]);
        }
        tables.push((format!("theta{k}"), t.to_csv()));
    }
    let rows: Vec<Value> = rep
        .rows
        .iter()
        .map(|r| json!({"theta": num(r.theta), "angle": num(r.angle), "sup": num(r.sup), "bounded": r.bounded}))
        .collect();
    let worst = rep.rows.iter().map(|r| r.sup).fold(0.0, f64::max);
    Ok(Outcome {
        results: json!({"sigma": num(rep.sigma), "x1_bound": num(rep.x1_bound), "rows": rows, "max_sup": num(worst)}),
        constants: json!({
            "radii": nums(&spec.radii),
            "rays": spec.rays,
            "margin": num(spec.margin),
            "cap": num(spec.cap),
        }),
        assertions: vec![Assertion::at_most("no_blowup", worst, spec.cap)],
        tables,
    })
}

fn rademacher(obj: &Obj, seed: u64) -> RunResult<Outcome> {
    let space = obj.req("space")?.node().space()?;
    let vc = obj.req("vectors")?;
    let items = vc.node().array(1)?;
    if items.len() > interplab::applications::RADEMACHER_MAX {
        return Err(vc
            .node()
            .error(format!("at most {} vectors", interplab::applications::RADEMACHER_MAX))
            .into());
    }
    let xs: Vec<Vec<C64>> = items
        .iter()
        .map(|c| c.node().vector(Some(space.dim())))
        .collect::<CfgResult<_>>()?;
    let lambda = match obj.opt("scale") {
        Some(v) => v.node().complex()?,
        None => C64::new(2.0, 0.0),
    };
    if lambda.norm() == 0.0 {
        return Err(ConfigError {
            path: "scale".into(),
            message: "must be nonzero".into(),
        }
        .into());
    }
    let avg = rademacher_average(&space, &xs)?;
    let scaled: Vec<Vec<C64>> = xs.iter().map(|x| x.iter().map(|v| v * lambda).collect()).collect();
    let avg_scaled = rademacher_average(&space, &scaled)?;
    let homogeneity = (avg_scaled - lambda.norm() * avg).abs();
    let mut flip: f64 = 0.0;
    for i in 0..xs.len() {
        let mut f = xs.clone();
        f[i] = f[i].iter().map(|v| -v).collect();
        flip = flip.max((rademacher_average(&space, &f)? - avg).abs());
    }
    let mut table = Table::new(&["vector", "norm"]);
    for (i, x) in xs.iter().enumerate() {
        table.push(vec![Cell::I(i as i64), Cell::F(space.norm(x)?)]);
    }
    let mut results = json!({
        "average": num(avg),
        "scaled_average": num(avg_scaled),
        "homogeneity_error": num(homogeneity),
        "sign_flip_error": num(flip),
        "vectors": xs.len(),
    });
    let mut assertions = vec![
        Assertion::at_most("homogeneity", homogeneity, 1e-12 * lambda.norm() * avg),
        Assertion::at_most("sign_flip_invariance", flip, 0.0),
    ];
    let mut constants =
        json!({"scale": [num(lambda.re), num(lambda.im)], "max_vectors": interplab::applications::RADEMACHER_MAX});
    if let Some(oc) = obj.opt("operators") {
        let list = oc.node().array(1)?;
        if list.len() > interplab::applications::R_BOUND_MAX {
            return Err(oc
                .node()
                .error(format!("at most {} operators", interplab::applications::R_BOUND_MAX))
                .into());
        }
        let ops: Vec<CMatrix> = list
            .iter()
            .map(|c| {
                let m = c.node().matrix()?;
                if m.nrows() != space.dim() {
                    return c.node().err("dimension must match the space");
                }
                Ok(m)
            })
            .collect::<CfgResult<_>>()?;
        let mut sampler = NormSampler {
            seed,
            ..NormSampler::default()
        };
        if let Some(sc) = obj.opt("sampler") {
            let o = sc.node().object(&["random", "iters"])?;
            if let Some(v) = o.opt("random") {
                sampler.random = v.node().usize_in(0, 100_000)?;
            }
            if let Some(v) = o.opt("iters") {
                sampler.iters = v.node().usize_in(0, 100_000)?;
            }
        }
        let rb = r_bound_lower(&ops, &space, &sampler)?;
        let singles: Vec<f64> = ops
            .iter()
            .map(|t| operator_norm_lower(t, &space, &space, &sampler))
            .collect::<interplab::Result<_>>()?;
        let best_single = singles.iter().copied().fold(0.0, f64::max);
        results["r_bound_lower"] = num(rb);
        results["single_operator_lower"] = nums(&singles);
        if ops.len() == 1 {
            assertions.push(Assertion::at_most(
                "r_bound_single_operator",
                (rb - best_single).abs(),
                0.0,
            ));
        } else {
            assertions.push(Assertion::at_most("r_bound_dominates_singles", best_single - rb, 0.0));
        }
        constants["sampler_random"] = json!(sampler.random);
        constants["sampler_iters"] = json!(sampler.iters);
    } else if obj.has("sampler") {
        return Err(ConfigError {
            path: "sampler".into(),
            message: "only used together with operators".into(),
        }
        .into());
    }
    Ok(Outcome {
        results,
        constants,
        assertions,
        tables: vec![(String::new(), table.to_csv())],
    })
}

/// Assembles the JSON report.
pub fn report(cmd: Command, config_hash: &str, seed: u64, out: &Outcome) -> Value {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(1));
    m.insert("command".into(), json!(cmd.name()));
    m.insert("config_sha256".into(), json!(config_hash));
    m.insert("seed".into(), json!(seed));
    m.insert("results".into(), out.results.clone());
    m.insert("constants".into(), out.constants.clone());
    m.insert(
        "assertions".into(),
        Value::Array(out.assertions.iter().map(Assertion::to_json).collect()),
    );
    m.insert("passed".into(), json!(out.assertions.iter().all(|a| a.passed)));
    Value::Object(m)
}
