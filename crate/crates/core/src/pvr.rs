//! Boolean pointer-value-retrieval targets.
//!
//! The first `p` coordinates form a pointer `v ∈ [0, 2^p)`, read with `x₁` as the
//! most significant bit. The pointer selects a window of `w` data bits and an
//! aggregation `g` maps the window to the label. Three window layouts are
//! supported:
//!
//! * `Truncated`: window starts at coordinate `p + 1 + v`, cut at `n`; `g` is
//!   applied to the surviving bits at reduced arity.
//! * `Cyclic`: same start, indices wrap back to `p + 1`.
//! * `NonOverlapping`: window starts at `p + 1 + v·w`, `n = p + 2^p·w`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::boolfn::{check_delta, check_dim, coord, BooleanFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    Truncated,
    Cyclic,
    NonOverlapping,
}

/// Which ±1 value of a pointer coordinate stands for binary digit 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointerEncoding {
    /// `x_i = +1` reads as 1. Matches the published monomial signs for the
    /// truncated `p = 3, w = 3` majority task.
    #[default]
    PlusIsOne,
    /// `x_i = -1` reads as 1, i.e. the pointer equals the raw mask bits.
    MinusIsOne,
}

/// Window aggregation `g`.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    Parity,
    /// `sign(Σ x_i)` with output `0` on ties.
    Majority,
    Min,
    Max,
    /// Explicit truth tables keyed by arity, each of length `2^r` in the
    /// crate-wide mask convention (window position `j` ↔ bit `j`).
    Custom(BTreeMap<usize, Vec<f64>>),
}

impl Aggregation {
    /// `g` applied to a window of ±1 values.
    pub fn apply(&self, window: &[f64]) -> Result<f64> {
        Ok(match self {
            Aggregation::Parity => window.iter().product(),
            Aggregation::Majority => {
                let s: f64 = window.iter().sum();
                if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Aggregation::Min => window.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Max => window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Custom(tables) => {
                let table = tables.get(&window.len()).ok_or_else(|| {
                    Error::InvalidPvr(format!(
                        "custom aggregation has no table for arity {}",
                        window.len()
                    ))
                })?;
                table[crate::boolfn::mask_of(window) as usize]
            }
        })
    }

    /// `g` at arity `r` as a function on `{±1}^r`.
    pub fn table(&self, r: usize) -> Result<BooleanFunction> {
        if let Aggregation::Custom(tables) = self {
            let t = tables.get(&r).ok_or_else(|| {
                Error::InvalidPvr(format!("custom aggregation has no table for arity {r}"))
            })?;
            return BooleanFunction::from_values(r, t.clone());
        }
        let mut err = None;
        let f = BooleanFunction::from_evaluator(r, |x| {
            self.apply(x).unwrap_or_else(|e| {
                err = Some(e);
                0.0
            })
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(f),
        }
    }

    /// Closed-form total influence `Σ_i Inf_i(g)` at arity `w`, when one exists.
    pub fn total_influence_closed_form(&self, w: usize) -> Option<f64> {
        let wf = w as f64;
        match self {
            Aggregation::Parity => Some(wf),
            Aggregation::Majority if w % 2 == 1 => {
                Some(wf * binomial(w - 1, (w - 1) / 2) / 2f64.powi(w as i32 - 1))
            }
            Aggregation::Majority => Some(wf * binomial(w - 1, w / 2) / 2f64.powi(w as i32)),
            Aggregation::Min | Aggregation::Max => Some(wf / 2f64.powi(w as i32 - 1)),
            Aggregation::Custom(_) => None,
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Full description of a PVR target.
#[derive(Debug, Clone, PartialEq)]
pub struct PvrSpec {
    pub p: usize,
    pub w: usize,
    pub mode: WindowMode,
    pub agg: Aggregation,
    pub encoding: PointerEncoding,
    /// Overrides the default `2^p` data bits (truncated and cyclic modes only).
    pub data_bits: Option<usize>,
}

impl PvrSpec {
    pub fn new(p: usize, w: usize, mode: WindowMode, agg: Aggregation) -> Self {
        Self {
            p,
            w,
            mode,
            agg,
            encoding: PointerEncoding::default(),
            data_bits: None,
        }
    }

    pub fn with_encoding(mut self, encoding: PointerEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn with_data_bits(mut self, m: usize) -> Self {
        self.data_bits = Some(m);
        self
    }

    /// Number of data (non-pointer) coordinates.
    pub fn data_len(&self) -> usize {
        match self.mode {
            WindowMode::NonOverlapping => (1usize << self.p.min(24)) * self.w,
            _ => self.data_bits.unwrap_or(1usize << self.p.min(24)),
        }
    }

    /// Total input dimension `n`.
    pub fn dimension(&self) -> usize {
        self.p + self.data_len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.w == 0 {
            return Err(Error::InvalidPvr("p and w must be at least 1".into()));
        }
        if self.p > 23 {
            return Err(Error::DimensionOutOfRange {
                n: self.p + (1 << 23),
                max: crate::boolfn::MAX_DIM,
            });
        }
        if self.mode == WindowMode::NonOverlapping && self.data_bits.is_some() {
            return Err(Error::InvalidPvr(
                "data_bits override is only valid for truncated and cyclic modes".into(),
            ));
        }
        let m = self.data_len();
        if m < 1 << self.p {
            return Err(Error::InvalidPvr(format!(
                "{m} data bits cannot host 2^{} window starts",
                self.p
            )));
        }
        check_dim(self.dimension())?;
        if self.mode == WindowMode::Cyclic && self.w > m {
            return Err(Error::InvalidPvr(format!(
                "cyclic window {} longer than the {m} data bits",
                self.w
            )));
        }
        if let Aggregation::Custom(tables) = &self.agg {
            for r in self.required_arities() {
                match tables.get(&r) {
                    Some(t) if t.len() == 1 << r => {}
                    Some(t) => {
                        return Err(Error::InvalidPvr(format!(
                            "custom table for arity {r} has {} entries, expected {}",
                            t.len(),
                            1 << r
                        )))
                    }
                    None => {
                        return Err(Error::InvalidPvr(format!(
                            "custom aggregation missing arity {r}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Window arities that occur over all pointer values.
    pub fn required_arities(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..1usize << self.p)
            .map(|v| self.window(v).len())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// 0-based coordinates of the window selected by pointer value `v`.
    pub fn window(&self, v: usize) -> Vec<usize> {
        let (p, w, m) = (self.p, self.w, self.data_len());
        match self.mode {
            WindowMode::Truncated => (v..(v + w).min(m)).map(|j| p + j).collect(),
            WindowMode::Cyclic => (0..w).map(|j| p + (v + j) % m).collect(),
            WindowMode::NonOverlapping => (0..w).map(|j| p + v * w + j).collect(),
        }
    }

    /// Pointer value at hypercube point `mask`.
    pub fn pointer(&self, mask: u32) -> usize {
        (0..self.p).fold(0usize, |v, i| {
            let minus = (mask >> i) & 1 == 1;
            let digit = match self.encoding {
                PointerEncoding::PlusIsOne => !minus,
                PointerEncoding::MinusIsOne => minus,
            };
            (v << 1) | digit as usize
        })
    }

    fn eval_mask(&self, mask: u32, buf: &mut Vec<f64>) -> Result<f64> {
        buf.clear();
        buf.extend(self.window(self.pointer(mask)).iter().map(|&i| coord(mask, i)));
        self.agg.apply(buf)
    }
}

/// Truth table of the PVR target.
pub fn make_pvr(spec: &PvrSpec) -> Result<BooleanFunction> {
    spec.validate()?;
    let n = spec.dimension();
    let mut buf = Vec::with_capacity(spec.w);
    let values = (0..1u32 << n)
        .map(|m| spec.eval_mask(m, &mut buf))
        .collect::<Result<Vec<_>>>()?;
    BooleanFunction::from_values(n, values)
}

fn require_cyclic_data_bit(spec: &PvrSpec, k: usize) -> Result<()> {
    spec.validate()?;
    if spec.mode != WindowMode::Cyclic {
        return Err(Error::Unsupported(
            "closed-form influence is only available for cyclic windows".into(),
        ));
    }
    if spec.data_len() != 1 << spec.p {
        return Err(Error::Unsupported(
            "closed-form influence needs exactly 2^p data bits".into(),
        ));
    }
    let n = spec.dimension();
    if k <= spec.p || k > n {
        return Err(Error::InvalidArgument(format!(
            "coordinate {k} is not a data bit (data bits are {}..={n})",
            spec.p + 1
        )));
    }
    Ok(())
}

/// Closed-form `Inf_k(f) = 2^{-p} Σ_i Inf_i(g)` for a data bit `k` of a cyclic PVR.
///
/// Custom aggregations fall back to the spectral total influence of `g`.
pub fn analytic_influence(spec: &PvrSpec, k: usize) -> Result<f64> {
    require_cyclic_data_bit(spec, k)?;
    let total = match spec.agg.total_influence_closed_form(spec.w) {
        Some(t) => t,
        None => spec.agg.table(spec.w)?.fourier_transform().influences().iter().sum(),
    };
    Ok(total / 2f64.powi(spec.p as i32))
}

fn require_non_overlapping(spec: &PvrSpec) -> Result<BooleanFunction> {
    spec.validate()?;
    if spec.mode != WindowMode::NonOverlapping {
        return Err(Error::Unsupported(
            "pointer-window stability formula needs non-overlapping windows".into(),
        ));
    }
    spec.agg.table(spec.w)
}

/// The two-term stability expression
/// `(1-δ)^{p+w} + (1-δ)^p (1-(1-δ)^w) Stab_δ[g]` for balanced ±1 `g`.
///
/// This expression does not equal `Stab_δ[f]` except at `δ = 0`; see
/// [`factorized_stability`] for the exact value.
pub fn analytic_stability(spec: &PvrSpec, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let g = require_non_overlapping(spec)?;
    if !g.is_pm_one() || !g.is_balanced(1e-12) {
        return Err(Error::Unsupported(
            "aggregation must be balanced and ±1-valued".into(),
        ));
    }
    let stab_g = g.fourier_transform().noise_stability(delta)?;
    let keep = 1.0 - delta;
    let (p, w) = (spec.p as i32, spec.w as i32);
    Ok(keep.powi(p + w) + keep.powi(p) * (1.0 - keep.powi(w)) * stab_g)
}

/// Exact `Stab_δ[f]` for non-overlapping windows and any real `g`:
/// `(1-δ)^p Stab_δ[g] + (1 - (1-δ)^p) ĝ(∅)²`.
///
/// If no pointer bit flips, both evaluations read the same window. Otherwise
/// they read disjoint windows whose contents are independent.
pub fn factorized_stability(spec: &PvrSpec, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let g = require_non_overlapping(spec)?;
    let gs = g.fourier_transform();
    let keep = (1.0 - delta).powi(spec.p as i32);
    let mean = gs.coeff(0);
    Ok(keep * gs.noise_stability(delta)? + (1.0 - keep) * mean * mean)
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowMode::Truncated => "truncated",
            WindowMode::Cyclic => "cyclic",
            WindowMode::NonOverlapping => "non_overlapping",
        })
    }
}

impl FromStr for WindowMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncated" => Ok(WindowMode::Truncated),
            "cyclic" => Ok(WindowMode::Cyclic),
            "non_overlapping" => Ok(WindowMode::NonOverlapping),
            _ => Err(Error::Parse(format!("unknown window mode `{s}`"))),
        }
    }
}

impl fmt::Display for PointerEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointerEncoding::PlusIsOne => "plus_is_one",
            PointerEncoding::MinusIsOne => "minus_is_one",
        })
    }
}

impl FromStr for PointerEncoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus_is_one" => Ok(PointerEncoding::PlusIsOne),
            "minus_is_one" => Ok(PointerEncoding::MinusIsOne),
            _ => Err(Error::Parse(format!("unknown pointer encoding `{s}`"))),
        }
    }
}

impl Aggregation {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::Parity => "parity",
            Aggregation::Majority => "majority",
            Aggregation::Min => "min",
            Aggregation::Max => "max",
            Aggregation::Custom(_) => "custom",
        }
    }

    /// Parses a named aggregation (`custom` needs tables and is built directly).
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(Aggregation::Parity),
            "majority" => Ok(Aggregation::Majority),
            "min" => Ok(Aggregation::Min),
            "max" => Ok(Aggregation::Max),
            _ => Err(Error::Parse(format!("unknown aggregation `{s}`"))),
        }
    }
}
