//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use boolinf::harness::{Dataset, EvalMode, Schedule, MAX_EXACT_TRACK_DIM};
use boolinf::nets::{InitScheme, ModelConfig, ModelKind, OptimizerConfig};
use boolinf::pvr::{Aggregation, PointerEncoding, PvrSpec, WindowMode};
use boolinf::{harness, BooleanFunction, FourierSpectrum};

/// Every accepted key with its default value.
const KEYS: &[(&str, &str)] = &[
    ("task", "pvr"),
    ("pvr.p", "3"),
    ("pvr.w", "2"),
    ("pvr.mode", "cyclic"),
    ("pvr.agg", "majority"),
    ("pvr.encoding", "plus_is_one"),
    ("pvr.data_bits", "default"),
    ("ramp.n", "11"),
    ("spectrum.file", ""),
    ("spectrum.n", "0"),
    ("holdout.k", "all"),
    ("model.kind", "mlp"),
    ("model.hidden", "desk"),
    ("model.depth", "3"),
    ("model.width", "256"),
    ("model.init", "uniform"),
    ("model.alpha", "0.5"),
    ("model.init_mean", "0"),
    ("model.init_variance", "0.01"),
    ("opt.method", "sgd"),
    ("opt.lr", "0.06"),
    ("opt.momentum", "0.9"),
    ("opt.batch", "64"),
    ("opt.beta1", "0.9"),
    ("opt.beta2", "0.999"),
    ("opt.eps", "1e-8"),
    ("opt.clamp", "1"),
    ("opt.noise_std", "0"),
    ("train.epochs", "20"),
    ("train.dataset", "default"),
    ("train.eval_every", "1"),
    ("train.eval", "auto"),
    ("train.mc_samples", "100000"),
    ("train.tracked", "auto"),
    ("train.wall_time", "false"),
    ("seed", "1"),
    ("repeats", "1"),
    ("out", "out"),
    ("cp.mode", "exact"),
    ("cp.samples", "10000"),
    ("cp.extend", "0"),
    ("cp.delta", "0.05,0.1,0.15,0.2,0.25"),
    ("inal.samples", "100"),
    ("plot.svg", "false"),
];

/// Keys whose comma-separated values become separate sweep axes.
pub const AXIS_KEYS: &[&str] = &["pvr.w", "model.depth", "model.alpha"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Resolved configuration: defaults overlaid by the file and by overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`, got `{line}`", no + 1));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => err(format!("unknown key `{key}`")),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    /// Every key, sorted, one `key = value` per line. Parses back to `self`.
    pub fn render(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse()
            .map_err(|e| ConfigError(format!("`{key} = {v}`: {e}")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        parse_list(self.raw(key)).map_err(|e| ConfigError(format!("`{key}`: {e}")))
    }

    fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => err(format!("`{key} = {v}`: expected true or false")),
        }
    }

    /// Copy with the axis key `key` fixed to `value` and every other axis key
    /// at its first listed value.
    pub fn at_axis(&self, key: Option<&str>, value: &str) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        for &axis in AXIS_KEYS {
            let v = if Some(axis) == key {
                value.to_string()
            } else {
                first_item(self.raw(axis))?
            };
            c.values.insert(axis.to_string(), v);
        }
        Ok(c)
    }

    /// Axis keys carrying more than one value.
    pub fn axes(&self) -> Result<Vec<(&'static str, Vec<String>)>, ConfigError> {
        let mut out = Vec::new();
        for &key in AXIS_KEYS {
            let items = split_items(self.raw(key))?;
            if items.len() > 1 {
                out.push((key, items));
            }
        }
        Ok(out)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.get("seed")
    }

    pub fn repeats(&self) -> Result<usize, ConfigError> {
        let r: usize = self.get("repeats")?;
        if r == 0 {
            return err("`repeats` must be at least 1");
        }
        Ok(r)
    }

    pub fn svg(&self) -> Result<bool, ConfigError> {
        self.bool("plot.svg")
    }

    /// Resolves every key for every axis value, so a bad value is reported
    /// before any command starts work.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut variants = vec![self.at_axis(None, "")?];
        for (key, values) in self.axes()? {
            for v in values {
                v.parse::<f64>()
                    .map_err(|e| ConfigError(format!("`{key}` value `{v}`: {e}")))?;
                variants.push(self.at_axis(Some(key), &v)?);
            }
        }
        let seed = self.seed()?;
        for c in &variants {
            let task = c.task()?;
            let n = task.n();
            c.model(n)?;
            c.optimizer()?;
            c.schedule(n, seed)?;
            for k in c.frozen_indices(&task)? {
                harness::HoldoutConfig::frozen(k)
                    .validate(n)
                    .map_err(|e| ConfigError(format!("holdout.k: {e}")))?;
            }
        }
        self.repeats()?;
        self.svg()?;
        if !matches!(self.raw("cp.mode"), "exact" | "mc") {
            return err(format!("unknown cp.mode `{}` (exact, mc)", self.raw("cp.mode")));
        }
        self.get::<usize>("cp.samples")?;
        self.get::<usize>("cp.extend")?;
        self.list::<f64>("cp.delta")?;
        self.get::<usize>("inal.samples")?;
        Ok(())
    }

    pub fn pvr_spec(&self) -> Result<PvrSpec, ConfigError> {
        let mode = match self.raw("pvr.mode") {
            "truncated" => WindowMode::Truncated,
            "cyclic" => WindowMode::Cyclic,
            "non_overlapping" => WindowMode::NonOverlapping,
            m => return err(format!("unknown pvr.mode `{m}`")),
        };
        let agg = Aggregation::from_name(self.raw("pvr.agg")).map_err(|e| ConfigError(e.to_string()))?;
        let encoding: PointerEncoding = self.get("pvr.encoding")?;
        let w: usize = first_item(self.raw("pvr.w"))?
            .parse()
            .map_err(|e| ConfigError(format!("pvr.w: {e}")))?;
        let mut spec = PvrSpec::new(self.get("pvr.p")?, w, mode, agg).with_encoding(encoding);
        if self.raw("pvr.data_bits") != "default" {
            spec = spec.with_data_bits(self.get("pvr.data_bits")?);
        }
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(spec)
    }

    pub fn task(&self) -> Result<harness::Task, ConfigError> {
        let cfg_err = |e: boolinf::Error| ConfigError(e.to_string());
        match self.raw("task") {
            "pvr" => harness::Task::pvr(&self.pvr_spec()?).map_err(cfg_err),
            "ramp" => {
                let n: usize = self.get("ramp.n")?;
                if !(1..=boolinf::harness::MAX_EXACT_EVAL_DIM).contains(&n) {
                    return err(format!("ramp.n = {n} out of range 1..=20"));
                }
                Ok(harness::Task::from_spectrum(harness::ramp_target(n)))
            }
            "spectrum" => {
                let path = self.raw("spectrum.file");
                if path.is_empty() {
                    return err("task = spectrum needs spectrum.file");
                }
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read {path}: {e}")))?;
                let terms = parse_spectrum_csv(&text)?;
                let s = FourierSpectrum::from_terms(self.get("spectrum.n")?, &terms).map_err(cfg_err)?;
                Ok(harness::Task::from_spectrum(s))
            }
            t => err(format!("unknown task `{t}` (pvr, ramp, spectrum)")),
        }
    }

    pub fn target(&self) -> Result<BooleanFunction, ConfigError> {
        Ok(self.task()?.function)
    }

    /// Frozen coordinates: a list, an inclusive range `a..=b`, or `all`
    /// (every non-pointer coordinate).
    pub fn frozen_indices(&self, task: &harness::Task) -> Result<Vec<usize>, ConfigError> {
        let ks: Vec<usize> = if self.raw("holdout.k") == "all" {
            (task.pointer_bits + 1..=task.n()).collect()
        } else {
            self.list("holdout.k")?
        };
        if ks.is_empty() {
            return err("holdout.k selects no coordinate");
        }
        Ok(ks)
    }

    pub fn model(&self, n: usize) -> Result<ModelConfig, ConfigError> {
        let kind: ModelKind = self.get("model.kind")?;
        let depth: usize = first_item(self.raw("model.depth"))?
            .parse()
            .map_err(|e| ConfigError(format!("model.depth: {e}")))?;
        let cfg = match kind {
            ModelKind::LinearRegression => ModelConfig::linear_regression(n),
            ModelKind::DeepLinear => ModelConfig::deep_linear(n, depth, self.get("model.width")?),
            ModelKind::Mlp => match self.raw("model.hidden") {
                "desk" => ModelConfig::mlp_desk(n),
                "full" => ModelConfig::mlp_full(n),
                _ => ModelConfig::mlp(n, self.list("model.hidden")?),
            },
        };
        let init = match self.raw("model.init") {
            "uniform" => InitScheme::UniformFanIn {
                alpha: first_item(self.raw("model.alpha"))?
                    .parse()
                    .map_err(|e| ConfigError(format!("model.alpha: {e}")))?,
            },
            "normal" => InitScheme::Normal {
                mean: self.get("model.init_mean")?,
                variance: self.get("model.init_variance")?,
            },
            i => return err(format!("unknown model.init `{i}` (uniform, normal)")),
        };
        let cfg = cfg.with_init(init);
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig, ConfigError> {
        let lr = self.get("opt.lr")?;
        let batch = self.get("opt.batch")?;
        let cfg = match self.raw("opt.method") {
            "sgd" => OptimizerConfig::sgd(lr, self.get("opt.momentum")?, batch),
            "adam" => {
                let mut c = OptimizerConfig::adam(lr, batch);
                c.method = boolinf::nets::Method::Adam {
                    beta1: self.get("opt.beta1")?,
                    beta2: self.get("opt.beta2")?,
                    eps: self.get("opt.eps")?,
                };
                c
            }
            "noisy_gd" => {
                OptimizerConfig::noisy_gd(lr, self.get("opt.clamp")?, self.get("opt.noise_std")?, batch)
            }
            m => return err(format!("unknown opt.method `{m}` (sgd, adam, noisy_gd)")),
        };
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn schedule(&self, n: usize, seed: u64) -> Result<Schedule, ConfigError> {
        let dataset = match self.raw("train.dataset") {
            "default" => Dataset::default_for(n),
            "full" => Dataset::FullSupport,
            _ => Dataset::Sampled(self.get("train.dataset")?),
        };
        let samples: usize = self.get("train.mc_samples")?;
        let eval = match self.raw("train.eval") {
            "auto" if n <= MAX_EXACT_TRACK_DIM => EvalMode::Exact,
            "exact" => EvalMode::Exact,
            "auto" | "mc" => EvalMode::MonteCarlo { samples, seed },
            e => return err(format!("unknown train.eval `{e}` (auto, exact, mc)")),
        };
        let tracked = match self.raw("train.tracked") {
            "auto" => None,
            "none" => Some(vec![]),
            _ => Some(self.list("train.tracked")?),
        };
        Ok(Schedule {
            epochs: self.get("train.epochs")?,
            dataset,
            tracked,
            eval_every: self.get("train.eval_every")?,
            eval,
            wall_time: self.bool("train.wall_time")?,
        })
    }
}

fn split_items(v: &str) -> Result<Vec<String>, ConfigError> {
    let items: Vec<String> = v
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return err(format!("empty list `{v}`"));
    }
    Ok(items)
}

fn first_item(v: &str) -> Result<String, ConfigError> {
    Ok(split_items(v)?.swap_remove(0))
}

/// Comma-separated items, each a value or an inclusive integer range `a..=b`.
pub fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let mut out = Vec::new();
    for item in split_items(v).map_err(|e| e.0)? {
        if let Some((a, b)) = item.split_once("..=") {
            let a: i64 = a.trim().parse().map_err(|e| format!("`{item}`: {e}"))?;
            let b: i64 = b.trim().parse().map_err(|e| format!("`{item}`: {e}"))?;
            for i in a..=b {
                out.push(i.to_string().parse().map_err(|e| format!("`{item}`: {e}"))?);
            }
        } else {
            out.push(item.parse().map_err(|e| format!("`{item}`: {e}"))?);
        }
    }
    Ok(out)
}

/// `subset_mask,coefficient` rows (header optional).
pub fn parse_spectrum_csv(text: &str) -> Result<Vec<(u32, f64)>, ConfigError> {
    let mut terms = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("subset_mask") || line.starts_with('#') {
            continue;
        }
        let bad = || ConfigError(format!("spectrum line {}: `{line}`", no + 1));
        let (m, c) = line.split_once(',').ok_or_else(bad)?;
        terms.push((
            m.trim().parse().map_err(|_| bad())?,
            c.trim().parse().map_err(|_| bad())?,
        ));
    }
    Ok(terms)
}
