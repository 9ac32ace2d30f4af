//! Subcommand implementations. Each writes its files under the output
//! directory together with the resolved configuration.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use boolinf::complexity::{cross_predictability, estimate_inal, verify_cp_stab, CpMode};
use boolinf::harness::{
    mean_ci95, sweep as run_sweep, train_run, write_aggregate_csv, write_plot_csv, write_runs_csv,
    write_trajectory_csv, HoldoutConfig, PlotPoint, RunRecord, SweepConfig,
};
use boolinf::verify;

use crate::config::{Config, ConfigError};
use crate::svg;

/// A check ran and failed (exit code 2).
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn prepare(cfg: &Config) -> Result<PathBuf> {
    let out = PathBuf::from(cfg.raw("out"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut f = create(&out, RESOLVED_CONFIG)?;
    f.write_all(cfg.render().as_bytes())?;
    f.flush()?;
    Ok(out)
}

fn write_pairs(dir: &Path, name: &str, header: &str, rows: impl Iterator<Item = (String, f64)>) -> Result<()> {
    let mut f = create(dir, name)?;
    writeln!(f, "{header}")?;
    for (a, b) in rows {
        writeln!(f, "{a},{b:?}")?;
    }
    f.flush()?;
    Ok(())
}

/// Reads a two-column file written by `analyze` (header skipped).
pub fn read_pairs(path: &Path) -> Result<Vec<(String, f64)>> {
    let f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for line in f.lines().skip(1) {
        let line = line?;
        let Some((a, b)) = line.split_once(',') else {
            bail!("malformed row `{line}` in {}", path.display());
        };
        out.push((a.to_string(), b.parse()?));
    }
    Ok(out)
}

pub fn analyze(cfg: &Config) -> Result<()> {
    let task = cfg.task()?;
    let out = prepare(cfg)?;
    let s = &task.spectrum;
    let n = task.n();
    write_pairs(
        &out,
        "spectrum.csv",
        "subset_mask,coefficient",
        s.coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| (m.to_string(), *c)),
    )?;
    let inf = s.influences();
    write_pairs(
        &out,
        "influence.csv",
        "coordinate,influence",
        inf.iter().enumerate().map(|(i, v)| ((i + 1).to_string(), *v)),
    )?;
    write_pairs(
        &out,
        "degree_weights.csv",
        "degree,weight",
        s.degree_weights().into_iter().enumerate().map(|(d, w)| (d.to_string(), w)),
    )?;
    let mut stab = Vec::new();
    for i in 0..=20 {
        let d = i as f64 * 0.025;
        stab.push((format!("{d:?}"), s.noise_stability(d)?));
    }
    write_pairs(&out, "stability.csv", "delta,stability", stab.into_iter())?;
    println!("n = {n}, total weight {:?}, total influence {:?}", s.total_weight(), inf.iter().sum::<f64>());
    for (i, v) in inf.iter().enumerate() {
        println!("Inf_{} = {v:?}", i + 1);
    }
    Ok(())
}

pub fn train(cfg: &Config) -> Result<()> {
    let cfg = cfg.at_axis(None, "")?;
    let task = cfg.task()?;
    let ks = cfg.frozen_indices(&task)?;
    let [k] = ks[..] else {
        return Err(ConfigError(format!(
            "train needs a single holdout.k (0 for matched), got {} values; use sweep",
            ks.len()
        ))
        .into());
    };
    let n = task.n();
    let seed = cfg.seed()?;
    let (model, opt, schedule) = (cfg.model(n)?, cfg.optimizer()?, cfg.schedule(n, seed)?);
    HoldoutConfig::frozen(k).validate(n).map_err(|e| ConfigError(e.to_string()))?;
    let out = prepare(&cfg)?;
    let record = train_run(&task, HoldoutConfig::frozen(k), &model, &opt, &schedule, seed)?;
    let mut f = create(&out, "runs.csv")?;
    write_runs_csv(&mut f, std::slice::from_ref(&record))?;
    f.flush()?;
    let mut f = create(&out, "trajectory.csv")?;
    write_trajectory_csv(&mut f, &record.coefficient_trajectory)?;
    f.flush()?;
    println!(
        "k = {k}: gen_error_ood {:?}, gen_error_id {:?}, influence {:?}, steps {}",
        record.gen_error_ood, record.gen_error_id, record.influence, record.steps
    );
    Ok(())
}

struct SweepOutput {
    runs: Vec<RunRecord>,
    rows: Vec<boolinf::harness::AggregateRow>,
}

fn sweep_once(cfg: &Config, out: &Path, suffix: &str) -> Result<SweepOutput> {
    let task = cfg.task()?;
    let n = task.n();
    let seed = cfg.seed()?;
    let sweep_cfg = SweepConfig {
        k_range: cfg.frozen_indices(&task)?,
        repeats: cfg.repeats()?,
        base_seed: seed,
    };
    let (model, opt, schedule) = (cfg.model(n)?, cfg.optimizer()?, cfg.schedule(n, seed)?);
    let result = run_sweep(&task, &sweep_cfg, &model, &opt, &schedule)?;
    let mut f = create(out, &format!("runs{suffix}.csv"))?;
    write_runs_csv(&mut f, &result.runs)?;
    f.flush()?;
    let mut f = create(out, &format!("aggregate{suffix}.csv"))?;
    write_aggregate_csv(&mut f, &result.aggregate)?;
    f.flush()?;
    for (i, r) in result.runs.iter().enumerate() {
        if r.coefficient_trajectory.is_empty() {
            continue;
        }
        let name = format!(
            "trajectories{suffix}/k{}_r{}.csv",
            r.frozen_index,
            i % sweep_cfg.repeats
        );
        let mut f = create(out, &name)?;
        write_trajectory_csv(&mut f, &r.coefficient_trajectory)?;
        f.flush()?;
    }
    Ok(SweepOutput {
        runs: result.runs,
        rows: result.aggregate,
    })
}

fn write_plot(cfg: &Config, out: &Path, stem: &str, x_label: &str, points: &[PlotPoint]) -> Result<()> {
    let mut f = create(out, &format!("{stem}.csv"))?;
    write_plot_csv(&mut f, points)?;
    f.flush()?;
    if cfg.svg()? {
        let mut f = create(out, &format!("{stem}.svg"))?;
        f.write_all(svg::line_chart(stem, x_label, points).as_bytes())?;
        f.flush()?;
    }
    Ok(())
}

/// Without list-valued axis keys: one sweep over `holdout.k`, plotted per
/// frozen index. Otherwise one plot per axis key, each value averaged over
/// all of its runs, with the other axes at their first value.
pub fn sweep(cfg: &Config) -> Result<()> {
    let axes = cfg.axes()?;
    if axes.is_empty() {
        let cfg = cfg.at_axis(None, "")?;
        cfg.task()?;
        let out = prepare(&cfg)?;
        let res = sweep_once(&cfg, &out, "")?;
        let points: Vec<PlotPoint> = res
            .rows
            .iter()
            .map(|r| PlotPoint {
                series: "frozen_index".into(),
                x: r.frozen_index as f64,
                mean_gen_error_ood: r.mean_gen_error_ood,
                ci95: r.ci95_gen_error_ood,
                influence: r.influence,
            })
            .collect();
        write_plot(&cfg, &out, "plot", "frozen coordinate", &points)?;
        for r in &res.rows {
            println!(
                "k = {}: mean ood {:?} +/- {:?} ({} runs), influence {:?}",
                r.frozen_index, r.mean_gen_error_ood, r.ci95_gen_error_ood, r.runs, r.influence
            );
        }
        return Ok(());
    }
    // validate every axis value before any training
    for (key, values) in &axes {
        for v in values {
            let c = cfg.at_axis(Some(key), v)?;
            let task = c.task()?;
            c.model(task.n())?;
            v.parse::<f64>()
                .map_err(|e| ConfigError(format!("`{key}` value `{v}`: {e}")))?;
        }
    }
    let out = prepare(cfg)?;
    for (key, values) in &axes {
        let name = key.replace('.', "_");
        let mut points = Vec::new();
        for v in values {
            let c = cfg.at_axis(Some(key), v)?;
            let res = sweep_once(&c, &out, &format!("_{name}_{v}"))?;
            let ood: Vec<f64> = res.runs.iter().map(|r| r.gen_error_ood).collect();
            let (mean, ci) = mean_ci95(&ood);
            let influence = res.runs.iter().map(|r| r.influence).sum::<f64>() / res.runs.len() as f64;
            println!("{key} = {v}: mean ood {mean:?} +/- {ci:?}, mean influence {influence:?}");
            points.push(PlotPoint {
                series: name.clone(),
                x: v.parse()?,
                mean_gen_error_ood: mean,
                ci95: ci,
                influence,
            });
        }
        points.sort_by(|a, b| a.x.total_cmp(&b.x));
        write_plot(cfg, &out, &format!("plot_{name}"), key, &points)?;
    }
    Ok(())
}

pub fn cp(cfg: &Config) -> Result<()> {
    let cfg = cfg.at_axis(None, "")?;
    let base = cfg.target()?;
    let ext: usize = cfg.get("cp.extend")?;
    let f = if ext > 0 {
        base.extend(ext).map_err(|e| ConfigError(e.to_string()))?
    } else {
        base.clone()
    };
    let mode = match cfg.raw("cp.mode") {
        "exact" => CpMode::Exact,
        "mc" => CpMode::MonteCarlo {
            samples: cfg.get("cp.samples")?,
            seed: cfg.seed()?,
        },
        m => return Err(ConfigError(format!("unknown cp.mode `{m}` (exact, mc)")).into()),
    };
    let deltas: Vec<f64> = cfg.list("cp.delta")?;
    let out = prepare(&cfg)?;
    let est = cross_predictability(&f, mode)?;
    let mut w = create(&out, "cp.csv")?;
    writeln!(w, "n,cross_predictability,std_error")?;
    writeln!(w, "{},{:?},{:?}", f.n(), est.estimate, est.std_error)?;
    w.flush()?;
    println!("n = {}: CP = {:?} (std error {:?})", f.n(), est.estimate, est.std_error);

    if ext > 0 && ext == 2 * base.n() {
        let mut w = create(&out, "cp_stab.csv")?;
        writeln!(w, "delta,cp,stab,holds")?;
        let mut failed = Vec::new();
        for d in deltas {
            let r = verify_cp_stab(&f, d)?;
            writeln!(w, "{d:?},{:?},{:?},{}", r.cp, r.stab, r.holds)?;
            println!("delta' = {d}: CP {:?} <= Stab {:?}: {}", r.cp, r.stab, r.holds);
            if !r.holds {
                failed.push(d);
            }
        }
        w.flush()?;
        if !failed.is_empty() {
            return Err(CheckFailed(format!("CP > Stab at delta' in {failed:?}")).into());
        }
    }
    Ok(())
}

pub fn inal(cfg: &Config) -> Result<()> {
    let cfg = cfg.at_axis(None, "")?;
    let f = cfg.target()?;
    let model = cfg.model(f.n())?;
    let samples: usize = cfg.get("inal.samples")?;
    let out = prepare(&cfg)?;
    let est = estimate_inal(&f, &model, samples, cfg.seed()?)?;
    let mut w = create(&out, "inal.csv")?;
    writeln!(w, "layer,neuron,mean,std_error")?;
    for (l, layer) in est.per_neuron.iter().enumerate() {
        for (v, (m, se)) in layer.iter().enumerate() {
            writeln!(w, "{l},{v},{m:?},{se:?}")?;
        }
    }
    w.flush()?;
    println!(
        "INAL = {:?} at layer {} neuron {} ({samples} initializations)",
        est.value, est.argmax.0, est.argmax.1
    );
    Ok(())
}

pub fn verify(out: Option<&Path>) -> Result<()> {
    let checks = verify::run_all();
    let report: String = checks.iter().map(|c| format!("{c}\n")).collect();
    print!("{report}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("verify.txt"), &report)?;
    }
    if !verify::all_gating_passed(&checks) {
        let names: Vec<&str> = checks
            .iter()
            .filter(|c| c.gating && !c.passed)
            .map(|c| c.name)
            .collect();
        return Err(CheckFailed(names.join(", ")).into());
    }
    Ok(())
}
