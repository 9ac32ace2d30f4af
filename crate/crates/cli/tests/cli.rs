use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boolinf::harness::{read_aggregate_csv, read_plot_csv, read_runs_csv, read_trajectory_csv};
use boolinf_cli::commands::{read_pairs, RESOLVED_CONFIG};
use boolinf_cli::config::Config;

fn boolinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boolinf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with(config: &str, cmd: &str, extra: &[&str]) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let output = boolinf(&args);
    (dir, output)
}

fn out_dir(dir: &tempfile::TempDir) -> PathBuf {
    dir.path().join("out")
}

fn reader(path: &Path) -> std::io::BufReader<fs::File> {
    std::io::BufReader::new(fs::File::open(path).unwrap())
}

fn influences(dir: &Path) -> Vec<f64> {
    read_pairs(&dir.join("influence.csv"))
        .unwrap()
        .into_iter()
        .map(|(_, v)| v)
        .collect()
}

#[test]
fn analyze_two_window_example() {
    let cfg = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/two_window.cfg")).unwrap();
    let (dir, o) = run_with(&cfg, "analyze", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // the pointer flips the output exactly when x2 != x4
    assert_eq!(influences(&out_dir(&dir)), vec![0.5, 0.5, 1.0, 0.5]);
    let stab = read_pairs(&out_dir(&dir).join("stability.csv")).unwrap();
    assert_eq!(stab.len(), 21);
    assert_eq!(stab[0], ("0.0".to_string(), 1.0));
    let weights = read_pairs(&out_dir(&dir).join("degree_weights.csv")).unwrap();
    assert!((weights.iter().map(|w| w.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn analyze_four_pointer_bit_influences() {
    for (agg, w, want) in [
        ("min", 2, 0.0625),
        ("parity", 3, 0.1875),
        ("majority", 3, 0.09375),
        ("majority", 4, 0.046875),
    ] {
        let cfg = format!("pvr.p = 4\npvr.mode = cyclic\npvr.agg = {agg}\npvr.w = {w}\n");
        let (dir, o) = run_with(&cfg, "analyze", &[]);
        assert!(o.status.success());
        let inf = influences(&out_dir(&dir));
        assert_eq!(inf.len(), 20);
        assert!(inf[4..].iter().all(|v| (v - want).abs() < 1e-12), "{agg} w={w}: {:?}", &inf[4..]);
    }
}

#[test]
fn analyze_constant_target_has_zero_influence() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("const.csv");
    fs::write(&spec, "subset_mask,coefficient\n0,2.5\n").unwrap();
    let cfg = format!("task = spectrum\nspectrum.file = {}\nspectrum.n = 3\n", spec.display());
    let (d, o) = run_with(&cfg, "analyze", &[]);
    assert!(o.status.success());
    assert_eq!(influences(&out_dir(&d)), vec![0.0; 3]);
    let s = read_pairs(&out_dir(&d).join("spectrum.csv")).unwrap();
    assert_eq!(s, vec![("0".to_string(), 2.5)]);
}

#[test]
fn config_errors_exit_one() {
    for cfg in [
        "pvr.q = 3\n",
        "pvr.p 3\n",
        "task = ramp\nramp.n = 25\n",
        "pvr.p = 5\n",
        "pvr.mode = sideways\n",
        "opt.lr = -1\n",
        "holdout.k = 30\n",
        "model.depth = 2, x\n",
    ] {
        let (_d, o) = run_with(cfg, "analyze", &[]);
        assert_eq!(o.status.code(), Some(1), "{cfg}");
        assert!(!o.stderr.is_empty());
    }
    let (_d, o) = run_with("holdout.k = 4..=6\n", "train", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(boolinf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(boolinf(&["analyze", "--config", "/nonexistent/x.cfg"]).status.code(), Some(1));
}

const SMOKE: &str = "pvr.p = 2\npvr.w = 2\npvr.agg = parity\nholdout.k = 3\nmodel.hidden = 8\n\
train.epochs = 2\ntrain.dataset = 128\nopt.batch = 32\nrepeats = 1\n";

#[test]
fn train_smoke_run() {
    let (dir, o) = run_with(SMOKE, "train", &["--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = out_dir(&dir);
    let text = fs::read_to_string(out.join("runs.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("frozen_index,seed,steps,gen_error_ood,gen_error_id,influence,wall_time_s")
    );
    assert_eq!(lines.count(), 1);
    let runs = read_runs_csv(reader(&out.join("runs.csv"))).unwrap();
    assert_eq!((runs[0].frozen_index, runs[0].seed, runs[0].steps), (3, 11, 8));
    assert_eq!(runs[0].influence, 0.5);
    let traj = read_trajectory_csv(reader(&out.join("trajectory.csv"))).unwrap();
    assert!(!traj.is_empty());

    let echoed = Config::load(&out.join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(echoed.raw("seed"), "11");
    assert_eq!(echoed.raw("model.hidden"), "8");
}

#[test]
fn sweep_smoke_writes_parseable_files() {
    let (dir, o) = run_with(SMOKE, "sweep", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = out_dir(&dir);
    let runs = read_runs_csv(reader(&out.join("runs.csv"))).unwrap();
    assert_eq!(runs.len(), 1);
    let agg = read_aggregate_csv(reader(&out.join("aggregate.csv"))).unwrap();
    assert_eq!(agg.len(), 1);
    assert_eq!(agg[0].mean_gen_error_ood, runs[0].gen_error_ood);
    let plot = read_plot_csv(reader(&out.join("plot.csv"))).unwrap();
    assert_eq!(plot[0].x, 3.0);
    assert!(out.join("trajectories/k3_r0.csv").exists());
}

#[test]
fn window_size_axis_plot_has_closed_form_influences() {
    let cfg = "pvr.p = 3\npvr.w = 1, 2, 3, 4\npvr.mode = cyclic\npvr.agg = majority\nholdout.k = 4\n\
model.hidden = 4\ntrain.epochs = 1\ntrain.dataset = 64\ntrain.tracked = none\nplot.svg = true\n";
    let (dir, o) = run_with(cfg, "sweep", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = out_dir(&dir);
    let plot = read_plot_csv(reader(&out.join("plot_pvr_w.csv"))).unwrap();
    let xs: Vec<f64> = plot.iter().map(|p| p.x).collect();
    let inf: Vec<f64> = plot.iter().map(|p| p.influence).collect();
    assert_eq!(xs, vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(inf, vec![0.125, 0.0625, 0.1875, 0.09375]);
    assert!(fs::read_to_string(out.join("plot_pvr_w.svg")).unwrap().starts_with("<svg"));
    assert!(out.join("runs_pvr_w_3.csv").exists());
}

#[test]
fn depth_and_init_axes_give_two_plots() {
    let cfg = "task = ramp\nramp.n = 4\nholdout.k = 1..=4\nmodel.kind = deep_linear\nmodel.width = 4\n\
model.depth = 3, 1, 2, 4\nmodel.alpha = 0.5, 2.5\nopt.lr = 0.001\ntrain.epochs = 1\ntrain.dataset = full\n\
train.tracked = none\n";
    let (dir, o) = run_with(cfg, "sweep", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = out_dir(&dir);
    let depth = read_plot_csv(reader(&out.join("plot_model_depth.csv"))).unwrap();
    let alpha = read_plot_csv(reader(&out.join("plot_model_alpha.csv"))).unwrap();
    assert_eq!(depth.iter().map(|p| p.x).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(alpha.iter().map(|p| p.x).collect::<Vec<_>>(), vec![0.5, 2.5]);
    assert!(!out.join("plot.csv").exists());
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn sweep_output_is_identical_across_thread_counts() {
    let cfg = "pvr.p = 2\npvr.w = 2\npvr.agg = majority\nholdout.k = all\nmodel.hidden = 8, 4\n\
train.epochs = 2\ntrain.dataset = 128\nopt.batch = 16\nrepeats = 2\nseed = 5\n";
    let (a, oa) = run_with(cfg, "sweep", &["--threads", "1"]);
    let (b, ob) = run_with(cfg, "sweep", &["--threads", "3"]);
    assert!(oa.status.success() && ob.status.success());
    let fa = csv_files(&out_dir(&a));
    assert!(fa.len() > 3);
    assert_eq!(fa, csv_files(&out_dir(&b)));
}

#[test]
fn cp_on_extended_dictator_meets_stability_bound() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("dict.csv");
    fs::write(&spec, "1,1.0\n").unwrap();
    let cfg = format!("task = spectrum\nspectrum.file = {}\nspectrum.n = 2\ncp.extend = 4\n", spec.display());
    let (d, o) = run_with(&cfg, "cp", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out_dir(&d).join("cp_stab.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    // dictator on 4 coordinates: orbit correlation 1 with probability 1/4
    let cp = fs::read_to_string(out_dir(&d).join("cp.csv")).unwrap();
    assert_eq!(cp.lines().nth(1), Some("4,0.25,0.0"));
}

#[test]
fn inal_reports_every_hidden_neuron() {
    let cfg = "pvr.p = 1\npvr.w = 1\nmodel.hidden = 5, 3\ninal.samples = 8\n";
    let (d, o) = run_with(cfg, "inal", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out_dir(&d).join("inal.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 + 3);
}

#[test]
fn verify_passes_and_reports_known_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let o = boolinf(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(report.contains("PASS closed_form_influence"));
    assert!(report.contains("PASS pvr_stability_factorized"));
    assert!(report.contains("NOTE pvr_stability_two_term"));
    assert!(!report.contains("FAIL"));
}
