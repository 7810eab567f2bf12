use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use bipgo::eval::{match_cameras, write_report_csv, ErrorReport};
use bipgo::geom::{KAPPA_NOISELESS, TAU_NOISELESS};
use bipgo::io::{
    parse_edges, parse_graph, parse_object, parse_poses, write_graph, write_object, write_poses,
};
use bipgo::pipeline::{solve_poses, PipelineConfig, PipelineResult};
use bipgo::rotsync::{calibrate_object, SolverConfig};
use bipgo::synth::{builtin_cube, generate_scene_with, ObjectSource, SceneConfig};

use crate::{BenchArgs, CalibrateArgs, EvalArgs, GenerateArgs, Outcome, SolveArgs, SolverArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Everything needed to rerun a command. Wall-clock timings live in a
/// separate file so replays compare byte for byte.
fn manifest(
    command: &str,
    config: Value,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[PathBuf],
) -> Value {
    json!({
        "tool": "bipgo",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": std::env::args().skip(1).collect::<Vec<_>>(),
        "config": config,
        "seed": seed,
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    })
}

fn solver_config(a: &SolverArgs) -> SolverConfig {
    SolverConfig {
        delta: a.delta,
        max_outer: a.max_outer,
        max_inner: a.max_inner,
        ..SolverConfig::default()
    }
}

fn solver_json(c: &SolverConfig) -> Value {
    json!({
        "delta": c.delta,
        "max_outer": c.max_outer,
        "max_inner": c.max_inner,
        "eig_tol": c.eig_tol,
        "certificate_tol": c.certificate_tol,
        "seed": c.seed,
    })
}

fn scene_config(a: &GenerateArgs) -> Result<(SceneConfig, Option<PathBuf>)> {
    let mut cfg = match (&a.preset, &a.config) {
        (Some(name), _) => (SceneConfig::preset(name)?, None),
        (None, Some(path)) => {
            let cfg =
                SceneConfig::parse(&read(path)?).with_context(|| path.display().to_string())?;
            (cfg, Some(path.clone()))
        }
        (None, None) => unreachable!("clap requires --preset or --config"),
    };
    if let Some(s) = a.seed {
        cfg.0.seed = s;
    }
    if let Some(t) = a.times {
        cfg.0.times = t;
    }
    if let Some(k) = a.kappa {
        cfg.0.noise.kappa = k;
    }
    if let Some(t) = a.tau {
        cfg.0.noise.tau = t;
    }
    if a.noiseless {
        cfg.0.noise.kappa = KAPPA_NOISELESS;
        cfg.0.noise.tau = TAU_NOISELESS;
    }
    cfg.0.validate()?;
    Ok(cfg)
}

pub fn generate(a: &GenerateArgs) -> Result<Outcome> {
    let (cfg, config_path) = scene_config(a)?;
    let (object, object_path) = match &cfg.object {
        ObjectSource::BuiltinCube => (builtin_cube(), None),
        ObjectSource::File(p) => {
            let base = config_path
                .as_deref()
                .and_then(Path::parent)
                .unwrap_or(Path::new("."));
            let path = base.join(p);
            (
                parse_object(&read(&path)?).with_context(|| path.display().to_string())?,
                Some(path),
            )
        }
    };
    let start = Instant::now();
    let (truth, g) = generate_scene_with(&cfg, &object)?;
    log::info!(
        "generated {} edges in {:.3}s",
        g.edges().len(),
        start.elapsed().as_secs_f64()
    );

    out_dir(&a.out)?;
    let files = ["graph.txt", "object.txt", "truth.txt"].map(|f| a.out.join(f));
    write(&files[0], &write_graph(&g))?;
    write(&files[1], &write_object(&object))?;
    write(&files[2], &write_poses(&truth))?;
    let inputs: Vec<&Path> = config_path
        .iter()
        .chain(&object_path)
        .map(PathBuf::as_path)
        .collect();
    let m = manifest(
        "generate",
        Value::String(cfg.to_text()),
        Some(cfg.seed),
        &inputs,
        &files,
    );
    write_json(&a.out.join("manifest.json"), &m)?;
    Ok(Outcome::Ok)
}

fn outcome(converged: bool, certified: bool) -> Outcome {
    match (converged, certified) {
        (false, _) => Outcome::NotConverged,
        (true, false) => Outcome::Uncertified,
        (true, true) => Outcome::Ok,
    }
}

fn status_json(res: &PipelineResult, anchor: usize) -> Value {
    let rot = &res.rotation;
    json!({
        "certified": rot.certificate.certified,
        "converged": rot.converged,
        "iterations": rot.iterations,
        "inner_iterations": rot.inner_iterations,
        "min_eig": rot.certificate.min_eig,
        "certificate_threshold": rot.certificate.threshold,
        "kkt_residual": rot.kkt_residual,
        "cost": rot.cost,
        "lambda3_history": rot.lambda3_history,
        "dual_trace_history": rot.dual_trace_history,
        "cameras": res.graph.num_cameras(),
        "times": res.graph.num_times(),
        "edges": res.graph.edges().len(),
        "removed_cameras": res.pruned.removed_cameras,
        "removed_times": res.pruned.removed_times,
        "anchor": anchor,
        "translation_iterations": res.translation.iterations,
        "translation_relative_gradient": res.translation.relative_gradient,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn timings_json(res: &PipelineResult) -> Value {
    json!({
        "rotation_seconds": res.rotation_seconds,
        "translation_seconds": res.translation_seconds,
        "seconds_per_iteration": mean(&res.rotation.iteration_seconds),
        "iteration_seconds": res.rotation.iteration_seconds,
    })
}

pub fn solve(a: &SolveArgs) -> Result<Outcome> {
    let object = parse_object(&read(&a.object)?).with_context(|| a.object.display().to_string())?;
    let g =
        parse_graph(&read(&a.graph)?, &object).with_context(|| a.graph.display().to_string())?;
    let cfg = PipelineConfig {
        solver: solver_config(&a.solver),
        anchor: a.anchor,
        stream: a.stream,
        ..PipelineConfig::default()
    };
    let res = solve_poses(&g, &cfg)?;
    let anchor = a.anchor.unwrap_or(res.graph.cameras()[0]);

    out_dir(&a.out)?;
    let files = ["poses.txt", "status.json"].map(|f| a.out.join(f));
    write(&files[0], &write_poses(&res.poses))?;
    write_json(&files[1], &status_json(&res, anchor))?;
    write_json(&a.out.join("timings.json"), &timings_json(&res))?;
    let config = json!({
        "solver": solver_json(&cfg.solver),
        "anchor": a.anchor,
        "stream": a.stream,
        "cg_tol": cfg.cg_tol,
        "cg_max_iter": cfg.cg_max_iter,
    });
    let m = manifest(
        "solve",
        config,
        Some(cfg.solver.seed),
        &[&a.graph, &a.object],
        &files,
    );
    write_json(&a.out.join("manifest.json"), &m)?;
    Ok(outcome(
        res.rotation.converged,
        res.rotation.certificate.certified,
    ))
}

pub fn calibrate(a: &CalibrateArgs) -> Result<Outcome> {
    let views = parse_edges(&read(&a.views)?).with_context(|| a.views.display().to_string())?;
    let reference = match a.reference {
        Some(r) => r,
        None => views
            .iter()
            .map(|e| e.marker)
            .min()
            .ok_or(bipgo::error::Error::EmptyGraph)?,
    };
    let cal = calibrate_object(&views, reference, &solver_config(&a.solver))?;
    log::info!(
        "calibrated {} markers: {} outer iterations, {} translation iterations",
        cal.object.len(),
        cal.iterations,
        cal.translation_iterations
    );
    write(&a.out, &write_object(&cal.object))?;
    Ok(outcome(cal.converged, cal.certified))
}

pub fn eval(a: &EvalArgs) -> Result<Outcome> {
    let est = parse_poses(&read(&a.solution)?).with_context(|| a.solution.display().to_string())?;
    let gt = parse_poses(&read(&a.truth)?).with_context(|| a.truth.display().to_string())?;
    let (ids, est_c, gt_c) = match_cameras(&est, &gt)?;
    let (mut edges, mut iterations, mut certified, mut seconds) = (0, 0, false, 0.0);
    if let Some(path) = &a.status {
        let status: Value =
            serde_json::from_str(&read(path)?).with_context(|| path.display().to_string())?;
        edges = status["edges"].as_u64().unwrap_or(0) as usize;
        iterations = status["iterations"].as_u64().unwrap_or(0) as usize;
        certified = status["certified"].as_bool().unwrap_or(false);
        let timings = path.with_file_name("timings.json");
        if let Ok(text) = fs::read_to_string(&timings) {
            let t: Value =
                serde_json::from_str(&text).with_context(|| timings.display().to_string())?;
            seconds = t["seconds_per_iteration"].as_f64().unwrap_or(0.0);
        }
    }
    let report = ErrorReport::new(
        &a.dataset,
        &ids,
        est.objects.len(),
        edges,
        &est_c,
        &gt_c,
        iterations,
        seconds,
        certified,
    );
    let mut csv = Vec::new();
    write_report_csv(std::slice::from_ref(&report), &mut csv)?;
    match &a.out {
        Some(path) => {
            write(path, std::str::from_utf8(&csv)?)?;
            print!("{}", ErrorReport::to_text(&[report]));
        }
        None => print!("{}", String::from_utf8(csv)?),
    }
    Ok(Outcome::Ok)
}

pub fn bench(a: &BenchArgs) -> Result<Outcome> {
    let solver = solver_config(&a.solver);
    let pipeline = PipelineConfig {
        solver: solver.clone(),
        ..PipelineConfig::default()
    };
    let mut reports = Vec::new();
    let mut cells = Vec::new();
    let mut worst = Outcome::Ok;
    // Cells run one after another so that timings are not skewed by each
    // other; each solve is parallel internally.
    for preset in &a.presets {
        for &seed in &a.seeds {
            let mut cfg = SceneConfig {
                seed,
                ..SceneConfig::preset(preset)?
            };
            if let Some(t) = a.times {
                cfg.times = t;
            }
            if a.noiseless {
                cfg.noise.kappa = KAPPA_NOISELESS;
                cfg.noise.tau = TAU_NOISELESS;
            }
            let (truth, g) = generate_scene_with(&cfg, &builtin_cube())?;
            let res = solve_poses(&g, &pipeline)?;
            let (ids, est_c, gt_c) = match_cameras(&res.poses, &truth)?;
            let spi = mean(&res.rotation.iteration_seconds);
            let rot = &res.rotation;
            let name = format!("{preset}/{seed}");
            reports.push(ErrorReport::new(
                &name,
                &ids,
                res.graph.num_times(),
                res.graph.edges().len(),
                &est_c,
                &gt_c,
                rot.iterations,
                spi,
                rot.certificate.certified,
            ));
            let o = outcome(rot.converged, rot.certificate.certified);
            if o != Outcome::Ok && worst != Outcome::NotConverged {
                worst = o;
            }
            cells.push(json!({ "dataset": name, "seconds_per_iteration": spi, "rotation_seconds": res.rotation_seconds, "translation_seconds": res.translation_seconds }));
        }
    }
    out_dir(&a.out)?;
    let csv_path = a.out.join("report.csv");
    let mut csv = Vec::new();
    write_report_csv(&reports, &mut csv)?;
    write(&csv_path, std::str::from_utf8(&csv)?)?;
    print!("{}", ErrorReport::to_text(&reports));

    // Per-iteration time of each preset relative to the first.
    let per_preset: Vec<(String, f64)> = a
        .presets
        .iter()
        .map(|p| {
            let xs: Vec<f64> = reports
                .iter()
                .filter(|r| r.dataset.starts_with(&format!("{p}/")))
                .map(|r| r.seconds_per_iteration)
                .collect();
            (p.clone(), mean(&xs))
        })
        .collect();
    let base = per_preset.first().map_or(0.0, |(_, s)| *s);
    let ratios: Vec<Value> = per_preset
        .iter()
        .map(|(p, s)| json!({ "preset": p, "seconds_per_iteration": s, "ratio": if base > 0.0 { s / base } else { 0.0 } }))
        .collect();
    for (p, s) in &per_preset {
        let ratio = if base > 0.0 { s / base } else { 0.0 };
        println!("{p}: {s:.4} s/it, {ratio:.2}x");
    }
    write_json(
        &a.out.join("timings.json"),
        &json!({ "cells": cells, "ratios": ratios }),
    )?;
    let config = json!({ "presets": a.presets, "seeds": a.seeds, "times": a.times, "noiseless": a.noiseless, "solver": solver_json(&solver) });
    write_json(
        &a.out.join("manifest.json"),
        &manifest("bench", config, None, &[], &[csv_path]),
    )?;
    Ok(worst)
}
