//! Subcommand bodies. Every command writes into its output directory and
//! returns the manifest it wrote there, so `verify --manifest` can rerun it
//! and compare hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use anifd::analysis::{
    interior_minimum, lp_monotonicity, marginal_heat_check, samples_from_trajectory, smoothing_fit, ssni_check,
};
use anifd::barriers::{
    eval_capped, eval_lower, eval_upper, sample_box, sample_outer_domain, select_lower_params, select_upper_params,
    stationary_residual, FdStep, LowerProfile, UpperProfile,
};
use anifd::config::RunConfig;
use anifd::contour::export_levels as contour_levels;
use anifd::exponents::{validate_params, ExponentSet};
use anifd::grid::Field;
use anifd::io::{
    format_float as num,
    read_field_csv, write_contours_csv, write_diagnostics_csv, write_field_csv, write_file, write_rescaled_csv,
    CheckOutcome, RunManifest,
};
use anifd::rescaled::{
    attraction_check, evolve_rescaled, from_selfsimilar, relax_with_run, tail_fit_detailed, to_selfsimilar,
    RescaledState, DEFAULT_TAIL_WINDOW,
};
use anifd::solver::{energy_check, init_data, run, InitKind};

/// Relative tolerance of the L^p monotonicity check.
const LP_TOL: f64 = 1e-10;
/// Relative tolerance of the energy inequality.
const ENERGY_TOL: f64 = 1e-3;
/// Finite-difference step of the barrier sign sample.
const FD_H: f64 = 1e-3;

pub fn passed(m: &RunManifest) -> bool {
    m.checks.iter().all(|c| c.passed)
}

fn check(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.into(), passed, detail }
}

struct Timer(BTreeMap<String, f64>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(BTreeMap::new(), Instant::now())
    }

    fn lap(&mut self, phase: &str) {
        self.0.insert(phase.into(), self.1.elapsed().as_secs_f64());
        self.1 = Instant::now();
    }
}

fn finish(mut m: RunManifest, dir: &Path, files: &[PathBuf], timer: Timer) -> Result<RunManifest> {
    for f in files {
        m.add_output(f)?;
    }
    m.timings = timer.0;
    m.write(dir)?;
    for c in &m.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} files and manifest.json to {}", files.len(), dir.display());
    Ok(m)
}

fn threads() -> usize {
    rayon::current_num_threads()
}

fn json_file(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    Ok(write_file(dir, name, |buf| {
        serde_json::to_writer_pretty(&mut *buf, value).map_err(|e| anifd::Error::Io(e.to_string()))?;
        buf.push(b'\n');
        Ok(())
    })?)
}

// ---------------------------------------------------------------------------

pub fn exponent_table(e: &ExponentSet) -> String {
    let mut s = format!("N = {}, m = {:?}\n", e.n, e.m);
    s += &format!("alpha = {}\nm_bar = {}\nm_c = {}\nbeta = {}\n", e.alpha, e.mbar, e.mc, e.beta);
    s += "axis  m_i  sigma_i  a_i  gamma_i\n";
    for i in 0..e.n {
        s += &format!("{i}  {}  {}  {}  {}\n", e.m[i], e.sigma[i], e.a[i], e.gamma_stat[i]);
    }
    s
}

pub fn exponents(cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let mut timer = Timer::new();
    let e = cfg.exponents()?;
    let report = validate_params(&cfg.model)?;
    print!("{}", exponent_table(&e));
    let file = json_file(dir, "exponents.json", &json!({ "exponents": e, "validation": report }))?;
    let mut m = RunManifest::new("exponents", cfg, threads())?;
    let err = e.identity_error();
    m.checks.push(check("exponent identities", err <= 1e-12, format!("max identity error {err:.1e}")));
    timer.lap("exponents");
    finish(m, dir, &[file], timer)
}

// ---------------------------------------------------------------------------

pub fn barriers(cfg: &RunConfig, dir: &Path, slack: f64, samples: usize) -> Result<RunManifest> {
    let mut timer = Timer::new();
    let e = cfg.exponents()?;
    let mut m = RunManifest::new(&format!("barriers --slack {slack} --samples {samples}"), cfg, threads())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let up = select_upper_params(&e, slack)?;
    let lo = select_lower_params(&e, slack).ok();
    let n = e.n;

    let mut rows = csv_rows_header(n);
    let step = FdStep::Relative(FD_H);
    let mut upper_bad = 0;
    for y in sample_outer_domain(&up, samples, 3.0, &mut rng) {
        let r = stationary_residual(&UpperProfile(&up), &e, &y, step)?;
        let ok = r.value <= r.tolerance(FD_H);
        upper_bad += usize::from(!ok);
        rows.push(sign_row("upper", &y, r.value, r.tolerance(FD_H), ok));
    }
    m.checks.push(check(
        "upper barrier supersolution",
        upper_bad == 0,
        format!("{upper_bad}/{samples} outer-domain points with residual above tolerance"),
    ));
    if let Some(lo) = &lo {
        let hw = cfg.half_width.iter().copied().fold(0.0, f64::max);
        let mut lower_bad = 0;
        let mut count = 0;
        while count < samples {
            let y = sample_box(n, hw, 0.0, 1, &mut rng).pop().expect("one point");
            // stay off the coordinate hyperplanes, where the profile has a kink
            if y.iter().any(|v| v.abs() < 10.0 * FD_H) {
                continue;
            }
            let r = stationary_residual(&LowerProfile(lo), &e, &y, step)?;
            let ok = r.value >= -r.tolerance(FD_H);
            lower_bad += usize::from(!ok);
            rows.push(sign_row("lower", &y, r.value, r.tolerance(FD_H), ok));
            count += 1;
        }
        m.checks.push(check(
            "lower barrier subsolution",
            lower_bad == 0,
            format!("{lower_bad}/{samples} box points with residual below -tolerance (A = {:.4e} = 2 A0)", lo.a),
        ));
    }
    timer.lap("sign sample");
    let signs = write_file(dir, "residual_signs.csv", |buf| write_rows(buf, &rows))?;

    let mut sections = vec![vec!["axis".to_string(), "y".into(), "upper".into(), "upper_capped".into(), "lower".into()]];
    for axis in 0..n {
        let l = cfg.half_width[axis];
        for j in 0..=200 {
            let mut y = vec![0.0; n];
            y[axis] = l * j as f64 / 200.0;
            let lower = lo.as_ref().map_or(String::new(), |lo| num(eval_lower(lo, &y)));
            let upper = eval_upper(&up, &y).map_or(String::new(), num);
            sections.push(vec![axis.to_string(), num(y[axis]), upper, num(eval_capped(&up, &y)), lower]);
        }
    }
    let cross = write_file(dir, "cross_sections.csv", |buf| write_rows(buf, &sections))?;
    let specs = json_file(
        dir,
        "barriers.json",
        &json!({ "slack": slack, "upper": up, "lower": lo, "a0": lo.as_ref().map(|l| l.a0) }),
    )?;
    println!("upper: delta = {}, theta = {:?}, r = {:.4e}", up.delta, up.theta, up.r);
    if let Some(lo) = &lo {
        println!("lower: gamma = {}, vartheta = {:?}, A0 = {:.4e}, A = {:.4e}", lo.gamma, lo.vartheta, lo.a0, lo.a);
    } else {
        println!("lower: not available with a linear axis");
    }
    timer.lap("output");
    finish(m, dir, &[specs, signs, cross], timer)
}

fn csv_rows_header(n: usize) -> Vec<Vec<String>> {
    let mut h = vec!["barrier".to_string()];
    h.extend((0..n).map(|i| format!("y{i}")));
    h.extend(["residual".into(), "tolerance".into(), "ok".into()]);
    vec![h]
}

fn sign_row(kind: &str, y: &[f64], value: f64, tol: f64, ok: bool) -> Vec<String> {
    let mut r = vec![kind.to_string()];
    r.extend(y.iter().map(|v| num(*v)));
    r.extend([num(value), num(tol), ok.to_string()]);
    r
}

fn write_rows(buf: &mut Vec<u8>, rows: &[Vec<String>]) -> anifd::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    for r in rows {
        w.write_record(r).map_err(|e| anifd::Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------

fn initial(cfg: &RunConfig) -> Result<Field> {
    let g = cfg.grid()?;
    Ok(init_data(&cfg.init, cfg.mass, &g)?)
}

pub fn evolve(cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let mut timer = Timer::new();
    let e = cfg.exponents()?;
    let mut m = RunManifest::new("evolve", cfg, threads())?;
    let u0 = initial(cfg)?;
    timer.lap("init");
    let traj = run(&u0, &cfg.solver, &e)?;
    timer.lap("solve");

    let mut files = Vec::new();
    let mut index = vec![vec!["file".to_string(), "time".into()]];
    for (k, f) in traj.snapshots.iter().enumerate() {
        let name = format!("field_{k:04}.csv");
        files.push(write_file(dir, &name, |buf| write_field_csv(f, buf))?);
        index.push(vec![name, num(f.time)]);
    }
    files.push(write_file(dir, "snapshots.csv", |buf| write_rows(buf, &index))?);
    files.push(write_file(dir, "diagnostics.csv", |buf| write_diagnostics_csv(&traj.diagnostics, buf))?);
    timer.lap("output");

    for (p, inc) in lp_monotonicity(&traj) {
        m.checks.push(check(
            &format!("L^{p} norm nonincreasing"),
            inc <= LP_TOL,
            format!("largest relative increase between records {inc:.1e} (<= {LP_TOL:.0e})"),
        ));
    }
    for r in energy_check(&traj.diagnostics) {
        m.checks.push(check(
            &format!("energy inequality, axis {}", r.axis),
            r.holds(ENERGY_TOL),
            format!("dissipation {:.6e}, budget {:.6e}, relative violation {:.1e}", r.dissipation, r.budget, r.relative_violation),
        ));
    }
    let min = traj.snapshots.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
    m.checks.push(check("nonnegativity", min >= 0.0, format!("smallest value {min:.3e}")));
    if is_ssni(&u0) {
        let mut sym: f64 = 0.0;
        let mut viol = 0;
        for f in &traj.snapshots {
            let r = ssni_check(f, 1e-12)?;
            sym = sym.max(r.symmetry_error);
            viol += r.violations;
        }
        m.checks.push(check(
            "SSNI preservation",
            sym <= 1e-10 && viol == 0,
            format!("symmetry error {sym:.1e}, monotonicity violations {viol}"),
        ));
    }
    // needs records spanning 1.5 decades of positive time
    let t_first = traj.snapshots.iter().map(|f| f.time).find(|t| *t > 0.0).unwrap_or(0.0);
    if let Ok(fit) = smoothing_fit(&samples_from_trajectory(&traj), t_first, cfg.solver.t_end, &e) {
        m.c1_estimate = Some(fit.c1_estimate);
        println!("L^inf decay slope {:.4} (-alpha = {:.4}), C1 estimate {:.4e}", fit.slope, -e.alpha, fit.c1_estimate);
    }
    let last = traj.last();
    println!(
        "t = {}, steps = {}, mass = {:.10}, max = {:.6e}, interior min = {:.3e}",
        last.time,
        traj.diagnostics.records.last().map_or(0, |r| r.steps),
        last.mass(),
        last.max(),
        interior_minimum(last, 4)
    );
    finish(m, dir, &files, timer)
}

fn is_ssni(f: &Field) -> bool {
    ssni_check(f, 1e-12).map(|r| r.symmetry_error <= 1e-12 && r.violations == 0).unwrap_or(false)
}

// ---------------------------------------------------------------------------

fn rescaled_start(cfg: &RunConfig, e: &ExponentSet, data: &Field) -> Result<RescaledState> {
    Ok(to_selfsimilar(data, cfg.t0, e, Some(&data.grid))?)
}

pub fn relax(cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let mut timer = Timer::new();
    let e = cfg.exponents()?;
    let mut m = RunManifest::new("relax", cfg, threads())?;
    let s0 = rescaled_start(cfg, &e, &initial(cfg)?)?;
    let (est, run) = relax_with_run(&s0, &cfg.rescaled, &e)?;
    timer.lap("relax");

    let profile = write_file(dir, "profile.csv", |buf| write_field_csv(&est.profile, buf))?;
    let records = write_file(dir, "rescaled.csv", |buf| write_rescaled_csv(&run.records, buf))?;
    let mut tails = Vec::new();
    for i in 0..e.n {
        let fit = tail_fit_detailed(&est.profile, i, DEFAULT_TAIL_WINDOW).ok();
        let sharp = if e.is_linear_axis(i) { None } else { Some(-2.0 / (1.0 - e.m[i])) };
        if let (Some(f), Some(s)) = (&fit, sharp) {
            let (lo, hi) = (s - 0.3, s + 1.0);
            m.checks.push(check(
                &format!("tail sharpness, axis {i}"),
                f.fit.slope >= lo && f.fit.slope <= hi,
                format!("slope {:.3} in [{lo:.2}, {hi:.2}]", f.fit.slope),
            ));
        }
        tails.push(json!({ "axis": i, "sharp_slope": sharp, "fit": fit }));
    }
    let tails_file = json_file(dir, "tails.json", &json!({ "window": DEFAULT_TAIL_WINDOW, "axes": tails }))?;
    m.checks.push(check(
        "steady state reached",
        est.converged,
        format!("increment rate {:.2e} at tau {:.2} after {} steps", est.residual_l1, est.tau, est.steps),
    ));
    let drift = (est.mass - s0.v.mass()).abs() / s0.v.mass();
    m.checks.push(check("mass conservation", drift <= 1e-8, format!("relative mass drift {drift:.1e}")));
    if e.m.iter().any(|mi| *mi == 1.0) {
        let r = marginal_heat_check(&est.profile, &e)?;
        m.checks.push(check(
            "heat-kernel marginal",
            r.relative_l1_error <= 0.03,
            format!("axis {} marginal L1 error {:.2e} (<= 3e-2)", r.axis, r.relative_l1_error),
        ));
    }
    timer.lap("output");
    finish(m, dir, &[profile, records, tails_file], timer)
}

// ---------------------------------------------------------------------------

/// Times at which `t^alpha ||u - U_M||_inf` is sampled.
pub const ATTRACTION_TIMES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

pub fn verify_attraction(cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let mut timer = Timer::new();
    let e = cfg.exponents()?;
    let mut m = RunManifest::new("verify-attraction", cfg, threads())?;
    let g = cfg.grid()?;
    let u0 = initial(cfg)?;
    // reference profile from centred data of the same mass
    let centred = init_data(&InitKind::Bump { center: vec![0.0; e.n], radii: vec![1.0; e.n] }, cfg.mass, &g)?;
    let (reference, _) = relax_with_run(&RescaledState::new(centred, 0.0, 1.0), &cfg.rescaled, &e)?;
    timer.lap("reference");

    // evolve with shift 1, then view each state with shift 0
    let mut s = RescaledState::new(u0, 0.0, 1.0);
    let mut states = Vec::new();
    for t in ATTRACTION_TIMES {
        let run = evolve_rescaled(&s, &cfg.rescaled, &e, (t + 1.0).ln() - s.tau)?;
        s = run.last().clone();
        let u = from_selfsimilar(&s, &e, None)?;
        states.push(to_selfsimilar(&u, 0.0, &e, Some(&g))?);
    }
    let rep = attraction_check(&states, &reference.profile)?;
    timer.lap("evolve");

    let mut rows = vec![vec!["t".to_string(), "weighted_linf".into(), "l1".into()]];
    for k in 0..rep.times.len() {
        rows.push(vec![num(rep.times[k]), num(rep.weighted_linf[k]), num(rep.l1[k])]);
    }
    let file = write_file(dir, "attraction.csv", |buf| write_rows(buf, &rows))?;
    let first = rep.weighted_linf.first().copied().unwrap_or(f64::NAN);
    let last = rep.weighted_linf.last().copied().unwrap_or(f64::NAN);
    let drop = 1.0 - last / first;
    m.checks.push(check(
        "attraction to the self-similar profile",
        drop >= 0.5,
        format!("t^alpha ||u - U_M||_inf: {first:.3e} at t=1 -> {last:.3e} at t=16 ({:.0}% decrease, >= 50%)", 100.0 * drop),
    ));
    m.checks.push(check(
        "reference profile converged",
        reference.converged,
        format!("increment rate {:.2e} at tau {:.2}", reference.residual_l1, reference.tau),
    ));
    timer.lap("output");
    finish(m, dir, &[file], timer)
}

// ---------------------------------------------------------------------------

pub fn export_levels(dir: &Path, field: Option<&Path>, levels: &[f64]) -> Result<PathBuf> {
    let path = field.map(Path::to_path_buf).unwrap_or_else(|| dir.join("profile.csv"));
    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let f = read_field_csv(file).with_context(|| format!("reading {}", path.display()))?;
    let levels: Vec<f64> = if levels.is_empty() {
        // five levels spread geometrically below the maximum
        (1..=5).map(|k| f.max() * 0.5f64.powi(2 * k - 1)).collect()
    } else {
        levels.to_vec()
    };
    let ls = contour_levels(&f, &levels)?;
    for w in &ls.warnings {
        eprintln!("warning: {w}");
    }
    for c in &ls.contours {
        let closed = c.polylines.iter().filter(|p| p.closed).count();
        println!("level {}: {} polylines ({closed} closed)", c.level, c.polylines.len());
    }
    let out = write_file(dir, "contours.csv", |buf| write_contours_csv(&ls, buf))?;
    println!("wrote {}", out.display());
    Ok(out)
}

// ---------------------------------------------------------------------------

pub const SUITES: [&str; 6] = ["exponents", "barriers", "evolve", "relax", "attraction", "all"];

fn rerun(command: &str, cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let words: Vec<&str> = command.split_whitespace().collect();
    match words.as_slice() {
        ["exponents"] => exponents(cfg, dir),
        ["evolve"] => evolve(cfg, dir),
        ["relax"] => relax(cfg, dir),
        ["verify-attraction"] => verify_attraction(cfg, dir),
        ["barriers", "--slack", s, "--samples", n] => barriers(cfg, dir, s.parse()?, n.parse()?),
        _ => bail!("manifest command `{command}` cannot be rerun"),
    }
}

/// Run `suite`; with a manifest, reuse its config, rerun its command and
/// require identical output hashes. Writes `report.json` into `dir`.
pub fn verify(cfg: &RunConfig, dir: &Path, suite: &str, manifest: Option<&Path>) -> Result<bool> {
    if !SUITES.contains(&suite) {
        bail!("unknown suite `{suite}` (expected one of {})", SUITES.join(", "));
    }
    let stored = manifest.map(RunManifest::read).transpose()?;
    let cfg = stored.as_ref().map_or_else(|| cfg.clone(), |m| m.config.clone());
    let mut checks: Vec<(String, CheckOutcome)> = Vec::new();
    fn push(checks: &mut Vec<(String, CheckOutcome)>, label: &str, m: &RunManifest) {
        checks.extend(m.checks.iter().map(|c| (label.to_string(), c.clone())));
    }

    if let Some(stored) = &stored {
        let sub = dir.join("rerun");
        let fresh = rerun(&stored.command, &cfg, &sub)?;
        let mut mismatched = Vec::new();
        for o in &stored.outputs {
            match fresh.outputs.iter().find(|f| f.path == o.path) {
                Some(f) if f.sha256 == o.sha256 => {}
                _ => mismatched.push(o.path.clone()),
            }
        }
        let detail = if stored.threads != fresh.threads {
            format!("{} mismatched of {} (stored with {} threads, rerun with {})", mismatched.len(), stored.outputs.len(), stored.threads, fresh.threads)
        } else {
            format!("{} mismatched of {}", mismatched.len(), stored.outputs.len())
        };
        let detail = if mismatched.is_empty() { detail } else { format!("{detail}: {}", mismatched.join(", ")) };
        checks.push((
            "rerun".into(),
            check("byte-identical outputs", mismatched.is_empty() && stored.input_hash == fresh.input_hash, detail),
        ));
        push(&mut checks, &stored.command, &fresh);
    }

    let want = |s: &str| suite == s || suite == "all";
    if want("exponents") {
        push(&mut checks, "exponents", &exponents(&cfg, &dir.join("exponents"))?);
    }
    if want("barriers") {
        let m = barriers(&cfg, &dir.join("barriers"), anifd::barriers::DEFAULT_SLACK, 1000)?;
        push(&mut checks, "barriers", &m);
    }
    if want("evolve") {
        push(&mut checks, "evolve", &evolve(&cfg, &dir.join("evolve"))?);
    }
    if want("relax") {
        push(&mut checks, "relax", &relax(&cfg, &dir.join("relax"))?);
    }
    if want("attraction") {
        push(&mut checks, "attraction", &verify_attraction(&cfg, &dir.join("attraction"))?);
    }

    let failed: Vec<&(String, CheckOutcome)> = checks.iter().filter(|(_, c)| !c.passed).collect();
    let report = json!({
        "suite": suite,
        "manifest": manifest.map(|p| p.display().to_string()),
        "passed": failed.is_empty(),
        "checks": checks.iter().map(|(g, c)| json!({ "group": g, "name": c.name, "passed": c.passed, "detail": c.detail })).collect::<Vec<_>>(),
    });
    json_file(dir, "report.json", &report)?;
    println!();
    println!("suite `{suite}`: {}/{} checks passed", checks.len() - failed.len(), checks.len());
    for (g, c) in &failed {
        println!("FAILED [{g}] {}: {}", c.name, c.detail);
    }
    if checks.is_empty() {
        return Err(anyhow!("suite `{suite}` ran no checks"));
    }
    Ok(failed.is_empty())
}
