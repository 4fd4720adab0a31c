//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Expensive runs are shared: the anisotropic reference relaxation feeds the
//! tail, uniqueness, positivity and attraction criteria, and every explicit
//! run feeds the energy criterion.

use std::time::Instant;

use anifd::analysis::*;
use anifd::barriers::*;
use anifd::exponents::{compute_exponents, transform_scaling, ExponentSet, ModelParams};
use anifd::grid::{Field, Grid};
use anifd::io::{write_diagnostics_csv, write_field_csv, write_rescaled_csv};
use anifd::rescaled::*;
use anifd::solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Suite {
    results: Vec<(usize, &'static str, Outcome, f64)>,
}

impl Suite {
    fn run(&mut self, id: usize, name: &'static str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "[{}] {id:>2} {name}: {} ({secs:.1} s)",
            if out.passed { "PASS" } else { "FAIL" },
            out.detail
        );
        self.results.push((id, name, out, secs));
    }
}

fn aniso() -> ExponentSet {
    ExponentSet::from_params(2, &[0.6, 0.8]).unwrap()
}

fn iso() -> ExponentSet {
    ExponentSet::from_params(2, &[0.75, 0.75]).unwrap()
}

fn centred_bump(g: &Grid, mass: f64) -> Field {
    init_data(&InitKind::Bump { center: vec![0.0; g.dim()], radii: vec![1.0; g.dim()] }, mass, g).unwrap()
}

// ---------------------------------------------------------------------------
// 1

fn exponent_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 50 {
        let n = rng.gen_range(2..=3usize);
        let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let Ok(e) = compute_exponents(&ModelParams::new(n, m.clone())) else {
            continue;
        };
        // recomputed from the definitions, not from the stored fields
        let mbar = m.iter().sum::<f64>() / n as f64;
        let alpha = n as f64 / (n as f64 * (mbar - 1.0) + 2.0);
        let sigma: Vec<f64> = m.iter().map(|mi| 1.0 / n as f64 + (mbar - mi) / 2.0).collect();
        worst = worst.max((alpha - e.alpha).abs());
        worst = worst.max((e.sigma.iter().sum::<f64>() - 1.0).abs());
        for i in 0..n {
            worst = worst.max((sigma[i] - e.sigma[i]).abs());
            worst = worst.max((e.alpha * (m[i] - 1.0) + 2.0 * e.a[i] - 1.0).abs());
        }
        count += 1;
    }
    outcome(worst <= 1e-12, format!("max identity error {worst:.1e} over {count} parameter sets"))
}

// ---------------------------------------------------------------------------
// 2

fn isotropic_oracle(diags: &mut Vec<RunDiagnostics>) -> Outcome {
    let e = iso();
    let b = Barenblatt::with_mass(2, 0.75, 1.0, BarenblattForm::Classical).unwrap();
    let g = Grid::cube(2, 20.0, 256).unwrap();
    let u1 = b.snapshot(&g, 1.0);
    let traj = run(&u1, &SolverConfig { t_end: 2.0, record_every: 0.25, ..Default::default() }, &e).unwrap();
    let exact = b.snapshot(&g, 2.0);
    let u2 = traj.last();
    let l1 = u2.l1_distance(&exact).unwrap() / exact.mass();
    let linf = u2.linf_distance(&exact).unwrap() / exact.max();
    diags.push(traj.diagnostics);
    outcome(l1 <= 0.01 && linf <= 0.02, format!("relative L1 {l1:.2e} (<= 1e-2), relative Linf {linf:.2e} (<= 2e-2)"))
}

// ---------------------------------------------------------------------------
// 3

// Closed-form stationary operator for (A + sum |y_i|^{q_i})^{-d}.
fn exact_operator(a: f64, d: f64, q: &[f64], e: &ExponentSet, y: &[f64]) -> f64 {
    let s: f64 = a + y.iter().zip(q).map(|(yi, qi)| yi.abs().powf(*qi)).sum::<f64>();
    let f = s.powf(-d);
    // written with ratios to S, whose high negative powers underflow far out
    let mut total = 0.0;
    for i in 0..e.n {
        let u = y[i].abs();
        let (qi, mi) = (q[i], e.m[i]);
        let s1 = qi * u.powf(qi - 1.0) / s;
        let s2 = qi * (qi - 1.0) * u.powf(qi - 2.0) / s;
        let dm = d * mi;
        let diff = f.powf(mi) * (-dm * s2 + dm * (dm + 1.0) * s1 * s1);
        let drift = e.alpha * e.sigma[i] * f * (1.0 - d * qi * u.powf(qi) / s);
        total += diff + drift;
    }
    total
}

fn barrier_signs() -> Outcome {
    let e = aniso();
    let up = select_upper_params(&e, 0.1).unwrap();
    let lo = select_lower_params(&e, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-3;
    let step = FdStep::Relative(h);
    let outer = sample_outer_domain(&up, 1000, 3.0, &mut rng);
    // the stencil must not straddle a coordinate hyperplane, where vartheta_i <= 1 puts a kink
    let mut inner = Vec::new();
    while inner.len() < 1000 {
        let y = sample_box(2, 10.0, 0.0, 1, &mut rng).pop().unwrap();
        if y.iter().all(|v| v.abs() >= 10.0 * h) {
            inner.push(y);
        }
    }
    let upper_profile = UpperProfile(&up);
    let lower_profile = LowerProfile(&lo);
    let mut upper_bad = 0;
    let mut lower_bad = 0;
    for y in &outer {
        let r = stationary_residual(&upper_profile, &e, y, step).unwrap();
        if r.value > r.tolerance(h) {
            upper_bad += 1;
        }
    }
    for y in &inner {
        let r = stationary_residual(&lower_profile, &e, y, step).unwrap();
        if r.value < -r.tolerance(h) {
            lower_bad += 1;
        }
    }
    // finite-difference error against the closed form, h and h/2
    let err = |p: &dyn Profile, a: f64, d: f64, q: &[f64], pts: &[Vec<f64>], h: f64| -> f64 {
        pts.iter()
            .map(|y| {
                let fd = stationary_residual(p, &e, y, FdStep::Relative(h)).unwrap();
                (fd.value - exact_operator(a, d, q, &e, y)).abs() / fd.scale
            })
            .sum()
    };
    let hc = 2e-2;
    let q_up: Vec<f64> = up.theta.clone();
    let ru = err(&upper_profile, 0.0, up.delta, &q_up, &outer[..200], hc)
        / err(&upper_profile, 0.0, up.delta, &q_up, &outer[..200], hc / 2.0);
    let far: Vec<Vec<f64>> = inner.iter().filter(|y| y.iter().all(|v| v.abs() > 0.5)).take(200).cloned().collect();
    let rl = err(&lower_profile, lo.a, lo.gamma, &lo.vartheta, &far, hc)
        / err(&lower_profile, lo.a, lo.gamma, &lo.vartheta, &far, hc / 2.0);
    let passed = upper_bad == 0 && lower_bad == 0 && ru >= 3.0 && rl >= 3.0;
    outcome(
        passed,
        format!(
            "upper violations {upper_bad}/1000, lower violations {lower_bad}/1000 (A = 2 A0 = {:.3e}), error ratio on halving h: upper {ru:.2}, lower {rl:.2} (>= 3)",
            lo.a
        ),
    )
}

// ---------------------------------------------------------------------------
// 4

fn smoothing_exponent() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    for e in [iso(), aniso()] {
        let g = Grid::cube(2, 12.0, 129).unwrap();
        // unit bump in y at t = t0, a bump of radii t0^{a_i} in x at t = 0
        let t0: f64 = 0.03;
        let s = RescaledState::new(centred_bump(&g, 1.0), t0.ln(), t0);
        let cfg = RescaledConfig {
            record_every: 0.1,
            scheme: TimeScheme::Implicit { dt: 0.02, growth: 1.1, dt_max: 0.1 },
            ..Default::default()
        };
        let run = evolve_rescaled(&s, &cfg, &e, (50.0 + t0).ln() - t0.ln() + 1e-9).unwrap();
        let fit = smoothing_fit(&samples_from_rescaled(&run, &e), 1.0, 50.0, &e).unwrap();
        let rel = (fit.slope + e.alpha).abs() / e.alpha;
        passed &= rel <= 0.05;
        details.push(format!("m={:?}: slope {:.4} vs -{:.4} ({:.2}%)", e.m, fit.slope, e.alpha, 100.0 * rel));
    }
    outcome(passed, details.join("; "))
}

// ---------------------------------------------------------------------------
// reference anisotropic run

struct Reference {
    e: ExponentSet,
    grid: Grid,
    early: RescaledRun,
    profile: ProfileEstimate,
}

fn reference() -> Reference {
    let e = aniso();
    let grid = Grid::new(vec![50.0, 40.0], vec![201, 201]).unwrap();
    let s0 = RescaledState::new(centred_bump(&grid, 1.0), 0.0, 1.0);
    let cfg = RescaledConfig { record_every: 0.25, ..Default::default() };
    let early = evolve_rescaled(&s0, &cfg, &e, 5.0).unwrap();
    let profile = relax_to_profile(early.last(), &RescaledConfig::default(), &e).unwrap();
    Reference { e, grid, early, profile }
}

// 5

fn tail_sharpness(r: &Reference) -> Outcome {
    let mut passed = r.profile.converged;
    let mut details = vec![format!("converged {} at tau {:.1}", r.profile.converged, r.profile.tau)];
    for i in 0..2 {
        let sharp = -2.0 / (1.0 - r.e.m[i]);
        let (lo, hi) = (sharp - 0.3, sharp + 1.0);
        match r.profile.tail_slopes[i] {
            Some(f) => {
                passed &= f.slope >= lo && f.slope <= hi;
                details.push(format!("axis {i} slope {:.3} in [{lo:.1}, {hi:.1}]", f.slope));
            }
            None => {
                passed = false;
                details.push(format!("axis {i}: no fit"));
            }
        }
    }
    outcome(passed, details.join(", "))
}

// 6

fn uniqueness(r: &Reference) -> Outcome {
    let box_data =
        init_data(&InitKind::SmoothBox { half_widths: vec![2.0, 1.0], width: 0.3 }, 1.0, &r.grid).unwrap();
    let p2 = relax_to_profile(&RescaledState::new(box_data, 0.0, 1.0), &RescaledConfig::default(), &r.e).unwrap();
    let d = p2.profile.l1_distance(&r.profile.profile).unwrap() / r.profile.mass;
    outcome(d <= 0.02 && p2.converged, format!("relative L1 distance {d:.2e} (<= 2e-2), converged {}", p2.converged))
}

// 9

fn positivity(r: &Reference) -> Outcome {
    let states: Vec<RescaledState> = r.early.states.iter().filter(|s| s.tau <= 5.0 + 1e-9).cloned().collect();
    let cert = match PositivityCertificate::from_run(&states, 1.0, 0.5) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("certificate inapplicable: {e}")),
    };
    let rep = positivity_check(&states, &cert, 0.2).unwrap();
    let worst = rep.minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    outcome(
        rep.holds,
        format!(
            "c1 = {:.3e} (r0 {:.3e}, R_eps {}, outer mass {:.3}), min over {} states {worst:.3e} >= {:.3e}",
            cert.c1,
            cert.r0,
            cert.r_eps,
            cert.eps_mass,
            states.len(),
            rep.floor
        ),
    )
}

// 11

// An off-centre bump at t = 0 evolved with t0 = 1, then re-expressed with
// t0 = 0 at t = 1, 2, 4, 8, 16, where ||v - F||_inf = t^alpha ||u - U_M||_inf.
fn attraction_states(e: &ExponentSet, grid: &Grid) -> Vec<RescaledState> {
    let u0 = init_data(&InitKind::Bump { center: vec![1.5, 0.5], radii: vec![1.0, 1.0] }, 1.0, grid).unwrap();
    let cfg = RescaledConfig::default();
    let mut s = RescaledState::new(u0, 0.0, 1.0);
    let mut out = Vec::new();
    for t in [1.0, 2.0, 4.0, 8.0, 16.0f64] {
        let run = evolve_rescaled(&s, &cfg, e, (t + 1.0).ln() - s.tau).unwrap();
        s = run.last().clone();
        let u = from_selfsimilar(&s, e, None).unwrap();
        out.push(to_selfsimilar(&u, 0.0, e, Some(grid)).unwrap());
    }
    out
}

fn attraction(r: &Reference) -> Outcome {
    let mut passed = true;
    let mut details = Vec::new();
    let e = iso();
    let g = Grid::cube(2, 20.0, 129).unwrap();
    let b = Barenblatt::with_mass(2, 0.75, 1.0, BarenblattForm::Classical).unwrap();
    let f = Field::from_fn(g.clone(), |y| b.eval(y));
    for (label, states, reference) in [
        ("isotropic", attraction_states(&e, &g), &f),
        ("anisotropic", attraction_states(&r.e, &r.grid), &r.profile.profile),
    ] {
        let rep = attraction_check(&states, reference).unwrap();
        let (d1, d16) = (rep.weighted_linf_at(1.0).unwrap(), rep.weighted_linf_at(16.0).unwrap());
        let drop = 1.0 - d16 / d1;
        passed &= drop >= 0.5;
        details.push(format!("{label}: {d1:.3e} -> {d16:.3e} ({:.0}% decrease)", 100.0 * drop));
    }
    outcome(passed, details.join("; "))
}

// ---------------------------------------------------------------------------
// 7

fn contraction(diags: &mut Vec<RunDiagnostics>) -> Outcome {
    let e = aniso();
    let g = Grid::cube(2, 6.0, 65).unwrap();
    let nl = Nonlinearity::new(&e.m, 1e-6);
    let dt = cfl_dt(&Field::zeros(g.clone()), &nl, 0.9);
    let cfg = SolverConfig {
        eps: Regularization::Absolute(1e-6),
        dt_policy: DtPolicy::Fixed(dt),
        t_end: 1.0,
        record_every: 0.05,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut data = Vec::new();
        for _ in 0..2 {
            let kind = InitKind::RandomBumps { count: 3, radius: 1.0, spread: 2.0, seed: rng.gen() };
            data.push(init_data(&kind, rng.gen_range(0.5..1.5), &g).unwrap());
        }
        let a = run(&data[0], &cfg, &e).unwrap();
        let b = run(&data[1], &cfg, &e).unwrap();
        let rep = l1_contraction_check(&a, &b).unwrap();
        worst = worst.max(rep.max_increase / rep.functional[0]);
        diags.push(a.diagnostics);
        diags.push(b.diagnostics);
    }
    // equal-mass crossing pair
    let kind = |c: f64| InitKind::Bump { center: vec![c, 0.0], radii: vec![1.0, 1.0] };
    let a = run(&init_data(&kind(-0.7), 1.0, &g).unwrap(), &cfg, &e).unwrap();
    let b = run(&init_data(&kind(0.7), 1.0, &g).unwrap(), &cfg, &e).unwrap();
    let cross = l1_contraction_check(&a, &b).unwrap();
    // ordered pair
    let lower = run(&init_data(&kind(0.0), 0.5, &g).unwrap(), &cfg, &e).unwrap();
    let upper = run(&init_data(&kind(0.0), 1.0, &g).unwrap(), &cfg, &e).unwrap();
    let ord = l1_contraction_check(&lower, &upper).unwrap();
    diags.extend([a.diagnostics, b.diagnostics, lower.diagnostics, upper.diagnostics]);
    let passed = worst <= 1e-3
        && cross.nonincreasing(1e-3)
        && cross.relative_decrease >= 0.01
        && ord.ordered
        && ord.order_violation <= 0.0;
    outcome(
        passed,
        format!(
            "random pairs: worst increase {worst:.1e} of J(0) (<= 1e-3); crossing pair decrease {:.1}% (>= 1%); ordered pair max(u1-u2) {:.1e}",
            100.0 * cross.relative_decrease,
            ord.order_violation
        ),
    )
}

// 8

fn ssni_preservation(diags: &mut Vec<RunDiagnostics>) -> Outcome {
    let e = aniso();
    let g = Grid::cube(2, 6.0, 65).unwrap();
    let u0 = init_data(&InitKind::SmoothBox { half_widths: vec![1.5, 1.0], width: 0.3 }, 1.0, &g).unwrap();
    let nl = Nonlinearity::new(&e.m, 1e-6 * u0.max());
    let dt = cfl_dt(&Field::zeros(g.clone()), &nl, 0.9);
    let steps = 10_000;
    let cfg = SolverConfig {
        eps: Regularization::Absolute(nl.eps),
        dt_policy: DtPolicy::Fixed(dt),
        t_end: steps as f64 * dt,
        record_every: 1000.0 * dt,
        ..Default::default()
    };
    let traj = run(&u0, &cfg, &e).unwrap();
    let taken = traj.diagnostics.records.last().unwrap().steps;
    let mut sym: f64 = 0.0;
    let mut viol = 0;
    for s in &traj.snapshots {
        let r = ssni_check(s, 1e-12).unwrap();
        sym = sym.max(r.symmetry_error);
        viol += r.violations;
    }
    diags.push(traj.diagnostics);
    outcome(
        sym <= 1e-10 && viol == 0 && taken >= steps,
        format!("{taken} steps, symmetry error {sym:.1e} (<= 1e-10), monotonicity violations {viol}"),
    )
}

// 10

fn time_shift(diags: &mut Vec<RunDiagnostics>) -> Outcome {
    let e = iso();
    let b = Barenblatt::with_mass(2, 0.75, 1.0, BarenblattForm::Classical).unwrap();
    let k = std::f64::consts::E;
    let span = 0.5;
    let runs = |g: &Grid| {
        let u1 = b.snapshot(g, 1.0);
        let base =
            run(&u1, &SolverConfig { t_end: 1.0 + k * span, record_every: k * span / 4.0, ..Default::default() }, &e)
                .unwrap();
        let u2 = transform_scaling(&u1, k, &e).unwrap();
        let shifted =
            run(&u2, &SolverConfig { t_end: u2.time + span, record_every: span / 4.0, ..Default::default() }, &e)
                .unwrap();
        (base, shifted)
    };
    let coarse = Grid::cube(2, 30.0, 129).unwrap();
    let fine = coarse.refined();
    let (b1, s1) = runs(&coarse);
    let (b2, s2) = runs(&fine);
    let d1 = time_shift_check(&b1, &s1, k, &e).unwrap().max_discrepancy;
    let d2 = time_shift_check(&b2, &s2, k, &e).unwrap().max_discrepancy;
    // both runs contribute discretisation error to the identity
    let scheme = refinement_gap(&b1, &b2).unwrap() + refinement_gap(&s1, &s2).unwrap();
    diags.extend([b1.diagnostics, s1.diagnostics, b2.diagnostics, s2.diagnostics]);
    let ratio = d1 / d2;
    outcome(
        d1 <= 2.0 * scheme && ratio >= 1.5,
        format!("discrepancy {d1:.2e} vs scheme error {scheme:.2e} (<= 2x), refined {d2:.2e} (decrease {ratio:.2}x >= 1.5)"),
    )
}

// 12

fn heat_marginal() -> Outcome {
    let e = compute_exponents(&ModelParams::with_linear(2, vec![1.0, 0.8])).unwrap();
    let g = Grid::new(vec![10.0, 15.0], vec![129, 129]).unwrap();
    let p = relax_to_profile(&RescaledState::new(centred_bump(&g, 1.0), 0.0, 1.0), &RescaledConfig::default(), &e)
        .unwrap();
    let rep = marginal_heat_check(&p.profile, &e).unwrap();
    outcome(
        rep.relative_l1_error <= 0.03 && p.converged,
        format!("marginal L1 error {:.2e} (<= 3e-2), converged {}", rep.relative_l1_error, p.converged),
    )
}

// 13

fn energy(diags: &[RunDiagnostics]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut axes = 0;
    for d in diags {
        for rep in energy_check(d) {
            worst = worst.max(rep.relative_violation);
            axes += 1;
        }
    }
    outcome(
        worst <= 1e-3 && axes > 0,
        format!("{} runs, {axes} axis checks, worst relative violation {worst:.1e} (<= 1e-3)", diags.len()),
    )
}

// 14

fn csv_bytes(threads: usize) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let e = aniso();
        let g = Grid::cube(2, 6.0, 49).unwrap();
        let u0 = init_data(&InitKind::RandomBumps { count: 3, radius: 1.0, spread: 2.0, seed: 5 }, 1.0, &g).unwrap();
        let traj = run(&u0, &SolverConfig { t_end: 0.3, record_every: 0.1, ..Default::default() }, &e).unwrap();
        let rs = RescaledState::new(u0, 0.0, 1.0);
        let rr = evolve_rescaled(&rs, &RescaledConfig { record_every: 0.5, ..Default::default() }, &e, 2.0).unwrap();
        let mut out = vec![Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        write_field_csv(traj.last(), &mut out[0]).unwrap();
        write_diagnostics_csv(&traj.diagnostics, &mut out[1]).unwrap();
        write_field_csv(&rr.last().v, &mut out[2]).unwrap();
        write_rescaled_csv(&rr.records, &mut out[3]).unwrap();
        out
    })
}

fn determinism() -> Outcome {
    let threads = 4;
    let a = csv_bytes(threads);
    let b = csv_bytes(threads);
    let same = a == b;
    let bytes: usize = a.iter().map(|v| v.len()).sum();
    outcome(same, format!("{} CSV files, {bytes} bytes, identical on rerun with {threads} threads: {same}", a.len()))
}

fn main() {
    let start = Instant::now();
    let mut suite = Suite { results: Vec::new() };
    let mut diags = Vec::new();
    suite.run(1, "exponent identities", exponent_identities);
    suite.run(2, "isotropic Barenblatt oracle", || isotropic_oracle(&mut diags));
    suite.run(3, "barrier residual signs", barrier_signs);
    suite.run(4, "smoothing exponent", smoothing_exponent);
    let r = reference();
    suite.run(5, "tail sharpness", || tail_sharpness(&r));
    suite.run(6, "profile uniqueness", || uniqueness(&r));
    suite.run(7, "contraction", || contraction(&mut diags));
    suite.run(8, "SSNI preservation", || ssni_preservation(&mut diags));
    suite.run(9, "positivity floor", || positivity(&r));
    suite.run(10, "time-shift identity", || time_shift(&mut diags));
    suite.run(11, "attraction", || attraction(&r));
    suite.run(12, "heat marginal", heat_marginal);
    suite.run(13, "energy inequality", || energy(&diags));
    suite.run(14, "determinism", determinism);
    let failed: Vec<usize> = suite.results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.0} s",
        suite.results.len() - failed.len(),
        suite.results.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
