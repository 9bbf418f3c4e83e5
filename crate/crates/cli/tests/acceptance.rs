//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};
use vortwave::continuation::{
    checkpoint_field, continue_branch, start_branch, BranchLabel, BranchPoint, BranchSetup, HaltReason,
    Policy, Stepper, LOG_FILE,
};
use vortwave::diagnostics::reconstruct;
use vortwave::dispersion::dispersion_eigenvalue;
use vortwave::heightfield::{newton_solve, read_field, write_field, Constraint, HeightField, HeightSystem, NewtonOptions};
use vortwave::streamflow::{bernoulli, conjugate_streams, critical_parameters, stream_solution};
use vortwave::vorticity::{OmegaClass, VorticityModel, VorticitySpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn setup(spec: VorticitySpec, r: f64, nq: usize, np: usize, policy: Policy) -> BranchSetup {
    let model = Arc::new(VorticityModel::new(spec).unwrap());
    let regime = conjugate_streams(&*model, r).unwrap();
    let stream = stream_solution(model.clone(), regime.s_minus).unwrap();
    let seed = dispersion_eigenvalue(&stream).unwrap();
    BranchSetup {
        model,
        regime,
        seed,
        nq,
        np,
        policy,
    }
}

fn branch(setup: &BranchSetup, a0: f64) -> (Vec<BranchPoint>, HaltReason) {
    let onset = start_branch(setup, a0).unwrap();
    let mut stepper = Stepper::new(setup.clone(), onset.clone());
    let (mut points, halt) = continue_branch(&mut stepper, |_, _| Ok::<(), ()>(())).unwrap();
    points.insert(0, onset);
    (points, halt)
}

fn criterion_1() -> Outcome {
    let m = VorticityModel::<f64>::new(VorticitySpec::Zero).unwrap();
    let cp = critical_parameters(&m).unwrap();
    let pass = (cp.rc - 1.5).abs() < 1e-10 && (cp.sc - 1.0).abs() < 1e-10 && cp.d0 == f64::INFINITY;
    outcome(pass, format!("Rc = {:.15}, sc = {:.15}, d0 = {}", cp.rc, cp.sc, cp.d0))
}

/// Bisection on s³ − 2rs + 2 over a sign-changing bracket.
fn cubic_root(r: f64, mut lo: f64, mut hi: f64) -> f64 {
    let f = |s: f64| s * s * s - 2.0 * r * s + 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_2() -> Outcome {
    let m = VorticityModel::<f64>::new(VorticitySpec::Zero).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for r in [1.7, 2.0, 2.5] {
        let reg = conjugate_streams(&m, r).unwrap();
        let res = (bernoulli(&m, reg.s_minus).unwrap() - r)
            .abs()
            .max((bernoulli(&m, reg.s_plus).unwrap() - r).abs());
        let oracle = (cubic_root(r, 1e-9, 1.0), cubic_root(r, 1.0, 4.0 * r));
        let dev = (reg.s_minus - oracle.0).abs().max((reg.s_plus - oracle.1).abs());
        let order = reg.s_minus < 1.0 && 1.0 < reg.s_plus && reg.d_minus < reg.d_plus && reg.d_plus < r;
        pass &= res < 1e-10 && dev < 1e-10 && order;
        detail.push(format!("r={r}: |R-r| {res:.1e}, oracle {dev:.1e}"));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_3() -> Outcome {
    let m = Arc::new(VorticityModel::<f64>::new(VorticitySpec::Zero).unwrap());
    let mut pass = true;
    let mut detail = Vec::new();
    for r in [1.7, 2.0] {
        let reg = conjugate_streams(&*m, r).unwrap();
        let s = reg.s_minus;
        let seed = dispersion_eigenvalue(&stream_solution(m.clone(), s).unwrap()).unwrap();
        let l = seed.lambda0;
        let res = ((l / s).tanh() - l * s * s).abs();
        pass &= res < 1e-8;
        detail.push(format!("r={r}: λ0 = {l:.6}, residual {res:.1e}"));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_4() -> Outcome {
    let policy = Policy {
        max_points: 10,
        ..Policy::default()
    };
    let s = setup(VorticitySpec::Zero, 1.8, 32, 24, policy);
    let (points, _) = branch(&s, 1e-3);
    let mid = &points[points.len() - 1].field;
    let system = HeightSystem::new(mid.grid(), &s.model, s.regime.r);
    let x = mid.to_unknowns();
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let base: Vec<f64> = x.iter().map(|v| v + 1e-3 * rng.gen_range(-1.0..1.0) * v.abs().min(1.0)).collect();
        if system.check_admissible(&base).is_err() {
            return outcome(false, "perturbation left the admissible set");
        }
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jv = system.jacobian_vector_product(&base, &dir).unwrap();
        // rough directions move face h_p by eps/Δp, so the step must stay well below Δp²
        let eps = 1e-8;
        let c = Constraint::Amplitude(0.0);
        let shift = |sgn: f64| -> Vec<f64> { base.iter().zip(&dir).map(|(a, d)| a + sgn * eps * d).collect() };
        let rp = system.residual_flat(&shift(1.0), &c).unwrap();
        let rm = system.residual_flat(&shift(-1.0), &c).unwrap();
        let fd: Vec<f64> = (0..n - 1).map(|k| (rp[k] - rm[k]) / (2.0 * eps)).collect();
        let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = (0..n - 1).map(|k| (fd[k] - jv[k]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    outcome(
        worst < 1e-6,
        format!("amplitude {:.3}, worst relative error {worst:.2e}", mid.amplitude()),
    )
}

fn criterion_5() -> Outcome {
    let s = setup(VorticitySpec::Zero, 1.8, 64, 48, Policy::default());
    let onset = start_branch(&s, 1e-3).unwrap();
    let rel = (onset.field.lambda - s.seed.lambda0).abs() / s.seed.lambda0;
    let bern = onset.diagnostics.bernoulli_residual;
    outcome(
        onset.iterations <= 8 && bern < 1e-8 && rel < 1e-3,
        format!("{} iterations, Bernoulli {bern:.1e}, |Δλ|/λ0 {rel:.2e}", onset.iterations),
    )
}

fn bound_pass(p: &BranchPoint, name: &str) -> bool {
    p.diagnostics.bound(name).is_some_and(|b| b.pass)
}

fn criterion_6() -> Outcome {
    // onset already sits at gap ≈ 0.107 r, so run on into the range where the looser spread tolerance applies
    let policy = Policy {
        gap_min: 0.01,
        ..Policy::default()
    };
    let s = setup(VorticitySpec::Zero, 1.8, 64, 48, policy);
    let r = s.regime.r;
    let (points, halt) = branch(&s, 1e-3);
    let mut failures = Vec::new();
    for p in &points {
        let d = &p.diagnostics;
        let spread_tol = if p.stagnation_gap < 0.05 * r { 1e-4 } else { 1e-5 };
        let checks = [
            ("bernoulli", d.bernoulli_residual < 1e-8),
            ("flow force", d.flowforce_spread < spread_tol),
            ("crest", p.max_eta > s.regime.d_plus),
            ("head", bound_pass(p, "speed_below_stagnation_head")),
            ("bottom", bound_pass(p, "bottom_speed_irrotational")),
            ("slope", p.max_slope <= 0.5 + 0.05),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("{name}@{}", p.index));
            }
        }
    }
    let last = points.last().unwrap();
    let reached = halt == HaltReason::GapReached && last.stagnation_gap < 0.1 * r;
    let min_slope_margin = points.iter().map(|p| 0.55 - p.max_slope).fold(f64::INFINITY, f64::min);
    outcome(
        reached && failures.is_empty(),
        format!(
            "{} points, final gap/r {:.4}, slope margin {min_slope_margin:.3}, halt {halt:?}, failures [{}]",
            points.len(),
            last.stagnation_gap / r,
            failures.join(" ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let s = setup(VorticitySpec::Zero, 2.0, 128, 64, Policy::default());
    let (points, halt) = branch(&s, 1e-3);
    let out = vortwave::continuation::classify_branch(&points, Some(halt), OmegaClass::Zero, s.policy.slope_max);
    let angles: Vec<f64> = points.iter().filter_map(|p| p.diagnostics.crest_angle).collect();
    let first = angles.first().copied().unwrap_or(f64::NAN);
    let last = angles.last().copied().unwrap_or(f64::NAN);
    // the fitted angle is a trend estimate; allow sub-degree jitter between neighbours
    let rises = angles.windows(2).filter(|w| w[1] > w[0] + 0.5).count();
    let pass = out.label == BranchLabel::ExtremeStokes
        && angles.len() == points.len()
        && first > 175.0
        && last < 150.0
        && rises == 0;
    outcome(
        pass,
        format!(
            "label {:?}, {} points, angle {first:.1}° → {last:.1}°, rises {rises}",
            out.label,
            points.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let spec = VorticitySpec::Constant { value: 0.5 };
    let m = VorticityModel::<f64>::new(spec.clone()).unwrap();
    let r = critical_parameters(&m).unwrap().rc + 0.3;
    let s = setup(spec, r, 64, 48, Policy::default());
    let (points, halt) = branch(&s, 1e-3);
    let class = s.model.class();
    let out = vortwave::continuation::classify_branch(&points, Some(halt), class, s.policy.slope_max);
    let bad: Vec<usize> = points
        .iter()
        .filter(|p| !(bound_pass(p, "bottom_speed_between_streams") && bound_pass(p, "surface_speed_lower_bound")))
        .map(|p| p.index)
        .collect();
    let pass = class == OmegaClass::Nonnegative
        && points.len() >= 10
        && bad.is_empty()
        && out.label != BranchLabel::Breaking;
    outcome(
        pass,
        format!(
            "r = {r:.5}, {} points, halt {halt:?}, label {:?}, failing points {bad:?}",
            points.len(),
            out.label
        ),
    )
}

/// Amplitude-pinned waves at 0.05, 0.10, 0.15 on one grid, stored and read back.
fn stored_waves(s: &BranchSetup, dir: &Path) -> Vec<HeightField> {
    let onset = start_branch(s, 1e-3).unwrap();
    let mut field = onset.field;
    let mut out = Vec::new();
    for k in 1..=30 {
        let a = 0.005 * k as f64;
        field = newton_solve(&field, &s.model, a, &NewtonOptions::default()).unwrap().0;
        if k % 10 == 0 {
            let stem = format!("wave_{}x{}_{k}", s.nq, s.np);
            let (csv, json) = (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")));
            write_field(&field, 0.0, &csv, &json).unwrap();
            out.push(read_field(&csv, &json).unwrap().field);
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let coarse = stored_waves(&setup(VorticitySpec::Zero, 1.8, 32, 24, Policy::default()), dir.path());
    let fine_setup = setup(VorticitySpec::Zero, 1.8, 64, 48, Policy::default());
    let fine = stored_waves(&fine_setup, dir.path());
    let mut pass = true;
    let mut detail = Vec::new();
    for (c, f) in coarse.iter().zip(&fine) {
        let wc = reconstruct(c, &fine_setup.model).unwrap();
        let wf = reconstruct(f, &fine_setup.model).unwrap();
        let g = wf.g_surface_max();
        let (ecx, ecy) = wc.flow_force_gradient_errors();
        let (efx, efy) = wf.flow_force_gradient_errors();
        let order_x = (ecx / efx).log2();
        let order_y = (ecy / efy).log2();
        let second = |o: f64| (o - 2.0).abs() < 0.3;
        pass &= g < 1e-5 && second(order_x) && second(order_y);
        detail.push(format!("a={:.2}: G {g:.1e}, orders {order_x:.2}/{order_y:.2}", f.amplitude()));
    }
    outcome(pass, detail.join("; "))
}

fn write_config(dir: &Path, max_points: usize) -> std::path::PathBuf {
    let path = dir.join(format!("run_{max_points}.conf"));
    let text = format!(
        "# determinism check\nvorticity = zero\nr = 1.8\nnq = 64\nnp = 48\na0 = 1e-3\nmax_points = {max_points}\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn log_lines(dir: &Path) -> usize {
    std::fs::read_to_string(dir.join(LOG_FILE)).map_or(0, |t| t.lines().count())
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_vortwave");
    let work = tempfile::tempdir().unwrap();
    let config = write_config(work.path(), 40);
    let (full, cut) = (work.path().join("full"), work.path().join("cut"));
    let status = Command::new(bin)
        .args(["continue", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&full)
        .output()
        .unwrap();
    if !status.status.success() {
        return outcome(false, "uninterrupted run failed");
    }
    // kill the run part-way through, then resume from whatever the checkpoint holds
    let mut child = Command::new(bin)
        .args(["continue", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&cut)
        .stdout(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(120);
    while log_lines(&cut) < 12 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(5));
    }
    let _ = child.kill();
    let _ = child.wait();
    let at_kill = log_lines(&cut);
    let resumed = Command::new(bin)
        .args(["continue", "--config"])
        .arg(&config)
        .arg("--resume")
        .arg(&cut)
        .output()
        .unwrap();
    let a = std::fs::read(full.join(LOG_FILE)).unwrap();
    let b = std::fs::read(cut.join(LOG_FILE)).unwrap_or_default();
    let field_same = checkpoint_field(&full).map(|f| f.to_unknowns()).ok() == checkpoint_field(&cut).map(|f| f.to_unknowns()).ok();
    outcome(
        resumed.status.success() && a == b && field_same && at_kill < log_lines(&full),
        format!(
            "killed after {at_kill} of {} lines, logs {}",
            log_lines(&full),
            if a == b { "byte-identical" } else { "differ" }
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("critical constants, irrotational", Duration::from_secs(1), criterion_1),
        ("conjugate roots against cubic oracle", Duration::from_secs(1), criterion_2),
        ("dispersion root satisfies tanh relation", Duration::from_secs(1), criterion_3),
        ("Jacobian against central differences", Duration::from_secs(30), criterion_4),
        ("onset at r = 1.8", Duration::from_secs(60), criterion_5),
        ("branch r = 1.8 to gap < 0.1 r, all points certified", Duration::from_secs(600), criterion_6),
        ("r = 2.0 classified ExtremeStokes with falling crest angle", Duration::from_secs(600), criterion_7),
        ("constant vorticity 0.5, bottom and surface bounds", Duration::from_secs(600), criterion_8),
        ("G on the surface and F gradients at second order", Duration::from_secs(600), criterion_9),
        ("interrupted and resumed log byte-identical", Duration::from_secs(600), criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} ({:.2} s of {} s)",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
