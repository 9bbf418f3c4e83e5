use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use vortwave::continuation::{checkpoint_field, resume_branch, run_branch, start_branch, BranchSetup, Policy, LOG_FILE};
use vortwave::dispersion::dispersion_eigenvalue;
use vortwave::heightfield::{Constraint, HeightSystem};
use vortwave::streamflow::{conjugate_streams, stream_solution};
use vortwave::vorticity::{VorticityModel, VorticitySpec};

fn setup(spec: VorticitySpec, r: f64, nq: usize, np: usize, policy: Policy) -> BranchSetup {
    let model = Arc::new(VorticityModel::new(spec).unwrap());
    let regime = conjugate_streams(&*model, r).unwrap();
    let stream = stream_solution(model.clone(), regime.s_minus).unwrap();
    let seed = dispersion_eigenvalue(&stream).unwrap();
    BranchSetup { model, regime, seed, nq, np, policy }
}

#[test]
fn onset_matches_dispersion_root() {
    let s = setup(VorticitySpec::Zero, 1.8, 64, 48, Policy::default());
    let onset = start_branch(&s, 1e-3).unwrap();
    assert!(onset.iterations <= 8);
    assert!(onset.diagnostics.bernoulli_residual < 1e-8);
    assert!(((onset.field.lambda - s.seed.lambda0) / s.seed.lambda0).abs() < 1e-3);
    assert!(onset.admissible());
}

#[test]
fn onset_wavelength_converges_with_linear_vorticity() {
    let err = |nq, np| {
        let s = setup(VorticitySpec::Linear { slope: 0.4 }, 1.8, nq, np, Policy::default());
        let onset = start_branch(&s, 1e-3).unwrap();
        assert!(onset.diagnostics.mandatory_pass);
        ((onset.field.lambda - s.seed.lambda0) / s.seed.lambda0).abs()
    };
    // 32×24 is still pre-asymptotic; the finer pair shows the second-order rate
    let (coarse, fine) = (err(64, 48), err(128, 96));
    assert!(fine < 1e-3 && coarse / fine > 3.5, "errors {coarse} {fine}");
}

#[test]
fn jacobian_products_match_central_differences() {
    let policy = Policy { max_points: 8, ..Policy::default() };
    let s = setup(VorticitySpec::Zero, 1.8, 32, 24, policy);
    let dir = tempfile::tempdir().unwrap();
    let run = run_branch(s.clone(), 1e-3, dir.path()).unwrap();
    let mid = checkpoint_field(dir.path()).unwrap();
    assert!(run.log.len() >= 5 && mid.amplitude() > 0.05);
    let system = HeightSystem::new(mid.grid(), &s.model, s.regime.r);
    let x = mid.to_unknowns();
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let base: Vec<f64> = x.iter().map(|v| v + 1e-3 * rng.gen_range(-1.0..1.0) * v.abs().min(1.0)).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jv = system.jacobian_vector_product(&base, &dir).unwrap();
        // rough directions move face h_p by eps/Δp, so the step must stay well below Δp²
        let eps = 1e-8;
        let c = Constraint::Amplitude(0.0);
        let shift = |sgn: f64| -> Vec<f64> { base.iter().zip(&dir).map(|(a, d)| a + sgn * eps * d).collect() };
        let rp = system.residual_flat(&shift(1.0), &c).unwrap();
        let rm = system.residual_flat(&shift(-1.0), &c).unwrap();
        let fd: Vec<f64> = (0..n - 1).map(|k| (rp[k] - rm[k]) / (2.0 * eps)).collect();
        let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = (0..n - 1).map(|k| (fd[k] - jv[k]).powi(2)).sum::<f64>().sqrt();
        assert!(err / scale < 1e-6, "relative error {}", err / scale);
    }
}

#[test]
fn resume_reproduces_log() {
    let full = Policy { max_points: 12, ..Policy::default() };
    let s = setup(VorticitySpec::Constant { value: 0.3 }, 1.7, 32, 24, full);
    let a = tempfile::tempdir().unwrap();
    run_branch(s.clone(), 1e-3, a.path()).unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut first = s.clone();
    first.policy.max_points = 5;
    run_branch(first, 1e-3, b.path()).unwrap();
    // a step that was logged but never checkpointed
    let mut log = std::fs::read_to_string(b.path().join(LOG_FILE)).unwrap();
    log.push_str("{\"index\":5,\"t\":0.1");
    std::fs::write(b.path().join(LOG_FILE), log).unwrap();
    resume_branch(s, b.path()).unwrap();
    let la = std::fs::read(a.path().join(LOG_FILE)).unwrap();
    let lb = std::fs::read(b.path().join(LOG_FILE)).unwrap();
    assert_eq!(String::from_utf8(la).unwrap(), String::from_utf8(lb).unwrap());
}
