use mottlab_core::corrector::{corrector_energy, corrector_gradient_at_zero};
use mottlab_core::mott_walk::{estimate_diffusion, JumpTables};
use mottlab_core::{
    diffusion_matrix, sample_configuration, solve_corrector, ConductanceKernel, MarkLaw, PeriodicEnvironment,
    ProcessKind, ProcessSpec, Window,
};

fn torus(side: f64, beta: f64, seed: u64) -> PeriodicEnvironment {
    let spec = ProcessSpec {
        dimension: 2,
        process: ProcessKind::Poisson { intensity: 1.0 },
        marks: MarkLaw::PowerLaw { alpha: 0.0, cutoff: 1.0 },
    };
    let config = sample_configuration(&spec, &Window::cube(2, 0.0, side).unwrap(), seed).unwrap();
    let kernel = ConductanceKernel::miller_abrahams(beta, 1.0);
    PeriodicEnvironment::build(&config, &kernel, (0.5 * side).min(kernel.cutoff_radius(1e-14))).unwrap()
}

#[test]
fn gradient_matches_finite_differences() {
    let env = torus(6.0, 1.0, 11);
    let a = [0.6, 0.8];
    let grad = corrector_gradient_at_zero(&env, &a);
    let h = 1e-5;
    let zero = vec![0.0; env.len()];
    for i in 0..env.len() {
        let mut plus = zero.clone();
        let mut minus = zero.clone();
        plus[i] = h;
        minus[i] = -h;
        let fd = (corrector_energy(&env, &a, &plus) - corrector_energy(&env, &a, &minus)) / (2.0 * h);
        assert!((fd - grad[i]).abs() < 1e-7 * grad[i].abs().max(1e-3), "node {i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn corrector_is_stationary() {
    let env = torus(8.0, 1.0, 12);
    let a = [1.0, 0.0];
    let sol = solve_corrector(&env, &a, 1e-13).unwrap();
    let h = 1e-4;
    for i in (0..env.len()).step_by(5) {
        let mut plus = sol.f.clone();
        let mut minus = sol.f.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (corrector_energy(&env, &a, &plus) - corrector_energy(&env, &a, &minus)) / (2.0 * h);
        assert!(fd.abs() < 1e-8, "node {i}: slope {fd}");
    }
}

#[test]
fn diffusion_matrix_is_homogeneous_and_symmetric() {
    let env = torus(8.0, 0.5, 13);
    let d = diffusion_matrix(&env, 1e-12).unwrap();
    let d3 = diffusion_matrix(&env.scaled(3.0), 1e-12).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(d.entries[i][j], d.entries[j][i]);
            assert!((d3.entries[i][j] - 3.0 * d.entries[i][j]).abs() < 1e-10);
        }
    }
    assert!(d.eigenvalues[0] > 0.0);
}

#[test]
fn walkers_reproduce_the_corrector() {
    let env = torus(8.0, 0.0, 14);
    let d = diffusion_matrix(&env, 1e-12).unwrap();
    let tables = JumpTables::new(&env).unwrap();
    let w = estimate_diffusion(&env, &tables, 4000, 200.0, 15).unwrap();
    assert!(!w.too_short);
    for a in 0..2 {
        let z = (w.estimate.entries[a][a] - d.entries[a][a]).abs() / w.diagonal_stderr[a];
        assert!(
            z < 4.0,
            "direction {a}: walk {} +- {} vs corrector {}",
            w.estimate.entries[a][a],
            w.diagonal_stderr[a],
            d.entries[a][a]
        );
    }
}
