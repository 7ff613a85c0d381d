use std::f64::consts::PI;

use travwave::continuation::{
    continue_to_waveheight, refine_branch, run, solve_on_grids, start_branch, NavigationOptions,
};
use travwave::diagnostics::{dprime_check, functionals};
use travwave::equations::{Equation, ExactSolitary, Model};
use travwave::evolution::{conserved, evolve, mirror_to_full, write_trajectory, EvolutionConfig};
use travwave::solver::{BoundaryCondition, NewtonOptions};
use travwave::spectral::{max_abs, Discretization};

fn kdv(length: f64) -> Equation {
    Equation::new(Model::Kdv, length).unwrap()
}

#[test]
fn dprime_is_minus_v_along_periodic_branches() {
    for bc in [BoundaryCondition::MeanZero, BoundaryCondition::HomogeneousB] {
        let disc = Discretization::new(kdv(2.0 * PI), 64).unwrap();
        let opts = NavigationOptions::default();
        let mut branch = start_branch(&disc, bc, &opts).unwrap();
        run(&disc, &mut branch, 35, &opts);
        let checked: Vec<f64> = dprime_check(&branch)
            .unwrap()
            .iter()
            .filter(|e| e.min_dc > 1e-4)
            .map(|e| e.rel_mismatch.unwrap())
            .collect();
        assert!(checked.len() > 20, "{bc:?}: {}", checked.len());
        assert!(checked.iter().all(|&m| m < 0.01), "{bc:?}: {checked:?}");
    }
}

#[test]
fn refined_branch_reaches_the_new_truncation_level() {
    let disc = Discretization::new(kdv(2.0 * PI), 64).unwrap();
    let opts = NavigationOptions::default();
    let mut branch = start_branch(&disc, BoundaryCondition::HomogeneousB, &opts).unwrap();
    run(&disc, &mut branch, 20, &opts);
    let refined = refine_branch(&branch, 1, &NewtonOptions::default()).unwrap();
    assert!(refined.failures.is_empty());
    let fine = refined.finest(&branch);
    assert_eq!(fine.n, 128);
    assert_eq!(fine.len(), branch.len());
    for (p, q) in branch.points.iter().zip(&fine.points) {
        assert_eq!(p.a, q.a);
        assert!(q.residual_norm <= 1e-10, "{}", q.residual_norm);
        // the waveheight is pinned at nodes that move with the grid, so the
        // same a names a wave whose true height differs by O(dx^2 a)
        assert!((p.c - q.c).abs() < 1e-4 * p.a.max(1e-6), "{} {} {}", p.a, p.c, q.c);
    }
    // the trivial point is carried over untouched
    assert_eq!(fine.points[0].c, branch.points[0].c);
    assert!(fine.points[0].wave.samples().iter().all(|v| *v == 0.0));
}

#[test]
fn long_wave_approaches_the_solitary_wave() {
    let a = 1.2651;
    let points = solve_on_grids(
        kdv(60.0),
        BoundaryCondition::Solitary,
        a,
        &[64, 128, 256],
        2000,
        &NavigationOptions::default(),
    )
    .unwrap();
    let mut last = f64::INFINITY;
    for p in &points {
        let x = p.wave.grid().nodes();
        let exact = ExactSolitary::matching_node_waveheight(a, x[0], x[x.len() - 1]).unwrap();
        let err: Vec<f64> = p.wave.samples().iter().zip(x).map(|(u, x)| u - exact.eval(*x)).collect();
        let err = max_abs(&err);
        assert!(err < last * 1e-3, "{err} after {last}");
        assert!((p.c - exact.speed()).abs() < 10.0 * err.max(1e-13));
        last = err;
    }
    assert!(solve_on_grids(kdv(60.0), BoundaryCondition::Solitary, a, &[64, 96], 2000, &NavigationOptions::default()).is_err());
}

#[test]
fn traveling_wave_translates_and_trajectory_is_written() {
    let length = 2.0 * PI;
    let disc = Discretization::new(kdv(length), 64).unwrap();
    let (_, wave) =
        continue_to_waveheight(&disc, BoundaryCondition::MeanZero, 0.3, 500, &NavigationOptions::default()).unwrap();
    assert_eq!(wave.a, 0.3);
    let f = functionals(disc.equation(), &wave);
    assert!(f.v > 0.0);

    let u0 = mirror_to_full(&wave.wave);
    let t_end = 0.5 * length / wave.c;
    let cfg = EvolutionConfig { dt: Some(0.005), t_end, dealias: true, snapshot_stride: 50 };
    let traj = evolve(disc.equation(), &u0, &cfg).unwrap();
    let last = traj.last().unwrap();
    assert!((last.t - t_end).abs() < 1e-12);
    let exact = u0.shifted(wave.c * t_end);
    let err: Vec<f64> = last.field.samples().iter().zip(exact.samples()).map(|(a, b)| a - b).collect();
    assert!(max_abs(&err) < 1e-8, "{}", max_abs(&err));
    let (m0, p0) = conserved(&u0);
    let (m1, p1) = conserved(&last.field);
    assert!((m1 - m0).abs() < 1e-12 && (p1 - p0).abs() < 1e-10 * p0);

    let dir = tempfile::tempdir().unwrap();
    write_trajectory(dir.path(), &traj).unwrap();
    let index = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), traj.len() + 1);
    assert!(index.starts_with("t,file,mass,momentum,max_u\n"));
    let snap = std::fs::read_to_string(dir.path().join("snap_00000.csv")).unwrap();
    assert_eq!(snap.lines().count(), u0.m() + 1);
}
