use std::f64::consts::PI;

use travwave::continuation::{refine_branch, run, start_branch, Branch, NavigationOptions};
use travwave::diagnostics::{classify_stability, BranchReport, FitPoints};
use travwave::equations::{Equation, Model};
use travwave::solver::{BoundaryCondition, NewtonOptions};
use travwave::spectral::Discretization;

fn branch() -> (Branch, BranchReport) {
    let eq = Equation::new(Model::Whitham, 2.0 * PI).unwrap();
    let disc = Discretization::new(eq, 1024).unwrap();
    let opts = NavigationOptions::default();
    let mut branch = start_branch(&disc, BoundaryCondition::HomogeneousB, &opts).unwrap();
    run(&disc, &mut branch, 85, &opts);
    let report = BranchReport::build(&branch, FitPoints::None).unwrap();
    (branch, report)
}

#[test]
fn upper_branch_near_the_highest_wave() {
    let (branch, report) = branch();
    let turn = report.turning_point.expect("turning point");
    let terminal = report.terminal.expect("terminal point");
    assert!(turn < report.max_l2 && report.max_l2 < terminal);

    // c / max phi falls monotonically from the turning point to the cusp
    let ratios: Vec<f64> = report.points[turn..=terminal]
        .iter()
        .map(|p| p.cusp_ratio.unwrap())
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");

    // stable up to the maximum of V, unstable past it
    let signs = classify_stability(&branch).unwrap();
    assert!(signs[1..report.max_l2].iter().all(|s| s.sign == 1));
    assert!(signs[report.max_l2 + 1..=terminal].iter().all(|s| s.sign == -1));

    // doubling the grid close to the cusp barely moves the speed
    let near = &branch.points[terminal - 2];
    let mut single = Branch::new(branch.equation, branch.bc, branch.n, branch.step_size());
    single.push(near.clone(), None);
    let refined = refine_branch(&single, 1, &NewtonOptions::default()).unwrap();
    let fine = refined.levels[1][0].as_ref().expect("refined point");
    assert_eq!(fine.wave.grid().n(), 2048);
    assert_eq!(fine.a, near.a);
    assert!((fine.c - near.c).abs() < 1e-4, "{} vs {}", fine.c, near.c);
}
