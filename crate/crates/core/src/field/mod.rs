//! Maps from a flat periodic grid into a chart: tension fields, energy
//! diagnostics and solvers for `τ^tor(φ) = 0`.

pub mod extrinsic;
pub mod grid;
pub mod initial;
pub mod solver;
pub mod tension;

pub use extrinsic::{push_forward, tension_tor_extrinsic, EmbeddedMapState};
pub use grid::{GridDomain, MapJets, MapState};
pub use solver::{
    solve_fixed_point, solve_newton, ConvergenceReport, FixedPointConfig, KernelPolicy,
    NewtonConfig, SolverMethod, Termination,
};
pub use tension::{
    dirichlet_energy, energy_gradient_check, energy_gradient_check_central, grid_pairing,
    local_energy, morrey_norm, tension, tension_tor, torsion_term,
};
