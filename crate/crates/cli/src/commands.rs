use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use torsion_harmonic::field::{
    dirichlet_energy, energy_gradient_check_central, morrey_norm, solve_fixed_point, solve_newton,
    tension, tension_tor, ConvergenceReport, MapState, SolverMethod,
};
use torsion_harmonic::geodesic::{integrate, speed_drift, trajectory_csv, GeodesicState};
use torsion_harmonic::geometry::torsion::skew_last_two;
use torsion_harmonic::geometry::{cartan_decompose, tensor_inner, TorsionCoeffs, TorsionField};
use torsion_harmonic::io::map_csv;
use torsion_harmonic::jacobi::{spectrum, JacobiOperator};
use torsion_harmonic::tensor::{sup_norm, Tensor3};
use torsion_harmonic::verify::{failures, run_suite};

use crate::config::{ConfigError, ProblemConfig};

/// Failure of a subcommand, mapped to an exit code by the caller.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numerical(torsion_harmonic::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<torsion_harmonic::Error> for Failure {
    fn from(e: torsion_harmonic::Error) -> Self {
        Self::Numerical(e)
    }
}

pub struct Artifact {
    pub name: &'static str,
    pub contents: String,
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Index of the artifact printed when no output directory is given.
    pub primary: usize,
    pub summary: String,
    /// Nonzero exit without an error, e.g. a failed identity check.
    pub failed: bool,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn e(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn geodesic(cfg: &ProblemConfig) -> Result<Outcome, Failure> {
    let chart = cfg.chart()?;
    let field = cfg.torsion(chart.dim())?;
    let (g, method) = cfg.geodesic(chart.dim())?;
    let start = GeodesicState {
        gamma: g.point.clone(),
        gamma_prime: g.velocity.clone(),
    };
    let traj = integrate(&chart, &field, &start, g.step, g.steps, method)?;
    let drift = speed_drift(&traj, &chart);
    let mut summary = format!(
        "geodesic: {} samples, speed drift {}",
        traj.samples.len(),
        e(drift)
    );
    if traj.truncated {
        summary.push_str(", truncated at the chart boundary");
    }
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: "trajectory.csv",
            contents: trajectory_csv(&traj, &chart),
        }],
        primary: 0,
        summary,
        failed: false,
    })
}

fn run_solver(
    cfg: &ProblemConfig,
    start: &MapState,
    field: &TorsionField,
) -> Result<(MapState, ConvergenceReport), Failure> {
    Ok(match cfg.method() {
        SolverMethod::FixedPoint => solve_fixed_point(start, field, &cfg.fixed_point()?)?,
        SolverMethod::Newton => solve_newton(start, field, &cfg.newton()?)?,
    })
}

pub fn solve(cfg: &ProblemConfig) -> Result<Outcome, Failure> {
    let start = cfg.initial_map()?;
    let field = cfg.torsion(start.dim())?;
    let (map, report) = run_solver(cfg, &start, &field)?;
    let summary = format!(
        "solve: {:?} after {} iterations, residual {} -> {}, energy {}",
        report.terminated,
        report.iterations,
        e(report.initial_residual),
        e(report.final_residual),
        e(report.final_energy)
    );
    Ok(Outcome {
        artifacts: vec![
            Artifact {
                name: "map.csv",
                contents: map_csv(&map),
            },
            Artifact {
                name: "report.json",
                contents: json(&report),
            },
        ],
        primary: 1,
        summary,
        failed: false,
    })
}

#[derive(Serialize)]
struct ComponentNorms {
    total: f64,
    vectorial: f64,
    antisymmetric: f64,
    cartan: f64,
}

#[derive(Serialize)]
struct Orthogonality {
    vectorial_antisymmetric: f64,
    vectorial_cartan: f64,
    antisymmetric_cartan: f64,
}

#[derive(Serialize)]
struct Decomposition {
    dim: usize,
    vector_v: Vec<f64>,
    norms: ComponentNorms,
    orthogonality: Orthogonality,
    reconstruction_residual: f64,
}

pub fn decompose(cfg: &ProblemConfig) -> Result<Outcome, Failure> {
    let d = cfg.decompose()?;
    let n = d.dim;
    let h = match &d.metric {
        Some(m) => DMatrix::from_row_slice(n, n, m),
        None => DMatrix::identity(n, n),
    };
    if (&h - h.transpose()).amax() > 1e-12 * h.amax() {
        return Err(ConfigError::at("decompose.metric", "metric must be symmetric").into());
    }
    let hinv = h
        .clone()
        .cholesky()
        .ok_or_else(|| ConfigError::at("decompose.metric", "metric must be positive definite"))?
        .inverse();
    let lowered = match &d.coefficients {
        Some(c) => Tensor3::from_vec(n, c.clone()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            skew_last_two(&Tensor3::from_fn(n, |_, _, _| rng.random_range(-1.0..1.0)))
        }
    };
    let a = TorsionCoeffs::from_lowered(lowered, &hinv);
    let parts = cartan_decompose(&a, &h)?;
    let ip = |x: &TorsionCoeffs, y: &TorsionCoeffs| tensor_inner(&x.lowered, &y.lowered, &hinv);
    let norm = |x: &TorsionCoeffs| ip(x, x).max(0.0).sqrt();
    let (v, s, c) = (
        &parts.vectorial_part,
        &parts.antisymmetric_part,
        &parts.cartan_part,
    );
    let out = Decomposition {
        dim: n,
        vector_v: parts.vector_v.clone(),
        norms: ComponentNorms {
            total: norm(&a),
            vectorial: norm(v),
            antisymmetric: norm(s),
            cartan: norm(c),
        },
        orthogonality: Orthogonality {
            vectorial_antisymmetric: ip(v, s),
            vectorial_cartan: ip(v, c),
            antisymmetric_cartan: ip(s, c),
        },
        reconstruction_residual: parts.sum().max_abs_diff(&a.lowered),
    };
    let worst = [
        out.orthogonality.vectorial_antisymmetric,
        out.orthogonality.vectorial_cartan,
        out.orthogonality.antisymmetric_cartan,
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()));
    let summary = format!(
        "decompose: n = {n}, norms vectorial {} antisymmetric {} cartan {}, max orthogonality residual {}",
        e(out.norms.vectorial),
        e(out.norms.antisymmetric),
        e(out.norms.cartan),
        e(worst)
    );
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: "decomposition.json",
            contents: json(&out),
        }],
        primary: 0,
        summary,
        failed: false,
    })
}

pub fn verify() -> Result<Outcome, Failure> {
    let reports = run_suite()?;
    let failed = failures(&reports).len();
    let summary = format!("verify: {} identities, {} failed", reports.len(), failed);
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: "verify.json",
            contents: json(&reports),
        }],
        primary: 0,
        summary,
        failed: failed > 0,
    })
}

pub fn spectrum_cmd(cfg: &ProblemConfig) -> Result<Outcome, Failure> {
    let start = cfg.initial_map()?;
    let field = cfg.torsion(start.dim())?;
    let map = if cfg.spectrum.solve_first {
        run_solver(cfg, &start, &field)?.0
    } else {
        start
    };
    let op = JacobiOperator::assemble(&map, &field, cfg.jacobi_form())?;
    let values = spectrum(&op, cfg.spectrum.count)?;
    let smallest = values
        .first()
        .map(|v| format!("{} {:+.3e}i", e(v.re), v.im))
        .unwrap_or_else(|| "none".into());
    let summary = format!(
        "spectrum: {} eigenvalues of a {}x{} operator, smallest {smallest}, asymmetry {}",
        values.len(),
        op.size(),
        op.size(),
        e(op.asymmetry())
    );
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: "spectrum.json",
            contents: json(&values),
        }],
        primary: 0,
        summary,
        failed: false,
    })
}

#[derive(Serialize)]
struct EnergyReport {
    dirichlet_energy: f64,
    sup_tension: f64,
    sup_tension_tor: f64,
    morrey_norm: Option<f64>,
    /// Symmetric energy-gradient check along `τ^tor` with step 1e-3.
    gradient_check: f64,
}

pub fn energy(cfg: &ProblemConfig) -> Result<Outcome, Failure> {
    let map = cfg.initial_map()?;
    let field = cfg.torsion(map.dim())?;
    let radii = cfg.radii()?;
    let tau = tension(&map)?;
    let tau_tor = tension_tor(&map, &field)?;
    let out = EnergyReport {
        dirichlet_energy: dirichlet_energy(&map),
        sup_tension: sup_norm(&tau),
        sup_tension_tor: sup_norm(&tau_tor),
        morrey_norm: if radii.is_empty() {
            None
        } else {
            Some(morrey_norm(&map, radii)?)
        },
        gradient_check: energy_gradient_check_central(&map, &field, &tau_tor, 1e-3)?,
    };
    let summary = format!(
        "energy: {}, sup |tau| {}, sup |tau_tor| {}",
        e(out.dirichlet_energy),
        e(out.sup_tension),
        e(out.sup_tension_tor)
    );
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: "energy.json",
            contents: json(&out),
        }],
        primary: 0,
        summary,
        failed: false,
    })
}
