//! Experiment orchestration: run the exact oracle or the FEM pipeline over a
//! target, compare measured Neumann masses against the predicted
//! equidistribution values, and emit structured reports.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_modes::{self, AlcoveMode};
use crate::fem;
use crate::geometry::{EllipticCoefficients, Simplex, SimplexJson};
use crate::inverse;
use crate::quadrature::QuadratureRule;

/// Relative gap under which two discrete eigenvalues count as one cluster.
const CLUSTER_GAP: f64 = 1e-8;

/// Per-face comparison record.
#[derive(Debug, Clone, Serialize)]
pub struct FaceRecord {
    pub face: usize,
    pub predicted: f64,
    pub measured: f64,
    pub residual: f64,
}

/// One verification run: per-face predicted and measured Neumann masses for a
/// single eigenfunction.
#[derive(Debug, Clone, Serialize)]
pub struct NeumannReport {
    pub simplex: SimplexJson,
    /// "exact-oracle" or "fem-level-L".
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub mode: String,
    pub eigenvalue: f64,
    pub faces: Vec<FaceRecord>,
    pub max_residual: f64,
    /// Indices of other computed modes whose eigenvalues coincide to within
    /// the cluster gap (each member is still compared separately).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cluster_with: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl NeumannReport {
    pub fn with_timestamp(mut self, stamp: String) -> Self {
        self.timestamp = Some(stamp);
        self
    }
}

fn build_records(predicted: &[f64], measured: &[f64]) -> (Vec<FaceRecord>, f64) {
    let mut max_residual = 0.0f64;
    let records = predicted
        .iter()
        .zip(measured)
        .enumerate()
        .map(|(face, (&p, &m))| {
            let residual = (m - p).abs() / p;
            max_residual = max_residual.max(residual);
            FaceRecord {
                face,
                predicted: p,
                measured: m,
                residual,
            }
        })
        .collect();
    (records, max_residual)
}

/// Run the exact oracle: measure the Neumann mass of the alcove mode on every
/// face by quadrature and compare with the prediction.
pub fn verify_exact(
    dim: usize,
    wavenumbers: &[u32],
    quad_points: Option<usize>,
) -> Result<NeumannReport> {
    let mode = match quad_points {
        Some(p) => exact_modes::make_mode_with_points(dim, wavenumbers, p)?,
        None => exact_modes::make_mode(dim, wavenumbers)?,
    };
    let alcove = mode.alcove();
    let rule = match quad_points {
        Some(p) => QuadratureRule::simplex(dim - 1, p)?,
        None => mode.default_face_rule(),
    };
    let predicted = alcove.predicted_neumann_masses();
    let measured = exact_modes::all_face_masses(&mode, &rule)?;
    let (faces, max_residual) = build_records(&predicted, &measured);
    Ok(NeumannReport {
        simplex: SimplexJson::from(&alcove),
        source: "exact-oracle".into(),
        level: None,
        mode: mode_label(&mode),
        eigenvalue: mode.lambda(),
        faces,
        max_residual,
        cluster_with: Vec::new(),
        timestamp: None,
    })
}

fn mode_label(mode: &AlcoveMode) -> String {
    let ks: Vec<String> = mode.wavenumbers().iter().map(|k| k.to_string()).collect();
    format!("k=({})", ks.join(","))
}

/// What the FEM pipeline solves: the Laplacian on a given simplex, or a
/// constant-coefficient operator Gamma on the standard simplex.
#[derive(Debug, Clone)]
pub enum FemTarget {
    Laplace(Simplex),
    Coefficients(EllipticCoefficients),
}

impl FemTarget {
    fn simplex(&self) -> Result<Simplex> {
        match self {
            FemTarget::Laplace(s) => Ok(s.clone()),
            FemTarget::Coefficients(c) => Simplex::standard(c.dim()),
        }
    }

    fn coefficients(&self) -> EllipticCoefficients {
        match self {
            FemTarget::Laplace(s) => EllipticCoefficients::identity(s.dimension()),
            FemTarget::Coefficients(c) => c.clone(),
        }
    }

    fn predicted(&self) -> Result<Vec<f64>> {
        match self {
            FemTarget::Laplace(s) => Ok(s.predicted_neumann_masses()),
            FemTarget::Coefficients(c) => Ok(inverse::gamma_forward(c)?.by_face()),
        }
    }
}

/// One row of the convergence table: residuals of the ground mode per face at
/// one refinement level.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub eigenvalue: f64,
    pub measured: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Residual-vs-level table with observed convergence orders.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Observed per-face orders log2(r_L / r_{L+1}) between consecutive rows.
    pub fn observed_orders(&self) -> Vec<Vec<f64>> {
        self.rows
            .windows(2)
            .map(|w| {
                w[0].residuals
                    .iter()
                    .zip(&w[1].residuals)
                    .map(|(&coarse, &fine)| (coarse / fine).log2())
                    .collect()
            })
            .collect()
    }

    /// Richardson-style error bars from the two finest levels: for a
    /// first-order quantity the error is about the last increment per face.
    pub fn error_bars(&self) -> Option<Vec<f64>> {
        let n = self.rows.len();
        if n < 2 {
            return None;
        }
        Some(
            self.rows[n - 1]
                .measured
                .iter()
                .zip(&self.rows[n - 2].measured)
                .map(|(&fine, &coarse)| (fine - coarse).abs())
                .collect(),
        )
    }
}

/// Result of a FEM verification sweep.
#[derive(Debug, Clone)]
pub struct FemVerification {
    pub reports: Vec<NeumannReport>,
    pub table: ConvergenceTable,
}

/// Run the FEM pipeline at each level, measuring `num_modes` eigenfunctions.
/// Levels run in parallel; the worker count honors SIMPLEX_NEUMANN_THREADS
/// (0 or unset = automatic).
pub fn verify_fem(
    target: &FemTarget,
    levels: &[usize],
    num_modes: usize,
) -> Result<FemVerification> {
    if levels.is_empty() {
        return Err(Error::NumericalBreakdown("no levels requested".into()));
    }
    let simplex = target.simplex()?;
    let coeffs = target.coefficients();
    let predicted = target.predicted()?;
    let simplex_json = SimplexJson::from(&simplex);

    let per_level: Vec<(usize, Vec<NeumannReport>)> = with_thread_cap(|| {
        levels
            .par_iter()
            .map(|&level| -> Result<(usize, Vec<NeumannReport>)> {
                let mesh = fem::refine(&simplex, level)?;
                let sys = fem::assemble(&mesh, &coeffs)?;
                let pairs = fem::solve_eigenpairs(&sys, num_modes)?;
                let mut reports = Vec::with_capacity(pairs.len());
                for (i, pair) in pairs.iter().enumerate() {
                    let measured: Vec<f64> = fem::all_face_masses_fem(pair, &sys)?
                        .iter()
                        .map(|m| m.raw)
                        .collect();
                    let (faces, max_residual) = build_records(&predicted, &measured);
                    let cluster_with: Vec<usize> = pairs
                        .iter()
                        .enumerate()
                        .filter(|&(j, q)| {
                            j != i
                                && (q.eigenvalue - pair.eigenvalue).abs()
                                    < CLUSTER_GAP * pair.eigenvalue
                        })
                        .map(|(j, _)| j)
                        .collect();
                    reports.push(NeumannReport {
                        simplex: simplex_json.clone(),
                        source: format!("fem-level-{level}"),
                        level: Some(level),
                        mode: format!("mode-{i}"),
                        eigenvalue: pair.eigenvalue,
                        faces,
                        max_residual,
                        cluster_with,
                        timestamp: None,
                    });
                }
                Ok((level, reports))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (level, level_reports) in per_level {
        let ground = &level_reports[0];
        rows.push(ConvergenceRow {
            level,
            eigenvalue: ground.eigenvalue,
            measured: ground.faces.iter().map(|f| f.measured).collect(),
            residuals: ground.faces.iter().map(|f| f.residual).collect(),
            max_residual: ground.max_residual,
        });
        reports.extend(level_reports);
    }
    Ok(FemVerification {
        reports,
        table: ConvergenceTable { rows },
    })
}

/// CSV rows for a set of reports:
/// `source,n,level,mode,face,predicted,measured,residual`.
pub fn reports_to_csv(reports: &[NeumannReport]) -> String {
    let mut out = String::from("source,n,level,mode,face,predicted,measured,residual\n");
    for r in reports {
        let level = r.level.map(|l| l.to_string()).unwrap_or_default();
        for f in &r.faces {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.source,
                r.simplex.dimension,
                level,
                r.mode,
                f.face,
                f.predicted,
                f.measured,
                f.residual
            ));
        }
    }
    out
}

/// Run `f` under a rayon pool sized by SIMPLEX_NEUMANN_THREADS when the
/// variable is set to a positive value; otherwise the default pool.
fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var("SIMPLEX_NEUMANN_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_report_2d() {
        let report = verify_exact(2, &[2, 1], None).unwrap();
        assert_eq!(report.faces.len(), 3);
        assert!(report.max_residual < 1e-8);
        assert_eq!(report.source, "exact-oracle");
        assert_relative_eq!(report.eigenvalue, 5.0 * std::f64::consts::PI.powi(2));
    }

    #[test]
    fn exact_predictions_are_mode_independent() {
        let a = verify_exact(2, &[2, 1], None).unwrap();
        let b = verify_exact(2, &[5, 2], None).unwrap();
        assert!(b.max_residual < 1e-8);
        for (fa, fb) in a.faces.iter().zip(&b.faces) {
            assert_eq!(fa.predicted, fb.predicted);
        }
    }

    #[test]
    fn exact_3d_report() {
        let report = verify_exact(3, &[3, 2, 1], None).unwrap();
        assert_eq!(report.faces.len(), 4);
        assert!(report.max_residual < 1e-6);
    }

    #[test]
    fn report_predictions_standard_3_simplex_exact_values() {
        let s = Simplex::standard(3).unwrap();
        let predicted = s.predicted_neumann_masses();
        assert!((predicted[0] - 2.0 * 3.0f64.sqrt()).abs() < 1e-14);
        for &p in &predicted[1..] {
            assert!((p - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fem_verification_residuals_decrease() {
        let target = FemTarget::Laplace(Simplex::standard(2).unwrap());
        let run = verify_fem(&target, &[3, 4, 5], 1).unwrap();
        assert_eq!(run.table.rows.len(), 3);
        for w in run.table.rows.windows(2) {
            assert!(w[1].max_residual < w[0].max_residual);
        }
        assert!(run
            .reports
            .iter()
            .all(|r| r.faces.iter().all(|f| f.measured >= 0.0)));
    }

    #[test]
    fn random_simplex_fem_residuals_decrease() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = loop {
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            if let Ok(s) = Simplex::from_rows(&rows) {
                if s.volume() > 0.05 {
                    break s;
                }
            }
        };
        // Predictions are 2 len / (2 area) per face.
        let predicted = s.predicted_neumann_masses();
        for (j, f) in s.faces().iter().enumerate() {
            assert_relative_eq!(predicted[j], f.measure / s.volume(), max_relative = 1e-13);
        }
        let run = verify_fem(&FemTarget::Laplace(s), &[3, 4, 5], 1).unwrap();
        for w in run.table.rows.windows(2) {
            assert!(w[1].max_residual < w[0].max_residual);
        }
    }

    #[test]
    fn oracle_beats_fem_by_four_orders() {
        let exact = verify_exact(2, &[2, 1], None).unwrap();
        let fem_run =
            verify_fem(&FemTarget::Laplace(Simplex::alcove(2).unwrap()), &[4], 1).unwrap();
        let fem_res = fem_run.reports[0].max_residual;
        assert!(
            exact.max_residual < 1e-4 * fem_res,
            "oracle {:.3e} vs fem {:.3e}",
            exact.max_residual,
            fem_res
        );
    }

    #[test]
    fn csv_layout() {
        let report = verify_exact(2, &[2, 1], None).unwrap();
        let csv = reports_to_csv(&[report]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "source,n,level,mode,face,predicted,measured,residual"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("exact-oracle,2,,k=(2,1),0,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
