//! Resolution of CLI matrix and right-hand-side specifications into a
//! verification [`Instance`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use skrylov::{Instance, InstanceSource, Rng, SparseSkewMatrix, Vector};

use crate::matrix_market::{read_matrix_market, LoadedMatrix, MmError};
use crate::CliError;

/// `n,density,seed` as accepted by `--random`.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorSpec {
    pub n: usize,
    pub density: f64,
    pub seed: u64,
}

impl FromStr for GeneratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("expected n,density,seed — got '{s}'"));
        }
        let n = parts[0]
            .trim()
            .parse()
            .map_err(|_| format!("bad n '{}'", parts[0]))?;
        let density = parts[1]
            .trim()
            .parse()
            .map_err(|_| format!("bad density '{}'", parts[1]))?;
        let seed = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad seed '{}'", parts[2]))?;
        Ok(GeneratorSpec { n, density, seed })
    }
}

/// Right-hand-side specification: `ones`, `random:SEED`, or a vector file in
/// Matrix Market array format.
#[derive(Debug, Clone)]
pub enum RhsSpec {
    Ones,
    Random { seed: u64 },
    File(PathBuf),
}

impl FromStr for RhsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ones" {
            return Ok(RhsSpec::Ones);
        }
        if let Some(seed) = s.strip_prefix("random:") {
            let seed = seed.parse().map_err(|_| format!("bad rhs seed '{seed}'"))?;
            return Ok(RhsSpec::Random { seed });
        }
        Ok(RhsSpec::File(PathBuf::from(s)))
    }
}

impl RhsSpec {
    pub fn resolve(&self, n: usize) -> Result<Vector, CliError> {
        match self {
            RhsSpec::Ones => Ok(Vector::from_element(n, 1.0)),
            RhsSpec::Random { seed } => {
                let mut rng = Rng::new(*seed);
                Ok(Vector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0)))
            }
            RhsSpec::File(path) => {
                let v =
                    crate::matrix_market::read_vector(path).map_err(|e| input_error(path, e))?;
                if v.len() != n {
                    return Err(CliError::Input(format!(
                        "{}: right-hand side has dimension {}, matrix has {}",
                        path.display(),
                        v.len(),
                        n
                    )));
                }
                Ok(v)
            }
        }
    }
}

fn input_error(path: &Path, e: MmError) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// An instance plus the comment metadata carried by its source file.
pub struct ResolvedProblem {
    pub instance: Instance,
    pub comments: Vec<String>,
}

/// Loads the matrix from a file or generator spec and pairs it with the
/// resolved right-hand side.
///
/// When `rhs` is not given, file-backed problems get the ones vector and
/// generated problems get the seed-derived random vector, so a single seed
/// pins the whole generated problem.
pub fn resolve_instance(
    matrix: Option<&Path>,
    random: Option<GeneratorSpec>,
    rhs: Option<&RhsSpec>,
) -> Result<ResolvedProblem, CliError> {
    match (matrix, random) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--matrix and --random are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "one of --matrix or --random is required".into(),
        )),
        (Some(path), None) => {
            let file = read_matrix_market(path).map_err(|e| input_error(path, e))?;
            let n = file.matrix.n();
            let rhs = rhs.unwrap_or(&RhsSpec::Ones).resolve(n)?;
            let source = InstanceSource::File {
                path: path.display().to_string(),
            };
            let instance = match file.matrix {
                LoadedMatrix::SparseSkew(m) => Instance::from_sparse(m, rhs, source),
                LoadedMatrix::Dense(m) => Instance::from_dense(m, rhs, source),
            };
            let instance =
                instance.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(ResolvedProblem {
                instance,
                comments: file.comments,
            })
        }
        (None, Some(spec)) => {
            if spec.n % 2 != 0 || spec.n < 2 {
                return Err(CliError::Usage(format!(
                    "--random dimension must be even and at least 2, got {}",
                    spec.n
                )));
            }
            if !(spec.density > 0.0 && spec.density <= 1.0) {
                return Err(CliError::Usage(format!(
                    "--random density must lie in (0, 1], got {}",
                    spec.density
                )));
            }
            let instance = match rhs {
                None => Instance::generated(spec.n, spec.density, spec.seed),
                Some(other) => {
                    let matrix = skrylov::random_skew(spec.n, spec.density, spec.seed)
                        .map_err(|e| CliError::Input(e.to_string()))?;
                    let rhs = other.resolve(spec.n)?;
                    Instance::from_sparse(
                        matrix,
                        rhs,
                        InstanceSource::Generated {
                            n: spec.n,
                            density: spec.density,
                            seed: spec.seed,
                        },
                    )
                }
            };
            let instance = instance.map_err(|e| CliError::Input(e.to_string()))?;
            Ok(ResolvedProblem {
                instance,
                comments: vec![],
            })
        }
    }
}

/// Writes a generated instance, used by the `generate` subcommand.
pub fn generate_matrix(spec: GeneratorSpec) -> Result<SparseSkewMatrix, CliError> {
    skrylov::random_skew(spec.n, spec.density, spec.seed)
        .map_err(|e| CliError::Input(e.to_string()))
}
