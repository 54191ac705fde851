use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::grf::GrfConfig;
use crate::solvers::{
    solve_antiderivative, solve_burgers, solve_diffusion_reaction, BurgersConfig, DiffusionConfig,
    Grid2D, OdeConfig, SolverError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    Ode,
    Diffusion,
    Burgers,
}

impl ProblemId {
    pub const ALL: [ProblemId; 3] = [ProblemId::Ode, ProblemId::Diffusion, ProblemId::Burgers];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Ode => "ode",
            ProblemId::Diffusion => "diffusion",
            ProblemId::Burgers => "burgers",
        }
    }

    /// Solver and input-field defaults for the problem.
    pub fn default_config(self) -> ProblemConfig {
        match self {
            ProblemId::Ode => ProblemConfig::Ode(OdeConfig::default()),
            ProblemId::Diffusion => ProblemConfig::Diffusion(DiffusionConfig::default()),
            ProblemId::Burgers => ProblemConfig::Burgers(BurgersConfig::default()),
        }
    }

    pub fn default_grf(self) -> GrfConfig {
        match self {
            ProblemId::Ode | ProblemId::Diffusion => GrfConfig::unit_interval(),
            ProblemId::Burgers => GrfConfig::periodic_ten(),
        }
    }

    /// Training points drawn per function for the FCN/CNN baselines.
    pub fn baseline_points(self) -> usize {
        match self {
            ProblemId::Ode => 50,
            ProblemId::Diffusion | ProblemId::Burgers => 100,
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ode" => Ok(ProblemId::Ode),
            "diffusion" => Ok(ProblemId::Diffusion),
            "burgers" => Ok(ProblemId::Burgers),
            other => Err(format!(
                "unknown problem '{other}' (expected ode, diffusion or burgers)"
            )),
        }
    }
}

/// Problem together with its solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ProblemConfig {
    Ode(OdeConfig),
    Diffusion(DiffusionConfig),
    Burgers(BurgersConfig),
}

/// Full solver output flattened to a node list. For space-time problems
/// node `i * nt + j` is `(x[i], t[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionGrid {
    pub coords: Array2<f64>,
    pub values: Vec<f64>,
    /// Spacing and origin per coordinate, used to map points back to nodes.
    axes: Vec<Axis>,
}

#[derive(Clone, Debug, PartialEq)]
struct Axis {
    origin: f64,
    step: f64,
    len: usize,
}

impl SolutionGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn from_nodes(xs: &[f64], values: Vec<f64>) -> Self {
        let coords =
            Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).expect("one coordinate per node");
        let step = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
        Self {
            coords,
            values,
            axes: vec![Axis {
                origin: xs[0],
                step,
                len: xs.len(),
            }],
        }
    }

    fn from_grid(g: &Grid2D) -> Self {
        let (nx, nt) = (g.nx(), g.nt());
        let mut coords = Array2::zeros((nx * nt, 2));
        let mut values = Vec::with_capacity(nx * nt);
        for i in 0..nx {
            for j in 0..nt {
                coords[[i * nt + j, 0]] = g.x[i];
                coords[[i * nt + j, 1]] = g.t[j];
                values.push(g.values[[i, j]]);
            }
        }
        let axis = |v: &[f64]| Axis {
            origin: v[0],
            step: if v.len() > 1 { v[1] - v[0] } else { 1.0 },
            len: v.len(),
        };
        Self {
            coords,
            values,
            axes: vec![axis(&g.x), axis(&g.t)],
        }
    }

    /// Node index of a grid point, if `point` lies on the grid.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.axes.len() {
            return None;
        }
        let mut index = 0;
        for (axis, &p) in self.axes.iter().zip(point) {
            let k = ((p - axis.origin) / axis.step).round();
            if k < 0.0 || k as usize >= axis.len {
                return None;
            }
            index = index * axis.len + k as usize;
        }
        let node = self.coords.row(index);
        node.iter()
            .zip(point)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()))
            .then_some(index)
    }
}

impl ProblemConfig {
    pub fn id(&self) -> ProblemId {
        match self {
            ProblemConfig::Ode(_) => ProblemId::Ode,
            ProblemConfig::Diffusion(_) => ProblemId::Diffusion,
            ProblemConfig::Burgers(_) => ProblemId::Burgers,
        }
    }

    /// Dimension of a query point `P`.
    pub fn query_dim(&self) -> usize {
        match self {
            ProblemConfig::Ode(_) => 1,
            _ => 2,
        }
    }

    /// Solve for one input function given at `sensors`.
    pub fn solve(&self, u: &[f64], sensors: &[f64]) -> Result<SolutionGrid, SolverError> {
        match self {
            ProblemConfig::Ode(cfg) => {
                let sol = solve_antiderivative(u, sensors, cfg)?;
                Ok(SolutionGrid::from_nodes(&sol.xs, sol.s))
            }
            ProblemConfig::Diffusion(cfg) => {
                let g = solve_diffusion_reaction(u, sensors, cfg)?;
                Ok(SolutionGrid::from_grid(&g))
            }
            ProblemConfig::Burgers(cfg) => {
                let expected = crate::solvers::periodic_grid(0.0, cfg.length, u.len());
                if sensors.len() != u.len()
                    || sensors
                        .iter()
                        .zip(&expected)
                        .any(|(a, b)| (a - b).abs() > 1e-9)
                {
                    return Err(SolverError::Input(
                        "Burgers initial conditions must be sampled on the uniform periodic grid"
                            .into(),
                    ));
                }
                let sol = solve_burgers(u, cfg)?;
                Ok(SolutionGrid::from_grid(&sol.grid))
            }
        }
    }
}
