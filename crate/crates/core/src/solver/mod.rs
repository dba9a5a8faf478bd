//! The time stepper: advective fractional step, neighbor maintenance, shape
//! function rebuild, diffusive fractional step and diagnostics.

pub mod advection;
pub mod assembly;
pub mod diffusion;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use advection::{advect_step, AdvectionField, NamedFlow};
pub use assembly::{assemble_consistent_mass, assemble_flux, assemble_lumped_mass, SparseSymmetric};
pub use diffusion::{diffusive_step, min_shared_spacing, nodal_velocities, stable_dt, update_material_points, DiffusionReport};

use crate::discretization::{build_neighbors, needs_rebuild, seed_with, MaterialPointSet, NeighborTable, NodeSet, SeedOptions};
use crate::maxent::{build_shape_table, ShapeTable};
use crate::oracle::entropy;
use crate::{io, Domain, OtmError, Point, Result, SimConfig};

/// Material points farther than this fraction of the domain diameter outside
/// the boundary count as spilled.
const SPILL_TOL: f64 = 1e-9;

pub(crate) fn check_containment(mps: &MaterialPointSet, domain: &Domain) -> Result<()> {
    let tol = SPILL_TOL * domain.diameter();
    for (p, x) in mps.positions().iter().enumerate() {
        let d = domain.signed_distance(x);
        if d > tol {
            return Err(OtmError::Spill {
                particle: p,
                position: [x.x, x.y, x.z],
                distance: d,
            });
        }
    }
    Ok(())
}

/// One history row.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    /// Step size used to reach `time` (zero for the initial row).
    pub dt: f64,
    pub mass: f64,
    /// `Σ m_p / Σ v_p`.
    pub mean_density: f64,
    pub volume: f64,
    /// Largest node distance from the initial mass centroid.
    pub max_radius: f64,
    pub entropy: f64,
    /// Mass-weighted variance of particle positions.
    pub second_moment: f64,
    /// Neighbor rebuilds so far.
    pub rebuilds: usize,
    pub rebuilt: bool,
    pub newton_iterations: usize,
    pub newton_max: usize,
    pub frozen_nodes: usize,
    pub projected_nodes: usize,
    /// Seconds spent in the step.
    pub wall_clock: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunHistory {
    pub rows: Vec<StepDiagnostics>,
}

/// A run that stopped on an error, with the rows recorded before it.
#[derive(Debug)]
pub struct RunFailure {
    pub history: RunHistory,
    pub error: OtmError,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let step = self.history.rows.last().map_or(0, |r| r.step);
        write!(f, "run aborted after step {step}: {}", self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimConfig,
    pub nodes: NodeSet,
    pub mps: MaterialPointSet,
    pub table: NeighborTable,
    pub shape: ShapeTable,
    pub time: f64,
    pub step: usize,
    pub rebuilds: usize,
    origin: Point,
    last: Option<StepDiagnostics>,
}

impl Simulation {
    /// Seeds the initial region and builds neighborhoods and shape functions.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let opts = SeedOptions {
            surface_factor: config.surface_factor,
            interior_factor: config.interior_factor,
            salt: config.seed,
            ..SeedOptions::default()
        };
        let (nodes, mps) = seed_with(&config.domain, &config.region, config.spacing, config.rho0, &opts)?;
        Self::from_state(config, nodes, mps)
    }

    pub fn from_state(config: SimConfig, nodes: NodeSet, mps: MaterialPointSet) -> Result<Self> {
        config.validate()?;
        mps.validate()?;
        check_containment(&mps, &config.domain)?;
        let table = build_neighbors(&nodes, &mps, &config.lme)?;
        let shape = build_shape_table(&nodes, &mps, &table, &config.lme)?;
        let origin = mps.centroid();
        Ok(Simulation {
            config,
            nodes,
            mps,
            table,
            shape,
            time: 0.0,
            step: 0,
            rebuilds: 0,
            origin,
            last: None,
        })
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Diagnostics of the current state; step statistics come from the last step.
    pub fn diagnostics(&self) -> StepDiagnostics {
        let max_radius = self
            .nodes
            .positions
            .iter()
            .map(|x| (x - self.origin).norm())
            .fold(0.0, f64::max);
        let mass = self.mps.total_mass();
        let volume = self.mps.total_volume();
        let mut d = self.last.clone().unwrap_or(StepDiagnostics {
            step: 0,
            time: 0.0,
            dt: 0.0,
            mass,
            mean_density: 0.0,
            volume,
            max_radius,
            entropy: 0.0,
            second_moment: 0.0,
            rebuilds: 0,
            rebuilt: false,
            newton_iterations: self.shape.newton_iterations,
            newton_max: self.shape.newton_max,
            frozen_nodes: 0,
            projected_nodes: 0,
            wall_clock: 0.0,
        });
        d.step = self.step;
        d.time = self.time;
        d.mass = mass;
        d.volume = volume;
        d.mean_density = mass / volume;
        d.max_radius = max_radius;
        d.entropy = entropy(self.mps.masses(), self.mps.volumes());
        d.second_moment = self.mps.second_moment();
        d.rebuilds = self.rebuilds;
        d
    }

    /// Step size the next step would use, ignoring the end time.
    pub fn next_dt(&self) -> f64 {
        let stable = stable_dt(&self.nodes, &self.table, self.config.kappa, self.config.safety);
        self.config.dt_cap.map_or(stable, |cap| cap.min(stable))
    }

    /// Advances by `min(dt cap, stable dt, time left)`.
    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let left = self.config.end_time - self.time;
        let dt = self.next_dt().min(left);
        if !dt.is_finite() || !(dt > 0.0) {
            return Err(OtmError::InvalidState(format!("no admissible time step (dt = {dt})")));
        }
        self.step_with(dt)
    }

    /// Advances by exactly `dt`.
    pub fn step_with(&mut self, dt: f64) -> Result<StepDiagnostics> {
        let start = Instant::now();
        let c = &self.config;
        let projected_adv = advect_step(&mut self.nodes, &mut self.mps, &c.advection, dt, &c.domain)?;
        let rebuilt = needs_rebuild(&self.table, &self.nodes, &self.mps, c.rebuild_tol);
        if rebuilt {
            self.table = build_neighbors(&self.nodes, &self.mps, &c.lme)?;
            self.rebuilds += 1;
        }
        self.shape = build_shape_table(&self.nodes, &self.mps, &self.table, &c.lme)?;
        let report = if c.kappa > 0.0 {
            let r = diffusive_step(
                &mut self.nodes,
                &mut self.mps,
                &self.shape,
                &self.table,
                c.kappa,
                dt,
                c.lumped,
                &c.domain,
            )?;
            check_containment(&self.mps, &c.domain)?;
            r
        } else {
            DiffusionReport::default()
        };
        self.time += dt;
        self.step += 1;
        self.last = Some(StepDiagnostics {
            step: self.step,
            time: self.time,
            dt,
            mass: 0.0,
            mean_density: 0.0,
            volume: 0.0,
            max_radius: 0.0,
            entropy: 0.0,
            second_moment: 0.0,
            rebuilds: self.rebuilds,
            rebuilt,
            newton_iterations: self.shape.newton_iterations,
            newton_max: self.shape.newton_max,
            frozen_nodes: report.frozen,
            projected_nodes: projected_adv + report.projected,
            wall_clock: start.elapsed().as_secs_f64(),
        });
        Ok(self.diagnostics())
    }

    pub fn finished(&self) -> bool {
        let end = self.config.end_time;
        self.time >= end * (1.0 - 1e-12) || self.config.max_steps.is_some_and(|n| self.step >= n)
    }
}

/// Runs a configuration to its end time (or step limit).
///
/// With an output directory, writes `history.csv` (also on failure, with the
/// rows recorded so far) and, when enabled, `snapshot_<step>.csv` at every
/// cadence tick. The final step is always recorded.
pub fn run(config: &SimConfig, out: Option<&Path>) -> std::result::Result<RunHistory, RunFailure> {
    let mut history = RunHistory::default();
    let fail = |history: RunHistory, error: OtmError| RunFailure { history, error };
    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return Err(fail(history, e.into()));
        }
    }
    let mut sim = match Simulation::new(config.clone()) {
        Ok(s) => s,
        Err(e) => {
            if let Some(dir) = out {
                let _ = io::write_history(&dir.join("history.csv"), &history);
            }
            return Err(fail(history, e));
        }
    };
    let emit = |sim: &Simulation, history: &mut RunHistory, row: StepDiagnostics| -> Result<()> {
        history.rows.push(row);
        if let (Some(dir), true) = (out, config.snapshots) {
            io::write_snapshot(&snapshot_path(dir, sim.step), &sim.nodes, &sim.mps, sim.time)?;
        }
        Ok(())
    };
    let mut result = emit(&sim, &mut history, sim.diagnostics());
    while result.is_ok() && !sim.finished() {
        result = sim.step().and_then(|row| {
            if sim.step % config.cadence == 0 || sim.finished() {
                emit(&sim, &mut history, row)
            } else {
                Ok(())
            }
        });
        if let Ok(()) = result {
            log::debug!("step {} t = {:.6e}", sim.step, sim.time);
        }
    }
    if let Some(dir) = out {
        let written = io::write_history(&dir.join("history.csv"), &history);
        if let (Ok(()), Err(e)) = (&result, written) {
            result = Err(e);
        }
    }
    match result {
        Ok(()) => Ok(history),
        Err(e) => Err(fail(history, e)),
    }
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:06}.csv"))
}
