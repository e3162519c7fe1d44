//! Time integration of `u_t = Δu + f(u)` on a [`MappedGrid`].

use serde::{Deserialize, Serialize};

use crate::geometry::{slot, MappedGrid};
use crate::kinetics::Reaction;
use crate::linear::{bicgstab, BandLu, LinePreconditioner, NinePoint, Workspace};
use crate::{Error, Real, Result};

/// Nodal values on a grid at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<S> {
    pub nx: usize,
    pub neta: usize,
    pub time: S,
    pub values: Vec<S>,
}

impl<S: Real> Field<S> {
    pub fn new(grid: &MappedGrid<S>, time: S, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {} x {} grid",
                values.len(),
                grid.nx(),
                grid.neta()
            )));
        }
        Ok(Self {
            nx: grid.nx(),
            neta: grid.neta(),
            time,
            values,
        })
    }

    pub fn constant(grid: &MappedGrid<S>, time: S, value: S) -> Self {
        Self {
            nx: grid.nx(),
            neta: grid.neta(),
            time,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x₁, ρ)` at every node.
    pub fn from_fn(grid: &MappedGrid<S>, time: S, f: impl Fn(S, S) -> S) -> Self {
        Self {
            nx: grid.nx(),
            neta: grid.neta(),
            time,
            values: grid.sample(f),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> S {
        self.values
            .iter()
            .copied()
            .fold(S::infinity(), |a, b| a.min(b))
    }

    pub fn max(&self) -> S {
        self.values
            .iter()
            .copied()
            .fold(S::neg_infinity(), |a, b| a.max(b))
    }

    pub fn matches_grid(&self, grid: &MappedGrid<S>) -> Result<()> {
        if self.nx != grid.nx() || self.neta != grid.neta() || self.values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field is {} x {}, grid is {} x {}",
                self.nx,
                self.neta,
                grid.nx(),
                grid.neta()
            )));
        }
        Ok(())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.nx != other.nx || self.neta != other.neta || self.values.len() != other.values.len()
        {
            return Err(Error::GridMismatch(format!(
                "{} x {} against {} x {}",
                self.nx, self.neta, other.nx, other.neta
            )));
        }
        Ok(())
    }
}

/// Time discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Backward-Euler diffusion with an explicit reaction.
    ImexBe,
    /// Heun's method on the full right-hand side.
    ExplicitRk2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImexBe => "imex-be",
            Scheme::ExplicitRk2 => "explicit-rk2",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex-be" => Ok(Scheme::ImexBe),
            "explicit-rk2" => Ok(Scheme::ExplicitRk2),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Time-stepping parameters.
#[derive(Clone, Debug)]
pub struct StepperConfig<S> {
    pub dt: S,
    pub scheme: Scheme,
    /// Relative residual tolerance of the linear solve.
    pub tol: S,
    pub max_iter: usize,
    /// Time between observer callbacks.
    pub observe_interval: S,
}

impl<S: Real> StepperConfig<S> {
    /// IMEX with `dt = 0.1·Δx` for the far-field spacing `Δx` of the grid.
    pub fn default_for(grid: &MappedGrid<S>) -> Self {
        Self {
            dt: S::of(0.1) * grid.max_dx(),
            scheme: Scheme::ImexBe,
            tol: S::of(1e-10),
            max_iter: 500,
            observe_interval: S::of(0.5),
        }
    }

    /// Largest stable explicit step, `1 / max |w_center|`.
    pub fn explicit_limit(grid: &MappedGrid<S>) -> S {
        let worst = (0..grid.len())
            .map(|k| grid.weights(k)[slot(0, 0)].abs())
            .fold(S::zero(), |a, b| a.max(b));
        S::one() / worst
    }

    pub fn validate(&self, grid: &MappedGrid<S>) -> Result<()> {
        if !(self.dt > S::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.tol > S::zero()) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "linear tolerance and iteration cap must be positive".into(),
            ));
        }
        if !(self.observe_interval > S::zero()) {
            return Err(Error::InvalidParameter(
                "observe_interval must be positive".into(),
            ));
        }
        if self.scheme == Scheme::ExplicitRk2 {
            let limit = Self::explicit_limit(grid);
            if self.dt > limit {
                return Err(Error::InvalidParameter(format!(
                    "dt = {} exceeds the explicit stability limit {}",
                    self.dt, limit
                )));
            }
        }
        Ok(())
    }

    /// Steps between observer callbacks, `max(1, round(interval/dt))`.
    pub fn cadence(&self) -> usize {
        (self.observe_interval / self.dt)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1)
    }
}

/// Reusable time stepper for one grid and one step size.
pub struct Stepper<'g, S: Real> {
    grid: &'g MappedGrid<S>,
    cfg: StepperConfig<S>,
    system: NinePoint<S>,
    pre: LinePreconditioner<S>,
    work: Workspace<S>,
    /// Banded factors, built once the iterative solve has failed.
    direct: Option<BandLu<S>>,
    /// Iterations used by the last linear solve; zero for the direct path.
    pub last_iterations: usize,
}

impl<'g, S: Real> Stepper<'g, S> {
    pub fn new(grid: &'g MappedGrid<S>, cfg: StepperConfig<S>) -> Result<Self> {
        cfg.validate(grid)?;
        let n = grid.len();
        let dt = cfg.dt;
        // (I - dt L)
        let coupling: Vec<[S; 9]> = (0..n).map(|k| grid.weights(k).map(|w| -dt * w)).collect();
        let system = NinePoint {
            nx: grid.nx(),
            neta: grid.neta(),
            diag: vec![S::one(); n],
            coupling,
        };
        let pre = LinePreconditioner::new(&system);
        Ok(Self {
            grid,
            cfg,
            system,
            pre,
            work: Workspace::default(),
            direct: None,
            last_iterations: 0,
        })
    }

    pub fn config(&self) -> &StepperConfig<S> {
        &self.cfg
    }

    pub fn grid(&self) -> &MappedGrid<S> {
        self.grid
    }

    /// Advances `u` by one step in place.
    pub fn advance<R: Reaction<S> + ?Sized>(
        &mut self,
        u: &mut Field<S>,
        reaction: &R,
    ) -> Result<()> {
        u.matches_grid(self.grid)?;
        let dt = self.cfg.dt;
        match self.cfg.scheme {
            Scheme::ImexBe => {
                let b: Vec<S> = u.values.iter().map(|&v| v + dt * reaction.f(v)).collect();
                let mut x = b.clone();
                if self.direct.is_none() {
                    match bicgstab(
                        &self.system,
                        &self.pre,
                        &b,
                        &mut x,
                        self.cfg.tol,
                        self.cfg.max_iter,
                        &mut self.work,
                    ) {
                        Ok(iters) => self.last_iterations = iters,
                        Err(Error::Convergence { .. }) => {
                            // strongly non-M-matrix transitions defeat the line
                            // preconditioner; the matrix is fixed, so factor it once
                            self.direct = Some(BandLu::factor(&self.system)?);
                        }
                        Err(e) => return Err(e),
                    }
                }
                if let Some(lu) = &self.direct {
                    x.copy_from_slice(&b);
                    lu.solve(&mut x);
                    self.last_iterations = 0;
                }
                u.values = x;
            }
            Scheme::ExplicitRk2 => {
                let n = u.len();
                let mut k1 = vec![S::zero(); n];
                self.grid.apply(&u.values, &mut k1);
                for (k, &v) in k1.iter_mut().zip(&u.values) {
                    *k += reaction.f(v);
                }
                let mid: Vec<S> = u
                    .values
                    .iter()
                    .zip(&k1)
                    .map(|(&v, &k)| v + dt * k)
                    .collect();
                let mut k2 = vec![S::zero(); n];
                self.grid.apply(&mid, &mut k2);
                for (k, &v) in k2.iter_mut().zip(&mid) {
                    *k += reaction.f(v);
                }
                let half = S::of(0.5) * dt;
                for ((v, a), b) in u.values.iter_mut().zip(&k1).zip(&k2) {
                    *v += half * (*a + *b);
                }
            }
        }
        u.time += dt;
        if u.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite value at t = {}",
                u.time
            )));
        }
        Ok(())
    }
}

/// One time step of `u_t = Δu + f(u)`.
pub fn step<S: Real, R: Reaction<S> + ?Sized>(
    grid: &MappedGrid<S>,
    u: &Field<S>,
    reaction: &R,
    cfg: &StepperConfig<S>,
) -> Result<Field<S>> {
    let mut stepper = Stepper::new(grid, cfg.clone())?;
    let mut out = u.clone();
    stepper.advance(&mut out, reaction)?;
    Ok(out)
}

/// Callbacks during [`integrate`].
pub trait Observer<S: Real> {
    /// Called after every step with the previous and the new field.
    fn on_step(&mut self, _prev: &Field<S>, _next: &Field<S>) {}
    /// Called at the observation cadence and once at the end.
    fn on_observe(&mut self, _u: &Field<S>) {}
}

/// Outcome of [`integrate`].
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub field: Field<S>,
    pub steps: usize,
    pub observation_times: Vec<S>,
}

/// Integrates from `u0.time` to `t_end`, adjusting `dt` down so the horizon is hit exactly.
pub fn integrate<S: Real, R: Reaction<S> + ?Sized>(
    grid: &MappedGrid<S>,
    u0: Field<S>,
    reaction: &R,
    cfg: &StepperConfig<S>,
    t_end: S,
    observers: &mut [&mut dyn Observer<S>],
) -> Result<Trajectory<S>> {
    if !(t_end > u0.time) {
        return Err(Error::InvalidParameter(format!(
            "t_end = {} must exceed the start time {}",
            t_end, u0.time
        )));
    }
    cfg.validate(grid)?;
    let span = t_end - u0.time;
    let steps = (span / cfg.dt - S::of(1e-9))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let mut local = cfg.clone();
    local.dt = span / S::of_usize(steps);
    let t0 = u0.time;
    let cadence = local.cadence();
    let mut stepper = Stepper::new(grid, local)?;
    let mut u = u0;
    let mut prev = u.clone();
    let mut observation_times = Vec::new();
    for n in 1..=steps {
        prev.values.copy_from_slice(&u.values);
        prev.time = u.time;
        stepper.advance(&mut u, reaction)?;
        // pin the clock to avoid drift from repeated addition
        u.time = t0 + span * S::of_usize(n) / S::of_usize(steps);
        for obs in observers.iter_mut() {
            obs.on_step(&prev, &u);
        }
        if n % cadence == 0 || n == steps {
            for obs in observers.iter_mut() {
                obs.on_observe(&u);
            }
            observation_times.push(u.time);
        }
    }
    Ok(Trajectory {
        field: u,
        steps,
        observation_times,
    })
}

/// `max(u_lo - u_hi)` over all nodes.
pub fn comparison_check<S: Real>(u_lo: &Field<S>, u_hi: &Field<S>) -> Result<S> {
    u_lo.same_shape(u_hi)?;
    let scale = S::one().max(u_lo.time.abs());
    if (u_lo.time - u_hi.time).abs() > S::of(1e-9) * scale {
        return Err(Error::GridMismatch(format!(
            "fields at different times {} and {}",
            u_lo.time, u_hi.time
        )));
    }
    Ok(u_lo
        .values
        .iter()
        .zip(&u_hi.values)
        .map(|(&a, &b)| a - b)
        .fold(S::neg_infinity(), |m, d| m.max(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, build_grid};
    use crate::kinetics::make_cubic;

    #[test]
    fn equilibria_are_preserved() {
        let dom = build_domain(3, 1.0, 0.5, 3.0, -5.0, 10.0).unwrap();
        let grid = build_grid(&dom, 32, 16).unwrap();
        let nl = make_cubic(0.25).unwrap();
        let cfg = StepperConfig::default_for(&grid);
        for level in [0.0f64, 0.25, 1.0] {
            let u = Field::constant(&grid, 0.0, level);
            let next = step(&grid, &u, &nl, &cfg).unwrap();
            assert!(next.values.iter().all(|v| (v - level).abs() < 1e-12));
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::ImexBe, Scheme::ExplicitRk2] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
    }
}
