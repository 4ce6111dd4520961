//! Exact simulation of `ẋ = Ax + Bu` under piecewise-constant controls and
//! empirical checks of the integral dissipation inequality
//!
//! ```text
//! V(x(t₂)) − V(x(t₁)) ≤ ∫_{t₁}^{t₂} ℓ(x, u) − ℓ(x_e, u_e) − α(‖x − x_e‖) dt.
//! ```
//!
//! A step of length `h` with constant input `u` is
//! `x ↦ e^{Ah}x + Φ(h)Bu`, `Φ(h) = ∫₀ʰ e^{As} ds`; both factors come from
//! one exponential of the augmented matrix `[[A, B], [0, 0]]·h`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::certifier::DissipativityCertificate;
use crate::ocp::OcpInstance;
use crate::scalar::Scalar;
use crate::spectral::max_abs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quadrature did not converge after {refinements} refinements (last change {change:e})")]
    QuadratureNotConverged { refinements: usize, change: f64 },
}

/// Piecewise-constant control: `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
/// Outside the breakpoints the nearest value is held.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal<T: Scalar> {
    breakpoints: Vec<T>,
    values: Vec<DVector<T>>,
}

impl<T: Scalar> ControlSignal<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<DVector<T>>) -> Result<Self, TrajectoryError> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(TrajectoryError::InvalidInput(format!(
                "{} breakpoints for {} intervals",
                breakpoints.len(),
                values.len()
            )));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) || !breakpoints.iter().all(|t| t.is_finite_value()) {
            return Err(TrajectoryError::InvalidInput("breakpoints must be finite and strictly ascending".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m || !v.iter().all(|x| x.is_finite_value())) {
            return Err(TrajectoryError::InvalidInput("control values must be finite and of equal length".into()));
        }
        Ok(Self { breakpoints, values })
    }

    /// `u ≡ value` on `[t0, t1)`.
    pub fn constant(value: DVector<T>, t0: T, t1: T) -> Result<Self, TrajectoryError> {
        Self::new(vec![t0, t1], vec![value])
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[DVector<T>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn value_at(&self, t: T) -> &DVector<T> {
        let idx = self.breakpoints[1..self.breakpoints.len() - 1]
            .iter()
            .take_while(|&&b| b <= t)
            .count();
        &self.values[idx]
    }

    /// Breakpoints strictly inside `(t0, t1)`.
    fn interior_breaks(&self, t0: T, t1: T) -> impl Iterator<Item = T> + '_ {
        self.breakpoints.iter().copied().filter(move |&b| b > t0 && b < t1)
    }

    /// `[t0, t1]` cut at the breakpoints, as `(start, end, value)` pieces.
    fn pieces(&self, t0: T, t1: T) -> Vec<(T, T, &DVector<T>)> {
        let mut cuts = vec![t0];
        cuts.extend(self.interior_breaks(t0, t1));
        cuts.push(t1);
        cuts.windows(2)
            .map(|w| (w[0], w[1], self.value_at((w[0] + w[1]) * T::half())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
    pub x0: DVector<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_state(&self) -> &DVector<T> {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("trajectory has at least one time")
    }
}

/// `(e^{Ah}, Φ(h)B)` for one step length.
#[derive(Debug, Clone)]
struct StepMap<T: Scalar> {
    h: T,
    transition: DMatrix<T>,
    input: DMatrix<T>,
}

impl<T: Scalar> StepMap<T> {
    fn new(a: &DMatrix<T>, b: &DMatrix<T>, h: T) -> Self {
        let (n, m) = (a.nrows(), b.ncols());
        let mut aug = DMatrix::<T>::zeros(n + m, n + m);
        aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
        aug.view_mut((0, n), (n, m)).copy_from(&(b * h));
        let e = aug.exp();
        Self {
            h,
            transition: e.view((0, 0), (n, n)).clone_owned(),
            input: e.view((0, n), (n, m)).clone_owned(),
        }
    }

    fn apply(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        &self.transition * x + &self.input * u
    }
}

/// Step maps keyed by exact step length; grids are mostly uniform.
struct StepCache<'a, T: Scalar> {
    a: &'a DMatrix<T>,
    b: &'a DMatrix<T>,
    maps: Vec<StepMap<T>>,
}

impl<'a, T: Scalar> StepCache<'a, T> {
    fn new(ocp: &'a OcpInstance<T>) -> Self {
        Self {
            a: ocp.a(),
            b: ocp.b(),
            maps: Vec::new(),
        }
    }

    fn step(&mut self, x: &DVector<T>, u: &DVector<T>, h: T) -> DVector<T> {
        if let Some(map) = self.maps.iter().find(|s| s.h == h) {
            return map.apply(x, u);
        }
        let map = StepMap::new(self.a, self.b, h);
        let next = map.apply(x, u);
        if self.maps.len() >= 8 {
            self.maps.remove(0);
        }
        self.maps.push(map);
        next
    }
}

fn check_dims<T: Scalar>(ocp: &OcpInstance<T>, x0: &DVector<T>, u: &ControlSignal<T>) -> Result<(), TrajectoryError> {
    if x0.len() != ocp.n() || u.dim() != ocp.m() {
        return Err(TrajectoryError::InvalidInput(format!(
            "x0 has length {}, u has dimension {}; expected {} and {}",
            x0.len(),
            u.dim(),
            ocp.n(),
            ocp.m()
        )));
    }
    if !x0.iter().all(|v| v.is_finite_value()) {
        return Err(TrajectoryError::InvalidInput("x0 is not finite".into()));
    }
    Ok(())
}

/// Mild solution on the grid `0, dt, 2dt, …, t_end`, refined to contain
/// every control breakpoint.
pub fn simulate<T: Scalar>(
    ocp: &OcpInstance<T>,
    x0: &DVector<T>,
    u: &ControlSignal<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>, TrajectoryError> {
    check_dims(ocp, x0, u)?;
    if !(dt > T::zero()) || !(t_end > T::zero()) || !dt.is_finite_value() || !t_end.is_finite_value() {
        return Err(TrajectoryError::InvalidInput("dt and t_end must be positive and finite".into()));
    }
    let steps = (t_end / dt).ceil().to_usize().unwrap_or(usize::MAX);
    if steps > 100_000_000 {
        return Err(TrajectoryError::InvalidInput("too many steps".into()));
    }
    let mut grid: Vec<T> = (0..steps).map(|k| dt * T::lit(k as f64)).collect();
    grid.push(t_end);
    grid.extend(u.interior_breaks(T::zero(), t_end));
    grid.sort_by(|x, y| x.partial_cmp(y).expect("finite grid"));
    grid.dedup();

    let mut cache = StepCache::new(ocp);
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.clone());
    for w in grid.windows(2) {
        let uk = u.value_at((w[0] + w[1]) * T::half());
        let next = cache.step(states.last().unwrap(), uk, w[1] - w[0]);
        states.push(next);
    }
    Ok(Trajectory {
        times: grid,
        states,
        x0: x0.clone(),
    })
}

/// State at `t1` starting from `x0` at `t0`, one exact step per control piece.
pub fn propagate<T: Scalar>(
    ocp: &OcpInstance<T>,
    x0: &DVector<T>,
    u: &ControlSignal<T>,
    t0: T,
    t1: T,
) -> Result<DVector<T>, TrajectoryError> {
    check_dims(ocp, x0, u)?;
    if t1 < t0 {
        return Err(TrajectoryError::InvalidInput("t1 < t0".into()));
    }
    let mut x = x0.clone();
    if t1 == t0 {
        return Ok(x);
    }
    for (s, e, v) in u.pieces(t0, t1) {
        x = StepMap::new(ocp.a(), ocp.b(), e - s).apply(&x, v);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationCheck<T> {
    pub holds: bool,
    /// `V(x(t₂)) − V(x(t₁))`.
    pub lhs: T,
    /// Quadrature of the supply minus the dissipation rate.
    pub rhs: T,
    /// `rhs − lhs`.
    pub margin: T,
    /// Slack granted to `lhs ≤ rhs`.
    pub slack: T,
}

const MAX_REFINEMENTS: usize = 20;

/// Composite Simpson on one piece with constant input, doubling the number
/// of panels until successive estimates agree.
fn simpson_piece<T: Scalar>(
    ocp: &OcpInstance<T>,
    cert: &DissipativityCertificate<T>,
    x_start: &DVector<T>,
    u: &DVector<T>,
    len: T,
    quad_tol: T,
    baseline: T,
) -> Result<T, TrajectoryError> {
    let integrand = |x: &DVector<T>| {
        ocp.cost(x, u) - baseline - cert.dissipation_rate((x - &cert.ss.x_e).norm())
    };
    let stiffness = (T::one() + max_abs(ocp.a())) * len / T::half();
    let mut panels = stiffness.ceil().to_usize().unwrap_or(2).max(2);
    panels += panels % 2;
    let mut previous: Option<T> = None;
    let mut change = T::zero();
    for _ in 0..=MAX_REFINEMENTS {
        let h = len / T::lit(panels as f64);
        let map = StepMap::new(ocp.a(), ocp.b(), h);
        let mut x = x_start.clone();
        let mut sum = integrand(&x);
        for j in 1..=panels {
            x = map.apply(&x, u);
            let weight = if j == panels {
                T::one()
            } else if j % 2 == 1 {
                T::lit(4.0)
            } else {
                T::two()
            };
            sum += weight * integrand(&x);
        }
        let estimate = sum * h / T::lit(3.0);
        if let Some(prev) = previous {
            change = (estimate - prev).abs();
            if change < quad_tol * (T::one() + estimate.abs()) {
                return Ok(estimate);
            }
        }
        previous = Some(estimate);
        panels *= 2;
    }
    Err(TrajectoryError::QuadratureNotConverged {
        refinements: MAX_REFINEMENTS,
        change: change.as_f64(),
    })
}

/// Checks the integral dissipation inequality along `x_u(·; x0)` on
/// `[t1, t2]`.
pub fn integral_dissipation_check<T: Scalar>(
    ocp: &OcpInstance<T>,
    cert: &DissipativityCertificate<T>,
    x0: &DVector<T>,
    u: &ControlSignal<T>,
    t1: T,
    t2: T,
    quad_tol: T,
) -> Result<DissipationCheck<T>, TrajectoryError> {
    check_dims(ocp, x0, u)?;
    if !(t1 >= T::zero() && t1 < t2) {
        return Err(TrajectoryError::InvalidInput("need 0 ≤ t1 < t2".into()));
    }
    if !(quad_tol > T::zero()) {
        return Err(TrajectoryError::InvalidInput("quad_tol must be positive".into()));
    }
    let baseline = ocp.cost(&cert.ss.x_e, &cert.ss.u_e);
    let x_start = propagate(ocp, x0, u, T::zero(), t1)?;
    let mut x = x_start.clone();
    let mut rhs = T::zero();
    for (s, e, v) in u.pieces(t1, t2) {
        rhs += simpson_piece(ocp, cert, &x, v, e - s, quad_tol, baseline)?;
        x = StepMap::new(ocp.a(), ocp.b(), e - s).apply(&x, v);
    }
    let v1 = cert.storage.evaluate(&x_start);
    let v2 = cert.storage.evaluate(&x);
    let lhs = v2 - v1;
    let slack = T::lit(10.0) * quad_tol * (T::one() + rhs.abs() + v1.abs() + v2.abs());
    Ok(DissipationCheck {
        holds: lhs <= rhs + slack,
        lhs,
        rhs,
        margin: rhs - lhs,
        slack,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialRecovery<T> {
    /// `(t₂, (lhs − rhs)/t₂)` for `t₂ = 1e-2, 1e-3, 1e-4`.
    pub quotients: Vec<(T, T)>,
    /// `V′(x₀)(Ax₀ + Bu₀) − (ℓ(x₀,u₀) − ℓ(x_e,u_e) − α(‖x₀ − x_e‖))`.
    pub pointwise_gap: T,
    /// `log₁₀` decay rate of `|quotient − pointwise_gap|` over the two
    /// decades; `None` when the errors are at rounding level.
    pub observed_order: Option<T>,
    pub holds: bool,
}

pub const RECOVERY_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Compares the difference quotients of the integral inequality on
/// `[0, t₂]` with the pointwise dissipation inequality at `(x0, u0)`.
pub fn differential_recovery_check<T: Scalar>(
    ocp: &OcpInstance<T>,
    cert: &DissipativityCertificate<T>,
    x0: &DVector<T>,
    u0: &DVector<T>,
) -> Result<DifferentialRecovery<T>, TrajectoryError> {
    let quad_tol = T::lit(1e-13).max(T::eps() * T::lit(16.0));
    let pointwise_gap = cert.pointwise_gap(ocp, x0, u0);
    let mut quotients = Vec::new();
    for &t2 in &RECOVERY_STEPS {
        let t2 = T::lit(t2);
        let u = ControlSignal::constant(u0.clone(), T::zero(), t2)?;
        let check = integral_dissipation_check(ocp, cert, x0, &u, T::zero(), t2, quad_tol)?;
        quotients.push((t2, (check.lhs - check.rhs) / t2));
    }
    let errors: Vec<T> = quotients.iter().map(|(_, q)| (*q - pointwise_gap).abs()).collect();
    let scale = T::one() + pointwise_gap.abs() + quotients[0].1.abs();
    let floor = T::lit(1e-9) * scale;
    let observed_order = (errors[0] > floor && errors[2] > T::zero())
        .then(|| (errors[0] / errors[2]).log10() / T::two());
    // O(t₂): the error constant measured at the coarsest step bounds the finest.
    let constant = errors[0] / quotients[0].0;
    let holds = errors[2] <= T::lit(10.0) * (constant + scale) * quotients[2].0 + floor;
    Ok(DifferentialRecovery {
        quotients,
        pointwise_gap,
        observed_order,
        holds,
    })
}
