//! Optimization-based control allocation.
//!
//! The controller produces a four-dimensional virtual command (body-z force
//! plus three lifting-frame moments); the airframe offers six actuators
//! (four rotor thrusts, two elevon deflections). The mapping is the linear
//! effectiveness matrix `B`; the allocation solves the bound-constrained
//! weighted least-squares problem
//!
//! ```text
//!   min  ‖W_u (B δ − u_v,d)‖² + γ ‖W_δ (δ − δ_p)‖²
//!   s.t. δ_lo ≤ δ ≤ δ_hi
//! ```
//!
//! with an active-set method on the stacked least-squares form. The working
//! set changes by one bound per iteration with a Lagrange-multiplier sign
//! test for releases, and a warm start carries the previous cycle's active
//! set into the next solve.
//!
//! Sign convention: row 1 of `B` maps thrusts through `-cos(eta)`, i.e. it
//! produces the body-frame z force (down positive). The controller hands a
//! positive thrust demand `f_d`, so the virtual-control target carries
//! `-f_d` in its first slot. One sign error here flies the vehicle into the
//! ground; see [`AllocationProblem::from_demand`].

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::AllocationError;
use crate::vehicle::{static_moment_coefficients, AeroCoefficients, AirData, VehicleParams};

pub type Vector6 = SVector<f64, 6>;
pub type Matrix4x6 = SMatrix<f64, 4, 6>;

/// Effectiveness matrix `B` and the geometry constants behind it.
///
/// The aileron columns scale with dynamic pressure, so they vanish at hover
/// and grow with airspeed; the rotor block keeps rank 4 on its own.
#[derive(Debug, Clone)]
pub struct EffectivenessMatrix {
    pub b: Matrix4x6,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub q_dyn: f64,
}

/// Build the effectiveness matrix at dynamic pressure `q_dyn`.
pub fn build_effectiveness(
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
    q_dyn: f64,
) -> EffectivenessMatrix {
    debug_assert!(q_dyn >= 0.0);
    let (sk, ck) = params.kappa.sin_cos();
    let ce = params.eta.cos();
    let k1 = params.k1();
    let k2 = params.d_y * ce * ck + k1 * sk;
    let k3 = params.d_y * ce * ck - k1 * sk;
    let k4 = params.d_y * ce * sk + k1 * ck;
    let k5 = params.d_y * ce * sk - k1 * ck;
    let qsb = q_dyn * params.wing_area * params.wingspan;
    let qsc = q_dyn * params.wing_area * params.chord;
    let dxe = params.d_x * ce;
    let b = Matrix4x6::from_rows(&[
        [-ce, -ce, -ce, -ce, 0.0, 0.0].into(),
        [-k2, k3, k2, -k3, -qsb * coeffs.c_roll_delta_a, qsb * coeffs.c_roll_delta_a].into(),
        [dxe, -dxe, dxe, -dxe, qsc * coeffs.c_m_delta_e, qsc * coeffs.c_m_delta_e].into(),
        [-k5, k4, k5, -k4, -qsb * coeffs.c_n_delta_a, qsb * coeffs.c_n_delta_a].into(),
    ]);
    EffectivenessMatrix { b, k1, k2, k3, k4, k5, q_dyn }
}

/// Desired virtual control from the controller demand.
///
/// The moment targets subtract the wing's own static moments at the current
/// flight condition; `B δ` only has to cover the remainder.
pub fn assemble_virtual_control(
    f_d: f64,
    m_d: &Vector3<f64>,
    air: &AirData,
    omega_lifting: &Vector3<f64>,
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
) -> Vector4<f64> {
    let q_dyn = air.dynamic_pressure(params.rho);
    let qs = q_dyn * params.wing_area;
    let (c_roll, c_m, c_n) = static_moment_coefficients(air, omega_lifting, coeffs, params);
    Vector4::new(
        -f_d,
        m_d.x - qs * params.wingspan * c_roll,
        m_d.y - qs * params.chord * c_m,
        m_d.z - qs * params.wingspan * c_n,
    )
}

/// Secondary-objective target selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreferredMode {
    /// Stay near the previous actuator vector.
    Hold,
    /// Pull the four thrusts toward their common mean so moment production
    /// drifts to the ailerons; rotor speed changes are what costs energy.
    EnergySaving,
}

/// Preferred actuator vector for the secondary objective.
pub fn preferred_vector(delta_last: &Vector6, mode: PreferredMode) -> Vector6 {
    match mode {
        PreferredMode::Hold => *delta_last,
        PreferredMode::EnergySaving => {
            let mean = (delta_last[0] + delta_last[1] + delta_last[2] + delta_last[3]) / 4.0;
            Vector6::from_column_slice(&[mean, mean, mean, mean, delta_last[4], delta_last[5]])
        }
    }
}

/// One bound-constrained WLS instance.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub b: Matrix4x6,
    pub u_v_d: Vector4<f64>,
    /// Diagonal of the command-priority weight (4x4).
    pub w_u: Vector4<f64>,
    /// Diagonal of the actuator-priority weight (6x6).
    pub w_delta: Vector6,
    pub gamma: f64,
    pub delta_p: Vector6,
    pub lower: Vector6,
    pub upper: Vector6,
}

impl AllocationProblem {
    /// Assemble a problem from a thrust/moment demand.
    #[allow(clippy::too_many_arguments)]
    pub fn from_demand(
        eff: &EffectivenessMatrix,
        f_d: f64,
        m_d: &Vector3<f64>,
        air: &AirData,
        omega_lifting: &Vector3<f64>,
        params: &VehicleParams,
        coeffs: &AeroCoefficients,
        cfg: &AllocatorConfig,
        delta_last: &Vector6,
        dt: f64,
    ) -> Self {
        let (lower, upper) = cfg.bounds(delta_last, dt);
        Self {
            b: eff.b,
            u_v_d: assemble_virtual_control(f_d, m_d, air, omega_lifting, params, coeffs),
            w_u: Vector4::from_column_slice(&cfg.w_u),
            w_delta: Vector6::from_column_slice(cfg.w_delta()),
            gamma: cfg.gamma,
            delta_p: preferred_vector(delta_last, cfg.mode),
            lower,
            upper,
        }
    }

    /// Objective value at `delta`.
    pub fn objective(&self, delta: &Vector6) -> f64 {
        let r = self.b * delta - self.u_v_d;
        let d = delta - self.delta_p;
        let primary: f64 = r.iter().zip(self.w_u.iter()).map(|(r, w)| (w * r) * (w * r)).sum();
        let secondary: f64 =
            d.iter().zip(self.w_delta.iter()).map(|(d, w)| (w * d) * (w * d)).sum();
        primary + self.gamma * secondary
    }

    /// Gradient of the objective at `delta`.
    pub fn gradient(&self, delta: &Vector6) -> Vector6 {
        let mut wr = self.b * delta - self.u_v_d;
        for i in 0..4 {
            wr[i] *= self.w_u[i] * self.w_u[i];
        }
        let mut g = 2.0 * self.b.transpose() * wr;
        for i in 0..6 {
            g[i] += 2.0
                * self.gamma
                * self.w_delta[i]
                * self.w_delta[i]
                * (delta[i] - self.delta_p[i]);
        }
        g
    }
}

/// Per-variable working-set tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarTag {
    Free,
    Lower,
    Upper,
}

/// Warm-start token: previous solution and its active set.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub delta: Vector6,
    pub tags: [VarTag; 6],
}

/// Result of one allocation solve.
#[derive(Debug, Clone)]
pub struct AllocationResult {
    /// Optimal actuator vector, within bounds exactly.
    pub delta: Vector6,
    /// `B δ − u_v,d`.
    pub residual: Vector4<f64>,
    /// Final working set.
    pub tags: [VarTag; 6],
    /// Active-set iterations used.
    pub iterations: usize,
    /// False when the iteration cap was hit; `delta` is then best-so-far.
    pub converged: bool,
    pub objective: f64,
}

impl AllocationResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart { delta: self.delta, tags: self.tags }
    }

    /// Active set as a bitmask (bit set when the variable sits on a bound),
    /// for telemetry.
    pub fn active_bitmask(&self) -> u8 {
        let mut mask = 0u8;
        for (i, t) in self.tags.iter().enumerate() {
            if *t != VarTag::Free {
                mask |= 1 << i;
            }
        }
        mask
    }
}

const MAX_ITER: usize = 100;
const BOUND_TOL: f64 = 1e-12;
const KKT_TOL: f64 = 1e-9;

/// Solve the bound-constrained WLS problem with an active-set iteration.
///
/// Warm-starting from the previous cycle's active set usually converges in a
/// couple of iterations. The iteration cap returns the best feasible iterate
/// with `converged = false` instead of panicking; the control loop must keep
/// running.
pub fn allocate(
    problem: &AllocationProblem,
    warm: Option<&WarmStart>,
) -> Result<AllocationResult, AllocationError> {
    for i in 0..6 {
        if problem.lower[i] > problem.upper[i] {
            return Err(AllocationError::InfeasibleBounds {
                index: i,
                lower: problem.lower[i],
                upper: problem.upper[i],
            });
        }
    }

    // Stacked least-squares data: normal matrix and right-hand side of
    //   A = [W_u B; sqrt(gamma) W_delta], b = [W_u u_v_d; sqrt(gamma) W_delta delta_p].
    let mut h = SMatrix::<f64, 6, 6>::zeros();
    let mut c = Vector6::zeros();
    for r in 0..4 {
        let w2 = problem.w_u[r] * problem.w_u[r];
        for i in 0..6 {
            for j in 0..6 {
                h[(i, j)] += w2 * problem.b[(r, i)] * problem.b[(r, j)];
            }
            c[i] += w2 * problem.b[(r, i)] * problem.u_v_d[r];
        }
    }
    for i in 0..6 {
        let w2 = problem.gamma * problem.w_delta[i] * problem.w_delta[i];
        h[(i, i)] += w2;
        c[i] += w2 * problem.delta_p[i];
    }

    // Feasible start honoring the warm working set under the current bounds.
    let mut tags = warm.map(|w| w.tags).unwrap_or([VarTag::Free; 6]);
    let seed = warm.map(|w| w.delta).unwrap_or(problem.delta_p);
    let mut x = Vector6::zeros();
    for i in 0..6 {
        if problem.upper[i] - problem.lower[i] <= BOUND_TOL {
            tags[i] = VarTag::Lower; // pinned variable
        }
        x[i] = match tags[i] {
            VarTag::Lower => problem.lower[i],
            VarTag::Upper => problem.upper[i],
            VarTag::Free => seed[i].clamp(problem.lower[i], problem.upper[i]),
        };
    }

    let mut best = (problem.objective(&x), x, tags);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITER {
        iterations += 1;

        // Equality-constrained solve on the free set.
        let free: Vec<usize> = (0..6).filter(|&i| tags[i] == VarTag::Free).collect();
        let mut z = x;
        if !free.is_empty() {
            let n = free.len();
            let mut hf = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for (a, &i) in free.iter().enumerate() {
                rhs[a] = c[i];
                for (bidx, &j) in free.iter().enumerate() {
                    hf[(a, bidx)] = h[(i, j)];
                }
                for j in 0..6 {
                    if tags[j] != VarTag::Free {
                        rhs[a] -= h[(i, j)] * x[j];
                    }
                }
            }
            let sol = hf
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .unwrap_or_else(|| hf.lu().solve(&rhs).unwrap_or_else(|| rhs.clone()));
            for (a, &i) in free.iter().enumerate() {
                z[i] = sol[a];
            }
        }

        // Blocking-constraint search along x -> z.
        let mut step = 1.0;
        let mut blocker: Option<(usize, VarTag)> = None;
        for &i in &free {
            let di = z[i] - x[i];
            if di > BOUND_TOL && z[i] > problem.upper[i] {
                let a = (problem.upper[i] - x[i]) / di;
                if a < step {
                    step = a;
                    blocker = Some((i, VarTag::Upper));
                }
            } else if di < -BOUND_TOL && z[i] < problem.lower[i] {
                let a = (problem.lower[i] - x[i]) / di;
                if a < step {
                    step = a;
                    blocker = Some((i, VarTag::Lower));
                }
            }
        }

        match blocker {
            Some((i, tag)) => {
                for &j in &free {
                    x[j] += step * (z[j] - x[j]);
                    x[j] = x[j].clamp(problem.lower[j], problem.upper[j]);
                }
                x[i] = match tag {
                    VarTag::Upper => problem.upper[i],
                    _ => problem.lower[i],
                };
                tags[i] = tag;
            }
            None => {
                // Free block solved; check multiplier signs on the bounds.
                for &i in &free {
                    x[i] = z[i].clamp(problem.lower[i], problem.upper[i]);
                }
                let g = problem.gradient(&x);
                let mut worst: Option<(usize, f64)> = None;
                for i in 0..6 {
                    if problem.upper[i] - problem.lower[i] <= BOUND_TOL {
                        continue; // pinned: no release possible
                    }
                    let viol = match tags[i] {
                        VarTag::Lower => -g[i],
                        VarTag::Upper => g[i],
                        VarTag::Free => continue,
                    };
                    if viol > KKT_TOL && worst.map(|(_, v)| viol > v).unwrap_or(true) {
                        worst = Some((i, viol));
                    }
                }
                match worst {
                    Some((i, _)) => tags[i] = VarTag::Free,
                    None => {
                        converged = true;
                        let obj = problem.objective(&x);
                        if obj <= best.0 {
                            best = (obj, x, tags);
                        }
                        break;
                    }
                }
            }
        }

        let obj = problem.objective(&x);
        if obj < best.0 {
            best = (obj, x, tags);
        }
    }

    let (objective, delta, tags) = best;
    Ok(AllocationResult {
        delta,
        residual: problem.b * delta - problem.u_v_d,
        tags,
        iterations,
        converged,
        objective,
    })
}

/// Maximum KKT violation of `delta` for the given problem.
///
/// Free variables contribute their gradient magnitude, variables at a bound
/// the wrong-signed part of their multiplier. A true optimum scores ~0.
pub fn kkt_check(problem: &AllocationProblem, delta: &Vector6) -> f64 {
    let g = problem.gradient(delta);
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        let at_lower = delta[i] <= problem.lower[i] + 1e-9;
        let at_upper = delta[i] >= problem.upper[i] - 1e-9;
        let v = if at_lower && at_upper {
            0.0 // pinned variable, any multiplier sign admissible
        } else if at_lower {
            (-g[i]).max(0.0)
        } else if at_upper {
            g[i].max(0.0)
        } else {
            g[i].abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Actuator limits, rate limits, weights, and preference mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocatorConfig {
    /// Smallest commandable rotor thrust (idle), N.
    pub thrust_min: f64,
    /// Largest commandable rotor thrust, N.
    pub thrust_max: f64,
    /// Elevon deflection limit, rad.
    pub aileron_max: f64,
    /// Rotor thrust slew limit, N/s.
    pub thrust_rate: f64,
    /// Elevon slew limit, rad/s.
    pub aileron_rate: f64,
    /// Command-priority weights (thrust, roll, pitch, yaw).
    pub w_u: [f64; 4],
    /// Actuator weights in hold mode.
    pub w_delta_hold: [f64; 6],
    /// Actuator weights in energy-saving mode (rotor deviation costs more).
    pub w_delta_energy: [f64; 6],
    /// Secondary-objective weight.
    pub gamma: f64,
    pub mode: PreferredMode,
    /// With ailerons disabled their bounds pin to zero deflection.
    pub use_ailerons: bool,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        Self {
            thrust_min: 0.12,
            thrust_max: 12.0,
            aileron_max: 25.0_f64.to_radians(),
            thrust_rate: 40.0,
            aileron_rate: 300.0_f64.to_radians(),
            w_u: [10.0, 20.0, 20.0, 20.0],
            w_delta_hold: [1.0, 1.0, 1.0, 1.0, 0.1, 0.1],
            w_delta_energy: [8.0, 8.0, 8.0, 8.0, 0.05, 0.05],
            gamma: 1e-4,
            mode: PreferredMode::EnergySaving,
            use_ailerons: true,
        }
    }
}

impl AllocatorConfig {
    pub fn w_delta(&self) -> &[f64; 6] {
        match self.mode {
            PreferredMode::Hold => &self.w_delta_hold,
            PreferredMode::EnergySaving => &self.w_delta_energy,
        }
    }

    /// Position limits intersected with the per-cycle rate window around the
    /// previous actuator vector.
    pub fn bounds(&self, delta_last: &Vector6, dt: f64) -> (Vector6, Vector6) {
        let mut lo = Vector6::zeros();
        let mut hi = Vector6::zeros();
        let dthrust = self.thrust_rate * dt;
        let dail = self.aileron_rate * dt;
        for i in 0..4 {
            lo[i] = (delta_last[i] - dthrust).max(self.thrust_min);
            hi[i] = (delta_last[i] + dthrust).min(self.thrust_max);
            if lo[i] > hi[i] {
                // Last value outside position limits; collapse to the limit.
                let pin = delta_last[i].clamp(self.thrust_min, self.thrust_max);
                lo[i] = pin;
                hi[i] = pin;
            }
        }
        for j in 4..6 {
            if self.use_ailerons {
                lo[j] = (delta_last[j] - dail).max(-self.aileron_max);
                hi[j] = (delta_last[j] + dail).min(self.aileron_max);
                if lo[j] > hi[j] {
                    let pin = delta_last[j].clamp(-self.aileron_max, self.aileron_max);
                    lo[j] = pin;
                    hi[j] = pin;
                }
            } else {
                lo[j] = 0.0;
                hi[j] = 0.0;
            }
        }
        (lo, hi)
    }

    /// Hover actuator vector: equal thrusts balancing gravity, elevons level.
    pub fn hover_delta(&self, params: &VehicleParams) -> Vector6 {
        let t = params.hover_thrust_per_rotor().clamp(self.thrust_min, self.thrust_max);
        Vector6::from_column_slice(&[t, t, t, t, 0.0, 0.0])
    }
}
