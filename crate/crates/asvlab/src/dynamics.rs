//! 3-DOF vessel model and its fixed-step integration.
//!
//! State is the pose `eta = [x, y, psi]` in the NED plane together with the
//! body-frame velocities `nu = [u, v, r]`:
//!
//! ```text
//! eta_dot = R_z(psi) * nu
//! M * nu_dot + C(nu) * nu + D(nu) * nu = B * f
//! ```
//!
//! `C(nu)` is constructed from the entries of `M`, which makes it
//! skew-symmetric for every `nu`. Damping combines a linear matrix with
//! elementwise quadratic coefficients. The numerical parameter set ships in
//! `params/vessel_default.toml`; the model equations make no assumption about
//! the values beyond the validation rules enforced at load time.

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3, Vector6};
use serde::Deserialize;
use thiserror::Error;

use crate::angle::wrap_angle;

/// Pose and body velocities of the vessel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselState {
    /// North position [m].
    pub x: f64,
    /// East position [m].
    pub y: f64,
    /// Yaw [rad], wrapped to `(-pi, pi]`.
    pub psi: f64,
    /// Surge velocity [m/s].
    pub u: f64,
    /// Sway velocity [m/s].
    pub v: f64,
    /// Yaw rate [rad/s].
    pub r: f64,
}

impl VesselState {
    pub fn new(x: f64, y: f64, psi: f64, u: f64, v: f64, r: f64) -> Self {
        VesselState { x, y, psi: wrap_angle(psi), u, v, r }
    }

    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self::new(x, y, psi, 0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn nu(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.r)
    }

    /// Speed over ground, `sqrt(u^2 + v^2)`.
    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }

    fn to_vector(self) -> Vector6<f64> {
        Vector6::new(self.x, self.y, self.psi, self.u, self.v, self.r)
    }

    fn from_vector(y: &Vector6<f64>) -> Self {
        VesselState {
            x: y[0],
            y: y[1],
            psi: y[2],
            u: y[3],
            v: y[4],
            r: y[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.u, self.v, self.r]
            .iter()
            .all(|c| c.is_finite())
    }
}

/// Propeller thrust and rudder-induced yaw moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Surge thrust [N].
    pub thrust: f64,
    /// Yaw moment [N*m].
    pub yaw_moment: f64,
}

impl ControlInput {
    pub fn new(thrust: f64, yaw_moment: f64) -> Self {
        ControlInput { thrust, yaw_moment }
    }

    pub fn zero() -> Self {
        ControlInput { thrust: 0.0, yaw_moment: 0.0 }
    }

    /// Clamps both channels to the actuator limits.
    pub fn clamped(&self, p: &VesselParams) -> Self {
        ControlInput {
            thrust: self.thrust.clamp(p.thrust_min, p.thrust_max),
            yaw_moment: self.yaw_moment.clamp(p.yaw_moment_min, p.yaw_moment_max),
        }
    }

    fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.thrust, self.yaw_moment)
    }
}

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("failed to read parameter file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse parameter file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid vessel parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("non-finite state at integrator stage {stage}")]
    NonFinite { stage: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VesselParamsFile {
    schema: String,
    mass_matrix_si: [[f64; 3]; 3],
    damping_linear_si: [[f64; 3]; 3],
    damping_quadratic_si: [f64; 3],
    actuator_matrix: [[f64; 2]; 3],
    thrust_min_n: f64,
    thrust_max_n: f64,
    yaw_moment_min_nm: f64,
    yaw_moment_max_nm: f64,
    width_m: f64,
    max_speed_mps: f64,
}

const PARAMS_SCHEMA: &str = "vessel-params-v1";

/// Validated model parameters with the inverse mass matrix precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselParams {
    pub mass: Matrix3<f64>,
    mass_inv: Matrix3<f64>,
    pub damping_linear: Matrix3<f64>,
    pub damping_quadratic: Vector3<f64>,
    pub actuator: Matrix3x2<f64>,
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub yaw_moment_min: f64,
    pub yaw_moment_max: f64,
    /// Vessel beam [m].
    pub width: f64,
    /// Nominal maximum speed [m/s].
    pub max_speed: f64,
}

impl VesselParams {
    /// Parses and validates a TOML parameter document.
    pub fn from_toml_str(text: &str) -> Result<Self, ParamsError> {
        let file: VesselParamsFile = toml::from_str(text)?;
        if file.schema != PARAMS_SCHEMA {
            return Err(ParamsError::Invalid(format!(
                "unsupported schema {:?}, expected {PARAMS_SCHEMA:?}",
                file.schema
            )));
        }
        let mass = Matrix3::from_fn(|i, j| file.mass_matrix_si[i][j]);
        let damping_linear = Matrix3::from_fn(|i, j| file.damping_linear_si[i][j]);
        let damping_quadratic = Vector3::from_column_slice(&file.damping_quadratic_si);
        let actuator = Matrix3x2::from_fn(|i, j| file.actuator_matrix[i][j]);

        if (mass - mass.transpose()).abs().max() > 1e-9 {
            return Err(ParamsError::Invalid("mass matrix must be symmetric".into()));
        }
        // Port-starboard symmetry: surge decoupled from sway/yaw.
        for (i, j) in [(0, 1), (0, 2), (1, 0), (2, 0)] {
            if mass[(i, j)] != 0.0 {
                return Err(ParamsError::Invalid(format!(
                    "mass matrix entry ({i},{j}) must be zero for a port-starboard symmetric hull"
                )));
            }
            if damping_linear[(i, j)] != 0.0 {
                return Err(ParamsError::Invalid(format!(
                    "linear damping entry ({i},{j}) must be zero for a port-starboard symmetric hull"
                )));
            }
        }
        let chol = nalgebra::Cholesky::new(mass)
            .ok_or_else(|| ParamsError::Invalid("mass matrix must be positive definite".into()))?;
        let mass_inv = chol.inverse();
        if damping_quadratic.iter().any(|&d| d < 0.0) {
            return Err(ParamsError::Invalid(
                "quadratic damping coefficients must be non-negative".into(),
            ));
        }
        if file.thrust_min_n >= file.thrust_max_n {
            return Err(ParamsError::Invalid("thrust_min_n must be below thrust_max_n".into()));
        }
        if file.yaw_moment_min_nm >= file.yaw_moment_max_nm {
            return Err(ParamsError::Invalid(
                "yaw_moment_min_nm must be below yaw_moment_max_nm".into(),
            ));
        }
        if file.width_m <= 0.0 || file.max_speed_mps <= 0.0 {
            return Err(ParamsError::Invalid("width_m and max_speed_mps must be positive".into()));
        }
        let params = VesselParams {
            mass,
            mass_inv,
            damping_linear,
            damping_quadratic,
            actuator,
            thrust_min: file.thrust_min_n,
            thrust_max: file.thrust_max_n,
            yaw_moment_min: file.yaw_moment_min_nm,
            yaw_moment_max: file.yaw_moment_max_nm,
            width: file.width_m,
            max_speed: file.max_speed_mps,
        };
        params.check_dissipative()?;
        Ok(params)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ParamsError> {
        let text = std::fs::read_to_string(path).map_err(|source| ParamsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// The parameter set shipped with the repository.
    pub fn shipped_defaults() -> Self {
        Self::from_toml_str(include_str!("../params/vessel_default.toml"))
            .expect("shipped vessel parameter file must validate")
    }

    /// Samples a fixed grid of velocities and rejects parameter sets whose
    /// damping extracts negative power.
    fn check_dissipative(&self) -> Result<(), ParamsError> {
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                for k in -2i32..=2 {
                    let nu = Vector3::new(i as f64 * 1.5, j as f64 * 1.0, k as f64 * 0.5);
                    let power = nu.dot(&self.damping_force(&nu));
                    if power < 0.0 {
                        return Err(ParamsError::Invalid(format!(
                            "damping is not dissipative at nu = [{}, {}, {}]",
                            nu[0], nu[1], nu[2]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Coriolis/centripetal matrix built from the mass matrix entries.
    pub fn coriolis(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        let m = &self.mass;
        let c13 = -(m[(1, 1)] * nu[1] + m[(1, 2)] * nu[2]);
        let c23 = m[(0, 0)] * nu[0];
        Matrix3::new(
            0.0, 0.0, c13, //
            0.0, 0.0, c23, //
            -c13, -c23, 0.0,
        )
    }

    /// Total damping force `D(nu) * nu` (linear plus elementwise quadratic).
    pub fn damping_force(&self, nu: &Vector3<f64>) -> Vector3<f64> {
        let quad = Vector3::new(
            self.damping_quadratic[0] * nu[0].abs() * nu[0],
            self.damping_quadratic[1] * nu[1].abs() * nu[1],
            self.damping_quadratic[2] * nu[2].abs() * nu[2],
        );
        self.damping_linear * nu + quad
    }

    /// Kinetic energy `0.5 * nu' M nu`.
    pub fn kinetic_energy(&self, nu: &Vector3<f64>) -> f64 {
        0.5 * nu.dot(&(self.mass * nu))
    }
}

/// Rotation about the z-axis by `psi`.
pub fn rotation_matrix(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(
        c, -s, 0.0, //
        s, c, 0.0, //
        0.0, 0.0, 1.0,
    )
}

/// Time derivative of the full six-component state.
pub fn state_derivative(s: &VesselState, f: &ControlInput, p: &VesselParams) -> Vector6<f64> {
    let nu = s.nu();
    let eta_dot = rotation_matrix(s.psi) * nu;
    let force = p.actuator * f.to_vector() - p.coriolis(&nu) * nu - p.damping_force(&nu);
    let nu_dot = p.mass_inv * force;
    Vector6::new(eta_dot[0], eta_dot[1], eta_dot[2], nu_dot[0], nu_dot[1], nu_dot[2])
}

// Fehlberg 4(5) tableau; the fifth-order weights are used for the update.
const A2: [f64; 1] = [1.0 / 4.0];
const A3: [f64; 2] = [3.0 / 32.0, 9.0 / 32.0];
const A4: [f64; 3] = [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0];
const A5: [f64; 4] = [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0];
const A6: [f64; 5] = [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];

/// One fixed step of the Runge-Kutta-Fehlberg scheme (fifth-order solution)
/// for an autonomous system on six-component states.
pub fn rkf45_step<F>(rhs: F, y: &Vector6<f64>, h: f64) -> Result<Vector6<f64>, IntegrationError>
where
    F: Fn(&Vector6<f64>) -> Vector6<f64>,
{
    let mut k = [Vector6::zeros(); 6];
    let coeffs: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
    k[0] = rhs(y);
    for (stage, a) in coeffs.iter().enumerate() {
        let mut yi = *y;
        for (j, &aj) in a.iter().enumerate() {
            yi += k[j] * (aj * h);
        }
        if yi.iter().any(|c| !c.is_finite()) {
            return Err(IntegrationError::NonFinite { stage: stage + 1 });
        }
        k[stage + 1] = rhs(&yi);
    }
    let mut out = *y;
    for (j, &bj) in B5.iter().enumerate() {
        out += k[j] * (bj * h);
    }
    if out.iter().any(|c| !c.is_finite()) {
        return Err(IntegrationError::NonFinite { stage: 6 });
    }
    Ok(out)
}

/// Advances the vessel one step of length `h` under a zero-order-hold control.
///
/// The control is clamped to the actuator limits before integration and the
/// yaw angle is wrapped afterwards.
pub fn step_rkf45(
    s: &VesselState,
    f: &ControlInput,
    p: &VesselParams,
    h: f64,
) -> Result<VesselState, IntegrationError> {
    debug_assert!(h > 0.0);
    let f = f.clamped(p);
    let y = rkf45_step(|y| state_derivative(&VesselState::from_vector(y), &f, p), &s.to_vector(), h)?;
    let mut next = VesselState::from_vector(&y);
    next.psi = wrap_angle(next.psi);
    Ok(next)
}
