//! Discrete Kalman filter for 2D position tracking.
//!
//! The state is `(x, y, dx, dy)` in pixels and pixels/frame; only the
//! position is measured. The filter alternates
//!
//! ```text
//! predict:  x' = F x            P' = F P F' + Q
//! correct:  v  = z - H x        K  = P H' (H P H' + R)^-1
//!           x' = x + K v        P' = (I - K H) P
//! ```
//!
//! with the constant-velocity process model
//!
//! ```text
//! F = | 1 0 1 0 |        H = | 1 0 0 0 |
//!     | 0 1 0 1 |            | 0 1 0 0 |
//!     | 0 0 1 0 |
//!     | 0 0 0 1 |
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = [f64; 2];
pub type Vec4 = [f64; 4];
pub type Mat2 = [[f64; 2]; 2];
pub type Mat4 = [[f64; 4]; 4];
pub type Mat2x4 = [[f64; 4]; 2];
pub type Mat4x2 = [[f64; 2]; 4];

#[derive(Debug, Error)]
pub enum KalmanError {
    #[error("innovation covariance H*P*H' + R is singular (det = {det:e})")]
    SingularInnovation { det: f64 },
    #[error("{name} must be {requirement}, got {value}")]
    InvalidNoise {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

/// State estimate and its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    /// Estimate `(x, y, dx, dy)`.
    pub x: Vec4,
    /// Estimate covariance, kept symmetric.
    pub p: Mat4,
}

impl KalmanState {
    /// State at a known position with zero velocity and diagonal covariance.
    pub fn at_position(pos: (f64, f64), p0_diag: Vec4) -> Self {
        let mut p = [[0.0; 4]; 4];
        for i in 0..4 {
            p[i][i] = p0_diag[i];
        }
        Self {
            x: [pos.0, pos.1, 0.0, 0.0],
            p,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x[0], self.x[1])
    }
}

/// System matrices: process model, measurement model, and noise covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanModel {
    pub f: Mat4,
    pub h: Mat2x4,
    pub q: Mat4,
    pub r: Mat2,
}

/// Constant-velocity model with isotropic noise: `Q = q*I`, `R = r*I`.
pub fn constant_velocity_model(q: f64, r: f64) -> Result<KalmanModel, KalmanError> {
    if q < 0.0 || !q.is_finite() {
        return Err(KalmanError::InvalidNoise {
            name: "process noise intensity q",
            requirement: ">= 0",
            value: q,
        });
    }
    if r <= 0.0 || !r.is_finite() {
        return Err(KalmanError::InvalidNoise {
            name: "measurement noise variance r",
            requirement: "> 0",
            value: r,
        });
    }
    let f = [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let h = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
    let mut qm = [[0.0; 4]; 4];
    for i in 0..4 {
        qm[i][i] = q;
    }
    let r2 = [[r, 0.0], [0.0, r]];
    Ok(KalmanModel { f, h, q: qm, r: r2 })
}

/// Time update: project the state and covariance one frame ahead.
pub fn predict(s: &KalmanState, m: &KalmanModel) -> KalmanState {
    let x = mat4_vec(&m.f, &s.x);
    let fp = mat4_mul(&m.f, &s.p);
    let mut p = mat4_mul_t(&fp, &m.f);
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] += m.q[i][j];
        }
    }
    KalmanState {
        x,
        p: symmetrize(&p),
    }
}

/// Measurement the model expects for the current state: `H x`.
pub fn expected_measurement(s: &KalmanState, m: &KalmanModel) -> Vec2 {
    [dot4(&m.h[0], &s.x), dot4(&m.h[1], &s.x)]
}

/// Outcome of a measurement update, with the innovation and gain exposed
/// for logging.
#[derive(Debug, Clone, Copy)]
pub struct Correction {
    pub state: KalmanState,
    pub innovation: Vec2,
    pub gain: Mat4x2,
}

/// Measurement update: fold the measured center `z` into the state.
pub fn correct(s: &KalmanState, m: &KalmanModel, z: Vec2) -> Result<Correction, KalmanError> {
    let expected = expected_measurement(s, m);
    let v = [z[0] - expected[0], z[1] - expected[1]];

    // P H' (4x2)
    let mut pht = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            pht[i][j] = dot4(&s.p[i], &m.h[j]);
        }
    }
    // S = H P H' + R (2x2)
    let mut innov_cov = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            innov_cov[i][j] =
                dot4(&m.h[i], &[pht[0][j], pht[1][j], pht[2][j], pht[3][j]]) + m.r[i][j];
        }
    }
    let det = innov_cov[0][0] * innov_cov[1][1] - innov_cov[0][1] * innov_cov[1][0];
    // Scale the determinant guard to the matrix magnitude so a small but
    // well-conditioned R (legal: any positive-definite R must invert) is
    // not mistaken for a singular system.
    let scale = innov_cov
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if det.abs() <= 1e-12 * scale * scale.max(1.0) {
        return Err(KalmanError::SingularInnovation { det });
    }
    let s_inv = [
        [innov_cov[1][1] / det, -innov_cov[0][1] / det],
        [-innov_cov[1][0] / det, innov_cov[0][0] / det],
    ];
    // K = P H' S^-1 (4x2)
    let mut k = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            k[i][j] = pht[i][0] * s_inv[0][j] + pht[i][1] * s_inv[1][j];
        }
    }
    let mut x = s.x;
    for i in 0..4 {
        x[i] += k[i][0] * v[0] + k[i][1] * v[1];
    }
    // P = (I - K H) P
    let mut ikh = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let kh = k[i][0] * m.h[0][j] + k[i][1] * m.h[1][j];
            ikh[i][j] = if i == j { 1.0 - kh } else { -kh };
        }
    }
    let p = symmetrize(&mat4_mul(&ikh, &s.p));
    Ok(Correction {
        state: KalmanState { x, p },
        innovation: v,
        gain: k,
    })
}

/// `(M + M') / 2` — applied after every update for numerical hygiene.
pub fn symmetrize(m: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    out
}

/// Eigenvalues of a symmetric 4x4 matrix by cyclic Jacobi rotations.
///
/// Used to verify positive semi-definiteness of covariances in tests and
/// diagnostics; returns the eigenvalues in ascending order.
pub fn sym_eigenvalues(m: &Mat4) -> [f64; 4] {
    let mut a = *m;
    for _ in 0..50 {
        let mut off = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..4 {
            for q in p + 1..4 {
                if a[p][q].abs() < 1e-30 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig = [a[0][0], a[1][1], a[2][2], a[3][3]];
    eig.sort_by(f64::total_cmp);
    eig
}

/// Check symmetry and positive semi-definiteness within `tol`.
pub fn is_valid_covariance(p: &Mat4, tol: f64) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            if (p[i][j] - p[j][i]).abs() > tol {
                return false;
            }
        }
    }
    sym_eigenvalues(p)[0] >= -tol
}

#[inline]
fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn mat4_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    [
        dot4(&m[0], v),
        dot4(&m[1], v),
        dot4(&m[2], v),
        dot4(&m[3], v),
    ]
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// `A * B'`
fn mat4_mul_t(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = dot4(&a[i], &b[j]);
        }
    }
    out
}
