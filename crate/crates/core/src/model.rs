//! Wild-type HIV infection dynamics with four therapy channels.
//!
//! State components (all per mm³):
//!
//! | index | meaning                              |
//! |-------|--------------------------------------|
//! | x1    | free virions                         |
//! | x2    | uninfected helper T cells            |
//! | x3    | proviral (latently infected) T cells |
//! | x4    | productively infected T cells        |
//!
//! Controls are normalized drug efficacies: u1 protease inhibitor, u2 fusion
//! inhibitor, u3 T-cell enhancer, u4 reverse-transcriptase inhibitor.
//! Time is measured in days.

use std::ops::{Deref, DerefMut};

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

pub type Vec4 = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;

macro_rules! four_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name(pub Vec4);

        impl $name {
            pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
                Self(Vec4::new(a, b, c, d))
            }

            pub fn zeros() -> Self {
                Self(Vec4::zeros())
            }

            pub fn from_array(v: [f64; 4]) -> Self {
                Self(Vec4::from(v))
            }

            pub fn to_array(&self) -> [f64; 4] {
                [self.0[0], self.0[1], self.0[2], self.0[3]]
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Deref for $name {
            type Target = Vec4;
            fn deref(&self) -> &Vec4 {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Vec4 {
                &mut self.0
            }
        }

        impl From<Vec4> for $name {
            fn from(v: Vec4) -> Self {
                Self(v)
            }
        }
    };
}

four_vector!(
    /// Populations `(x1, x2, x3, x4)`.
    StateVector
);
four_vector!(
    /// Drug efficacies `(u1, u2, u3, u4)`.
    ControlVector
);
four_vector!(
    /// Adjoint variables `(λ1, λ2, λ3, λ4)`, one per state component.
    CostateVector
);

impl StateVector {
    pub fn x1(&self) -> f64 {
        self.0[0]
    }
    pub fn x2(&self) -> f64 {
        self.0[1]
    }
    pub fn x3(&self) -> f64 {
        self.0[2]
    }
    pub fn x4(&self) -> f64 {
        self.0[3]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }
}

impl ControlVector {
    pub fn u1(&self) -> f64 {
        self.0[0]
    }
}

/// Per-channel efficacy box `[lower, upper] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    lower: ControlVector,
    upper: ControlVector,
}

impl ControlBounds {
    pub fn new(lower: ControlVector, upper: ControlVector) -> Result<Self> {
        for i in 0..4 {
            let (lo, hi) = (lower[i], upper[i]);
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "bounds for u{} must satisfy 0 <= lower <= upper <= 1, got [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Protease inhibitor only, capped at 0.9; channels 2-4 pinned to zero.
    pub fn protease_only(u1_max: f64) -> Result<Self> {
        Self::new(
            ControlVector::zeros(),
            ControlVector::new(u1_max, 0.0, 0.0, 0.0),
        )
    }

    pub fn lower(&self) -> &ControlVector {
        &self.lower
    }

    pub fn upper(&self) -> &ControlVector {
        &self.upper
    }

    /// A channel whose interval has collapsed to a point.
    pub fn is_pinned(&self, channel: usize) -> bool {
        self.lower[channel] == self.upper[channel]
    }

    pub fn active_channels(&self) -> impl Iterator<Item = usize> + '_ {
        (0..4).filter(|&i| !self.is_pinned(i))
    }

    pub fn clamp(&self, u: &ControlVector) -> ControlVector {
        let mut out = *u;
        for i in 0..4 {
            out[i] = u[i].clamp(self.lower[i], self.upper[i]);
        }
        out
    }

    pub fn contains(&self, u: &ControlVector) -> bool {
        (0..4).all(|i| self.lower[i] <= u[i] && u[i] <= self.upper[i])
    }
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self::protease_only(0.9).expect("0.9 is a valid efficacy cap")
    }
}

/// Rate constants of the infection model (per-day rates, per-mm³ populations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// virion clearance
    pub a1: f64,
    /// infection rate
    pub a2: f64,
    /// virions released per productively infected cell
    pub a3: f64,
    /// productively infected cell death / burst rate
    pub a4: f64,
    /// T-cell source
    pub a5: f64,
    /// T-cell natural death
    pub a6: f64,
    /// T-cell proliferation
    pub a7: f64,
    /// T-cell carrying capacity
    pub a8: f64,
    /// proviral to productive conversion
    pub a9: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a1: 2.4,
            a2: 2.4e-5,
            a3: 1200.0,
            a4: 0.24,
            a5: 10.0,
            a6: 0.02,
            a7: 0.03,
            a8: 1500.0,
            a9: 0.003,
        }
    }
}

impl ModelParams {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.a1, self.a2, self.a3, self.a4, self.a5, self.a6, self.a7, self.a8, self.a9,
        ]
    }

    /// Checks that every rate constant is finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.as_array().iter().enumerate() {
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "a{} must be finite and > 0, got {a}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Time derivative of the state.
    pub fn rhs(&self, x: &StateVector, u: &ControlVector) -> Result<StateVector> {
        check_finite(x, u)?;
        Ok(self.derivative(x, u))
    }

    /// Unchecked right-hand side for integrator inner loops.
    pub(crate) fn derivative(&self, x: &StateVector, u: &ControlVector) -> StateVector {
        let [x1, x2, x3, x4] = x.to_array();
        let [u1, u2, u3, u4] = u.to_array();
        let p = self;
        let infection = p.a2 * x1 * x2 * (1.0 - u2);
        let entry = infection * (1.0 - u4);
        let crowding = 1.0 - (x2 + x3 + x4) / p.a8;
        StateVector::new(
            -p.a1 * x1 - infection + p.a3 * p.a4 * x4 * (1.0 - u1),
            p.a5 / (1.0 + x1) - entry - p.a6 * x2 + p.a7 * crowding * x2 * (1.0 + u3),
            entry - p.a9 * x3 - p.a6 * x3,
            p.a9 * x3 - p.a4 * x4,
        )
    }

    /// `∂f_i/∂x_j`, row `i`, column `j`.
    pub fn jacobian_state(&self, x: &StateVector, u: &ControlVector) -> Result<Mat4> {
        check_finite(x, u)?;
        Ok(self.state_jacobian(x, u))
    }

    pub(crate) fn state_jacobian(&self, x: &StateVector, u: &ControlVector) -> Mat4 {
        let [x1, x2, x3, x4] = x.to_array();
        let [u1, u2, u3, u4] = u.to_array();
        let p = self;
        let fusion = 1.0 - u2;
        let entry = fusion * (1.0 - u4);
        let growth = p.a7 * (1.0 + u3);
        let crowd_x2 = growth * (1.0 - (2.0 * x2 + x3 + x4) / p.a8);
        let crowd_other = -growth * x2 / p.a8;
        #[rustfmt::skip]
        let jac = Mat4::new(
            -p.a1 - p.a2 * x2 * fusion, -p.a2 * x1 * fusion, 0.0, p.a3 * p.a4 * (1.0 - u1),
            -p.a5 / ((1.0 + x1) * (1.0 + x1)) - p.a2 * x2 * entry,
                -p.a2 * x1 * entry - p.a6 + crowd_x2, crowd_other, crowd_other,
            p.a2 * x2 * entry, p.a2 * x1 * entry, -p.a9 - p.a6, 0.0,
            0.0, 0.0, p.a9, -p.a4,
        );
        jac
    }

    /// `∂f_i/∂u_j`, row `i`, column `j`.
    pub fn jacobian_control(&self, x: &StateVector, u: &ControlVector) -> Result<Mat4> {
        check_finite(x, u)?;
        Ok(self.control_jacobian(x, u))
    }

    pub(crate) fn control_jacobian(&self, x: &StateVector, u: &ControlVector) -> Mat4 {
        let [x1, x2, x3, x4] = x.to_array();
        let [_, u2, _, u4] = u.to_array();
        let p = self;
        let contact = p.a2 * x1 * x2;
        let crowding = p.a7 * (1.0 - (x2 + x3 + x4) / p.a8) * x2;
        #[rustfmt::skip]
        let jac = Mat4::new(
            -p.a3 * p.a4 * x4, contact, 0.0, 0.0,
            0.0, contact * (1.0 - u4), crowding, contact * (1.0 - u2),
            0.0, -contact * (1.0 - u4), 0.0, -contact * (1.0 - u2),
            0.0, 0.0, 0.0, 0.0,
        );
        jac
    }

    /// Virus-free steady state `(0, x2*, 0, 0)` under zero therapy.
    ///
    /// `x2*` is the nonnegative root of `a5 + (a7 - a6) x2 - (a7/a8) x2² = 0`.
    pub fn uninfected_equilibrium(&self) -> Result<StateVector> {
        let p = self;
        if !(p.a7 > 0.0 && p.a8 > 0.0) {
            return Err(Error::DegenerateParameters(
                "a7 and a8 must be positive for a virus-free equilibrium".into(),
            ));
        }
        // (a7/a8) x² + (a6 - a7) x - a5 = 0
        let qa = p.a7 / p.a8;
        let qb = p.a6 - p.a7;
        let qc = -p.a5;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 || !disc.is_finite() {
            return Err(Error::DegenerateParameters(format!(
                "virus-free balance has no real root (discriminant {disc})"
            )));
        }
        let sq = disc.sqrt();
        // Larger root, written to avoid cancellation when qb < 0.
        let root = if qb <= 0.0 {
            (-qb + sq) / (2.0 * qa)
        } else {
            (2.0 * qc) / (-qb - sq)
        };
        let x2 = if root.abs() < f64::EPSILON * p.a8 {
            0.0
        } else {
            root
        };
        if x2 < 0.0 {
            return Err(Error::DegenerateParameters(format!(
                "virus-free balance has no nonnegative root (largest {x2})"
            )));
        }
        Ok(StateVector::new(0.0, x2, 0.0, 0.0))
    }
}

fn check_finite(x: &StateVector, u: &ControlVector) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite state {:?}",
            x.to_array()
        )));
    }
    if !u.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite control {:?}",
            u.to_array()
        )));
    }
    Ok(())
}
