//! Pointwise physical closures for reactive acid flow in porous rock:
//! the lumped kinetic coefficient kappa, the porosity growth rate eta,
//! the exact-in-time porosity update, permeability and interfacial-area
//! laws, the Darcy coefficient a(phi) = mu / k(phi), and the
//! velocity-dependent dispersion tensor.
//!
//! All functions are pure; fields of values at quadrature points live in
//! `fields` and are updated cell-locally.

use crate::{invalid, Result};

/// Physical constants of the model plus the initial rock state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Acid dissolving constant (kg/mole).
    pub alpha: f64,
    /// Rock density.
    pub rho_s: f64,
    /// Local mass-transfer coefficient.
    pub k_c: f64,
    /// Kinetic constant for reaction.
    pub k_s: f64,
    /// Initial interfacial area available for reaction.
    pub a_0: f64,
    /// Initial porosity, in (0, 1).
    pub phi_0: f64,
    /// Fluid viscosity.
    pub mu: f64,
    /// Initial permeability.
    pub k_0: f64,
    /// Molecular diffusion.
    pub d_m: f64,
    /// Longitudinal dispersivity.
    pub d_l: f64,
    /// Transverse dispersivity.
    pub d_t: f64,
    /// Injected acid concentration.
    pub c_inject: f64,
    /// Injection flow rate.
    pub f_inject: f64,
    /// Production flow rate.
    pub f_produce: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("alpha", self.alpha),
            ("rho_s", self.rho_s),
            ("k_c", self.k_c),
            ("k_s", self.k_s),
            ("a_0", self.a_0),
            ("mu", self.mu),
            ("k_0", self.k_0),
            ("d_m", self.d_m),
        ];
        for (name, v) in strictly_positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be strictly positive, got {v}")));
            }
        }
        let nonnegative = [
            ("d_l", self.d_l),
            ("d_t", self.d_t),
            ("f_inject", self.f_inject),
            ("f_produce", self.f_produce),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.phi_0 > 0.0 && self.phi_0 < 1.0) {
            return Err(invalid(format!("phi_0 = {} violates 0 < phi_0 < 1", self.phi_0)));
        }
        Ok(())
    }
}

/// kappa = k_c k_s a_0 / ((k_c + k_s)(1 - phi_0)), the first-order kinetic
/// relation folded into a single rate constant.
pub fn kappa(p: &ModelParams) -> Result<f64> {
    kappa_with_phi0(p, p.phi_0)
}

/// kappa with a pointwise initial porosity (the initial porosity may vary
/// in space).
pub fn kappa_with_phi0(p: &ModelParams, phi_0: f64) -> Result<f64> {
    if phi_0 >= 1.0 {
        return Err(invalid(format!("phi_0 = {phi_0} must be below 1")));
    }
    Ok(p.k_c * p.k_s * p.a_0 / ((p.k_c + p.k_s) * (1.0 - phi_0)))
}

/// eta = alpha kappa / rho_s, the porosity growth rate per unit clamped
/// concentration.
pub fn eta(p: &ModelParams) -> Result<f64> {
    Ok(p.alpha * kappa(p)? / p.rho_s)
}

pub fn eta_with_phi0(p: &ModelParams, phi_0: f64) -> Result<f64> {
    Ok(p.alpha * kappa_with_phi0(p, phi_0)? / p.rho_s)
}

/// Clamps a concentration into [0, 1].
pub fn clamp_concentration(c: f64) -> Result<f64> {
    if c.is_nan() {
        return Err(invalid("concentration is NaN"));
    }
    Ok(c.clamp(0.0, 1.0))
}

/// One porosity step with the concentration frozen over the step: the
/// ODE dphi/dt = eta (1 - phi) cbar integrates exactly to
/// phi' = 1 - (1 - phi) exp(-eta cbar dt), which keeps phi in [phi_n, 1)
/// for any step size.
pub fn porosity_step(phi_n: f64, c_bar: f64, dt: f64, eta: f64) -> Result<f64> {
    if phi_n >= 1.0 || !phi_n.is_finite() {
        return Err(invalid(format!("porosity {phi_n} out of range")));
    }
    debug_assert!((0.0..=1.0).contains(&c_bar));
    let x = eta * c_bar * dt;
    if x == 0.0 {
        return Ok(phi_n);
    }
    // Strictly-below-1 and monotone even when (1 - phi)exp(-x) rounds to
    // zero or the product rounds the wrong way by one ulp.
    const PHI_SUP: f64 = 1.0 - f64::EPSILON / 2.0;
    Ok((1.0 - (1.0 - phi_n) * (-x).exp()).min(PHI_SUP).max(phi_n))
}

/// Porosity step with an extra manufactured source, discretized as one
/// forward product step. Only verification scenarios use this; the bound
/// theorems apply to the sourceless update above.
pub fn porosity_step_with_source(phi_n: f64, c_bar: f64, source: f64, dt: f64, eta: f64) -> f64 {
    phi_n + dt * (eta * (1.0 - phi_n) * c_bar + source)
}

/// Permeability closure k(phi)/k_0 = (phi/phi_0) (phi (1-phi_0) / (phi_0 (1-phi)))^2.
pub fn permeability(phi: f64, phi_0: f64, k_0: f64) -> Result<f64> {
    if phi >= 1.0 {
        return Err(invalid(format!("porosity {phi} must be below 1")));
    }
    let ratio = phi * (1.0 - phi_0) / (phi_0 * (1.0 - phi));
    Ok(k_0 * (phi / phi_0) * ratio * ratio)
}

/// Interfacial area closure a_v/a_0 = (1 - phi)/(1 - phi_0).
pub fn interfacial_area(phi: f64, phi_0: f64, a_0: f64) -> f64 {
    a_0 * (1.0 - phi) / (1.0 - phi_0)
}

/// Darcy coefficient a(phi) = mu / k(phi).
pub fn darcy_coefficient(phi: f64, phi_0: f64, k_0: f64, mu: f64) -> Result<f64> {
    Ok(mu / permeability(phi, phi_0, k_0)?)
}

/// Velocity-dependent dispersion tensor
/// D(u) = d_m I + |u| (d_l E(u) + d_t (I - E(u))), E(u) = u u^T / |u|^2.
///
/// The porosity factor is *not* included here; the transport form
/// multiplies by phi separately. The |u| E(u) product is continuous at
/// u = 0, where the tensor reduces to d_m I.
pub fn dispersion_tensor(u: [f64; 2], d_m: f64, d_l: f64, d_t: f64) -> [[f64; 2]; 2] {
    let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if norm < 1e-14 {
        return [[d_m, 0.0], [0.0, d_m]];
    }
    let e = [
        [u[0] * u[0] / (norm * norm), u[0] * u[1] / (norm * norm)],
        [u[1] * u[0] / (norm * norm), u[1] * u[1] / (norm * norm)],
    ];
    let mut d = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            d[i][j] = d_m * id + norm * (d_l * e[i][j] + d_t * (id - e[i][j]));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams {
            alpha: 0.1,
            rho_s: 2000.0,
            k_c: 1.0,
            k_s: 1.0,
            a_0: 1.0,
            phi_0: 0.2,
            mu: 1.0,
            k_0: 1.0,
            d_m: 0.01,
            d_l: 0.0,
            d_t: 0.0,
            c_inject: 1.0,
            f_inject: 4.5,
            f_produce: 2.5,
        }
    }

    #[test]
    fn kappa_hand_values() {
        let mut p = params();
        p.k_c = 2.0;
        p.k_s = 2.0;
        p.a_0 = 1.0;
        p.phi_0 = 0.5;
        assert!((kappa(&p).unwrap() - 2.0).abs() < 1e-15);

        let p2 = params(); // k_c = k_s = a_0 = 1, phi_0 = 0.2
        assert!((kappa(&p2).unwrap() - 0.625).abs() < 1e-15);

        let mut p3 = p2;
        p3.a_0 = 10.0;
        assert!((kappa(&p3).unwrap() - 6.25).abs() < 1e-14, "linear in a_0");
    }

    #[test]
    fn eta_hand_values() {
        let p = params(); // alpha = 0.1, rho_s = 2000, kappa = 0.625
        assert!((eta(&p).unwrap() - 3.125e-5).abs() < 1e-19);
        let mut p2 = p;
        p2.alpha *= 3.0;
        assert!((eta(&p2).unwrap() - 3.0 * 3.125e-5).abs() < 1e-18, "linear in alpha");
    }

    #[test]
    fn clamp_cases() {
        assert_eq!(clamp_concentration(0.5).unwrap(), 0.5);
        assert_eq!(clamp_concentration(1.3).unwrap(), 1.0);
        assert_eq!(clamp_concentration(-0.2).unwrap(), 0.0);
        assert!(clamp_concentration(f64::NAN).is_err());
    }

    #[test]
    fn porosity_step_cases() {
        assert_eq!(porosity_step(0.3, 0.0, 5.0, 1.0).unwrap(), 0.3);
        let phi = porosity_step(0.2, 1.0, std::f64::consts::LN_2, 1.0).unwrap();
        assert!((phi - 0.6).abs() < 1e-15);
        let phi_inf = porosity_step(0.2, 1.0, 1e6, 1.0).unwrap();
        assert!(phi_inf < 1.0 && phi_inf > 0.999);
        assert!(porosity_step(1.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn permeability_cases() {
        assert!((permeability(0.2, 0.2, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((permeability(0.5, 0.2, 1.0).unwrap() - 40.0).abs() < 1e-12);
        assert!(permeability(0.3, 0.2, 1.0).unwrap() < permeability(0.4, 0.2, 1.0).unwrap());
        assert!(permeability(1.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn interfacial_area_cases() {
        assert!((interfacial_area(0.2, 0.2, 0.2) - 0.2).abs() < 1e-15);
        assert!((interfacial_area(0.6, 0.2, 0.2) - 0.1).abs() < 1e-15);
        assert!(interfacial_area(0.999999, 0.2, 0.2) < 1e-5);
    }

    #[test]
    fn darcy_coefficient_cases() {
        assert!((darcy_coefficient(0.2, 0.2, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((darcy_coefficient(0.5, 0.2, 1.0, 1.0).unwrap() - 0.025).abs() < 1e-15);
        assert!(
            (darcy_coefficient(0.5, 0.2, 1.0, 2.0).unwrap() - 0.05).abs() < 1e-15,
            "doubling mu doubles a"
        );
    }

    #[test]
    fn dispersion_tensor_cases() {
        let d0 = dispersion_tensor([0.0, 0.0], 0.7, 1.0, 2.0);
        assert_eq!(d0, [[0.7, 0.0], [0.0, 0.7]]);

        let d1 = dispersion_tensor([1.0, 0.0], 0.0, 1.0, 0.0);
        assert!((d1[0][0] - 1.0).abs() < 1e-15);
        assert!(d1[0][1].abs() < 1e-15 && d1[1][0].abs() < 1e-15 && d1[1][1].abs() < 1e-15);

        // u = (3,4): |u| = 5, eigenpairs (d_m + 5 d_l, u) and (d_m + 5 d_t, u_perp).
        let d = dispersion_tensor([3.0, 4.0], 0.01, 0.1, 0.02);
        let u = [3.0, 4.0];
        let l1 = 0.01 + 5.0 * 0.1;
        let du = [d[0][0] * u[0] + d[0][1] * u[1], d[1][0] * u[0] + d[1][1] * u[1]];
        assert!((du[0] - l1 * u[0]).abs() < 1e-12 && (du[1] - l1 * u[1]).abs() < 1e-12);
        let up = [-4.0, 3.0];
        let l2 = 0.01 + 5.0 * 0.02;
        let dup = [d[0][0] * up[0] + d[0][1] * up[1], d[1][0] * up[0] + d[1][1] * up[1]];
        assert!((dup[0] - l2 * up[0]).abs() < 1e-12 && (dup[1] - l2 * up[1]).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(params().validate().is_ok());
        let mut bad = params();
        bad.phi_0 = 1.5;
        assert!(bad.validate().is_err());
        let mut bad2 = params();
        bad2.mu = 0.0;
        assert!(bad2.validate().is_err());
    }

    proptest! {
        /// Iterated sourceless steps stay within the closed-form envelope
        /// phi_0 <= phi <= 1 - (1 - phi_0) exp(-eta t) and respect the
        /// rate bound 0 <= (phi' - phi)/dt <= eta (1 - phi).
        #[test]
        fn porosity_bounds_hold(
            phi_0 in 0.01f64..0.95,
            eta in 1e-6f64..10.0,
            steps in proptest::collection::vec((0.0f64..=1.0, 1e-6f64..2.0), 1..40)
        ) {
            let mut phi = phi_0;
            let mut t = 0.0;
            for (c_bar, dt) in steps {
                let next = porosity_step(phi, c_bar, dt, eta).unwrap();
                let rate = (next - phi) / dt;
                prop_assert!(rate >= -1e-15);
                prop_assert!(rate <= eta * (1.0 - phi) + 1e-12);
                phi = next;
                t += dt;
                let upper = 1.0 - (1.0 - phi_0) * (-eta * t).exp();
                prop_assert!(phi >= phi_0 - 1e-14);
                prop_assert!(phi <= upper + 1e-12, "phi {phi} above envelope {upper}");
                prop_assert!(phi < 1.0);
            }
        }

        /// Symmetry and the lower quadratic bound D(u) xi . xi >= d_m |xi|^2.
        #[test]
        fn dispersion_tensor_psd_and_symmetric(
            ux in -50.0f64..50.0, uy in -50.0f64..50.0,
            xi0 in -1.0f64..1.0, xi1 in -1.0f64..1.0,
            d_m in 1e-4f64..1.0, d_l in 0.0f64..1.0, d_t in 0.0f64..1.0
        ) {
            let d = dispersion_tensor([ux, uy], d_m, d_l, d_t);
            prop_assert!((d[0][1] - d[1][0]).abs() <= 1e-13 * d[0][1].abs().max(1.0));
            let q = d[0][0]*xi0*xi0 + 2.0*d[0][1]*xi0*xi1 + d[1][1]*xi1*xi1;
            let lower = d_m * (xi0*xi0 + xi1*xi1);
            prop_assert!(q >= lower - 1e-12 * lower.max(1.0));
        }

        /// Lipschitz continuity in u on a bounded set.
        #[test]
        fn dispersion_tensor_lipschitz(
            ux in -10.0f64..10.0, uy in -10.0f64..10.0,
            vx in -10.0f64..10.0, vy in -10.0f64..10.0,
            d_l in 0.0f64..1.0, d_t in 0.0f64..1.0
        ) {
            let du = dispersion_tensor([ux, uy], 0.01, d_l, d_t);
            let dv = dispersion_tensor([vx, vy], 0.01, d_l, d_t);
            let diff = (0..2).flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (du[i][j] - dv[i][j]).abs())
                .fold(0.0f64, f64::max);
            let dist = ((ux - vx).powi(2) + (uy - vy).powi(2)).sqrt();
            // |u|E(u) and |u|(I-E(u)) are 2-Lipschitz in u.
            let lip = 2.0 * (d_l + d_t) + 1e-9;
            prop_assert!(diff <= lip * dist + 1e-12, "diff {diff} vs {lip} * {dist}");
        }
    }
}
