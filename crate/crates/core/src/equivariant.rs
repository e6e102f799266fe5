//! Closed forms for rotationally symmetric maps `F(r, ω) = (ψ(r), ω)` between
//! round spheres `S^n(ρ_M) → S^n(ρ_N)`, in the orthonormal eigenframe
//! `e_1 = ∂_r/ρ_M`, `e_a = ∂_ω/(ρ_M sin r)`.

/// ψ and its first two angular derivatives at one angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialJet {
    pub r: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub ddpsi: f64,
}

/// Components of `∇dF` in the eigenframe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondFundamentalForm {
    /// `|∇dF(e_1, e_1)|`.
    pub radial: f64,
    /// `|∇dF(e_1, e_a)|`.
    pub mixed: f64,
    /// `|∇dF(e_a, e_a)|`.
    pub tangential: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereToSphere {
    pub n: usize,
    pub domain_radius: f64,
    pub target_radius: f64,
}

impl SphereToSphere {
    pub fn new(n: usize, domain_radius: f64, target_radius: f64) -> Self {
        Self {
            n,
            domain_radius,
            target_radius,
        }
    }

    fn ratio(&self) -> f64 {
        self.target_radius / self.domain_radius
    }

    /// Radial and tangential singular values `(A, B)`.
    pub fn stretches(&self, j: &RadialJet) -> (f64, f64) {
        let k = self.ratio();
        (k * j.dpsi, k * j.psi.sin() / j.r.sin())
    }

    /// `|dF|² = A² + (n−1)B²`.
    pub fn energy_density(&self, j: &RadialJet) -> f64 {
        let (a, b) = self.stretches(j);
        a * a + (self.n as f64 - 1.0) * b * b
    }

    pub fn second_fundamental_form(&self, j: &RadialJet) -> SecondFundamentalForm {
        let c = self.target_radius / (self.domain_radius * self.domain_radius);
        let (s, co) = j.r.sin_cos();
        let (sp, cp) = j.psi.sin_cos();
        SecondFundamentalForm {
            radial: c * j.ddpsi,
            mixed: c * (j.dpsi * cp - sp * co / s) / s,
            tangential: c * (j.dpsi * s * co - sp * cp) / (s * s),
        }
    }

    /// `|∇dF|²`.
    pub fn hessian_norm_sq(&self, j: &RadialJet) -> f64 {
        let h = self.second_fundamental_form(j);
        let m = self.n as f64 - 1.0;
        h.radial * h.radial + 2.0 * m * h.mixed * h.mixed + m * h.tangential * h.tangential
    }

    /// `∂_t ψ` under the weighted flow, with `dphi = dφ/dr`.
    pub fn angular_velocity(&self, j: &RadialJet, dphi: f64) -> f64 {
        let (s, co) = j.r.sin_cos();
        let (sp, cp) = j.psi.sin_cos();
        let m = self.n as f64 - 1.0;
        (j.ddpsi + m * (co / s * j.dpsi - sp * cp / (s * s)) - dphi * j.dpsi)
            / (self.domain_radius * self.domain_radius)
    }

    /// Scalar Laplace–Beltrami operator on the domain for a radial function.
    pub fn laplacian(&self, r: f64, df: f64, ddf: f64) -> f64 {
        (ddf + (self.n as f64 - 1.0) * r.cos() / r.sin() * df)
            / (self.domain_radius * self.domain_radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_is_totally_geodesic() {
        let m = SphereToSphere::new(3, 1.0, 1.0);
        for r in [0.3, 1.0, 2.5] {
            let j = RadialJet {
                r,
                psi: r,
                dpsi: 1.0,
                ddpsi: 0.0,
            };
            assert!(m.hessian_norm_sq(&j) < 1e-28);
            assert!(m.angular_velocity(&j, 0.0).abs() < 1e-15);
            assert!((m.energy_density(&j) - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn radius_ratio_scales_stretches() {
        let m = SphereToSphere::new(2, 2.0, 0.5);
        let j = RadialJet {
            r: PI / 2.0,
            psi: PI / 2.0,
            dpsi: 1.0,
            ddpsi: 0.0,
        };
        let (a, b) = m.stretches(&j);
        assert!((a - 0.25).abs() < 1e-15 && (b - 0.25).abs() < 1e-15);
    }
}
