//! Unit system, physical constants, NV crystal axes and local spin frames.
//!
//! Canonical internal units are nanometres, microseconds and radians per
//! microsecond. Angular frequencies quoted as "(2π)·X MHz" map to
//! `2π·X rad/µs`, which keeps dipolar couplings at a few nanometres and
//! fluctuator rates of order 1–100 in these units.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Dipolar prefactor J₀ = (2π)·52 MHz·nm³, in rad·µs⁻¹·nm³.
pub const J0: f64 = 2.0 * PI * 52.0;

/// Zero-field crystal splitting Δ₀ = (2π)·2.87 GHz, in rad·µs⁻¹. Not used by the
/// rotating-frame models; kept for reference output.
pub const CRYSTAL_FIELD_SPLITTING: f64 = 2.0 * PI * 2870.0;

/// Carbon atom density of diamond, 1.76×10²³ cm⁻³ expressed in nm⁻³.
pub const DIAMOND_CARBON_DENSITY: f64 = 176.0;

/// Conversion between a Gaussian FWHM and its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

macro_rules! scalar_unit {
    ($(#[$doc:meta])* $name:ident, $unit:literal) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            pub const UNIT: &'static str = $unit;

            #[inline]
            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $unit)
            }
        }
    };
}

scalar_unit!(
    /// Angular frequency in rad·µs⁻¹.
    AngularFrequency,
    "rad/us"
);
scalar_unit!(
    /// Length in nm.
    Length,
    "nm"
);
scalar_unit!(
    /// Time in µs.
    Time,
    "us"
);
scalar_unit!(
    /// Number density in nm⁻³.
    NumberDensity,
    "nm^-3"
);
scalar_unit!(
    /// Plain (non-angular) decay rate in µs⁻¹.
    Rate,
    "1/us"
);

impl AngularFrequency {
    /// ω = 2π·f for f given in MHz.
    pub fn from_mhz(f_mhz: f64) -> Self {
        AngularFrequency(2.0 * PI * f_mhz)
    }

    pub fn rad_per_us(self) -> f64 {
        self.0
    }

    /// The frequency f = ω/2π in MHz.
    pub fn mhz(self) -> f64 {
        self.0 / (2.0 * PI)
    }
}

impl Length {
    pub fn nm(self) -> f64 {
        self.0
    }
}

impl Time {
    pub fn us(self) -> f64 {
        self.0
    }

    pub fn ms(self) -> f64 {
        self.0 * 1e-3
    }

    pub fn from_ms(ms: f64) -> Self {
        Time(ms * 1e3)
    }

    pub fn from_ns(ns: f64) -> Self {
        Time(ns * 1e-3)
    }
}

impl Rate {
    /// Rate given in kHz (ms⁻¹).
    pub fn from_khz(khz: f64) -> Self {
        Rate(khz * 1e-3)
    }

    pub fn khz(self) -> f64 {
        self.0 * 1e3
    }

    pub fn per_us(self) -> f64 {
        self.0
    }
}

impl NumberDensity {
    pub fn per_nm3(self) -> f64 {
        self.0
    }

    /// Mean inter-particle spacing (1/n)^{1/3}.
    pub fn mean_spacing(self) -> Length {
        Length((1.0 / self.0).cbrt())
    }

    pub fn ppm(self) -> f64 {
        self.0 / DIAMOND_CARBON_DENSITY * 1e6
    }
}

/// Density of a defect present at `c` parts per million of lattice sites.
pub fn ppm_to_density(c: f64) -> Result<NumberDensity> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("concentration must be >= 0 ppm, got {c}")));
    }
    Ok(NumberDensity(c * 1e-6 * DIAMOND_CARBON_DENSITY))
}

/// The four NV crystallographic orientation groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NvAxis {
    A,
    B,
    C,
    D,
}

impl NvAxis {
    pub const ALL: [NvAxis; 4] = [NvAxis::A, NvAxis::B, NvAxis::C, NvAxis::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn direction(self) -> Vec3 {
        nv_axes()[self.index()]
    }

    /// The group brought into resonance with this one in the two-group
    /// experiment. B pairs with C; A pairs with D.
    pub fn partner(self) -> NvAxis {
        match self {
            NvAxis::A => NvAxis::D,
            NvAxis::B => NvAxis::C,
            NvAxis::C => NvAxis::B,
            NvAxis::D => NvAxis::A,
        }
    }
}

impl fmt::Display for NvAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = ['A', 'B', 'C', 'D'][self.index()];
        write!(f, "{c}")
    }
}

/// Unit vectors along the four NV orientations, labelled A–D.
pub fn nv_axes() -> [Vec3; 4] {
    let s = 1.0 / 3f64.sqrt();
    [Vec3::new(s, s, s), Vec3::new(s, -s, -s), Vec3::new(-s, s, -s), Vec3::new(-s, -s, s)]
}

/// Orthonormal right-handed triad (x̂, ŷ, ẑ); ẑ is the quantization axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl Frame {
    /// The laboratory frame.
    pub fn canonical() -> Self {
        Frame {
            x: Vec3::x(),
            y: Vec3::y(),
            z: Vec3::z(),
        }
    }

    /// Frame for an NV group with the given transverse azimuth.
    pub fn for_group(axis: NvAxis, azimuth: f64) -> Self {
        make_frame(axis.direction(), azimuth).expect("NV axes are unit vectors")
    }

    /// Largest deviation from orthonormality and right-handedness.
    pub fn orthonormality_error(&self) -> f64 {
        let checks = [
            self.x.dot(&self.y),
            self.x.dot(&self.z),
            self.y.dot(&self.z),
            self.x.norm() - 1.0,
            self.y.norm() - 1.0,
            self.z.norm() - 1.0,
            self.x.cross(&self.y).dot(&self.z) - 1.0,
        ];
        checks.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Builds a frame with ẑ = `axis`, rotated about ẑ by `azimuth`.
///
/// The reference transverse vector is the global x-axis with its ẑ component
/// removed, falling back to the global y-axis when ẑ is (nearly) parallel to x.
pub fn make_frame(axis: Vec3, azimuth: f64) -> Result<Frame> {
    let norm = axis.norm();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::domain(format!("frame axis must be a unit vector, |axis| = {norm}")));
    }
    let z = axis / norm;
    let reference = if z.cross(&Vec3::x()).norm() < 1e-6 { Vec3::y() } else { Vec3::x() };
    let x0 = (reference - z * z.dot(&reference)).normalize();
    let y0 = z.cross(&x0);
    let (s, c) = azimuth.sin_cos();
    let x = x0 * c + y0 * s;
    let y = z.cross(&x);
    Ok(Frame { x, y, z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_round_trip() {
        for f in [0.0, 1e-6, 3.3, 9.0, 2870.0, -17.25] {
            let w = AngularFrequency::from_mhz(f);
            let back = w.mhz();
            assert!((back - f).abs() <= 1e-12 * f.abs().max(1e-300));
        }
    }

    #[test]
    fn j0_value() {
        // 4 significant digits
        assert_eq!(format!("{J0:.1}"), "326.7");
    }

    #[test]
    fn ppm_examples() {
        assert_eq!(ppm_to_density(0.0).unwrap().0, 0.0);
        let n45 = ppm_to_density(45.0).unwrap();
        assert!((n45.0 - 7.92e-3).abs() < 1e-12);
        let spacing = n45.mean_spacing().nm();
        assert!((spacing - 5.0).abs() < 0.05, "spacing {spacing}");
        assert!((ppm_to_density(16.0).unwrap().0 - 2.816e-3).abs() < 1e-12);
        assert!(ppm_to_density(-1.0).is_err());
        assert!(ppm_to_density(f64::NAN).is_err());
    }

    #[test]
    fn axes_geometry() {
        let axes = nv_axes();
        for a in &axes {
            assert!((a.norm() - 1.0).abs() < 1e-12);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!((axes[i].dot(&axes[j]) + 1.0 / 3.0).abs() < 1e-12);
            }
        }
        assert!((axes[0].x - 0.5774).abs() < 5e-5);
        assert_eq!(NvAxis::B.partner(), NvAxis::C);
        assert_eq!(NvAxis::D.partner().partner(), NvAxis::D);
    }

    #[test]
    fn canonical_frame_from_z() {
        let f = make_frame(Vec3::z(), 0.0).unwrap();
        assert!((f.x - Vec3::x()).norm() < 1e-15);
        assert!((f.y - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn quarter_turn_maps_x_to_old_y() {
        let axis = NvAxis::C.direction();
        let f0 = make_frame(axis, 0.3).unwrap();
        let f1 = make_frame(axis, 0.3 + PI / 2.0).unwrap();
        assert!((f1.x - f0.y).norm() < 1e-12);
    }

    #[test]
    fn fallback_reference_for_x_axis() {
        let f = make_frame(Vec3::x(), 0.0).unwrap();
        assert!(f.orthonormality_error() < 1e-12);
        assert!((f.x - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_unit_axis() {
        assert!(make_frame(Vec3::new(0.0, 0.0, 1.1), 0.0).is_err());
    }
}
