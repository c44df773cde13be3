//! Named potentials used by the bundled example trees.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Preset {
    Zero,
    Constant(f64),
    /// `J_0(9x) + 1`
    BesselJ0,
    /// `|x - 1| + 1`
    AbsKink,
    /// `exp(-(x - 1/2)^2)`
    Gaussian,
    /// `sin(8x) + 2 pi / 3`
    Sine,
    /// `cos(9x^2) + 2`
    Chirp,
    /// `1 / (x + 0.1)`
    Reciprocal,
    /// `1 / (x + 0.1)^2`
    ReciprocalSquare,
    /// `exp(x)`
    Exponential,
    /// piecewise quadratic saddle on `[0, 1]`
    Saddle,
}

impl Preset {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Preset::Zero => 0.0,
            Preset::Constant(c) => c,
            Preset::BesselJ0 => libm::j0(9.0 * x) + 1.0,
            Preset::AbsKink => (x - 1.0).abs() + 1.0,
            Preset::Gaussian => (-(x - 0.5) * (x - 0.5)).exp(),
            Preset::Sine => (8.0 * x).sin() + 2.0 * PI / 3.0,
            Preset::Chirp => (9.0 * x * x).cos() + 2.0,
            Preset::Reciprocal => 1.0 / (x + 0.1),
            Preset::ReciprocalSquare => 1.0 / ((x + 0.1) * (x + 0.1)),
            Preset::Exponential => x.exp(),
            Preset::Saddle => {
                if x < 0.25 {
                    -35.2 * x * x + 17.6 * x
                } else if x < 0.75 {
                    35.2 * x * x - 35.2 * x + 8.8
                } else {
                    -35.2 * x * x + 52.8 * x - 17.6
                }
            }
        }
    }

    /// Presets `q0 ..= q8` of the nine-edge example tree, by index.
    pub fn example_component(i: usize) -> Option<Preset> {
        Some(match i {
            0 => Preset::BesselJ0,
            1 => Preset::AbsKink,
            2 => Preset::Gaussian,
            3 => Preset::Sine,
            4 => Preset::Chirp,
            5 => Preset::Reciprocal,
            6 => Preset::ReciprocalSquare,
            7 => Preset::Exponential,
            8 => Preset::Saddle,
            _ => return None,
        })
    }

    /// Edge lengths `L0 ..= L8` of the nine-edge example tree.
    pub fn example_length(i: usize) -> Option<f64> {
        let e = std::f64::consts::E;
        Some(match i {
            0 => 1.4,
            1 => e / 2.0,
            2 => 1.0,
            3 => PI / 2.0,
            4 => PI / 3.0,
            5 => e * e / 4.0,
            6 => 1.1,
            7 => 1.2,
            8 => 1.0,
            _ => return None,
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Zero => write!(f, "zero"),
            Preset::Constant(c) => write!(f, "constant:{c}"),
            Preset::BesselJ0 => write!(f, "bessel_j0"),
            Preset::AbsKink => write!(f, "abs_kink"),
            Preset::Gaussian => write!(f, "gaussian"),
            Preset::Sine => write!(f, "sine"),
            Preset::Chirp => write!(f, "chirp"),
            Preset::Reciprocal => write!(f, "reciprocal"),
            Preset::ReciprocalSquare => write!(f, "reciprocal_square"),
            Preset::Exponential => write!(f, "exponential"),
            Preset::Saddle => write!(f, "saddle"),
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(c) = s.strip_prefix("constant:") {
            return c
                .parse()
                .map(Preset::Constant)
                .map_err(|e| format!("bad constant {c:?}: {e}"));
        }
        if let Some(idx) = s.strip_prefix('q') {
            if let Ok(i) = idx.parse::<usize>() {
                return Preset::example_component(i).ok_or_else(|| format!("unknown preset {s}"));
            }
        }
        Ok(match s {
            "zero" => Preset::Zero,
            "bessel_j0" => Preset::BesselJ0,
            "abs_kink" => Preset::AbsKink,
            "gaussian" => Preset::Gaussian,
            "sine" => Preset::Sine,
            "chirp" => Preset::Chirp,
            "reciprocal" => Preset::Reciprocal,
            "reciprocal_square" => Preset::ReciprocalSquare,
            "exponential" => Preset::Exponential,
            "saddle" => Preset::Saddle,
            _ => return Err(format!("unknown preset {s}")),
        })
    }
}
