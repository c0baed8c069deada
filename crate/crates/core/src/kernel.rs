use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Symmetric kernels supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `0.75 (1 - u^2)`
    #[default]
    Epanechnikov,
    /// `15/16 (1 - u^2)^2`
    Quartic,
    /// `1 - |u|`
    Triangular,
}

impl Kernel {
    pub fn evaluate(self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Quartic => {
                let v = 1.0 - u * u;
                0.9375 * v * v
            }
            Kernel::Triangular => 1.0 - a,
        }
    }

    /// Scaled kernel `k(x / h) / h`.
    #[inline]
    pub fn scaled(self, x: f64, h: f64) -> f64 {
        self.evaluate(x / h) / h
    }

    /// Second moment `int u^2 k(u) du`.
    pub fn second_moment(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.2,
            Kernel::Quartic => 1.0 / 7.0,
            Kernel::Triangular => 1.0 / 6.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Quartic => "quartic",
            Kernel::Triangular => "triangular",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "quartic" => Ok(Kernel::Quartic),
            "triangular" => Ok(Kernel::Triangular),
            other => Err(crate::Error::InvalidParameter(alloc::format!("unknown kernel {other}"))),
        }
    }
}
