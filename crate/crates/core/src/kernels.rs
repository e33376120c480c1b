//! Pair kernels `psi(x, x')` used to score a matched pair.
//!
//! A kernel must be anti-monotone: moving `x` up and `x'` down can only
//! increase `psi(x, x') - psi(x', x)`. The built-ins are also anti-symmetric.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Absolute slack allowed when checking anti-monotonicity.
pub const ANTI_MONOTONE_TOL: f64 = 1e-12;

type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A user-supplied kernel, spot-checked for anti-monotonicity when built.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    f: Arc<KernelFn>,
}

impl CustomKernel {
    /// Number of random quadruples tried by [`CustomKernel::register`].
    pub const SPOT_CHECKS: usize = 10_000;

    /// Wraps `f` after checking anti-monotonicity on random inputs drawn
    /// from `[-10, 10]` with shifts in `[0, 10]`.
    pub fn register<F>(name: impl Into<String>, f: F, seed: u64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let kernel = Self {
            name: name.into(),
            f: Arc::new(f),
        };
        let spec = Kernel::Custom(kernel.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..Self::SPOT_CHECKS {
            let x = rng.random_range(-10.0..=10.0);
            let x_prime = rng.random_range(-10.0..=10.0);
            let delta = rng.random_range(0.0..=10.0);
            let delta_prime = rng.random_range(0.0..=10.0);
            if !check_anti_monotonicity(&spec, x, x_prime, delta, delta_prime) {
                return Err(Error::NotAntiMonotone {
                    x,
                    x_prime,
                    delta,
                    delta_prime,
                });
            }
        }
        Ok(kernel)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Kernel {
    /// `x - x'`
    Linear,
    /// `sign(x - x')`, with `sign(0) = 0`
    Sign,
    /// `x - x'` clamped to `[-K, K]`
    Truncated(f64),
    Custom(CustomKernel),
}

impl Kernel {
    pub fn truncated(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(Self::Truncated(k))
        } else {
            Err(Error::InvalidTruncation(k))
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, x_prime: f64) -> f64 {
        let d = x - x_prime;
        match self {
            Self::Linear => d,
            Self::Sign => {
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::Truncated(k) => d.clamp(-k, *k),
            Self::Custom(c) => (c.f)(x, x_prime),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear)
    }
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Linear, Self::Linear) | (Self::Sign, Self::Sign) => true,
            (Self::Truncated(a), Self::Truncated(b)) => a == b,
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(&a.f, &b.f),
            _ => false,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => write!(f, "linear"),
            Self::Sign => write!(f, "sign"),
            Self::Truncated(k) => write!(f, "trunc:{k}"),
            Self::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Self::Linear),
            "sign" => Ok(Self::Sign),
            other => match other.strip_prefix("trunc:") {
                Some(k) => {
                    let k: f64 = k
                        .parse()
                        .map_err(|_| Error::UnknownKernel(other.to_string()))?;
                    Self::truncated(k)
                }
                None => Err(Error::UnknownKernel(other.to_string())),
            },
        }
    }
}

/// Free-function form of [`Kernel::eval`].
pub fn eval_kernel(k: &Kernel, x: f64, x_prime: f64) -> f64 {
    k.eval(x, x_prime)
}

/// Tests the anti-monotonicity inequality at one point:
/// `psi(x+d, x'-d') - psi(x'-d', x+d) >= psi(x, x') - psi(x', x) - tol`.
pub fn check_anti_monotonicity(k: &Kernel, x: f64, x_prime: f64, delta: f64, delta_prime: f64) -> bool {
    let hi = x + delta;
    let lo = x_prime - delta_prime;
    let moved = k.eval(hi, lo) - k.eval(lo, hi);
    let base = k.eval(x, x_prime) - k.eval(x_prime, x);
    moved >= base - ANTI_MONOTONE_TOL
}
