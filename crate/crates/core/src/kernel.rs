//! Compactly supported smoothing kernels on `[-1, 1]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

/// A symmetric kernel supported on `[-1, 1]`.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// `K(t)`; must vanish for `|t| > 1`.
    fn eval(&self, t: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinKernel {
    /// `0.75 (1 - t²)₊`
    Epanechnikov,
    /// `(1 - |t|)₊`
    Triangular,
    /// `15/16 (1 - t²)²₊`
    Biweight,
    /// `1/2` on `[-1, 1]`
    Uniform,
}

impl Kernel for BuiltinKernel {
    fn name(&self) -> &str {
        match self {
            BuiltinKernel::Epanechnikov => "epanechnikov",
            BuiltinKernel::Triangular => "triangular",
            BuiltinKernel::Biweight => "biweight",
            BuiltinKernel::Uniform => "uniform",
        }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        if t.abs() > 1.0 {
            return 0.0;
        }
        match self {
            BuiltinKernel::Epanechnikov => 0.75 * (1.0 - t * t),
            BuiltinKernel::Triangular => 1.0 - t.abs(),
            BuiltinKernel::Biweight => {
                let s = 1.0 - t * t;
                0.9375 * s * s
            }
            BuiltinKernel::Uniform => 0.5,
        }
    }
}

impl FromStr for BuiltinKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epanechnikov" => Ok(BuiltinKernel::Epanechnikov),
            "triangular" => Ok(BuiltinKernel::Triangular),
            "biweight" => Ok(BuiltinKernel::Biweight),
            "uniform" => Ok(BuiltinKernel::Uniform),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A kernel together with its bandwidth; `K_h(v) = K(v/h)/h`.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    kernel: Arc<dyn Kernel>,
    bandwidth: f64,
}

impl KernelSpec {
    /// Accepts any kernel that is symmetric and vanishes outside `[-1, 1]`.
    /// Normalization is checked separately by [`KernelSpec::normalization_error`].
    pub fn new(kernel: impl Kernel + 'static, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            let (a, b) = (kernel.eval(t), kernel.eval(-t));
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(Error::invalid(format!("kernel '{}' is not symmetric at {t}", kernel.name())));
            }
            let outside = kernel.eval(1.0 + t + 1e-9);
            if outside != 0.0 || kernel.eval(-1.0 - t - 1e-9) != 0.0 {
                return Err(Error::invalid(format!(
                    "kernel '{}' does not vanish outside [-1, 1]",
                    kernel.name()
                )));
            }
        }
        Ok(KernelSpec {
            kernel: Arc::new(kernel),
            bandwidth,
        })
    }

    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        KernelSpec::new(BuiltinKernel::Epanechnikov, bandwidth)
    }

    pub fn name(&self) -> &str {
        self.kernel.name()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> &dyn Kernel {
        self.kernel.as_ref()
    }

    #[inline]
    pub fn k_eval(&self, t: f64) -> f64 {
        self.kernel.eval(t)
    }

    /// `K_h(v)`.
    #[inline]
    pub fn scaled(&self, v: f64) -> f64 {
        self.kernel.eval(v / self.bandwidth) / self.bandwidth
    }

    /// `|∫K - 1|` by adaptive Simpson over `[-1, 1]`, split at 0.
    pub fn normalization_error(&self) -> f64 {
        let k = |t| self.kernel.eval(t);
        let mass = quad::adaptive_simpson(k, -1.0, 0.0, 16, 1e-13) + quad::adaptive_simpson(k, 0.0, 1.0, 16, 1e-13);
        (mass - 1.0).abs()
    }

    /// `∫K²` over `[-1, 1]`.
    pub fn roughness(&self) -> f64 {
        let k2 = |t: f64| self.kernel.eval(t).powi(2);
        quad::adaptive_simpson(k2, -1.0, 0.0, 16, 1e-13) + quad::adaptive_simpson(k2, 0.0, 1.0, 16, 1e-13)
    }
}

/// Epanechnikov kernel `0.75 (1 - t²)₊`.
#[inline]
pub fn kernel_eval(t: f64) -> f64 {
    BuiltinKernel::Epanechnikov.eval(t)
}

/// Power-law bandwidth `n^(-beta)`.
pub fn bandwidth(n: usize, beta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("bandwidth rule needs n >= 2, got {n}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("bandwidth exponent must lie in (0, 1), got {beta}")));
    }
    Ok((n as f64).powf(-beta))
}

/// Step-size rule `Δ = n^(-2/3)`.
pub fn delta_of_n(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("step-size rule needs n >= 1"));
    }
    Ok((n as f64).powf(-2.0 / 3.0))
}
