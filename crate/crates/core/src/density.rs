//! Univariate densities with an explicit support.

use crate::qkernel::SupportInterval;

pub trait Density: Sync {
    /// Density value; zero outside [`Density::support`].
    fn pdf(&self, x: f64) -> f64;

    fn support(&self) -> SupportInterval;
}

/// A density given by a closure.
pub struct DensityFn<F> {
    f: F,
    support: SupportInterval,
}

impl<F> DensityFn<F>
where
    F: Fn(f64) -> f64 + Sync,
{
    pub fn new(f: F, support: SupportInterval) -> Self {
        Self { f, support }
    }
}

impl<F> Density for DensityFn<F>
where
    F: Fn(f64) -> f64 + Sync,
{
    fn pdf(&self, x: f64) -> f64 {
        if self.support.contains(x) {
            (self.f)(x)
        } else {
            0.0
        }
    }

    fn support(&self) -> SupportInterval {
        self.support
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn pdf(&self, x: f64) -> f64 {
        (**self).pdf(x)
    }

    fn support(&self) -> SupportInterval {
        (**self).support()
    }
}
