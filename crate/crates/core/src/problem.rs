//! Design problem: sensor count, dimension, distances, model and criterion.

use crate::error::{invalid, Error, Result};
use crate::fim::{Criterion, HybridForm};
use crate::geometry::{DistanceProfile, Orientation};
use crate::models::{ModelConstants, NoiseModel};

/// Everything the solver needs besides the initial orientation.
///
/// In 3D only the TOA-RSS model is available; a noise model carrying an AOA
/// covariance is rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignProblem {
    n: usize,
    distances: DistanceProfile,
    constants: ModelConstants,
    noise: NoiseModel,
    criterion: Criterion,
    form: HybridForm,
}

impl DesignProblem {
    pub fn new(
        n: usize,
        distances: DistanceProfile,
        constants: ModelConstants,
        noise: NoiseModel,
        criterion: Criterion,
    ) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(invalid(format!("dimension must be 2 or 3, got {n}")));
        }
        let m = distances.len();
        if m < 2 {
            return Err(invalid(format!("at least two sensors are required, got {m}")));
        }
        if noise.num_sensors() != m {
            return Err(invalid(format!(
                "noise model has {} sensors, distance profile has {m}",
                noise.num_sensors()
            )));
        }
        if n == 3 && noise.aoa().is_some() {
            return Err(Error::Unsupported(
                "3D designs use the TOA-RSS model; remove the AOA covariance".into(),
            ));
        }
        let form = HybridForm::new(&distances, constants.eta, &noise)?;
        Ok(Self {
            n,
            distances,
            constants,
            noise,
            criterion,
            form,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn num_sensors(&self) -> usize {
        self.distances.len()
    }

    pub fn distances(&self) -> &DistanceProfile {
        &self.distances
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn form(&self) -> &HybridForm {
        &self.form
    }

    pub fn with_criterion(&self, criterion: Criterion) -> Self {
        Self {
            criterion,
            ..self.clone()
        }
    }

    /// Same geometry and model with every covariance scaled by `s`.
    pub fn with_noise_scale(&self, s: f64) -> Result<Self> {
        Self::new(
            self.n,
            self.distances.clone(),
            self.constants,
            self.noise.scaled(s)?,
            self.criterion,
        )
    }

    pub(crate) fn check_orientation(&self, j: &Orientation) -> Result<()> {
        if j.num_sensors() != self.num_sensors() || j.dimension() != self.n {
            return Err(invalid(format!(
                "orientation is {}x{}, problem expects {}x{}",
                j.num_sensors(),
                j.dimension(),
                self.num_sensors(),
                self.n
            )));
        }
        Ok(())
    }
}
