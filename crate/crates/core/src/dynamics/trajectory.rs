use crate::fields::Energies;
use crate::field::VectorField;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Time (s).
    pub t: f64,
    /// Average over all occupied cells.
    pub m_avg: Vec3,
    /// Average over the short arm including the overlap block.
    pub short_avg: Vec3,
    /// Average over the long arm including the overlap block.
    pub long_avg: Vec3,
    pub energy: Energies,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, VectorField)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Appends unless the sample would not advance time.
    pub fn push(&mut self, s: Sample) -> bool {
        if self.last_time().is_some_and(|t| s.t <= t) {
            return false;
        }
        self.samples.push(s);
        true
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn short_x(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.short_avg.x).collect()
    }

    pub fn long_y(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.long_avg.y).collect()
    }
}
