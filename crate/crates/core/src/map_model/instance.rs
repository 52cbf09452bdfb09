use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{Polyline, PolylineKind};
use super::range::PerceptionRange;
use super::transform::RigidTransform;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Map element category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassId {
    PedCrossing,
    Divider,
    Boundary,
}

impl ClassId {
    pub const ALL: [ClassId; 3] = [ClassId::PedCrossing, ClassId::Divider, ClassId::Boundary];
    pub const COUNT: usize = 3;

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PedCrossing => "ped_crossing",
            Self::Divider => "divider",
            Self::Boundary => "boundary",
        }
    }

    /// Pedestrian crossings are closed outlines; the rest are open curves.
    pub fn natural_kind(self) -> PolylineKind {
        match self {
            Self::PedCrossing => PolylineKind::Closed,
            _ => PolylineKind::Open,
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class `{s}`")))
    }
}

/// One map element: class, geometry and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct MapInstance<T = f64> {
    pub class: ClassId,
    pub polyline: Polyline<T>,
    confidence: T,
}

impl<T: Scalar> MapInstance<T> {
    pub fn new(class: ClassId, polyline: Polyline<T>, confidence: T) -> Result<Self> {
        if !(confidence >= T::zero() && confidence <= T::one()) {
            return Err(Error::InvalidArgument(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self { class, polyline, confidence })
    }

    /// Ground-truth instance (confidence 1).
    pub fn ground_truth(class: ClassId, polyline: Polyline<T>) -> Self {
        Self { class, polyline, confidence: T::one() }
    }

    #[inline]
    pub fn confidence(&self) -> T {
        self.confidence
    }

    pub fn with_polyline(&self, polyline: Polyline<T>) -> Self {
        Self { class: self.class, polyline, confidence: self.confidence }
    }
}

/// All instances of one frame, in that frame's ego coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap<T = f64> {
    pub frame_id: String,
    pub timestamp: f64,
    /// ego → world
    pub ego_pose: RigidTransform<T>,
    pub range: PerceptionRange<T>,
    pub instances: Vec<MapInstance<T>>,
}

impl<T: Scalar> LocalMap<T> {
    pub fn new(frame_id: impl Into<String>, timestamp: f64, range: PerceptionRange<T>) -> Self {
        Self {
            frame_id: frame_id.into(),
            timestamp,
            ego_pose: RigidTransform::identity(),
            range,
            instances: Vec::new(),
        }
    }

    pub fn of_class(&self, class: ClassId) -> impl Iterator<Item = &MapInstance<T>> {
        self.instances.iter().filter(move |i| i.class == class)
    }
}
