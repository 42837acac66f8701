//! Serialized vertex gain sets.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::lpv::{enumerate_vertices, SchedulingBounds};
use crate::synthesis::{SynthesisConfig, SynthesisReport, VertexGainSet};
use crate::{Error, Result};

/// Which cascade loop a gain document belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Kinematic,
    Dynamic,
}

impl LoopKind {
    pub fn name(self) -> &'static str {
        match self {
            LoopKind::Kinematic => "kinematic",
            LoopKind::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexGain {
    /// Scheduling values of the corner, ordered like `bounds`.
    pub vertex: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainDocument {
    #[serde(rename = "loop")]
    pub loop_kind: LoopKind,
    pub bounds: SchedulingBounds,
    /// Always `"binary, last variable fastest"`; pins the weight/gain pairing.
    pub vertex_order: String,
    pub gains: Vec<VertexGain>,
    pub synthesis: SynthesisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SynthesisReport>,
}

pub const VERTEX_ORDER: &str = "binary, last variable fastest";

impl GainDocument {
    pub fn new(
        loop_kind: LoopKind,
        gains: &VertexGainSet,
        synthesis: &SynthesisConfig,
        report: Option<SynthesisReport>,
    ) -> Self {
        let vertices = enumerate_vertices(&gains.bounds);
        let gains_out = vertices
            .iter()
            .zip(&gains.gains)
            .map(|(p, k)| VertexGain {
                vertex: p.0.clone(),
                rows: k.nrows(),
                cols: k.ncols(),
                data: (0..k.nrows())
                    .flat_map(|i| (0..k.ncols()).map(move |j| k[(i, j)]))
                    .collect(),
            })
            .collect();
        Self {
            loop_kind,
            bounds: gains.bounds.clone(),
            vertex_order: VERTEX_ORDER.to_string(),
            gains: gains_out,
            synthesis: synthesis.clone(),
            report,
        }
    }

    /// Rebuilds the gain set, checking ordering metadata and shapes.
    pub fn to_gain_set(&self) -> Result<VertexGainSet> {
        self.bounds.validate()?;
        if self.vertex_order != VERTEX_ORDER {
            return Err(Error::Config(format!(
                "unsupported vertex order '{}'",
                self.vertex_order
            )));
        }
        let vertices = enumerate_vertices(&self.bounds);
        if self.gains.len() != vertices.len() {
            return Err(Error::Config(format!(
                "{} gain document has {} gains for {} vertices",
                self.loop_kind.name(),
                self.gains.len(),
                vertices.len()
            )));
        }
        let mut out = Vec::with_capacity(self.gains.len());
        for (i, (g, p)) in self.gains.iter().zip(vertices.iter()).enumerate() {
            if g.vertex.len() != p.0.len() || g.vertex.iter().zip(&p.0).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(Error::Config(format!(
                    "gain {i} is tagged with vertex {:?}, expected {:?}",
                    g.vertex, p.0
                )));
            }
            if g.data.len() != g.rows * g.cols {
                return Err(Error::Config(format!(
                    "gain {i} has {} entries for a {}x{} matrix",
                    g.data.len(),
                    g.rows,
                    g.cols
                )));
            }
            out.push(DMatrix::from_row_slice(g.rows, g.cols, &g.data));
        }
        VertexGainSet::new(self.bounds.clone(), out)
    }

    /// Rejects documents that do not match the expected loop, bounds or gain shape.
    pub fn check_compatible(
        &self,
        loop_kind: LoopKind,
        bounds: &SchedulingBounds,
        shape: (usize, usize),
    ) -> Result<VertexGainSet> {
        if self.loop_kind != loop_kind {
            return Err(Error::Config(format!(
                "expected a {} gain document, found {}",
                loop_kind.name(),
                self.loop_kind.name()
            )));
        }
        let same_bounds = self.bounds.len() == bounds.len()
            && self.bounds.variables.iter().zip(&bounds.variables).all(|(a, b)| {
                a.name == b.name && (a.lower - b.lower).abs() <= 1e-12 && (a.upper - b.upper).abs() <= 1e-12
            });
        if !same_bounds {
            return Err(Error::Config(format!(
                "{} gain document bounds do not match the configured scheduling bounds",
                loop_kind.name()
            )));
        }
        let set = self.to_gain_set()?;
        if set.shape() != shape {
            return Err(Error::Config(format!(
                "{} gains are {:?}, expected {:?}",
                loop_kind.name(),
                set.shape(),
                shape
            )));
        }
        Ok(set)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> GainDocument {
        let bounds = SchedulingBounds::new(&[("v", 1.0, 18.0), ("sigma", 0.1, 0.9)]).unwrap();
        let gains = (0..4)
            .map(|i| DMatrix::from_fn(2, 3, |r, c| (i * 10 + r * 3 + c) as f64))
            .collect();
        let set = VertexGainSet::new(bounds, gains).unwrap();
        GainDocument::new(LoopKind::Dynamic, &set, &SynthesisConfig::dynamic_default(), None)
    }

    #[test]
    fn json_roundtrip_preserves_gains() {
        let d = doc();
        let back = GainDocument::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
        let set = back.to_gain_set().unwrap();
        assert_eq!(set.gains[2][(1, 2)], 25.0);
        assert_eq!(d.gains[1].vertex, vec![1.0, 0.9]);
        assert_eq!(d.gains[2].data[..3], [20.0, 21.0, 22.0]);
    }

    #[test]
    fn mismatches_rejected() {
        let d = doc();
        let bounds = d.bounds.clone();
        assert!(d.check_compatible(LoopKind::Dynamic, &bounds, (2, 3)).is_ok());
        assert!(d.check_compatible(LoopKind::Kinematic, &bounds, (2, 3)).is_err());
        assert!(d.check_compatible(LoopKind::Dynamic, &bounds, (2, 6)).is_err());
        let other = SchedulingBounds::new(&[("v", 1.0, 20.0), ("sigma", 0.1, 0.9)]).unwrap();
        assert!(d.check_compatible(LoopKind::Dynamic, &other, (2, 3)).is_err());

        let mut short = d.clone();
        short.gains.pop();
        assert!(short.to_gain_set().is_err());
        let mut swapped = d.clone();
        swapped.gains.swap(0, 1);
        assert!(swapped.to_gain_set().is_err());
        let mut unknown = d;
        unknown.vertex_order = "gray".into();
        assert!(unknown.to_gain_set().is_err());
    }
}
