use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One pose: `joints × dims` coordinates, joint-major
/// (`[x0, y0, (z0), x1, y1, …]`).
pub type SkeletonFrame = Vec<f64>;

/// A labeled sequence of poses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub label: usize,
    pub frames: Vec<SkeletonFrame>,
    /// Source identifier (file name, generator tag); omitted from JSON when empty.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub meta: String,
}

impl ActionSequence {
    pub fn new(label: usize, frames: Vec<SkeletonFrame>) -> Self {
        ActionSequence {
            label,
            frames,
            meta: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// All frames concatenated, `N·d` values.
    pub fn flatten(&self) -> Vec<f64> {
        self.frames.concat()
    }
}

/// Canonical interchange form:
/// `{"classes": K, "joints": J, "dims": D, "sequences": [{"label": …, "frames": [[…], …]}, …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub classes: usize,
    pub joints: usize,
    pub dims: usize,
    pub sequences: Vec<ActionSequence>,
}

impl Dataset {
    pub fn frame_dim(&self) -> usize {
        self.joints * self.dims
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Sequence length when every sequence has the same number of frames.
    pub fn seq_len(&self) -> Option<usize> {
        let n = self.sequences.first()?.len();
        self.sequences.iter().all(|s| s.len() == n).then_some(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.joints == 0 || self.dims == 0 {
            return Err(Error::Config("classes, joints and dims must be positive".into()));
        }
        let d = self.frame_dim();
        for (i, s) in self.sequences.iter().enumerate() {
            if s.label >= self.classes {
                return Err(Error::Config(format!(
                    "sequence {i}: label {} not below {} classes",
                    s.label, self.classes
                )));
            }
            if s.frames.is_empty() {
                return Err(Error::Config(format!("sequence {i} has no frames")));
            }
            for (j, f) in s.frames.iter().enumerate() {
                if f.len() != d {
                    return Err(Error::Config(format!(
                        "sequence {i} frame {j}: {} coords, expected {d}",
                        f.len()
                    )));
                }
                if !f.iter().all(|v| v.is_finite()) {
                    return Err(Error::Config(format!("sequence {i} frame {j} is not finite")));
                }
            }
        }
        Ok(())
    }

    /// Indices of the sequences carrying each label.
    pub fn indices_by_label(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, s) in self.sequences.iter().enumerate() {
            out[s.label].push(i);
        }
        out
    }

    /// Every frame of every sequence as rows of a matrix.
    pub fn frame_matrix(&self) -> Result<Tensor> {
        let rows: Vec<Vec<f64>> = self.sequences.iter().flat_map(|s| s.frames.clone()).collect();
        Tensor::from_rows(&rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text)?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// One row per frame: `seq_id, frame_idx, label, c0, c1, …`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["seq_id".to_string(), "frame_idx".into(), "label".into()];
        header.extend((0..self.frame_dim()).map(|i| format!("c{i}")));
        w.write_record(&header)?;
        for (i, s) in self.sequences.iter().enumerate() {
            for (j, f) in s.frames.iter().enumerate() {
                let mut rec = vec![i.to_string(), j.to_string(), s.label.to_string()];
                rec.extend(f.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            classes: 2,
            joints: 2,
            dims: 2,
            sequences: vec![
                ActionSequence::new(0, vec![vec![0.0, 0.1, 0.2, 0.3], vec![1.0, 1.1, 1.2, 1.3]]),
                ActionSequence {
                    label: 1,
                    frames: vec![vec![-0.5, 1e-17, 3.25, 7.0]; 2],
                    meta: "src".into(),
                },
            ],
        }
    }

    #[test]
    fn json_schema_and_round_trip() {
        let ds = tiny();
        let text = ds.to_json().unwrap();
        assert!(text.starts_with(r#"{"classes":2,"joints":2,"dims":2,"sequences":[{"label":0,"frames":[[0.0,0.1"#));
        let back = Dataset::from_json(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn validation_catches_bad_sequences() {
        let mut ds = tiny();
        ds.sequences[0].label = 2;
        assert!(ds.validate().is_err());
        let mut ds = tiny();
        ds.sequences[1].frames[0].pop();
        assert!(ds.validate().is_err());
        let mut ds = tiny();
        ds.sequences[1].frames[0][0] = f64::NAN;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        tiny().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "seq_id,frame_idx,label,c0,c1,c2,c3");
        assert_eq!(lines[4], "1,1,1,-0.5,0.00000000000000001,3.25,7");
    }
}
