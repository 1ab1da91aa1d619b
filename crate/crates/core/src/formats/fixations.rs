//! Fixation JSON.
//!
//! ```json
//! {"image": "img01", "width": 640, "height": 480,
//!  "subjects": [[[x, y], ...], ...]}
//! ```
//!
//! `x` is the column and `y` the row, both 0-indexed. Subjects are pooled
//! when converted to a [`FixationSet`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::FixationSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationFile {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub subjects: Vec<Vec<[i64; 2]>>,
}

impl FixationFile {
    /// Validates bounds and pools all subjects. The error index counts
    /// fixations across subjects in file order.
    pub fn into_set(self) -> Result<FixationSet> {
        let mut points = Vec::new();
        for (index, [x, y]) in self.subjects.iter().flatten().copied().enumerate() {
            if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                return Err(Error::FixationOutOfBounds {
                    index,
                    x,
                    y,
                    width: self.width,
                    height: self.height,
                });
            }
            points.push((x as usize, y as usize));
        }
        if points.is_empty() {
            return Err(Error::EmptyFixations);
        }
        FixationSet::new(self.image, self.width, self.height, points)
    }

    /// Single-subject file holding every point of `set`.
    pub fn from_set(set: &FixationSet) -> Self {
        FixationFile {
            image: set.image.clone(),
            width: set.width,
            height: set.height,
            subjects: vec![set.points.iter().map(|&(x, y)| [x as i64, y as i64]).collect()],
        }
    }
}

pub fn parse_fixations(json: &str) -> Result<FixationSet> {
    serde_json::from_str::<FixationFile>(json)?.into_set()
}

pub fn read_fixations(path: impl AsRef<Path>) -> Result<FixationSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fixations(&text)
}

pub fn write_fixations(path: impl AsRef<Path>, file: &FixationFile) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_subjects() {
        let fx = parse_fixations(r#"{"image":"a","width":4,"height":3,"subjects":[[[0,0],[3,2]],[[1,1]]]}"#).unwrap();
        assert_eq!(fx.points, vec![(0, 0), (3, 2), (1, 1)]);
        assert_eq!(fx.dims(), (4, 3));
    }

    #[test]
    fn out_of_bounds_names_offending_index() {
        let err = parse_fixations(r#"{"image":"a","width":4,"height":3,"subjects":[[[0,0]],[[1,1],[4,0]]]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::FixationOutOfBounds { index: 2, .. }));
        assert!(err.to_string().contains("fixation 2"));
        let neg = parse_fixations(r#"{"image":"a","width":4,"height":3,"subjects":[[[-1,0]]]}"#).unwrap_err();
        assert!(matches!(neg, Error::FixationOutOfBounds { index: 0, .. }));
    }

    #[test]
    fn empty_subjects_rejected() {
        assert!(parse_fixations(r#"{"image":"a","width":4,"height":3,"subjects":[]}"#).is_err());
        assert!(parse_fixations(r#"{"image":"a","width":4,"height":3,"subjects":[[]]}"#).is_err());
    }

    #[test]
    fn from_set_round_trip() {
        let set = FixationSet::new("b", 5, 5, vec![(1, 2), (4, 4)]).unwrap();
        assert_eq!(FixationFile::from_set(&set).into_set().unwrap(), set);
    }
}
