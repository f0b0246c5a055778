use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::labelops::{fill_boxes, BBox, CoverageMap, InstanceMap};

/// Parses a JSON array of boxes. Empty (or whitespace-only) input is an
/// empty list.
pub fn parse_boxes(bytes: &[u8]) -> Result<Vec<BBox>> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(Vec::new());
    }
    let items: Vec<serde_json::Value> = serde_json::from_slice(bytes)
        .map_err(|e| Error::data(format!("box file is not a JSON array: {e}")))?;
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v).map_err(|e| Error::data(format!("box {i}: {e}")))
        })
        .collect()
}

pub fn load_boxes(path: &Path) -> Result<Vec<BBox>> {
    parse_boxes(&fsutil::read(path)?)
        .map_err(|e| e.context(path.display()))
}

pub fn save_boxes(path: &Path, boxes: &[BBox]) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(boxes)?;
    text.push(b'\n');
    fsutil::write_atomic(path, &text)
}

/// Reads a box file and fills it into a coverage map of the given size.
/// [`CoverageMap::normalized`] gives the scale-free copy used for fusion.
pub fn detection_ingest(path: &Path, width: usize, height: usize) -> Result<CoverageMap> {
    let boxes = load_boxes(path)?;
    fill_boxes(&boxes, width, height).map_err(|e| e.context(path.display()))
}

/// Tight box of every instance, each side moved by up to `jitter` pixels
/// and clamped to the image. Boxes never collapse to zero area.
pub fn boxes_from_labels(labels: &InstanceMap, jitter: usize, rng: &mut ChaCha8Rng) -> Vec<BBox> {
    let (w, h) = (labels.width() as i64, labels.height() as i64);
    let j = jitter as i64;
    let mut shift = |v: usize| -> i64 {
        if j == 0 {
            v as i64
        } else {
            v as i64 + rng.gen_range(-j..=j)
        }
    };
    labels
        .bounding_boxes()
        .into_iter()
        .map(|(_, b)| {
            let x0 = shift(b.x0).clamp(0, w - 1);
            let y0 = shift(b.y0).clamp(0, h - 1);
            let x1 = shift(b.x1).clamp(x0 + 1, w);
            let y1 = shift(b.y1).clamp(y0 + 1, h);
            BBox::new(x0 as usize, y0 as usize, x1 as usize, y1 as usize)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::seeded_rng;

    #[test]
    fn empty_file_is_zero_map() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.json");
        std::fs::write(&p, "").unwrap();
        assert_eq!(detection_ingest(&p, 4, 3).unwrap().total(), 0);
    }

    #[test]
    fn triple_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.json");
        std::fs::write(
            &p,
            r#"[{"x0":0,"y0":0,"x1":4,"y1":4},{"x0":2,"y0":2,"x1":6,"y1":6},{"x0":3,"y0":1,"x1":5,"y1":5,"score":0.9}]"#,
        )
        .unwrap();
        let c = detection_ingest(&p, 8, 8).unwrap();
        assert_eq!(c.max(), 3);
        assert_eq!(c.get(3, 3), 3);
        assert_eq!(c.normalized()[3 * 8 + 3], 1.0);
    }

    #[test]
    fn bad_box_reports_index() {
        let err = parse_boxes(br#"[{"x0":0,"y0":0,"x1":1,"y1":1},{"x0":"a"}]"#).unwrap_err();
        assert!(err.to_string().contains("box 1"), "{err}");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.json");
        std::fs::write(&p, r#"[{"x0":0,"y0":0,"x1":9,"y1":1}]"#).unwrap();
        let err = detection_ingest(&p, 4, 4).unwrap_err();
        assert!(err.to_string().contains("box 0"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn tight_boxes_without_jitter() {
        let labels = InstanceMap::new(4, 3, vec![0, 1, 1, 0, 0, 1, 0, 2, 0, 0, 0, 2]).unwrap();
        let b = boxes_from_labels(&labels, 0, &mut seeded_rng(0));
        assert_eq!(b, vec![BBox::new(1, 0, 3, 2), BBox::new(3, 1, 4, 3)]);
        let j = boxes_from_labels(&labels, 2, &mut seeded_rng(5));
        assert!(j.iter().all(|b| b.validate(4, 3).is_ok()));
    }
}
