use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Bbox, Detection, Error, Result};

use super::FrameResult;

/// One line of a MOT-Challenge file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    /// `-1` in detection files.
    pub id: i64,
    pub bbox: Bbox,
    pub confidence: f64,
}

/// Parses `frame,id,left,top,width,height,conf[,x,y,z]` lines. Blank lines are skipped.
pub fn parse_mot_records(text: &str) -> Result<Vec<MotRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 7 {
            return Err(err(format!("expected at least 7 fields, found {}", fields.len())));
        }
        let num = |idx: usize| -> Result<f64> {
            let v: f64 = fields[idx].parse().map_err(|_| err(format!("field {} is not a number: {:?}", idx + 1, fields[idx])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("field {} is not finite", idx + 1)))
            }
        };
        let frame = num(0)?;
        if frame < 1.0 || frame.fract() != 0.0 || frame > u32::MAX as f64 {
            return Err(err(format!("frame {frame} must be a positive integer")));
        }
        let id = num(1)?;
        if id.fract() != 0.0 {
            return Err(err(format!("id {id} must be an integer")));
        }
        let bbox = Bbox::new(num(2)?, num(3)?, num(4)?, num(5)?);
        if !bbox.is_valid() {
            return Err(err(format!("box {bbox:?} must have positive size")));
        }
        out.push(MotRecord { frame: frame as u32, id: id as i64, bbox, confidence: num(6)? });
    }
    Ok(out)
}

/// Groups detections by frame; the id field is ignored.
pub fn parse_mot_str(text: &str) -> Result<BTreeMap<u32, Vec<Detection>>> {
    let mut frames: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for r in parse_mot_records(text)? {
        frames.entry(r.frame).or_default().push(Detection { bbox: r.bbox, confidence: r.confidence, frame: r.frame });
    }
    Ok(frames)
}

pub fn parse_mot_detections(path: &Path) -> Result<BTreeMap<u32, Vec<Detection>>> {
    parse_mot_str(&std::fs::read_to_string(path)?)
}

/// Frame-major, id-minor lines with 2-decimal boxes.
pub fn format_mot_results(results: &[FrameResult]) -> String {
    let mut rows: Vec<(u32, u64, Bbox, f64)> =
        results.iter().flat_map(|(f, boxes)| boxes.iter().map(move |b| (*f, b.id, b.bbox, b.confidence))).collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut s = String::new();
    for (f, id, b, c) in rows {
        writeln!(s, "{f},{id},{:.2},{:.2},{:.2},{:.2},{c:.2},-1,-1,-1", b.left, b.top, b.width, b.height).unwrap();
    }
    s
}

pub fn write_mot_results(results: &[FrameResult], path: &Path) -> Result<()> {
    std::fs::write(path, format_mot_results(results))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot::TrackBox;

    #[test]
    fn parses_a_detection_line() {
        let f = parse_mot_str("1,-1,10,20,30,40,0.9,-1,-1,-1\n").unwrap();
        let d = f[&1][0];
        assert_eq!(d.bbox, Bbox::new(10.0, 20.0, 30.0, 40.0));
        assert_eq!(d.confidence, 0.9);
        assert_eq!(d.frame, 1);
    }

    #[test]
    fn groups_out_of_order_frames() {
        let f = parse_mot_str("3,-1,0,0,1,1,1\n1,-1,0,0,2,2,1\n\n3,-1,5,5,1,1,1\n").unwrap();
        assert_eq!(f.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(f[&3].len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("1,-1,0,0,1,1,1\n2,-1,x,0,1,1,1\n", 2),
            ("0,-1,0,0,1,1,1\n", 1),
            ("1,-1,0,0,1,1,1\n\n1,-1,0,0,0,1,1\n", 3),
            ("1,-1,0,0\n", 1),
        ] {
            match parse_mot_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn empty_input_empty_output() {
        assert!(parse_mot_str("").unwrap().is_empty());
        assert_eq!(format_mot_results(&[]), "");
        assert_eq!(format_mot_results(&[(1, vec![])]), "");
    }

    #[test]
    fn output_order_and_precision() {
        let tb = |id, l| TrackBox { id, bbox: Bbox::new(l, 2.0, 3.0, 4.0), confidence: 0.5 };
        let s = format_mot_results(&[(2, vec![tb(1, 0.0)]), (1, vec![tb(7, 1.005), tb(3, 1.0 / 3.0)])]);
        assert_eq!(
            s,
            "1,3,0.33,2.00,3.00,4.00,0.50,-1,-1,-1\n1,7,1.00,2.00,3.00,4.00,0.50,-1,-1,-1\n2,1,0.00,2.00,3.00,4.00,0.50,-1,-1,-1\n"
        );
    }
}
