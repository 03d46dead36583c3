//! CSV and PGM serialization.
//!
//! All CSV files are UTF-8 with LF line endings and a fixed header; real
//! fields are printed with 6 decimal places so identical data always
//! round-trips to identical bytes. Images use binary PGM (P5, maxval 255).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::grid::ImageGrid;
use crate::types::{round_half_up, BoundingBox, Detection, GroundTruthObject, TrackRecord};
use crate::{Error, Result};

pub const DETECTIONS_HEADER: &str = "frame,x,y,w,h,score";
pub const TRACKS_HEADER: &str = "frame,id,x,y,w,h";
pub const GROUND_TRUTH_HEADER: &str = "frame,id,x,y,w,h,vx,vy,heading";

fn data_err(path_hint: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{path_hint}:{line}: {msg}"))
}

fn parse_f64(tok: &str, name: &str, hint: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| data_err(hint, line, format!("invalid {name} value {tok:?}")))
}

fn parse_u64(tok: &str, name: &str, hint: &str, line: usize) -> Result<u64> {
    tok.trim()
        .parse::<u64>()
        .map_err(|_| data_err(hint, line, format!("invalid {name} value {tok:?}")))
}

fn split_row<'a>(row: &'a str, n: usize, hint: &str, line: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != n {
        return Err(data_err(
            hint,
            line,
            format!("expected {n} fields, found {}", fields.len()),
        ));
    }
    Ok(fields)
}

fn check_header(text: &str, expected: &str, hint: &str) -> Result<()> {
    match text.lines().next() {
        Some(h) if h.trim_end_matches('\r') == expected => Ok(()),
        Some(h) => Err(data_err(
            hint,
            1,
            format!("bad header {h:?}, expected {expected:?}"),
        )),
        None => Err(data_err(hint, 1, "empty file")),
    }
}

// --- detections ------------------------------------------------------------

pub fn detections_to_csv(dets: &[Detection]) -> String {
    let mut out = String::from(DETECTIONS_HEADER);
    out.push('\n');
    for d in dets {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            d.frame, d.box_.x, d.box_.y, d.box_.w, d.box_.h, d.score
        );
    }
    out
}

pub fn detections_from_csv(text: &str, hint: &str) -> Result<Vec<Detection>> {
    check_header(text, DETECTIONS_HEADER, hint)?;
    let mut out = Vec::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        let row = row.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let line = i + 1;
        let f = split_row(row, 6, hint, line)?;
        let det = Detection::new(
            parse_u64(f[0], "frame", hint, line)?,
            BoundingBox {
                x: parse_f64(f[1], "x", hint, line)?,
                y: parse_f64(f[2], "y", hint, line)?,
                w: parse_f64(f[3], "w", hint, line)?,
                h: parse_f64(f[4], "h", hint, line)?,
            },
            parse_f64(f[5], "score", hint, line)?,
        )
        .map_err(|e| data_err(hint, line, e))?;
        out.push(det);
    }
    Ok(out)
}

// --- tracks ----------------------------------------------------------------

pub fn tracks_to_csv(tracks: &[TrackRecord]) -> String {
    let mut out = String::from(TRACKS_HEADER);
    out.push('\n');
    for t in tracks {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            t.frame, t.track_id, t.box_.x, t.box_.y, t.box_.w, t.box_.h
        );
    }
    out
}

pub fn tracks_from_csv(text: &str, hint: &str) -> Result<Vec<TrackRecord>> {
    check_header(text, TRACKS_HEADER, hint)?;
    let mut out = Vec::new();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        let row = row.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let line = i + 1;
        let f = split_row(row, 6, hint, line)?;
        let rec = TrackRecord {
            frame: parse_u64(f[0], "frame", hint, line)?,
            track_id: parse_u64(f[1], "id", hint, line)?,
            box_: BoundingBox::new(
                parse_f64(f[2], "x", hint, line)?,
                parse_f64(f[3], "y", hint, line)?,
                parse_f64(f[4], "w", hint, line)?,
                parse_f64(f[5], "h", hint, line)?,
            )
            .map_err(|e| data_err(hint, line, e))?,
        };
        if !seen.insert((rec.frame, rec.track_id)) {
            return Err(data_err(
                hint,
                line,
                format!("track id {} repeated in frame {}", rec.track_id, rec.frame),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

// --- ground truth ----------------------------------------------------------

pub fn ground_truth_to_csv(objs: &[GroundTruthObject]) -> String {
    let mut out = String::from(GROUND_TRUTH_HEADER);
    out.push('\n');
    for g in objs {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            g.frame,
            g.id,
            g.box_.x,
            g.box_.y,
            g.box_.w,
            g.box_.h,
            g.velocity.0,
            g.velocity.1,
            g.heading
        );
    }
    out
}

pub fn ground_truth_from_csv(text: &str, hint: &str) -> Result<Vec<GroundTruthObject>> {
    check_header(text, GROUND_TRUTH_HEADER, hint)?;
    let mut out = Vec::new();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        let row = row.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let line = i + 1;
        let f = split_row(row, 9, hint, line)?;
        let obj = GroundTruthObject {
            frame: parse_u64(f[0], "frame", hint, line)?,
            id: parse_u64(f[1], "id", hint, line)?,
            box_: BoundingBox::new(
                parse_f64(f[2], "x", hint, line)?,
                parse_f64(f[3], "y", hint, line)?,
                parse_f64(f[4], "w", hint, line)?,
                parse_f64(f[5], "h", hint, line)?,
            )
            .map_err(|e| data_err(hint, line, e))?,
            velocity: (
                parse_f64(f[6], "vx", hint, line)?,
                parse_f64(f[7], "vy", hint, line)?,
            ),
            heading: parse_f64(f[8], "heading", hint, line)?,
        };
        if !seen.insert((obj.frame, obj.id)) {
            return Err(data_err(
                hint,
                line,
                format!("object id {} repeated in frame {}", obj.id, obj.frame),
            ));
        }
        out.push(obj);
    }
    Ok(out)
}

// --- PGM -------------------------------------------------------------------

/// Serializes a grid as binary PGM (P5, maxval 255). Values are rounded
/// half-up and clamped to `[0, 255]`.
pub fn grid_to_pgm(grid: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    out.extend(
        grid.values()
            .iter()
            .map(|&v| round_half_up(v).clamp(0.0, 255.0) as u8),
    );
    out
}

/// Parses binary PGM (P5). Only maxval 255 is supported.
pub fn grid_from_pgm(bytes: &[u8], hint: &str) -> Result<ImageGrid> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and `#` comment lines
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Data(format!("{hint}: truncated PGM header")));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(bytes)?;
    if magic != "P5" {
        return Err(Error::Data(format!(
            "{hint}: unsupported PNM magic {magic:?}, expected P5"
        )));
    }
    let width: usize = token(bytes)?
        .parse()
        .map_err(|_| Error::Data(format!("{hint}: bad PGM width")))?;
    let height: usize = token(bytes)?
        .parse()
        .map_err(|_| Error::Data(format!("{hint}: bad PGM height")))?;
    let maxval: usize = token(bytes)?
        .parse()
        .map_err(|_| Error::Data(format!("{hint}: bad PGM maxval")))?;
    if maxval != 255 {
        return Err(Error::Data(format!(
            "{hint}: unsupported PGM maxval {maxval}, expected 255"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::Data(format!(
            "{hint}: PGM raster truncated ({} of {} bytes)",
            bytes.len().saturating_sub(pos),
            need
        )));
    }
    let values = bytes[pos..pos + need].iter().map(|&b| b as f64).collect();
    ImageGrid::from_values(width, height, values)
}

pub fn write_pgm(path: &Path, grid: &ImageGrid) -> Result<()> {
    fs::write(path, grid_to_pgm(grid))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    grid_from_pgm(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn detection_csv_round_trip() {
        let dets = vec![
            Detection::new(0, BoundingBox::new(1.5, 2.25, 10.0, 20.0).unwrap(), -0.78).unwrap(),
            Detection::new(3, BoundingBox::new(-4.0, 0.0, 3.5, 7.125).unwrap(), 1.25).unwrap(),
        ];
        let csv = detections_to_csv(&dets);
        let back = detections_from_csv(&csv, "mem").unwrap();
        assert_eq!(dets.len(), back.len());
        for (a, b) in dets.iter().zip(&back) {
            assert_eq!(a.frame, b.frame);
            assert!((a.box_.x - b.box_.x).abs() < 1e-6);
            assert!((a.score - b.score).abs() < 1e-6);
        }
    }

    #[test]
    fn header_mismatch_is_data_error() {
        let err = detections_from_csv("frame,x,y\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn duplicate_track_id_in_frame_rejected() {
        let csv = format!(
            "{TRACKS_HEADER}\n0,7,0.0,0.0,1.0,1.0\n0,7,5.0,5.0,1.0,1.0\n"
        );
        assert!(tracks_from_csv(&csv, "mem").is_err());
    }

    #[test]
    fn pgm_round_trip_and_validation() {
        let mut g = ImageGrid::new(3, 2);
        g.set(0, 0, 12.0);
        g.set(2, 1, 250.7); // rounds to 251
        let bytes = grid_to_pgm(&g);
        let back = grid_from_pgm(&bytes, "mem").unwrap();
        assert_eq!(back.width, 3);
        assert_eq!(back.height, 2);
        assert_eq!(back.get(0, 0), 12.0);
        assert_eq!(back.get(2, 1), 251.0);

        assert!(grid_from_pgm(b"P2\n1 1\n255\n0", "mem").is_err());
        assert!(grid_from_pgm(b"P5\n2 2\n255\nab", "mem").is_err());
    }

    proptest! {
        #[test]
        fn track_record_round_trip(
            rows in proptest::collection::vec(
                (0u64..50, 0u64..30, -50.0..500.0f64, -50.0..500.0f64,
                 0.1..60.0f64, 0.1..60.0f64),
                0..40,
            )
        ) {
            let mut seen = std::collections::HashSet::new();
            let recs: Vec<TrackRecord> = rows
                .into_iter()
                .filter(|r| seen.insert((r.0, r.1)))
                .map(|(frame, track_id, x, y, w, h)| TrackRecord {
                    frame,
                    track_id,
                    box_: BoundingBox { x, y, w, h },
                })
                .collect();
            let back = tracks_from_csv(&tracks_to_csv(&recs), "mem").unwrap();
            prop_assert_eq!(recs.len(), back.len());
            for (a, b) in recs.iter().zip(&back) {
                prop_assert_eq!(a.frame, b.frame);
                prop_assert_eq!(a.track_id, b.track_id);
                prop_assert!((a.box_.x - b.box_.x).abs() < 1e-6);
                prop_assert!((a.box_.y - b.box_.y).abs() < 1e-6);
                prop_assert!((a.box_.w - b.box_.w).abs() < 1e-6);
                prop_assert!((a.box_.h - b.box_.h).abs() < 1e-6);
            }
        }

        // Any record list survives a CSV round trip to 1e-6 on real fields.
        #[test]
        fn ground_truth_round_trip(
            rows in proptest::collection::vec(
                (0u64..50, 0u64..30, -50.0..500.0f64, -50.0..500.0f64,
                 0.1..60.0f64, 0.1..60.0f64, -8.0..8.0f64, -8.0..8.0f64, -3.2..3.2f64),
                0..40,
            )
        ) {
            let mut seen = std::collections::HashSet::new();
            let objs: Vec<GroundTruthObject> = rows
                .into_iter()
                .filter(|r| seen.insert((r.0, r.1)))
                .map(|(frame, id, x, y, w, h, vx, vy, heading)| GroundTruthObject {
                    frame,
                    id,
                    box_: BoundingBox { x, y, w, h },
                    velocity: (vx, vy),
                    heading,
                })
                .collect();
            let back = ground_truth_from_csv(&ground_truth_to_csv(&objs), "mem").unwrap();
            prop_assert_eq!(objs.len(), back.len());
            for (a, b) in objs.iter().zip(&back) {
                prop_assert_eq!(a.frame, b.frame);
                prop_assert_eq!(a.id, b.id);
                prop_assert!((a.box_.x - b.box_.x).abs() < 1e-6);
                prop_assert!((a.box_.y - b.box_.y).abs() < 1e-6);
                prop_assert!((a.box_.w - b.box_.w).abs() < 1e-6);
                prop_assert!((a.box_.h - b.box_.h).abs() < 1e-6);
                prop_assert!((a.velocity.0 - b.velocity.0).abs() < 1e-6);
                prop_assert!((a.velocity.1 - b.velocity.1).abs() < 1e-6);
                prop_assert!((a.heading - b.heading).abs() < 1e-6);
            }
        }
    }
}
