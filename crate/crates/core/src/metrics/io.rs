//! File formats for the metrics layer: classification prediction CSVs,
//! segmentation index CSVs with PGM masks, ROC point dumps, and the report
//! CSV that mirrors the results-table column layout.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ClassificationRecord, Mask, MetricsReport, SegmentationRecord};
use crate::error::{Error, Result};

/// Reads `id,score,label,attribute` rows. Scores must be finite and in
/// [0, 1]; labels binary.
pub fn load_classification_csv(path: &Path) -> Result<Vec<ClassificationRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty predictions file".into(),
        })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols != ["id", "score", "label", "attribute"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header id,score,label,attribute, got {header:?}"),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let score: f64 = fields[1].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad score {:?}", fields[1]),
        })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("score {score} outside [0,1]"),
            });
        }
        let label: u8 = match fields[2].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        let attribute: u32 = fields[3].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad attribute {:?}", fields[3]),
        })?;
        records.push(ClassificationRecord {
            id: fields[0].trim().to_string(),
            score,
            label,
            attribute,
        });
    }
    Ok(records)
}

pub fn write_classification_csv(records: &[ClassificationRecord], path: &Path) -> Result<()> {
    let mut out = String::from("id,score,label,attribute\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.17e},{},{}\n",
            r.id, r.score, r.label, r.attribute
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads `id,pred_path,truth_path,attribute` rows; mask paths are resolved
/// relative to the index file's directory.
pub fn load_segmentation_index(path: &Path) -> Result<Vec<SegmentationRecord>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty index file".into(),
    })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols != ["id", "pred_path", "truth_path", "attribute"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header id,pred_path,truth_path,attribute, got {header:?}"),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let attribute: u32 = fields[3].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad attribute {:?}", fields[3]),
        })?;
        records.push(SegmentationRecord {
            id: fields[0].trim().to_string(),
            pred: load_mask(&base.join(fields[1].trim()))?,
            truth: load_mask(&base.join(fields[2].trim()))?,
            attribute,
        });
    }
    Ok(records)
}

/// Loads a PGM raster (ASCII P2 or binary P5); any nonzero pixel is mask.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path)?;
    let magic = bytes.get(..2).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("{}: truncated PGM", path.display()),
    })?;
    match magic {
        b"P2" => parse_p2(&bytes, path),
        b"P5" => parse_p5(&bytes, path),
        _ => Err(Error::Parse {
            line: 1,
            message: format!("{}: not a P2/P5 PGM file", path.display()),
        }),
    }
}

fn parse_p2(bytes: &[u8], path: &Path) -> Result<Mask> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse {
        line: 1,
        message: format!("{}: P2 file is not valid text", path.display()),
    })?;
    let mut tokens = text
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace());
    let bad = |what: &str| Error::Parse {
        line: 1,
        message: format!("{}: {what}", path.display()),
    };
    tokens.next(); // magic
    let width: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("missing width"))?;
    let height: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("missing height"))?;
    let _maxval: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("missing maxval"))?;
    let mut data = Vec::with_capacity(width * height);
    for t in tokens.take(width * height) {
        let v: u32 = t.parse().map_err(|_| bad("bad pixel value"))?;
        data.push(v > 0);
    }
    if data.len() != width * height {
        return Err(bad("pixel count does not match dimensions"));
    }
    Mask::new(height, width, data)
}

fn parse_p5(bytes: &[u8], path: &Path) -> Result<Mask> {
    let bad = |what: &str| Error::Parse {
        line: 1,
        message: format!("{}: {what}", path.display()),
    };
    // header: magic, width, height, maxval separated by whitespace, then raw bytes
    let mut pos = 2;
    let mut fields = Vec::new();
    while fields.len() < 3 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes.get(pos) == Some(&b'#') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?;
        fields.push(
            token
                .parse::<usize>()
                .map_err(|_| bad("bad header value"))?,
        );
    }
    if fields.len() != 3 {
        return Err(bad("incomplete header"));
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval > 255 {
        return Err(bad("16-bit PGM not supported"));
    }
    pos += 1; // single whitespace after maxval
    let raster = bytes.get(pos..pos + width * height).ok_or_else(|| bad("truncated raster"))?;
    Mask::new(height, width, raster.iter().map(|&b| b > 0).collect())
}

/// Writes a mask as ASCII PGM (P2) with 0/1 pixels.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let mut out = format!("P2\n{} {}\n1\n", mask.width, mask.height);
    for row in 0..mask.height {
        let line: Vec<&str> = (0..mask.width)
            .map(|c| if mask.data[row * mask.width + c] { "1" } else { "0" })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve points (one per distinct score, descending threshold), for
/// offline accuracy/fairness trade-off plots.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidInput("empty or mismatched inputs".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push(RocPoint {
            threshold: scores[order[i]],
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
        i = j + 1;
    }
    Ok(points)
}

/// Report CSV with one metric per row, following the results-table layout
/// (overall, minimum, equity-scaled, gap, then the disparity rows).
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut out = String::from("metric,value\n");
    let mut push_block = |block: &super::MetricBlock| {
        let name = &block.metric;
        out.push_str(&format!("overall_{name},{}\n", fmt(block.overall)));
        out.push_str(&format!("min_{name},{}\n", fmt(block.worst_case)));
        out.push_str(&format!("es_{name},{}\n", fmt(block.equity_scaled)));
        out.push_str(&format!("{name}_gap,{}\n", fmt(block.gap)));
        if let Some(m) = block.mean_psd {
            out.push_str(&format!("mean_psd,{}\n", fmt(m)));
        }
        if let Some(m) = block.max_psd {
            out.push_str(&format!("max_psd,{}\n", fmt(m)));
        }
        for (g, v) in &block.per_group {
            out.push_str(&format!("{name}_group_{g},{}\n", fmt(*v)));
        }
    };
    push_block(&report.primary);
    if let Some(sec) = &report.secondary {
        push_block(sec);
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{report, PredictionSet, Task};

    #[test]
    fn classification_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.csv");
        let records = vec![
            ClassificationRecord {
                id: "s0".into(),
                score: 0.123456789012345,
                label: 1,
                attribute: 0,
            },
            ClassificationRecord {
                id: "s1".into(),
                score: 0.9,
                label: 0,
                attribute: 1,
            },
        ];
        write_classification_csv(&records, &path).unwrap();
        let loaded = load_classification_csv(&path).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn classification_csv_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "id,score,label,attribute\na,0.5,1,0\nb,0.5,2,0\n",
        )
        .unwrap();
        match load_classification_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn pgm_round_trip_both_ways() {
        let dir = tempfile::tempdir().unwrap();
        let mask = Mask::new(2, 3, vec![true, false, true, false, true, false]).unwrap();
        let path = dir.path().join("m.pgm");
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);

        // binary P5 variant
        let p5 = dir.path().join("m5.pgm");
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 1, 0, 9, 0]);
        std::fs::write(&p5, bytes).unwrap();
        assert_eq!(load_mask(&p5).unwrap(), mask);
    }

    #[test]
    fn segmentation_index_loads_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let full = Mask::new(2, 2, vec![true; 4]).unwrap();
        let half = Mask::new(2, 2, vec![true, true, false, false]).unwrap();
        save_mask(&full, &dir.path().join("t0.pgm")).unwrap();
        save_mask(&full, &dir.path().join("p0.pgm")).unwrap();
        save_mask(&full, &dir.path().join("t1.pgm")).unwrap();
        save_mask(&half, &dir.path().join("p1.pgm")).unwrap();
        let index = dir.path().join("index.csv");
        std::fs::write(
            &index,
            "id,pred_path,truth_path,attribute\nx0,p0.pgm,t0.pgm,0\nx1,p1.pgm,t1.pgm,1\n",
        )
        .unwrap();
        let records = load_segmentation_index(&index).unwrap();
        assert_eq!(records.len(), 2);
        let rep = report(
            &PredictionSet::Segmentation(records),
            Task::Segmentation,
        )
        .unwrap();
        assert_eq!(rep.primary.per_group[&0], 1.0);
        assert!((rep.primary.per_group[&1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn roc_points_trace_the_curve() {
        let scores = [0.9, 0.8, 0.4, 0.3];
        let labels = [1, 0, 1, 0];
        let pts = roc_points(&scores, &labels).unwrap();
        assert_eq!(pts.first().unwrap().tpr, 0.0);
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        // area under this curve equals the AUC
        let mut area = 0.0;
        for w in pts.windows(2) {
            area += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
        }
        let want = crate::metrics::auc(&scores, &labels).unwrap();
        assert!((area - want).abs() < 1e-12);
    }
}
