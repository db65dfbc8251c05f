//! Report persistence: learning-curve CSVs, ratio/similarity matrices,
//! correlation tables, and SVG heatmaps. All numeric formatting is
//! locale-independent (`.` decimal separator, `\n` newlines) and every
//! emitted CSV re-reads through the strict parsers in this module.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embed::SimilarityMatrix;
use crate::rl::LearningCurve;
use crate::transfer::{RatioMatrix, TargetCorrelation, TransferReport};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad curve CSV at line {line}: {reason}")]
    CurveParse { line: usize, reason: String },
    #[error("bad matrix CSV at line {line}: {reason}")]
    MatrixParse { line: usize, reason: String },
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ReportError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Render a learning curve as CSV: `episode,total_reward,steps,success`.
pub fn curve_to_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("episode,total_reward,steps,success\n");
    for i in 0..curve.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i, curve.totals[i], curve.steps[i], curve.successes[i]
        );
    }
    out
}

/// Strict inverse of [`curve_to_csv`]. Episode indices must be contiguous
/// from zero.
pub fn curve_from_csv(text: &str) -> Result<(Vec<f64>, Vec<u32>, Vec<bool>), ReportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ReportError::CurveParse {
        line: 1,
        reason: "empty file".into(),
    })?;
    if header != "episode,total_reward,steps,success" {
        return Err(ReportError::CurveParse { line: 1, reason: format!("bad header `{header}`") });
    }
    let mut totals = Vec::new();
    let mut steps = Vec::new();
    let mut successes = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ReportError::CurveParse {
                line: line_no,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let episode: usize = fields[0].parse().map_err(|e| ReportError::CurveParse {
            line: line_no,
            reason: format!("bad episode index: {e}"),
        })?;
        if episode != totals.len() {
            return Err(ReportError::CurveParse {
                line: line_no,
                reason: format!("episode {episode} out of order"),
            });
        }
        totals.push(fields[1].parse().map_err(|e| ReportError::CurveParse {
            line: line_no,
            reason: format!("bad total: {e}"),
        })?);
        steps.push(fields[2].parse().map_err(|e| ReportError::CurveParse {
            line: line_no,
            reason: format!("bad steps: {e}"),
        })?);
        successes.push(match fields[3] {
            "true" => true,
            "false" => false,
            other => {
                return Err(ReportError::CurveParse {
                    line: line_no,
                    reason: format!("bad success flag `{other}`"),
                })
            }
        });
    }
    Ok((totals, steps, successes))
}

/// Matrix CSV with a `source\target` corner cell, one row per source, three
/// fractional digits, and empty cells for skipped pairs.
pub fn matrix_to_csv(
    sources: &[String],
    targets: &[String],
    values: &[Vec<Option<f64>>],
) -> String {
    let mut out = String::from("source\\target");
    for t in targets {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (i, s) in sources.iter().enumerate() {
        let _ = write!(out, "{s}");
        for j in 0..targets.len() {
            match values[i][j] {
                Some(v) => {
                    let _ = write!(out, ",{v:.3}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Strict inverse of [`matrix_to_csv`].
#[allow(clippy::type_complexity)]
pub fn matrix_from_csv(
    text: &str,
) -> Result<(Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>), ReportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ReportError::MatrixParse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let mut header_fields = header.split(',');
    let corner = header_fields.next().unwrap_or("");
    if corner != "source\\target" {
        return Err(ReportError::MatrixParse {
            line: 1,
            reason: format!("bad corner cell `{corner}`"),
        });
    }
    let targets: Vec<String> = header_fields.map(str::to_owned).collect();
    let mut sources = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split(',');
        sources.push(fields.next().unwrap_or("").to_string());
        let row: Result<Vec<Option<f64>>, ReportError> = fields
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|e| ReportError::MatrixParse {
                        line: line_no,
                        reason: format!("bad cell `{f}`: {e}"),
                    })
                }
            })
            .collect();
        let row = row?;
        if row.len() != targets.len() {
            return Err(ReportError::MatrixParse {
                line: line_no,
                reason: format!("expected {} cells, got {}", targets.len(), row.len()),
            });
        }
        values.push(row);
    }
    Ok((sources, targets, values))
}

fn correlations_to_csv(correlations: &[TargetCorrelation]) -> String {
    let mut out = String::from("target,checkpoint,spearman_rho,n_sources\n");
    for c in correlations {
        let _ = writeln!(out, "{},{},{:.6},{}", c.target, c.checkpoint, c.rho, c.n_sources);
    }
    out
}

/// The per-target forgetting table: ratios at every checkpoint side by side,
/// plus the decay between the first and last one.
fn forgetting_to_csv(ratios: &[RatioMatrix]) -> String {
    let mut out = String::from("source,target");
    for m in ratios {
        let _ = write!(out, ",ratio_ep{}", m.checkpoint);
    }
    out.push_str(",decay\n");
    if ratios.is_empty() {
        return out;
    }
    let first = &ratios[0];
    for (i, source) in first.sources.iter().enumerate() {
        for (j, target) in first.targets.iter().enumerate() {
            let cells: Vec<Option<f64>> = ratios.iter().map(|m| m.values[i][j]).collect();
            if cells.iter().any(|c| c.is_none()) {
                continue;
            }
            let _ = write!(out, "{source},{target}");
            for c in &cells {
                let _ = write!(out, ",{:.3}", c.unwrap());
            }
            let decay = cells.last().unwrap().unwrap() - cells.first().unwrap().unwrap();
            let _ = writeln!(out, ",{decay:.3}");
        }
    }
    out
}

/// Similarity matrix sliced to the grid's sources x targets rectangle,
/// matching the ratio matrices' orientation.
fn similarity_rectangle(
    similarity: &SimilarityMatrix,
    sources: &[String],
    targets: &[String],
) -> Vec<Vec<Option<f64>>> {
    sources
        .iter()
        .map(|s| targets.iter().map(|t| similarity.get(s, t)).collect())
        .collect()
}

/// Linear blend between a cool blue, white, and a warm red, anchored so that
/// `anchor` renders white.
fn diverging_color(value: f64, anchor: f64, span: f64) -> (u8, u8, u8) {
    let t = ((value - anchor) / span).clamp(-1.0, 1.0);
    let blend = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    let (cool, warm) = ((59.0, 76.0, 192.0), (180.0, 4.0, 38.0));
    if t < 0.0 {
        let t = -t;
        (blend(255.0, cool.0, t), blend(255.0, cool.1, t), blend(255.0, cool.2, t))
    } else {
        (blend(255.0, warm.0, t), blend(255.0, warm.1, t), blend(255.0, warm.2, t))
    }
}

/// Render a matrix as an SVG heatmap with square cells, a diverging color
/// map anchored at `anchor`, and 2-decimal value labels.
pub fn svg_heatmap(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<Option<f64>>],
    anchor: f64,
) -> String {
    const CELL: usize = 64;
    let label_w = 8 * row_labels.iter().map(|l| l.len()).max().unwrap_or(4).max(4) + 16;
    let label_h = 8 * col_labels.iter().map(|l| l.len()).max().unwrap_or(4).max(4) + 16;
    let width = label_w + CELL * col_labels.len() + 8;
    let height = label_h + CELL * row_labels.len() + 40;

    let span = values
        .iter()
        .flatten()
        .flatten()
        .map(|v| (v - anchor).abs())
        .fold(0.0f64, f64::max)
        .max(1e-9);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="14" font-weight="bold">{title}</text>"#,
        label_w
    );
    // Column labels, rotated.
    for (j, label) in col_labels.iter().enumerate() {
        let x = label_w + j * CELL + CELL / 2;
        let y = label_h - 6;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" text-anchor="start" transform="rotate(-45 {x} {y})">{label}</text>"#
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let y = label_h + i * CELL + CELL / 2 + 4;
        let _ = writeln!(svg, r#"<text x="8" y="{y}">{label}</text>"#);
    }
    for (i, row) in values.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let x = label_w + j * CELL;
            let y = label_h + i * CELL;
            match cell {
                Some(v) => {
                    let (r, g, b) = diverging_color(*v, anchor, span);
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({r},{g},{b})" stroke="black" stroke-width="0.5"/>"#
                    );
                    let tx = x + CELL / 2;
                    let ty = y + CELL / 2 + 4;
                    let _ = writeln!(
                        svg,
                        r#"<text x="{tx}" y="{ty}" text-anchor="middle">{v:.2}</text>"#
                    );
                }
                None => {
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb(230,230,230)" stroke="black" stroke-width="0.5"/>"#
                    );
                }
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write the full report directory layout:
/// `curves/<target>__from__<source>__seed<k>.csv`, `matrix_sim.csv`,
/// `matrix_ratio_ep<N>.csv`, `correlations.csv`, `forgetting.csv`, and one
/// SVG heatmap per matrix. Returns the written paths.
pub fn write_report(report: &TransferReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    let mut emit = |path: PathBuf, contents: String| -> Result<(), ReportError> {
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };

    for record in &report.curves {
        let name = format!(
            "curves/{}__from__{}__seed{}.csv",
            record.target, record.source, record.seed_index
        );
        emit(dir.join(name), curve_to_csv(&record.curve))?;
    }

    let sim_rect = similarity_rectangle(&report.similarity, &report.sources, &report.targets);
    emit(
        dir.join("matrix_sim.csv"),
        matrix_to_csv(&report.sources, &report.targets, &sim_rect),
    )?;
    emit(
        dir.join("heatmap_sim.svg"),
        svg_heatmap(
            "description similarity",
            &report.sources,
            &report.targets,
            &sim_rect,
            0.0,
        ),
    )?;

    for matrix in &report.ratios {
        emit(
            dir.join(format!("matrix_ratio_ep{}.csv", matrix.checkpoint)),
            matrix_to_csv(&matrix.sources, &matrix.targets, &matrix.values),
        )?;
        emit(
            dir.join(format!("heatmap_ratio_ep{}.svg", matrix.checkpoint)),
            svg_heatmap(
                &format!("transfer ratio, first {} episodes", matrix.checkpoint),
                &matrix.sources,
                &matrix.targets,
                &matrix.values,
                1.0,
            ),
        )?;
    }

    emit(dir.join("correlations.csv"), correlations_to_csv(&report.correlations))?;
    emit(dir.join("forgetting.csv"), forgetting_to_csv(&report.ratios))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_curve() -> LearningCurve {
        LearningCurve {
            activity: "w".into(),
            seed: 3,
            totals: vec![-64.0, 133.33333333333334, 200.0, 0.1],
            steps: vec![64, 12, 3, 64],
            successes: vec![false, true, true, false],
        }
    }

    #[test]
    fn curve_csv_round_trips_exactly() {
        let curve = sample_curve();
        let csv = curve_to_csv(&curve);
        assert!(csv.starts_with("episode,total_reward,steps,success\n"));
        let (totals, steps, successes) = curve_from_csv(&csv).unwrap();
        assert_eq!(totals, curve.totals);
        assert_eq!(steps, curve.steps);
        assert_eq!(successes, curve.successes);
    }

    #[test]
    fn curve_parser_rejects_gaps() {
        let text = "episode,total_reward,steps,success\n0,1,1,true\n2,1,1,true\n";
        assert!(matches!(
            curve_from_csv(text),
            Err(ReportError::CurveParse { line: 3, .. })
        ));
    }

    #[test]
    fn curve_parser_rejects_bad_header() {
        assert!(matches!(
            curve_from_csv("nope\n"),
            Err(ReportError::CurveParse { line: 1, .. })
        ));
    }

    #[test]
    fn matrix_csv_round_trips() {
        let sources = vec!["a".to_string(), "b".to_string()];
        let targets = vec!["c".to_string(), "d".to_string(), "e".to_string()];
        let values = vec![
            vec![Some(1.234564), None, Some(0.5)],
            vec![Some(-0.125), Some(2.0), None],
        ];
        let csv = matrix_to_csv(&sources, &targets, &values);
        assert!(csv.starts_with("source\\target,c,d,e\n"));
        let (s2, t2, v2) = matrix_from_csv(&csv).unwrap();
        assert_eq!(s2, sources);
        assert_eq!(t2, targets);
        // Values round to 3 fractional digits on the way out.
        assert_eq!(v2[0][0], Some(1.235));
        assert_eq!(v2[0][1], None);
        assert_eq!(v2[1][0], Some(-0.125));
    }

    #[test]
    fn heatmap_contains_cells_and_labels() {
        let svg = svg_heatmap(
            "transfer ratio",
            &["src_a".to_string()],
            &["tgt_b".to_string(), "tgt_c".to_string()],
            &[vec![Some(1.25), None]],
            1.0,
        );
        assert!(svg.contains("<svg"));
        assert!(svg.contains("src_a"));
        assert!(svg.contains("tgt_c"));
        assert!(svg.contains("1.25"));
        // High value is warm (red-dominant), missing cell is gray.
        assert!(svg.contains("rgb(230,230,230)"));
        let red_cell = svg
            .lines()
            .find(|l| l.contains("<rect") && !l.contains("230,230,230") && !l.contains("white"))
            .unwrap();
        assert!(
            red_cell.contains("rgb(180,4,38)"),
            "the max deviation above the anchor is full warm: {red_cell}"
        );
    }

    #[test]
    fn warm_and_cool_colors_sit_on_the_right_side() {
        let (r, _, b) = diverging_color(2.0, 1.0, 1.0);
        assert!(r > b, "above anchor is warm");
        let (r, _, b) = diverging_color(0.0, 1.0, 1.0);
        assert!(b > r, "below anchor is cool");
        let (r, g, b) = diverging_color(1.0, 1.0, 1.0);
        assert_eq!((r, g, b), (255, 255, 255), "anchor is white");
    }
}
