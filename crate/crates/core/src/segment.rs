//! Binarization, connected components and stroke grouping.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::echo::Matrix;
use crate::{Error, Mic, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentSpec {
    pub percentile: f64,
    /// Components must have strictly more pixels than this.
    pub min_size: usize,
    /// Largest column gap inside one stroke group.
    pub gap: usize,
    pub delta_bottom: usize,
    pub delta_top: usize,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self { percentile: 94.0, min_size: 20, gap: 80, delta_bottom: 8, delta_top: 16 }
    }
}

impl SegmentSpec {
    pub fn delta(&self, mic: Mic) -> usize {
        match mic {
            Mic::Bottom => self.delta_bottom,
            Mic::Top => self.delta_top,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.percentile) {
            return Err(Error::Config(format!("percentile {} outside [0, 100]", self.percentile)));
        }
        if self.delta_bottom == 0 || self.delta_top == 0 {
            return Err(Error::Config("column offsets must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<bool>,
    pub threshold: f64,
}

impl BinaryMatrix {
    pub fn from_rows(rows: &[&str]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let cells = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'1' || b == b'#')).collect();
        Self { rows: rows.len(), cols, cells, threshold: 0.5 }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.cols + c]
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

pub fn binarize(diff: &Matrix, pct: f64) -> Result<BinaryMatrix> {
    if diff.is_empty() {
        return Err(Error::Input("cannot binarize an empty matrix".into()));
    }
    let threshold = percentile(&diff.data, pct);
    Ok(BinaryMatrix {
        rows: diff.rows,
        cols: diff.cols,
        cells: diff.data.iter().map(|&v| v > threshold).collect(),
        threshold,
    })
}

/// Inclusive bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl BBox {
    pub fn height(&self) -> usize {
        self.row_max - self.row_min + 1
    }

    pub fn width(&self) -> usize {
        self.col_max - self.col_min + 1
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }
}

fn overlap(a0: usize, a1: usize, b0: usize, b1: usize) -> usize {
    (a1.min(b1) + 1).saturating_sub(a0.max(b0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectedComponent {
    #[serde(skip)]
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
    pub size: usize,
}

impl ConnectedComponent {
    pub fn from_pixels(mut pixels: Vec<(usize, usize)>) -> Self {
        pixels.sort_unstable();
        let bbox = pixels.iter().fold(
            BBox { row_min: usize::MAX, col_min: usize::MAX, row_max: 0, col_max: 0 },
            |b, &(r, c)| BBox {
                row_min: b.row_min.min(r),
                col_min: b.col_min.min(c),
                row_max: b.row_max.max(r),
                col_max: b.col_max.max(c),
            },
        );
        Self { size: pixels.len(), pixels, bbox }
    }

    /// Moves the component `by` columns later.
    pub fn shift_cols(&mut self, by: usize) {
        self.pixels.iter_mut().for_each(|p| p.1 += by);
        self.bbox.col_min += by;
        self.bbox.col_max += by;
    }

    pub fn col_overlaps(&self, other: &ConnectedComponent) -> bool {
        overlap(self.bbox.col_min, self.bbox.col_max, other.bbox.col_min, other.bbox.col_max) > 0
    }

    /// Binary patch clipped to the bounding box, row-major.
    pub fn patch(&self) -> Matrix {
        let b = self.bbox;
        let mut m = Matrix::zeros(b.height(), b.width());
        for &(r, c) in &self.pixels {
            m.set(r - b.row_min, c - b.col_min, 1.0);
        }
        m
    }
}

/// 8-connected components larger than `min_size`, ordered by first pixel in
/// column-major scan order.
pub fn label_components(binary: &BinaryMatrix, min_size: usize) -> Vec<ConnectedComponent> {
    let (rows, cols) = (binary.rows, binary.cols);
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for c in 0..cols {
        for r in 0..rows {
            let idx = r * cols + c;
            if !binary.cells[idx] || seen[idx] {
                continue;
            }
            seen[idx] = true;
            queue.push_back((r, c));
            let mut pixels = Vec::new();
            while let Some((pr, pc)) = queue.pop_front() {
                pixels.push((pr, pc));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (pr as i64 + dr, pc as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                            continue;
                        }
                        let nidx = nr as usize * cols + nc as usize;
                        if binary.cells[nidx] && !seen[nidx] {
                            seen[nidx] = true;
                            queue.push_back((nr as usize, nc as usize));
                        }
                    }
                }
            }
            if pixels.len() > min_size {
                out.push(ConnectedComponent::from_pixels(pixels));
            }
        }
    }
    out
}

/// Binary matrix holding only the pixels of `ccs`.
pub fn clear_small(binary: &BinaryMatrix, ccs: &[ConnectedComponent]) -> BinaryMatrix {
    let mut cells = vec![false; binary.cells.len()];
    for &(r, c) in ccs.iter().flat_map(|cc| &cc.pixels) {
        cells[r * binary.cols + c] = true;
    }
    BinaryMatrix { cells, ..binary.clone() }
}

fn dominated(small: &BBox, large: &BBox) -> bool {
    let ox = overlap(small.col_min, small.col_max, large.col_min, large.col_max) as f64;
    let oy = overlap(small.row_min, small.row_max, large.row_min, large.row_max) as f64;
    ox / small.width().min(large.width()) as f64 > 0.5 && oy / small.height().min(large.height()) as f64 > 0.5
}

fn drop_overlapping(ccs: Vec<ConnectedComponent>) -> Vec<ConnectedComponent> {
    let mut order: Vec<usize> = (0..ccs.len()).collect();
    order.sort_by(|&a, &b| ccs[b].size.cmp(&ccs[a].size).then(a.cmp(&b)));
    let mut keep = vec![false; ccs.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&k| dominated(&ccs[i].bbox, &ccs[k].bbox)) {
            keep[i] = true;
            kept.push(i);
        }
    }
    ccs.into_iter().zip(keep).filter_map(|(cc, k)| k.then_some(cc)).collect()
}

/// Drops components without a column-overlapping partner on the other
/// microphone, then the smaller of any two heavily overlapping components on
/// the same microphone. Both inputs must share a column time base.
pub fn cross_mic_filter(
    bottom: &[ConnectedComponent],
    top: &[ConnectedComponent],
) -> (Vec<ConnectedComponent>, Vec<ConnectedComponent>) {
    let seen_by = |cc: &ConnectedComponent, other: &[ConnectedComponent]| other.iter().any(|o| cc.col_overlaps(o));
    let b: Vec<_> = bottom.iter().filter(|cc| seen_by(cc, top)).cloned().collect();
    let t: Vec<_> = top.iter().filter(|cc| seen_by(cc, bottom)).cloned().collect();
    (drop_overlapping(b), drop_overlapping(t))
}

/// Same-microphone overlap removal only, for single-microphone analysis.
pub fn dedupe(ccs: &[ConnectedComponent]) -> Vec<ConnectedComponent> {
    drop_overlapping(ccs.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrokeGroup {
    pub mic: Mic,
    pub components: Vec<ConnectedComponent>,
    pub col_span: (usize, usize),
}

/// Single-linkage grouping on columns: a component joins the current group
/// unless its first column lies more than `gap` columns after the group's
/// last column.
pub fn group_strokes(ccs: &[ConnectedComponent], gap: usize, mic: Mic) -> Vec<StrokeGroup> {
    let mut sorted = ccs.to_vec();
    sorted.sort_by_key(|cc| (cc.bbox.col_min, cc.bbox.col_max, cc.bbox.row_min, cc.bbox.row_max, cc.size));
    let mut groups: Vec<StrokeGroup> = Vec::new();
    for cc in sorted {
        match groups.last_mut() {
            Some(g) if cc.bbox.col_min <= g.col_span.1 + gap => {
                g.col_span.1 = g.col_span.1.max(cc.bbox.col_max);
                g.components.push(cc);
            }
            _ => groups.push(StrokeGroup { mic, col_span: (cc.bbox.col_min, cc.bbox.col_max), components: vec![cc] }),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(r0: usize, c0: usize, h: usize, w: usize) -> ConnectedComponent {
        let mut px = Vec::new();
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                px.push((r, c));
            }
        }
        ConnectedComponent::from_pixels(px)
    }

    fn span(c0: usize, c1: usize) -> ConnectedComponent {
        ConnectedComponent::from_pixels((c0..=c1).map(|c| (0, c)).collect())
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (1..=5).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 90.0), 4.6);
        assert_eq!(percentile(&v, 0.0), 1.0);
    }

    #[test]
    fn hundred_distinct_values_give_six_ones() {
        let m = Matrix::from_fn(10, 10, |r, c| ((r * 10 + c) * 37 % 100) as f64 + 0.5);
        let b = binarize(&m, 94.0).unwrap();
        assert_eq!(b.count_ones(), 6);
    }

    #[test]
    fn constant_matrix_has_no_ones() {
        let m = Matrix::from_fn(4, 4, |_, _| 2.5);
        assert_eq!(binarize(&m, 94.0).unwrap().count_ones(), 0);
    }

    #[test]
    fn zeroth_percentile_keeps_all_but_minimum() {
        let m = Matrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64 + 1.0);
        let b = binarize(&m, 0.0).unwrap();
        assert_eq!(b.count_ones(), 11);
        assert!(!b.get(0, 0));
    }

    #[test]
    fn diagonal_blob_of_25() {
        let rows: Vec<String> = (0..25)
            .map(|r| (0..25).map(|c| if c == r { '1' } else { '0' }).collect())
            .collect();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let ccs = label_components(&BinaryMatrix::from_rows(&refs), 20);
        assert_eq!(ccs.len(), 1);
        assert_eq!(ccs[0].size, 25);
        assert_eq!(ccs[0].bbox, BBox { row_min: 0, col_min: 0, row_max: 24, col_max: 24 });
    }

    #[test]
    fn size_boundary() {
        let twenty = BinaryMatrix::from_rows(&["1111111111", "1111111111"]);
        assert!(label_components(&twenty, 20).is_empty());
        let twenty_one = BinaryMatrix::from_rows(&["11111111111", "11111111110"]);
        assert_eq!(label_components(&twenty_one, 20).len(), 1);
    }

    #[test]
    fn diagonal_touch_joins() {
        let b = BinaryMatrix::from_rows(&["110", "110", "001"]);
        let ccs = label_components(&b, 0);
        assert_eq!(ccs.len(), 1);
        assert_eq!(ccs[0].size, 5);
    }

    #[test]
    fn clear_small_removes_rejected_pixels() {
        let b = BinaryMatrix::from_rows(&["11000", "00001"]);
        let ccs = label_components(&b, 1);
        assert_eq!(clear_small(&b, &ccs).count_ones(), 2);
    }

    #[test]
    fn unmatched_component_removed() {
        let bottom = vec![block(10, 100, 5, 51)];
        let top = vec![block(10, 300, 5, 10)];
        let (b, t) = cross_mic_filter(&bottom, &top);
        assert!(b.is_empty());
        assert!(t.is_empty());
    }

    #[test]
    fn duplicates_dropped_disjoint_kept() {
        let a = block(10, 10, 5, 10);
        let other = vec![block(0, 0, 40, 200)];
        let (b, _) = cross_mic_filter(&[a.clone(), a.clone()], &other);
        assert_eq!(b.len(), 1);
        let (b, _) = cross_mic_filter(&[a.clone(), block(30, 10, 5, 10)], &other);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn grouping_gap() {
        assert_eq!(group_strokes(&[span(0, 40), span(200, 240)], 80, Mic::Bottom).len(), 2);
        assert_eq!(group_strokes(&[span(0, 40), span(100, 140)], 80, Mic::Bottom).len(), 1);
        assert_eq!(group_strokes(&[span(0, 40), span(120, 140)], 80, Mic::Bottom).len(), 1);
        assert_eq!(group_strokes(&[span(0, 40), span(121, 140)], 80, Mic::Bottom).len(), 2);
    }

    #[test]
    fn bbox_dims() {
        let cc = block(10, 3, 21, 4);
        assert_eq!(cc.bbox.height(), 21);
        assert_eq!(cc.bbox.area(), 84);
        assert_eq!(cc.patch().data.iter().sum::<f64>(), 84.0);
    }
}
