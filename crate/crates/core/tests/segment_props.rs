//! Properties of segmentation, stroke features and pattern geometry.

use echotrace::echo::Matrix;
use echotrace::features::{self, GaborBank, GaborBankSpec};
use echotrace::patterns::{between, decompose, enumerate_from, UnlockPattern};
use echotrace::segment::{self, ConnectedComponent};
use echotrace::Mic;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |data| Matrix::from_fn(rows, cols, |r, c| data[r * cols + c]))
}

fn spans() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..1000, 1usize..60), 1..12)
}

fn cc(c0: usize, w: usize, row: usize) -> ConnectedComponent {
    ConnectedComponent::from_pixels((c0..c0 + w).map(|c| (row, c)).collect())
}

fn group_spans(ccs: &[ConnectedComponent]) -> Vec<(usize, usize)> {
    segment::group_strokes(ccs, 80, Mic::Bottom).iter().map(|g| g.col_span).collect()
}

/// Random valid pattern built by a walk that respects the skip rule.
fn pattern() -> impl Strategy<Value = UnlockPattern> {
    (0u8..9, prop::collection::vec(any::<prop::sample::Index>(), 8), 4usize..=9).prop_map(|(start, picks, len)| {
        let mut pts = vec![start];
        for pick in picks {
            if pts.len() == len {
                break;
            }
            let last = *pts.last().unwrap();
            let next: Vec<u8> = (0..9)
                .filter(|p| !pts.contains(p))
                .filter(|&p| between(last, p).is_none_or(|m| pts.contains(&m)))
                .collect();
            if next.is_empty() {
                break;
            }
            pts.push(next[pick.index(next.len())]);
        }
        pts
    })
    .prop_filter_map("walk too short", |pts| UnlockPattern::new(pts).ok())
}

/// The eight symmetries of the 3x3 grid.
fn symmetry(k: usize, p: u8) -> u8 {
    let (mut r, mut c) = ((p / 3) as i32 - 1, (p % 3) as i32 - 1);
    for _ in 0..k % 4 {
        (r, c) = (c, -r);
    }
    if k >= 4 {
        c = -c;
    }
    ((r + 1) * 3 + c + 1) as u8
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_percentile_never_adds_ones(m in matrix(8, 12), p in 0.0..100.0f64, dp in 0.0..50.0f64) {
        let lo = segment::binarize(&m, p).unwrap();
        let hi = segment::binarize(&m, (p + dp).min(100.0)).unwrap();
        for r in 0..m.rows {
            for c in 0..m.cols {
                prop_assert!(!hi.get(r, c) || lo.get(r, c));
            }
        }
    }

    #[test]
    fn component_count_ignores_scale(m in matrix(20, 30), k in 0.001..1000.0f64, p in 50.0..99.0f64) {
        let scaled = Matrix::from_fn(m.rows, m.cols, |r, c| m.get(r, c) * k);
        let a = segment::label_components(&segment::binarize(&m, p).unwrap(), 3);
        let b = segment::label_components(&segment::binarize(&scaled, p).unwrap(), 3);
        prop_assert_eq!(a.len(), b.len());
    }

    #[test]
    fn pixels_belong_to_one_component(m in matrix(20, 30), p in 50.0..99.0f64) {
        let bin = segment::binarize(&m, p).unwrap();
        let ccs = segment::label_components(&bin, 0);
        let total: usize = ccs.iter().map(|c| c.size).sum();
        prop_assert_eq!(total, bin.count_ones());
        let mut all: Vec<(usize, usize)> = ccs.iter().flat_map(|c| c.pixels.clone()).collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), total);
        let groups = segment::group_strokes(&ccs, 80, Mic::Top);
        prop_assert_eq!(groups.iter().map(|g| g.components.len()).sum::<usize>(), ccs.len());
    }

    #[test]
    fn grouping_is_order_independent_and_idempotent(s in spans(), seed in any::<u64>()) {
        let ccs: Vec<ConnectedComponent> = s.iter().enumerate().map(|(i, &(c0, w))| cc(c0, w, i)).collect();
        let mut sorted = ccs.clone();
        sorted.sort_by_key(|c| c.bbox.col_min);
        let mut shuffled = ccs.clone();
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let base = group_spans(&sorted);
        prop_assert_eq!(group_spans(&shuffled), base.clone());
        let flattened: Vec<ConnectedComponent> =
            segment::group_strokes(&sorted, 80, Mic::Bottom).into_iter().flat_map(|g| g.components).collect();
        prop_assert_eq!(group_spans(&flattened), base.clone());
        for pair in base.windows(2) {
            prop_assert!(pair[1].0 > pair[0].1 + 80);
        }
    }

    #[test]
    fn vertical_reflection_mirrors_angle(slope in -3.0..3.0f64, thick in 1usize..4, len in 15usize..40) {
        let rows = ((slope.abs() * len as f64).ceil() as usize + thick + 1).max(3);
        let mut m = Matrix::zeros(rows, len);
        let base = if slope < 0.0 { slope.abs() * len as f64 } else { 0.0 };
        for c in 0..len {
            let r0 = (base + slope * c as f64).round() as usize;
            for t in 0..thick {
                if r0 + t < rows {
                    m.set(r0 + t, c, 1.0);
                }
            }
        }
        let flipped = Matrix::from_fn(rows, len, |r, c| m.get(rows - 1 - r, c));
        let bank = GaborBank::new(GaborBankSpec::default()).unwrap();
        let a = bank.orientation(&m).unwrap();
        let b = bank.orientation(&flipped).unwrap();
        prop_assert!((a + b - 180.0).abs() < 1e-6, "{} vs {}", a, b);
        let flip = |d: Option<echotrace::patterns::Direction>| d.map(|d| match d {
            echotrace::patterns::Direction::Away => echotrace::patterns::Direction::Towards,
            echotrace::patterns::Direction::Towards => echotrace::patterns::Direction::Away,
        });
        prop_assert_eq!(features::direction(b, 2.0), flip(features::direction(a, 2.0)));
    }

    #[test]
    fn weighted_angle_ignores_uniform_weight_scale(
        items in prop::collection::vec((1.0..179.0f64, 1.0..500.0f64), 1..10),
        k in 0.01..100.0f64,
    ) {
        let scaled: Vec<(f64, f64)> = items.iter().map(|&(a, w)| (a, w * k)).collect();
        let (x, y) = (features::weighted_angle(&items).unwrap(), features::weighted_angle(&scaled).unwrap());
        prop_assert!((x - y).abs() < 1e-9);
    }

    #[test]
    fn strokes_reconstruct_inflections(p in pattern()) {
        let strokes = decompose(&p);
        prop_assert!(!strokes.is_empty());
        prop_assert_eq!(strokes[0].start, p.points[0]);
        prop_assert_eq!(strokes.last().unwrap().end, *p.points.last().unwrap());
        for pair in strokes.windows(2) {
            prop_assert_eq!(pair[0].end, pair[1].start);
            prop_assert_ne!(pair[0].direction(), pair[1].direction());
        }
        let mut at = 0;
        for s in &strokes {
            let i = p.points[at..].iter().position(|&q| q == s.end).map(|i| i + at);
            prop_assert!(i.is_some());
            at = i.unwrap();
        }
    }

    #[test]
    fn grid_symmetries_preserve_validity(p in pattern(), k in 0usize..8) {
        let mapped: Vec<u8> = p.points.iter().map(|&q| symmetry(k, q)).collect();
        prop_assert!(UnlockPattern::new(mapped.clone()).is_ok(), "{:?}", mapped);
        prop_assert_eq!(decompose(&UnlockPattern::new(mapped).unwrap()).len(), decompose(&p).len());
    }
}

#[test]
fn enumeration_invariant_under_grid_symmetries() {
    for start in 0..9u8 {
        let base = enumerate_from(start);
        for k in 0..8 {
            assert_eq!(enumerate_from(symmetry(k, start)), base);
        }
    }
}
