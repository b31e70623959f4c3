//! Independent reference implementations and random instance generators
//! shared by the integration suites. Nothing here calls the metric or
//! association code under test.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use reviewscope::{BoundingBox, Detection, GroundTruthBox, ObjectClass};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

pub const THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let left = if a.x_min() > b.x_min() {
        a.x_min()
    } else {
        b.x_min()
    };
    let right = if a.x_max() < b.x_max() {
        a.x_max()
    } else {
        b.x_max()
    };
    let top = if a.y_min() > b.y_min() {
        a.y_min()
    } else {
        b.y_min()
    };
    let bottom = if a.y_max() < b.y_max() {
        a.y_max()
    } else {
        b.y_max()
    };
    if right <= left || bottom <= top {
        return 0.0;
    }
    let inter = (right - left) * (bottom - top);
    let area_a = (a.x_max() - a.x_min()) * (a.y_max() - a.y_min());
    let area_b = (b.x_max() - b.x_min()) * (b.y_max() - b.y_min());
    inter / (area_a + area_b - inter)
}

/// Selection order by confidence, earliest index first among equals.
fn oracle_rank(confs: &[f64]) -> Vec<usize> {
    let mut taken = vec![false; confs.len()];
    let mut out = Vec::new();
    for _ in 0..confs.len() {
        let mut best: Option<usize> = None;
        for i in 0..confs.len() {
            if taken[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if confs[i] > confs[b] => best = Some(i),
                _ => {}
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

/// TP flag per ranked prediction, walking the ranking one by one.
fn oracle_tp_in_rank(
    preds: &[&Detection],
    rank: &[usize],
    gts: &[&GroundTruthBox],
    tau: f64,
) -> Vec<bool> {
    let mut claimed = vec![false; gts.len()];
    let mut flags = Vec::new();
    for &i in rank {
        let p = preds[i];
        let mut best_iou = -1.0;
        let mut best_g = None;
        for (g, gt) in gts.iter().enumerate() {
            if claimed[g] || gt.class != p.class() || gt.image_id != p.image_id() {
                continue;
            }
            let v = oracle_iou(&gt.bbox, p.bbox());
            if v > best_iou {
                best_iou = v;
                best_g = Some(g);
            }
        }
        let hit = best_g.is_some() && (best_iou >= tau);
        if hit {
            claimed[best_g.unwrap()] = true;
        }
        flags.push(hit);
    }
    flags
}

/// AP from first principles: every prefix of the ranking is re-matched
/// from scratch, then each of the 101 recall levels scans every prefix.
pub fn oracle_ap(
    preds: &[Detection],
    gts: &[GroundTruthBox],
    class: ObjectClass,
    tau: f64,
) -> Option<f64> {
    let preds: Vec<&Detection> = preds.iter().filter(|d| d.class() == class).collect();
    let gts: Vec<&GroundTruthBox> = gts.iter().filter(|g| g.class == class).collect();
    if gts.is_empty() {
        return None;
    }
    let confs: Vec<f64> = preds.iter().map(|p| p.confidence()).collect();
    let rank = oracle_rank(&confs);
    let mut points = Vec::new();
    for k in 1..=rank.len() {
        let flags = oracle_tp_in_rank(&preds, &rank[..k], &gts, tau);
        let tp = flags.iter().filter(|&&f| f).count() as f64;
        points.push((tp / k as f64, tp / gts.len() as f64));
    }
    let mut sum = 0.0;
    for j in 0..=100 {
        let level = j as f64 / 100.0;
        let mut best = 0.0;
        for &(precision, recall) in &points {
            if recall >= level && precision > best {
                best = precision;
            }
        }
        sum += best;
    }
    Some(sum / 101.0)
}

pub fn oracle_class_means(preds: &[Detection], gts: &[GroundTruthBox]) -> Vec<(ObjectClass, f64)> {
    let mut out = Vec::new();
    for class in ObjectClass::ALL {
        if !gts.iter().any(|g| g.class == class) {
            continue;
        }
        let mut total = 0.0;
        for t in THRESHOLDS {
            total += oracle_ap(preds, gts, class, t).unwrap();
        }
        out.push((class, total / THRESHOLDS.len() as f64));
    }
    out
}

pub fn oracle_map(preds: &[Detection], gts: &[GroundTruthBox]) -> f64 {
    let means = oracle_class_means(preds, gts);
    if means.is_empty() {
        return 0.0;
    }
    means.iter().map(|(_, m)| m).sum::<f64>() / means.len() as f64
}

/// (precision, tp, fp, fn) for review-text boxes.
pub fn oracle_precision(
    preds: &[Detection],
    gts: &[GroundTruthBox],
    conf_tau: f64,
    iou_tau: f64,
) -> (f64, usize, usize, usize) {
    let preds: Vec<&Detection> = preds
        .iter()
        .filter(|d| d.class() == ObjectClass::ReviewText && d.confidence() >= conf_tau)
        .collect();
    let gts: Vec<&GroundTruthBox> = gts
        .iter()
        .filter(|g| g.class == ObjectClass::ReviewText)
        .collect();
    let confs: Vec<f64> = preds.iter().map(|p| p.confidence()).collect();
    let rank = oracle_rank(&confs);
    let flags = oracle_tp_in_rank(&preds, &rank, &gts, iou_tau);
    let tp = flags.iter().filter(|&&f| f).count();
    let fp = flags.len() - tp;
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    (precision, tp, fp, gts.len() - tp)
}

/// Small random evaluation instance: up to 3 images, up to 10 ground-truth
/// boxes and up to 10 predictions, with frequent confidence ties and
/// near-duplicate boxes.
pub fn random_eval_instance<R: Rng>(rng: &mut R) -> (Vec<Detection>, Vec<GroundTruthBox>) {
    let images = rng.gen_range(1..=3);
    let pool_size = rng.gen_range(1..=3);
    let class_pool: Vec<ObjectClass> = ObjectClass::ALL
        .choose_multiple(rng, pool_size)
        .copied()
        .collect();
    let mut gts = Vec::new();
    for _ in 0..rng.gen_range(0..=10) {
        let x = rng.gen_range(0.0..80.0);
        let y = rng.gen_range(0.0..80.0);
        gts.push(GroundTruthBox {
            image_id: format!("img{}", rng.gen_range(0..images)),
            class: *class_pool.choose(rng).unwrap(),
            bbox: bb(
                x,
                y,
                x + rng.gen_range(2.0..30.0),
                y + rng.gen_range(2.0..30.0),
            ),
        });
    }
    let mut preds = Vec::new();
    for _ in 0..rng.gen_range(0..=10) {
        let conf = if rng.gen_bool(0.5) {
            rng.gen_range(0..=10) as f64 / 10.0
        } else {
            rng.gen_range(0.0..=1.0)
        };
        let det = if !gts.is_empty() && rng.gen_bool(0.7) {
            let g = gts.choose(rng).unwrap();
            let j = |r: &mut R| r.gen_range(-3.0..3.0);
            let x0 = (g.bbox.x_min() + j(rng)).max(0.0);
            let y0 = (g.bbox.y_min() + j(rng)).max(0.0);
            let x1 = (g.bbox.x_max() + j(rng)).max(x0 + 0.5);
            let y1 = (g.bbox.y_max() + j(rng)).max(y0 + 0.5);
            let class = if rng.gen_bool(0.85) {
                g.class
            } else {
                *class_pool.choose(rng).unwrap()
            };
            let image = if rng.gen_bool(0.9) {
                g.image_id.clone()
            } else {
                format!("img{}", rng.gen_range(0..images))
            };
            Detection::new(image, class, conf, bb(x0, y0, x1, y1)).unwrap()
        } else {
            let x = rng.gen_range(0.0..80.0);
            let y = rng.gen_range(0.0..80.0);
            Detection::new(
                format!("img{}", rng.gen_range(0..images)),
                *class_pool.choose(rng).unwrap(),
                conf,
                bb(
                    x,
                    y,
                    x + rng.gen_range(2.0..30.0),
                    y + rng.gen_range(2.0..30.0),
                ),
            )
            .unwrap()
        };
        preds.push(det);
    }
    (preds, gts)
}

/// Rating and text boxes stacked in up to three non-overlapping columns,
/// every item strictly below the previous one in its column. Integer
/// coordinates keep gap sums exact.
pub fn stacked_layout<R: Rng>(rng: &mut R) -> Vec<Detection> {
    let columns = rng.gen_range(1..=3);
    let mut next_y = vec![rng.gen_range(0..20) as f64; columns];
    let (mut ratings, mut texts) = (0, 0);
    let n_ratings = rng.gen_range(0..=6);
    let n_texts = rng.gen_range(0..=6);
    let mut out = Vec::new();
    while ratings < n_ratings || texts < n_texts {
        let col = rng.gen_range(0..columns);
        let x = col as f64 * 300.0;
        let y = next_y[col];
        let want_rating = texts >= n_texts || (ratings < n_ratings && rng.gen_bool(0.5));
        let det = if want_rating {
            ratings += 1;
            let h = rng.gen_range(8..30) as f64;
            let dx = rng.gen_range(0..100) as f64;
            next_y[col] = y + h + rng.gen_range(0..25) as f64;
            Detection::new(
                "page",
                ObjectClass::ALL[rng.gen_range(0..5)],
                0.9,
                bb(
                    x + dx,
                    y,
                    x + dx + 60.0 + rng.gen_range(0..40) as f64,
                    y + h,
                ),
            )
            .unwrap()
        } else {
            texts += 1;
            let h = rng.gen_range(20..120) as f64;
            next_y[col] = y + h + rng.gen_range(0..25) as f64;
            Detection::new(
                "page",
                ObjectClass::ReviewText,
                0.9,
                bb(x, y, x + 250.0, y + h),
            )
            .unwrap()
        };
        out.push(det);
    }
    out.shuffle(rng);
    out
}

/// Ratings scattered near and over randomly placed texts, including
/// overlapping and identical boxes.
pub fn free_layout<R: Rng>(rng: &mut R) -> Vec<Detection> {
    let mut out = Vec::new();
    let mut text_boxes = Vec::new();
    for _ in 0..rng.gen_range(0..=6) {
        let x = rng.gen_range(0..300) as f64;
        let y = rng.gen_range(0..400) as f64;
        let b = bb(
            x,
            y,
            x + rng.gen_range(50..300) as f64,
            y + rng.gen_range(20..100) as f64,
        );
        text_boxes.push(b);
        out.push(Detection::new("page", ObjectClass::ReviewText, 0.9, b).unwrap());
    }
    for _ in 0..rng.gen_range(0..=6) {
        let b = if !text_boxes.is_empty() && rng.gen_bool(0.7) {
            let t = text_boxes.choose(rng).unwrap();
            let h = rng.gen_range(8..30) as f64;
            let x = t.x_min() + rng.gen_range(-20..60) as f64;
            let y = t.y_min() - h - rng.gen_range(-10..30) as f64;
            bb(x.max(0.0), y.max(0.0), x.max(0.0) + 60.0, y.max(0.0) + h)
        } else if !out.is_empty() && rng.gen_bool(0.2) {
            *out.choose(rng).unwrap().bbox()
        } else {
            let x = rng.gen_range(0..400) as f64;
            let y = rng.gen_range(0..400) as f64;
            bb(x, y, x + 60.0, y + 20.0)
        };
        out.push(Detection::new("page", ObjectClass::ALL[rng.gen_range(0..5)], 0.9, b).unwrap());
    }
    out
}

/// Candidate predicate restated from its definition: the rating covers at
/// least half its width over the text and sits above it, entering it by at
/// most half the rating's height.
pub fn oracle_candidate(r: &BoundingBox, t: &BoundingBox) -> bool {
    let overlap = (r.x_max().min(t.x_max()) - r.x_min().max(t.x_min())).max(0.0);
    overlap / (r.x_max() - r.x_min()) >= 0.5
        && t.y_min() - r.y_max() >= -0.5 * (r.y_max() - r.y_min())
}

/// Maximum-cardinality matching of least total |gap|, by enumerating every
/// one-to-one assignment. Returns (pairs matched, total gap).
pub fn oracle_assignment(dets: &[Detection]) -> (usize, f64) {
    let ratings: Vec<&BoundingBox> = dets
        .iter()
        .filter(|d| d.class().is_rating())
        .map(|d| d.bbox())
        .collect();
    let texts: Vec<&BoundingBox> = dets
        .iter()
        .filter(|d| d.class() == ObjectClass::ReviewText)
        .map(|d| d.bbox())
        .collect();

    fn go(
        ri: usize,
        ratings: &[&BoundingBox],
        texts: &[&BoundingBox],
        used: &mut Vec<bool>,
        count: usize,
        gap: f64,
        best: &mut (usize, f64),
    ) {
        if ri == ratings.len() {
            if count > best.0 || (count == best.0 && gap < best.1) {
                *best = (count, gap);
            }
            return;
        }
        go(ri + 1, ratings, texts, used, count, gap, best);
        for ti in 0..texts.len() {
            if !used[ti] && oracle_candidate(ratings[ri], texts[ti]) {
                used[ti] = true;
                let g = (texts[ti].y_min() - ratings[ri].y_max()).abs();
                go(ri + 1, ratings, texts, used, count + 1, gap + g, best);
                used[ti] = false;
            }
        }
    }

    let mut best = (0, 0.0);
    go(
        0,
        &ratings,
        &texts,
        &mut vec![false; texts.len()],
        0,
        0.0,
        &mut best,
    );
    best
}
