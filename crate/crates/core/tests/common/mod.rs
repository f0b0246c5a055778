#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;

use glandseg::labelops::{BinaryMask, InstanceMap};
use glandseg::metrics::ScoreGrid;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[derive(Debug, Deserialize)]
pub struct PublishedRow {
    pub name: String,
    pub ranks: Vec<u32>,
    pub rank_sum: u32,
    pub weighted_rank_sum: f64,
}

#[derive(Debug, Deserialize)]
pub struct Table {
    #[serde(flatten)]
    pub grid: ScoreGrid,
    pub published: Vec<PublishedRow>,
}

pub fn comparison_table() -> Table {
    let bytes = std::fs::read(data_path("table1.json")).expect("fixture");
    serde_json::from_slice(&bytes).expect("fixture parses")
}

/// Up to `max_instances` overlapping rectangles and ellipses painted in
/// sequence, with sparse ids in 1..=9.
pub fn random_instance_map(rng: &mut ChaCha8Rng, w: usize, h: usize, max_instances: usize) -> InstanceMap {
    let mut m = InstanceMap::zeros(w, h);
    let n = rng.gen_range(0..=max_instances);
    let mut ids: Vec<u32> = (1..=9).collect();
    for _ in 0..n {
        let id = ids.remove(rng.gen_range(0..ids.len()));
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let rx = rng.gen_range(1.0..(w as f64 / 3.0).max(1.5));
        let ry = rng.gen_range(1.0..(h as f64 / 3.0).max(1.5));
        let ellipse = rng.gen_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let inside = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    m.set(x, y, id);
                }
            }
        }
    }
    m
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    loop {
        let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        if bits.iter().any(|&b| b) {
            return BinaryMask::new(w, h, bits).unwrap();
        }
    }
}

/// Pixel lists per instance id, ids ascending.
pub fn objects(m: &InstanceMap) -> BTreeMap<u32, Vec<(usize, usize)>> {
    let mut out: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            let id = m.get(x, y);
            if id != 0 {
                out.entry(id).or_default().push((x, y));
            }
        }
    }
    out
}

fn intersection(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    a.iter().filter(|p| b.contains(p)).count()
}

/// Largest-overlap partner, ties to the lowest id, none when nothing overlaps.
fn partner<'a>(
    obj: &[(usize, usize)],
    others: &'a BTreeMap<u32, Vec<(usize, usize)>>,
) -> Option<&'a Vec<(usize, usize)>> {
    let mut best: Option<(usize, &Vec<(usize, usize)>)> = None;
    for pts in others.values() {
        let i = intersection(obj, pts);
        if i > 0 && best.map_or(true, |(b, _)| i > b) {
            best = Some((i, pts));
        }
    }
    best.map(|(_, p)| p)
}

/// Pointwise Hausdorff distance between two pixel sets.
pub fn brute_hausdorff(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    let d = |p: (usize, usize), q: (usize, usize)| {
        let dx = p.0 as f64 - q.0 as f64;
        let dy = p.1 as f64 - q.1 as f64;
        (dx * dx + dy * dy).sqrt()
    };
    let directed = |s: &[(usize, usize)], t: &[(usize, usize)]| {
        s.iter()
            .map(|&p| t.iter().map(|&q| d(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Object Dice written directly from its definition.
pub fn brute_object_dice(pred: &InstanceMap, gt: &InstanceMap) -> f64 {
    let s = objects(pred);
    let g = objects(gt);
    if s.is_empty() && g.is_empty() {
        return 1.0;
    }
    if s.is_empty() || g.is_empty() {
        return 0.0;
    }
    let side = |mine: &BTreeMap<u32, Vec<(usize, usize)>>, theirs: &BTreeMap<u32, Vec<(usize, usize)>>| {
        let total: usize = mine.values().map(Vec::len).sum();
        mine.values()
            .map(|o| {
                let w = o.len() as f64 / total as f64;
                let d = partner(o, theirs).map_or(0.0, |t| {
                    2.0 * intersection(o, t) as f64 / (o.len() + t.len()) as f64
                });
                w * d
            })
            .sum::<f64>()
    };
    0.5 * (side(&s, &g) + side(&g, &s))
}

/// Object Hausdorff written directly from its definition; an object with no
/// overlap takes the nearest (by Hausdorff) object of the other side.
pub fn brute_object_hausdorff(pred: &InstanceMap, gt: &InstanceMap) -> f64 {
    let s = objects(pred);
    let g = objects(gt);
    let diag = ((pred.width().pow(2) + pred.height().pow(2)) as f64).sqrt();
    if s.is_empty() && g.is_empty() {
        return 0.0;
    }
    if s.is_empty() || g.is_empty() {
        return diag;
    }
    let side = |mine: &BTreeMap<u32, Vec<(usize, usize)>>, theirs: &BTreeMap<u32, Vec<(usize, usize)>>| {
        let total: usize = mine.values().map(Vec::len).sum();
        mine.values()
            .map(|o| {
                let w = o.len() as f64 / total as f64;
                let h = match partner(o, theirs) {
                    Some(t) => brute_hausdorff(o, t),
                    None => theirs
                        .values()
                        .map(|t| brute_hausdorff(o, t))
                        .fold(f64::INFINITY, f64::min),
                };
                w * h
            })
            .sum::<f64>()
    };
    0.5 * (side(&s, &g) + side(&g, &s))
}

/// Detection counts: a prediction is a hit when it covers more than half of
/// some ground-truth object (at most one prediction can do so per object).
pub fn brute_detection(pred: &InstanceMap, gt: &InstanceMap) -> (usize, usize, usize) {
    let s = objects(pred);
    let g = objects(gt);
    let tp = s
        .values()
        .filter(|o| g.values().any(|t| 2 * intersection(o, t) > t.len()))
        .count();
    (tp, s.len() - tp, g.len() - tp)
}

/// Breadth-first component labelling, ids in raster order of first pixel.
pub fn flood_fill(mask: &BinaryMask, eight: bool) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = vec![0u32; w * h];
    let mut next = 0;
    let mut steps = vec![(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
    if eight {
        steps.extend([(-1, -1), (-1, 1), (1, -1), (1, 1)]);
    }
    for start in 0..w * h {
        if !mask.bits()[start] || out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in &steps {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && out[j] == 0 {
                    out[j] = next;
                    q.push_back(j);
                }
            }
        }
    }
    out
}

/// True when two labellings induce the same partition of the pixels.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        (x == 0) == (y == 0)
            && *fwd.entry(x).or_insert(y) == y
            && *back.entry(y).or_insert(x) == x
    })
}
