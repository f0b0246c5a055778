mod common;

use glandseg::diffnet::seeded_rng;
use glandseg::labelops::{
    connected_components, dilate, edge_labels, extract_edges, fill_boxes, instance_contacts,
    overlap_matrix, BBox, BinaryMask, Connectivity, InstanceMap,
};
use proptest::prelude::*;

use common::*;

fn arb_mask(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h)))
        .prop_map(|(w, h, bits)| BinaryMask::new(w, h, bits).unwrap())
}

fn arb_map(max: usize) -> impl Strategy<Value = InstanceMap> {
    (1..=max, 1..=max)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(0u32..4, w * h)))
        .prop_map(|(w, h, ids)| InstanceMap::new(w, h, ids).unwrap())
}

fn arb_boxes(w: usize, h: usize) -> impl Strategy<Value = Vec<BBox>> {
    let one = (0..w, 0..h, 1..=w, 1..=h).prop_map(move |(x, y, bw, bh)| {
        let x1 = (x + bw).min(w);
        let y1 = (y + bh).min(h);
        BBox::new(x, y, x1.max(x + 1), y1.max(y + 1))
    });
    proptest::collection::vec(one, 0..12)
}

/// Direct per-pixel disk test.
fn brute_dilate(m: &BinaryMask, r: f64) -> BinaryMask {
    let pts = m.points();
    let bits = (0..m.height())
        .flat_map(|y| (0..m.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            pts.iter().any(|&(px, py)| {
                let dx = px as f64 - x as f64;
                let dy = py as f64 - y as f64;
                dx * dx + dy * dy <= r * r
            })
        })
        .collect();
    BinaryMask::new(m.width(), m.height(), bits).unwrap()
}

#[test]
fn components_match_flood_fill() {
    let mut rng = seeded_rng(21);
    for i in 0..200 {
        let m = random_mask(&mut rng, 1 + i % 29, 1 + i % 17, 0.45);
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let cc = connected_components(&m, conn);
            assert!(same_partition(cc.ids(), &flood_fill(&m, eight)));
            assert_eq!(cc.num_instances() as u32, cc.max_id());
        }
    }
}

#[test]
fn edges_disconnect_touching_instances() {
    let mut m = InstanceMap::zeros(12, 6);
    for y in 1..5 {
        for x in 1..6 {
            m.set(x, y, 1);
        }
        for x in 6..11 {
            m.set(x, y, 2);
        }
    }
    let body = m.foreground().and_not(&extract_edges(&m));
    assert_eq!(connected_components(&body, Connectivity::Four).num_instances(), 2);
    assert_eq!(connected_components(&m.foreground(), Connectivity::Four).num_instances(), 1);
    let c = instance_contacts(&m);
    assert_eq!(c.count(), 8);
    assert!(c.is_subset_of(&extract_edges(&m)));
}

#[test]
fn triple_overlap_reads_three() {
    let boxes = [BBox::new(0, 0, 6, 6), BBox::new(3, 3, 9, 9), BBox::new(4, 2, 8, 7)];
    let c = fill_boxes(&boxes, 10, 10).unwrap();
    assert_eq!(c.get(4, 4), 3);
    assert_eq!(c.get(0, 0), 1);
    assert_eq!(c.get(9, 9), 0);
    assert_eq!(c.max(), 3);
}

#[test]
fn invalid_box_is_data_error() {
    for b in [BBox::new(2, 0, 2, 3), BBox::new(0, 0, 11, 3), BBox::new(0, 4, 3, 2)] {
        assert_eq!(fill_boxes(&[b], 10, 10).unwrap_err().exit_code(), 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fill_conserves_area(boxes in arb_boxes(17, 13)) {
        let c = fill_boxes(&boxes, 17, 13).unwrap();
        let area: u64 = boxes.iter().map(|b| b.area() as u64).sum();
        prop_assert_eq!(c.total(), area);
        for y in 0..13 {
            for x in 0..17 {
                let n = boxes.iter().filter(|b| b.contains(x, y)).count() as u32;
                prop_assert_eq!(c.get(x, y), n);
            }
        }
    }

    #[test]
    fn dilation_is_monotone(m in arb_mask(14), r1 in 0.0f64..4.0, dr in 0.0f64..3.0) {
        let a = dilate(&m, r1).unwrap();
        let b = dilate(&m, r1 + dr).unwrap();
        prop_assert!(m.is_subset_of(&a));
        prop_assert!(a.is_subset_of(&b));
        prop_assert_eq!(a, brute_dilate(&m, r1));
    }

    #[test]
    fn edges_have_differing_neighbour(m in arb_map(12)) {
        let e = extract_edges(&m);
        let (w, h) = (m.width(), m.height());
        for y in 0..h {
            for x in 0..w {
                let c = m.get(x, y);
                let mut nb = Vec::new();
                if x > 0 { nb.push(m.get(x - 1, y)); }
                if x + 1 < w { nb.push(m.get(x + 1, y)); }
                if y > 0 { nb.push(m.get(x, y - 1)); }
                if y + 1 < h { nb.push(m.get(x, y + 1)); }
                prop_assert_eq!(e.get(x, y), nb.iter().any(|&n| n != c));
            }
        }
    }

    #[test]
    fn wider_edge_labels_contain_narrow(m in arb_map(12)) {
        let e1 = edge_labels(&m, 0.0).unwrap();
        let e3 = edge_labels(&m, 3.0).unwrap();
        prop_assert_eq!(&e1, &extract_edges(&m));
        prop_assert!(e1.is_subset_of(&e3));
    }

    #[test]
    fn components_are_idempotent(m in arb_mask(16)) {
        let cc = connected_components(&m, Connectivity::Four);
        let again = connected_components(&cc.foreground(), Connectivity::Four);
        prop_assert_eq!(&again, &cc);
        prop_assert_eq!(cc.foreground(), m);
    }

    #[test]
    fn overlap_matches_recount(a in arb_map(10), seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let b = random_instance_map(&mut rng, a.width(), a.height(), 4);
        let o = overlap_matrix(&a, &b).unwrap();
        for (p, &pid) in o.pred_ids.iter().enumerate() {
            for (g, &gid) in o.gt_ids.iter().enumerate() {
                let n = a.ids().iter().zip(b.ids()).filter(|&(&x, &y)| x == pid && y == gid).count();
                prop_assert_eq!(o.get(p, g), n as u64);
            }
        }
    }
}
