use super::maps::{BinaryMask, InstanceMap};

/// Edge labels from an instance map.
///
/// A pixel is an edge when any of its four neighbours carries a different id
/// (background counts as an id). Neighbours outside the image take the
/// centre pixel's id, so the image border alone never creates edges.
pub fn extract_edges(labels: &InstanceMap) -> BinaryMask {
    let (w, h) = (labels.width(), labels.height());
    let ids = labels.ids();
    let bits = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let c = ids[y * w + x];
            (x > 0 && ids[y * w + x - 1] != c)
                || (x + 1 < w && ids[y * w + x + 1] != c)
                || (y > 0 && ids[(y - 1) * w + x] != c)
                || (y + 1 < h && ids[(y + 1) * w + x] != c)
        })
        .collect();
    BinaryMask::new(w, h, bits).expect("same dims")
}

/// Pixels where two different nonzero instances meet (4-neighbourhood).
/// Background contact is ignored.
pub fn instance_contacts(labels: &InstanceMap) -> BinaryMask {
    let (w, h) = (labels.width(), labels.height());
    let ids = labels.ids();
    let differs = |c: u32, n: u32| n != 0 && n != c;
    let bits = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let c = ids[y * w + x];
            c != 0
                && ((x > 0 && differs(c, ids[y * w + x - 1]))
                    || (x + 1 < w && differs(c, ids[y * w + x + 1]))
                    || (y > 0 && differs(c, ids[(y - 1) * w + x]))
                    || (y + 1 < h && differs(c, ids[(y + 1) * w + x])))
        })
        .collect();
    BinaryMask::new(w, h, bits).expect("same dims")
}
