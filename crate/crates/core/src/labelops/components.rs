use crate::error::{Error, Result};

use super::maps::{BinaryMask, InstanceMap};

/// Pixel adjacency used for connected components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl TryFrom<u32> for Connectivity {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::config(format!("connectivity must be 4 or 8, got {v}"))),
        }
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let root = ra.min(rb);
        self.parent[ra.max(rb) as usize] = root;
        root
    }
}

/// Two-pass union-find labeling. Ids are dense `1..=n`, assigned in the order
/// components are first met in a row-major scan.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> InstanceMap {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut provisional = vec![0u32; w * h];
    // slot 0 stands for background
    let mut sets = DisjointSet { parent: vec![0] };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            let mut label = 0;
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if x > 0 {
                neighbours[n] = provisional[i - 1];
                n += 1;
            }
            if y > 0 {
                neighbours[n] = provisional[i - w];
                n += 1;
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        neighbours[n] = provisional[i - w - 1];
                        n += 1;
                    }
                    if x + 1 < w {
                        neighbours[n] = provisional[i - w + 1];
                        n += 1;
                    }
                }
            }
            for &nb in &neighbours[..n] {
                if nb == 0 {
                    continue;
                }
                label = if label == 0 { nb } else { sets.union(label, nb) };
            }
            if label == 0 {
                label = sets.make();
            }
            provisional[i] = label;
        }
    }
    let mut roots = provisional;
    for v in roots.iter_mut() {
        if *v != 0 {
            *v = sets.find(*v);
        }
    }
    InstanceMap::new(w, h, roots)
        .expect("same dims")
        .relabel_dense()
}
