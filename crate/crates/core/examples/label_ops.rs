//! Edge labels, disk dilation, connected components and box filling on a
//! tiny pair of touching instances.

use glandseg::labelops::{
    connected_components, dilate, edge_labels, extract_edges, fill_boxes, instance_contacts,
    BBox, BinaryMask, Connectivity, InstanceMap,
};

fn show(title: &str, w: usize, h: usize, cell: impl Fn(usize, usize) -> char) {
    println!("{title}");
    for y in 0..h {
        let line: String = (0..w).map(|x| cell(x, y)).collect();
        println!("  {line}");
    }
}

fn mask(title: &str, m: &BinaryMask) {
    show(title, m.width(), m.height(), |x, y| if m.get(x, y) { '#' } else { '.' });
}

fn main() -> glandseg::Result<()> {
    let mut labels = InstanceMap::zeros(16, 8);
    for y in 1..7 {
        for x in 1..8 {
            labels.set(x, y, 1);
        }
        for x in 8..15 {
            labels.set(x, y, 2);
        }
    }
    show("instances", 16, 8, |x, y| char::from_digit(labels.get(x, y), 10).unwrap_or('?'));
    mask("edges (EDGE1)", &extract_edges(&labels));
    mask("edges dilated by radius 1", &edge_labels(&labels, 1.0)?);
    mask("instance contacts", &instance_contacts(&labels));

    let fg = labels.foreground();
    let merged = connected_components(&fg, Connectivity::Four);
    let split = connected_components(&fg.and_not(&dilate(&instance_contacts(&labels), 1.0)?), Connectivity::Four);
    println!("components of the foreground: {}", merged.num_instances());
    println!("components after carving contacts: {}", split.num_instances());

    let boxes: Vec<BBox> = labels.bounding_boxes().into_iter().map(|(_, b)| b).collect();
    let extra = BBox::new(5, 0, 11, 5);
    let mut all = boxes.clone();
    all.push(extra);
    let cov = fill_boxes(&all, 16, 8)?;
    show("box coverage", 16, 8, |x, y| char::from_digit(cov.get(x, y), 10).unwrap_or('+'));
    let area: usize = all.iter().map(BBox::area).sum();
    println!("sum of counts {} = sum of box areas {area}", cov.total());
    Ok(())
}
