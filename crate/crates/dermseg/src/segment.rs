//! From selected color clusters to the final lesion mask.
//!
//! The top lesion-colored cluster provides two seeds: its spatial centroid
//! and a point cast outward a fixed offset beyond its nearest boundary.
//! Flood fill grows a region from each, the regions are unioned, and the
//! connected components containing a seed survive. Interior holes are
//! filled last.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterResult, KMeansParams};
use crate::colormodel::{pixel_in_range, LesionColorModel};
use crate::imgcore::{BinaryMask, PixelCoord, RgbImage};
use crate::{Error, Result};

/// Pixel neighborhood used by flood fill and component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, 0),
                (1, 0),
                (0, -1),
                (0, 1),
                (-1, -1),
                (1, -1),
                (-1, 1),
                (1, 1),
            ],
        }
    }
}

/// What a candidate pixel's color is compared against during flood fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FloodReference {
    /// Compare against the seed pixel's color (order independent).
    FixedSeedColor,
    /// Compare against the already-accepted neighbor's color.
    MovingLocalColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodFillParams {
    /// Maximum per-channel difference from the reference color.
    pub tolerance: u8,
    pub connectivity: Connectivity,
    pub reference: FloodReference,
}

impl Default for FloodFillParams {
    fn default() -> Self {
        Self {
            tolerance: 20,
            connectivity: Connectivity::Four,
            reference: FloodReference::FixedSeedColor,
        }
    }
}

/// The two seed points derived from one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub centroid_seed: PixelCoord,
    pub boundary_seed: PixelCoord,
    pub source_cluster: usize,
}

/// A flood-fill region: mask plus area and tight bounding box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub mask: BinaryMask,
    pub area: usize,
    /// (x0, y0, x1, y1), inclusive.
    pub bbox: (usize, usize, usize, usize),
}

/// Connected component summary; labels start at 1 in row-major
/// first-encounter order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub label: u32,
    pub area: usize,
    pub bbox: (usize, usize, usize, usize),
}

/// Final mask plus the intermediates that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub mask: BinaryMask,
    pub regions: Vec<Region>,
    pub selected_clusters: Vec<usize>,
    pub seeds: Vec<SeedSpec>,
    /// True when no cluster matched the color model and the fallback also
    /// found no in-range pixel; the mask is empty in that case.
    pub no_cluster_selected: bool,
}

/// Segmentation knobs downstream of the color model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub kmeans: KMeansParams,
    /// Minimum in-range fraction for a cluster to be retained.
    pub min_fraction: f64,
    /// Seed every selected cluster instead of only the top-ranked one.
    pub seed_all_selected: bool,
    pub flood: FloodFillParams,
    /// Distance in pixels beyond the cluster boundary for the second seed.
    pub boundary_offset: usize,
    /// Fill interior holes of the retained mask.
    pub fill_holes: bool,
    /// Use this class's color range instead of the combined envelope.
    pub class: Option<String>,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            kmeans: KMeansParams::default(),
            min_fraction: 0.5,
            seed_all_selected: false,
            flood: FloodFillParams::default(),
            boundary_offset: 10,
            fill_holes: true,
            class: None,
        }
    }
}

/// Rounded mean position of a cluster's member pixels; when that point is
/// not itself a member, the member nearest to it wins (ties in row-major
/// order).
pub fn cluster_spatial_centroid(
    labels: &[usize],
    cluster_id: usize,
    width: usize,
    height: usize,
) -> Result<PixelCoord> {
    debug_assert_eq!(labels.len(), width * height);
    let mut sum_x = 0.0f64;
    let mut sum_y = 0.0f64;
    let mut count = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        if label == cluster_id {
            sum_x += (i % width) as f64;
            sum_y += (i / width) as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput("cluster has no member pixels"));
    }
    let mx = sum_x / count as f64;
    let my = sum_y / count as f64;
    let rx = (mx + 0.5).floor().clamp(0.0, (width - 1) as f64) as usize;
    let ry = (my + 0.5).floor().clamp(0.0, (height - 1) as f64) as usize;
    if labels[ry * width + rx] == cluster_id {
        return Ok(PixelCoord::new(rx, ry));
    }

    // nearest member to the geometric mean, first in row-major order on ties
    let mut best = PixelCoord::new(0, 0);
    let mut best_d = f64::INFINITY;
    for (i, &label) in labels.iter().enumerate() {
        if label != cluster_id {
            continue;
        }
        let x = (i % width) as f64;
        let y = (i / width) as f64;
        let d = (x - mx) * (x - mx) + (y - my) * (y - my);
        if d < best_d {
            best_d = d;
            best = PixelCoord::new(i % width, i / width);
        }
    }
    Ok(best)
}

fn is_boundary(mask: &BinaryMask, x: usize, y: usize) -> bool {
    if !mask.get(x, y) {
        return false;
    }
    for (dx, dy) in Connectivity::Four.offsets() {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        // pixels beyond the image edge count as background
        if nx < 0 || ny < 0 || nx as usize >= mask.width() || ny as usize >= mask.height() {
            return true;
        }
        if !mask.get(nx as usize, ny as usize) {
            return true;
        }
    }
    false
}

/// Casts a ray from the centroid through the nearest boundary pixel of the
/// cluster mask and returns the point `offset` pixels beyond it, clamped
/// to the image bounds.
pub fn boundary_seed(
    cluster_mask: &BinaryMask,
    centroid: PixelCoord,
    offset: usize,
) -> Result<PixelCoord> {
    if offset == 0 {
        return Err(Error::InvalidParam("boundary seed offset must be >= 1".into()));
    }
    let (w, h) = (cluster_mask.width(), cluster_mask.height());

    let mut nearest: Option<PixelCoord> = None;
    let mut nearest_d = f64::INFINITY;
    for y in 0..h {
        for x in 0..w {
            if !is_boundary(cluster_mask, x, y) {
                continue;
            }
            let dx = x as f64 - centroid.x as f64;
            let dy = y as f64 - centroid.y as f64;
            let d = dx * dx + dy * dy;
            if d < nearest_d {
                nearest_d = d;
                nearest = Some(PixelCoord::new(x, y));
            }
        }
    }
    let boundary = nearest.ok_or(Error::EmptyInput("cluster mask has no pixels"))?;

    let (dir_x, dir_y) = if boundary == centroid {
        // centroid sits on the boundary: point along the summed directions
        // of its background neighbors
        let mut sx = 0.0f64;
        let mut sy = 0.0f64;
        for (dx, dy) in Connectivity::Four.offsets() {
            let nx = centroid.x as isize + dx;
            let ny = centroid.y as isize + dy;
            let outside = nx < 0
                || ny < 0
                || nx as usize >= w
                || ny as usize >= h
                || !cluster_mask.get(nx as usize, ny as usize);
            if outside {
                sx += *dx as f64;
                sy += *dy as f64;
            }
        }
        if sx == 0.0 && sy == 0.0 {
            (1.0, 0.0)
        } else {
            let n = (sx * sx + sy * sy).sqrt();
            (sx / n, sy / n)
        }
    } else {
        let dx = boundary.x as f64 - centroid.x as f64;
        let dy = boundary.y as f64 - centroid.y as f64;
        let n = (dx * dx + dy * dy).sqrt();
        (dx / n, dy / n)
    };

    let px = boundary.x as f64 + offset as f64 * dir_x;
    let py = boundary.y as f64 + offset as f64 * dir_y;
    Ok(PixelCoord::new(
        px.round().clamp(0.0, (w - 1) as f64) as usize,
        py.round().clamp(0.0, (h - 1) as f64) as usize,
    ))
}

#[inline]
fn within_tolerance(a: [u8; 3], b: [u8; 3], tol: u8) -> bool {
    (0..3).all(|c| a[c].abs_diff(b[c]) <= tol)
}

/// Breadth-first region growing from the seed over neighbors whose color
/// stays within the per-channel tolerance of the reference color.
pub fn flood_fill(img: &RgbImage, seed: PixelCoord, params: &FloodFillParams) -> Region {
    assert!(img.contains(seed), "flood fill seed out of bounds");
    let (w, h) = (img.width(), img.height());
    let seed_color = img.get(seed.x, seed.y);

    let mut mask = BinaryMask::empty(w, h);
    let mut queue = VecDeque::new();
    mask.set(seed.x, seed.y, true);
    queue.push_back(seed);
    let mut area = 1usize;
    let mut bbox = (seed.x, seed.y, seed.x, seed.y);

    while let Some(p) = queue.pop_front() {
        let reference = match params.reference {
            FloodReference::FixedSeedColor => seed_color,
            FloodReference::MovingLocalColor => img.get(p.x, p.y),
        };
        for (dx, dy) in params.connectivity.offsets() {
            let nx = p.x as isize + dx;
            let ny = p.y as isize + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if mask.get(nx, ny) || !within_tolerance(img.get(nx, ny), reference, params.tolerance) {
                continue;
            }
            mask.set(nx, ny, true);
            queue.push_back(PixelCoord::new(nx, ny));
            area += 1;
            bbox = (
                bbox.0.min(nx),
                bbox.1.min(ny),
                bbox.2.max(nx),
                bbox.3.max(ny),
            );
        }
    }
    Region { mask, area, bbox }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // smaller root wins so canonical order follows first encounter
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Two-pass connected component labeling with union-find. Labels are
/// 1..=N in row-major first-encounter order; label 0 is background.
pub fn connected_components(
    mask: &BinaryMask,
    connectivity: Connectivity,
) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (mask.width(), mask.height());
    let mut provisional = vec![0usize; w * h]; // provisional label + 1
    let mut uf = UnionFind::new(0);
    let mut next = 0usize;

    // neighbors already visited in a row-major scan
    let prior: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut assigned: Option<usize> = None;
            for (dx, dy) in prior {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let n = provisional[ny as usize * w + nx as usize];
                if n == 0 {
                    continue;
                }
                match assigned {
                    None => assigned = Some(n - 1),
                    Some(current) => uf.union(current, n - 1),
                }
            }
            let label = match assigned {
                Some(l) => l,
                None => {
                    uf.parent.push(next);
                    next += 1;
                    next - 1
                }
            };
            provisional[y * w + x] = label + 1;
        }
    }

    // canonical labels in first-encounter order of resolved roots
    let mut root_to_label = vec![0u32; next];
    let mut components: Vec<Component> = Vec::new();
    let mut labels = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == 0 {
                continue;
            }
            let root = uf.find(p - 1);
            if root_to_label[root] == 0 {
                root_to_label[root] = components.len() as u32 + 1;
                components.push(Component {
                    label: root_to_label[root],
                    area: 0,
                    bbox: (x, y, x, y),
                });
            }
            let label = root_to_label[root];
            labels[y * w + x] = label;
            let comp = &mut components[(label - 1) as usize];
            comp.area += 1;
            comp.bbox = (
                comp.bbox.0.min(x),
                comp.bbox.1.min(y),
                comp.bbox.2.max(x),
                comp.bbox.3.max(y),
            );
        }
    }
    (labels, components)
}

/// Fills interior holes: background components (4-connected) that do not
/// touch the image border become foreground.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let inverted = BinaryMask::new(w, h, mask.data().iter().map(|&v| !v).collect())
        .expect("dimensions preserved");
    let (labels, components) = connected_components(&inverted, Connectivity::Four);

    let mut touches_border = vec![false; components.len() + 1];
    for x in 0..w {
        for y in [0, h - 1] {
            let l = labels[y * w + x];
            if l > 0 {
                touches_border[l as usize] = true;
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            let l = labels[y * w + x];
            if l > 0 {
                touches_border[l as usize] = true;
            }
        }
    }

    let data = mask
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v || (labels[i] > 0 && !touches_border[labels[i] as usize]))
        .collect();
    BinaryMask::new(w, h, data).expect("dimensions preserved")
}

/// Runs the full segmentation stage on a preprocessed image.
pub fn segment_image(
    img: &RgbImage,
    model: &LesionColorModel,
    params: &SegmentParams,
) -> Result<SegmentationResult> {
    let clusters = cluster::kmeans(img, &params.kmeans)?;
    let range = model.range_for(params.class.as_deref());
    let selected = cluster::select_lesion_clusters(img, &clusters, &range, params.min_fraction);

    let members = cluster::cluster_members(&clusters, params.kmeans.k);
    let seed_sources: Vec<usize> = if !selected.is_empty() {
        let picked: Vec<usize> = if params.seed_all_selected {
            selected.clone()
        } else {
            vec![selected[0]]
        };
        picked.into_iter().filter(|&id| !members[id].is_empty()).collect()
    } else {
        fallback_cluster(img, model, &clusters, &members)
    };

    if seed_sources.is_empty() {
        return Ok(SegmentationResult {
            mask: BinaryMask::empty(img.width(), img.height()),
            regions: Vec::new(),
            selected_clusters: selected,
            seeds: Vec::new(),
            no_cluster_selected: true,
        });
    }

    let mut regions = Vec::new();
    let mut seeds = Vec::new();
    let mut union = BinaryMask::empty(img.width(), img.height());
    for &cluster_id in &seed_sources {
        let centroid = cluster_spatial_centroid(
            &clusters.labels,
            cluster_id,
            img.width(),
            img.height(),
        )?;
        let cluster_mask = BinaryMask::new(
            img.width(),
            img.height(),
            clusters.labels.iter().map(|&l| l == cluster_id).collect(),
        )?;
        let boundary = boundary_seed(&cluster_mask, centroid, params.boundary_offset)?;

        for seed in [centroid, boundary] {
            let region = flood_fill(img, seed, &params.flood);
            for (slot, &v) in union.data_mut().iter_mut().zip(region.mask.data()) {
                *slot = *slot || v;
            }
            regions.push(region);
        }
        seeds.push(SeedSpec {
            centroid_seed: centroid,
            boundary_seed: boundary,
            source_cluster: cluster_id,
        });
    }

    // keep only components holding a seed; both survive when the two seeds
    // land apart
    let (labels, _components) = connected_components(&union, params.flood.connectivity);
    let mut keep = Vec::new();
    for spec in &seeds {
        for p in [spec.centroid_seed, spec.boundary_seed] {
            let l = labels[p.y * img.width() + p.x];
            if l > 0 && !keep.contains(&l) {
                keep.push(l);
            }
        }
    }
    let mut mask = BinaryMask::new(
        img.width(),
        img.height(),
        labels.iter().map(|l| *l > 0 && keep.contains(l)).collect(),
    )?;

    if params.fill_holes {
        mask = fill_holes(&mask);
    }

    Ok(SegmentationResult {
        mask,
        regions,
        selected_clusters: selected,
        seeds,
        no_cluster_selected: false,
    })
}

/// No cluster passed the fraction test: fall back to the cluster whose
/// centroid is nearest the center of the model range, unless the image has
/// no in-range pixel at all.
fn fallback_cluster(
    img: &RgbImage,
    model: &LesionColorModel,
    clusters: &ClusterResult,
    members: &[Vec<usize>],
) -> Vec<usize> {
    let range = model.combined;
    if !img.data().iter().any(|&p| pixel_in_range(p, &range)) {
        return Vec::new();
    }
    let center = range.center();
    let mut best: Option<(usize, f64)> = None;
    for (id, c) in clusters.centroids.iter().enumerate() {
        if members[id].is_empty() {
            continue;
        }
        let d = (c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2) + (c[2] - center[2]).powi(2);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((id, d));
        }
    }
    best.map(|(id, _)| vec![id]).unwrap_or_default()
}
