//! Union-find connected-component labeling, whole-volume and chunked.
//!
//! Chunks are labeled independently; the first and last interior slice of
//! each chunk are kept so components can be joined across chunk boundaries
//! when the per-chunk summaries are merged. Global ids follow the scan order
//! of each component's first voxel, so chunked and whole-volume labelings
//! are identical.

use serde::{Deserialize, Serialize};

use crate::chunk::{execute_whole, Chunk, ChunkPlan, ChunkReduce, OpProfile, TwoPassOperator};
use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, LabelVolume, Shape, Volume, Voxel};
use crate::with_voxels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Connectivity {
    #[default]
    #[serde(rename = "6")]
    Six,
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::param(format!("connectivity must be 6 or 26, got {other}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let n = s
            .parse::<u32>()
            .map_err(|_| Error::param(format!("connectivity must be 6 or 26, got {s:?}")))?;
        Self::from_number(n)
    }

    pub fn number(self) -> u32 {
        match self {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }

    /// Neighbour offsets that precede a voxel in scan order.
    pub fn backward_offsets(self) -> Vec<(isize, isize, isize)> {
        match self {
            Connectivity::Six => vec![(-1, 0, 0), (0, -1, 0), (0, 0, -1)],
            Connectivity::TwentySix => {
                let mut v = Vec::with_capacity(13);
                for dz in -1..=1 {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            if (dz, dy, dx) < (0, 0, 0) {
                                v.push((dz, dy, dx));
                            }
                        }
                    }
                }
                v
            }
        }
    }

    /// In-plane (dy, dx) offsets linking voxels of adjacent slices.
    fn plane_links(self) -> Vec<(isize, isize)> {
        match self {
            Connectivity::Six => vec![(0, 0)],
            Connectivity::TwentySix => (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dy, dx))).collect(),
        }
    }
}

/// Disjoint sets whose root is always the smallest member.
pub struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    pub fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let p = self.parent[a as usize];
            self.parent[a as usize] = self.parent[p as usize];
            a = p;
        }
        a
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }
}

/// Which voxels take part in the labeling and which of them may join.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyMode {
    /// Nonzero voxels, regardless of value.
    Foreground,
    /// Nonzero voxels; neighbours join only when their values are equal.
    SameLabel,
    /// Zero voxels.
    Background,
}

fn keys_of(volume: &Volume, mode: KeyMode) -> Buffer<u32> {
    with_voxels!(volume.data(), b => b
        .iter()
        .map(|v| {
            let x = v.to_f64();
            match mode {
                KeyMode::Foreground => (x != 0.0) as u32,
                KeyMode::SameLabel => if x != 0.0 { x as u32 } else { 0 },
                KeyMode::Background => (x == 0.0) as u32,
            }
        })
        .collect())
}

/// Labels voxels with nonzero keys; neighbours with equal keys join.
/// Returns labels `1..=count` in first-voxel scan order.
pub fn label_keys(shape: Shape, keys: &[u32], conn: Connectivity) -> (Buffer<u32>, u32) {
    assert!(shape.len() < u32::MAX as usize, "slab too large for 32-bit labeling");
    let mut uf = UnionFind::new(shape.len());
    let offsets = conn.backward_offsets();
    for z in 0..shape.z {
        for y in 0..shape.y {
            for x in 0..shape.x {
                let i = shape.index(z, y, x);
                let k = keys[i];
                if k == 0 {
                    continue;
                }
                for &(dz, dy, dx) in &offsets {
                    let (nz, ny, nx) = (z as isize + dz, y as isize + dy, x as isize + dx);
                    if nz < 0 || ny < 0 || nx < 0 || ny >= shape.y as isize || nx >= shape.x as isize {
                        continue;
                    }
                    let j = shape.index(nz as usize, ny as usize, nx as usize);
                    if keys[j] == k {
                        uf.union(i as u32, j as u32);
                    }
                }
            }
        }
    }
    let mut labels = Buffer::<u32>::zeroed(shape.len());
    let mut next = 0u32;
    for i in 0..shape.len() {
        if keys[i] == 0 {
            continue;
        }
        let r = uf.find(i as u32) as usize;
        if r == i {
            next += 1;
            labels[i] = next;
        } else {
            labels[i] = labels[r];
        }
    }
    (labels, next)
}

/// Per-component attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub key: u32,
    pub size: u64,
    /// Has a voxel on a face of the volume.
    pub touches_border: bool,
    /// Has a voxel where the marker input is nonzero.
    pub marked: bool,
}

/// Labeling summary of one chunk.
pub struct ChunkComponents {
    infos: Vec<ComponentInfo>,
    width: usize,
    first_slice: Vec<u32>,
    last_slice: Vec<u32>,
}

/// Global result: a local→global map per chunk and merged attributes.
#[derive(Debug, Clone, Default)]
pub struct ComponentTable {
    pub chunk_maps: Vec<Vec<u32>>,
    /// Attributes of global component `id` at index `id − 1`.
    pub infos: Vec<ComponentInfo>,
}

impl ComponentTable {
    pub fn count(&self) -> u32 {
        self.infos.len() as u32
    }

    pub fn info(&self, id: u32) -> &ComponentInfo {
        &self.infos[id as usize - 1]
    }
}

/// How the apply pass turns components into output labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComponentApply {
    /// Global component ids.
    Label,
    /// Input value where the component has at least `min_size` voxels.
    RemoveIslands { min_size: u64 },
    /// Input value, plus `fill` on components not touching the border
    /// (used with [`KeyMode::Background`]).
    FillEnclosed { fill: u32 },
    /// 1 on marked components; marker voxels outside the mask mark nothing.
    KeepMarked,
}

/// Two-pass chunked component operator. A second input, when given, is the
/// marker used by [`ComponentInfo::marked`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentOp {
    pub mode: KeyMode,
    pub connectivity: Connectivity,
    pub apply: ComponentApply,
}

impl ComponentOp {
    fn local(&self, chunk: &Chunk<'_>) -> Result<(Shape, Buffer<u32>, Buffer<u32>, u32)> {
        let interior = chunk.local_interior();
        let slab = chunk.primary().slab(interior)?;
        let keys = keys_of(&slab, self.mode);
        let (labels, n) = label_keys(slab.shape(), &keys, self.connectivity);
        Ok((slab.shape(), keys, labels, n))
    }
}

impl ChunkReduce for ComponentOp {
    type Summary = ChunkComponents;
    type Output = ComponentTable;

    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        // keys, union-find parents and labels: 12 bytes per voxel
        Ok(OpProfile::two_pass(0, crate::filters::scratch(inputs, 12 + 4), DType::U32))
    }

    fn reduce(&self, chunk: &Chunk<'_>) -> Result<ChunkComponents> {
        let (s, keys, labels, n) = self.local(chunk)?;
        let mut infos = vec![ComponentInfo::default(); n as usize];
        let marker = match chunk.input(1) {
            Some(m) => Some(keys_of(&m.slab(chunk.local_interior())?, KeyMode::Foreground)),
            None => None,
        };
        for z in 0..s.z {
            let z_face = (z == 0 && chunk.is_first()) || (z + 1 == s.z && chunk.is_last());
            for y in 0..s.y {
                for x in 0..s.x {
                    let i = s.index(z, y, x);
                    let l = labels[i];
                    if l == 0 {
                        continue;
                    }
                    let info = &mut infos[l as usize - 1];
                    info.key = keys[i];
                    info.size += 1;
                    if z_face || y == 0 || x == 0 || y + 1 == s.y || x + 1 == s.x {
                        info.touches_border = true;
                    }
                    if marker.as_ref().is_some_and(|m| m[i] != 0) {
                        info.marked = true;
                    }
                }
            }
        }
        let n = s.slice_len();
        Ok(ChunkComponents {
            infos,
            width: s.x,
            first_slice: labels[..n].to_vec(),
            last_slice: labels[labels.len() - n..].to_vec(),
        })
    }

    fn finish(&self, parts: Vec<ChunkComponents>, _plan: &ChunkPlan) -> Result<ComponentTable> {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0usize;
        for p in &parts {
            offsets.push(total);
            total += p.infos.len();
        }
        let mut uf = UnionFind::new(total);
        let links = self.connectivity.plane_links();
        for c in 1..parts.len() {
            let (prev, next) = (&parts[c - 1], &parts[c]);
            let width = prev.width;
            let height = prev.last_slice.len() / width;
            for y in 0..height {
                for x in 0..width {
                    let a = prev.last_slice[y * width + x];
                    if a == 0 {
                        continue;
                    }
                    for &(dy, dx) in &links {
                        let (ny, nx) = (y as isize + dy, x as isize + dx);
                        if ny < 0 || nx < 0 || ny >= height as isize || nx >= width as isize {
                            continue;
                        }
                        let b = next.first_slice[ny as usize * width + nx as usize];
                        if b != 0 && prev.infos[a as usize - 1].key == next.infos[b as usize - 1].key {
                            uf.union(
                                (offsets[c - 1] + a as usize - 1) as u32,
                                (offsets[c] + b as usize - 1) as u32,
                            );
                        }
                    }
                }
            }
        }
        let mut global_of_root = vec![0u32; total];
        let mut infos: Vec<ComponentInfo> = Vec::new();
        let mut chunk_maps = Vec::with_capacity(parts.len());
        for (c, p) in parts.iter().enumerate() {
            let mut map = vec![0u32; p.infos.len() + 1];
            for (l, info) in p.infos.iter().enumerate() {
                let r = uf.find((offsets[c] + l) as u32) as usize;
                if global_of_root[r] == 0 {
                    infos.push(ComponentInfo {
                        key: info.key,
                        ..Default::default()
                    });
                    global_of_root[r] = infos.len() as u32;
                }
                let g = global_of_root[r];
                let gi = &mut infos[g as usize - 1];
                gi.size += info.size;
                gi.touches_border |= info.touches_border;
                gi.marked |= info.marked;
                map[l + 1] = g;
            }
            chunk_maps.push(map);
        }
        Ok(ComponentTable { chunk_maps, infos })
    }
}

impl TwoPassOperator for ComponentOp {
    fn apply(&self, chunk: &Chunk<'_>, table: &ComponentTable) -> Result<Volume> {
        let (s, _keys, labels, _) = self.local(chunk)?;
        let map = &table.chunk_maps[chunk.index];
        let input = chunk.primary().slab(chunk.local_interior())?;
        let values = keys_of(&input, KeyMode::SameLabel);
        let out: Buffer<u32> = labels
            .iter()
            .zip(values.iter())
            .map(|(&l, &v)| {
                let g = map[l as usize];
                match self.apply {
                    ComponentApply::Label => g,
                    ComponentApply::RemoveIslands { min_size } => {
                        if g != 0 && table.info(g).size >= min_size {
                            v
                        } else {
                            0
                        }
                    }
                    ComponentApply::FillEnclosed { fill } => {
                        if g != 0 && !table.info(g).touches_border {
                            fill
                        } else {
                            v
                        }
                    }
                    ComponentApply::KeepMarked => (g != 0 && table.info(g).marked) as u32,
                }
            })
            .collect();
        Volume::from_buffer(s, chunk.primary().spacing(), out)
    }
}

fn run_components(inputs: &[&Volume], op: ComponentOp) -> Result<(LabelVolume, ComponentTable)> {
    let (v, table) = execute_whole(inputs, &op)?;
    Ok((LabelVolume::from_volume(v)?, table))
}

/// Labels the nonzero voxels of `mask`; ids `1..=n` follow scan order.
pub fn connected_components(mask: &Volume, conn: Connectivity) -> Result<(LabelVolume, u32)> {
    let op = ComponentOp {
        mode: KeyMode::Foreground,
        connectivity: conn,
        apply: ComponentApply::Label,
    };
    let (labels, table) = run_components(&[mask], op)?;
    Ok((labels, table.count()))
}

/// Zeroes connected components with fewer than `min_size` voxels. Voxels
/// connect only to neighbours carrying the same label.
pub fn remove_islands(labels: &Volume, min_size: u64, conn: Connectivity) -> Result<LabelVolume> {
    let op = ComponentOp {
        mode: KeyMode::SameLabel,
        connectivity: conn,
        apply: ComponentApply::RemoveIslands { min_size },
    };
    Ok(run_components(&[labels], op)?.0)
}

/// Sets background components that do not reach the volume faces to `fill`.
pub fn fill_holes(mask: &Volume, conn: Connectivity, fill: u32) -> Result<LabelVolume> {
    let op = ComponentOp {
        mode: KeyMode::Background,
        connectivity: conn,
        apply: ComponentApply::FillEnclosed { fill },
    };
    Ok(run_components(&[mask], op)?.0)
}

/// Binary reconstruction by dilation: the components of `mask` that contain
/// a marker voxel. The marker must lie inside the mask.
pub fn reconstruct_binary(marker: &Volume, mask: &Volume, conn: Connectivity) -> Result<LabelVolume> {
    check_marker_inside(marker, mask)?;
    let op = ComponentOp {
        mode: KeyMode::Foreground,
        connectivity: conn,
        apply: ComponentApply::KeepMarked,
    };
    Ok(run_components(&[mask, marker], op)?.0)
}

pub(crate) fn check_marker_inside(marker: &Volume, mask: &Volume) -> Result<()> {
    if marker.shape() != mask.shape() {
        return Err(Error::Shape(format!("marker {} vs mask {}", marker.shape(), mask.shape())));
    }
    let (m, k) = (keys_of(marker, KeyMode::Foreground), keys_of(mask, KeyMode::Foreground));
    if m.iter().zip(k.iter()).any(|(&a, &b)| a > b) {
        return Err(Error::param("marker must not exceed the mask"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{execute_two_pass, ExecOptions, MemoryBudget};
    use rand::{Rng, SeedableRng};
    use std::collections::{HashMap, VecDeque};

    fn random_mask(shape: Shape, seed: u64, p: f64) -> Volume {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Volume::from_fn(shape, |_, _, _| rng.random_bool(p) as u8)
    }

    fn flood_oracle(mask: &Volume, conn: Connectivity) -> Vec<u32> {
        let s = mask.shape();
        let fg: Vec<bool> = mask.to_f64_buffer().iter().map(|&v| v != 0.0).collect();
        let mut out = vec![0u32; s.len()];
        let mut next = 0;
        let mut nbrs = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let manhattan = dz.abs() + dy.abs() + dx.abs();
                    if manhattan > 0 && (conn == Connectivity::TwentySix || manhattan == 1) {
                        nbrs.push((dz, dy, dx));
                    }
                }
            }
        }
        for start in 0..s.len() {
            if !fg[start] || out[start] != 0 {
                continue;
            }
            next += 1;
            out[start] = next;
            let mut q = VecDeque::from([start]);
            while let Some(i) = q.pop_front() {
                let (z, y, x) = s.coords(i);
                for &(dz, dy, dx) in &nbrs {
                    let (nz, ny, nx) = (z as isize + dz, y as isize + dy, x as isize + dx);
                    if nz < 0 || ny < 0 || nx < 0 || nz >= s.z as isize || ny >= s.y as isize || nx >= s.x as isize {
                        continue;
                    }
                    let j = s.index(nz as usize, ny as usize, nx as usize);
                    if fg[j] && out[j] == 0 {
                        out[j] = next;
                        q.push_back(j);
                    }
                }
            }
        }
        out
    }

    fn same_partition(a: &[u32], b: &[u32]) -> bool {
        let (mut ab, mut ba) = (HashMap::new(), HashMap::new());
        a.iter().zip(b).all(|(&x, &y)| {
            (x == 0) == (y == 0) && *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x
        })
    }

    #[test]
    fn matches_flood_fill() {
        for seed in 0..6 {
            let m = random_mask(Shape::new(9, 10, 11), seed, 0.4);
            for conn in [Connectivity::Six, Connectivity::TwentySix] {
                let (labels, n) = connected_components(&m, conn).unwrap();
                let oracle = flood_oracle(&m, conn);
                assert!(same_partition(labels.labels(), &oracle));
                assert_eq!(n, *oracle.iter().max().unwrap());
                // scan-order ids: the oracle assigns in scan order too
                assert_eq!(labels.labels(), &oracle[..]);
            }
        }
    }

    #[test]
    fn chunked_equals_whole() {
        let m = random_mask(Shape::new(17, 8, 9), 42, 0.45);
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let op = ComponentOp {
                mode: KeyMode::Foreground,
                connectivity: conn,
                apply: ComponentApply::Label,
            };
            let (whole, _) = connected_components(&m, conn).unwrap();
            for interior in [1, 2, 5] {
                let opts = ExecOptions {
                    plan: Some(ChunkPlan::uniform(17, interior, 0).unwrap()),
                    ..Default::default()
                };
                let (out, table, _) = execute_two_pass(&[&m], &op, &MemoryBudget::fixed(1 << 30), &opts).unwrap();
                assert_eq!(&out, whole.as_volume());
                assert_eq!(table.count(), whole.labels().iter().copied().max().unwrap());
            }
        }
    }

    #[test]
    fn islands_below_min_size_removed() {
        let mut v = vec![0u32; 40];
        v[0..3].fill(1);
        v[10..20].fill(1);
        let m = Volume::from_vec(Shape::new(1, 1, 40), v.clone()).unwrap();
        let out = remove_islands(&m, 5, Connectivity::Six).unwrap();
        assert_eq!(out.labels().iter().sum::<u32>(), 10);
        assert_eq!(remove_islands(&m, 1, Connectivity::Six).unwrap().labels(), &v[..]);
    }

    #[test]
    fn shell_is_filled() {
        let s = Shape::cube(5);
        let shell = Volume::from_fn(s, |z, y, x| {
            let edge = |c: usize| c == 0 || c == 4;
            (edge(z) || edge(y) || edge(x)) as u8
        });
        let out = fill_holes(&shell, Connectivity::Six, 1).unwrap();
        assert!(out.labels().iter().all(|&l| l == 1));
        let solid = Volume::filled(s, 1u8);
        assert_eq!(fill_holes(&solid, Connectivity::Six, 1).unwrap().labels(), &vec![1u32; 125][..]);
    }

    #[test]
    fn reconstruction_keeps_marked_blob() {
        let mask = Volume::from_fn(Shape::new(1, 1, 9), |_, _, x| !(3..=5).contains(&x) as u8);
        let marker = Volume::from_fn(Shape::new(1, 1, 9), |_, _, x| (x == 7) as u8);
        let out = reconstruct_binary(&marker, &mask, Connectivity::Six).unwrap();
        assert_eq!(out.labels(), &[0, 0, 0, 0, 0, 0, 1, 1, 1]);
        let bad = Volume::from_fn(Shape::new(1, 1, 9), |_, _, x| (x == 4) as u8);
        assert!(matches!(reconstruct_binary(&bad, &mask, Connectivity::Six), Err(Error::Parameter(_))));
    }
}
