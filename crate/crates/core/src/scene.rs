//! Procedural rigid objects, workspace rendering and grasp-centred patches.
//!
//! The workspace is a 0.4 m square seen from above by a 256×256 grayscale
//! camera. Objects are simple polygons, stored together with a decomposition
//! into at most three convex parts for fast membership tests.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::geometry::{self, Pose, Vec2};
use crate::math::{cos, floor, sin};
use crate::rng;

pub const WORKSPACE_SIZE: f64 = 0.4;
pub const IMAGE_SIZE: usize = 256;
pub const METERS_PER_PIXEL: f64 = WORKSPACE_SIZE / IMAGE_SIZE as f64;
/// Side of the square crop taken around a grasp centre, in image pixels.
pub const CROP_SIZE: usize = 64;
/// Side of the pooled patch fed to the networks.
pub const PATCH_SIZE: usize = 32;
pub const PATCH_LEN: usize = PATCH_SIZE * PATCH_SIZE;

/// Lattice spacing of the object texture, in metres (four image pixels).
const TEXTURE_CELL: f64 = 4.0 * METERS_PER_PIXEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn mass_range(self) -> (f64, f64) {
        match self {
            Difficulty::Easy => (0.05, 0.4),
            Difficulty::Medium => (0.2, 1.0),
            Difficulty::Hard => (0.5, 2.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Difficulty> {
        match s {
            "easy" => Some(Difficulty::Easy),
            "medium" => Some(Difficulty::Medium),
            "hard" => Some(Difficulty::Hard),
            _ => None,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Difficulty::Easy => 0xE,
            Difficulty::Medium => 0x3E,
            Difficulty::Hard => 0x4A2D,
        }
    }
}

/// A rigid planar object in its own frame; the frame origin is the centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectShape {
    /// Counter-clockwise simple outline.
    pub vertices: Vec<Vec2>,
    /// Convex cover of the outline (at most three parts).
    pub parts: Vec<Vec<Vec2>>,
    pub mass: f64,
    pub friction_mu: f64,
    pub com: Vec2,
    pub id: u64,
}

impl ObjectShape {
    /// Builds an object from an outline and its convex decomposition.
    pub fn new(
        vertices: Vec<Vec2>,
        parts: Vec<Vec<Vec2>>,
        mass: f64,
        friction_mu: f64,
        id: u64,
    ) -> Result<Self> {
        if vertices.len() < 3 || !geometry::is_simple(&vertices) {
            return Err(Error::invalid(
                "vertices",
                "outline must be a simple polygon",
            ));
        }
        if geometry::signed_area(&vertices) <= 0.0 {
            return Err(Error::invalid(
                "vertices",
                "outline must be counter-clockwise",
            ));
        }
        if parts.is_empty() || parts.len() > 3 {
            return Err(Error::invalid(
                "parts",
                "expected one to three convex parts",
            ));
        }
        if parts.iter().any(|p| !geometry::is_convex_ccw(p)) {
            return Err(Error::invalid(
                "parts",
                "every part must be convex and counter-clockwise",
            ));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("mass", "must be positive"));
        }
        if !(friction_mu > 0.0 && friction_mu <= 1.0) {
            return Err(Error::invalid("friction_mu", "must lie in (0, 1]"));
        }
        let com = geometry::centroid(&vertices);
        Ok(ObjectShape {
            vertices,
            parts,
            mass,
            friction_mu,
            com,
            id,
        })
    }

    /// Convex polygon, used as its own single part.
    pub fn convex(vertices: Vec<Vec2>, mass: f64, friction_mu: f64, id: u64) -> Result<Self> {
        let parts = vec![vertices.clone()];
        Self::new(vertices, parts, mass, friction_mu, id)
    }

    /// Axis-aligned `width × height` rectangle centred on the origin.
    pub fn rectangle(
        width: f64,
        height: f64,
        mass: f64,
        friction_mu: f64,
        id: u64,
    ) -> Result<Self> {
        let (w, h) = (width / 2.0, height / 2.0);
        Self::convex(
            vec![
                Vec2::new(-w, -h),
                Vec2::new(w, -h),
                Vec2::new(w, h),
                Vec2::new(-w, h),
            ],
            mass,
            friction_mu,
            id,
        )
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        geometry::bounds(&self.vertices)
    }

    pub fn bounding_box_max_side(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi.x - lo.x).max(hi.y - lo.y)
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.vertices)
    }

    pub fn contains_local(&self, p: Vec2) -> bool {
        self.parts
            .iter()
            .any(|part| geometry::point_in_convex(part, p))
    }

    /// Returns a copy with every point shifted so that the centroid is the origin.
    fn recentred(mut self) -> Self {
        let c = geometry::centroid(&self.vertices);
        for v in self.vertices.iter_mut() {
            *v = *v - c;
        }
        for part in self.parts.iter_mut() {
            for v in part.iter_mut() {
                *v = *v - c;
            }
        }
        self.com = geometry::centroid(&self.vertices);
        self
    }
}

/// Procedurally generates an object of the given difficulty. Deterministic in
/// `(seed, difficulty)`.
///
/// * easy: convex tapered bar with up to two chamfered corners (4–6 vertices)
/// * medium: convex tapered bar with a V notch cut into one long side
/// * hard: L- or T-shaped union of two rectangles
pub fn generate_object(seed: u64, difficulty: Difficulty) -> ObjectShape {
    let id = rng::derive(seed, difficulty.tag());
    let mut r = rng::seeded(id);
    let (vertices, parts) = match difficulty {
        Difficulty::Easy => {
            let len = r.gen_range(0.03..0.16);
            let width = r.gen_range(0.015..0.05f64.min(len));
            let taper = r.gen_range(0.7..1.0);
            let quad = tapered_bar(len, width, taper);
            let n_chamfers = r.gen_range(0..=2usize);
            let first = r.gen_range(0..4usize);
            let corners: Vec<usize> = (0..n_chamfers).map(|k| (first + 2 * k) % 4).collect();
            let poly = chamfer(&quad, &corners, &mut r);
            (poly.clone(), vec![poly])
        }
        Difficulty::Medium => notched_bar(&mut r),
        Difficulty::Hard => {
            if r.gen_bool(0.5) {
                l_shape(&mut r)
            } else {
                t_shape(&mut r)
            }
        }
    };
    let (lo, hi) = difficulty.mass_range();
    let mass = r.gen_range(lo..hi);
    let mu = r.gen_range(0.4..0.8);
    let shape = ObjectShape {
        com: Vec2::ZERO,
        vertices,
        parts,
        mass,
        friction_mu: mu,
        id,
    };
    shape.recentred()
}

fn tapered_bar(len: f64, width: f64, taper: f64) -> Vec<Vec2> {
    let (l, w) = (len / 2.0, width / 2.0);
    vec![
        Vec2::new(-l, -w),
        Vec2::new(l, -w * taper),
        Vec2::new(l, w * taper),
        Vec2::new(-l, w),
    ]
}

/// Cuts the listed corners of a convex polygon.
fn chamfer(poly: &[Vec2], corners: &[usize], r: &mut rng::Rng) -> Vec<Vec2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + corners.len());
    for i in 0..n {
        let v = poly[i];
        if corners.contains(&i) {
            let prev = poly[(i + n - 1) % n];
            let next = poly[(i + 1) % n];
            let cut = r.gen_range(0.15..0.4) * (prev - v).norm().min((next - v).norm());
            out.push(v + (prev - v).normalized() * cut);
            out.push(v + (next - v).normalized() * cut);
        } else {
            out.push(v);
        }
    }
    out
}

fn notched_bar(r: &mut rng::Rng) -> (Vec<Vec2>, Vec<Vec<Vec2>>) {
    let len = r.gen_range(0.05..0.18);
    let width = r.gen_range(0.025..0.055);
    let taper = r.gen_range(0.8..1.0);
    let quad = tapered_bar(len, width, taper);
    let s = r.gen_range(0.3..0.7);
    let depth = r.gen_range(0.2..0.4) * width;
    let (a, b) = (quad[0], quad[1]);
    let inward = (b - a).perp().normalized();
    let notch = a + (b - a) * s + inward * depth;
    let top_chamfers: Vec<usize> = match r.gen_range(0..3u32) {
        0 => Vec::new(),
        1 => vec![2],
        _ => vec![2, 3],
    };
    // Chamfer the side opposite the notch, then splice the notch in.
    let top = chamfer(&quad, &top_chamfers, r);
    let mut outline = Vec::with_capacity(top.len() + 1);
    outline.push(top[0]);
    outline.push(notch);
    outline.extend_from_slice(&top[1..]);
    let parts = split_at_reflex(&outline, 1);
    (outline, parts)
}

/// Splits a polygon with a single reflex vertex into two convex pieces by a
/// diagonal from that vertex.
fn split_at_reflex(poly: &[Vec2], reflex: usize) -> Vec<Vec<Vec2>> {
    let n = poly.len();
    let mut best: Option<(f64, Vec<Vec<Vec2>>)> = None;
    for k in 2..(n - 1) {
        let j = (reflex + k) % n;
        let mut left = Vec::new();
        let mut i = reflex;
        loop {
            left.push(poly[i]);
            if i == j {
                break;
            }
            i = (i + 1) % n;
        }
        let mut right = Vec::new();
        let mut i = j;
        loop {
            right.push(poly[i]);
            if i == reflex {
                break;
            }
            i = (i + 1) % n;
        }
        if geometry::is_convex_ccw(&left) && geometry::is_convex_ccw(&right) {
            // Prefer the most balanced split.
            let a = geometry::signed_area(&left);
            let b = geometry::signed_area(&right);
            let score = (a - b).abs();
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, vec![left, right]));
            }
        }
    }
    best.map(|(_, p)| p)
        .expect("a single shallow notch always admits a convex split")
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ]
}

fn l_shape(r: &mut rng::Rng) -> (Vec<Vec2>, Vec<Vec<Vec2>>) {
    let a = r.gen_range(0.07..0.18);
    let b = r.gen_range(0.06..0.16);
    let t1 = r.gen_range(0.018..0.045);
    let t2 = r.gen_range(0.018..0.045);
    let outline = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(a, 0.0),
        Vec2::new(a, t1),
        Vec2::new(t2, t1),
        Vec2::new(t2, b),
        Vec2::new(0.0, b),
    ];
    (outline, vec![rect(0.0, 0.0, a, t1), rect(0.0, t1, t2, b)])
}

fn t_shape(r: &mut rng::Rng) -> (Vec<Vec2>, Vec<Vec<Vec2>>) {
    let a = r.gen_range(0.07..0.18);
    let t1 = r.gen_range(0.018..0.045);
    let b = r.gen_range((t1 + 0.03)..0.16);
    let t2 = r.gen_range(0.018..0.045);
    let (h, s) = (a / 2.0, t2 / 2.0);
    let neck = b - t1;
    let outline = vec![
        Vec2::new(-s, 0.0),
        Vec2::new(s, 0.0),
        Vec2::new(s, neck),
        Vec2::new(h, neck),
        Vec2::new(h, b),
        Vec2::new(-h, b),
        Vec2::new(-h, neck),
        Vec2::new(-s, neck),
    ];
    (outline, vec![rect(-s, 0.0, s, neck), rect(-h, neck, h, b)])
}

/// An object placed in the workspace, or the empty workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub object: Option<ObjectShape>,
    pub pose: Pose,
    pub seed: u64,
}

impl Scene {
    pub fn new(object: ObjectShape, pose: Pose, seed: u64) -> Result<Self> {
        let inside = object.vertices.iter().all(|&v| {
            let w = pose.to_world(v);
            (0.0..=WORKSPACE_SIZE).contains(&w.x) && (0.0..=WORKSPACE_SIZE).contains(&w.y)
        });
        if !inside {
            return Err(Error::invalid(
                "pose",
                "object must lie inside the workspace",
            ));
        }
        Ok(Scene {
            object: Some(object),
            pose,
            seed,
        })
    }

    /// Sentinel scene with nothing on the table.
    pub fn empty(seed: u64) -> Self {
        Scene {
            object: None,
            pose: Pose::default(),
            seed,
        }
    }

    /// Places `object` at a uniformly random orientation and position that
    /// keeps it at least 5 mm from the workspace border.
    pub fn random(object: ObjectShape, seed: u64) -> Self {
        let pose = random_pose(&object, seed);
        Scene {
            object: Some(object),
            pose,
            seed,
        }
    }
}

pub fn random_pose(object: &ObjectShape, seed: u64) -> Pose {
    const BORDER: f64 = 0.005;
    let mut r = rng::seeded(rng::derive(seed, 0x905E));
    let phi = r.gen_range(0.0..2.0 * PI);
    let rotated: Vec<Vec2> = object.vertices.iter().map(|v| v.rotate(phi)).collect();
    let (lo, hi) = geometry::bounds(&rotated);
    let x = r.gen_range((BORDER - lo.x)..(WORKSPACE_SIZE - BORDER - hi.x));
    let y = r.gen_range((BORDER - lo.y)..(WORKSPACE_SIZE - BORDER - hi.y));
    Pose::new(x, y, phi)
}

/// Grayscale top-down view of the workspace; row `r`, column `c` covers the
/// square whose centre is `((c + 0.5)·Δ, (r + 0.5)·Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub pixels: Vec<f32>,
    pub meters_per_pixel: f64,
}

impl Image {
    pub fn blank() -> Self {
        Image {
            pixels: vec![0.0; IMAGE_SIZE * IMAGE_SIZE],
            meters_per_pixel: METERS_PER_PIXEL,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * IMAGE_SIZE + col]
    }

    #[inline]
    fn get_or_zero(&self, row: isize, col: isize) -> f64 {
        if row < 0 || col < 0 || row >= IMAGE_SIZE as isize || col >= IMAGE_SIZE as isize {
            0.0
        } else {
            self.pixels[row as usize * IMAGE_SIZE + col as usize] as f64
        }
    }

    pub fn pixel_center(row: usize, col: usize) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) * METERS_PER_PIXEL,
            (row as f64 + 0.5) * METERS_PER_PIXEL,
        )
    }

    /// Bilinear sample at a workspace point; samples outside the image are 0.
    #[inline]
    pub fn sample(&self, p: Vec2) -> f64 {
        let px = p.x / self.meters_per_pixel - 0.5;
        let py = p.y / self.meters_per_pixel - 0.5;
        let x0 = floor(px);
        let y0 = floor(py);
        let fx = px - x0;
        let fy = py - y0;
        let (c, r) = (x0 as isize, y0 as isize);
        let n = IMAGE_SIZE as isize;
        if c >= 0 && r >= 0 && c + 1 < n && r + 1 < n {
            let i = r as usize * IMAGE_SIZE + c as usize;
            let px = &self.pixels;
            let top = px[i] as f64 * (1.0 - fx) + px[i + 1] as f64 * fx;
            let bot = px[i + IMAGE_SIZE] as f64 * (1.0 - fx) + px[i + IMAGE_SIZE + 1] as f64 * fx;
            return top * (1.0 - fy) + bot * fy;
        }
        let top = self.get_or_zero(r, c) * (1.0 - fx) + self.get_or_zero(r, c + 1) * fx;
        let bot = self.get_or_zero(r + 1, c) * (1.0 - fx) + self.get_or_zero(r + 1, c + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    pub fn count_nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Smooth value noise in `[0, 1]` on a lattice attached to the object frame.
fn texture(id: u64, local: Vec2) -> f64 {
    let gx = local.x / TEXTURE_CELL;
    let gy = local.y / TEXTURE_CELL;
    let (x0, y0) = (floor(gx), floor(gy));
    let (fx, fy) = (gx - x0, gy - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let lattice = |dx: i64, dy: i64| {
        let key = rng::derive(
            id,
            ((ix + dx) as u64) << 32 ^ ((iy + dy) as u64 & 0xFFFF_FFFF),
        );
        rng::unit_hash(key)
    };
    let top = lattice(0, 0) * (1.0 - fx) + lattice(1, 0) * fx;
    let bot = lattice(0, 1) * (1.0 - fx) + lattice(1, 1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Rasterises the scene: pixels whose centre lies inside the object get
/// `0.2 + 0.6·texture`, everything else is 0.
pub fn render_scene(scene: &Scene) -> Image {
    let mut img = Image::blank();
    let Some(object) = &scene.object else {
        return img;
    };
    let world: Vec<Vec2> = object
        .vertices
        .iter()
        .map(|&v| scene.pose.to_world(v))
        .collect();
    let (lo, hi) = geometry::bounds(&world);
    let to_idx = |m: f64| -> isize { floor(m / METERS_PER_PIXEL - 0.5) as isize };
    let c0 = to_idx(lo.x).max(0) as usize;
    let r0 = to_idx(lo.y).max(0) as usize;
    let c1 = ((to_idx(hi.x) + 1).max(0) as usize).min(IMAGE_SIZE - 1);
    let r1 = ((to_idx(hi.y) + 1).max(0) as usize).min(IMAGE_SIZE - 1);
    for row in r0..=r1 {
        for col in c0..=c1 {
            let local = scene.pose.to_local(Image::pixel_center(row, col));
            if object.contains_local(local) {
                img.pixels[row * IMAGE_SIZE + col] = (0.2 + 0.6 * texture(object.id, local)) as f32;
            }
        }
    }
    img
}

/// 32×32 network input cut from the image around a grasp centre.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub pixels: Vec<f32>,
    pub source_center: Vec2,
    pub source_angle: f64,
}

impl Patch {
    pub fn new(pixels: Vec<f32>, source_center: Vec2, source_angle: f64) -> Result<Self> {
        if pixels.len() != PATCH_LEN {
            return Err(Error::Shape(alloc::format!(
                "patch needs {PATCH_LEN} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Patch {
            pixels,
            source_center,
            source_angle,
        })
    }

    pub fn zeros() -> Self {
        Patch {
            pixels: vec![0.0; PATCH_LEN],
            source_center: Vec2::ZERO,
            source_angle: 0.0,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * PATCH_SIZE + col]
    }

    /// Rotates the patch content by `angle` about its centre (bilinear,
    /// zero fill): the result at offset `u` is the input at `R(−angle)·u`.
    /// Undoes the orientation of `extract_rotated_patch(…, angle)`.
    pub fn rotate_content(&self, angle: f64) -> Patch {
        let half = PATCH_SIZE as f64 / 2.0 - 0.5;
        let (s, c) = (sin(-angle), cos(-angle));
        let at = |r: isize, k: isize| -> f64 {
            if r < 0 || k < 0 || r >= PATCH_SIZE as isize || k >= PATCH_SIZE as isize {
                0.0
            } else {
                self.pixels[r as usize * PATCH_SIZE + k as usize] as f64
            }
        };
        let mut out = vec![0.0f32; PATCH_LEN];
        for row in 0..PATCH_SIZE {
            for col in 0..PATCH_SIZE {
                let u = col as f64 - half;
                let v = row as f64 - half;
                let x = c * u - s * v + half;
                let y = s * u + c * v + half;
                let (x0, y0) = (floor(x), floor(y));
                let (fx, fy) = (x - x0, y - y0);
                let (k, r) = (x0 as isize, y0 as isize);
                let top = at(r, k) * (1.0 - fx) + at(r, k + 1) * fx;
                let bot = at(r + 1, k) * (1.0 - fx) + at(r + 1, k + 1) * fx;
                out[row * PATCH_SIZE + col] = (top * (1.0 - fy) + bot * fy) as f32;
            }
        }
        Patch {
            pixels: out,
            source_center: self.source_center,
            source_angle: self.source_angle - angle,
        }
    }
}

/// Samples the 64×64 crop centred at `center` whose axes are rotated by
/// `angle` (so the image content appears rotated by `−angle`), unpooled.
pub fn rotated_crop(image: &Image, center: Vec2, angle: f64) -> Vec<f32> {
    let d = image.meters_per_pixel;
    let half = CROP_SIZE as f64 / 2.0 - 0.5;
    if angle == 0.0 {
        return aligned_crop(image, center);
    }
    let (s, c) = (sin(angle), cos(angle));
    let mut crop = vec![0.0f32; CROP_SIZE * CROP_SIZE];
    for row in 0..CROP_SIZE {
        let v = (row as f64 - half) * d;
        for col in 0..CROP_SIZE {
            let u = (col as f64 - half) * d;
            let p = Vec2::new(center.x + c * u - s * v, center.y + s * u + c * v);
            crop[row * CROP_SIZE + col] = image.sample(p) as f32;
        }
    }
    crop
}

/// Unrotated crop: bilinear weights are separable, so they are computed once
/// per row and column. Matches the general path sample for sample.
fn aligned_crop(image: &Image, center: Vec2) -> Vec<f32> {
    let d = image.meters_per_pixel;
    let half = CROP_SIZE as f64 / 2.0 - 0.5;
    let axis = |origin: f64| -> Vec<(isize, f64)> {
        (0..CROP_SIZE)
            .map(|k| {
                let g = (origin + (k as f64 - half) * d) / d - 0.5;
                let g0 = floor(g);
                (g0 as isize, g - g0)
            })
            .collect()
    };
    let cols = axis(center.x);
    let rows = axis(center.y);
    let mut crop = vec![0.0f32; CROP_SIZE * CROP_SIZE];
    for (row, &(r, fy)) in rows.iter().enumerate() {
        for (col, &(c, fx)) in cols.iter().enumerate() {
            let top = image.get_or_zero(r, c) * (1.0 - fx) + image.get_or_zero(r, c + 1) * fx;
            let bot =
                image.get_or_zero(r + 1, c) * (1.0 - fx) + image.get_or_zero(r + 1, c + 1) * fx;
            crop[row * CROP_SIZE + col] = (top * (1.0 - fy) + bot * fy) as f32;
        }
    }
    crop
}

/// 2×2 mean pooling of a 64×64 crop.
pub fn pool_crop(crop: &[f32]) -> Vec<f32> {
    let mut out = vec![0.0f32; PATCH_LEN];
    for row in 0..PATCH_SIZE {
        for col in 0..PATCH_SIZE {
            let (r, c) = (2 * row, 2 * col);
            let sum = crop[r * CROP_SIZE + c] as f64
                + crop[r * CROP_SIZE + c + 1] as f64
                + crop[(r + 1) * CROP_SIZE + c] as f64
                + crop[(r + 1) * CROP_SIZE + c + 1] as f64;
            out[row * PATCH_SIZE + col] = (sum * 0.25) as f32;
        }
    }
    out
}

/// The adversary's view of a grasp: the image around `center`, rotated by
/// `−angle` so the grasp appears in canonical orientation, pooled to 32×32.
pub fn extract_rotated_patch(image: &Image, center: Vec2, angle: f64) -> Patch {
    let crop = rotated_crop(image, center, angle);
    Patch {
        pixels: pool_crop(&crop),
        source_center: center,
        source_angle: angle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_crop_matches_pointwise_sampling() {
        let scene = Scene::random(generate_object(3, Difficulty::Medium), 4);
        let image = render_scene(&scene);
        let center = scene.pose.position() + Vec2::new(0.013, -0.007);
        let fast = rotated_crop(&image, center, 0.0);
        let half = CROP_SIZE as f64 / 2.0 - 0.5;
        let d = image.meters_per_pixel;
        for row in 0..CROP_SIZE {
            for col in 0..CROP_SIZE {
                let p = Vec2::new(
                    center.x + (col as f64 - half) * d,
                    center.y + (row as f64 - half) * d,
                );
                assert_eq!(fast[row * CROP_SIZE + col], image.sample(p) as f32);
            }
        }
    }

    #[test]
    fn generated_objects_respect_invariants() {
        for seed in 0..200u64 {
            for d in Difficulty::ALL {
                let o = generate_object(seed, d);
                assert!(geometry::is_simple(&o.vertices), "{seed} {d:?}");
                assert!(geometry::signed_area(&o.vertices) > 0.0);
                let side = o.bounding_box_max_side();
                assert!((0.02..=0.20).contains(&side), "{seed} {d:?} side {side}");
                let (lo, hi) = d.mass_range();
                assert!(o.mass >= lo && o.mass <= hi);
                assert!((0.4..=0.8).contains(&o.friction_mu));
                assert!(o.com.norm() < 1e-9);
                assert!(o.parts.len() <= 3);
                for p in &o.parts {
                    assert!(geometry::is_convex_ccw(p));
                }
                let parts_area: f64 = o.parts.iter().map(|p| geometry::signed_area(p)).sum();
                assert!((parts_area - o.area()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn easy_objects_are_convex_with_4_to_6_vertices() {
        for seed in 0..100 {
            let o = generate_object(seed, Difficulty::Easy);
            assert!((4..=6).contains(&o.vertices.len()));
            assert!(geometry::is_convex_ccw(&o.vertices));
        }
    }

    #[test]
    fn scene_rejects_out_of_workspace_pose() {
        let o = ObjectShape::rectangle(0.08, 0.03, 0.2, 0.6, 1).unwrap();
        assert!(Scene::new(o.clone(), Pose::new(0.2, 0.2, 0.0), 0).is_ok());
        assert!(Scene::new(o, Pose::new(0.01, 0.2, 0.0), 0).is_err());
    }

    #[test]
    fn random_scenes_stay_inside() {
        for seed in 0..200 {
            let o = generate_object(seed, Difficulty::Hard);
            let s = Scene::random(o.clone(), seed);
            assert!(Scene::new(o, s.pose, seed).is_ok());
        }
    }

    #[test]
    fn object_constructor_validates() {
        let cw = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 0.1),
            Vec2::new(0.1, 0.1),
            Vec2::new(0.1, 0.0),
        ];
        assert!(ObjectShape::convex(cw, 0.2, 0.5, 0).is_err());
        assert!(ObjectShape::rectangle(0.05, 0.02, 0.2, 1.5, 0).is_err());
        assert!(ObjectShape::rectangle(0.05, 0.02, -1.0, 0.5, 0).is_err());
    }

    #[test]
    fn rendered_interior_is_bright() {
        let o = generate_object(3, Difficulty::Medium);
        let s = Scene::random(o, 3);
        let img = render_scene(&s);
        assert!(img.count_nonzero() > 0);
        assert!(img
            .pixels
            .iter()
            .all(|&v| v == 0.0 || (0.2..=0.8).contains(&v)));
    }

    #[test]
    fn patch_values_stay_in_unit_range() {
        let s = Scene::random(generate_object(5, Difficulty::Easy), 5);
        let img = render_scene(&s);
        let p = extract_rotated_patch(&img, Vec2::new(0.2, 0.2), 0.9);
        assert_eq!(p.pixels.len(), PATCH_LEN);
        assert!(p.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
