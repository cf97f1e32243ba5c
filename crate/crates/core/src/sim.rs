//! Physics-lite parallel-jaw grasping: contact geometry, a scalar grasp
//! margin, and the shake and snatch perturbations that can dislodge a held
//! object.
//!
//! Conventions: a grasp at angle `θ` has its fingers' palm line along
//! `(cos θ, sin θ)`; the jaws close along the perpendicular
//! `(−sin θ, cos θ)`. All queries are evaluated in the object frame.

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{self, Pose, Vec2};
use crate::math::{self, atan, G};
use crate::scene::{ObjectShape, WORKSPACE_SIZE};

pub const N_ANGLE_BINS: usize = 18;
pub const N_SHAKE_ACTIONS: usize = 15;
pub const N_SNATCH_ACTIONS: usize = 36;
/// Spacing of the 3×3 snatch offset grid, metres.
pub const SNATCH_GRID_SPACING: f64 = 0.02;

/// Planar grasp with the angle discretised into 10° bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspAction {
    pub x: f64,
    pub y: f64,
    pub theta_bin: u8,
}

impl GraspAction {
    pub fn new(x: f64, y: f64, theta_bin: u8) -> Result<Self> {
        if theta_bin as usize >= N_ANGLE_BINS {
            return Err(Error::invalid("theta_bin", "must lie in 0..=17"));
        }
        if !(0.0..=WORKSPACE_SIZE).contains(&x) || !(0.0..=WORKSPACE_SIZE).contains(&y) {
            return Err(Error::invalid(
                "grasp",
                "centre must lie inside the workspace",
            ));
        }
        Ok(GraspAction { x, y, theta_bin })
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn angle(&self) -> f64 {
        bin_angle(self.theta_bin as usize)
    }
}

#[inline]
pub fn bin_angle(bin: usize) -> f64 {
    bin as f64 * PI / N_ANGLE_BINS as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdversaryKind {
    Shake,
    Snatch,
}

impl AdversaryKind {
    pub fn n_actions(self) -> usize {
        match self {
            AdversaryKind::Shake => N_SHAKE_ACTIONS,
            AdversaryKind::Snatch => N_SNATCH_ACTIONS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::Shake => "shake",
            AdversaryKind::Snatch => "snatch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shake" => Some(AdversaryKind::Shake),
            "snatch" => Some(AdversaryKind::Snatch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdversaryAction {
    pub kind: AdversaryKind,
    pub index: u8,
}

impl AdversaryAction {
    pub fn new(kind: AdversaryKind, index: usize) -> Result<Self> {
        if index >= kind.n_actions() {
            return Err(Error::invalid("index", "adversary action out of range"));
        }
        Ok(AdversaryAction {
            kind,
            index: index as u8,
        })
    }

    pub fn shake(index: usize) -> Result<Self> {
        Self::new(AdversaryKind::Shake, index)
    }

    pub fn snatch(index: usize) -> Result<Self> {
        Self::new(AdversaryKind::Snatch, index)
    }
}

/// Shake index `3·o + d` as `(orientation o ∈ 0..5, direction d ∈ 0..3)`.
pub fn decode_shake(index: usize) -> (usize, usize) {
    (index / 3, index % 3)
}

pub fn encode_shake(orientation: usize, direction: usize) -> usize {
    3 * orientation + direction
}

/// Snatch index `4·t + r` as `(grid cell t ∈ 0..9, angle step r ∈ 0..4)`.
pub fn decode_snatch(index: usize) -> (usize, usize) {
    (index / 4, index % 4)
}

pub fn encode_snatch(cell: usize, angle_step: usize) -> usize {
    4 * cell + angle_step
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Jaw clamping force, N.
    pub grip_force: f64,
    /// Heaviest liftable object, kg.
    pub max_payload: f64,
    /// Maximum jaw opening, m.
    pub w_max: f64,
    pub shake_freq: f64,
    pub shake_amp: f64,
    /// Lever gain λ turning COM offset into extra shake load, 1/m.
    pub lever_gain: f64,
    /// Pull force of the snatching gripper, N.
    pub pull_force: f64,
    /// Minimum allowed distance between the two grippers' jaw segments, m.
    pub clearance: f64,
    /// Multiplier on object friction (rubber finger pads).
    pub friction_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grip_force: 7.0,
            max_payload: 2.2,
            w_max: 0.06,
            shake_freq: 2.0,
            shake_amp: 0.025,
            lever_gain: 20.0,
            pull_force: 10.0,
            clearance: 0.01,
            friction_scale: 1.0,
        }
    }
}

impl SimConfig {
    /// Full-force evaluation setting with rubber pads.
    pub fn high_force() -> Self {
        SimConfig {
            grip_force: 35.0,
            friction_scale: 1.25,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("grip_force", self.grip_force),
            ("max_payload", self.max_payload),
            ("w_max", self.w_max),
            ("shake_freq", self.shake_freq),
            ("shake_amp", self.shake_amp),
            ("lever_gain", self.lever_gain),
            ("pull_force", self.pull_force),
            ("clearance", self.clearance),
            ("friction_scale", self.friction_scale),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    /// Peak acceleration of the sinusoidal shake, `A·(2πf)²`.
    pub fn shake_peak_accel(&self) -> f64 {
        let w = 2.0 * PI * self.shake_freq;
        self.shake_amp * w * w
    }

    pub fn effective_mu(&self, object: &ObjectShape) -> f64 {
        (object.friction_mu * self.friction_scale).min(1.0)
    }
}

/// Two contact points (world frame) and the outward edge normals there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contacts {
    pub points: [Vec2; 2],
    pub normals: [Vec2; 2],
}

impl Contacts {
    pub fn width(&self) -> f64 {
        (self.points[1] - self.points[0]).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspOutcome {
    pub success: bool,
    pub margin: f64,
    pub width: f64,
    pub contacts: Option<Contacts>,
    pub com_offset: f64,
    /// Worse contact-normal misalignment with the jaw axis, rad.
    pub misalignment: f64,
}

impl GraspOutcome {
    fn failed(width: f64, contacts: Option<Contacts>, com_offset: f64, misalignment: f64) -> Self {
        GraspOutcome {
            success: false,
            margin: 0.0,
            width,
            contacts,
            com_offset,
            misalignment,
        }
    }
}

/// Jaw closing direction for a grasp at `angle`.
#[inline]
pub fn jaw_axis(angle: f64) -> Vec2 {
    Vec2::from_angle(angle).perp()
}

/// Intersects the jaw closing line through `center` with the object boundary
/// and returns the two outermost crossings, provided the centre lies
/// between them.
pub fn contacts_at(
    object: &ObjectShape,
    pose: &Pose,
    center: Vec2,
    angle: f64,
) -> Option<Contacts> {
    let origin = pose.to_local(center);
    let dir = pose.dir_to_local(jaw_axis(angle));
    let crossings = geometry::line_crossings(&object.vertices, origin, dir);
    if crossings.len() < 2 {
        return None;
    }
    let lo = crossings
        .iter()
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .copied()?;
    let hi = crossings
        .iter()
        .max_by(|a, b| a.t.total_cmp(&b.t))
        .copied()?;
    if !(lo.t < 0.0 && hi.t > 0.0) {
        return None;
    }
    let p0 = origin + dir * lo.t;
    let p1 = origin + dir * hi.t;
    let n0 = geometry::edge_normal(&object.vertices, lo.edge);
    let n1 = geometry::edge_normal(&object.vertices, hi.edge);
    Some(Contacts {
        points: [pose.to_world(p0), pose.to_world(p1)],
        normals: [n0.rotate(pose.phi), n1.rotate(pose.phi)],
    })
}

pub fn grasp_contacts(object: &ObjectShape, pose: &Pose, grasp: &GraspAction) -> Option<Contacts> {
    contacts_at(object, pose, grasp.center(), grasp.angle())
}

/// Grasp evaluation at an arbitrary (continuous) angle.
///
/// Success requires contacts, an opening within `w_max`, both contact
/// normals inside the friction cone around the jaw axis, the centre of mass
/// within one grasp width of the grasp axis, and a liftable mass. The margin
/// multiplies an alignment, a centring and a force term.
pub fn grasp_margin_at(
    object: &ObjectShape,
    pose: &Pose,
    center: Vec2,
    angle: f64,
    config: &SimConfig,
) -> GraspOutcome {
    let Some(contacts) = contacts_at(object, pose, center, angle) else {
        return GraspOutcome::failed(0.0, None, 0.0, 0.0);
    };
    let width = contacts.width();
    let axis = jaw_axis(angle);
    // The first contact is hit moving along −axis, so its outward normal
    // should point along −axis; the second along +axis.
    let phi0 = math::acos(contacts.normals[0].dot(-axis));
    let phi1 = math::acos(contacts.normals[1].dot(axis));
    let misalignment = phi0.max(phi1);
    let com_world = pose.to_world(object.com);
    let com_offset = axis.cross(com_world - contacts.points[0]).abs();

    let mu = config.effective_mu(object);
    let cone = atan(mu);
    let ok = width <= config.w_max
        && misalignment < cone
        && com_offset < width
        && object.mass <= config.max_payload;
    if !ok {
        return GraspOutcome::failed(width, Some(contacts), com_offset, misalignment);
    }
    let m_a = 1.0 - misalignment / cone;
    let m_c = 1.0 - com_offset / width;
    let m_f = (2.0 * mu * config.grip_force / (3.0 * object.mass * G)).min(1.0);
    let margin = m_a * m_c * m_f;
    if margin <= 0.0 {
        return GraspOutcome::failed(width, Some(contacts), com_offset, misalignment);
    }
    GraspOutcome {
        success: true,
        margin,
        width,
        contacts: Some(contacts),
        com_offset,
        misalignment,
    }
}

pub fn grasp_margin(
    object: &ObjectShape,
    pose: &Pose,
    grasp: &GraspAction,
    config: &SimConfig,
) -> GraspOutcome {
    grasp_margin_at(object, pose, grasp.center(), grasp.angle(), config)
}

/// Frictional holding force of a successful grasp, `2·μ·F·margin`.
pub fn hold_force(outcome: &GraspOutcome, object: &ObjectShape, config: &SimConfig) -> f64 {
    2.0 * config.effective_mu(object) * config.grip_force * outcome.margin
}

/// Whether a successful grasp keeps the object while it is lifted clear of
/// the table: the hold must carry the object's weight.
pub fn lift_holds(outcome: &GraspOutcome, object: &ObjectShape, config: &SimConfig) -> bool {
    outcome.success && hold_force(outcome, object, config) >= object.mass * G
}

/// Severity of shake `index`, `0.25 + 0.75·|v·ŝ|`.
///
/// Orientation `o` rolls the wrist by `ψ_o = 45°·o` about the approach
/// axis, carrying the jaw (slip) axis to `(cos ψ, sin ψ, 0)` in the grasp
/// frame; direction `d` shakes along the grasp frame's x, y or z axis.
pub fn shake_severity(index: usize) -> f64 {
    let (o, d) = decode_shake(index);
    let psi = o as f64 * PI / 4.0;
    let slip = [math::cos(psi), math::sin(psi), 0.0];
    0.25 + 0.75 * slip[d].abs()
}

/// Gravity plus shake load on the held object, N.
pub fn shake_demand(
    outcome: &GraspOutcome,
    object: &ObjectShape,
    config: &SimConfig,
    index: usize,
) -> f64 {
    let a = config.shake_peak_accel();
    let sigma = shake_severity(index);
    object.mass * (G + a * sigma * (1.0 + config.lever_gain * outcome.com_offset))
}

fn require_success(outcome: &GraspOutcome) -> Result<()> {
    if outcome.success {
        Ok(())
    } else {
        Err(Error::Contract("perturbation applied to a failed grasp"))
    }
}

/// Whether shake `action` dislodges the object held by `outcome`.
pub fn apply_shake(
    outcome: &GraspOutcome,
    object: &ObjectShape,
    config: &SimConfig,
    action: AdversaryAction,
) -> Result<bool> {
    require_success(outcome)?;
    if action.kind != AdversaryKind::Shake {
        return Err(Error::Contract("apply_shake needs a shake action"));
    }
    let demand = shake_demand(outcome, object, config, action.index as usize);
    Ok(demand > hold_force(outcome, object, config))
}

/// World-frame centre and angle of the snatching gripper for `index`,
/// relative to the protagonist grasp at `(center, angle)`.
pub fn snatch_pose(center: Vec2, angle: f64, index: usize) -> (Vec2, f64) {
    let (cell, step) = decode_snatch(index);
    let dx = (cell % 3) as f64 - 1.0;
    let dy = (cell / 3) as f64 - 1.0;
    let offset = Vec2::new(dx, dy) * SNATCH_GRID_SPACING;
    (
        center + offset.rotate(angle),
        angle + step as f64 * PI / 4.0,
    )
}

/// Detailed snatch result: the second gripper's grasp, whether it was
/// executable, and whether it pulled the object free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnatchResult {
    pub grasp: GraspOutcome,
    pub valid: bool,
    pub dislodged: bool,
}

pub fn snatch_outcome(
    outcome: &GraspOutcome,
    center: Vec2,
    angle: f64,
    object: &ObjectShape,
    pose: &Pose,
    config: &SimConfig,
    index: usize,
) -> SnatchResult {
    let (adv_center, adv_angle) = snatch_pose(center, angle, index);
    let adv_cfg = SimConfig {
        grip_force: config.pull_force,
        ..*config
    };
    let adv = grasp_margin_at(object, pose, adv_center, adv_angle, &adv_cfg);
    let clear = match (adv.contacts, outcome.contacts) {
        (Some(a), Some(p)) => {
            geometry::segment_distance(a.points[0], a.points[1], p.points[0], p.points[1])
                >= config.clearance
        }
        _ => false,
    };
    let valid = adv.success && clear;
    let dislodged = valid && config.pull_force * adv.margin > hold_force(outcome, object, config);
    SnatchResult {
        grasp: adv,
        valid,
        dislodged,
    }
}

/// Whether snatch `action` pulls the object out of the protagonist's grasp.
pub fn apply_snatch(
    outcome: &GraspOutcome,
    grasp: &GraspAction,
    object: &ObjectShape,
    pose: &Pose,
    config: &SimConfig,
    action: AdversaryAction,
) -> Result<bool> {
    require_success(outcome)?;
    if action.kind != AdversaryKind::Snatch {
        return Err(Error::Contract("apply_snatch needs a snatch action"));
    }
    let r = snatch_outcome(
        outcome,
        grasp.center(),
        grasp.angle(),
        object,
        pose,
        config,
        action.index as usize,
    );
    Ok(r.dislodged)
}

/// Applies any adversary action to a successful grasp.
pub fn apply_adversary(
    outcome: &GraspOutcome,
    grasp: &GraspAction,
    object: &ObjectShape,
    pose: &Pose,
    config: &SimConfig,
    action: AdversaryAction,
) -> Result<bool> {
    match action.kind {
        AdversaryKind::Shake => apply_shake(outcome, object, config, action),
        AdversaryKind::Snatch => apply_snatch(outcome, grasp, object, pose, config, action),
    }
}

/// Whether any action of `kind` dislodges the grasp (the best response).
pub fn dislodgeable(
    outcome: &GraspOutcome,
    grasp: &GraspAction,
    object: &ObjectShape,
    pose: &Pose,
    config: &SimConfig,
    kind: AdversaryKind,
) -> Result<bool> {
    for i in 0..kind.n_actions() {
        let a = AdversaryAction::new(kind, i)?;
        if apply_adversary(outcome, grasp, object, pose, config, a)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Fraction of the `kind` action space that dislodges the grasp, i.e. the
/// expected success of a uniformly random adversary.
pub fn dislodge_fraction(
    outcome: &GraspOutcome,
    grasp: &GraspAction,
    object: &ObjectShape,
    pose: &Pose,
    config: &SimConfig,
    kind: AdversaryKind,
) -> Result<f64> {
    let mut hits = 0usize;
    for i in 0..kind.n_actions() {
        let a = AdversaryAction::new(kind, i)?;
        if apply_adversary(outcome, grasp, object, pose, config, a)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / kind.n_actions() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(mass: f64) -> ObjectShape {
        ObjectShape::rectangle(0.08, 0.03, mass, 0.6, 11).unwrap()
    }

    const CENTER: Pose = Pose::new(0.2, 0.2, 0.0);

    #[test]
    fn action_ranges_are_checked() {
        assert!(AdversaryAction::shake(14).is_ok());
        assert!(AdversaryAction::shake(15).is_err());
        assert!(AdversaryAction::snatch(35).is_ok());
        assert!(AdversaryAction::snatch(36).is_err());
        assert!(GraspAction::new(0.1, 0.1, 18).is_err());
        assert!(GraspAction::new(0.5, 0.1, 0).is_err());
    }

    #[test]
    fn perturbations_reject_failed_grasps() {
        let o = rect(0.2);
        let g = GraspAction::new(0.01, 0.01, 0).unwrap();
        let out = grasp_margin(&o, &CENTER, &g, &SimConfig::default());
        assert!(!out.success);
        let cfg = SimConfig::default();
        assert!(apply_shake(&out, &o, &cfg, AdversaryAction::shake(0).unwrap()).is_err());
        assert!(apply_snatch(
            &out,
            &g,
            &o,
            &CENTER,
            &cfg,
            AdversaryAction::snatch(0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn severities_cover_expected_levels() {
        let mut full = 0;
        for i in 0..N_SHAKE_ACTIONS {
            let s = shake_severity(i);
            assert!((0.25..=1.0 + 1e-12).contains(&s));
            if (s - 1.0).abs() < 1e-12 {
                full += 1;
            }
        }
        assert_eq!(full, 3);
    }

    #[test]
    fn tilted_grasp_loses_alignment_margin() {
        let o = rect(0.2);
        let cfg = SimConfig::default();
        let straight = grasp_margin(&o, &CENTER, &GraspAction::new(0.2, 0.2, 0).unwrap(), &cfg);
        let tilted = grasp_margin(&o, &CENTER, &GraspAction::new(0.2, 0.2, 1).unwrap(), &cfg);
        assert!(straight.success && tilted.success);
        assert!(tilted.margin < straight.margin);
        assert!((tilted.misalignment - PI / 18.0).abs() < 1e-9);
    }

    #[test]
    fn lift_needs_weight_support() {
        let cfg = SimConfig::default();
        let g = GraspAction::new(0.2, 0.2, 0).unwrap();
        let light = rect(0.2);
        let out = grasp_margin(&light, &CENTER, &g, &cfg);
        assert!(lift_holds(&out, &light, &cfg));
        let heavy = rect(2.0);
        let out = grasp_margin(&heavy, &CENTER, &g, &cfg);
        assert!(out.success && !lift_holds(&out, &heavy, &cfg));
        let hi_cfg = SimConfig::high_force();
        let hi = grasp_margin(&heavy, &CENTER, &g, &hi_cfg);
        assert!(lift_holds(&hi, &heavy, &hi_cfg));
    }
}
