use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{ItemRole, LayoutItem, LayoutPlan, category_of};
use crate::scene::RoomConfig;

const EPS: f64 = 1e-6;

/// Unit front-face edge `u` and front direction `v` in grid coordinates
/// (y down). Right angles are exact.
pub(crate) fn grid_axes(theta: f64) -> ((f64, f64), (f64, f64)) {
    let t = theta.rem_euclid(360.0);
    let (s, c) = match t {
        0.0 => (0.0, 1.0),
        90.0 => (1.0, 0.0),
        180.0 => (0.0, -1.0),
        270.0 => (-1.0, 0.0),
        _ => t.to_radians().sin_cos(),
    };
    ((c, s), (s, -c))
}

/// Rotated footprint rectangle in grid units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub center: (f64, f64),
    /// Along the front face.
    pub u: (f64, f64),
    /// Front direction.
    pub v: (f64, f64),
    pub half_front: f64,
    pub half_side: f64,
}

fn dot(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

impl Footprint {
    pub fn new(center: (f64, f64), theta: f64, front: f64, side: f64) -> Self {
        let (u, v) = grid_axes(theta);
        Self {
            center,
            u,
            v,
            half_front: front / 2.0,
            half_side: side / 2.0,
        }
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (cx, cy) = self.center;
        let (fu, fv) = ((self.u.0 * self.half_front, self.u.1 * self.half_front), (self.v.0 * self.half_side, self.v.1 * self.half_side));
        [
            (cx - fu.0 - fv.0, cy - fu.1 - fv.1),
            (cx + fu.0 - fv.0, cy + fu.1 - fv.1),
            (cx + fu.0 + fv.0, cy + fu.1 + fv.1),
            (cx - fu.0 + fv.0, cy - fu.1 + fv.1),
        ]
    }

    fn radius_along(&self, n: (f64, f64)) -> f64 {
        self.half_front * dot(self.u, n).abs() + self.half_side * dot(self.v, n).abs()
    }

    /// Interiors intersect by more than `eps` along every separating axis
    /// candidate. Touching edges do not overlap.
    pub fn overlaps(&self, o: &Footprint, eps: f64) -> bool {
        let d = (o.center.0 - self.center.0, o.center.1 - self.center.1);
        [self.u, self.v, o.u, o.v]
            .into_iter()
            .all(|n| dot(d, n).abs() < self.radius_along(n) + o.radius_along(n) - eps)
    }

    pub fn contains_point(&self, p: (f64, f64), eps: f64) -> bool {
        let d = (p.0 - self.center.0, p.1 - self.center.1);
        dot(d, self.u).abs() <= self.half_front + eps && dot(d, self.v).abs() <= self.half_side + eps
    }

    pub fn contains(&self, o: &Footprint, eps: f64) -> bool {
        o.corners().into_iter().all(|c| self.contains_point(c, eps))
    }

    pub fn within(&self, limit: f64, eps: f64) -> bool {
        self.corners()
            .into_iter()
            .all(|(x, y)| x.is_finite() && y.is_finite() && (-eps..=limit + eps).contains(&x) && (-eps..=limit + eps).contains(&y))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("`{label}` leaves the 300×300 area")]
    OutOfBounds { label: String },
    #[error("`{a}` and `{b}` overlap on the floor")]
    GroundedOverlap { a: String, b: String },
    #[error("accessory `{label}` does not stand on anything")]
    UnsupportedAccessory { label: String },
    #[error("`{top}` does not fit on top of `{down}`")]
    SupporterTooSmall { top: String, down: String },
    #[error("`{label}` is not one of the items to place")]
    UnknownItem { label: String },
    #[error("`{label}` is missing from the layout")]
    MissingItem { label: String },
    #[error("relation ({top}, {down}) is invalid: {reason}")]
    InvalidRelation { top: String, down: String, reason: String },
}

/// Footprint of a plan entry in grid units, if its category has a size.
pub(crate) fn entry_footprint(plan: &LayoutPlan, label: &str, sizes: &BTreeMap<String, LayoutItem>, room: &RoomConfig) -> Option<Footprint> {
    let e = plan.entry(label)?;
    let item = sizes.get(category_of(&e.label))?;
    let mpu = room.meters_per_unit();
    Some(Footprint::new((e.grid_x, e.grid_y), e.theta, item.front / mpu, item.side / mpu))
}

/// Every problem found in `plan`; empty means sound. `sizes` is keyed by
/// category, in meters.
pub fn validate_layout(plan: &LayoutPlan, sizes: &BTreeMap<String, LayoutItem>, room: &RoomConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let limit = room.grid_units as f64;
    let mut footprints: BTreeMap<&str, Footprint> = BTreeMap::new();

    for e in &plan.entries {
        match entry_footprint(plan, &e.label, sizes, room) {
            Some(fp) => {
                if !fp.within(limit, EPS) || !e.theta.is_finite() {
                    out.push(Violation::OutOfBounds { label: e.label.clone() });
                }
                footprints.insert(&e.label, fp);
            }
            None => out.push(Violation::UnknownItem { label: e.label.clone() }),
        }
    }

    let mut tops = BTreeSet::new();
    for r in &plan.relations {
        let invalid = |reason: &str| Violation::InvalidRelation {
            top: r.top.clone(),
            down: r.down.clone(),
            reason: reason.to_string(),
        };
        if plan.entry(&r.top).is_none() || plan.entry(&r.down).is_none() {
            out.push(invalid("unknown item"));
            continue;
        }
        if r.top == r.down {
            out.push(invalid("item placed on itself"));
            continue;
        }
        if !tops.insert(r.top.as_str()) {
            out.push(invalid("item already has a supporter"));
            continue;
        }
        if let (Some(t), Some(d)) = (footprints.get(r.top.as_str()), footprints.get(r.down.as_str()))
            && !d.contains(t, EPS)
        {
            out.push(Violation::SupporterTooSmall {
                top: r.top.clone(),
                down: r.down.clone(),
            });
        }
    }
    if let Some(label) = first_cycle(plan) {
        out.push(Violation::InvalidRelation {
            top: label.clone(),
            down: plan.supporter(&label).unwrap_or_default().to_string(),
            reason: "relations form a cycle".into(),
        });
    }

    let role = |label: &str| sizes.get(category_of(label)).map(|i| i.role);
    for e in &plan.entries {
        if role(&e.label) == Some(ItemRole::Accessory) && !tops.contains(e.label.as_str()) {
            out.push(Violation::UnsupportedAccessory { label: e.label.clone() });
        }
    }

    let floor: Vec<(&str, &Footprint)> = plan
        .entries
        .iter()
        .filter(|e| role(&e.label) == Some(ItemRole::Grounded) && !tops.contains(e.label.as_str()))
        .filter_map(|e| footprints.get(e.label.as_str()).map(|f| (e.label.as_str(), f)))
        .collect();
    for (i, (a, fa)) in floor.iter().enumerate() {
        for (b, fb) in &floor[i + 1..] {
            if fa.overlaps(fb, EPS) {
                out.push(Violation::GroundedOverlap {
                    a: a.to_string(),
                    b: b.to_string(),
                });
            }
        }
    }
    out
}

/// Some label on a supporter cycle, if any.
pub(crate) fn first_cycle(plan: &LayoutPlan) -> Option<String> {
    for start in &plan.relations {
        let mut seen = BTreeSet::new();
        let mut cur = start.top.as_str();
        while let Some(next) = plan.supporter(cur) {
            if !seen.insert(cur) {
                return Some(cur.to_string());
            }
            cur = next;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{LayoutEntry, StackRelation};

    fn entry(label: &str, x: f64, y: f64, theta: f64) -> LayoutEntry {
        LayoutEntry {
            label: label.into(),
            grid_x: x,
            grid_y: y,
            theta,
        }
    }

    fn sizes() -> BTreeMap<String, LayoutItem> {
        let g = |f, s| LayoutItem {
            front: f,
            side: s,
            height: 0.75,
            role: ItemRole::Grounded,
        };
        [
            ("table".to_string(), g(1.2, 0.8)),
            ("box".to_string(), g(2.0, 2.0)),
            (
                "mug".to_string(),
                LayoutItem {
                    front: 0.1,
                    side: 0.1,
                    height: 0.1,
                    role: ItemRole::Accessory,
                },
            ),
        ]
        .into()
    }

    #[test]
    fn centered_table_is_clean() {
        let plan = LayoutPlan {
            entries: vec![entry("table", 150.0, 150.0, 0.0)],
            relations: vec![],
        };
        assert!(validate_layout(&plan, &sizes(), &RoomConfig::default()).is_empty());
    }

    #[test]
    fn out_of_bounds() {
        let plan = LayoutPlan {
            entries: vec![entry("table", 310.0, 50.0, 0.0)],
            relations: vec![],
        };
        assert_eq!(
            validate_layout(&plan, &sizes(), &RoomConfig::default()),
            [Violation::OutOfBounds { label: "table".into() }]
        );
        // 1.2 m = 60 units: at x = 20 the rotated-by-0 table reaches x = -10.
        let plan = LayoutPlan {
            entries: vec![entry("table", 20.0, 150.0, 0.0)],
            relations: vec![],
        };
        assert_eq!(validate_layout(&plan, &sizes(), &RoomConfig::default()).len(), 1);
        // turned 90 degrees the 0.8 m side runs along x: reaches x = 0 exactly.
        let plan = LayoutPlan {
            entries: vec![entry("table", 20.0, 150.0, 90.0)],
            relations: vec![],
        };
        assert!(validate_layout(&plan, &sizes(), &RoomConfig::default()).is_empty());
    }

    #[test]
    fn coincident_boxes_overlap() {
        let plan = LayoutPlan {
            entries: vec![entry("box 1", 150.0, 150.0, 0.0), entry("box 2", 150.0, 150.0, 45.0)],
            relations: vec![],
        };
        assert_eq!(
            validate_layout(&plan, &sizes(), &RoomConfig::default()),
            [Violation::GroundedOverlap {
                a: "box 1".into(),
                b: "box 2".into()
            }]
        );
    }

    #[test]
    fn rotated_sat_cases() {
        // Unit squares 1.2 apart do not touch; rotating one by 45 degrees
        // pushes its corner to 0.5 + 0.7071 > 1.2 - 0.5.
        let a = Footprint::new((0.0, 0.0), 0.0, 1.0, 1.0);
        let b = Footprint::new((1.2, 0.0), 0.0, 1.0, 1.0);
        assert!(!a.overlaps(&b, 1e-9));
        let b45 = Footprint::new((1.2, 0.0), 45.0, 1.0, 1.0);
        assert!(a.overlaps(&b45, 1e-9));
        // Touching edges are not an overlap.
        let c = Footprint::new((1.0, 0.0), 0.0, 1.0, 1.0);
        assert!(!a.overlaps(&c, 1e-9));
    }

    #[test]
    fn accessory_rules() {
        let room = RoomConfig::default();
        let plan = LayoutPlan {
            entries: vec![entry("table", 150.0, 150.0, 0.0), entry("mug", 150.0, 150.0, 0.0)],
            relations: vec![],
        };
        assert_eq!(
            validate_layout(&plan, &sizes(), &room),
            [Violation::UnsupportedAccessory { label: "mug".into() }]
        );
        let on = |x| LayoutPlan {
            entries: vec![entry("table", 150.0, 150.0, 0.0), entry("mug", x, 150.0, 0.0)],
            relations: vec![StackRelation {
                top: "mug".into(),
                down: "table".into(),
            }],
        };
        assert!(validate_layout(&on(160.0), &sizes(), &room).is_empty());
        assert_eq!(
            validate_layout(&on(200.0), &sizes(), &room),
            [Violation::SupporterTooSmall {
                top: "mug".into(),
                down: "table".into()
            }]
        );
    }

    #[test]
    fn cycles_and_unknowns() {
        let plan = LayoutPlan {
            entries: vec![entry("table 1", 100.0, 150.0, 0.0), entry("table 2", 200.0, 150.0, 0.0), entry("sofa", 150.0, 50.0, 0.0)],
            relations: vec![
                StackRelation {
                    top: "table 1".into(),
                    down: "table 2".into(),
                },
                StackRelation {
                    top: "table 2".into(),
                    down: "table 1".into(),
                },
            ],
        };
        let v = validate_layout(&plan, &sizes(), &RoomConfig::default());
        assert!(v.contains(&Violation::UnknownItem { label: "sofa".into() }));
        assert!(v.iter().any(|x| matches!(x, Violation::InvalidRelation { reason, .. } if reason.contains("cycle"))));
    }
}
