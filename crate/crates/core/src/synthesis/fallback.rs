use std::collections::BTreeMap;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::validate::{Footprint, grid_axes};
use super::{ItemRole, LayoutEntry, LayoutError, LayoutItem, LayoutPlan, StackRelation, instance_labels};
use crate::assets::{CategoryRequest, RelationGraph};
use crate::scene::RoomConfig;

const LATTICE: f64 = 10.0;
const LARGE_ITEM_METERS: f64 = 1.5;
const MAX_FILL: f64 = 0.6;
const CLEARANCE: f64 = 1e-3;

struct Pending {
    label: String,
    category: String,
    front: f64,
    side: f64,
    role: ItemRole,
    large: bool,
}

/// Wall along which an item stands, with the θ that faces into the room.
#[derive(Debug, Clone, Copy)]
enum Wall {
    Top,
    Bottom,
    Left,
    Right,
}

impl Wall {
    const ALL: [Wall; 4] = [Wall::Top, Wall::Bottom, Wall::Left, Wall::Right];

    fn theta(self) -> f64 {
        match self {
            Wall::Top => 180.0,
            Wall::Bottom => 0.0,
            Wall::Left => 90.0,
            Wall::Right => 270.0,
        }
    }

    /// Centers along the wall, middle outward, with the back flush to it.
    fn slots(self, front: f64, side: f64, limit: f64) -> Vec<(f64, f64)> {
        let half_f = front / 2.0;
        let depth = side / 2.0 + CLEARANCE;
        let mid = limit / 2.0;
        let mut along: Vec<f64> = Vec::new();
        let mut k = 0.0;
        while mid - k >= half_f || mid + k <= limit - half_f {
            for a in [mid - k, mid + k] {
                if a - half_f >= 0.0 && a + half_f <= limit && !along.contains(&a) {
                    along.push(a);
                }
            }
            k += LATTICE;
        }
        along
            .into_iter()
            .map(|a| match self {
                Wall::Top => (a, depth),
                Wall::Bottom => (a, limit - depth),
                Wall::Left => (depth, a),
                Wall::Right => (limit - depth, a),
            })
            .collect()
    }
}

/// θ in {0, 90, 180, 270} whose front points most nearly at the center.
fn facing_center(p: (f64, f64), limit: f64) -> f64 {
    let d = (limit / 2.0 - p.0, limit / 2.0 - p.1);
    let mut best = (0.0, f64::NEG_INFINITY);
    for theta in [0.0, 90.0, 180.0, 270.0] {
        let (_, v) = grid_axes(theta);
        let score = v.0 * d.0 + v.1 * d.1;
        if score > best.1 + 1e-12 {
            best = (theta, score);
        }
    }
    best.0
}

/// Deterministic layout for when no usable LLM answer exists.
///
/// Large grounded items go against the walls, the rest fill a lattice from
/// the center outward, accessories sit centered on a supporter and
/// wall-mounted items line the walls. `seed` breaks ties.
pub fn fallback_layout(
    items: &[CategoryRequest],
    sizes: &BTreeMap<String, LayoutItem>,
    relations_hint: &RelationGraph,
    room: &RoomConfig,
    seed: u64,
) -> Result<LayoutPlan, LayoutError> {
    let mpu = room.meters_per_unit();
    let limit = room.grid_units as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pending = Vec::new();
    for r in items {
        let item = sizes.get(&r.category).ok_or_else(|| LayoutError::MissingSize(r.category.clone()))?;
        for label in instance_labels(&r.category, r.count) {
            pending.push(Pending {
                label,
                category: r.category.clone(),
                front: item.front / mpu,
                side: item.side / mpu,
                role: item.role,
                large: item.front.max(item.side) >= LARGE_ITEM_METERS,
            });
        }
    }

    let floor_area: f64 = pending.iter().filter(|p| p.role == ItemRole::Grounded).map(|p| p.front * p.side).sum();
    if floor_area > MAX_FILL * limit * limit {
        return Err(LayoutError::DoesNotFit(format!(
            "grounded footprints cover {:.0}% of the floor",
            100.0 * floor_area / (limit * limit)
        )));
    }

    let mut placed: BTreeMap<String, LayoutEntry> = BTreeMap::new();
    let mut relations = Vec::new();
    let mut floor: Vec<Footprint> = Vec::new();

    let mut grounded: Vec<&Pending> = pending.iter().filter(|p| p.role == ItemRole::Grounded).collect();
    grounded.sort_by(|a, b| (b.front * b.side).total_cmp(&(a.front * a.side)).then_with(|| a.label.cmp(&b.label)));

    let fits = |fp: &Footprint, others: &[Footprint]| fp.within(limit, 0.0) && others.iter().all(|o| !fp.overlaps(o, 1e-9));

    let mut lattice: Vec<(f64, f64)> = Vec::new();
    let mut x = LATTICE;
    while x < limit {
        let mut y = LATTICE;
        while y < limit {
            lattice.push((x, y));
            y += LATTICE;
        }
        x += LATTICE;
    }
    lattice.push((limit / 2.0, limit / 2.0));
    lattice.shuffle(&mut rng);
    let center = limit / 2.0;
    lattice.sort_by(|a, b| {
        let da = (a.0 - center).powi(2) + (a.1 - center).powi(2);
        let db = (b.0 - center).powi(2) + (b.1 - center).powi(2);
        da.total_cmp(&db)
    });
    lattice.dedup();

    for p in grounded {
        let mut spot = None;
        if p.large {
            let mut walls = Wall::ALL;
            walls.shuffle(&mut rng);
            'walls: for w in walls {
                for c in w.slots(p.front, p.side, limit) {
                    let fp = Footprint::new(c, w.theta(), p.front, p.side);
                    if fits(&fp, &floor) {
                        spot = Some((c, w.theta(), fp));
                        break 'walls;
                    }
                }
            }
        }
        if spot.is_none() {
            'scan: for &c in &lattice {
                let face = facing_center(c, limit);
                for theta in [face, (face + 90.0) % 360.0, (face + 180.0) % 360.0, (face + 270.0) % 360.0] {
                    let fp = Footprint::new(c, theta, p.front, p.side);
                    if fits(&fp, &floor) {
                        spot = Some((c, theta, fp));
                        break 'scan;
                    }
                }
            }
        }
        let Some((c, theta, fp)) = spot else {
            return Err(LayoutError::DoesNotFit(format!("no free floor space for `{}`", p.label)));
        };
        floor.push(fp);
        placed.insert(p.label.clone(), entry(&p.label, c, theta));
    }

    let mut wall_fps: Vec<Footprint> = Vec::new();
    for p in pending.iter().filter(|p| p.role == ItemRole::WallMounted) {
        let mut walls = Wall::ALL;
        walls.shuffle(&mut rng);
        let spot = walls.iter().find_map(|w| {
            w.slots(p.front, p.side, limit).into_iter().find_map(|c| {
                let fp = Footprint::new(c, w.theta(), p.front, p.side);
                fits(&fp, &wall_fps).then_some((c, w.theta(), fp))
            })
        });
        let Some((c, theta, fp)) = spot else {
            return Err(LayoutError::DoesNotFit(format!("no free wall space for `{}`", p.label)));
        };
        wall_fps.push(fp);
        placed.insert(p.label.clone(), entry(&p.label, c, theta));
    }

    // (front, side, category) of everything an accessory may stand on.
    let dims: BTreeMap<&str, (f64, f64, &str)> = pending
        .iter()
        .filter(|p| p.role != ItemRole::WallMounted)
        .map(|p| (p.label.as_str(), (p.front, p.side, p.category.as_str())))
        .collect();
    let mut load: BTreeMap<String, usize> = BTreeMap::new();
    for p in pending.iter().filter(|p| p.role == ItemRole::Accessory) {
        let preferred: Vec<&str> = relations_hint.prerequisites(&p.category).collect();
        let mut candidates: Vec<(&String, &LayoutEntry)> = placed
            .iter()
            .filter(|(l, _)| dims.get(l.as_str()).is_some_and(|d| d.2 != p.category))
            .collect();
        candidates.sort_by(|(a, _), (b, _)| {
            let (da, db) = (dims[a.as_str()], dims[b.as_str()]);
            let pa = !preferred.contains(&da.2);
            let pb = !preferred.contains(&db.2);
            pa.cmp(&pb)
                .then_with(|| load.get(*a).unwrap_or(&0).cmp(load.get(*b).unwrap_or(&0)))
                .then_with(|| (db.0 * db.1).total_cmp(&(da.0 * da.1)))
                .then_with(|| a.cmp(b))
        });
        let spot = candidates.into_iter().find_map(|(label, e)| {
            let (sf, ss, _) = dims[label.as_str()];
            let theta = if p.front <= sf && p.side <= ss {
                e.theta
            } else if p.front <= ss && p.side <= sf {
                (e.theta + 90.0) % 360.0
            } else {
                return None;
            };
            Some((label.clone(), (e.grid_x, e.grid_y), theta))
        });
        let Some((down, c, theta)) = spot else {
            return Err(LayoutError::DoesNotFit(format!("nothing large enough to hold `{}`", p.label)));
        };
        *load.entry(down.clone()).or_default() += 1;
        placed.insert(p.label.clone(), entry(&p.label, c, theta));
        relations.push(StackRelation {
            top: p.label.clone(),
            down,
        });
    }

    let entries = pending.iter().map(|p| placed.remove(&p.label).expect("every item placed")).collect();
    Ok(LayoutPlan { entries, relations })
}

fn entry(label: &str, c: (f64, f64), theta: f64) -> LayoutEntry {
    LayoutEntry {
        label: label.to_string(),
        grid_x: c.0,
        grid_y: c.1,
        theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::validate_layout;

    fn item(f: f64, s: f64, role: ItemRole) -> LayoutItem {
        LayoutItem {
            front: f,
            side: s,
            height: 0.5,
            role,
        }
    }

    #[test]
    fn one_table_is_centered() {
        let sizes = [("table".to_string(), item(1.2, 0.8, ItemRole::Grounded))].into();
        let plan = fallback_layout(&[CategoryRequest::new("table", 1)], &sizes, &RelationGraph::default(), &RoomConfig::default(), 3).unwrap();
        let e = &plan.entries[0];
        assert_eq!((e.grid_x, e.grid_y), (150.0, 150.0));
        assert!([0.0, 90.0, 180.0, 270.0].contains(&e.theta));
    }

    #[test]
    fn mug_sits_on_table_center() {
        let sizes = [
            ("table".to_string(), item(1.2, 0.8, ItemRole::Grounded)),
            ("mug".to_string(), item(0.1, 0.1, ItemRole::Accessory)),
        ]
        .into();
        let graph = RelationGraph::new(vec![("table".into(), "mug".into())]).unwrap();
        let items = [CategoryRequest::new("table", 1), CategoryRequest::new("mug", 1)];
        let plan = fallback_layout(&items, &sizes, &graph, &RoomConfig::default(), 0).unwrap();
        let (t, m) = (plan.entry("table").unwrap(), plan.entry("mug").unwrap());
        assert_eq!((t.grid_x, t.grid_y), (m.grid_x, m.grid_y));
        assert_eq!(
            plan.relations,
            [StackRelation {
                top: "mug".into(),
                down: "table".into()
            }]
        );
        assert!(validate_layout(&plan, &sizes, &RoomConfig::default()).is_empty());
    }

    #[test]
    fn too_much_floor() {
        let sizes = [("bed".to_string(), item(2.0, 2.0, ItemRole::Grounded))].into();
        let r = fallback_layout(&[CategoryRequest::new("bed", 6)], &sizes, &RelationGraph::default(), &RoomConfig::default(), 0);
        assert!(matches!(r, Err(LayoutError::DoesNotFit(_))));
    }
}
