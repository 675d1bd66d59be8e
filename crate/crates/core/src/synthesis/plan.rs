use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    LayoutError, LayoutItem, LayoutPlan, Violation, build_layout_prompt, category_of, fallback_layout, instance_labels, parse_layout,
    validate_layout,
};
use crate::assets::{CategoryRequest, RelationGraph};
use crate::llm::Llm;
use crate::scene::RoomConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutSource {
    Llm,
    LlmRetry,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutOutcome {
    pub plan: LayoutPlan,
    pub source: LayoutSource,
    /// Why earlier attempts were rejected, oldest first.
    pub rejections: Vec<String>,
}

/// Renames `x 1` to `x` when only one `x` is wanted; LLMs number eagerly.
fn normalize_labels(plan: &mut LayoutPlan, items: &[CategoryRequest]) {
    let singles: BTreeSet<&str> = items.iter().filter(|r| r.count == 1).map(|r| r.category.as_str()).collect();
    let mut renames: BTreeMap<String, String> = BTreeMap::new();
    for e in &plan.entries {
        if singles.contains(category_of(&e.label)) && e.label != category_of(&e.label) && plan.entry(category_of(&e.label)).is_none() {
            let n = plan.entries.iter().filter(|o| category_of(&o.label) == category_of(&e.label)).count();
            if n == 1 {
                renames.insert(e.label.clone(), category_of(&e.label).to_string());
            }
        }
    }
    for e in &mut plan.entries {
        if let Some(new) = renames.get(&e.label) {
            e.label = new.clone();
        }
    }
    for r in &mut plan.relations {
        for l in [&mut r.top, &mut r.down] {
            if let Some(new) = renames.get(l.as_str()) {
                *l = new.clone();
            }
        }
    }
}

fn coverage(plan: &LayoutPlan, items: &[CategoryRequest]) -> Vec<Violation> {
    let want: Vec<String> = items.iter().flat_map(|r| instance_labels(&r.category, r.count)).collect();
    let mut out: Vec<Violation> = want
        .iter()
        .filter(|l| plan.entry(l).is_none())
        .map(|l| Violation::MissingItem { label: l.clone() })
        .collect();
    out.extend(
        plan.entries
            .iter()
            .filter(|e| !want.contains(&e.label))
            .map(|e| Violation::UnknownItem { label: e.label.clone() }),
    );
    out
}

fn attempt(llm: &dyn Llm, system: &str, user: &str, items: &[CategoryRequest], sizes: &BTreeMap<String, LayoutItem>, room: &RoomConfig) -> Result<LayoutPlan, Vec<String>> {
    let raw = llm.complete(system, user).map_err(|e| vec![e.to_string()])?;
    let mut plan = parse_layout(&raw).map_err(|e| vec![e.to_string()])?;
    normalize_labels(&mut plan, items);
    let mut problems = coverage(&plan, items);
    for v in validate_layout(&plan, sizes, room) {
        if !problems.contains(&v) {
            problems.push(v);
        }
    }
    if problems.is_empty() { Ok(plan) } else { Err(problems.iter().map(ToString::to_string).collect()) }
}

/// Asks the LLM for a layout, retries once with the problems listed, then
/// falls back to [`fallback_layout`]. Without an LLM the fallback is used
/// directly.
pub fn plan_layout(
    user_prompt: &str,
    items: &[CategoryRequest],
    sizes: &BTreeMap<String, LayoutItem>,
    relations_hint: &RelationGraph,
    room: &RoomConfig,
    llm: Option<&dyn Llm>,
    seed: u64,
) -> Result<LayoutOutcome, LayoutError> {
    let mut rejections = Vec::new();
    if let Some(llm) = llm {
        let size_pairs: BTreeMap<String, (f64, f64)> = sizes.iter().map(|(k, v)| (k.clone(), (v.front, v.side))).collect();
        let (system, user) = build_layout_prompt(user_prompt, items, &size_pairs)?;
        match attempt(llm, &system, &user, items, sizes, room) {
            Ok(plan) => {
                return Ok(LayoutOutcome {
                    plan,
                    source: LayoutSource::Llm,
                    rejections,
                });
            }
            Err(problems) => {
                let retry_user = format!(
                    "{user}\nThe previous layout was rejected:\n{}\nReturn a corrected layout in the same output format.\n",
                    problems.iter().map(|p| format!("- {p}")).collect::<Vec<_>>().join("\n")
                );
                rejections.push(problems.join("; "));
                match attempt(llm, &system, &retry_user, items, sizes, room) {
                    Ok(plan) => {
                        return Ok(LayoutOutcome {
                            plan,
                            source: LayoutSource::LlmRetry,
                            rejections,
                        });
                    }
                    Err(problems) => rejections.push(problems.join("; ")),
                }
            }
        }
        log::warn!("layout LLM rejected twice, using fallback solver");
    }
    let plan = fallback_layout(items, sizes, relations_hint, room, seed)?;
    Ok(LayoutOutcome {
        plan,
        source: LayoutSource::Fallback,
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::LlmError;
    use crate::synthesis::ItemRole;
    use std::cell::Cell;

    fn sizes() -> BTreeMap<String, LayoutItem> {
        [
            (
                "table".to_string(),
                LayoutItem {
                    front: 1.2,
                    side: 0.8,
                    height: 0.75,
                    role: ItemRole::Grounded,
                },
            ),
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

    fn items() -> Vec<CategoryRequest> {
        vec![CategoryRequest::new("table", 1), CategoryRequest::new("mug", 1)]
    }

    #[test]
    fn accepts_good_answer() {
        let llm = |_: &str, _: &str| Ok::<_, LlmError>("Location:\nTable 1: (150, 150, 0)\nmug: (150, 150, 0)\nRelation:\n[(mug, table 1)]".to_string());
        let out = plan_layout("x", &items(), &sizes(), &RelationGraph::default(), &RoomConfig::default(), Some(&llm), 0).unwrap();
        assert_eq!(out.source, LayoutSource::Llm);
        assert_eq!(out.plan.relations[0].down, "table");
    }

    #[test]
    fn retries_with_problems_then_succeeds() {
        let calls = Cell::new(0);
        let llm = |_: &str, user: &str| {
            calls.set(calls.get() + 1);
            if calls.get() == 1 {
                Ok::<_, LlmError>("Location:\ntable: (150, 150, 0)\nmug: (150, 150, 0)\nRelation: []".to_string())
            } else {
                assert!(user.contains("accessory `mug` does not stand on anything"));
                Ok("Location:\ntable: (150, 150, 0)\nmug: (150, 150, 0)\nRelation: [(mug, table)]".to_string())
            }
        };
        let out = plan_layout("x", &items(), &sizes(), &RelationGraph::default(), &RoomConfig::default(), Some(&llm), 0).unwrap();
        assert_eq!(out.source, LayoutSource::LlmRetry);
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn falls_back_after_two_failures() {
        let llm = |_: &str, _: &str| Ok::<_, LlmError>("I cannot help with that.".to_string());
        let out = plan_layout("x", &items(), &sizes(), &RelationGraph::default(), &RoomConfig::default(), Some(&llm), 0).unwrap();
        assert_eq!(out.source, LayoutSource::Fallback);
        assert_eq!(out.rejections.len(), 2);
        assert!(validate_layout(&out.plan, &sizes(), &RoomConfig::default()).is_empty());
    }
}
