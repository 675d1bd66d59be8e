use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{LayoutEntry, LayoutPlan, StackRelation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseLayoutError {
    #[error("response has no `Location:` section")]
    MissingLocationSection,
    #[error("malformed tuple: {0}")]
    MalformedTuple(String),
    #[error("relation names unknown item `{0}`")]
    UnknownLabelInRelation(String),
    #[error("item `{0}` listed twice")]
    DuplicateLabel(String),
}

static LOCATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\blocations?\b\s*:?").unwrap());
static RELATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\brelations?(hips?)?\b\s*:?").unwrap());
static ENTRY_HEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([^:\n()\[\],]+?)\s*:\s*\(").unwrap());
static LIST_MARK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:[-•]|\d+[.)])\s+").unwrap());

fn normalize_label(raw: &str) -> String {
    let cleaned: String = raw.chars().filter(|c| !matches!(c, '*' | '`' | '"' | '\'')).collect();
    let cleaned = LIST_MARK.replace(cleaned.trim(), "");
    cleaned
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn parse_number(raw: &str) -> Option<f64> {
    let t: String = raw.chars().filter(|c| !matches!(c, '°' | '*') && !c.is_whitespace()).collect();
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn line_of(text: &str, at: usize) -> String {
    let start = text[..at].rfind('\n').map_or(0, |i| i + 1);
    let end = text[at..].find('\n').map_or(text.len(), |i| at + i);
    text[start..end].trim().to_string()
}

/// Reads the `Location:` / `Relation:` answer format. Labels are lowercased;
/// numbered instances keep their number.
pub fn parse_layout(response: &str) -> Result<LayoutPlan, ParseLayoutError> {
    let loc = LOCATION.find(response).ok_or(ParseLayoutError::MissingLocationSection)?;
    let rest = &response[loc.end()..];
    let (loc_text, rel_text) = match RELATION.find(rest) {
        Some(m) => (&rest[..m.start()], Some(&rest[m.end()..])),
        None => (rest, None),
    };

    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for head in ENTRY_HEAD.captures_iter(loc_text) {
        let whole = head.get(0).unwrap();
        let label = normalize_label(&head[1]);
        let body_start = whole.end();
        let Some(close) = loc_text[body_start..].find(')') else {
            return Err(ParseLayoutError::MalformedTuple(line_of(loc_text, whole.start())));
        };
        let body = &loc_text[body_start..body_start + close];
        let nums: Vec<Option<f64>> = body.split(',').map(parse_number).collect();
        let (Some(x), Some(y), Some(theta)) = (nums.first().copied().flatten(), nums.get(1).copied().flatten(), nums.get(2).copied().flatten())
        else {
            return Err(ParseLayoutError::MalformedTuple(line_of(loc_text, whole.start())));
        };
        if nums.len() != 3 || label.is_empty() {
            return Err(ParseLayoutError::MalformedTuple(line_of(loc_text, whole.start())));
        }
        if !seen.insert(label.clone()) {
            return Err(ParseLayoutError::DuplicateLabel(label));
        }
        entries.push(LayoutEntry {
            label,
            grid_x: x,
            grid_y: y,
            theta,
        });
    }
    if entries.is_empty() {
        return Err(ParseLayoutError::MissingLocationSection);
    }

    let mut relations = Vec::new();
    if let Some(rel_text) = rel_text {
        let mut i = 0;
        while let Some(open) = rel_text[i..].find('(') {
            let start = i + open + 1;
            let Some(close) = rel_text[start..].find(')') else {
                return Err(ParseLayoutError::MalformedTuple(line_of(rel_text, start - 1)));
            };
            let body = &rel_text[start..start + close];
            let parts: Vec<String> = body.split(',').map(normalize_label).collect();
            if parts.len() != 2 || parts.iter().any(String::is_empty) {
                return Err(ParseLayoutError::MalformedTuple(format!("({body})")));
            }
            for p in &parts {
                if !seen.contains(p) {
                    return Err(ParseLayoutError::UnknownLabelInRelation(p.clone()));
                }
            }
            let [top, down]: [String; 2] = parts.try_into().expect("two parts");
            relations.push(StackRelation { top, down });
            i = start + close + 1;
        }
    }
    Ok(LayoutPlan { entries, relations })
}

/// Writes `plan` in the answer format `parse_layout` reads.
pub fn render_plan(plan: &LayoutPlan) -> String {
    let mut out = String::from("Location:\n");
    for e in &plan.entries {
        out.push_str(&format!("{}: ({}, {}, {})\n", e.label, e.grid_x, e.grid_y, e.theta));
    }
    let rels: Vec<String> = plan.relations.iter().map(|r| format!("({}, {})", r.top, r.down)).collect();
    out.push_str(&format!("Relation:\n[{}]\n", rels.join(", ")));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let plan = parse_layout("Location: table: (150, 150, 0) Relation: []").unwrap();
        assert_eq!(
            plan.entries,
            [LayoutEntry {
                label: "table".into(),
                grid_x: 150.0,
                grid_y: 150.0,
                theta: 0.0
            }]
        );
        assert!(plan.relations.is_empty());
    }

    #[test]
    fn numbered_instances_and_relations() {
        let text = "Here you go.\n\nLocation:\n**Desk**: (150, 60, 180)\nChair 1: (150, 100, 0°)\nBottle 1: (140, 60, 180)\nRelation:\n[(Bottle 1, desk)]\n";
        let plan = parse_layout(text).unwrap();
        let labels: Vec<&str> = plan.entries.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["desk", "chair 1", "bottle 1"]);
        assert_eq!(
            plan.relations,
            [StackRelation {
                top: "bottle 1".into(),
                down: "desk".into()
            }]
        );
    }

    #[test]
    fn errors() {
        assert_eq!(parse_layout("table (1, 2, 3)"), Err(ParseLayoutError::MissingLocationSection));
        assert_eq!(
            parse_layout("Location:\ntable: (150, 150)\nRelation: []"),
            Err(ParseLayoutError::MalformedTuple("table: (150, 150)".into()))
        );
        assert_eq!(
            parse_layout("Location:\ntable: (150, 150, 0)\nRelation: [(mug, table)]"),
            Err(ParseLayoutError::UnknownLabelInRelation("mug".into()))
        );
        assert_eq!(
            parse_layout("Location:\nmug: (1, 1, 0)\nMug: (2, 2, 0)"),
            Err(ParseLayoutError::DuplicateLabel("mug".into()))
        );
        assert!(matches!(parse_layout("Location:\ntable: (a, 1, 0)"), Err(ParseLayoutError::MalformedTuple(_))));
    }

    fn arb_plan() -> impl Strategy<Value = LayoutPlan> {
        let entry = (0.0..300.0f64, 0.0..300.0f64, prop_oneof![Just(0.0), Just(90.0), Just(180.0), Just(270.0), -360.0..360.0f64]);
        proptest::collection::vec(entry, 1..8).prop_flat_map(|coords| {
            let n = coords.len();
            let entries: Vec<LayoutEntry> = coords
                .into_iter()
                .enumerate()
                .map(|(i, (x, y, t))| LayoutEntry {
                    label: format!("item {}", i + 1),
                    grid_x: x,
                    grid_y: y,
                    theta: t,
                })
                .collect();
            proptest::collection::vec((0..n, 0..n), 0..4).prop_map(move |pairs| LayoutPlan {
                entries: entries.clone(),
                relations: pairs
                    .into_iter()
                    .map(|(a, b)| StackRelation {
                        top: format!("item {}", a + 1),
                        down: format!("item {}", b + 1),
                    })
                    .collect(),
            })
        })
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(plan in arb_plan()) {
            prop_assert_eq!(parse_layout(&render_plan(&plan)).unwrap(), plan);
        }
    }
}
