use std::collections::BTreeMap;

use super::LayoutError;
use crate::assets::CategoryRequest;

const SYNTHESIS_SYSTEM: &str = include_str!("../../resources/prompts/synthesis_system.txt");
const SYNTHESIS_USER: &str = include_str!("../../resources/prompts/synthesis_user.txt");

/// Shortest round-trip decimal, always with a fractional part.
pub(crate) fn fmt_real(v: f64) -> String {
    let s = format!("{v}");
    if s.contains(['.', 'e', 'E']) || !v.is_finite() { s } else { format!("{s}.0") }
}

/// `{'table': 1, 'chair': 2}` in request order.
pub fn format_item_dict(items: &[CategoryRequest]) -> String {
    let body: Vec<String> = items.iter().map(|r| format!("'{}': {}", r.category, r.count)).collect();
    format!("{{{}}}", body.join(", "))
}

/// `{'table': (1.2, 0.8)}` in request order, sizes as given.
pub fn format_size_dict(items: &[CategoryRequest], sizes: &BTreeMap<String, (f64, f64)>) -> Result<String, LayoutError> {
    let body = items
        .iter()
        .map(|r| {
            let (f, s) = sizes.get(&r.category).ok_or_else(|| LayoutError::MissingSize(r.category.clone()))?;
            Ok(format!("'{}': ({}, {})", r.category, fmt_real(*f), fmt_real(*s)))
        })
        .collect::<Result<Vec<_>, LayoutError>>()?;
    Ok(format!("{{{}}}", body.join(", ")))
}

/// System and user messages of the scene-synthesis meta-prompt. `sizes`
/// holds (front, side) per category.
pub fn build_layout_prompt(user_prompt: &str, items: &[CategoryRequest], sizes: &BTreeMap<String, (f64, f64)>) -> Result<(String, String), LayoutError> {
    let size_dict = format_size_dict(items, sizes)?;
    let user = SYNTHESIS_USER
        .replace("[user_text_prompt]", user_prompt)
        .replace("[item_dict]", &format_item_dict(items))
        .replace("[item_size_dict]", &size_dict);
    Ok((SYNTHESIS_SYSTEM.to_string(), user))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution() {
        let items = [CategoryRequest::new("table", 1), CategoryRequest::new("chair", 2)];
        let sizes: BTreeMap<String, (f64, f64)> = [("table".to_string(), (1.2, 0.8)), ("chair".to_string(), (0.5, 1.0))].into();
        let (system, user) = build_layout_prompt("a dining room", &items, &sizes).unwrap();
        assert!(system.starts_with("Scene design in 300×300 coordinate system\n"));
        assert!(system.contains("Its \"side face\" is the edge perprndicular to the \"front face\"."));
        assert_eq!(
            user,
            "User Prompt: a dining room\nItems to Place: {'table': 1, 'chair': 2}\nItem Size (front face, side face): {'table': (1.2, 0.8), 'chair': (0.5, 1.0)}\n"
        );
    }

    #[test]
    fn empty_and_missing() {
        let (_, user) = build_layout_prompt("x", &[], &BTreeMap::new()).unwrap();
        assert!(user.contains("Items to Place: {}\n"));
        assert_eq!(
            build_layout_prompt("x", &[CategoryRequest::new("mug", 1)], &BTreeMap::new()),
            Err(LayoutError::MissingSize("mug".into()))
        );
    }
}
