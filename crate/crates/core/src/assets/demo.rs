//! Small bundled indoor index so the pipeline runs without a dataset.

use super::{AssetIndex, AssetRecord, Dims, Embedder, HashingEmbedder, RelationGraph};
use crate::scene::{PlacementTag, TagSet};

use PlacementTag::{Accessory, AvatarPrefab, Grounded, Illumination, WallMounted};

pub(crate) const DEMO_EMBEDDING_DIM: usize = 128;

type DemoRecord = (&'static str, &'static str, &'static str, [f64; 3], &'static [PlacementTag]);

const RECORDS: &[DemoRecord] = &[
    ("table_01", "table", "a rectangular wooden dining table with four straight legs", [1.4, 0.8, 0.75], &[Grounded]),
    ("table_02", "table", "a compact office desk table with a flat laminate top and metal legs", [1.2, 0.6, 0.74], &[Grounded]),
    ("chair_01", "chair", "a wooden dining chair with a slatted back", [0.45, 0.5, 0.9], &[Grounded]),
    ("chair_02", "chair", "an office chair with a padded seat and mesh backrest", [0.55, 0.55, 1.0], &[Grounded]),
    ("sofa_01", "sofa", "a three seat fabric sofa with rounded arms", [2.0, 0.9, 0.85], &[Grounded]),
    ("sofa_02", "sofa", "a small two seat leather loveseat sofa", [1.5, 0.85, 0.8], &[Grounded]),
    ("lamp_01", "lamp", "a tall floor lamp with a cone shade and thin metal pole", [0.4, 0.4, 1.6], &[Grounded, Illumination]),
    ("lamp_02", "lamp", "a standing reading lamp with a drum shade", [0.45, 0.45, 1.5], &[Grounded, Illumination]),
    ("cabinet_01", "cabinet", "a low wooden storage cabinet with two doors", [0.9, 0.45, 0.8], &[Grounded]),
    ("cabinet_02", "cabinet", "a tall metal filing cabinet with drawers", [0.5, 0.6, 1.3], &[Grounded]),
    ("display_01", "display", "a flat computer monitor display on a stand", [0.6, 0.2, 0.45], &[Accessory]),
    ("display_02", "display", "a widescreen television display with thin bezels", [1.0, 0.25, 0.65], &[Accessory]),
    ("telephone_01", "telephone", "a black desk telephone with a corded handset", [0.22, 0.2, 0.1], &[Accessory]),
    ("telephone_02", "telephone", "a smartphone lying flat", [0.08, 0.16, 0.01], &[Accessory]),
    ("guitar_01", "guitar", "an acoustic guitar standing upright on a stand", [0.4, 0.3, 1.0], &[Grounded]),
    ("guitar_02", "guitar", "an electric guitar with a solid body on a floor stand", [0.35, 0.3, 1.0], &[Grounded]),
    ("clock_01", "clock", "a round wall mounted clock with a white face", [0.35, 0.05, 0.35], &[WallMounted]),
    ("clock_02", "clock", "a tall floor standing grandfather clock with a pendulum", [0.5, 0.3, 1.9], &[Grounded]),
    ("flowerpot_01", "flowerpot", "a ceramic flowerpot with a leafy green plant", [0.35, 0.35, 0.6], &[Grounded]),
    ("flowerpot_02", "flowerpot", "a large potted indoor palm tree in a planter", [0.5, 0.5, 1.4], &[Grounded]),
    ("jar_01", "jar", "a glass storage jar with a cork lid", [0.12, 0.12, 0.18], &[Accessory]),
    ("jar_02", "jar", "a ceramic cookie jar with a round lid", [0.18, 0.18, 0.22], &[Accessory]),
    ("bottle_01", "bottle", "a clear glass water bottle", [0.08, 0.08, 0.25], &[Accessory]),
    ("bottle_02", "bottle", "a green wine bottle", [0.09, 0.09, 0.3], &[Accessory]),
    ("bookshelf_01", "bookshelf", "a tall wooden bookshelf filled with books", [0.9, 0.3, 1.8], &[Grounded]),
    ("bookshelf_02", "bookshelf", "a low open bookshelf with three shelves", [1.2, 0.35, 0.9], &[Grounded]),
    ("laptop_01", "laptop", "an open silver laptop computer", [0.34, 0.24, 0.22], &[Accessory]),
    ("laptop_02", "laptop", "a black gaming laptop with the lid open", [0.38, 0.27, 0.25], &[Accessory]),
    ("trash_bin_01", "trash bin", "a cylindrical metal trash bin", [0.3, 0.3, 0.45], &[Grounded]),
    ("trash_bin_02", "trash bin", "a plastic pedal trash bin with a lid", [0.35, 0.3, 0.5], &[Grounded]),
    ("pillow_01", "pillow", "a square decorative throw pillow", [0.45, 0.45, 0.15], &[Accessory]),
    ("pillow_02", "pillow", "a rectangular bed pillow", [0.6, 0.4, 0.12], &[Accessory]),
    ("bag_01", "bag", "a leather backpack bag standing on the floor", [0.32, 0.2, 0.45], &[Grounded]),
    ("bag_02", "bag", "a canvas tote bag", [0.4, 0.15, 0.4], &[Grounded]),
    ("basket_01", "basket", "a woven wicker laundry basket", [0.5, 0.4, 0.5], &[Grounded]),
    ("basket_02", "basket", "a small round storage basket", [0.3, 0.3, 0.25], &[Grounded]),
    ("bed_01", "bed", "a double bed with a wooden headboard", [1.6, 2.0, 0.9], &[Grounded]),
    ("bed_02", "bed", "a single bed with a metal frame", [1.0, 2.0, 0.8], &[Grounded]),
    ("mug_01", "mug", "a white ceramic coffee mug with a handle", [0.12, 0.09, 0.1], &[Accessory]),
    ("mug_02", "mug", "a tall travel mug with a lid", [0.09, 0.09, 0.18], &[Accessory]),
    ("person_01", "person", "a standing adult human figure", [0.5, 0.3, 1.75], &[AvatarPrefab]),
];

const RELATIONS: &[(&str, &str)] = &[
    ("table", "laptop"),
    ("table", "mug"),
    ("table", "display"),
    ("table", "telephone"),
    ("table", "bottle"),
    ("table", "jar"),
    ("bed", "pillow"),
];

/// Deterministic demo index: the twenty indoor categories plus `person`,
/// annotations embedded with [`HashingEmbedder`].
pub fn demo_index() -> AssetIndex {
    let embedder = HashingEmbedder::new(DEMO_EMBEDDING_DIM);
    let mut categories: Vec<String> = Vec::new();
    let records = RECORDS
        .iter()
        .map(|(id, category, annotation, dims, tags)| {
            if !categories.iter().any(|c| c == category) {
                categories.push(category.to_string());
            }
            AssetRecord {
                id: id.to_string(),
                category: category.to_string(),
                annotation: annotation.to_string(),
                embedding: embedder.embed(annotation).expect("annotations have words"),
                dims: Dims::from(*dims),
                tags: tags.iter().copied().collect::<TagSet>(),
            }
        })
        .collect();
    let graph = RelationGraph::new(RELATIONS.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()).expect("acyclic");
    AssetIndex::new(DEMO_EMBEDDING_DIM, "indoor", categories, records, graph).expect("demo index is valid")
}
