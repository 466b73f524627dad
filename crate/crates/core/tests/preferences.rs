use std::collections::{BTreeMap, HashMap};

use palettizer::prefs::{apply_bindings, expand_vague, recommend, to_request, Lexicon, Palette, PaletteSource, PreferenceSet};
use palettizer::recommender::{MiceConfig, MiceImputer};
use palettizer::synth::{generate_corpus, generate_item, SynthItem};
use palettizer::{featurize, BBox, ElementNode, ElementType, InfographicDoc, LabColor, NodeKind, VifType};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mice() -> MiceImputer {
    let corpus: Vec<_> = generate_corpus(300, 4).iter().map(|i| featurize(&i.doc).unwrap()).collect();
    MiceImputer::fit(&corpus, MiceConfig::default()).unwrap()
}

fn palette(colors: &[(&str, f64)]) -> Palette {
    Palette {
        assignment: colors.iter().map(|&(id, l)| (id.to_string(), LabColor::new(l, 0.0, 0.0))).collect(),
        source: PaletteSource::Model,
        request_hash: 0,
        sample_index: 0,
    }
}

/// Share of 10,000 palettes in which each member's color won the binding.
fn win_rates(areas: &[u64], seed: u64) -> Vec<f64> {
    let ids: Vec<String> = (0..areas.len()).map(|i| format!("n{i}")).collect();
    let p = palette(&ids.iter().enumerate().map(|(i, id)| (id.as_str(), 10.0 * (i + 1) as f64)).collect::<Vec<_>>());
    let area_map: HashMap<String, u64> = ids.iter().cloned().zip(areas.iter().copied()).collect();
    let out = apply_bindings(&vec![p; 10_000], &[ids.clone()], &area_map, seed);
    let mut wins = vec![0usize; areas.len()];
    for q in &out {
        let l = q.assignment["n0"].l;
        assert!(q.assignment.values().all(|c| c.l == l), "binding set not monochrome");
        wins[(l / 10.0).round() as usize - 1] += 1;
    }
    wins.iter().map(|&w| w as f64 / out.len() as f64).collect()
}

#[test]
fn binding_draws_follow_areas() {
    for (areas, seed) in [(vec![50, 50], 1), (vec![30, 70], 2), (vec![10, 20, 70], 3), (vec![1, 1, 1, 1], 4)] {
        let total: u64 = areas.iter().sum();
        for (rate, a) in win_rates(&areas, seed).iter().zip(&areas) {
            let want = *a as f64 / total as f64;
            assert!((rate - want).abs() <= 0.02, "areas {areas:?}: {rate} vs {want}");
        }
    }
}

#[test]
fn binding_draws_are_seeded() {
    assert_eq!(win_rates(&[40, 60], 9), win_rates(&[40, 60], 9));
}

fn colorable(item: &SynthItem) -> Vec<String> {
    item.doc.nodes.iter().filter(|n| n.kind.is_colorable()).map(|n| n.id.clone()).collect()
}

#[test]
fn bound_sets_are_monochrome_in_every_returned_palette() {
    let model = mice();
    let lex = Lexicon::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut palettes = 0;
    for i in 0..40 {
        let item = generate_item(500, i);
        let mut ids = colorable(&item);
        ids.shuffle(&mut rng);
        let mut prefs = PreferenceSet::default();
        prefs.bindings.push(ids[..2].to_vec());
        if ids.len() >= 5 {
            prefs.bindings.push(ids[2..5].to_vec());
        }
        if i % 2 == 0 {
            prefs.exact.insert(ids[0].clone(), LabColor::new(55.0, 40.0, -20.0));
        }
        let out = recommend(&item.doc, &prefs, 5, &model, &lex, i).unwrap();
        assert!(!out.is_empty());
        for p in &out {
            palettes += 1;
            for set in &prefs.bindings {
                let c = p.assignment[&set[0]];
                assert!(set.iter().all(|id| p.assignment[id] == c), "item {i}: {set:?} not monochrome");
            }
            if let Some(pin) = prefs.exact.get(&ids[0]) {
                assert_eq!(p.assignment[&ids[1]], *pin, "pinned member must win its binding");
            }
        }
    }
    assert!(palettes >= 150);
}

/// Background plus five full-height strips.
fn strips_doc() -> InfographicDoc {
    let ids: Vec<String> = (0..5).map(|i| format!("strip{i}")).collect();
    let mut d = InfographicDoc::new(
        500,
        300,
        VifType::Landscape,
        ElementNode::new("bg", NodeKind::Background, BBox::new(0, 0, 500, 300))
            .with_area(150_000)
            .with_color(LabColor::new(95.0, 0.0, 0.0))
            .with_children(ids.clone()),
    );
    for (i, id) in ids.iter().enumerate() {
        d.nodes.push(
            ElementNode::new(id.clone(), NodeKind::Artistic, BBox::new(100 * i as u32, 0, 100, 300))
                .with_type(ElementType::Rectangle)
                .with_area(30_000)
                .with_color(LabColor::new(50.0, 20.0 * i as f64, 0.0)),
        );
    }
    d
}

#[test]
fn exciting_on_five_strips() {
    let lex = Lexicon::builtin();
    let entry = lex.get("exciting").unwrap().colors.clone();
    let doc = strips_doc();
    let mut prefs = PreferenceSet::default();
    for i in 0..5 {
        prefs.vague.insert(format!("strip{i}"), "exciting".into());
    }
    let variants = expand_vague(&prefs, &lex, 3, 12).unwrap();
    assert_eq!(variants.len(), 3);
    for v in &variants {
        assert!(v.vague.is_empty());
        assert_eq!(v.exact.len(), 5);
        assert!(v.exact.values().all(|c| entry.contains(c)));
        let req = to_request(&doc, v).unwrap();
        // Only the background is left to generate.
        assert_eq!(req.vector.hidden_color_slots().len(), 1);
    }
    let out = recommend(&doc, &prefs, 5, &mice(), &lex, 3).unwrap();
    for p in &out {
        for i in 0..5 {
            assert!(entry.contains(&p.assignment[&format!("strip{i}")]));
        }
    }
}

/// A generated item with four text elements, as in the white-text walkthrough.
fn four_text_item() -> SynthItem {
    (0..)
        .map(|i| generate_item(54, i))
        .find(|it| {
            it.doc
                .nodes
                .iter()
                .filter(|n| n.element_type == Some(ElementType::Text))
                .count()
                == 4
        })
        .unwrap()
}

fn scenario_prefs(item: &SynthItem) -> (PreferenceSet, Vec<String>) {
    let texts: Vec<String> = item
        .doc
        .nodes
        .iter()
        .filter(|n| n.element_type == Some(ElementType::Text))
        .map(|n| n.id.clone())
        .collect();
    let exact: BTreeMap<String, String> = texts.iter().map(|t| (t.clone(), "#FFFFFF".to_string())).collect();
    let json = serde_json::json!({ "exact": exact, "vague": { "bg": "light" }, "bindings": [texts] });
    (serde_json::from_value(json).unwrap(), texts)
}

#[test]
fn scenario_request_observes_five_triples() {
    let item = four_text_item();
    let (prefs, _) = scenario_prefs(&item);
    for v in expand_vague(&prefs, &Lexicon::builtin(), 3, 0).unwrap() {
        let req = to_request(&item.doc, &v).unwrap();
        let colorable = req.vector.colorable_slots().len();
        assert_eq!(colorable - req.vector.hidden_color_slots().len(), 5);
    }
}

#[test]
fn white_pins_survive_recommendation() {
    let item = four_text_item();
    let (prefs, texts) = scenario_prefs(&item);
    let white = palettizer::rgb_to_lab(palettizer::RgbColor::new(255, 255, 255));
    let lex = Lexicon::builtin();
    let light = &lex.get("light").unwrap().colors;
    let model = mice();
    for seed in 0..10 {
        let out = recommend(&item.doc, &prefs, 5, &model, &lex, seed).unwrap();
        assert!(!out.is_empty());
        for p in &out {
            for t in &texts {
                assert_eq!(p.assignment[t], white);
                assert_eq!(p.to_hex()[t], "#FFFFFF");
            }
            assert!(light.contains(&p.assignment["bg"]));
        }
    }
}

#[test]
fn recommend_is_deterministic_and_distinct() {
    let item = generate_item(8, 8);
    let model = mice();
    let lex = Lexicon::builtin();
    let a = recommend(&item.doc, &PreferenceSet::default(), 5, &model, &lex, 21).unwrap();
    let b = recommend(&item.doc, &PreferenceSet::default(), 5, &model, &lex, 21).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            assert!(!a[i].is_duplicate_of(&a[j]));
        }
    }
}

#[test]
fn unknown_word_names_the_word() {
    let item = generate_item(8, 1);
    let mut prefs = PreferenceSet::default();
    prefs.vague.insert("bg".into(), "blorp".into());
    let err = recommend(&item.doc, &prefs, 5, &mice(), &Lexicon::builtin(), 0).unwrap_err();
    assert!(err.to_string().contains("blorp"), "{err}");
}
