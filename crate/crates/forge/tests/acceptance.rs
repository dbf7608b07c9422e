//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng as _;

use forge::config::PipelineConfig;
use forge::pipeline::Pipeline;
use forge::rows::load_scene_graphs;
use forge::stages::{self, ParseInputs, ParseOutputs};
use forge_core::caption::template_caption;
use forge_core::eval::{
    fold_count, kfold_summary, recall_at_k, Direction, RandomScorer, RetrievalItem, Stratum,
};
use forge_core::hardneg::{HardNegGenerator, HnQuery, HnType};
use forge_core::index::{classify_split, filter_records, FilterRecord, SeenIndex, SplitLabel};
use forge_core::lexical::{LexicalDb, Overrides};
use forge_core::parser::{parse_caption, parse_detailed, Lexicon, Negation};
use forge_core::sampler::random_walk;
use forge_core::seed::rng;
use forge_core::{
    AtomKind, CaptionRecord, ExactFilterPolicy, FilterPolicy, Region, SceneGraph, WalkConfig,
};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let status = if pass { "PASS" } else { "FAIL" };
    writeln!(out, "{status} criterion {n}: {detail}").unwrap();
}

fn check(n: u32, pass: bool, detail: String) {
    verdict(n, pass, &detail);
    assert!(pass, "criterion {n}: {detail}");
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

/// Runs the fixture pipeline into `out` and returns the wall time.
fn run_fixture(out: &Path) -> Duration {
    let mut config =
        PipelineConfig::load(&fixture().join("forge.toml")).expect("fixture config loads");
    config.out = out.to_path_buf();
    let start = Instant::now();
    Pipeline::new(config)
        .run(None)
        .expect("fixture pipeline runs");
    start.elapsed()
}

/// Two seed-17 fixture runs, shared by the criteria that read artifacts.
fn fixture_runs() -> &'static (PathBuf, PathBuf, Duration, Duration) {
    static RUNS: OnceLock<(PathBuf, PathBuf, Duration, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let a = tempfile::tempdir().unwrap().keep();
        let b = tempfile::tempdir().unwrap().keep();
        let ta = run_fixture(&a);
        let tb = run_fixture(&b);
        (a, b, ta, tb)
    })
}

fn jsonl(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const NOUNS: &[&str] = &["dog", "cat", "bed", "table", "tree"];
const ADJECTIVES: &[&str] = &["red", "black", "small", "wooden"];
const RELATIONS: &[&str] = &["on", "near", "under"];

/// A small graph in plain index form.
#[derive(Debug, Clone)]
struct Toy {
    objects: Vec<(&'static str, Vec<&'static str>)>,
    edges: Vec<(usize, &'static str, usize)>,
}

impl Toy {
    fn random(r: &mut forge_core::seed::Rng) -> Toy {
        let n = r.random_range(1..=3);
        let objects: Vec<_> = (0..n)
            .map(|_| {
                let noun = *NOUNS.choose(r).unwrap();
                let mut attrs: Vec<&str> = ADJECTIVES
                    .iter()
                    .copied()
                    .filter(|_| r.random_bool(0.25))
                    .collect();
                attrs.truncate(2);
                (noun, attrs)
            })
            .collect();
        let mut edges: Vec<(usize, &str, usize)> = Vec::new();
        for _ in 0..r.random_range(0..=n) {
            let (s, o) = (r.random_range(0..n), r.random_range(0..n));
            if s != o
                && !edges
                    .iter()
                    .any(|e| (e.0, e.2) == (s, o) || (e.0, e.2) == (o, s))
            {
                edges.push((s, *RELATIONS.choose(r).unwrap(), o));
            }
        }
        Toy { objects, edges }
    }

    fn build(&self, id: &str) -> SceneGraph {
        let mut b = SceneGraph::builder(id);
        for (i, (noun, attrs)) in self.objects.iter().enumerate() {
            b = b.object(i as u64, noun, attrs);
        }
        for &(s, rel, o) in &self.edges {
            b = b.relation(s as u64, rel, o as u64);
        }
        b.build().unwrap()
    }

    fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (noun, attrs) in &self.objects {
            out.insert(format!("o:{noun}"));
            out.extend(attrs.iter().map(|a| format!("a:{a}")));
        }
        out.extend(self.edges.iter().map(|e| format!("r:{}", e.1)));
        out
    }

    fn compounds(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (noun, attrs) in &self.objects {
            out.extend(attrs.iter().map(|a| format!("{a} {noun}")));
        }
        for &(s, rel, o) in &self.edges {
            out.insert(format!("{} {rel} {}", self.objects[s].0, self.objects[o].0));
        }
        out
    }
}

fn oracle_split(test: &Toy, train: &[Toy]) -> SplitLabel {
    let atoms: BTreeSet<String> = train.iter().flat_map(Toy::atoms).collect();
    let compounds: BTreeSet<String> = train.iter().flat_map(Toy::compounds).collect();
    if !test.atoms().is_subset(&atoms) {
        SplitLabel::UA
    } else if !test.compounds().is_subset(&compounds) {
        SplitLabel::UC
    } else {
        SplitLabel::SC
    }
}

#[test]
fn criterion_01_split_partition() {
    let _g = serial();
    let start = Instant::now();
    let mut r = rng(1);
    let (mut agree, mut total) = (0usize, 0usize);
    let mut labels = BTreeMap::new();
    for corpus in 0..1000 {
        let train: Vec<Toy> = (0..r.random_range(0..=10))
            .map(|_| Toy::random(&mut r))
            .collect();
        let test: Vec<Toy> = (0..r.random_range(1..=10))
            .map(|_| Toy::random(&mut r))
            .collect();
        let mut index = SeenIndex::new("train");
        for (i, t) in train.iter().enumerate() {
            index.add(&t.build(&format!("{corpus}/t{i}")));
        }
        for (i, t) in test.iter().enumerate() {
            let got = classify_split(&t.build(&format!("{corpus}/x{i}")), &index);
            let want = oracle_split(t, &train);
            total += 1;
            agree += usize::from(got == want);
            *labels.entry(want.as_str()).or_insert(0usize) += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        1,
        agree == total && elapsed < Duration::from_secs(10),
        format!("split agreement {agree}/{total} {labels:?} in {elapsed:.2?} (limit 10s)"),
    );
}

fn record(id: &str, graph: SceneGraph, region: (u32, u32), image: (u32, u32)) -> FilterRecord {
    FilterRecord {
        caption: CaptionRecord {
            caption_id: id.into(),
            text: String::new(),
            graph: None,
            source_image_id: None,
        },
        graph,
        region: Some(Region::new(0, 0, region.0, region.1).unwrap()),
        image_size: Some(image),
    }
}

/// Name, region size, image size, graph, expected verdict.
type Boundary<'a> = (&'a str, (u32, u32), (u32, u32), &'a SceneGraph, bool);

#[test]
fn criterion_02_filter_constants() {
    let good = SceneGraph::builder("g")
        .object(0, "dog", &["black"])
        .build()
        .unwrap();
    let one_atom = SceneGraph::builder("g")
        .object(0, "dog", &[])
        .build()
        .unwrap();
    let no_compound = SceneGraph::builder("g")
        .object(0, "dog", &[])
        .object(1, "cat", &[])
        .build()
        .unwrap();
    let cases: Vec<Boundary> = vec![
        ("area 39999", (201, 199), (400, 400), &good, false),
        ("area 40000", (200, 200), (400, 400), &good, true),
        ("area 40001", (181, 221), (400, 400), &good, true),
        ("fraction 0.10", (200, 200), (800, 500), &good, true),
        ("fraction below 0.10", (200, 200), (801, 500), &good, false),
        ("ratio 0.5", (200, 400), (800, 500), &good, true),
        ("ratio below 0.5", (199, 400), (800, 500), &good, false),
        ("ratio 2.0", (400, 200), (800, 500), &good, true),
        ("ratio above 2.0", (401, 200), (800, 500), &good, false),
        ("one atom", (200, 200), (400, 400), &one_atom, false),
        ("no compound", (200, 200), (400, 400), &no_compound, false),
    ];
    let mut wrong = Vec::new();
    for (name, region, image, graph, want) in &cases {
        let rec = || record(name, (*graph).clone(), *region, *image);
        let (kept_f, _) = filter_records([rec()], &FilterPolicy::default());
        let (kept_q, _) = filter_records([rec()], &ExactFilterPolicy::default());
        if (kept_f.len() == 1) != *want || (kept_q.len() == 1) != *want {
            wrong.push(*name);
        }
    }
    let p = FilterPolicy::default();
    let constants = p.min_region_area == 40_000
        && p.min_image_fraction == 0.1
        && p.aspect_ratio_range == (0.5, 2.0)
        && p.min_atoms == 2
        && p.min_compounds == 1;
    check(
        2,
        wrong.is_empty() && constants,
        format!(
            "{} boundary fixtures, mismatches {wrong:?}, default constants ok = {constants}",
            cases.len()
        ),
    );
}

/// Walk state of the brute-force enumeration: objects, attributes
/// (object, index), edges, current object.
type WalkState = (
    BTreeSet<usize>,
    BTreeSet<(usize, usize)>,
    BTreeSet<usize>,
    usize,
);

/// Every selection a walk can end in, over all random choices.
fn reachable(toy: &Toy, n: usize) -> BTreeSet<String> {
    let count = |s: &WalkState| s.0.len() + s.1.len() + s.2.len();
    let objects = toy.objects.len();
    let mut component: Vec<usize> = (0..objects).collect();
    loop {
        let mut changed = false;
        for &(a, _, b) in &toy.edges {
            let m = component[a].min(component[b]);
            if component[a] != m || component[b] != m {
                component[a] = m;
                component[b] = m;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let options = |s: &WalkState, at: usize| -> Vec<(Option<usize>, Option<usize>)> {
        let mut v: Vec<_> = (0..toy.objects[at].1.len())
            .filter(|&k| !s.1.contains(&(at, k)))
            .map(|k| (Some(k), None))
            .collect();
        v.extend(
            toy.edges
                .iter()
                .enumerate()
                .filter(|(i, e)| (e.0 == at || e.2 == at) && !s.2.contains(i))
                .map(|(i, _)| (None, Some(i))),
        );
        v
    };
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack: Vec<WalkState> = (0..objects)
        .map(|o| (BTreeSet::from([o]), BTreeSet::new(), BTreeSet::new(), o))
        .collect();
    while let Some(s) = stack.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        if count(&s) == n {
            out.insert(signature_of(toy, &s.0, &s.1, &s.2));
            continue;
        }
        let at = s.3;
        let opts = options(&s, at);
        if opts.is_empty() {
            let movable: Vec<usize> =
                s.0.iter()
                    .copied()
                    .filter(|&o| component[o] == component[at] && !options(&s, o).is_empty())
                    .collect();
            if !movable.is_empty() {
                for o in movable {
                    stack.push((s.0.clone(), s.1.clone(), s.2.clone(), o));
                }
            } else {
                for o in (0..objects).filter(|&o| s.0.iter().all(|&m| component[m] != component[o]))
                {
                    let mut next = s.clone();
                    next.0.insert(o);
                    next.3 = o;
                    stack.push(next);
                }
            }
            continue;
        }
        for (attr, edge) in opts {
            let mut next = s.clone();
            if let Some(k) = attr {
                next.1.insert((at, k));
            }
            if let Some(i) = edge {
                let (a, _, b) = toy.edges[i];
                let fresh = if next.0.contains(&a) { b } else { a };
                next.0.insert(a);
                next.0.insert(b);
                next.2.insert(i);
                next.3 = fresh;
            }
            if count(&next) <= n {
                stack.push(next);
            }
        }
    }
    out
}

fn signature_of(
    toy: &Toy,
    objects: &BTreeSet<usize>,
    attrs: &BTreeSet<(usize, usize)>,
    edges: &BTreeSet<usize>,
) -> String {
    let mut s = String::new();
    for &o in objects {
        let a: Vec<&str> = attrs
            .iter()
            .filter(|x| x.0 == o)
            .map(|x| toy.objects[o].1[x.1])
            .collect();
        write!(s, "{o}:{}[{}] ", toy.objects[o].0, a.join(",")).unwrap();
    }
    for &i in edges {
        let e = toy.edges[i];
        write!(s, "{}-{}-{} ", e.0, e.1, e.2).unwrap();
    }
    s
}

fn signature(g: &SceneGraph) -> String {
    let mut s = String::new();
    for o in g.objects() {
        let a: Vec<&str> = o.attributes.iter().map(|a| a.lemma()).collect();
        write!(s, "{}:{}[{}] ", o.id, o.lemma(), a.join(",")).unwrap();
    }
    for e in g.relationships() {
        write!(
            s,
            "{}-{}-{} ",
            e.subject_id,
            e.relationship.lemma(),
            e.object_id
        )
        .unwrap();
    }
    s
}

fn is_substructure(sub: &SceneGraph, parent: &SceneGraph) -> bool {
    sub.objects().iter().all(|o| {
        parent.object(o.id).is_some_and(|p| {
            p.lemma() == o.lemma() && o.attributes.iter().all(|a| p.attributes.contains(a))
        })
    }) && sub
        .relationships()
        .iter()
        .all(|e| parent.relationships().contains(e))
}

#[test]
fn criterion_03_random_walk_support() {
    let _g = serial();
    let toy = Toy {
        objects: vec![
            ("man", vec!["tall"]),
            ("horse", vec!["brown"]),
            ("field", vec![]),
            ("hat", vec![]),
        ],
        edges: vec![(0, "on", 1), (1, "in", 2)],
    };
    let graph = toy.build("walk");
    assert_eq!(graph.atom_count(), 8);
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for n in [4, 5, 6] {
        let config = WalkConfig {
            n,
            seed: 17,
            ..WalkConfig::default()
        };
        let mut support = BTreeSet::new();
        let mut bad = 0;
        for i in 0..10_000 {
            let s = random_walk(&graph, &config, i).unwrap().subgraph;
            if s.atom_count() != n || !is_substructure(&s, &graph) {
                bad += 1;
            }
            support.insert(signature(&s));
        }
        let expected = reachable(&toy, n);
        ok &= bad == 0 && support == expected;
        details.push(format!(
            "n={n}: {} of {} reachable, {bad} invalid",
            support.len(),
            expected.len()
        ));
    }
    let elapsed = start.elapsed();
    check(
        3,
        ok && elapsed < Duration::from_secs(30),
        format!("{} in {elapsed:.2?} (limit 30s)", details.join("; ")),
    );
}

#[test]
fn criterion_04_template_round_trip() {
    let (graphs, _) = load_scene_graphs(&fixture().join("scene_graphs.json")).unwrap();
    let mut lexicon = Lexicon::bundled();
    for g in &graphs {
        lexicon.learn(g);
    }
    let mut r = rng(4);
    let (mut sampled, mut equal, mut attempts) = (0usize, 0usize, 0usize);
    let mut failures = Vec::new();
    while sampled < 500 && attempts < 100_000 {
        attempts += 1;
        let g = graphs.choose(&mut r).unwrap();
        let n = r.random_range(2..=8);
        let config = WalkConfig {
            n,
            seed: attempts as u64,
            ..WalkConfig::default()
        };
        let Ok(s) = random_walk(g, &config, 0) else {
            continue;
        };
        sampled += 1;
        let text = template_caption(&s.subgraph).unwrap();
        match parse_caption(&text, &lexicon) {
            Ok(p) if p.canonical() == s.subgraph.canonical() => equal += 1,
            _ => failures.push(text),
        }
    }
    failures.truncate(3);
    check(
        4,
        sampled == 500 && equal == sampled,
        format!("{equal}/{sampled} template captions parse back to their subgraph {failures:?}"),
    );
}

/// Foil words named by an edit provenance, by kind.
fn provenance_words(p: &str) -> Vec<(AtomKind, String)> {
    p.split(" + ")
        .filter_map(|part| {
            let (kind, rest) = part.split_once(':')?;
            let (_, foil) = rest.split_once("->")?;
            Some((AtomKind::parse(kind)?, foil.to_string()))
        })
        .collect()
}

fn extend(lexicon: &Lexicon, words: &[(AtomKind, String)]) -> Lexicon {
    let mut l = lexicon.clone();
    for (kind, w) in words {
        match kind {
            AtomKind::Object => l.add_noun(w),
            AtomKind::Attribute => l.add_adjective(w),
            AtomKind::Relationship => {
                l.add_preposition(w);
                l.add_verb(w);
            }
        }
    }
    l
}

/// Parent objects with the lemma, attributes and incident edges of caption
/// object `obj`, ignoring attribute `skip`.
fn fitting(parent: &SceneGraph, caption: &SceneGraph, obj: u64, skip: Option<&str>) -> Vec<u64> {
    let node = caption.object(obj).unwrap();
    let name = |g: &SceneGraph, id: u64| g.object(id).unwrap().lemma().to_string();
    let mut out = Vec::new();
    for p in parent.objects() {
        if p.lemma() != node.lemma() {
            continue;
        }
        let attrs_ok = node
            .attributes
            .iter()
            .filter(|a| Some(a.lemma()) != skip)
            .all(|a| p.attributes.iter().any(|b| b.lemma() == a.lemma()));
        let edges_ok = caption.relationships().iter().all(|e| {
            let rel = e.relationship.lemma();
            let out_edge = |f: &&forge_core::RelEdge| {
                f.subject_id == p.id
                    && f.relationship.lemma() == rel
                    && name(parent, f.object_id) == name(caption, e.object_id)
            };
            let in_edge = |f: &&forge_core::RelEdge| {
                f.object_id == p.id
                    && f.relationship.lemma() == rel
                    && name(parent, f.subject_id) == name(caption, e.subject_id)
            };
            (e.subject_id != obj || parent.relationships().iter().any(|f| out_edge(&f)))
                && (e.object_id != obj || parent.relationships().iter().any(|f| in_edge(&f)))
        });
        if attrs_ok && edges_ok {
            out.push(p.id);
        }
    }
    out
}

/// Whether a negated caption is false of `parent`.
fn negation_false(parent: &SceneGraph, text: &str, lexicon: &Lexicon) -> Result<bool, String> {
    let p = parse_detailed(text, lexicon).map_err(|e| e.to_string())?;
    let g = &p.graph;
    let [n] = p.negations.as_slice() else {
        return Err(format!("{} negations", p.negations.len()));
    };
    Ok(match n {
        Negation::Caption => {
            g.atoms().is_subset(&parent.atoms()) && g.compounds().is_subset(&parent.compounds())
        }
        Negation::Attribute { object, attribute } => {
            let m = fitting(parent, g, *object, Some(attribute.lemma()));
            !m.is_empty()
                && m.iter().all(|&id| {
                    parent
                        .object(id)
                        .unwrap()
                        .attributes
                        .iter()
                        .any(|a| a.lemma() == attribute.lemma())
                })
        }
        Negation::Relationship {
            subject,
            relationship,
            object,
        } => {
            let (s, o) = (
                g.object(*subject).unwrap().lemma(),
                g.object(*object).unwrap().lemma(),
            );
            let rels: Vec<&str> = parent
                .relationships()
                .iter()
                .filter(|e| {
                    parent.object(e.subject_id).unwrap().lemma() == s
                        && parent.object(e.object_id).unwrap().lemma() == o
                })
                .map(|e| e.relationship.lemma())
                .collect();
            !rels.is_empty() && rels.iter().all(|&r| r == relationship.lemma())
        }
        Negation::Object(id) => !fitting(parent, g, *id, None).is_empty(),
    })
}

/// Whether a positive negative asserts an atom or compound the parent lacks.
fn contradicts(parent: &SceneGraph, text: &str, lexicon: &Lexicon) -> Result<bool, String> {
    let g = parse_caption(text, lexicon).map_err(|e| e.to_string())?;
    let atoms = parent.atoms();
    let compounds = parent.compounds();
    Ok(g.compounds().iter().any(|c| !compounds.contains(c))
        || g.atoms().iter().any(|a| !atoms.contains(a)))
}

#[test]
fn criterion_05_hard_negative_soundness() {
    let (run, _, _, _) = fixture_runs();
    let f = fixture();
    let (graphs, _) = load_scene_graphs(&f.join("scene_graphs.json")).unwrap();
    let parents: BTreeMap<String, SceneGraph> = graphs
        .into_iter()
        .map(|g| (g.image_id().to_string(), g))
        .collect();
    let lexicon = Lexicon::from_dir(&run.join("lexicon")).unwrap();
    let mut images = BTreeMap::new();
    for row in jsonl(&run.join("splits.jsonl")) {
        images.insert(
            (
                "systematicity".to_string(),
                row["caption_id"].as_str().unwrap().to_string(),
            ),
            row["image_id"].clone(),
        );
    }
    for row in jsonl(&run.join("captions.jsonl")) {
        images.insert(
            (
                "productivity".to_string(),
                row["query_id"].as_str().unwrap().to_string(),
            ),
            row["image_id"].clone(),
        );
    }
    let want_counts: BTreeMap<(&str, &str), u64> = [
        (("systematicity", "atom"), 4),
        (("systematicity", "comp"), 6),
        (("productivity", "atom"), 5),
        (("productivity", "swap"), 5),
        (("productivity", "neg"), 5),
    ]
    .into();
    let mut checked: BTreeMap<String, usize> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut count_errors = 0;
    for row in jsonl(&run.join("hardneg.jsonl")) {
        let task = row["task"].as_str().unwrap();
        let t = row["hn_type"].as_str().unwrap();
        if want_counts.get(&(task, t)) != row["requested"].as_u64().as_ref() {
            count_errors += 1;
        }
        let qid = row["query_id"].as_str().unwrap().to_string();
        let image = images[&(task.to_string(), qid)]
            .as_str()
            .unwrap()
            .to_string();
        let parent = &parents[&image];
        for neg in row["negatives"].as_array().unwrap() {
            let text = neg["text"].as_str().unwrap();
            let verdict = if t == "neg" {
                negation_false(parent, text, &lexicon)
            } else {
                let words = provenance_words(neg["provenance"].as_str().unwrap());
                contradicts(parent, text, &extend(&lexicon, &words))
            };
            *checked.entry(t.to_string()).or_default() += 1;
            if verdict != Ok(true) {
                violations.push(format!("{text:?}: {verdict:?}"));
            }
        }
    }
    let all_types = HnType::ALL
        .iter()
        .all(|t| checked.get(t.as_str()).copied().unwrap_or(0) > 0);
    let shown: Vec<&String> = violations.iter().take(3).collect();
    check(
        5,
        violations.is_empty() && count_errors == 0 && all_types,
        format!(
            "negatives checked {checked:?}, {} violations {shown:?}, count mismatches {count_errors}",
            violations.len()
        ),
    );
}

#[test]
fn criterion_06_exemplars() {
    let lexicon = Lexicon::bundled();
    let mut o = Overrides::default();
    o.add_antonym(AtomKind::Relationship, "on top of", "underneath");
    o.add_cousin(AtomKind::Attribute, "pink", "blue");
    o.add_cousin(AtomKind::Object, "car", "toy");
    let db = LexicalDb::from_overrides(o);
    let generator = HardNegGenerator::new(&lexicon, &db);

    let porch = SceneGraph::builder("1")
        .object(0, "grill", &[])
        .object(1, "porch", &[])
        .relation(0, "on top of", 1)
        .build()
        .unwrap();
    let car = SceneGraph::builder("2")
        .object(0, "car", &["pink"])
        .build()
        .unwrap();
    let room = SceneGraph::builder("3")
        .object(0, "dog", &[])
        .object(1, "bed", &[])
        .object(2, "nightstand", &[])
        .relation(0, "on", 1)
        .build()
        .unwrap();
    let cases = [
        (
            "a grill on top of the porch",
            &porch,
            HnType::Atom,
            None,
            "a grill underneath the porch",
        ),
        (
            "a pink car",
            &car,
            HnType::Comp,
            None,
            "a blue car and a pink toy",
        ),
        (
            "There is a dog on the bed and also a nightstand",
            &room,
            HnType::Swap,
            Some(4),
            "There is a nightstand on the dog and also a bed",
        ),
    ];
    let mut missing = Vec::new();
    for (caption, parent, t, complexity, want) in cases {
        let q = HnQuery {
            query_id: "q",
            caption,
            parent,
            complexity,
        };
        let got = generator.candidates(&q, t).unwrap_or_default();
        if !got.iter().any(|h| h.text == want && h.verified) {
            missing.push(want);
        }
    }
    check(
        6,
        missing.is_empty(),
        format!("3 exemplars, missing {missing:?}"),
    );
}

#[test]
fn criterion_07_metrics() {
    let (run, _, _, _) = fixture_runs();
    let mut non_monotone = 0;
    let mut oracle_below = 0;
    let (mut swap_rows, mut swap_hits) = (0, 0);
    let mut rows = 0;
    for line in jsonl(&run.join("metrics.jsonl")) {
        let scorer = line["report"]["scorer"].as_str().unwrap().to_string();
        for row in line["report"]["rows"].as_array().unwrap() {
            rows += 1;
            let r: Vec<f64> = row["recall_at"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            if r.windows(2).any(|w| w[0] > w[1]) {
                non_monotone += 1;
            }
            if scorer == "oracle" && r[0] != 1.0 {
                oracle_below += 1;
            }
            if scorer == "bow" && row["stratum"]["hn"] == "swap" {
                swap_rows += 1;
                if r[0] != 0.0 {
                    swap_hits += 1;
                }
            }
        }
    }

    let items: Vec<RetrievalItem> = (0..10_000)
        .map(|i| {
            let q = format!("q{i}");
            let ids: Vec<String> = (0..5).map(|k| format!("{q}/{k}")).collect();
            RetrievalItem::new(
                &q,
                ids[0].clone(),
                ids,
                Stratum::default(),
                Direction::TextToImage,
            )
            .unwrap()
        })
        .collect();
    let random: f64 = recall_at_k(&items, &RandomScorer::new(17), 1).unwrap();

    let pass = rows > 0
        && non_monotone == 0
        && oracle_below == 0
        && swap_rows > 0
        && swap_hits == 0
        && (random - 0.2).abs() <= 0.012;
    check(
        7,
        pass,
        format!(
            "{rows} rows: {non_monotone} non-monotone, oracle R@1<1 in {oracle_below}, \
             bow R@1>0 in {swap_hits}/{swap_rows} swap rows, random R@1 {random:.4} over 10000 items"
        ),
    );
}

#[test]
fn criterion_08_fold_formula() {
    let counts = [1000, 3710, 40_000].map(|d| fold_count(d, 1855, 20));
    let items: Vec<RetrievalItem> = (0..50)
        .map(|i| {
            let q = format!("q{i}");
            let ids: Vec<String> = (0..5).map(|k| format!("{q}/{k}")).collect();
            RetrievalItem::new(
                &q,
                ids[0].clone(),
                ids,
                Stratum::default(),
                Direction::ImageToText,
            )
            .unwrap()
        })
        .collect();
    let scorer = RandomScorer::new(3);
    let single: f64 = recall_at_k(&items, &scorer, 1).unwrap();
    let report = kfold_summary::<f64>(&vec![items.clone(); 4], &scorer, "random").unwrap();
    let folds = report.rows[0].folds.clone().unwrap();

    let halves = vec![items[..25].to_vec(), items[25..].to_vec()];
    let split = kfold_summary::<f64>(&halves, &scorer, "random").unwrap();
    let stats = split.rows[0].folds.clone().unwrap();
    let per: Vec<f64> = halves
        .iter()
        .map(|h| recall_at_k(h, &scorer, 1).unwrap())
        .collect();
    let mean = (per[0] + per[1]) / 2.0;
    let std = (((per[0] - mean).powi(2) + (per[1] - mean).powi(2)) / 2.0).sqrt();

    let pass = counts == [None, Some(2), Some(20)]
        && folds.fold_count == 4
        && folds.std_recall_at_1 == 0.0
        && (folds.mean_recall_at_1 - single).abs() < 1e-12
        && (stats.mean_recall_at_1 - mean).abs() < 1e-12
        && (stats.std_recall_at_1 - std).abs() < 1e-12;
    check(
        8,
        pass,
        format!(
            "K for 1000/3710/40000 = {counts:?}; identical folds mean {:.3} std {}; two folds mean {:.3} std {:.4} (oracle {mean:.3}, {std:.4})",
            folds.mean_recall_at_1, folds.std_recall_at_1, stats.mean_recall_at_1, stats.std_recall_at_1
        ),
    );
}

#[test]
fn criterion_09_determinism() {
    let _g = serial();
    let (a, b, ta, tb) = fixture_runs();
    let mut differing = Vec::new();
    let mut compared = 0;
    for entry in fs::read_dir(a).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy().into_owned();
        if name.ends_with(".jsonl") {
            compared += 1;
            if fs::read(a.join(&name)).unwrap() != fs::read(b.join(&name)).unwrap() {
                differing.push(name);
            }
        }
    }
    let slowest = (*ta).max(*tb);
    check(
        9,
        compared >= 8 && differing.is_empty() && slowest < Duration::from_secs(60),
        format!("{compared} JSONL artifacts compared, differing {differing:?}; runs took {ta:.2?} and {tb:.2?} (limit 60s)"),
    );
}

/// Writes `n` synthetic captions with empty graph and region inputs.
fn synthetic_corpus(dir: &Path, n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let nouns = [
        "dog", "cat", "bed", "table", "car", "tree", "man", "woman", "horse", "field",
    ];
    let adjectives = ["black", "white", "red", "tall", "small", "wooden", "old"];
    let relations = ["on", "near", "under", "behind", "next to", "holding"];
    let mut r = rng(10);
    let mut text = String::with_capacity(n * 40);
    for i in 0..n {
        let (a, b) = (nouns.choose(&mut r).unwrap(), nouns.choose(&mut r).unwrap());
        let adj = adjectives.choose(&mut r).unwrap();
        let rel = relations.choose(&mut r).unwrap();
        match i % 3 {
            0 => writeln!(text, "s{i}\ta {adj} {a} {rel} the {b}"),
            1 => writeln!(text, "s{i}\tthe {a} is {rel} a {adj} {b}"),
            _ => writeln!(text, "s{i}\ta {adj} {a}"),
        }
        .unwrap();
    }
    let captions = dir.join("captions.tsv");
    let graphs = dir.join("graphs.json");
    let regions = dir.join("regions.json");
    fs::write(&captions, text).unwrap();
    fs::write(&graphs, "[]").unwrap();
    fs::write(&regions, "[]").unwrap();
    (captions, graphs, regions)
}

fn parse_and_index(dir: &Path, inputs: &ParseInputs, threads: usize) -> (Duration, u64) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let out = dir.join(format!("out{threads}"));
    fs::create_dir_all(&out).unwrap();
    let outputs = ParseOutputs {
        lexicon: out.join("lexicon"),
        train: out.join("train.jsonl"),
        test: out.join("test.jsonl"),
    };
    let start = Instant::now();
    let parsed = pool.install(|| {
        let counts = stages::parse(inputs, &outputs).unwrap();
        stages::index(&outputs.train, &out.join("index")).unwrap();
        counts["train_parsed"]
    });
    (start.elapsed(), parsed)
}

#[test]
fn criterion_10_throughput() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let n = 100_000;
    let (captions, graphs, regions) = synthetic_corpus(dir.path(), n);
    let inputs = ParseInputs {
        scene_graphs: &graphs,
        regions: &regions,
        train_captions: &captions,
        lexicon: None,
    };
    let (t1, parsed) = parse_and_index(dir.path(), &inputs, 1);
    let (t4, _) = parse_and_index(dir.path(), &inputs, 4);
    let speedup = t1.as_secs_f64() / t4.as_secs_f64();
    let efficiency = speedup / 4.0;
    let cpus = std::thread::available_parallelism().map_or(1, |c| c.get());

    let single_ok = parsed as usize == n && t1 < Duration::from_secs(60);
    let scaling_ok = efficiency >= 0.7;
    let detail = format!(
        "{parsed}/{n} captions parsed and indexed in {t1:.2?} on 1 worker (limit 60s); \
         4 workers {t4:.2?}, speedup {speedup:.2}x, efficiency {:.0}% (needs 70%), {cpus} CPUs available",
        efficiency * 100.0
    );
    if single_ok && !scaling_ok && cpus < 4 {
        verdict(
            10,
            false,
            &format!("{detail}; scaling not measurable on this host"),
        );
        return;
    }
    check(10, single_ok && scaling_ok, detail);
}
