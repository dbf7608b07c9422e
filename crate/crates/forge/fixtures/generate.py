#!/usr/bin/env python3
"""Writes the miniature fixture corpus under fixtures/mini.

Output is fully determined by SEED; rerunning reproduces the checked-in
files byte for byte.
"""

import json
import random
from pathlib import Path

SEED = 20240617
OUT = Path(__file__).resolve().parent / "mini"

TAXONOMY = {
    "vehicle": ("artifact", ["car", "truck", "bus", "bike", "boat"]),
    "plaything": ("artifact", ["toy", "ball", "kite"]),
    "furniture": ("artifact", ["bed", "table", "chair", "bench", "nightstand", "lamp"]),
    "structure": ("artifact", ["building", "porch", "fence", "wall", "house"]),
    "container": ("artifact", ["cup", "bowl", "plate", "bag"]),
    "clothing": ("artifact", ["hat", "shirt"]),
    "device": ("artifact", ["grill", "umbrella"]),
    "animal": ("organism", ["dog", "cat", "horse", "bird", "cow", "sheep"]),
    "person": ("organism", ["man", "woman", "boy", "girl"]),
    "plant": ("organism", ["tree", "bush", "flower"]),
    "region": ("location", ["field", "road"]),
    "chromatic_color": ("color", ["red", "blue", "pink", "green", "yellow", "brown"]),
    "achromatic_color": ("color", ["black", "white", "gray"]),
}
ROOTS = ["artifact", "organism", "location", "color"]

ADJ_ANTONYMS = [("black", "white"), ("tall", "short"), ("small", "large"), ("old", "young"), ("wet", "dry"), ("empty", "full")]

NOUNS = [w for cat, (sup, ws) in TAXONOMY.items() if sup != "color" for w in ws]
COLORS = TAXONOMY["chromatic_color"][1] + TAXONOMY["achromatic_color"][1]
ATTRIBUTES = COLORS + ["tall", "short", "small", "large", "old", "young", "wooden", "striped", "furry", "wet", "dry", "shiny", "empty"]
RELATIONS = ["on", "under", "near", "behind", "in front of", "next to", "beside", "above", "below", "holding", "riding", "wearing", "carrying", "inside"]

OVERRIDES = [
    ("antonym", "relationship", "on top of", "underneath"),
    ("antonym", "relationship", "on", "under"),
    ("antonym", "relationship", "above", "below"),
    ("antonym", "relationship", "in front of", "behind"),
    ("antonym", "relationship", "inside", "outside"),
    ("cousin", "relationship", "near", "beside"),
    ("cousin", "relationship", "near", "next to"),
    ("cousin", "relationship", "beside", "next to"),
    ("cousin", "relationship", "holding", "carrying"),
    ("cousin", "relationship", "wearing", "holding"),
]

# Never shown to the training corpus, so records using them are unseen-atom.
HELD_OUT = {"umbrella", "kite", "sheep", "striped", "shiny"}

SIZES = [(800, 600), (640, 480), (1024, 768), (600, 800), (1000, 1000)]


def article(phrase):
    return "an" if phrase[0] in "aeiou" else "a"


def np(name, attrs, det=None, joiner=" "):
    words = f"{joiner.join(attrs)} {name}" if attrs else name
    return f"{det or article(words)} {words}"


class Image:
    def __init__(self, image_id, size):
        self.image_id = image_id
        self.width, self.height = size
        self.objects = []
        self.edges = []

    def add(self, name, attrs, box):
        oid = self.image_id * 100 + len(self.objects) + 1
        self.objects.append({"object_id": oid, "names": [name], "attributes": attrs, "x": box[0], "y": box[1], "w": box[2], "h": box[3]})
        return oid

    def relate(self, s, r, o):
        self.edges.append({"subject_id": s, "predicate": r, "object_id": o})

    def obj(self, oid):
        return next(o for o in self.objects if o["object_id"] == oid)

    def to_json(self):
        return {"image_id": self.image_id, "width": self.width, "height": self.height, "objects": self.objects, "relationships": self.edges}


def random_box(rng, w, h):
    bw = rng.randint(w // 4, w * 3 // 5)
    bh = rng.randint(h // 4, h * 3 // 5)
    return (rng.randint(0, w - bw), rng.randint(0, h - bh), bw, bh)


def union(boxes):
    x0 = min(b[0] for b in boxes)
    y0 = min(b[1] for b in boxes)
    x1 = max(b[0] + b[2] for b in boxes)
    y1 = max(b[1] + b[3] for b in boxes)
    return (x0, y0, x1 - x0, y1 - y0)


def box_of(o):
    return (o["x"], o["y"], o["w"], o["h"])


def pick_attributes(rng, k):
    out = []
    while len(out) < k:
        a = rng.choice(ATTRIBUTES)
        if a in out or any(a in pair and (set(pair) - {a}) <= set(out) for pair in ADJ_ANTONYMS):
            continue
        if a in COLORS and any(c in COLORS for c in out):
            continue
        out.append(a)
    return out


def random_image(rng, image_id):
    img = Image(image_id, rng.choice(SIZES))
    names = rng.sample(NOUNS, rng.randint(3, 6))
    ids = [img.add(n, pick_attributes(rng, rng.choice([0, 1, 1, 2])), random_box(rng, img.width, img.height)) for n in names]
    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]]
    rng.shuffle(pairs)
    for a, b in pairs[: rng.randint(len(ids) - 1, len(ids) + 1)]:
        s, o = (a, b) if rng.random() < 0.5 else (b, a)
        img.relate(s, rng.choice(RELATIONS), o)
    return img


def special_images():
    grill = Image(1, (800, 600))
    g = grill.add("grill", ["black"], (200, 80, 300, 220))
    p = grill.add("porch", ["wooden"], (60, 250, 680, 330))
    m = grill.add("man", ["tall"], (520, 40, 200, 420))
    c = grill.add("cup", ["red"], (600, 200, 60, 60))
    grill.relate(g, "on top of", p)
    grill.relate(m, "holding", c)
    grill.relate(m, "near", p)

    car = Image(2, (1024, 768))
    k = car.add("car", ["pink"], (100, 380, 420, 260))
    b = car.add("building", ["tall", "old"], (450, 40, 500, 600))
    t = car.add("tree", ["green"], (20, 60, 260, 420))
    car.relate(k, "near", b)
    car.relate(t, "behind", k)

    bed = Image(3, (800, 600))
    d = bed.add("dog", ["brown"], (220, 150, 260, 200))
    e = bed.add("bed", ["white"], (120, 200, 480, 320))
    n = bed.add("nightstand", ["wooden"], (620, 260, 160, 220))
    lamp = bed.add("lamp", ["small"], (650, 120, 90, 150))
    bed.relate(d, "on", e)
    bed.relate(lamp, "on", n)

    regions = {
        1: [("a grill on top of the porch", [g, p], {g: [], p: []}, [(g, "on top of", p)]),
            ("a tall man holding a red cup", [m, c], {m: ["tall"], c: ["red"]}, [(m, "holding", c)]),
            ("a black grill", [g], {g: ["black"]}, [])],
        2: [("a pink car", [k], {k: ["pink"]}, []),
            ("a tall building", [b], {b: ["tall"]}, []),
            ("a pink car near the old building", [k, b], {k: ["pink"], b: ["old"]}, [(k, "near", b)])],
        3: [("There is a dog on the bed and also a nightstand", [d, e, n], {d: [], e: [], n: []}, [(d, "on", e)]),
            ("a small lamp on the wooden nightstand", [lamp, n], {lamp: ["small"], n: ["wooden"]}, [(lamp, "on", n)]),
            ("a brown dog", [d], {d: ["brown"]}, [])],
    }
    return [grill, car, bed], regions


def random_regions(rng, img):
    out = []
    with_attrs = [o for o in img.objects if o["attributes"]]
    for _ in range(rng.randint(3, 5)):
        kind = rng.random()
        if kind < 0.35 and with_attrs:
            o = rng.choice(with_attrs)
            attrs = rng.sample(o["attributes"], rng.randint(1, len(o["attributes"])))
            joiner = " and " if len(attrs) == 2 and rng.random() < 0.5 else " "
            text = np(o["names"][0], attrs, joiner=joiner)
            out.append((text, [o["object_id"]], {o["object_id"]: attrs}, []))
        elif kind < 0.9 and img.edges:
            e = rng.choice(img.edges)
            s, o = img.obj(e["subject_id"]), img.obj(e["object_id"])
            sa = [a for a in s["attributes"] if rng.random() < 0.5]
            oa = [a for a in o["attributes"] if rng.random() < 0.5]
            text = f"{np(s['names'][0], sa)} {e['predicate']} {np(o['names'][0], oa, det=rng.choice(['a', 'the']) if not oa else None)}"
            out.append((text, [s["object_id"], o["object_id"]], {s["object_id"]: sa, o["object_id"]: oa}, [(s["object_id"], e["predicate"], o["object_id"])]))
        else:
            o = rng.choice(img.objects)
            out.append((np(o["names"][0], []), [o["object_id"]], {o["object_id"]: []}, []))
    return out


def gold_graph(image_id, members, attrs, edges, img):
    local = {oid: i for i, oid in enumerate(members)}
    return {
        "image_id": str(image_id),
        "objects": [{"id": local[oid], "name": img.obj(oid)["names"][0], "attributes": attrs[oid]} for oid in members],
        "relationships": [{"subject_id": local[s], "predicate": r, "object_id": local[o]} for s, r, o in edges],
    }


def region_atoms(text):
    return set(text.lower().replace(",", " ").split())


def wordnet_files():
    offsets = {}
    next_offset = [1000]

    def off(key):
        if key not in offsets:
            offsets[key] = next_offset[0]
            next_offset[0] += 100
        return offsets[key]

    parents = {r: "entity" for r in ROOTS}
    for cat, (sup, words) in TAXONOMY.items():
        parents[cat] = sup
        for w in words:
            parents[w] = cat
    synsets = ["entity"] + ROOTS + list(TAXONOMY) + [w for _, ws in TAXONOMY.values() for w in ws]
    children = {}
    for s in synsets:
        if s in parents:
            children.setdefault(parents[s], []).append(s)
    index_noun, data_noun = [], []
    for s in synsets:
        ptrs = []
        if s in parents:
            ptrs.append(f"@ {off(parents[s]):08d} n 0000")
        ptrs += [f"~ {off(c):08d} n 0000" for c in children.get(s, [])]
        data_noun.append(f"{off(s):08d} 03 n 01 {s} 0 {len(ptrs):03d} {' '.join(ptrs)} | {s.replace('_', ' ')}")
        index_noun.append((s, f"{s} n 1 1 @ 1 0 {off(s):08d}"))
    index_adj, data_adj = [], []
    for a, b in ADJ_ANTONYMS:
        for x, y in ((a, b), (b, a)):
            data_adj.append(f"{off('adj:' + x):08d} 00 a 01 {x} 0 001 ! {off('adj:' + y):08d} a 0101 | {x}")
            index_adj.append((x, f"{x} a 1 1 ! 1 0 {off('adj:' + x):08d}"))
    header = "  1 miniature lexical database for fixtures"
    return {
        "index.noun": "\n".join([header] + [l for _, l in sorted(index_noun)]) + "\n",
        "data.noun": "\n".join([header] + data_noun) + "\n",
        "index.adj": "\n".join([header] + [l for _, l in sorted(index_adj)]) + "\n",
        "data.adj": "\n".join([header] + data_adj) + "\n",
    }


def few_shot_bank(rng, complexities):
    out = []
    for n in complexities:
        for k in range(5):
            names = rng.sample([w for w in NOUNS if w not in HELD_OUT], 6)
            objects = [{"id": 0, "name": names[0], "attributes": []}]
            edges = []
            atoms = 1
            while atoms < n:
                if n - atoms >= 2 and len(objects) < len(names) and rng.random() < 0.6:
                    new = len(objects)
                    objects.append({"id": new, "name": names[new], "attributes": []})
                    edges.append({"subject_id": rng.randrange(new), "predicate": rng.choice(RELATIONS), "object_id": new})
                    atoms += 2
                else:
                    o = rng.choice(objects)
                    choices = [a for a in ATTRIBUTES if a not in o["attributes"] and a not in HELD_OUT]
                    if len(o["attributes"]) >= 2:
                        continue
                    o["attributes"].append(rng.choice(choices))
                    atoms += 1

            def phrase(i):
                o = objects[i]
                return " and ".join(o["attributes"] + [o["name"]]) if len(o["attributes"]) > 1 else " ".join(o["attributes"] + [o["name"]])

            clauses = [f"{phrase(e['subject_id'])} {e['predicate']} {phrase(e['object_id'])}" for e in edges] or [phrase(0)]
            caption = ", ".join(clauses)
            caption = caption[0].upper() + caption[1:] + "."
            graph = {"image_id": f"shot-{n}-{k}", "objects": objects, "relationships": edges}
            out.append({"n": n, "graph": graph, "caption": caption})
    return out


CONFIG = """seed = 17
out = "out"

[paths]
scene_graphs = "scene_graphs.json"
regions = "region_descriptions.json"
train_captions = "train_captions.tsv"
wordnet = "wordnet"
few_shot = "few_shot.jsonl"
parser_gold = "parser_gold.jsonl"

[walk]
complexities = [4, 5, 6, 7, 8]
samples_per_image = 2

[caption]
engine = "mock"
cutover = 5

[eval]
fold_size = 8
scorers = ["oracle", "random", "bow"]
"""


def main():
    rng = random.Random(SEED)
    images, regions = special_images()
    for image_id in range(4, 51):
        img = random_image(rng, image_id)
        images.append(img)
        regions[image_id] = random_regions(rng, img)

    region_json, gold, train = [], [], []
    region_id = 1001
    for img in images:
        rows = []
        for text, members, attrs, edges in regions[img.image_id]:
            box = union([box_of(img.obj(m)) for m in members])
            if rng.random() < 0.12:
                box = (box[0], box[1], min(box[2], 150), min(box[3], 120))
            rows.append({"region_id": region_id, "image_id": img.image_id, "phrase": text, "x": box[0], "y": box[1], "width": box[2], "height": box[3]})
            if len(gold) < 40:
                gold.append({"caption_id": str(region_id), "text": text, "graph": gold_graph(img.image_id, members, attrs, edges, img)})
            if not region_atoms(text) & HELD_OUT:
                r = rng.random()
                if r < 0.5:
                    train.append(text.replace("the ", "a ", 1) if rng.random() < 0.5 else text)
                elif r < 0.7 and attrs[members[0]]:
                    train.append(np(img.obj(members[0])["names"][0], attrs[members[0]][:1]))
            region_id += 1
        region_json.append({"id": img.image_id, "regions": rows})

    plain_nouns = [w for w in NOUNS if w not in HELD_OUT]
    plain_attrs = [a for a in ATTRIBUTES if a not in HELD_OUT]
    for _ in range(250):
        if rng.random() < 0.5:
            train.append(np(rng.choice(plain_nouns), [rng.choice(plain_attrs)]))
        else:
            s, o = rng.sample(plain_nouns, 2)
            train.append(f"{np(s, [rng.choice(plain_attrs)])} {rng.choice(RELATIONS)} {np(o, [], det='the')}")
    rng.shuffle(train)
    lines = [f"t{i:04d}\t{t}" for i, t in enumerate(train)]
    lines[10:10] = ["t9001\thello there", "t9002\t   ", "a line without columns"]

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "wordnet").mkdir(exist_ok=True)
    (OUT / "scene_graphs.json").write_text(json.dumps([i.to_json() for i in images], indent=1) + "\n")
    (OUT / "region_descriptions.json").write_text(json.dumps(region_json, indent=1) + "\n")
    (OUT / "train_captions.tsv").write_text("\n".join(lines) + "\n")
    (OUT / "parser_gold.jsonl").write_text("".join(json.dumps(g) + "\n" for g in gold))
    (OUT / "few_shot.jsonl").write_text("".join(json.dumps(e) + "\n" for e in few_shot_bank(rng, range(5, 9))))
    for name, body in wordnet_files().items():
        (OUT / "wordnet" / name).write_text(body)
    (OUT / "wordnet" / "overrides.tsv").write_text("".join("\t".join(r) + "\n" for r in OVERRIDES))
    (OUT / "forge.toml").write_text(CONFIG)


if __name__ == "__main__":
    main()
