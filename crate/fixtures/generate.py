#!/usr/bin/env python3
"""Regenerates the synthetic fixture datasets and images.

Deterministic: a fixed seed drives every choice, so rerunning produces
byte-identical files.
"""

import json
import random
import re
from pathlib import Path

from PIL import Image

ROOT = Path(__file__).resolve().parent
DATASETS = ROOT / "datasets"
IMAGES = ROOT / "images"

EVENTS = [
    "movement_transport",
    "contact_phone_write",
    "conflict_attack",
    "contact_meet",
    "justice_arrest_jail",
    "conflict_demonstrate",
    "life_die",
    "transaction_transfer_money",
]

PALETTE = [
    (200, 40, 40), (40, 160, 60), (40, 80, 200), (220, 180, 30),
    (130, 50, 160), (20, 170, 170), (90, 90, 90), (240, 120, 20),
    (250, 250, 250), (10, 10, 10), (160, 110, 70), (100, 200, 240),
]


def write_images():
    IMAGES.mkdir(parents=True, exist_ok=True)
    names = []
    for i, color in enumerate(PALETTE):
        img = Image.new("RGB", (8, 8), color)
        # a corner pixel keeps every file distinct even for similar colours
        img.putpixel((i % 8, i // 8), (255 - color[0], 255 - color[1], 255 - color[2]))
        name = f"img_{i:02d}.png"
        img.save(IMAGES / name, format="PNG", optimize=False)
        names.append(name)
    return names


def word_offset(text, surface):
    """Char offset of `surface` as a whole word; its first raw occurrence must be that word."""
    m = re.search(r"(?<!\w)" + re.escape(surface) + r"(?!\w)", text)
    assert m is not None, (text, surface)
    assert text.find(surface) == m.start(), (text, surface)
    return m.start()


def header(schema, task):
    return {"format": "mqa-dataset", "version": 1, "schema": schema, "task": task}


def dump(path, schema, task, records):
    DATASETS.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(header(schema, task), separators=(",", ":")) + "\n")
        for r in records:
            f.write(json.dumps(r, separators=(",", ":"), ensure_ascii=False) + "\n")


PEOPLE = ["Angela Merkel", "Serena Williams", "Lionel Messi", "Taylor Swift", "Barack Obama",
          "Emma Watson", "Roger Federer", "Kanye West", "Justin Trudeau", "Oprah Winfrey",
          "Usain Bolt", "Adele", "Elon Musk", "Malala Yousafzai"]
ORGS = ["NASA", "Google", "the UN", "Real Madrid", "Greenpeace", "BBC", "Toyota", "UNICEF",
        "Microsoft", "the Red Cross", "FIFA", "Reuters"]
LOCS = ["Berlin", "Toronto", "Kenya", "Brazil", "Tokyo", "London", "Sydney", "Chicago",
        "Madrid", "Cairo", "Norway", "Seoul"]
MISC = ["Olympics", "Wimbledon", "Grammys", "Ramadan", "Brexit", "Oscars", "Super Bowl", "Halloween"]

MNER_PATTERNS = [
    ("RT @news : {per} visits {loc} with {org} officials", ["per", "loc", "org"]),
    ("{per} and {per2} spotted at the {misc} in {loc}", ["per", "per2", "misc", "loc"]),
    ("{org} announces new partnership in {loc} today", ["org", "loc"]),
    ("Watching {per} on TV tonight #excited", ["per"]),
    ("{loc} weather looks great for the {misc}", ["loc", "misc"]),
    ("Huge crowds gather outside {org} headquarters", ["org"]),
    ("What a beautiful morning for a walk", []),
    ("{per} thanks fans after {misc} win", ["per", "misc"]),
    ("Flights from {loc} to {loc2} cancelled by storm", ["loc", "loc2"]),
    ("{org} and {org2} sign climate pledge", ["org", "org2"]),
    ("So tired of this rain honestly", []),
    ("{per} joins {org} board as adviser", ["per", "org"]),
]
MNER_LABEL = {"per": "person", "per2": "person", "org": "organization", "org2": "organization",
              "loc": "location", "loc2": "location", "misc": "miscellaneous"}


def mner(rng, n):
    out = []
    for i in range(n):
        pattern, slots = MNER_PATTERNS[i % len(MNER_PATTERNS)]
        people = rng.sample(PEOPLE, 2)
        orgs = rng.sample(ORGS, 2)
        locs = rng.sample(LOCS, 2)
        fill = {"per": people[0], "per2": people[1], "org": orgs[0], "org2": orgs[1],
                "loc": locs[0], "loc2": locs[1], "misc": rng.choice(MISC)}
        text = pattern.format(**fill)
        ents = []
        for slot in slots:
            surface = fill[slot]
            ents.append({"surface": surface, "start": word_offset(text, surface), "label": MNER_LABEL[slot]})
        rec = {"id": f"mner-{i:03d}", "task": "mner", "sentence": {"text": text}, "gold": {"entities": ents}}
        if i % 3 == 0:
            rec["image"] = f"../images/img_{i % len(PALETTE):02d}.png"
        out.append(rec)
    return out


MRE_PAIRS = [
    ("per", "per", "{h} and sibling {t} attended the premiere", "per_per_siblings"),
    ("per", "per", "{h} posted a photo with spouse {t}", "per_per_couple"),
    ("per", "per", "{h} proudly watched their child {t} graduate", "per_per_parent"),
    ("per", "per", "{h} files lawsuit against {t}", "per_per_charges"),
    ("per", "org", "{h} signs a new contract with {t}", "per_org_member_of"),
    ("per", "loc", "{h} was born and raised in {t}", "per_loc_place_of_birth"),
    ("per", "loc", "{h} enjoys life at home in {t}", "per_loc_place_of_residence"),
    ("org", "loc", "{h} opens its new office in {t}", "org_loc_locate_at"),
    ("org", "org", "{h} completes takeover of {t}", "org_org_subsidiary"),
    ("loc", "loc", "Tourists flock to {h} in northern {t}", "loc_loc_contain"),
    ("per", "misc", "{h} arrives for the {t} ceremony", "per_misc_present_in"),
    ("misc", "loc", "The {h} will be staged in {t} next year", "misc_loc_held_on"),
    ("per", "org", "{h} criticised {t} in a radio interview", "nota"),
    ("per", "loc", "{h} tweeted about the traffic in {t}", "nota"),
    ("org", "loc", "{h} reporters were covering protests near {t}", "nota"),
]
POOL = {"per": PEOPLE, "org": ORGS, "loc": LOCS, "misc": MISC}
CITY_REGION = [("Kyoto", "Japan"), ("Milan", "Italy"), ("Lyon", "France"), ("Porto", "Portugal")]


def mre(rng, n):
    out = []
    for i in range(n):
        ht, tt, pattern, rel = MRE_PAIRS[i % len(MRE_PAIRS)]
        if rel == "loc_loc_contain":
            h, t = rng.choice(CITY_REGION)
        else:
            h, t = rng.sample(POOL[ht], 2) if ht == tt else (rng.choice(POOL[ht]), rng.choice(POOL[tt]))
        text = pattern.format(h=h, t=t)
        rec = {
            "id": f"mre-{i:03d}",
            "task": "mre",
            "sentence": {"text": text},
            "image": f"../images/img_{i % len(PALETTE):02d}.png",
            "gold": {
                "head": {"surface": h, "start": word_offset(text, h)},
                "head_type": ht,
                "tail": {"surface": t, "start": word_offset(text, t)},
                "tail_type": tt,
                "relation": rel,
            },
        }
        out.append(rec)
    return out


CAPTION = "This is an image attached to a news article."


def write_scenes(n):
    # one image per runnable MIED instance: the caption is shared, so the
    # image alone tells instances apart
    for i in range(n):
        img = Image.new("RGB", (8, 8), PALETTE[i % len(PALETTE)])
        img.putpixel((i % 8, i // 8 % 8), (i * 37 % 256, i * 91 % 256, i * 53 % 256))
        img.save(IMAGES / f"scene_{i:02d}.png", format="PNG", optimize=False)


def mied(rng, n, prefix, weights=None, scenes=False):
    labels = EVENTS + ["nota"]
    weights = weights or [1] * len(labels)
    out = []
    for i in range(n):
        event = labels[i % len(labels)] if n <= 100 else rng.choices(labels, weights)[0]
        shared = f"../images/img_{rng.randrange(len(PALETTE)):02d}.png"
        out.append({
            "id": f"{prefix}-{i:04d}",
            "task": "mied",
            "sentence": {"text": CAPTION},
            "image": f"../images/scene_{i:02d}.png" if scenes else shared,
            "gold": {"event": event},
        })
    return out


MTED_PATTERNS = [
    ("Rebels {w} the convoy near the border", [("attacked", "conflict_attack")]),
    ("Police {w} three suspects after the robbery", [("arrested", "justice_arrest_jail")]),
    ("The minister {w} to Paris for the summit", [("flew", "movement_transport")]),
    ("Leaders {w} in Geneva to discuss the ceasefire", [("met", "contact_meet")]),
    ("Thousands {w} outside parliament on Sunday", [("protested", "conflict_demonstrate")]),
    ("Two soldiers {w} in the ambush", [("died", "life_die")]),
    ("The bank {w} funds to the charity", [("transferred", "transaction_transfer_money")]),
    ("She {w} a letter to the governor", [("wrote", "contact_phone_write")]),
    ("The weather was mild and sunny", []),
    ("Officials {w} the capital after troops {w2} the city", [("fled", "movement_transport"), ("shelled", "conflict_attack")]),
    ("The president {w} the victims' families and {w2} donations", [("called", "contact_phone_write"), ("paid", "transaction_transfer_money")]),
    ("The museum reopened its doors this week", []),
]
MTED_ALTS = {
    "conflict_attack": ["attacked", "bombed", "raided", "shelled"],
    "justice_arrest_jail": ["arrested", "detained", "jailed"],
    "movement_transport": ["flew", "traveled", "moved", "fled"],
    "contact_meet": ["met", "gathered", "convened"],
    "conflict_demonstrate": ["protested", "marched", "rallied"],
    "life_die": ["died", "perished"],
    "transaction_transfer_money": ["transferred", "donated", "paid"],
    "contact_phone_write": ["wrote", "emailed", "called"],
}


def mted(rng, n):
    out = []
    for i in range(n):
        pattern, slots = MTED_PATTERNS[i % len(MTED_PATTERNS)]
        words = {}
        triggers = []
        for key, (_, label) in zip(["w", "w2"], slots):
            choices = [w for w in MTED_ALTS[label] if w not in words.values()]
            words[key] = rng.choice(choices)
        text = pattern.format(**words)
        for key, (_, label) in zip(["w", "w2"], slots):
            w = words[key]
            triggers.append({"surface": w, "start": word_offset(text, w), "label": label})
        out.append({
            "id": f"mted-{i:03d}",
            "task": "mted",
            "sentence": {"text": text},
            "gold": {"triggers": triggers},
        })
    return out


def main():
    rng = random.Random(20240611)
    write_images()
    write_scenes(54)
    dump(DATASETS / "mner.jsonl", "twitter17", "mner", mner(rng, 60))
    dump(DATASETS / "mre.jsonl", "mnre_v2", "mre", mre(rng, 60))
    dump(DATASETS / "mied.jsonl", "m2e2_image", "mied", mied(rng, 54, "mied", scenes=True))
    dump(DATASETS / "mted.jsonl", "m2e2_text", "mted", mted(rng, 60))
    skew = [30, 6, 25, 12, 8, 10, 9, 4, 40]
    dump(DATASETS / "mied_1000.jsonl", "m2e2_image", "mied", mied(rng, 1000, "med", skew))


if __name__ == "__main__":
    main()
