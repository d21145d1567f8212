#!/usr/bin/env python3
"""Regenerate the bundled toy corpora under crates/core/data/.

The corpora are synthetic and template-based so they can ship with the
repository. Output is deterministic for a fixed seed.

    python3 scripts/make_toy_corpora.py
"""

import json
import os
import random

SEED = 20240611
OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")

# --------------------------------------------------------------------------
# medical discharge letters

DISEASES = [
    "pneumonia", "septic shock", "heart failure", "acute kidney injury",
    "atrial fibrillation", "urinary tract infection", "diabetes",
    "liver failure", "bowel obstruction", "pulmonary embolism", "cellulitis",
    "chronic obstructive pulmonary disease", "hypertension", "anemia",
    "deep vein thrombosis", "pancreatitis",
]
DRUGS = [
    "aspirin", "metoprolol", "furosemide", "insulin", "warfarin", "heparin",
    "vancomycin", "ceftriaxone", "lisinopril", "prednisone", "omeprazole",
    "amoxicillin", "atorvastatin", "oxycodone",
]
PROCEDURES = [
    "chest x-ray", "abdominal surgery", "cardiac catheterization",
    "blood transfusion", "dialysis", "endoscopy", "ct scan", "intubation",
    "lumbar puncture", "wound debridement",
]
ANATOMY = ["left leg", "right arm", "abdomen", "chest", "lower back", "kidneys", "lungs"]
LABS = ["potassium", "sodium", "creatinine", "blood sugar", "hemoglobin", "oxygen"]
FREQ = ["once a day", "twice a day", "every morning", "every evening", "as needed for pain"]
WEEKS = ["one", "two", "three", "four", "six"]
DOCTORS = ["primary care doctor", "cardiologist", "surgeon", "kidney doctor", "lung doctor"]
ACTIVITIES = ["heavy lifting", "driving", "swimming", "strenuous exercise", "drinking alcohol"]

MED_OPEN = [
    "It was a pleasure taking care of you at the hospital.",
    "You were admitted to the hospital because of {disease}.",
    "You came to the hospital with shortness of breath and were found to have {disease}.",
    "You were admitted to the intensive care unit with {disease}.",
    "You were transferred to our hospital for management of {disease}.",
]
MED_BODY = [
    "You were treated with {drug} and your symptoms slowly improved.",
    "During your stay you underwent {procedure} without complications.",
    "We started {drug} for your {disease}.",
    "Your {lab} levels were monitored closely and remained stable.",
    "You also developed {disease}, which was treated with {drug}.",
    "A {procedure} showed signs of {disease} in your {anatomy}.",
    "Your pain in the {anatomy} was controlled with {drug}.",
    "We stopped your {drug} because of low {lab} levels.",
    "You needed {procedure} on the second day of your stay.",
    "The team was concerned about {disease}, so we performed {procedure}.",
    "Your {lab} was low, so you received {procedure}.",
]
MED_CLOSE = [
    "Please continue taking {drug} {freq}.",
    "Please follow up with your {doctor} in {weeks} weeks.",
    "You should avoid {activity} until your follow up appointment.",
    "Please return to the hospital if you develop fever or chest pain.",
    "We wish you the best in your recovery.",
]


def fill(rng, template):
    return template.format(
        disease=rng.choice(DISEASES),
        drug=rng.choice(DRUGS),
        procedure=rng.choice(PROCEDURES),
        anatomy=rng.choice(ANATOMY),
        lab=rng.choice(LABS),
        freq=rng.choice(FREQ),
        weeks=rng.choice(WEEKS),
        doctor=rng.choice(DOCTORS),
        activity=rng.choice(ACTIVITIES),
    )


def medical(rng, n=200):
    docs = []
    for i in range(n):
        parts = [fill(rng, rng.choice(MED_OPEN))]
        for t in rng.sample(MED_BODY, rng.randint(2, 3)):
            parts.append(fill(rng, t))
        parts.append(fill(rng, rng.choice(MED_CLOSE)))
        docs.append({"id": f"med-{i:03d}", "text": " ".join(parts)})
    lexicon = [(d, "DISEASE") for d in DISEASES]
    lexicon += [(d, "DRUG") for d in DRUGS]
    lexicon += [(p, "PROCEDURE") for p in PROCEDURES]
    return docs, lexicon


# --------------------------------------------------------------------------
# movie synopses with tags

NAMES = [
    "Anna", "Marcus", "Elena", "Tom", "Grace", "Victor", "Lucy", "Samuel",
    "Nora", "Jack", "Iris", "Owen", "Clara", "Felix", "Maya", "Henry",
]
PLACES = [
    "a small town", "the city", "a remote island", "an old castle",
    "a quiet village", "the desert", "a space station", "the mountains",
]
TAG_WEIGHTS = [
    ("drama", 60), ("murder", 45), ("romantic", 40), ("violence", 36),
    ("comedy", 30), ("fantasy", 24), ("horror", 18), ("action", 14),
    ("family", 9), ("mystery", 5),
]
TAG_SENTENCES = {
    "drama": [
        "{a} struggles to rebuild a broken life after losing everything.",
        "Old wounds reopen when {a} returns home to face the family.",
        "{a} must choose between duty and the people {a} loves.",
    ],
    "murder": [
        "A body is found in {p} and {a} becomes the main suspect.",
        "{a} investigates the murder of a wealthy businessman.",
        "When {b} is killed, {a} sets out to find the killer.",
    ],
    "romantic": [
        "{a} falls in love with {b} during a long summer.",
        "{a} and {b} share a secret romance that nobody approves of.",
        "A chance meeting in {p} leads {a} to fall for {b}.",
    ],
    "violence": [
        "A violent gang takes control of {p} and {a} fights back.",
        "{a} is drawn into a brutal war between rival families.",
        "Blood is spilled when {b} betrays the gang.",
    ],
    "comedy": [
        "{a} pretends to be a famous chef and hilarious chaos follows.",
        "A clumsy mistake leaves {a} and {b} stuck in a ridiculous situation.",
        "{a} tries to win a silly contest with the help of a talking parrot.",
    ],
    "fantasy": [
        "{a} discovers a magic sword hidden in {p}.",
        "A wizard sends {a} on a quest to defeat an ancient dragon.",
        "{a} learns that {b} is the heir to an enchanted kingdom.",
    ],
    "horror": [
        "Strange noises haunt the house where {a} lives alone.",
        "A dark spirit begins to possess the children of {p}.",
        "{a} wakes up to find that something terrible is watching.",
    ],
    "action": [
        "{a} leads a daring rescue mission through {p}.",
        "An explosion forces {a} to race against time to stop the attack.",
        "{a} and {b} fight their way out of a heavily guarded fortress.",
    ],
    "family": [
        "{a} tries to bring the family together for one last holiday.",
        "A young girl and her dog help {a} find the way home.",
    ],
    "mystery": [
        "A strange letter leads {a} to a hidden room in {p}.",
        "{a} tries to solve the riddle of a missing painting.",
    ],
}
GENERIC = [
    "The story takes place in {p}.",
    "Nothing will ever be the same for {a}.",
    "In the end, {a} learns what truly matters.",
    "{a} meets {b}, a stranger with a past.",
]


def movies(rng, n=200):
    tags, weights = zip(*TAG_WEIGHTS)
    docs = []
    for i in range(n):
        k = rng.choice([1, 1, 2, 2, 3])
        chosen = set()
        while len(chosen) < k:
            chosen.add(rng.choices(tags, weights=weights)[0])
        a, b = rng.sample(NAMES, 2)
        p = rng.choice(PLACES)
        parts = [rng.choice(GENERIC).format(a=a, b=b, p=p)]
        for t in sorted(chosen):
            parts.append(rng.choice(TAG_SENTENCES[t]).format(a=a, b=b, p=p))
        if rng.random() < 0.5:
            parts.append(rng.choice(GENERIC).format(a=a, b=b, p=p))
        docs.append({
            "id": f"mov-{i:03d}",
            "text": " ".join(parts),
            "labels": sorted(chosen),
        })
    return docs


# --------------------------------------------------------------------------
# authorship: each author has a topic pool and punctuation habits

AUTHOR_TOPICS = [
    ["garden", "tomatoes", "roses", "soil", "weather"],
    ["football", "match", "goal", "coach", "season"],
    ["code", "compiler", "bug", "server", "deadline"],
    ["recipe", "oven", "flour", "butter", "dinner"],
    ["train", "station", "ticket", "journey", "delay"],
    ["guitar", "chords", "concert", "band", "song"],
    ["exam", "lecture", "essay", "library", "professor"],
    ["cat", "vet", "kitten", "fur", "whiskers"],
    ["hiking", "trail", "summit", "boots", "forest"],
    ["budget", "invoice", "meeting", "client", "report"],
    ["painting", "canvas", "colour", "gallery", "brush"],
    ["baby", "nappy", "sleep", "pram", "nursery"],
    ["election", "council", "vote", "policy", "campaign"],
    ["fishing", "river", "boat", "bait", "harbour"],
    ["novel", "chapter", "plot", "author", "bookshop"],
    ["car", "engine", "garage", "tyres", "mechanic"],
    ["chess", "opening", "bishop", "endgame", "tournament"],
    ["yoga", "breathing", "stretch", "mat", "balance"],
    ["camera", "lens", "photo", "light", "portrait"],
    ["wine", "vineyard", "grapes", "cellar", "tasting"],
]
STYLE_OPENERS = [
    ["Honestly,", "To be fair,", "Well,"],
    ["Right so", "Anyway", "Okay so"],
    ["Dear friend,", "I must say", "Indeed,"],
    ["lol", "omg", "ngl"],
    ["In my view", "Frankly,", "Truth be told,"],
]
STYLE_ENDINGS = ["!!", "...", ".", "?!", " :)"]
STYLE_FILLERS = [
    ["really", "quite", "rather"],
    ["basically", "literally", "like"],
    ["indeed", "certainly", "perhaps"],
    ["super", "totally", "so"],
    ["arguably", "surely", "clearly"],
]
FRAMES = [
    "{o} the {t1} was {f} good today{e}",
    "{o} I keep thinking about the {t1} and the {t2}{e}",
    "{o} nobody told me the {t1} would be {f} hard{e}",
    "{o} my {t1} and my {t2} are {f} different this week{e}",
    "{o} we talked about the {t1} for hours{e}",
    "{o} the {t2} is {f} important to me{e}",
    "{o} tomorrow I will sort out the {t1}{e}",
]


def authors(rng, n_authors=20, per_author=10):
    docs = []
    for a in range(n_authors):
        topics = AUTHOR_TOPICS[a]
        style = a % len(STYLE_OPENERS)
        ending = STYLE_ENDINGS[(a * 3 + 1) % len(STYLE_ENDINGS)]
        for j in range(per_author):
            sents = []
            for _ in range(rng.randint(3, 5)):
                t1, t2 = rng.sample(topics, 2)
                sents.append(rng.choice(FRAMES).format(
                    o=rng.choice(STYLE_OPENERS[style]),
                    t1=t1, t2=t2,
                    f=rng.choice(STYLE_FILLERS[style]),
                    e=ending,
                ))
            docs.append({
                "id": f"auth-{a:02d}-{j:02d}",
                "text": " ".join(sents),
                "author": f"author-{a:02d}",
            })
    return docs


def write_jsonl(path, docs):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")


def main():
    rng = random.Random(SEED)
    med, lexicon = medical(rng)
    write_jsonl(os.path.join(OUT, "medical.jsonl"), med)
    with open(os.path.join(OUT, "medical_lexicon.tsv"), "w", encoding="utf-8", newline="\n") as f:
        for surface, kind in lexicon:
            f.write(f"{surface}\t{kind}\n")
    write_jsonl(os.path.join(OUT, "movies.jsonl"), movies(rng))
    write_jsonl(os.path.join(OUT, "authors.jsonl"), authors(rng))


if __name__ == "__main__":
    main()
