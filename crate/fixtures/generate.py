#!/usr/bin/env python3
"""Regenerates the deterministic fixture files in this directory.

Usage: python3 fixtures/generate.py
"""

import json
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

HERE = Path(__file__).resolve().parent
NOW = datetime(2025, 3, 1, 12, 0, 0, tzinfo=timezone.utc)

TUX_FEED = "at://did:plc:tuxfeed/app.bsky.feed.generator/tuxedo-cats"

CATALOG = [
    ("feed", TUX_FEED, "Tuxedo Cats", "Black and white cats in formal attire", 412),
    ("feed", "at://did:plc:catnet/app.bsky.feed.generator/all-cats", "Cat Pics", "Every cat photo we can find", 980),
    ("feed", "at://did:plc:catnet/app.bsky.feed.generator/kittens", "Kitten Hour", "Small cats, big energy", 233),
    ("feed", "at://did:plc:orange/app.bsky.feed.generator/orange", "Orange Cat Behaviour", "One brain cell, shared among cats", 157),
    ("feed", "at://did:plc:dogpark/app.bsky.feed.generator/dogs", "Good Dogs", "Dogs being dogs", 745),
    ("feed", "at://did:plc:dogpark/app.bsky.feed.generator/puppies", "Puppy Pile", "Puppies and young dogs", 301),
    ("feed", "at://did:plc:dogpark/app.bsky.feed.generator/corgis", "Corgi Corner", "Short legs, long dogs", 88),
    ("feed", "at://did:plc:birds/app.bsky.feed.generator/birds", "Birdwatch", "Bird photography from the field", 512),
    ("feed", "at://did:plc:birds/app.bsky.feed.generator/garden-birds", "Garden Birds", "Feeders, finches and tits", 64),
    ("feed", "at://did:plc:sci/app.bsky.feed.generator/science", "Science", "Papers and posts from working scientists", 3021),
    ("feed", "at://did:plc:sci/app.bsky.feed.generator/astro", "Astronomy", "Telescopes, nebulae and night skies", 877),
    ("feed", "at://did:plc:sci/app.bsky.feed.generator/quantum", "Quantum Computing", "Qubits, error correction and hardware news", 143),
    ("feed", "at://did:plc:sci/app.bsky.feed.generator/climate", "Climate Science", "Research on climate and weather", 410),
    ("feed", "at://did:plc:dev/app.bsky.feed.generator/rust", "Rustaceans", "Posts about the Rust programming language", 655),
    ("feed", "at://did:plc:dev/app.bsky.feed.generator/python", "Python", "Python tips, releases and libraries", 590),
    ("feed", "at://did:plc:dev/app.bsky.feed.generator/webdev", "Web Dev", "Frontend, backend and everything in between", 320),
    ("feed", "at://did:plc:dev/app.bsky.feed.generator/ml", "Machine Learning", "ML research and engineering", 1204),
    ("feed", "at://did:plc:art/app.bsky.feed.generator/art", "Art", "Drawings, paintings and illustration", 2200),
    ("feed", "at://did:plc:art/app.bsky.feed.generator/photo", "Photography", "Photos from the community", 1870),
    ("feed", "at://did:plc:art/app.bsky.feed.generator/pixel", "Pixel Art", "Small pixels, big art", 95),
    ("feed", "at://did:plc:food/app.bsky.feed.generator/baking", "Bread and Baking", "Sourdough and other baking", 276),
    ("feed", "at://did:plc:food/app.bsky.feed.generator/cooking", "Home Cooking", "Weeknight recipes", 198),
    ("feed", "at://did:plc:garden/app.bsky.feed.generator/garden", "Gardening", "Vegetables, flowers and compost", 344),
    ("feed", "at://did:plc:books/app.bsky.feed.generator/books", "Book Club", "What people are reading", 466),
    ("feed", "at://did:plc:books/app.bsky.feed.generator/scifi", "SF Books", "Science fiction reading", 122),
    ("feed", "at://did:plc:music/app.bsky.feed.generator/jazz", "Jazz", "Records, gigs and history", 71),
    ("feed", "at://did:plc:sport/app.bsky.feed.generator/cycling", "Cycling", "Racing and riding", 133),
    ("feed", "at://did:plc:sport/app.bsky.feed.generator/running", "Running", "Training logs and races", 118),
    ("feed", "at://did:plc:news/app.bsky.feed.generator/politics", "Politics", "Election coverage and politics news", 1500),
    ("feed", "at://did:plc:misc/app.bsky.feed.generator/lonely-cats", "Lonely Cats", "A cat feed nobody liked yet", 1),
    ("feed", "at://did:plc:misc/app.bsky.feed.generator/new-dogs", "New Dogs", "Brand new dog feed", 0),
    ("feed", "at://did:plc:pets/app.bsky.feed.generator/rescue", "Rescue Pets", "Adoptable cats and dogs from shelters", 208),
    ("feed", "at://did:plc:pets/app.bsky.feed.generator/hamsters", "Hamster Hub", "Small pets with cheeks", 39),
    ("feed", "at://did:plc:nature/app.bsky.feed.generator/wildlife", "Wildlife", "Wild animals in the wild", 630),
    ("list", "at://did:plc:catnet/app.bsky.graph.list/cat-accounts", "Cat Accounts", "Accounts that post cats daily", 54),
    ("list", "at://did:plc:dogpark/app.bsky.graph.list/dog-accounts", "Dog Accounts", "Dog owners and dog rescues", 41),
    ("list", "at://did:plc:sci/app.bsky.graph.list/physicists", "Physicists", "Working physicists", 77),
    ("list", "at://did:plc:sci/app.bsky.graph.list/quantum-people", "Quantum People", "Researchers in quantum computing", 19),
    ("list", "at://did:plc:dev/app.bsky.graph.list/rust-devs", "Rust Devs", "People building with Rust", 62),
    ("list", "at://did:plc:art/app.bsky.graph.list/illustrators", "Illustrators", "Working illustrators", 140),
    ("list", "at://did:plc:birds/app.bsky.graph.list/birders", "Birders", "Bird photographers", 33),
    ("list", "at://did:plc:books/app.bsky.graph.list/authors", "Authors", "Novelists and poets", 91),
    ("starter_pack", "at://did:plc:catnet/app.bsky.graph.starterpack/cats", "Cat People", "Start here for cats", 25),
    ("starter_pack", "at://did:plc:dogpark/app.bsky.graph.starterpack/dogs", "Dog People", "Start here for dogs", 17),
    ("starter_pack", "at://did:plc:sci/app.bsky.graph.starterpack/science", "Science Starter", "Scientists across fields", 300),
    ("starter_pack", "at://did:plc:dev/app.bsky.graph.starterpack/devs", "Developers", "Software people", 150),
    ("starter_pack", "at://did:plc:art/app.bsky.graph.starterpack/artists", "Artists", "Artists to follow", 120),
    ("starter_pack", "at://did:plc:garden/app.bsky.graph.starterpack/growers", "Growers", "Gardeners and farmers", 12),
    ("starter_pack", "at://did:plc:nature/app.bsky.graph.starterpack/nature", "Nature", "Nature and wildlife photographers", 48),
    ("starter_pack", "at://did:plc:pets/app.bsky.graph.starterpack/pets", "Pet Owners", "Cats, dogs and everything furry", 66),
]

MOCK_RULES = {
    "curate": [
        {"keyword": "tuxedo", "score": 10},
        {"keyword": "kitten", "score": 9},
        {"keyword": "cat", "score": 8},
        {"keyword": "puppy", "score": 7},
        {"keyword": "dog", "score": 6},
        {"keyword": "hamster", "score": 5},
        {"keyword": "bird", "score": 4},
        {"keyword": "weather", "score": 2},
        {"keyword": "politics", "score": 0},
        {"keyword": "sad", "score": 0},
    ],
    "plan": [
        {
            "keyword": "pet",
            "search_terms": ["cats", "dogs"],
            "sources": [
                {"kind": "hashtag", "identifier": "caturday", "display_title": "#caturday"},
                {"kind": "account", "identifier": "petnews.example", "display_title": "Pet News"},
            ],
        },
        {
            "keyword": "quantum",
            "search_terms": ["quantum"],
            "sources": [{"kind": "hashtag", "identifier": "quantumcomputing", "display_title": "#quantumcomputing"}],
        },
        {"keyword": "rust", "search_terms": ["rust"], "sources": []},
    ],
}


def iso(t):
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def post(uri, author, text, created, likes, reposts, replies, alt=None):
    p = {
        "uri": uri,
        "author": author,
        "text": text,
        "created_at": iso(created),
        "likes": likes,
        "reposts": reposts,
        "replies": replies,
    }
    if alt is not None:
        p["media"] = [{"media_type": "image", "url": f"https://cdn.example/{uri.rsplit('/', 1)[-1]}.jpg", "alt": alt}]
    return p


def corpus_20():
    """20 posts over three sources; exactly four hit a score-0 keyword."""
    rows = [
        (TUX_FEED, "my tuxedo cat sleeping on the radiator", 12, 3, 1, None),
        (TUX_FEED, "formal wear, fluffy edition", 8, 0, 2, "a tuxedo cat in a bow tie"),
        (TUX_FEED, "he knocked the glass off the table again", 3, 1, 0, "black and white cat looking guilty"),
        (TUX_FEED, "new kitten day!", 40, 9, 12, None),
        (TUX_FEED, "the politics of who gets the sunny spot", 5, 0, 1, None),
        (TUX_FEED, "vet visit went fine", 2, 0, 0, None),
        (TUX_FEED, "look at these mittens", 7, 2, 3, "white paws on a black cat"),
        (TUX_FEED, "sad news, our old boy passed away", 30, 2, 20, None),
        ("caturday", "happy #caturday everyone", 15, 4, 2, "orange cat stretching"),
        ("caturday", "two kittens, one box", 22, 6, 5, None),
        ("caturday", "weather is grim so we nap", 1, 0, 0, None),
        ("caturday", "#caturday and the puppy is jealous", 9, 1, 4, None),
        ("caturday", "election night, cat on the keyboard, politics muted", 4, 0, 0, None),
        ("caturday", "window birds are the best tv", 6, 0, 1, None),
        ("petnews.example", "shelter spotlight: a very good dog", 18, 7, 2, None),
        ("petnews.example", "hamster wheel noise at 3am", 3, 0, 6, None),
        ("petnews.example", "a sad day at the rescue", 11, 3, 9, None),
        ("petnews.example", "puppy training tip of the week", 14, 5, 3, None),
        ("petnews.example", "adoption fair this weekend", 6, 2, 0, None),
        ("petnews.example", "reader photos: a bird on a dog", 9, 1, 1, None),
    ]
    out = []
    for i, (src, text, likes, reposts, replies, alt) in enumerate(rows):
        created = NOW - timedelta(hours=2 * i + 1, minutes=7 * (i % 5))
        author = "did:plc:tuxfeedposter" if src == TUX_FEED else f"did:plc:{src.split('.')[0]}{i % 3}"
        uri = f"at://{author}/app.bsky.feed.post/c20p{i:02d}"
        out.append({"source_identifier": src, "post": post(uri, author, text, created, likes, reposts, replies, alt)})
    return out


def feed_config(feed_id, description, sources, include, limit, ranking="balanced"):
    return {
        "feed_id": feed_id,
        "owner": "did:plc:fixtureowner",
        "description": description,
        "sources": [
            {"kind": k, "identifier": ident, "display_title": title, "origin": "user_added"}
            for (k, ident, title) in sources
        ],
        "include_prompts": [
            {"prompt_id": f"include-{i + 1}", "text": t, "polarity": "include", "strength": s}
            for i, (t, s) in enumerate(include)
        ],
        "limit_prompts": [
            {"prompt_id": f"limit-{i + 1}", "text": t, "polarity": "limit", "strength": s}
            for i, (t, s) in enumerate(limit)
        ],
        "ranking": ranking,
        "active": True,
        "created_at": iso(NOW - timedelta(days=1)),
        "updated_at": iso(NOW - timedelta(days=1)),
    }


def catalog_search(term, limit=3):
    term = term.lower()
    hits = [
        e
        for e in CATALOG
        if not (e[0] == "feed" and e[4] < 2) and (term in e[2].lower() or term in e[3].lower())
    ]
    hits.sort(key=lambda e: (-e[4], e[2], e[1]))
    return hits[:limit]


WORDS = {
    "good": ["tuxedo cat", "kitten", "cat", "puppy", "dog", "hamster", "bird", "rescue cat", "old dog"],
    "neutral": ["sunset walk", "coffee", "new shoes", "weekend plans", "a long queue", "the bus"],
    "bad": ["politics", "sad farewell"],
}


def corpus_500():
    """Posts for every source the pet plan produces, 500 in total."""
    sources = [e[1] for e in catalog_search("cats")] + [e[1] for e in catalog_search("dogs")]
    sources += ["caturday", "petnews.example", "adorable pet pictures"]
    rng = random.Random(500)
    out = []
    for i in range(500):
        src = sources[i % len(sources)]
        roll = rng.random()
        if roll < 0.6:
            topic = rng.choice(WORDS["good"])
        elif roll < 0.9:
            topic = rng.choice(WORDS["neutral"])
        else:
            topic = rng.choice(WORDS["bad"])
        text = f"post {i}: thoughts on {topic}"
        created = NOW - timedelta(minutes=rng.randrange(0, 95 * 60))
        author = f"did:plc:user{rng.randrange(0, 60):02d}"
        alt = "photo of a " + topic if rng.random() < 0.2 else None
        uri = f"at://{author}/app.bsky.feed.post/e500p{i:03d}"
        likes, reposts, replies = rng.randrange(0, 200), rng.randrange(0, 40), rng.randrange(0, 60)
        out.append({"source_identifier": src, "post": post(uri, author, text, created, likes, reposts, replies, alt)})
    # The newest post pins the default clock for `bonsai run`.
    out[0]["post"]["created_at"] = iso(NOW)
    return out


def write_jsonl(name, rows):
    with open(HERE / name, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def write_json(name, value):
    with open(HERE / name, "w") as f:
        json.dump(value, f, indent=2)
        f.write("\n")


def main():
    write_jsonl(
        "catalog.jsonl",
        [{"kind": k, "uri": u, "title": t, "description": d, "likes": l} for (k, u, t, d, l) in CATALOG],
    )
    write_json("mock_rules.json", MOCK_RULES)
    write_jsonl("corpus_20.jsonl", corpus_20())
    write_jsonl("corpus_500.jsonl", corpus_500())
    write_json(
        "feed_pets.json",
        feed_config(
            "pets",
            "adorable pet pictures, no sad content",
            [
                ("feed", TUX_FEED, "Tuxedo Cats"),
                ("hashtag", "caturday", "#caturday"),
                ("account", "petnews.example", "Pet News"),
            ],
            [("posts about cats", "strongly_preferred"), ("posts about dogs", "preferred")],
            [("posts about sad content", "never_shown"), ("posts about politics", "never_shown")],
        ),
    )


if __name__ == "__main__":
    main()
