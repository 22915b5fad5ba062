"""Generates the bundled 200+200 recipe fixture under data/fixture/.

Raw corpora include a few malformed records (empty fields, emoji) so the
clean stage has something to reject or strip. Output is deterministic.

    python3 tests/fixtures/make_pipeline_fixture.py
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[2] / "data" / "fixture"

METHODS = [  # (title adjective, verb, zh)
    ("fried", "fry", "炒"),
    ("steamed", "steam", "蒸"),
    ("boiled", "boil", "煮"),
    ("roasted", "roast", "烤"),
    ("stewed", "stew", "炖"),
]
MAINS = [
    ("chicken", "鸡肉"), ("beef", "牛肉"), ("pork", "猪肉"), ("fish", "鱼"),
    ("shrimp", "虾仁"), ("tofu", "豆腐"), ("potatoes", "土豆"), ("spinach", "菠菜"),
    ("egg", "鸡蛋"), ("eggplant", "茄子"),
]
EXTRAS = [
    ("onion", "洋葱"), ("ginger", "生姜"), ("garlic", "大蒜"), ("tomato", "番茄"),
    ("mushrooms", "香菇"), ("carrot", "胡萝卜"), ("pepper", "青椒"), ("corn", "玉米"),
]
SEASONINGS = [
    ("1 tbsp sugar", "糖 一勺"), ("2 tbsp soy sauce", "生抽 两勺"), ("1 tbsp vinegar", "醋 一勺"),
    ("1 tsp pepper powder", "胡椒粉 少许"), ("2 tbsp cooking wine", "料酒 两勺"),
    ("1 tbsp starch", "淀粉 一勺"), ("a little sesame oil", "香油 少许"), ("100 g flour", "面粉 100克"),
]


def en_recipe(rid, dish, rng):
    (adj, verb, _), (main, _), (extra, _) = dish
    minutes = rng.choice([5, 10, 15, 20, 30])
    ingredients = [f"300 g {main}", f"1 {extra}", "salt to taste", "a little oil"]
    ingredients += [s[0] for s in rng.sample(SEASONINGS, rng.randint(1, 3))]
    steps = [
        rng.choice([f"Wash the {main} and chop it with a knife.", f"Cut the {main} into pieces."]),
        rng.choice(["Heat the oil in a pot over high heat.", "Heat a little oil in the pot."]),
        rng.choice([f"Add the {extra} and mix well.", f"Add the {extra} and the {main}, then mix."]),
        "Season with salt and sugar.",
        f"{verb.capitalize()} for {minutes} minutes.",
        rng.choice([f"Pour into a bowl and serve the {adj} {main}.", f"Serve the {adj} {main} hot."]),
    ]
    return {"id": rid, "lang": "en", "title": en_title(dish), "ingredients": ingredients, "steps": steps}


def zh_recipe(rid, dish, rng):
    (_, _, zh_method), (_, main), (_, extra) = dish
    minutes = rng.choice([5, 10, 15, 20, 30])
    ingredients = [f"{main} 300克", f"{extra} 一个", "盐 适量", "油 少许"]
    ingredients += [s[1] for s in rng.sample(SEASONINGS, rng.randint(1, 3))]
    steps = [
        rng.choice([f"将{main}洗净，用刀劈开。", f"把{main}洗净切块。"]),
        rng.choice(["锅中倒入油，大火加热。", "锅里放油，中火加热。"]),
        rng.choice([f"放入{extra}翻炒均匀。", f"加入{extra}和{main}，搅拌均匀。"]),
        "加入盐和糖调味。",
        f"{zh_method}{minutes}分钟左右。",
        rng.choice(["倒在碗里，装盘即可。", "出锅装盘即可。"]),
    ]
    return {"id": rid, "lang": "zh", "title": zh_title(dish), "ingredients": ingredients, "steps": steps}


def en_title(dish):
    (adj, _, _), (main, _), (extra, _) = dish
    return f"{adj.capitalize()} {main.capitalize()} with {extra.capitalize()}"


def zh_title(dish):
    (_, _, zh_method), (_, main), (_, extra) = dish
    return f"{zh_method}{extra}{main}"


def malformed(lang, n):
    bad = [
        {"id": f"{lang}-bad-1", "lang": lang, "title": "", "ingredients": ["x"], "steps": ["y"]},
        {"id": f"{lang}-bad-2", "lang": lang, "title": "x", "ingredients": [], "steps": ["y"]},
        {"id": f"{lang}-bad-3", "lang": lang, "title": "x", "ingredients": ["y"]},
        {"id": f"{lang}-bad-4", "lang": lang, "title": "\U0001F600", "ingredients": ["y"], "steps": ["z"]},
    ]
    return bad[:n]


def main():
    rng = random.Random(20231015)
    dishes = [(m, a, e) for m in METHODS for a in MAINS for e in EXTRAS]
    rng.shuffle(dishes)
    shared, en_only, zh_only = dishes[:120], dishes[120:170], dishes[170:220]
    test_dishes = shared[:10]

    en_pool = shared + en_only
    zh_pool = shared + zh_only
    en = [en_recipe(f"en-{i:03d}", en_pool[i % len(en_pool)], rng) for i in range(196)]
    zh = [zh_recipe(f"zh-{i:03d}", zh_pool[i % len(zh_pool)], rng) for i in range(196)]
    en[3]["title"] += " \U0001F60B"
    zh[5]["steps"][0] += "\U0001F525"
    en += malformed("en", 4)
    zh += malformed("zh", 4)

    OUT.mkdir(parents=True, exist_ok=True)
    for name, records in (("en.jsonl", en), ("zh.jsonl", zh)):
        with open(OUT / name, "w", encoding="utf-8") as f:
            for r in records:
                f.write(json.dumps(r, ensure_ascii=False) + "\n")

    titles = sorted({zh_title(d): en_title(d) for d in dishes[:220]}.items())
    with open(OUT / "titles.tsv", "w", encoding="utf-8") as f:
        for zh_t, en_t in titles:
            f.write(f"{zh_t}\t{en_t}\n")

    with open(OUT / "test.jsonl", "w", encoding="utf-8") as f:
        for i, dish in enumerate(test_dishes):
            record = {
                "id": f"test-{i:02d}",
                "source": zh_recipe(f"test-{i:02d}-zh", dish, rng),
                "references": [en_recipe(f"test-{i:02d}-en", dish, rng)],
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
