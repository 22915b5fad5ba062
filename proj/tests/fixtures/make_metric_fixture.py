"""Writes metric_pairs.jsonl and metric_expected.json.

Expected BLEU/chrF come from sacrebleu 2.3.1 with default settings. Chinese
sides are segmented with a greedy longest-match segmenter over
data/zh_words.txt and scored with tokenize='none'.

    python3 tests/fixtures/make_metric_fixture.py
"""
import json
import random
import pathlib

import sacrebleu
from sacrebleu.tokenizers.tokenizer_13a import Tokenizer13a

HERE = pathlib.Path(__file__).resolve().parent
DATA = HERE.parent.parent / "data"

EN = [
    ("Preheat the oven to 180C. Mix flour, sugar and 2 eggs in a bowl.",
     ["Preheat oven to 180C. In a bowl, mix the flour, sugar and 2 eggs.",
      "Heat the oven to 180C and combine flour, sugar, and two eggs in a bowl."]),
    ("Chop the onion and fry it in oil for 5-6 minutes.",
     ["Chop the onion; fry in oil for 5-6 minutes until soft.",
      "Dice the onion and saute it in oil for about 5 minutes."]),
    ("Boil the potatoes until tender, then mash with butter.",
     ["Boil potatoes until tender and mash them with butter.",
      "Cook the potatoes in boiling water until soft, then mash with butter & milk."]),
    ("Wash the spinach and drain well.",
     ["Rinse the spinach and drain it well.",
      "Wash spinach thoroughly; drain."]),
    ("Pour the sauce over the chicken and bake for 40 minutes.",
     ["Pour sauce over the chicken, then bake 40 minutes.",
      "Cover the chicken with the sauce and roast for 40 min."]),
    ("Season with salt and pepper to taste.",
     ["Season to taste with salt and pepper.",
      "Add salt & pepper to taste."]),
    ("Steam the fish for 8 minutes over high heat.",
     ["Steam fish over high heat for 8 minutes.",
      "Cook the fish in a steamer on high heat, 8 minutes."]),
    ("Slice the apples thinly and toss with lemon juice.",
     ["Thinly slice the apples and toss them in lemon juice.",
      "Cut apples into thin slices; coat with lemon juice."]),
    ("Serve hot with rice.",
     ["Serve hot, with steamed rice.",
      "Serve immediately with rice."]),
    ("Whisk 1/2 cup milk with the \"secret\" spice mix (about 1.5 tsp).",
     ["Whisk half a cup of milk with the spice mix (1.5 tsp).",
      "Beat 1/2 cup milk together with the spice blend."]),
]

ZH = [
    ("将菠菜洗净，切段。", ["菠菜洗净后切成段。"]),
    ("锅中放油，加入洋葱炒香。", ["锅里倒油，放洋葱炒出香味。"]),
    ("土豆去皮切块，用盐腌10分钟。", ["土豆削皮切块，加盐腌制10分钟。"]),
    ("面粉加水和成面团。", ["把面粉和水揉成面团。"]),
    ("鸡肉切块，焯水后捞出。", ["鸡切块焯水，捞出备用。"]),
    ("红豆提前浸泡一夜，小火煮30分钟。", ["红豆泡一晚，小火煮半小时。"]),
    ("加入糖和酱油，翻炒均匀。", ["放糖、酱油，炒匀。"]),
    ("蛋打散，倒入碗中。", ["鸡蛋打散后倒进碗里。"]),
    ("大火蒸15分钟即可。", ["上锅大火蒸15分钟。"]),
    ("苹果切片，撒上少许糖。", ["苹果切成片，撒点糖。"]),
]


def load_words():
    words = set()
    for line in (DATA / "zh_words.txt").read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        words.add(line.split()[0])
    return words


def segment(text, words):
    longest = max(len(w) for w in words)
    out, i = [], 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        size = 0
        for n in range(min(longest, len(text) - i), 0, -1):
            if text[i:i + n] in words:
                size = n
                break
        if size == 0:
            size = 1
            if text[i].isascii() and text[i].isalnum():
                while i + size < len(text) and text[i + size].isascii() and text[i + size].isalnum():
                    size += 1
        out.append(text[i:i + size])
        i += size
    return " ".join(out)


def random_pairs(n, seed):
    """Short noisy English pairs; single-pair corpus scores exercise smoothing."""
    rng = random.Random(seed)
    vocab = ["salt", "oil", "the", "a", "pan", "stir", "2", "3.5", "cup", "-", ",", ".",
             "(", ")", "5-6", "don't", "heat", "&", "mix", "café"]
    out = []
    for _ in range(n):
        hyp = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
        refs = [" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
                for _ in range(rng.randint(1, 3))]
        out.append({"hypothesis": hyp, "references": refs,
                    "bleu": sacrebleu.corpus_bleu([hyp], [[r] for r in refs]).score,
                    "chrf": sacrebleu.corpus_chrf([hyp], [[r] for r in refs]).score})
    return out


def main():
    words = load_words()
    tok13a = Tokenizer13a()
    records = []
    for hyp, refs in EN:
        records.append({"lang": "en", "hypothesis": hyp, "references": refs})
    for hyp, refs in ZH:
        records.append({"lang": "zh", "hypothesis": hyp, "references": refs})
    with open(HERE / "metric_pairs.jsonl", "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")

    expected = {}
    en_h = [h for h, _ in EN]
    en_r = [[r[i] for _, r in EN] for i in range(2)]
    zh_h = [segment(h, words) for h, _ in ZH]
    zh_r = [[segment(r[0], words) for _, r in ZH]]
    expected["en"] = {"bleu": sacrebleu.corpus_bleu(en_h, en_r).score,
                      "chrf": sacrebleu.corpus_chrf(en_h, en_r).score}
    expected["zh"] = {"bleu": sacrebleu.corpus_bleu(zh_h, zh_r, tokenize="none").score,
                      "chrf": sacrebleu.corpus_chrf([h for h, _ in ZH], [[r[0] for _, r in ZH]]).score}
    # All twenty pairs: en pre-tokenized with 13a, zh pre-segmented; the
    # second reference stream is empty for zh.
    all_h = [tok13a(h) for h in en_h] + zh_h
    all_r = [[tok13a(r) for r in en_r[0]] + zh_r[0], [tok13a(r) for r in en_r[1]] + [None] * len(ZH)]
    chrf_h = en_h + [h for h, _ in ZH]
    chrf_r = [en_r[0] + [r[0] for _, r in ZH], en_r[1] + [None] * len(ZH)]
    expected["all"] = {"bleu": sacrebleu.corpus_bleu(all_h, all_r, tokenize="none").score,
                       "chrf": sacrebleu.corpus_chrf(chrf_h, chrf_r).score}
    expected["random_pairs"] = random_pairs(100, 7)
    expected["scorer"] = f"sacrebleu {sacrebleu.__version__}"
    (HERE / "metric_expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    print(json.dumps(expected, indent=2))


if __name__ == "__main__":
    main()
