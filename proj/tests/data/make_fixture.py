"""Regenerates the synthetic evaluation fixture under tests/data/fixture.

Deterministic: running it twice produces identical files.
"""
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).parent / "fixture"
rng = random.Random(20240615)

SENTENCES = [
    "der wiene mar sa'n tweintich minsken op de ynformaasjejûn",
    "it hûs stiet oan 'e feart by de brêge",
    "hja rûn alle dagen nei de merke ta",
    "wy ha justerjûn lang praat oer it waar",
    "de bern boartsje yn 'e tún efter it hûs",
    "hy hat in nije fyts kocht foar syn dochter",
    "it wie in kâlde winter mei in soad snie",
    "sy lêze graach boeken yn 'e bibleteek",
    "de boer melkt de kij moarns betiid",
    "wy geane moarn mei de trein nei ljouwert",
    "it doarp leit midden yn it greide",
    "de skoalle begjint om healwei njoggen",
    "hy skriuwt in brief oan syn beppe",
    "it waar wurdt moarn wer better",
    "de fiskers farre de see op",
    "sy sjonge in liet yn it frysk",
    "de kat leit op 'e bank te sliepen",
    "wy hawwe in moaie dei hân",
    "it iten stiet op 'e tafel",
    "de trein hie in healoere fertraging",
]

TABLE1 = [
    "de wine mat sa'n tweintich minsken op de ynformaasje jûn",
    "de wine moat sa'n tweintich minsken op de ynformaasje jûn",
    "de wiene mat sa'n tweintich minsken op de ynformaasje jûn",
    "de wiene moat sa'n tweintich minsken op de ynformaasje jûn",
    "de wine hat sa'n tweintich minsken op de ynformaasje jûn",
]

CONFUSIONS = ["de", "it", "yn", "en", "mei", "op", "wie", "hat", "dy", "fan", "nei", "te"]


def corrupt(words):
    w = list(words)
    for _ in range(rng.randint(0, 3)):
        op = rng.choice("sdi")
        if op == "s" and w:
            i = rng.randrange(len(w))
            w[i] = w[i][:-1] if len(w[i]) > 2 and rng.random() < 0.5 else rng.choice(CONFUSIONS)
        elif op == "d" and len(w) > 1:
            del w[rng.randrange(len(w))]
        else:
            w.insert(rng.randrange(len(w) + 1), rng.choice(CONFUSIONS))
    return w


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    manifest, nbest = [], []
    for k, ref in enumerate(SENTENCES):
        uid = f"utt{k + 1:02d}"
        manifest.append({"id": uid, "reference": ref, "split": "test",
                         "duration_s": round(1.5 + 0.25 * len(ref.split()), 2)})
        if k == 0:
            hyps = TABLE1
        else:
            seen, hyps = set(), []
            while len(hyps) < 5:
                h = " ".join(corrupt(ref.split()))
                if h not in seen:
                    seen.add(h)
                    hyps.append(h)
        scores = sorted((round(-rng.uniform(0.5, 12.0), 3) for _ in hyps), reverse=True)
        nbest.append({"utt_id": uid,
                      "hypotheses": [{"text": h, "score": s} for h, s in zip(hyps, scores)]})
    write_jsonl(OUT / "manifest.jsonl", manifest)
    write_jsonl(OUT / "nbest.jsonl", nbest)

    examples = []
    for ref in ["de man rydt op 'e fyts nei hûs", "it famke sit by it finster",
                "wy ite jûns om seis oere", "de hûn blaft tsjin de postrinder",
                "sy wennet al jierren yn snits", "hy fytst alle moarnen nei it wurk",
                "de sinne skynt oer it wetter", "wy drinke kofje by beppe",
                "it reint al de hiele dei", "de bus komt te let oan",
                "sy hat in nije baan fûn", "hy lit de hûn út yn it park"]:
        hyps = [" ".join(corrupt(ref.split())) for _ in range(5)]
        examples.append({"nbest": hyps, "reference": ref})
    write_jsonl(OUT / "examples.jsonl", examples)

    with open(OUT / "train.txt", "w", encoding="utf-8") as f:
        for s in SENTENCES[1:]:
            f.write(s + "\n")
        f.write("der wiene in protte minsken op it feest\n")
        f.write("hja wiene wurch nei de lange dei\n")

    # Character-level logits for three short utterances.
    vocab = ["<blank>", "|", "a", "d", "e", "i", "k", "n", "r", "s", "t", "w"]
    (OUT / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    for name, text in [("a01", "de wei"), ("a02", "it raam"), ("a03", "sa dwaen")]:
        labels = []
        for ch in text:
            c = "|" if ch == " " else ch
            c = c if c in vocab else "e"
            if labels and labels[-1] == c:
                labels.append("<blank>")
            labels += [c, c]
        labels.append("<blank>")
        rows = []
        for lab in labels:
            logits = [rng.gauss(0.0, 1.0) for _ in vocab]
            logits[vocab.index(lab)] += 4.0
            logits[0] += 1.0
            mx = max(logits)
            lse = mx + math.log(sum(math.exp(x - mx) for x in logits))
            rows.append([x - lse for x in logits])
        with open(OUT / "logits" / f"{name}.txt", "w") as f:
            f.write(f"{len(rows)} {len(vocab)} 0 0\n")
            for r in rows:
                f.write(" ".join(f"{x:.9f}" for x in r) + "\n")


if __name__ == "__main__":
    main()
